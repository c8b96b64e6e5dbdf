"""Discrete Bayesian networks with a fixed node ordering.

A network is a tuple of :class:`NodeSpec` in topological order; each node's
parents are indices of strictly earlier nodes. CPTs are stored as arrays of
shape ``(R_i, Q_i)``: one row per parent configuration, one column per state.
Parent configurations use a mixed-radix index with the first listed parent as
the most significant digit, which is also the row order of the JSON format.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import NetworkError

MISSING = -1
_SUM_TOL = 1e-12


def _frozen_array(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ParentConfigCodec:
    """Bijection between joint parent states and the flat configuration index."""

    cards: tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.cards, dtype=np.int64)) if self.cards else 1

    def encode(self, states: Sequence[int]) -> int:
        if len(states) != len(self.cards):
            raise NetworkError(f"expected {len(self.cards)} parent states, got {len(states)}")
        k = 0
        for s, r in zip(states, self.cards):
            if not 0 <= s < r:
                raise NetworkError(f"parent state {s} out of range for cardinality {r}")
            k = k * r + int(s)
        return k

    def decode(self, k: int) -> tuple[int, ...]:
        if not 0 <= k < self.size:
            raise NetworkError(f"configuration index {k} out of range [0, {self.size})")
        out = []
        for r in reversed(self.cards):
            k, s = divmod(k, r)
            out.append(s)
        return tuple(reversed(out))

    def encode_rows(self, values: np.ndarray, cols: Sequence[int]) -> np.ndarray:
        """Vectorized encode of ``values[:, cols]`` (complete rows only)."""
        return _kernels.encode_rows(
            np.ascontiguousarray(values, dtype=np.int64),
            np.asarray(cols, dtype=np.int64),
            np.asarray(self.cards, dtype=np.int64),
        )


@dataclass(frozen=True, eq=False)
class NodeSpec:
    name: str
    states: int
    parents: tuple[int, ...] = ()
    cpt: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(frozen=True, eq=False)
class DiscreteNetwork:
    """Immutable discrete BN. ``cpt`` may be absent on every node (a skeleton)."""

    nodes: tuple[NodeSpec, ...]

    def __post_init__(self):
        nodes = tuple(self.nodes)
        names = [n.name for n in nodes]
        if len(set(names)) != len(names):
            raise NetworkError(f"duplicate node names in {names}")
        has_cpt = [n.cpt is not None for n in nodes]
        if any(has_cpt) and not all(has_cpt):
            raise NetworkError("either every node carries a CPT or none does")
        fixed = []
        for i, node in enumerate(nodes):
            if int(node.states) < 2:
                raise NetworkError(f"node {node.name!r} needs at least 2 states")
            parents = tuple(int(p) for p in node.parents)
            if len(set(parents)) != len(parents):
                raise NetworkError(f"node {node.name!r} lists a parent twice")
            for p in parents:
                if not 0 <= p < i:
                    raise NetworkError(
                        f"parent index {p} of node {node.name!r} does not precede it in the ordering"
                    )
            cpt = None
            if node.cpt is not None:
                r = int(np.prod([nodes[p].states for p in parents], dtype=np.int64))
                cpt = _frozen_array(node.cpt, np.float64)
                if cpt.shape != (r, node.states):
                    raise NetworkError(
                        f"CPT of {node.name!r} has shape {cpt.shape}, expected {(r, node.states)}"
                    )
                if np.any(cpt < 0) or not np.all(np.isfinite(cpt)):
                    raise NetworkError(f"CPT of {node.name!r} has negative or non-finite entries")
                if np.any(np.abs(cpt.sum(axis=1) - 1.0) > _SUM_TOL):
                    raise NetworkError(f"CPT rows of {node.name!r} do not sum to 1")
            fixed.append(NodeSpec(str(node.name), int(node.states), parents, cpt))
        object.__setattr__(self, "nodes", tuple(fixed))

    @classmethod
    def from_edges(cls, names, cards, edges, cpts=None) -> "DiscreteNetwork":
        """Build from node names, cardinalities and ``(parent, child)`` name pairs.

        Parents of each node are listed in node order.
        """
        index = {n: i for i, n in enumerate(names)}
        parents = [[] for _ in names]
        for a, b in edges:
            parents[index[b]].append(index[a])
        nodes = []
        for i, name in enumerate(names):
            cpt = None if cpts is None else cpts[i]
            nodes.append(NodeSpec(name, cards[i], tuple(sorted(parents[i])), cpt))
        return cls(tuple(nodes))

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes)

    @property
    def cards(self) -> tuple[int, ...]:
        return tuple(n.states for n in self.nodes)

    @property
    def is_skeleton(self) -> bool:
        return bool(self.nodes) and self.nodes[0].cpt is None

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise NetworkError(f"unknown node {name!r}") from None

    def parent_cards(self, i: int) -> tuple[int, ...]:
        return tuple(self.nodes[p].states for p in self.nodes[i].parents)

    def codec(self, i: int) -> ParentConfigCodec:
        return ParentConfigCodec(self.parent_cards(i))

    def edges(self) -> list[tuple[int, int]]:
        return [(p, i) for i, n in enumerate(self.nodes) for p in n.parents]

    def skeleton(self) -> "DiscreteNetwork":
        return DiscreteNetwork(tuple(NodeSpec(n.name, n.states, n.parents) for n in self.nodes))

    def with_cpts(self, cpts) -> "DiscreteNetwork":
        return DiscreteNetwork(
            tuple(NodeSpec(n.name, n.states, n.parents, c) for n, c in zip(self.nodes, cpts))
        )

    def log_cpts(self) -> list[np.ndarray]:
        self._require_cpts()
        with np.errstate(divide="ignore"):
            return [np.log(n.cpt) for n in self.nodes]

    def _require_cpts(self):
        if self.is_skeleton:
            raise NetworkError("operation needs CPTs but the network is a skeleton")


@dataclass(frozen=True, eq=False)
class Dataset:
    """N cases over named nodes; states are 0-based, ``MISSING`` (-1) marks a gap."""

    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.int64, copy=True)
        if values.ndim == 1:
            values = values.reshape(1, -1) if values.size else values.reshape(0, len(self.names))
        if values.ndim != 2 or values.shape[1] != len(self.names):
            raise NetworkError(f"dataset values shape {values.shape} does not match {len(self.names)} names")
        if np.any(values < MISSING):
            raise NetworkError("dataset holds negative states other than MISSING")
        values.setflags(write=False)
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def missing_mask(self) -> np.ndarray:
        return self.values == MISSING

    @property
    def is_complete(self) -> bool:
        return not bool(np.any(self.values == MISSING))

    def select(self, names: Sequence[str]) -> "Dataset":
        """Reorder (or subset) columns to ``names``."""
        try:
            cols = [self.names.index(n) for n in names]
        except ValueError as exc:
            raise NetworkError(f"dataset has no column for {exc}") from None
        return Dataset(tuple(names), self.values[:, cols])


def aligned_values(net: DiscreteNetwork, data: Dataset) -> np.ndarray:
    """Dataset values with columns in network order, range-checked."""
    if data.names != net.names:
        if sorted(data.names) != sorted(net.names):
            raise NetworkError(f"dataset columns {data.names} do not match network nodes {net.names}")
        data = data.select(net.names)
    values = data.values
    cards = np.asarray(net.cards, dtype=np.int64)
    if values.size and np.any(values >= cards[None, :]):
        raise NetworkError("dataset holds a state outside its node's cardinality")
    return values


def _case_array(net: DiscreteNetwork, case) -> np.ndarray:
    row = np.asarray(case, dtype=np.int64).reshape(-1)
    if row.size != len(net):
        raise NetworkError(f"case has {row.size} entries, network has {len(net)} nodes")
    if np.any(row >= np.asarray(net.cards)) or np.any(row < MISSING):
        raise NetworkError("case holds a state outside its node's cardinality")
    return row


def family_indices(net: DiscreteNetwork, values: np.ndarray, i: int) -> tuple[np.ndarray, np.ndarray]:
    """(parent-config index, child state) per complete row for node ``i``."""
    k = net.codec(i).encode_rows(values, net.nodes[i].parents)
    return k, np.ascontiguousarray(values[:, i], dtype=np.int64)


def case_log_likelihoods(net: DiscreteNetwork, values: np.ndarray) -> np.ndarray:
    """Per-row joint log-likelihood of complete rows already in network order."""
    logs = net.log_cpts()
    total = np.zeros(values.shape[0])
    for i in range(len(net)):
        k, j = family_indices(net, values, i)
        total += logs[i][k, j]
    return total


def joint_log_likelihood(net: DiscreteNetwork, case) -> float:
    """Natural-log probability of one complete case; ``-inf`` if any factor is 0."""
    row = _case_array(net, case)
    if np.any(row == MISSING):
        raise NetworkError("joint_log_likelihood needs a complete case")
    return float(case_log_likelihoods(net, row.reshape(1, -1))[0])


def dataset_log_likelihood(net: DiscreteNetwork, data: Dataset) -> float:
    values = aligned_values(net, data)
    if np.any(values == MISSING):
        raise NetworkError("dataset_score needs complete data; use inference.observed_score")
    logs = net.log_cpts()
    total = 0.0
    for i in range(len(net)):
        k, j = family_indices(net, values, i)
        total += _kernels.loglik_sum(logs[i], k, j)
    return total


def dataset_score(net: DiscreteNetwork, data: Dataset) -> float:
    """Log-likelihood per case (nats)."""
    if len(data) == 0:
        raise NetworkError("cannot score an empty dataset")
    return dataset_log_likelihood(net, data) / len(data)


def _flat_tables(net: DiscreteNetwork):
    cums, offsets = [], [0]
    par_ptr, par_cols, par_radix = [0], [], []
    for i, node in enumerate(net.nodes):
        cum = np.cumsum(node.cpt, axis=1)
        cums.append(cum.ravel())
        offsets.append(offsets[-1] + cum.size)
        par_cols.extend(node.parents)
        par_radix.extend(net.parent_cards(i))
        par_ptr.append(len(par_cols))
    i64 = np.int64
    return (
        np.concatenate(cums),
        np.asarray(offsets, dtype=i64),
        np.asarray(net.cards, dtype=i64),
        np.asarray(par_ptr, dtype=i64),
        np.asarray(par_cols, dtype=i64),
        np.asarray(par_radix, dtype=i64),
    )


def sample(net: DiscreteNetwork, n: int, seed) -> Dataset:
    """Ancestral sampling of ``n`` complete cases; reproducible for a given seed."""
    if n < 1:
        raise NetworkError("sample size must be at least 1")
    net._require_cpts()
    rng = np.random.default_rng(seed)
    u = rng.random((n, len(net)))
    values = _kernels.ancestral_sample(u, *_flat_tables(net))
    return Dataset(net.names, values)


def random_cpts(skeleton: DiscreteNetwork, seed, concentration: float = 1.0) -> DiscreteNetwork:
    """Fill a skeleton with CPT rows drawn from a symmetric Dirichlet."""
    rng = np.random.default_rng(seed)
    cpts = []
    for i, node in enumerate(skeleton.nodes):
        r = skeleton.codec(i).size
        rows = rng.dirichlet(np.full(node.states, concentration), size=r)
        cpts.append(rows / rows.sum(axis=1, keepdims=True))
    return skeleton.with_cpts(cpts)


def uniform_cpts(skeleton: DiscreteNetwork) -> DiscreteNetwork:
    return skeleton.with_cpts(
        [np.full((skeleton.codec(i).size, n.states), 1.0 / n.states) for i, n in enumerate(skeleton.nodes)]
    )


def full_structure(names, cards) -> DiscreteNetwork:
    """Skeleton in which every node takes all earlier nodes as parents."""
    return DiscreteNetwork(
        tuple(NodeSpec(name, c, tuple(range(i))) for i, (name, c) in enumerate(zip(names, cards)))
    )


def reorder(net: DiscreteNetwork, ordering: Sequence[str]) -> DiscreteNetwork:
    """Same graph with nodes listed in ``ordering``; needs ``ordering`` to be topological.

    CPT rows are permuted to follow the new parent order.
    """
    if sorted(ordering) != sorted(net.names):
        raise NetworkError(f"ordering {ordering} is not a permutation of {net.names}")
    pos = {name: t for t, name in enumerate(ordering)}
    nodes = []
    for name in ordering:
        old = net.nodes[net.index(name)]
        old_parents = [net.nodes[p].name for p in old.parents]
        new_parents = sorted(old_parents, key=pos.__getitem__)
        cpt = old.cpt
        if cpt is not None and old_parents:
            cards = [net.nodes[net.index(p)].states for p in old_parents]
            perm = [old_parents.index(p) for p in new_parents]
            cpt = cpt.reshape(*cards, old.states).transpose(*perm, len(cards)).reshape(cpt.shape)
        nodes.append(NodeSpec(name, old.states, tuple(pos[p] for p in new_parents), cpt))
    return DiscreteNetwork(tuple(nodes))
