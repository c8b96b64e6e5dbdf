"""Bernoulli mixture networks: per-node CPDs mixed over parent-subset submodels.

Each node keeps its candidate parents from the base structure. A submodel
selects a subset of those parents and stores its CPT over the subset's own
configurations, shape ``(R'_m, Q_i)``. :class:`SubsetProjection` maps a
full candidate configuration to the submodel's configuration.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Optional, Sequence

import numpy as np

from .errors import GuardError, NetworkError
from .network import (
    MISSING,
    DiscreteNetwork,
    NodeSpec,
    ParentConfigCodec,
    _case_array,
    case_log_likelihoods,
    family_indices,
)

MAX_GLOBAL_STRUCTURES = 100_000
_SUM_TOL = 1e-12


def enumerate_substructures(candidates: Sequence[int], cap: int) -> list[tuple[int, ...]]:
    """All subsets of ``candidates`` with at most ``cap`` members.

    Ordered by size, then lexicographically by position in ``candidates``;
    members keep the candidate order.
    """
    candidates = tuple(candidates)
    if not 0 <= cap <= len(candidates):
        raise NetworkError(f"cap {cap} outside [0, {len(candidates)}]")
    out = []
    for size in range(cap + 1):
        out.extend(itertools.combinations(candidates, size))
    return out


def substructure_count(n_candidates: int, cap: int) -> int:
    return sum(comb(n_candidates, p) for p in range(cap + 1))


@dataclass(frozen=True, eq=False)
class SubsetProjection:
    """Full candidate-configuration index -> subset-configuration index."""

    cards: tuple[int, ...]
    keep: tuple[int, ...]  # positions within the candidate list
    index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        full = ParentConfigCodec(tuple(self.cards))
        if any(not 0 <= t < len(self.cards) for t in self.keep) or list(self.keep) != sorted(set(self.keep)):
            raise NetworkError(f"kept positions {self.keep} are not an ordered subset of {len(self.cards)} parents")
        digits = np.array(np.unravel_index(np.arange(full.size), self.cards)) if self.cards else np.zeros((0, 1), int)
        k = np.zeros(full.size, dtype=np.int64)
        for t in self.keep:
            k = k * self.cards[t] + digits[t]
        k.setflags(write=False)
        object.__setattr__(self, "index", k)

    @functools.cached_property
    def size(self) -> int:
        return int(np.prod([self.cards[t] for t in self.keep], dtype=np.int64))


@functools.lru_cache(maxsize=4096)
def _projection(cards: tuple[int, ...], keep: tuple[int, ...]) -> SubsetProjection:
    return SubsetProjection(cards, keep)


@dataclass(frozen=True, eq=False)
class Submodel:
    parents: tuple[int, ...]  # node indices, a subset of the candidate parents
    cpt: np.ndarray = field(repr=False)
    weight: float = 1.0


@dataclass(frozen=True, eq=False)
class MixtureNetwork:
    """A base structure (candidate parents per node) plus submodels per node."""

    base: DiscreteNetwork
    submodels: tuple[tuple[Submodel, ...], ...]

    def __post_init__(self):
        base = self.base.skeleton() if not self.base.is_skeleton else self.base
        if len(self.submodels) != len(base):
            raise NetworkError("need one submodel list per node")
        fixed, projections = [], []
        for i, subs in enumerate(self.submodels):
            node = base.nodes[i]
            cands = node.parents
            cards = base.parent_cards(i)
            if not subs:
                raise NetworkError(f"node {node.name!r} has no submodels")
            seen = set()
            node_subs, node_proj = [], []
            for sub in subs:
                parents = tuple(int(p) for p in sub.parents)
                if not set(parents) <= set(cands):
                    raise NetworkError(f"submodel parents {parents} of {node.name!r} are not candidates")
                parents = tuple(p for p in cands if p in parents)
                if parents in seen:
                    raise NetworkError(f"duplicate submodel {parents} on node {node.name!r}")
                seen.add(parents)
                proj = _projection(cards, tuple(cands.index(p) for p in parents))
                cpt = np.array(sub.cpt, dtype=np.float64)
                if cpt.shape != (proj.size, node.states):
                    raise NetworkError(
                        f"submodel CPT on {node.name!r} has shape {cpt.shape}, expected {(proj.size, node.states)}"
                    )
                if np.any(cpt < 0) or np.any(np.abs(cpt.sum(axis=1) - 1.0) > _SUM_TOL):
                    raise NetworkError(f"submodel CPT on {node.name!r} is not row-stochastic")
                cpt.setflags(write=False)
                node_subs.append(Submodel(parents, cpt, float(sub.weight)))
                node_proj.append(proj)
            w = np.array([s.weight for s in node_subs])
            if np.any(w < 0) or abs(w.sum() - 1.0) > _SUM_TOL:
                raise NetworkError(f"mixture weights on {node.name!r} do not form a distribution")
            fixed.append(tuple(node_subs))
            projections.append(tuple(node_proj))
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "submodels", tuple(fixed))
        object.__setattr__(self, "_projections", tuple(projections))

    @classmethod
    def from_tables(cls, base, subsets, cpts, weights) -> "MixtureNetwork":
        """Assemble from per-node lists of subsets, CPTs and weights."""
        return cls(
            base,
            tuple(
                tuple(Submodel(s, c, w) for s, c, w in zip(ss, cc, ww))
                for ss, cc, ww in zip(subsets, cpts, weights)
            ),
        )

    def __len__(self) -> int:
        return len(self.base)

    def projection(self, i: int, m: int) -> SubsetProjection:
        return self._projections[i][m]

    def weights(self, i: int) -> np.ndarray:
        return np.array([s.weight for s in self.submodels[i]])

    def subsets(self, i: int) -> list[tuple[int, ...]]:
        return [s.parents for s in self.submodels[i]]

    def expanded(self, i: int) -> np.ndarray:
        """Submodel CPTs read through full candidate configurations, ``(M_i, R_i, Q_i)``."""
        return np.stack([s.cpt[p.index] for s, p in zip(self.submodels[i], self._projections[i])])

    def component_counts(self) -> list[int]:
        return [len(s) for s in self.submodels]

    def with_parameters(self, cpts=None, weights=None, check: bool = True) -> "MixtureNetwork":
        """Copy with some per-node submodel CPT lists and/or weight vectors replaced.

        ``check=False`` skips validation; the EM driver uses it for updates
        that are normalized by construction.
        """
        nodes = []
        for i, subs in enumerate(self.submodels):
            cc = [s.cpt for s in subs] if cpts is None else cpts[i]
            ww = [s.weight for s in subs] if weights is None else weights[i]
            nodes.append(tuple(Submodel(s.parents, c, float(w)) for s, c, w in zip(subs, cc, ww)))
        if check:
            return MixtureNetwork(self.base, tuple(nodes))
        out = object.__new__(MixtureNetwork)
        object.__setattr__(out, "base", self.base)
        object.__setattr__(out, "submodels", tuple(nodes))
        object.__setattr__(out, "_projections", self._projections)
        return out


def normalize_caps(base: DiscreteNetwork, caps) -> list[int]:
    """``None`` -> all candidates; an int broadcasts (clipped per node); a list is checked."""
    n_cands = [len(n.parents) for n in base.nodes]
    if caps is None:
        return n_cands
    if isinstance(caps, (int, np.integer)):
        if caps < 0:
            raise NetworkError("cap must be non-negative")
        return [min(int(caps), p) for p in n_cands]
    caps = [int(c) for c in caps]
    if len(caps) != len(base):
        raise NetworkError(f"need {len(base)} caps, got {len(caps)}")
    for c, p, node in zip(caps, n_cands, base.nodes):
        if not 0 <= c <= p:
            raise NetworkError(f"cap {c} on {node.name!r} outside [0, {p}]")
    return caps


def capped_subsets(base: DiscreteNetwork, caps=None) -> list[list[tuple[int, ...]]]:
    caps = normalize_caps(base, caps)
    return [enumerate_substructures(n.parents, c) for n, c in zip(base.nodes, caps)]


def uniform_mixture(base: DiscreteNetwork, subsets) -> MixtureNetwork:
    """Uniform submodel CPTs and uniform weights over the given subsets."""
    cpts, weights = [], []
    for i, ss in enumerate(subsets):
        q = base.nodes[i].states
        cpts.append([np.full((int(np.prod([base.nodes[p].states for p in s], dtype=np.int64)), q), 1.0 / q) for s in ss])
        weights.append([1.0 / len(ss)] * len(ss))
    return MixtureNetwork.from_tables(base, subsets, cpts, weights)


def random_mixture(base: DiscreteNetwork, subsets, seed, concentration: float = 1.0) -> MixtureNetwork:
    """Dirichlet-random submodel CPTs and weights."""
    rng = np.random.default_rng(seed)
    cpts, weights = [], []
    for i, ss in enumerate(subsets):
        q = base.nodes[i].states
        node_cpts = []
        for s in ss:
            r = int(np.prod([base.nodes[p].states for p in s], dtype=np.int64))
            rows = rng.dirichlet(np.full(q, concentration), size=r)
            node_cpts.append(rows / rows.sum(axis=1, keepdims=True))
        w = rng.dirichlet(np.full(len(ss), concentration))
        w = w / w.sum()
        cpts.append(node_cpts)
        weights.append(list(w))
    return MixtureNetwork.from_tables(base, subsets, cpts, weights)


def collapse(mix: MixtureNetwork) -> DiscreteNetwork:
    """Conventional network over the full candidate parents with CPT sum_m psi_m theta_m."""
    cpts = []
    for i, subs in enumerate(mix.submodels):
        node = mix.base.nodes[i]
        bar = np.zeros((mix.base.codec(i).size, node.states))
        for s, p in zip(subs, mix._projections[i]):
            bar += s.weight * s.cpt[p.index]
        cpts.append(bar)
    return mix.base.with_cpts(cpts)


def node_mixture_probs(mix: MixtureNetwork, values: np.ndarray, i: int) -> np.ndarray:
    """Per-row mixture probability of node ``i``'s observed family state."""
    k, j = family_indices(mix.base, values, i)
    return mix.weights(i) @ mix.expanded(i)[:, k, j]


def bmn_case_log_likelihoods(mix: MixtureNetwork, values: np.ndarray) -> np.ndarray:
    total = np.zeros(values.shape[0])
    with np.errstate(divide="ignore"):
        for i in range(len(mix)):
            total += np.log(node_mixture_probs(mix, values, i))
    return total


def bmn_log_likelihood(mix: MixtureNetwork, case) -> float:
    """Sum over nodes of log sum_m psi_m theta_m(child | projected parents)."""
    row = _case_array(mix.base, case)
    if np.any(row == MISSING):
        raise NetworkError("bmn_log_likelihood needs a complete case")
    return float(bmn_case_log_likelihoods(mix, row.reshape(1, -1))[0])


@dataclass(frozen=True, eq=False)
class GlobalStructure:
    """One member of a restricted-order mixture of Bayesian networks."""

    choice: tuple[int, ...]  # submodel index per node
    weight: float
    network: DiscreteNetwork


def build_restricted_mbn(mix: MixtureNetwork, limit: int = MAX_GLOBAL_STRUCTURES) -> list[GlobalStructure]:
    """Expand a BMN into the equivalent mixture over global structures.

    One structure per element of the cross product of per-node submodels,
    weighted by the product of the chosen per-node weights.
    """
    counts = mix.component_counts()
    total = int(np.prod(counts, dtype=object))
    if total > limit:
        raise GuardError(f"{total} global structures exceed the limit of {limit}")
    base = mix.base
    out = []
    for choice in itertools.product(*(range(c) for c in counts)):
        nodes, weight = [], 1.0
        for i, m in enumerate(choice):
            sub = mix.submodels[i][m]
            node = base.nodes[i]
            nodes.append(NodeSpec(node.name, node.states, sub.parents, sub.cpt))
            weight *= sub.weight
        out.append(GlobalStructure(tuple(choice), weight, DiscreteNetwork(tuple(nodes))))
    return out


def mbn_case_log_likelihoods(mbn: Sequence[GlobalStructure], values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        terms = np.stack([np.log(g.weight) + case_log_likelihoods(g.network, values) for g in mbn])
    return np.logaddexp.reduce(terms, axis=0)


def mbn_log_likelihood(mbn: Sequence[GlobalStructure], case) -> float:
    """log sum_m Psi_m prod_i theta_{m,i}; the sum-of-products form."""
    if not mbn:
        raise NetworkError("empty mixture of networks")
    row = _case_array(mbn[0].network, case)
    if np.any(row == MISSING):
        raise NetworkError("mbn_log_likelihood needs a complete case")
    return float(mbn_case_log_likelihoods(mbn, row.reshape(1, -1))[0])
