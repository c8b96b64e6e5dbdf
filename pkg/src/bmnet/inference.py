"""Exact family posteriors and expected family counts on small networks.

Posteriors are computed by variable elimination: the CPT factors are reduced
by the observed evidence and contracted with ``numpy.einsum`` (greedy
contraction order) down to the hidden members of the queried family. Cases
are batched by missingness pattern, with the case index kept as an extra
output axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NetworkError
from .network import MISSING, DiscreteNetwork, Dataset, _case_array, aligned_values, family_indices


@dataclass(frozen=True, eq=False)
class FamilyCountTable:
    """Per-node (expected) counts, each shaped like the node's CPT ``(R_i, Q_i)``."""

    tables: tuple[np.ndarray, ...]

    def __getitem__(self, i: int) -> np.ndarray:
        return self.tables[i]

    def __len__(self) -> int:
        return len(self.tables)

    def totals(self) -> np.ndarray:
        return np.array([t.sum() for t in self.tables])

    def __add__(self, other: "FamilyCountTable") -> "FamilyCountTable":
        return FamilyCountTable(tuple(a + b for a, b in zip(self.tables, other.tables)))


_BATCH = 0  # einsum label of the case axis; node i gets label i + 1


def _reduced_factors(net: DiscreteNetwork, rows: np.ndarray, hidden: np.ndarray):
    """Evidence-reduced CPT factors for rows sharing the hidden-variable set."""
    if len(net) > 50:
        raise NetworkError("exact inference supports at most 50 nodes")
    operands = [np.ones(rows.shape[0]), [_BATCH]]
    for i, node in enumerate(net.nodes):
        family = list(node.parents) + [i]
        shape = [net.nodes[v].states for v in family]
        table = node.cpt.reshape(shape)
        obs = [t for t, v in enumerate(family) if not hidden[v]]
        hid = [t for t, v in enumerate(family) if hidden[v]]
        labels = [family[t] + 1 for t in hid]
        if obs:
            table = np.transpose(table, obs + hid)
            table = table[tuple(rows[:, family[t]] for t in obs)]
            labels = [_BATCH] + labels
        operands += [table, labels]
    return operands


def _family_batch(net, rows, hidden, i, operands):
    family = list(net.nodes[i].parents) + [i]
    fam_cards = [net.nodes[v].states for v in family]
    obs = [t for t, v in enumerate(family) if not hidden[v]]
    hid = [t for t, v in enumerate(family) if hidden[v]]
    n = rows.shape[0]
    joint = np.einsum(*operands, [_BATCH] + [family[t] + 1 for t in hid], optimize="greedy")
    evidence = joint.reshape(n, -1).sum(axis=1)
    if np.any(evidence <= 0):
        raise NetworkError("a case has zero probability under the network")
    out = np.zeros((n,) + tuple(fam_cards[t] for t in obs + hid))
    out[(np.arange(n),) + tuple(rows[:, family[t]] for t in obs)] = joint / evidence.reshape((n,) + (1,) * len(hid))
    inverse = np.argsort(obs + hid)
    out = np.transpose(out, [0] + [1 + t for t in inverse])
    return out.reshape(n, -1, fam_cards[-1])


def _patterns(values: np.ndarray):
    """Group row indices by missingness pattern (deterministic order)."""
    mask = values == MISSING
    pats, inverse = np.unique(mask, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    for p in range(pats.shape[0]):
        yield pats[p], np.flatnonzero(inverse == p)


def family_posteriors(net: DiscreteNetwork, values: np.ndarray, i: int) -> np.ndarray:
    """Posterior family tables ``(n, R_i, Q_i)`` for rows in network order."""
    net._require_cpts()
    out = np.empty((values.shape[0], net.codec(i).size, net.nodes[i].states))
    for hidden, idx in _patterns(values):
        rows = values[idx]
        out[idx] = _family_batch(net, rows, hidden, i, _reduced_factors(net, rows, hidden))
    return out


def family_posterior(net: DiscreteNetwork, case, node: int) -> np.ndarray:
    """P(child = j, parents = k | case) as an ``(R_i, Q_i)`` table."""
    row = _case_array(net, case)
    if not 0 <= node < len(net):
        raise NetworkError(f"node index {node} out of range")
    return family_posteriors(net, row.reshape(1, -1), node)[0]


def evidence_log_likelihoods(net: DiscreteNetwork, values: np.ndarray) -> np.ndarray:
    """log P(observed entries) per row; complete rows reduce to the joint likelihood."""
    net._require_cpts()
    out = np.empty(values.shape[0])
    for hidden, idx in _patterns(values):
        rows = values[idx]
        operands = _reduced_factors(net, rows, hidden)
        p = np.einsum(*operands, [_BATCH], optimize="greedy")
        with np.errstate(divide="ignore"):
            out[idx] = np.log(p)
    return out


def observed_score(net: DiscreteNetwork, data: Dataset) -> float:
    """Observed-data log-likelihood per case; handles missing entries."""
    if len(data) == 0:
        raise NetworkError("cannot score an empty dataset")
    values = aligned_values(net, data)
    return float(evidence_log_likelihoods(net, values).sum() / len(data))


def complete_counts(net: DiscreteNetwork, values: np.ndarray, weights=None) -> FamilyCountTable:
    """Tabulated family counts of complete rows (optionally weighted)."""
    tables = []
    for i, node in enumerate(net.nodes):
        k, j = family_indices(net, values, i)
        tables.append(_kernels.tabulate(k, j, weights, net.codec(i).size, node.states))
    return FamilyCountTable(tuple(tables))


def split_rows(values: np.ndarray):
    """Complete rows, plus unique incomplete rows with their multiplicities."""
    incomplete = np.any(values == MISSING, axis=1)
    complete = np.ascontiguousarray(values[~incomplete])
    if not incomplete.any():
        return complete, values[:0], np.zeros(0)
    uniq, counts = np.unique(values[incomplete], axis=0, return_counts=True)
    return complete, uniq, counts.astype(np.float64)


def expected_family_counts(net: DiscreteNetwork, data: Dataset) -> FamilyCountTable:
    """N_ijk = sum over cases of the family posterior under ``net``."""
    values = aligned_values(net, data)
    complete, uniq, mult = split_rows(values)
    counts = complete_counts(net, complete)
    if uniq.shape[0]:
        counts = counts + _incomplete_counts(net, uniq, mult)
    return counts


def _incomplete_counts(net, uniq, mult) -> FamilyCountTable:
    tables = [np.zeros((net.codec(i).size, n.states)) for i, n in enumerate(net.nodes)]
    for hidden, idx in _patterns(uniq):
        rows = uniq[idx]
        operands = _reduced_factors(net, rows, hidden)
        for i in range(len(net)):
            post = _family_batch(net, rows, hidden, i, operands)
            tables[i] += np.tensordot(mult[idx], post, axes=1)
    return FamilyCountTable(tuple(tables))
