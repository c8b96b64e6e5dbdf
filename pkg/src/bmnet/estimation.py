"""MAP estimation of mixture networks by EM.

Submodel counts are marginalizations of one shared family-count table,
computed under the collapsed network; responsibilities only drive the
mixture-weight update. With complete data the submodel CPTs are therefore
fixed after the first update and EM reduces to mixture-weight EM.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NetworkError
from .inference import (
    FamilyCountTable,
    _family_batch,
    _patterns,
    _reduced_factors,
    complete_counts,
    evidence_log_likelihoods,
    split_rows,
)
from .mixture import MixtureNetwork, capped_subsets, collapse, uniform_mixture
from .network import DiscreteNetwork, Dataset, aligned_values, uniform_cpts

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Dirichlet-form pseudocounts.

    ``family_pseudocount`` fills every cell of each node's full family table
    unless ``family_tables`` gives explicit per-node ``(R_i, Q_i)`` tables.
    ``weight_pseudocount`` is a scalar for every submodel or per-node lists.
    """

    family_pseudocount: float = 0.5
    family_tables: Optional[Sequence[np.ndarray]] = None
    weight_pseudocount: object = 1.0

    def __post_init__(self):
        if self.family_pseudocount < 0:
            raise NetworkError("family pseudocount must be non-negative")
        if self.family_tables is not None and any(np.any(np.asarray(t) < 0) for t in self.family_tables):
            raise NetworkError("prior family tables must be non-negative")
        if np.isscalar(self.weight_pseudocount):
            bad = self.weight_pseudocount < 0
        else:
            bad = any(np.any(np.asarray(a) < 0) for a in self.weight_pseudocount)
        if bad:
            raise NetworkError("weight pseudocounts must be non-negative")

    def family_prior(self, net: DiscreteNetwork) -> FamilyCountTable:
        shapes = [(net.codec(i).size, n.states) for i, n in enumerate(net.nodes)]
        if self.family_tables is None:
            return FamilyCountTable(tuple(np.full(s, float(self.family_pseudocount)) for s in shapes))
        tables = tuple(np.asarray(t, dtype=np.float64) for t in self.family_tables)
        if [t.shape for t in tables] != shapes:
            raise NetworkError("prior family tables do not match the network's family shapes")
        return FamilyCountTable(tables)

    def weight_prior(self, i: int, n_submodels: int) -> np.ndarray:
        if np.isscalar(self.weight_pseudocount):
            return np.full(n_submodels, float(self.weight_pseudocount))
        alpha = np.asarray(self.weight_pseudocount[i], dtype=np.float64)
        if alpha.shape != (n_submodels,):
            raise NetworkError(f"node {i} needs {n_submodels} weight pseudocounts")
        return alpha


def marginalize_counts(counts: np.ndarray, cards: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Sum a ``(R, Q)`` family table over the parents not listed in ``keep``.

    ``cards`` are the candidate-parent cardinalities and ``keep`` positions
    into that list. Works the same for data counts and prior counts.
    """
    cards = tuple(cards)
    keep = tuple(keep)
    if any(not 0 <= t < len(cards) for t in keep) or len(set(keep)) != len(keep):
        raise NetworkError(f"subset {keep} is not contained in {len(cards)} candidate parents")
    counts = np.asarray(counts, dtype=np.float64)
    q = counts.shape[-1]
    table = counts.reshape(cards + (q,))
    drop = tuple(t for t in range(len(cards)) if t not in keep)
    table = table.sum(axis=drop)
    # sum() keeps the surviving axes in ascending order
    order = sorted(keep)
    table = np.transpose(table, [order.index(t) for t in keep] + [len(keep)])
    return np.ascontiguousarray(table.reshape(-1, q))


def theta_update(counts: np.ndarray, priors: np.ndarray) -> np.ndarray:
    """Row-normalized (prior + count); all-zero rows become uniform with a warning."""
    counts = np.asarray(counts, dtype=np.float64)
    priors = np.asarray(priors, dtype=np.float64)
    if counts.shape != priors.shape:
        raise NetworkError(f"count shape {counts.shape} != prior shape {priors.shape}")
    if np.any(counts < 0) or np.any(priors < 0):
        raise NetworkError("negative counts")
    num = priors + counts
    den = num.sum(axis=1, keepdims=True)
    empty = den[:, 0] == 0
    if np.any(empty):
        warnings.warn(f"{int(empty.sum())} CPT row(s) with no counts or priors set to uniform", RuntimeWarning, stacklevel=2)
        num = num.copy()
        num[empty] = 1.0
        den = num.sum(axis=1, keepdims=True)
    return num / den


def _normalize_rows(unnorm: np.ndarray, active: Optional[np.ndarray] = None) -> np.ndarray:
    total = unnorm.sum(axis=1, keepdims=True)
    dead = total[:, 0] <= 0
    if np.any(dead):
        if active is None or np.any(active[dead]):
            warnings.warn("zero submodel evidence for a case; using uniform responsibilities", RuntimeWarning, stacklevel=3)
        unnorm = unnorm.copy()
        unnorm[dead] = 1.0
        total = unnorm.sum(axis=1, keepdims=True)
    return unnorm / total


def node_responsibilities(psi: np.ndarray, expanded: np.ndarray, post: np.ndarray, active=None) -> np.ndarray:
    """``(n, M)`` responsibilities for one node from ``(n, R, Q)`` family posteriors."""
    pred = np.einsum("nrq,mrq->nm", post, expanded)
    return _normalize_rows(psi[None, :] * pred, active)


def responsibilities(mix: MixtureNetwork, posteriors: Sequence[np.ndarray]) -> list[np.ndarray]:
    """P(submodel | case) per node, given per-node family posteriors ``(n, R_i, Q_i)``.

    The posteriors come from the collapsed network; for a complete case they
    are indicator tables and the predictive sum picks the observed cell.
    """
    if len(posteriors) != len(mix):
        raise NetworkError("need one posterior array per node")
    return [node_responsibilities(mix.weights(i), mix.expanded(i), np.asarray(p)) for i, p in enumerate(posteriors)]


def psi_update(resp_sums: np.ndarray, alpha: np.ndarray, n_cases: float) -> np.ndarray:
    """(alpha + A) / (sum(alpha) + N)."""
    resp_sums = np.asarray(resp_sums, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    den = alpha.sum() + n_cases
    if den <= 0:
        raise NetworkError("weight update has a zero denominator (no data and no pseudocounts)")
    return (alpha + resp_sums) / den


def _xlogy(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(x == 0, 0.0, x * np.log(y))
    return float(terms.sum())


def weight_entropy(psi: np.ndarray) -> float:
    return -_xlogy(psi, psi)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    score: float
    objective: float
    weight_entropy: tuple[float, ...]


@dataclass(eq=False)
class FitReport:
    iterations: list[IterationRecord]
    n_iterations: int
    converged: bool
    mixture: MixtureNetwork
    collapsed: DiscreteNetwork = field(repr=False)

    @property
    def scores(self) -> np.ndarray:
        return np.array([r.score for r in self.iterations])

    def to_dict(self, top: int = 3) -> dict:
        from .io import fit_report_to_dict

        return fit_report_to_dict(self, top=top)


class _Stats:
    """Sufficient statistics of one E-step over complete + unique incomplete rows."""

    def __init__(self, complete_cells: FamilyCountTable, uniq: np.ndarray, mult: np.ndarray):
        self.complete_cells = complete_cells
        self.uniq = uniq
        self.mult = mult
        self.n_cases = float(complete_cells[0].sum() + mult.sum())
        self.counts = complete_cells
        self.posteriors = None  # per node: list of (pattern idx, (n, R, Q)) arrays

    def update(self, bar: DiscreteNetwork):
        if not self.uniq.shape[0]:
            return
        tables = [t.copy() for t in self.complete_cells.tables]
        posts = [[] for _ in range(len(bar))]
        for hidden, idx in _patterns(self.uniq):
            rows = self.uniq[idx]
            operands = _reduced_factors(bar, rows, hidden)
            for i in range(len(bar)):
                post = _family_batch(bar, rows, hidden, i, operands)
                tables[i] += np.tensordot(self.mult[idx], post, axes=1)
                posts[i].append((idx, post))
        self.counts = FamilyCountTable(tuple(tables))
        self.posteriors = posts

    def resp_sums(self, mix: MixtureNetwork, i: int) -> np.ndarray:
        psi = mix.weights(i)
        expanded = mix.expanded(i)
        cells = self.complete_cells[i]
        # complete rows: one responsibility vector per observed family cell
        pred = expanded.reshape(expanded.shape[0], -1).T
        resp = _normalize_rows(psi[None, :] * pred, active=cells.ravel() > 0)
        total = cells.ravel() @ resp
        if self.posteriors is not None:
            for idx, post in self.posteriors[i]:
                total = total + self.mult[idx] @ node_responsibilities(psi, expanded, post)
        return total

    def score(self, bar: DiscreteNetwork) -> float:
        total = sum(_xlogy(c, node.cpt) for c, node in zip(self.complete_cells.tables, bar.nodes))
        if self.uniq.shape[0]:
            total += float(self.mult @ evidence_log_likelihoods(bar, self.uniq))
        return total / self.n_cases


def _marginals(mix: MixtureNetwork, table: FamilyCountTable) -> list[list[np.ndarray]]:
    """Per node, per submodel: ``table`` summed over the submodel's excluded parents."""
    base = mix.base
    return [
        [marginalize_counts(table[i], base.parent_cards(i), mix.projection(i, m).keep) for m in range(len(subs))]
        for i, subs in enumerate(mix.submodels)
    ]


def _submodel_cpts(marg_counts, marg_prior) -> list[list[np.ndarray]]:
    return [[theta_update(c, p) for c, p in zip(cc, pp)] for cc, pp in zip(marg_counts, marg_prior)]


def _objective(mix: MixtureNetwork, marg_counts, marg_prior, resp, alphas) -> float:
    total = 0.0
    for i, subs in enumerate(mix.submodels):
        for sub, c, p in zip(subs, marg_counts[i], marg_prior[i]):
            total += _xlogy(c + p, sub.cpt)
        total += _xlogy(alphas[i] + resp[i], mix.weights(i))
    return total


def _prepare(base: DiscreteNetwork, data: Dataset):
    if len(data) == 0:
        raise NetworkError("cannot fit to an empty dataset")
    values = aligned_values(base, data)
    complete, uniq, mult = split_rows(values)
    return _Stats(complete_counts(base, complete), uniq, mult)


def objective_value(mix: MixtureNetwork, data: Dataset, priors: Optional[PriorSpec] = None, reference=None) -> float:
    """Expected complete-data log posterior (without Lagrange terms).

    Sum of (N0 + N) log theta over submodel cells plus (alpha + A) log psi,
    where N and A are computed under ``reference`` (default: ``mix``
    itself). Returns ``-inf`` when a positive coefficient meets a zero
    parameter.
    """
    priors = priors or PriorSpec()
    reference = reference or mix
    stats = _prepare(mix.base, data)
    stats.update(collapse(reference))
    resp = [stats.resp_sums(reference, i) for i in range(len(mix))]
    alphas = [priors.weight_prior(i, len(s)) for i, s in enumerate(mix.submodels)]
    return _objective(mix, _marginals(mix, stats.counts), _marginals(mix, priors.family_prior(mix.base)), resp, alphas)


def conventional_subsets(base: DiscreteNetwork) -> list[list[tuple[int, ...]]]:
    return [[tuple(n.parents)] for n in base.nodes]


def em_fit(
    skeleton: DiscreteNetwork,
    data: Dataset,
    priors: Optional[PriorSpec] = None,
    caps=None,
    subsets=None,
    max_iters: int = 200,
    rel_tol: float = 1e-6,
    callback: Optional[Callable[[int, MixtureNetwork, DiscreteNetwork], None]] = None,
) -> FitReport:
    """Fit a mixture network by EM with MAP updates.

    ``skeleton`` gives the candidate parents; ``caps`` (int or per-node list)
    or explicit ``subsets`` select the submodels. Each iteration collapses
    the mixture, recomputes family counts under the collapsed network,
    refits the submodel CPTs from marginalized counts, then updates the
    weights. Stops when the relative change of the collapsed network's
    per-case training score drops below ``rel_tol``. ``callback`` is called
    with ``(iteration, mixture, collapsed)`` after every iteration,
    including the initial state as iteration 0.
    """
    priors = priors or PriorSpec()
    base = skeleton.skeleton() if not skeleton.is_skeleton else skeleton
    if max_iters < 0:
        raise NetworkError("max_iters must be non-negative")
    if subsets is None:
        subsets = capped_subsets(base, caps)
    stats = _prepare(base, data)
    prior = priors.family_prior(base)
    alphas = [priors.weight_prior(i, len(s)) for i, s in enumerate(subsets)]
    if any(a.sum() + stats.n_cases <= 0 for a in alphas):
        raise NetworkError("weight pseudocounts and data are both empty")

    mix = uniform_mixture(base, subsets)
    if stats.uniq.shape[0]:
        stats.update(uniform_cpts(base))
    marg_prior = _marginals(mix, prior)
    # marginals and CPTs depend only on the count table; with complete data
    # it never changes, so they are recomputed only when it does
    cache = {"counts": stats.counts, "marg": _marginals(mix, stats.counts)}
    cache["cpts"] = _submodel_cpts(cache["marg"], marg_prior)
    mix = mix.with_parameters(cpts=cache["cpts"])
    bar = collapse(mix)

    records = []

    def record(t, resp):
        score = stats.score(bar)
        objective = float("nan") if resp is None else _objective(mix, cache["marg"], marg_prior, resp, alphas)
        entropy = tuple(weight_entropy(mix.weights(i)) for i in range(len(mix)))
        records.append(IterationRecord(t, score, objective, entropy))
        if callback is not None:
            callback(t, mix, bar)
        return score

    prev = record(0, None)
    converged = False
    n_done = 0
    for t in range(1, max_iters + 1):
        stats.update(bar)
        if stats.counts is not cache["counts"]:
            cache["counts"] = stats.counts
            cache["marg"] = _marginals(mix, stats.counts)
            cache["cpts"] = _submodel_cpts(cache["marg"], marg_prior)
        mix = mix.with_parameters(cpts=cache["cpts"], check=False)
        resp = [stats.resp_sums(mix, i) for i in range(len(mix))]
        weights = [psi_update(resp[i], alphas[i], stats.n_cases) for i in range(len(mix))]
        mix = mix.with_parameters(weights=weights, check=False)
        bar = collapse(mix)
        score = record(t, resp)
        n_done = t
        if t > 1 and records[-1].objective < records[-2].objective - 1e-6:
            logger.warning("objective decreased at iteration %d: %.9g -> %.9g", t, records[-2].objective, records[-1].objective)
        if score == prev or abs(score - prev) <= rel_tol * abs(prev):
            converged = True
            break
        prev = score
    return FitReport(records, n_done, converged, mix, bar)


def conventional_map(skeleton: DiscreteNetwork, data: Dataset, priors: Optional[PriorSpec] = None) -> DiscreteNetwork:
    """Closed-form MAP CPTs (N0 + N) / row sums for complete data.

    Incomplete data falls back to EM with one full-parent submodel per node.
    """
    priors = priors or PriorSpec()
    base = skeleton.skeleton() if not skeleton.is_skeleton else skeleton
    stats = _prepare(base, data)
    if stats.uniq.shape[0]:
        return em_fit(base, data, priors, subsets=conventional_subsets(base)).collapsed
    prior = priors.family_prior(base)
    return base.with_cpts([theta_update(stats.counts[i], prior[i]) for i in range(len(base))])
