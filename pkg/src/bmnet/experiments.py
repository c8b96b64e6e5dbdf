"""Structure sweeps, BMN-vs-conventional runs and the MBN equivalence check.

Sweep records identify a model by a node ordering (a permutation of node
indices) and a bitmask over the forward arcs of that ordering: arc
``ordering[a] -> ordering[b]`` for positions ``a < b`` is bit ``t``, where
pairs ``(a, b)`` are numbered in lexicographic order.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import GuardError, NetworkError
from .estimation import FitReport, PriorSpec, conventional_map, em_fit, theta_update
from .mixture import (
    bmn_case_log_likelihoods,
    build_restricted_mbn,
    capped_subsets,
    collapse,
    mbn_case_log_likelihoods,
    normalize_caps,
    random_mixture,
)
from .network import (
    DiscreteNetwork,
    Dataset,
    aligned_values,
    dataset_score,
    full_structure,
    random_cpts,
    sample,
)

DEFAULT_NAMES = ("One", "Two", "Three", "Four")
DEFAULT_CARDS = (3, 2, 2, 3)
DEFAULT_EDGES = (("One", "Three"), ("Two", "Three"), ("Three", "Four"))
MAX_SWEEP_NODES = 6
MAX_MBN_NODES = 4


def default_true_network(seed) -> DiscreteNetwork:
    """Four nodes with 3, 2, 2, 3 states and a two-parent bottleneck at Three."""
    skeleton = DiscreteNetwork.from_edges(DEFAULT_NAMES, DEFAULT_CARDS, DEFAULT_EDGES)
    return random_cpts(skeleton, seed)


def experiment_seeds(seed: int) -> tuple[np.random.SeedSequence, ...]:
    """Independent child seeds for (CPTs, training data, test data)."""
    return tuple(np.random.SeedSequence(seed).spawn(3))


def sample_train_test(net: DiscreteNetwork, n_train: int, n_test: int, seed: int) -> tuple[Dataset, Dataset]:
    _, s_train, s_test = experiment_seeds(seed)
    return sample(net, n_train, s_train), sample(net, n_test, s_test)


def arc_pairs(v: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(v), 2))


def structure_parents(ordering: Sequence[int], mask: int) -> list[tuple[int, ...]]:
    """Parent node indices of every node (indexed by node, not position)."""
    parents = [[] for _ in ordering]
    for t, (a, b) in enumerate(arc_pairs(len(ordering))):
        if mask >> t & 1:
            parents[ordering[b]].append(ordering[a])
    return [tuple(sorted(p)) for p in parents]


def enumerate_models(v: int, cards: Optional[Sequence[int]] = None) -> Iterator[tuple[tuple[int, ...], int]]:
    """Every (ordering, arc bitmask): ``v! * 2**(v(v-1)/2)`` models."""
    if v < 1:
        raise NetworkError("need at least one node")
    if v > MAX_SWEEP_NODES:
        raise GuardError(f"{v} nodes exceed the sweep limit of {MAX_SWEEP_NODES}")
    if cards is not None and len(cards) != v:
        raise NetworkError("cardinalities do not match the node count")
    n_masks = 1 << (v * (v - 1) // 2)
    for ordering in itertools.permutations(range(v)):
        for mask in range(n_masks):
            yield ordering, mask


def model_count(v: int) -> int:
    return math.factorial(v) * 2 ** (v * (v - 1) // 2)


@dataclass(frozen=True)
class SweepRecord:
    ordering: tuple[int, ...]
    mask: int
    train_score: float
    test_score: float
    tags: tuple[str, ...] = ()


class _FamilyScorer:
    """Conventional MAP fit and train/test log-likelihood per family, memoized.

    A structure's score is the sum of its families' scores, and a sweep over
    all orderings only ever meets ``V * 2**(V-1)`` distinct families.
    """

    def __init__(self, cards, train: np.ndarray, test: np.ndarray, pseudocount: float):
        self.cards = tuple(cards)
        self.train = np.ascontiguousarray(train, dtype=np.int64)
        self.test = np.ascontiguousarray(test, dtype=np.int64)
        self.pseudocount = pseudocount
        self._cache: dict = {}

    def __call__(self, child: int, parents: tuple[int, ...]) -> tuple[float, float]:
        key = (child, parents)
        if key not in self._cache:
            cols = np.asarray(parents, dtype=np.int64)
            radix = np.asarray([self.cards[p] for p in parents], dtype=np.int64)
            r = int(np.prod(radix)) if parents else 1
            q = self.cards[child]
            k_train = _kernels.encode_rows(self.train, cols, radix)
            j_train = np.ascontiguousarray(self.train[:, child])
            counts = _kernels.tabulate(k_train, j_train, None, r, q)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                cpt = theta_update(counts, np.full((r, q), self.pseudocount))
            with np.errstate(divide="ignore"):
                log_cpt = np.log(cpt)
            k_test = _kernels.encode_rows(self.test, cols, radix)
            j_test = np.ascontiguousarray(self.test[:, child])
            self._cache[key] = (
                _sum_log(log_cpt, counts),
                _kernels.loglik_sum(log_cpt, k_test, j_test),
            )
        return self._cache[key]


def _sum_log(log_cpt: np.ndarray, counts: np.ndarray) -> float:
    # 0 * log 0 counts as 0: unobserved cells cannot contribute
    seen = counts > 0
    return float(np.sum(counts[seen] * log_cpt[seen]))


def run_sweep(
    true_net: DiscreteNetwork,
    n_train: int = 100,
    n_test: int = 2000,
    seed: int = 0,
    priors: Optional[PriorSpec] = None,
    train: Optional[Dataset] = None,
    test: Optional[Dataset] = None,
) -> list[SweepRecord]:
    """Fit and score every ordering x arc-subset model by conventional MAP.

    Data are sampled from ``true_net`` unless ``train``/``test`` are given.
    Tags: ``empty`` (no arcs), ``full`` (all forward arcs) and ``true`` (the
    true arc set under the true network's own ordering).
    """
    priors = priors or PriorSpec()
    if priors.family_tables is not None:
        raise NetworkError("a sweep needs a scalar family pseudocount, not explicit prior tables")
    v = len(true_net)
    models = list(enumerate_models(v, true_net.cards))
    if train is None or test is None:
        train, test = sample_train_test(true_net, n_train, n_test, seed)
    if len(train) == 0 or len(test) == 0:
        raise NetworkError("cannot score an empty dataset")
    tr = aligned_values(true_net, train)
    te = aligned_values(true_net, test)
    if np.any(tr < 0) or np.any(te < 0):
        raise NetworkError("structure sweeps need complete data")
    scorer = _FamilyScorer(true_net.cards, tr, te, priors.family_pseudocount)
    true_parents = [n.parents for n in true_net.nodes]
    identity = tuple(range(v))
    full_mask = (1 << len(arc_pairs(v))) - 1
    records = []
    for ordering, mask in models:
        parents = structure_parents(ordering, mask)
        train_ll = test_ll = 0.0
        for child in range(v):
            a, b = scorer(child, parents[child])
            train_ll += a
            test_ll += b
        tags = []
        if mask == 0:
            tags.append("empty")
        if mask == full_mask:
            tags.append("full")
        if ordering == identity and parents == true_parents:
            tags.append("true")
        records.append(SweepRecord(ordering, mask, train_ll / len(tr), test_ll / len(te), tuple(tags)))
    return records


def sweep_summary(records: Sequence[SweepRecord], generator_test_score: Optional[float] = None) -> dict:
    def pick(tag):
        return [r for r in records if tag in r.tags]

    def mean(rs, attr):
        return float(np.mean([getattr(r, attr) for r in rs])) if rs else float("nan")

    true_rec = pick("true")
    full = pick("full")
    empty = pick("empty")
    best_train = max(records, key=lambda r: r.train_score)
    best_test = max(records, key=lambda r: r.test_score)
    out = {
        "n_models": len(records),
        "true": {"train": true_rec[0].train_score, "test": true_rec[0].test_score} if true_rec else None,
        "full": {"count": len(full), "mean_train": mean(full, "train_score"), "mean_test": mean(full, "test_score")},
        "empty": {"count": len(empty), "mean_train": mean(empty, "train_score"), "mean_test": mean(empty, "test_score")},
        "best_train": {"ordering": list(best_train.ordering), "mask": best_train.mask, "train": best_train.train_score},
        "best_test": {"ordering": list(best_test.ordering), "mask": best_test.mask, "test": best_test.test_score},
    }
    if true_rec:
        out["overfitting_band"] = bool(mean(full, "test_score") < true_rec[0].test_score)
    if generator_test_score is not None:
        out["generator_test"] = generator_test_score
    return out


@dataclass
class BmnExperiment:
    report: FitReport
    train_scores: list[float]
    test_scores: list[float]
    caps: list[int]
    reference: dict = field(default_factory=dict)  # conventional baselines: name -> test score


def run_bmn_experiment(
    true_net: DiscreteNetwork,
    ordering: Optional[Sequence[str]] = None,
    caps=None,
    n_train: int = 100,
    n_test: int = 2000,
    seed: int = 0,
    priors: Optional[PriorSpec] = None,
    max_iters: int = 200,
    rel_tol: float = 1e-6,
    train: Optional[Dataset] = None,
    test: Optional[Dataset] = None,
) -> BmnExperiment:
    """Fit a BMN on the full structure under ``ordering`` with per-node caps.

    ``caps`` follow the ordering's positions (or one int for every node).
    Records the collapsed network's train and test score at every EM
    iteration, plus conventional baselines (true, full and empty structure).
    """
    priors = priors or PriorSpec()
    ordering = tuple(ordering or true_net.names)
    if sorted(ordering) != sorted(true_net.names):
        raise NetworkError(f"ordering {ordering} is not a permutation of {true_net.names}")
    if train is None or test is None:
        train, test = sample_train_test(true_net, n_train, n_test, seed)
    cards = [true_net.nodes[true_net.index(n)].states for n in ordering]
    base = full_structure(ordering, cards)
    caps = normalize_caps(base, caps)
    subsets = capped_subsets(base, caps)
    train_scores, test_scores = [], []

    def monitor(t, mix, bar):
        train_scores.append(dataset_score(bar, train))
        test_scores.append(dataset_score(bar, test))

    report = em_fit(base, train, priors, subsets=subsets, max_iters=max_iters, rel_tol=rel_tol, callback=monitor)
    reference = {
        "true": dataset_score(conventional_map(true_net.skeleton(), train, priors), test),
        "full": dataset_score(conventional_map(base, train, priors), test),
        "empty": dataset_score(conventional_map(DiscreteNetwork.from_edges(ordering, cards, ()), train, priors), test),
        "generator": dataset_score(true_net, test),
    }
    return BmnExperiment(report, train_scores, test_scores, caps, reference)


def verify_mbn_equivalence(v: int = 4, cards: Optional[Sequence[int]] = None, seed: int = 0, n_cases: int = 1000) -> dict:
    """Compare BMN and restricted-order MBN log-likelihoods on sampled cases."""
    if v < 1:
        raise NetworkError("need at least one node")
    if v > MAX_MBN_NODES:
        raise GuardError(f"{v} nodes exceed the MBN verification limit of {MAX_MBN_NODES}")
    cards = tuple(cards) if cards is not None else (2,) * v
    if len(cards) != v:
        raise NetworkError("cardinalities do not match the node count")
    s_mix, s_data = np.random.SeedSequence(seed).spawn(2)
    base = full_structure([f"N{i + 1}" for i in range(v)], cards)
    mix = random_mixture(base, capped_subsets(base), s_mix)
    mbn = build_restricted_mbn(mix)
    values = aligned_values(base, sample(collapse(mix), n_cases, s_data))
    deviation = np.abs(bmn_case_log_likelihoods(mix, values) - mbn_case_log_likelihoods(mbn, values))
    max_dev = float(deviation.max())
    return {
        "nodes": v,
        "cards": list(cards),
        "seed": seed,
        "n_cases": n_cases,
        "n_global_structures": len(mbn),
        "n_local_components": int(sum(mix.component_counts())),
        "total_weight": float(sum(g.weight for g in mbn)),
        "max_abs_deviation": max_dev,
        "passed": bool(max_dev <= 1e-10),
    }
