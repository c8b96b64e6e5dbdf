import math
import warnings

import numpy as np
import pytest

import oracles
from bmnet.errors import NetworkError
from bmnet.estimation import (
    PriorSpec,
    conventional_map,
    conventional_subsets,
    em_fit,
    marginalize_counts,
    node_responsibilities,
    objective_value,
    psi_update,
    responsibilities,
    theta_update,
)
from bmnet.inference import family_posteriors
from bmnet.mixture import MixtureNetwork, capped_subsets, collapse, uniform_mixture
from bmnet.network import MISSING, Dataset, aligned_values, dataset_score, full_structure, sample
from conftest import random_network


def fitted_case(seed, n=150, caps=None, priors=None, **kw):
    net = random_network(seed, v=4, edge_p=0.8)
    data = sample(net, n, seed + 1)
    return net, data, em_fit(net.skeleton(), data, priors or PriorSpec(), caps=caps, **kw)


class TestMarginalizeCounts:
    def test_full_subset_identity(self):
        counts = np.arange(24.0).reshape(6, 4)
        assert np.array_equal(marginalize_counts(counts, (3, 2), (0, 1)), counts)

    def test_empty_subset_row_sums(self):
        counts = np.arange(24.0).reshape(6, 4)
        assert np.array_equal(marginalize_counts(counts, (3, 2), ()), counts.sum(axis=0, keepdims=True))

    def test_drop_second_binary_parent(self):
        # rows are parent configs (a, b) -> 2a + b; columns are child states
        counts = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]])
        got = marginalize_counts(counts, (2, 2), (0,))
        assert np.array_equal(got, [[1 + 3, 2 + 4], [5 + 7, 6 + 8]])
        got = marginalize_counts(counts, (2, 2), (1,))
        assert np.array_equal(got, [[1 + 5, 2 + 6], [3 + 7, 4 + 8]])

    def test_conservation(self):
        counts = np.random.default_rng(0).integers(0, 9, (12, 3)).astype(float)
        for keep in [(), (0,), (1,), (2,), (0, 2), (1, 2), (0, 1, 2)]:
            assert np.array_equal(marginalize_counts(counts, (2, 3, 2), keep).sum(axis=0), counts.sum(axis=0))

    def test_matches_brute_tabulation(self):
        values = np.random.default_rng(1).integers(0, 2, (200, 4))
        values[:, 1] = values[:, 1] + values[:, 3]  # 3 states
        cards = (2, 3, 2, 2)
        full = oracles.tabulate(values, 3, (0, 1, 2), cards)
        got = marginalize_counts(full, (2, 3, 2), (0, 2))
        assert np.array_equal(got, oracles.tabulate(values, 3, (0, 2), cards))

    def test_not_contained(self):
        with pytest.raises(NetworkError):
            marginalize_counts(np.ones((4, 2)), (2, 2), (2,))


class TestThetaUpdate:
    def test_ratio(self):
        np.testing.assert_allclose(theta_update([[3.0, 1.0]], [[0.0, 0.0]]), [[0.75, 0.25]], atol=1e-15)

    def test_prior_only(self):
        np.testing.assert_allclose(theta_update([[0.0, 0.0]], [[0.5, 0.5]]), [[0.5, 0.5]], atol=1e-15)

    def test_substitution(self):
        np.testing.assert_allclose(theta_update([[2.0, 2.0, 4.0]], [[1.0, 1.0, 1.0]]), [[3 / 11, 3 / 11, 5 / 11]], atol=1e-15)

    def test_zero_row_uniform_with_warning(self):
        with pytest.warns(RuntimeWarning):
            got = theta_update([[0.0, 0.0, 0.0], [1.0, 0.0, 1.0]], np.zeros((2, 3)))
        np.testing.assert_allclose(got, [[1 / 3] * 3, [0.5, 0.0, 0.5]])

    def test_negative(self):
        with pytest.raises(NetworkError):
            theta_update([[-1.0, 2.0]], [[0.0, 0.0]])


class TestResponsibilities:
    def test_single_submodel(self):
        r = node_responsibilities(np.array([1.0]), np.full((1, 2, 2), 0.5), np.full((3, 2, 2), 0.25))
        assert np.array_equal(r, np.ones((3, 1)))

    def test_identical_predictions_return_psi(self):
        expanded = np.stack([np.array([[0.3, 0.7]])] * 2)
        post = np.array([[[1.0, 0.0]], [[0.2, 0.8]]])
        np.testing.assert_allclose(node_responsibilities(np.array([0.3, 0.7]), expanded, post), [[0.3, 0.7]] * 2, atol=1e-15)

    def test_bayes_rule(self):
        expanded = np.array([[[0.8, 0.2]], [[0.2, 0.8]]])
        post = np.array([[[1.0, 0.0]]])
        np.testing.assert_allclose(node_responsibilities(np.array([0.5, 0.5]), expanded, post), [[0.8, 0.2]], atol=1e-15)

    def test_zero_evidence_fallback(self):
        expanded = np.array([[[1.0, 0.0]], [[1.0, 0.0]]])
        with pytest.warns(RuntimeWarning):
            r = node_responsibilities(np.array([0.5, 0.5]), expanded, np.array([[[0.0, 1.0]]]))
        assert np.array_equal(r, [[0.5, 0.5]])

    def test_sums_to_case_count_under_missing_data(self, make_network):
        net = make_network(8, v=4, edge_p=0.8)
        values = sample(net, 60, 2).values.copy()
        values[np.random.default_rng(0).random(values.shape) < 0.3] = MISSING
        mix = uniform_mixture(net.skeleton(), capped_subsets(net))
        bar = collapse(mix)
        resp = responsibilities(mix, [family_posteriors(bar, values, i) for i in range(4)])
        for r in resp:
            assert abs(r.sum() - 60) <= 1e-9


class TestPsiUpdate:
    @pytest.mark.parametrize(
        "a, alpha, n, want",
        [((10, 0), (0, 0), 10, (1.0, 0.0)), ((5, 5), (1, 1), 10, (0.5, 0.5)), ((8, 2), (1, 1), 10, (0.75, 0.25))],
    )
    def test_examples(self, a, alpha, n, want):
        np.testing.assert_allclose(psi_update(np.array(a, float), np.array(alpha, float), n), want, atol=1e-15)

    def test_zero_denominator(self):
        with pytest.raises(NetworkError):
            psi_update(np.zeros(2), np.zeros(2), 0)


class TestPriorSpec:
    def test_negative_rejected(self):
        with pytest.raises(NetworkError):
            PriorSpec(family_pseudocount=-1)
        with pytest.raises(NetworkError):
            PriorSpec(weight_pseudocount=-0.5)

    def test_explicit_tables(self, chain):
        tables = [np.ones((1, 2)), np.full((2, 2), 2.0)]
        assert np.array_equal(PriorSpec(family_tables=tables).family_prior(chain)[1], tables[1])
        with pytest.raises(NetworkError):
            PriorSpec(family_tables=[np.ones((1, 2))]).family_prior(chain)


class TestConventionalMap:
    @pytest.mark.parametrize("seed", range(5))
    def test_em_reproduces_count_and_normalize(self, seed):
        net = random_network(seed, v=4, edge_p=0.7)
        data = sample(net, 80, seed)
        report = em_fit(net.skeleton(), data, PriorSpec(0.5), subsets=conventional_subsets(net))
        for i, node in enumerate(net.nodes):
            num = oracles.tabulate(data.values, i, node.parents, net.cards) + 0.5
            want = num / num.sum(axis=1, keepdims=True)
            assert np.array_equal(report.collapsed.nodes[i].cpt, want)
            assert np.array_equal(conventional_map(net.skeleton(), data).nodes[i].cpt, want)


class TestEmFit:
    def test_rejects_empty_data(self, chain):
        with pytest.raises(NetworkError):
            em_fit(chain.skeleton(), Dataset(chain.names, np.zeros((0, 2), int)))

    def test_complete_data_submodel_thetas_fixed(self):
        net = random_network(3, v=4, edge_p=0.8)
        data = sample(net, 100, 1)
        snapshots = []
        em_fit(net.skeleton(), data, max_iters=10, rel_tol=0, callback=lambda t, mix, bar: snapshots.append(mix))
        assert len(snapshots) == 11
        for mix in snapshots[1:]:
            for subs_a, subs_b in zip(mix.submodels, snapshots[0].submodels):
                for a, b in zip(subs_a, subs_b):
                    assert np.array_equal(a.cpt, b.cpt)
        assert any(
            not np.array_equal(snapshots[-1].weights(i), snapshots[0].weights(i)) for i in range(1, 4)
        )

    @pytest.mark.parametrize("seed", range(4))
    def test_report_invariants(self, seed):
        _, data, report = fitted_case(seed, max_iters=50)
        assert report.n_iterations <= 50
        assert len(report.iterations) == report.n_iterations + 1
        assert report.converged == (report.n_iterations < 50 or
                                    abs(report.scores[-1] - report.scores[-2]) <= 1e-6 * abs(report.scores[-2]))
        assert report.scores[-1] == pytest.approx(dataset_score(report.collapsed, data), abs=1e-12)
        for i in range(4):
            assert abs(report.mixture.weights(i).sum() - 1.0) <= 1e-12

    def test_convergence_flag_false_when_capped(self):
        _, _, report = fitted_case(1, max_iters=2, rel_tol=0.0)
        assert report.n_iterations == 2 and not report.converged

    def test_missing_data_runs_and_scores_observed(self):
        net = random_network(5, v=4, edge_p=0.8)
        values = sample(net, 120, 3).values.copy()
        values[np.random.default_rng(1).random(values.shape) < 0.2] = MISSING
        data = Dataset(net.names, values)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            report = em_fit(net.skeleton(), data, max_iters=30)
        from bmnet.inference import observed_score

        assert report.scores[-1] == pytest.approx(observed_score(report.collapsed, data), abs=1e-12)
        assert np.all(np.isfinite(report.scores))

    def test_objective_non_decreasing_complete_data(self):
        _, _, report = fitted_case(2, max_iters=40, rel_tol=0)
        obj = [r.objective for r in report.iterations[1:]]
        assert all(b >= a - 1e-9 for a, b in zip(obj, obj[1:]))


class TestObjective:
    def test_uniform_closed_form(self):
        base = full_structure(("a", "b"), (2, 3))
        data = sample(base.with_cpts([np.full((1, 2), 0.5), np.full((2, 3), 1 / 3)]), 20, 0)
        mix = uniform_mixture(base, capped_subsets(base))
        # (N0 + N) log(1/Q) summed over both submodels of b, plus (alpha + A) log psi
        n0 = 0.5
        want = (2 * n0 + 20) * math.log(0.5)
        want += 2 * (6 * n0 + 20) * math.log(1 / 3)
        want += (1 + 20) * math.log(1.0) + (2 + 20) * math.log(0.5)
        assert objective_value(mix, data) == pytest.approx(want, abs=1e-10)

    @pytest.mark.filterwarnings("ignore:zero submodel evidence")
    def test_zero_parameter_with_count_is_minus_inf(self):
        base = full_structure(("a",), (2,))
        mix = MixtureNetwork.from_tables(base, [[()]], [[np.array([[1.0, 0.0]])]], [[1.0]])
        assert objective_value(mix, Dataset(("a",), [[1]]), PriorSpec(0.0)) == -math.inf

    def test_moving_toward_count_ratio_increases(self):
        net, data, report = fitted_case(4, max_iters=3)
        mix = report.mixture
        sub = mix.submodels[3][0]
        cpt = sub.cpt.copy()
        worse = 0.7 * cpt + 0.3 * np.roll(cpt, 1, axis=1)
        better = 0.5 * worse + 0.5 * cpt
        cpts = [[s.cpt for s in subs] for subs in mix.submodels]

        def f(table):
            cpts[3][0] = table
            return objective_value(mix.with_parameters(cpts=cpts), data, reference=mix)

        assert f(worse) < f(better) < f(cpt) + 1e-12

    @pytest.mark.parametrize("node, m", [(1, 0), (2, 1), (3, 3)])
    def test_stationary_point(self, node, m):
        net, data, report = fitted_case(6, max_iters=2000, rel_tol=1e-13)
        mix = report.mixture
        base = objective_value(mix, data, reference=mix)
        cpt = mix.submodels[node][m].cpt
        for delta in (1e-3, -1e-3):
            bumped = cpt.copy()
            bumped[0, 0] = max(bumped[0, 0] + delta, 1e-12)
            bumped /= bumped.sum(axis=1, keepdims=True)
            cpts = [[s.cpt for s in subs] for subs in mix.submodels]
            cpts[node][m] = bumped
            assert objective_value(mix.with_parameters(cpts=cpts), data, reference=mix) <= base + 1e-12
            w = mix.weights(node).copy()
            w[m] = max(w[m] + delta, 0.0)
            w /= w.sum()
            ws = [mix.weights(i) for i in range(len(mix))]
            ws[node] = w
            assert objective_value(mix.with_parameters(weights=ws), data, reference=mix) <= base + 1e-9
