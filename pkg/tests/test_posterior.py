import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdbayes.persistence import PersistenceDiagram
from pdbayes.pointprocess import (
    BinomialCardinality,
    GaussianMixtureIntensity,
    IidClusterPrior,
    ObservationModel,
    UnexpectedModel,
    gaussian_density,
)
from pdbayes.posterior import (
    CardinalityPmf,
    PosteriorUnderflowError,
    _log_esf_without,
    compute_posterior,
    diagram_log_density,
    elementary_symmetric,
    eval_posterior_intensity,
    gamma_term,
    intensity_grid,
    log_elementary_symmetric,
    marginal_q,
    nu_values,
    posterior_cardinality_stats,
)

from oracles import HypothesisPosterior, brute_elementary_symmetric, direct_gamma

INFORMATIVE_PRIOR = GaussianMixtureIntensity.from_components(
    [(2.0, (0.2, 0.55), 0.0018), (2.0, (0.17, 0.35), 0.0018)]
)


def _pd(points):
    return PersistenceDiagram(1, np.array(points, dtype=float).reshape(-1, 2))


def _unexpected(mu=1.0, m0=10, rho=0.3):
    return UnexpectedModel(mu, BinomialCardinality(m0, rho))


class TestMarginalQ:
    def test_peak_with_summed_variance(self):
        mix = GaussianMixtureIntensity.from_components([(1.0, (0.4, 0.7), 0.5)])
        assert marginal_q(mix, 0, ObservationModel(0.9, 0.5), (0.4, 0.7)) == pytest.approx(1 / (2 * math.pi))

    def test_symmetric_in_variances(self):
        y = (0.31, 0.12)
        a = marginal_q(GaussianMixtureIntensity.from_components([(1, (0.2, 0.2), 0.3)]), 0, ObservationModel(1, 0.07), y)
        b = marginal_q(GaussianMixtureIntensity.from_components([(1, (0.2, 0.2), 0.07)]), 0, ObservationModel(1, 0.3), y)
        assert a == pytest.approx(b, rel=1e-14)

    def test_informative_component(self):
        q = marginal_q(INFORMATIVE_PRIOR, 0, ObservationModel(0.95, 0.01), (0.2, 0.55))
        assert q == pytest.approx(1 / (2 * math.pi * 0.0118), rel=1e-12)
        assert q == pytest.approx(13.49, abs=5e-3)


class TestNu:
    def test_alpha_zero(self):
        nu = nu_values(_pd([[0.1, 0.2], [0.3, 0.4]]), INFORMATIVE_PRIOR, ObservationModel(0.0, 0.01), _unexpected(20))
        assert nu.tolist() == [0.0, 0.0]

    def test_single_component_value(self):
        mix = GaussianMixtureIntensity.from_components([(1.0, (1.0, 1.0), 0.5)])
        nu = nu_values(_pd([[1.0, 1.0]]), mix, ObservationModel(1.0, 0.5), _unexpected(1.0))
        assert nu[0] == pytest.approx((1 / (2 * math.pi)) / math.exp(-2), rel=1e-13)
        assert nu[0] == pytest.approx(1.176, abs=1e-3)

    def test_linear_in_alpha(self):
        D = _pd([[0.18, 0.5], [0.05, 0.01], [0.2, 0.3]])
        a = nu_values(D, INFORMATIVE_PRIOR, ObservationModel(0.3, 0.01), _unexpected(20))
        b = nu_values(D, INFORMATIVE_PRIOR, ObservationModel(0.9, 0.01), _unexpected(20))
        np.testing.assert_allclose(b, 3 * a, rtol=1e-13)


class TestElementarySymmetric:
    def test_small_example(self):
        assert elementary_symmetric([1, 2, 3]).tolist() == [1, 6, 11, 6]

    def test_empty(self):
        assert elementary_symmetric([]).tolist() == [1.0]

    @given(st.lists(st.floats(0, 5), max_size=10))
    @settings(max_examples=100)
    def test_matches_subset_enumeration(self, values):
        e = elementary_symmetric(values)
        ref = brute_elementary_symmetric(values)
        assert e[0] == 1.0
        for got, want in zip(e, ref):
            assert got == pytest.approx(want, rel=1e-12, abs=0)

    @given(st.lists(st.floats(1e-3, 50), max_size=10))
    @settings(max_examples=50)
    def test_log_version(self, values):
        le = log_elementary_symmetric(np.log(values))
        np.testing.assert_allclose(np.exp(le), elementary_symmetric(values), rtol=1e-12)

    def test_log_version_handles_overflowing_products(self):
        le = log_elementary_symmetric(np.full(60, 800.0))
        assert le[60] == pytest.approx(48000.0)
        assert le[1] == pytest.approx(800.0 + math.log(60))

    @pytest.mark.parametrize(
        "values",
        [[0.5, 2.0, 3.0, 0.1], [1e8, 1e8, 1e-3, 2.0], [1.0, 1.0, 1.0, 1.0, 1.0], [0.0, 2.0, 5.0], [7.0]],
    )
    def test_downdate_matches_recomputation(self, values):
        with np.errstate(divide="ignore"):
            lv = np.log(np.array(values, dtype=float))
        le = log_elementary_symmetric(lv)
        for i in range(len(values)):
            got = np.exp(_log_esf_without(le, lv, i))
            want = brute_elementary_symmetric([v for j, v in enumerate(values) if j != i])
            np.testing.assert_allclose(got, want, rtol=1e-9)


class TestGamma:
    card = BinomialCardinality(6, 0.4)

    def _rho(self, j):
        return math.comb(6, j) * 0.4**j * 0.6 ** (6 - j) if 0 <= j <= 6 else 0.0

    def test_empty_observation(self):
        L = 0.37
        for tau in range(6):
            assert gamma_term(0, 0, tau, 0, [1.0], self.card, L) == pytest.approx(self._rho(0) * L**tau)

    def test_alpha_one_empty_observation(self):
        assert gamma_term(0, 0, 0, 0, [1.0], self.card, 0.0) == pytest.approx(self._rho(0))
        for tau in range(1, 5):
            assert gamma_term(0, 0, tau, 0, [1.0], self.card, 0.0) == 0.0

    def test_b_one_tau_zero(self):
        e = elementary_symmetric([0.3, 2.0, 1.1])
        assert gamma_term(0, 1, 0, 3, e, self.card, 0.5) == 0.0
        assert gamma_term(1, 1, 0, 3, e[:3], self.card, 0.5) == 0.0

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_literal_sum(self, seed):
        rng = np.random.default_rng(seed)
        K = int(rng.integers(0, 6))
        a, b = int(rng.integers(0, 2)), int(rng.integers(0, 2))
        if K - a < 0:
            a = 0
        e = elementary_symmetric(rng.uniform(0, 4, size=K - a))
        L = float(rng.choice([0.0, rng.uniform(0, 3)]))
        for tau in range(8):
            want = direct_gamma(a, b, tau, K, e, self._rho, L)
            got = gamma_term(a, b, tau, K, e, self.card, L)
            assert got == pytest.approx(want, rel=1e-12, abs=1e-300)

    def test_rejects_bad_indices(self):
        with pytest.raises(ValueError):
            gamma_term(2, 0, 1, 1, [1.0, 1.0], self.card, 0.1)
        with pytest.raises(ValueError):
            gamma_term(0, 0, -1, 1, [1.0, 1.0], self.card, 0.1)


HYPOTHESIS_CASES = [
    # (components, alpha, sigma_yo, mu_u, M0, rho_y, pmf, observed points)
    ([(1.0, (0.5, 0.6), 0.05)], 0.8, 0.02, 2.0, 3, 0.4, [0.1, 0.3, 0.4, 0.2], [[0.45, 0.55], [0.1, 0.05]]),
    ([(2.0, (0.2, 0.55), 0.0018), (2.0, (0.17, 0.35), 0.0018)], 0.95, 0.01, 20.0, 4, 0.5,
     [0.05, 0.1, 0.2, 0.3, 0.25, 0.1], [[0.19, 0.52], [0.18, 0.33], [0.05, 0.02]]),
    ([(1.0, (0.5, 0.5), 0.5)], 0.5, 0.1, 1.0, 2, 0.3, [0.2, 0.2, 0.2, 0.2, 0.2], [[0.3, 0.9]]),
    ([(1.5, (1.0, 0.2), 0.3), (0.5, (0.1, 1.0), 0.1)], 1.0, 0.05, 3.0, 2, 0.6, [0.0, 0.5, 0.3, 0.2], [[0.9, 0.25], [0.2, 0.9], [0.05, 0.05]]),
    ([(1.0, (0.4, 0.4), 0.2)], 0.0, 0.05, 2.0, 3, 0.5, [0.3, 0.3, 0.4], [[0.2, 0.1], [0.3, 0.3]]),
    ([(1.0, (0.4, 0.4), 0.2)], 0.7, 0.05, 2.0, 3, 0.5, [0.3, 0.3, 0.4], []),
]


class TestAgainstHypothesisEnumeration:
    @pytest.mark.parametrize("case", HYPOTHESIS_CASES)
    def test_cardinality_and_intensity(self, case):
        comps, alpha, s_obs, mu_u, m0, rho_y, pmf, Y = case
        ref = HypothesisPosterior(Y, comps, alpha, s_obs, mu_u, m0, rho_y, pmf)
        post = compute_posterior(
            GaussianMixtureIntensity.from_components(comps),
            ObservationModel(alpha, s_obs),
            UnexpectedModel(mu_u, BinomialCardinality(m0, rho_y)),
            [_pd(Y)],
            cardinality=CardinalityPmf(pmf),
        )
        np.testing.assert_allclose(post.cardinality.probs, ref.cardinality(), rtol=1e-10, atol=1e-15)
        rng = np.random.default_rng(0)
        for x in rng.uniform(0, 1.2, size=(12, 2)):
            assert eval_posterior_intensity(post, x) == pytest.approx(ref.intensity(tuple(x)), rel=1e-9, abs=1e-300)


class TestComputePosterior:
    obs = ObservationModel(0.9, 0.02)
    unexpected = _unexpected(5.0, 10, 0.3)
    prior = IidClusterPrior(
        GaussianMixtureIntensity.from_components([(1.0, (0.3, 0.5), 0.05), (0.5, (0.8, 0.2), 0.1)]),
        BinomialCardinality(8, 0.4),
    )

    def test_alpha_one_empty_diagram_is_point_mass(self):
        post = compute_posterior(self.prior, ObservationModel(1.0, 0.02), self.unexpected, [_pd([])])
        assert post.cardinality.probs[0] == 1.0
        assert np.all(post.cardinality.probs[1:] == 0.0)
        assert post.vanished_scale == 0.0

    def test_equal_variances(self):
        mix = GaussianMixtureIntensity.from_components([(1.0, (0.3, 0.5), 0.04)])
        y = np.array([0.5, 0.1])
        post = compute_posterior(mix, ObservationModel(0.9, 0.04), self.unexpected, [_pd([y])], cardinality=[0.5, 0.5])
        assert post.variances[0] == pytest.approx(0.02, rel=1e-15)
        np.testing.assert_allclose(post.means[0], (y + [0.3, 0.5]) / 2, rtol=1e-15)

    def test_identical_observations_collapse(self):
        D = _pd([[0.3, 0.45], [0.7, 0.25], [0.05, 0.02]])
        one = compute_posterior(self.prior, self.obs, self.unexpected, [D])
        three = compute_posterior(self.prior, self.obs, self.unexpected, [D, D, D])
        assert np.array_equal(one.cardinality.probs, three.cardinality.probs)
        assert one.vanished_scale == three.vanished_scale
        assert np.array_equal(one.weights, three.weights)
        assert np.array_equal(one.means, three.means)
        assert three.m == 3

    def test_average_of_distinct_observations(self):
        A = _pd([[0.3, 0.45]])
        B = _pd([[0.7, 0.25], [0.05, 0.02]])
        pa = compute_posterior(self.prior, self.obs, self.unexpected, [A])
        pb = compute_posterior(self.prior, self.obs, self.unexpected, [B])
        pab = compute_posterior(self.prior, self.obs, self.unexpected, [A, B])
        np.testing.assert_allclose(pab.cardinality.probs, (pa.cardinality.probs + pb.cardinality.probs) / 2, atol=1e-15)
        x = np.random.default_rng(1).uniform(0, 1, size=(20, 2))
        np.testing.assert_allclose(
            eval_posterior_intensity(pab, x),
            (eval_posterior_intensity(pa, x) + eval_posterior_intensity(pb, x)) / 2,
            rtol=1e-12,
        )

    def test_mass_equals_mean_away_from_boundary(self):
        # components far inside W make every Gaussian mass 1, so the identity is exact
        prior = IidClusterPrior(
            GaussianMixtureIntensity.from_components([(1.0, (3.0, 3.0), 0.01), (2.0, (4.0, 2.5), 0.02)]),
            BinomialCardinality(10, 0.4),
        )
        D = _pd([[3.05, 2.95], [4.1, 2.4], [3.0, 3.1]])
        post = compute_posterior(prior, ObservationModel(0.8, 0.01), _unexpected(0.5, 8, 0.3), [D])
        mean = posterior_cardinality_stats(post)[0]
        assert post.total_mass() == pytest.approx(mean, rel=1e-9)

    def test_underflow_is_reported(self):
        # no spurious points allowed and no detections possible
        with pytest.raises(PosteriorUnderflowError):
            compute_posterior(self.prior, ObservationModel(0.0, 0.02), _unexpected(1.0, 0, 0.5), [_pd([[0.2, 0.2]])])

    def test_rejects_points_outside_wedge(self):
        with pytest.raises(ValueError):
            compute_posterior(self.prior, self.obs, self.unexpected, [np.array([[0.2, -0.1]])])

    def test_requires_observations(self):
        with pytest.raises(ValueError):
            compute_posterior(self.prior, self.obs, self.unexpected, [])

    def test_bare_intensity_needs_pmf(self):
        with pytest.raises(ValueError):
            compute_posterior(self.prior.intensity, self.obs, self.unexpected, [_pd([])])

    def test_n_max_below_support(self):
        with pytest.raises(ValueError):
            compute_posterior(self.prior, self.obs, self.unexpected, [_pd([])], n_max=3)

    def test_n_max_default_and_extension(self):
        post = compute_posterior(self.prior, self.obs, self.unexpected, [_pd([[0.3, 0.5]])])
        assert post.n_max == 8
        longer = compute_posterior(self.prior, self.obs, self.unexpected, [_pd([[0.3, 0.5]])], n_max=12)
        np.testing.assert_allclose(longer.cardinality.probs[:9], post.cardinality.probs, rtol=1e-12)
        assert np.all(longer.cardinality.probs[9:] == 0)

    @given(
        st.lists(st.tuples(st.floats(0, 1.5), st.floats(0, 1.5)), max_size=6),
        st.floats(0.0, 1.0),
        st.floats(0.001, 0.5),
    )
    @settings(max_examples=40, deadline=None)
    def test_pmf_valid_and_intensity_nonnegative(self, pts, alpha, s_obs):
        post = compute_posterior(self.prior, ObservationModel(alpha, s_obs), _unexpected(2.0, 10, 0.5), [_pd(pts)])
        p = post.cardinality.probs
        assert abs(p.sum() - 1.0) <= 1e-9
        assert np.all(p >= 0)
        assert np.all(post.variances > 0) and np.all(post.weights >= 0)
        x = np.random.default_rng(0).uniform(0, 2, size=(200, 2))
        assert np.all(eval_posterior_intensity(post, x) >= 0)


class TestPosteriorIntensity:
    def test_alpha_one_has_no_vanished_term(self):
        prior = IidClusterPrior(GaussianMixtureIntensity.from_components([(1.0, (0.5, 0.5), 0.1)]), BinomialCardinality(5, 0.5))
        post = compute_posterior(prior, ObservationModel(1.0, 0.01), _unexpected(2.0), [_pd([[0.2, 0.3]])])
        assert post.vanished_scale == 0.0
        x = np.array([0.9, 0.9])
        expected = sum(c * gaussian_density(x, m, s) for c, m, s in zip(post.weights, post.means, post.variances))
        assert eval_posterior_intensity(post, x) == pytest.approx(float(expected), rel=1e-12)

    def test_rejects_outside_wedge(self):
        prior = IidClusterPrior(GaussianMixtureIntensity.from_components([(1.0, (0.5, 0.5), 0.1)]), BinomialCardinality(5, 0.5))
        post = compute_posterior(prior, ObservationModel(0.9, 0.01), _unexpected(2.0), [_pd([])])
        with pytest.raises(ValueError):
            eval_posterior_intensity(post, (-0.5, 0.5))

    def test_grid_is_max_normalized(self):
        prior = IidClusterPrior(GaussianMixtureIntensity.from_components([(1.0, (0.5, 0.5), 0.1)]), BinomialCardinality(5, 0.5))
        post = compute_posterior(prior, ObservationModel(0.9, 0.01), _unexpected(2.0), [_pd([[0.2, 0.6]])])
        rows = intensity_grid(post, 1.0, 1.0, 100, 100)
        assert rows.shape == (10000, 3)
        assert rows[:, 2].max() == 1.0
        assert rows[:, 2].min() >= 0.0


class TestGaussianIdentities:
    @pytest.mark.parametrize("seed", range(10))
    def test_product_identity(self, seed):
        rng = np.random.default_rng(seed)
        y, x, m = rng.uniform(0, 1, size=(3, 2))
        s, so = rng.uniform(0.001, 1.0, size=2)
        lhs = gaussian_density(y, x, so) * gaussian_density(x, m, s)
        q = gaussian_density(y, m, s + so)
        m_hat = (s * y + so * m) / (s + so)
        p_hat = s * so / (s + so)
        assert lhs == pytest.approx(q * gaussian_density(x, m_hat, p_hat), rel=1e-10)


class TestCardinalityStats:
    def _post(self, probs):
        return CardinalityPmf(probs)

    def test_point_mass(self):
        assert posterior_cardinality_stats([1.0, 0.0, 0.0]) == (0.0, 0.0, 0)

    def test_uniform_three(self):
        mean, var, mode = posterior_cardinality_stats([1 / 3, 1 / 3, 1 / 3])
        assert mean == pytest.approx(1.0) and var == pytest.approx(2 / 3) and mode == 0

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            CardinalityPmf([0.5, 0.2])


class TestDiagramDensity:
    prior = IidClusterPrior(GaussianMixtureIntensity.from_components([(1.0, (0.5, 0.5), 0.1)]), BinomialCardinality(6, 0.5))

    def _post(self):
        return compute_posterior(self.prior, ObservationModel(0.9, 0.02), _unexpected(2.0), [_pd([[0.4, 0.6], [0.1, 0.05]])])

    def test_empty_diagram(self):
        post = self._post()
        assert diagram_log_density(post, _pd([])) == pytest.approx(math.log(post.cardinality.probs[0]))

    def test_multiplicative_structure(self):
        post = self._post()
        D = [[0.3, 0.3], [0.6, 0.2]]
        d = np.array([0.45, 0.55])
        delta = diagram_log_density(post, _pd(D + [d.tolist()])) - diagram_log_density(post, _pd(D))
        p = post.cardinality.probs
        expected = math.log(p[3]) - math.log(p[2]) + math.log(eval_posterior_intensity(post, d))
        assert delta == pytest.approx(expected, rel=1e-12)

    def test_permutation_invariant(self):
        post = self._post()
        pts = np.random.default_rng(2).uniform(0, 1, size=(4, 2))
        a = diagram_log_density(post, _pd(pts))
        b = diagram_log_density(post, _pd(pts[::-1]))
        assert a == pytest.approx(b, rel=1e-14)

    def test_too_many_points(self):
        with pytest.raises(ValueError):
            diagram_log_density(self._post(), _pd(np.full((7, 2), 0.3)))

    def test_zero_cardinality_gives_minus_inf(self):
        post = compute_posterior(self.prior, ObservationModel(1.0, 0.02), _unexpected(2.0), [_pd([])])
        assert diagram_log_density(post, _pd([[0.3, 0.3]])) == -math.inf
