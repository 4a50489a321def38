"""Tests for the closed-form SINRs, rate bounds, scaling laws, and aggregates."""

import numpy as np
import pytest

from fbmclab.analysis import (
    Case,
    LinkParams,
    conditional_sinr,
    contamination_gain,
    mmse_ergodic_rate,
    power_scaling_limit,
    rate_lower_bound,
    scaled_symbol_power,
    sum_rate,
    total_error_variance,
)
from fbmclab.core import InvalidParameterError, RngStream, complex_normal
from fbmclab.estimation import (
    analytic_training,
    lmmse_estimate,
    lmmse_estimate_multicell,
    simulate_pilot_phase,
)

TABLE_D = np.array([0.749, 0.045, 0.246, 0.121, 0.125, 0.142, 0.635, 0.256])


def _params(N=64, U=8, K=8, P2=10.0, beta=None, beta_cells=None, noise=1.0):
    return LinkParams(N, U, K, P2, noise_var=noise, beta=beta, beta_cells=beta_cells)


def _random_tensor(rng, num_cells, U, scale=0.3):
    bc = np.ones((num_cells, U))
    bc[1:] = rng.uniform(0.0, scale, (num_cells - 1, U))
    return bc


class TestLowerBounds:
    def test_single_user_mrc_collapse(self):
        """U = 1, N = 2, 2P_d = beta = noise = 1 gives exactly one bit."""
        p = LinkParams(2, 1, 1, 1.0, beta=np.array([1.0]))
        lb = rate_lower_bound(Case("single", "mrc", "perfect"), p)
        assert lb[0] == pytest.approx(1.0)

    def test_zf_perfect_hand_value(self):
        p = LinkParams(128, 8, 8, 10.0, beta=np.ones(8))
        lb = rate_lower_bound(Case("single", "zf", "perfect"), p)
        np.testing.assert_allclose(lb, np.log2(1201.0))

    def test_multicell_reduces_to_single_cell(self):
        """One-cell tensors collapse every multi-cell bound onto its single-cell
        counterpart with beta = 1 (checked at random parameter points)."""
        rng = np.random.default_rng(0)
        for _ in range(10):
            N = int(rng.integers(16, 200))
            U = int(rng.integers(2, 9))
            P2 = float(rng.uniform(0.05, 40.0))
            K = 8
            single = LinkParams(N, U, K, P2, beta=np.ones(U))
            multi = LinkParams(N, U, K, P2, beta_cells=np.ones((1, U)))
            for rcv in ("mrc", "zf"):
                for csi in ("perfect", "imperfect"):
                    a = rate_lower_bound(Case("single", rcv, csi), single)
                    b = rate_lower_bound(Case("multi", rcv, csi), multi)
                    np.testing.assert_allclose(a, b, atol=1e-10)

    def test_mmse_has_no_closed_form_bound(self):
        p = _params(beta=TABLE_D)
        with pytest.raises(InvalidParameterError, match="MMSE"):
            rate_lower_bound(Case("single", "mmse", "perfect"), p)

    def test_degree_of_freedom_requirements(self):
        with pytest.raises(InvalidParameterError, match="antennas"):
            rate_lower_bound(
                Case("single", "mrc", "perfect"),
                LinkParams(1, 1, 1, 1.0, beta=np.ones(1)),
            )
        with pytest.raises(InvalidParameterError, match="antennas"):
            rate_lower_bound(
                Case("single", "zf", "perfect"),
                LinkParams(8, 8, 8, 1.0, beta=np.ones(8)),
            )


class TestScalingLimits:
    def test_perfect_csi_limit(self):
        p = LinkParams(4096, 4, 8, 1.0, beta=np.ones(4))
        case = Case("single", "zf", "perfect", "inv_n", ref_power=10.0)
        np.testing.assert_allclose(power_scaling_limit(case, p), np.log2(11.0))

    def test_imperfect_csi_limit(self):
        p = LinkParams(4096, 4, 8, 1.0, beta=np.ones(4))
        case = Case("single", "zf", "imperfect", "inv_sqrt_n", ref_power=1.0)
        np.testing.assert_allclose(power_scaling_limit(case, p), np.log2(9.0))

    def test_imperfect_inv_n_vanishes(self):
        p = LinkParams(4096, 4, 8, 1.0, beta=np.ones(4))
        case = Case("single", "mrc", "imperfect", "inv_n", ref_power=10.0)
        np.testing.assert_array_equal(power_scaling_limit(case, p), np.zeros(4))

    def test_unsupported_combination(self):
        p = LinkParams(4096, 4, 8, 1.0, beta=np.ones(4))
        with pytest.raises(InvalidParameterError, match="no stated limit"):
            power_scaling_limit(
                Case("single", "zf", "perfect", "inv_sqrt_n", ref_power=10.0), p
            )
        with pytest.raises(InvalidParameterError):
            power_scaling_limit(Case("single", "zf", "perfect"), p)

    def test_bound_approaches_limit_monotonically(self):
        """|bound - limit| decreases over N in {256, 512, 1024, 4096}."""
        E = 10.0 ** 0.5
        for csi, scaling in (("perfect", "inv_n"), ("imperfect", "inv_sqrt_n")):
            case = Case("single", "zf", csi, scaling, ref_power=E)
            gaps = []
            for N in (256, 512, 1024, 4096):
                p = LinkParams(N, 8, 8, scaled_symbol_power(case, N), beta=TABLE_D)
                gap = np.abs(
                    rate_lower_bound(case, p) - power_scaling_limit(case, p)
                ).max()
                gaps.append(gap)
            assert all(gaps[i] > gaps[i + 1] for i in range(len(gaps) - 1))


class TestMultiCellAggregates:
    def test_gamma_no_interference(self):
        p = _params(beta_cells=np.ones((1, 4))[:, :4], U=4, K=4)
        np.testing.assert_array_equal(contamination_gain(p), np.ones(4))

    def test_gamma_zero_cross_gains(self):
        bc = np.ones((3, 4))
        bc[1:] = 0.0
        p = LinkParams(16, 4, 4, 1.0, beta_cells=bc)
        np.testing.assert_array_equal(contamination_gain(p), np.ones(4))

    def test_total_error_single_cell_form(self):
        """With one cell the aggregate is U * noise / (P_p + noise)."""
        p = LinkParams(16, 4, 4, 1.0, beta_cells=np.ones((1, 4)))
        expected = 4 * 1.0 / (p.pilot_power + 1.0)
        assert total_error_variance(p) == pytest.approx(expected)

    def test_total_error_matches_direct_evaluation(self):
        rng = np.random.default_rng(1)
        bc = _random_tensor(rng, 5, 6)
        p = LinkParams(32, 6, 8, 3.0, beta_cells=bc)
        P_p, s2 = p.pilot_power, p.noise_var
        gamma = 1.0 + bc[1:].sum(axis=0)
        direct = 0.0
        for i in range(1, 5):
            for j in range(6):
                direct += (
                    bc[i, j]
                    * (P_p * gamma[j] - P_p * bc[i, j] + s2)
                    / (P_p * gamma[j] + s2)
                )
        for j in range(6):
            direct += (P_p * (gamma[j] - 1.0) + s2) / (P_p * gamma[j] + s2)
        assert total_error_variance(p) == pytest.approx(direct, abs=1e-12)


class TestConditionalSinr:
    def test_single_user_perfect_mrc(self):
        rng = RngStream(2, 0).generator()
        p = LinkParams(16, 1, 1, 4.0, beta=np.ones(1))
        g = complex_normal(rng, (16, 1), 1.0)
        sinr = conditional_sinr(Case("single", "mrc", "perfect"), p, channel=g)
        assert sinr[0] == pytest.approx(4.0 * np.sum(np.abs(g) ** 2))

    def test_mmse_dominates_zf_every_draw(self):
        rng = RngStream(3, 0).generator()
        p = _params(N=32, beta=TABLE_D)
        for _ in range(50):
            G = complex_normal(rng, (32, 8), 1.0) * np.sqrt(TABLE_D)
            zf = conditional_sinr(Case("single", "zf", "perfect"), p, channel=G)
            mmse = conditional_sinr(Case("single", "mmse", "perfect"), p, channel=G)
            assert np.all(mmse >= zf - 1e-9)

    def test_imperfect_mrc_scaling_asymptote(self):
        """At N = 4096 with 2P_d = E/sqrt(N), the per-draw SINR sits within 10%
        of the stated limit K (beta E)^2 / noise^2.  The pre-limit correction
        is O(P_p) = O(E K / sqrt(N)), so the 10% window needs a small reference
        power at this N; E = 0.4 leaves ~6% margin plus draw noise."""
        E = 0.4
        N, U, K = 4096, 4, 8
        case = Case("single", "mrc", "imperfect", "inv_sqrt_n", ref_power=E)
        p = LinkParams(N, U, K, scaled_symbol_power(case, N), beta=np.ones(U))
        rng = RngStream(4, 0).generator()
        G = complex_normal(rng, (N, U), 1.0)
        B = analytic_training(K, U, p.half_power, rng)
        est = lmmse_estimate(simulate_pilot_phase(G, B, 1.0, rng), B, p.beta, 1.0)
        sinr = conditional_sinr(Case("single", "mrc", "imperfect"), p, estimate=est)
        limit = K * E**2
        assert np.all(np.abs(sinr - limit) / limit <= 0.10)

    def test_multicell_zf_estimated_reduces_without_contamination(self):
        rng = RngStream(5, 0).generator()
        U = 4
        bc = np.ones((1, U))
        p = LinkParams(32, U, 4, 5.0, beta_cells=bc)
        p_single = LinkParams(32, U, 4, 5.0, beta=np.ones(U))
        G = complex_normal(rng, (1, 32, U), 1.0)
        B = analytic_training(4, U, p.half_power, rng)
        Y = simulate_pilot_phase(G, B, 1.0, rng)
        multi = lmmse_estimate_multicell(Y, B, bc, 1.0)
        single = lmmse_estimate(Y, B, np.ones(U), 1.0)
        a = conditional_sinr(Case("multi", "zf", "imperfect"), p, estimate=multi)
        b = conditional_sinr(Case("single", "zf", "imperfect"), p_single, estimate=single)
        np.testing.assert_allclose(a, b, rtol=1e-10)

    def test_multicell_mmse_unsupported(self):
        p = LinkParams(16, 2, 2, 1.0, beta_cells=np.ones((1, 2)))
        with pytest.raises(InvalidParameterError):
            conditional_sinr(Case("multi", "mmse", "perfect"), p, channel=np.ones((1, 16, 2)))


class TestContaminatedMrcVariance:
    def _estimate(self, bc, p, rng):
        G = complex_normal(rng, (bc.shape[0], p.num_antennas, p.num_users), 1.0)
        G *= np.sqrt(bc)[:, None, :]
        B = analytic_training(p.num_pilots, p.num_users, p.half_power, rng)
        Y = simulate_pilot_phase(G, B, p.noise_var, rng)
        return lmmse_estimate_multicell(Y, B, bc, p.noise_var)

    def test_quadratic_contamination_term(self):
        """Doubling every cross-cell gain scales the norm^4 term by four."""
        from fbmclab.analysis import contaminated_mrc_variance

        rng = RngStream(6, 0).generator()
        U = 4
        bc = np.ones((3, U))
        bc[1:] = 0.2
        p1 = LinkParams(32, U, 4, 2.0, beta_cells=bc)
        bc2 = bc.copy()
        bc2[1:] *= 2.0
        p2 = LinkParams(32, U, 4, 2.0, beta_cells=bc2)
        est = self._estimate(bc, p1, rng)
        norms2 = np.sum(np.abs(est.ghat) ** 2, axis=0)
        v1 = contaminated_mrc_variance(est, p1)
        v2 = contaminated_mrc_variance(est, p2)
        # isolate the norm^4 contamination contribution analytically
        quad1 = p1.half_power * (bc[1:] ** 2).sum(axis=0) * norms2**2
        quad2 = p2.half_power * (bc2[1:] ** 2).sum(axis=0) * norms2**2
        np.testing.assert_allclose(quad2, 4.0 * quad1)
        assert np.all(v2 > v1)

    def test_collapses_to_single_cell_interference(self):
        """No contamination and vanishing noise leaves only the intra-cell
        leakage term of the plain MRC receiver."""
        from fbmclab.analysis import contaminated_mrc_variance

        rng = RngStream(7, 0).generator()
        U = 4
        bc = np.ones((1, U))
        noise = 1e-9
        p = LinkParams(32, U, 4, 2.0, noise_var=noise, beta_cells=bc)
        est = self._estimate(bc, p, rng)
        Gh = est.ghat
        var = contaminated_mrc_variance(est, p)
        cross = np.abs(Gh.conj().T @ Gh) ** 2
        np.fill_diagonal(cross, 0.0)
        expected = p.half_power * cross.sum(axis=1)
        np.testing.assert_allclose(var, expected, rtol=1e-4)


class TestMmseErgodicRate:
    def test_single_user_scalar_form(self):
        """U = 1 reduces to E[log2(1 + c |g|^2)] (same draws, same formula)."""
        p = LinkParams(8, 1, 1, 4.0, beta=np.ones(1))
        rng = RngStream(8, 0).generator()
        rate, half = mmse_ergodic_rate(Case("single", "mmse", "perfect"), p, 200, rng)
        rng2 = RngStream(8, 0).generator()
        direct = np.mean(
            [
                np.log2(1.0 + 4.0 * np.sum(np.abs(complex_normal(rng2, (8, 1), 1.0)) ** 2))
                for _ in range(200)
            ]
        )
        assert rate[0] == pytest.approx(direct, rel=1e-12)

    def test_rate_vanishes_with_power(self):
        p = LinkParams(8, 2, 2, 1e-9, beta=np.ones(2))
        rate, _ = mmse_ergodic_rate(Case("single", "mmse", "perfect"), p, 100, RngStream(9, 0).generator())
        assert np.all(rate < 1e-6)

    def test_minimum_draws(self):
        p = LinkParams(8, 2, 2, 1.0, beta=np.ones(2))
        with pytest.raises(InvalidParameterError):
            mmse_ergodic_rate(Case("single", "mmse", "perfect"), p, 50, RngStream(0, 0).generator())


class TestWishartIdentities:
    def test_inverse_norm_expectation(self):
        """E[1 / ||g||^2] * beta (N - 1) stays within [0.98, 1.02]."""
        rng = RngStream(10, 0).generator()
        N, beta, draws = 32, 0.7, 4000
        g = complex_normal(rng, (draws, N), beta)
        vals = 1.0 / np.sum(np.abs(g) ** 2, axis=1)
        assert 0.98 <= np.mean(vals) * beta * (N - 1) <= 1.02

    def test_inverse_gram_diagonal_expectation(self):
        """E[(G^H G)^{-1}_{uu}] * beta (N - U) stays within [0.98, 1.02]."""
        rng = RngStream(11, 0).generator()
        N, U, draws, beta = 32, 8, 3000, 0.5
        acc = np.zeros(U)
        for _ in range(draws):
            G = complex_normal(rng, (N, U), beta)
            acc += np.diagonal(np.linalg.inv(G.conj().T @ G)).real
        np.testing.assert_allclose(acc / draws * beta * (N - U), np.ones(U), atol=0.02)


class TestSumRate:
    def test_training_overhead_factor(self):
        p = _params(beta=TABLE_D)
        rates = np.ones(8)
        assert sum_rate(rates, "imperfect", p) == pytest.approx(8 * 188.0 / 196.0)

    def test_perfect_csi_no_overhead(self):
        p = _params(beta=TABLE_D)
        assert sum_rate(np.ones(8), "perfect", p) == pytest.approx(8.0)

    def test_zero_rates(self):
        p = _params(beta=TABLE_D)
        assert sum_rate(np.zeros(8), "perfect", p) == 0.0

    def test_non_finite_rejected(self):
        p = _params(beta=TABLE_D)
        with pytest.raises(InvalidParameterError):
            sum_rate(np.array([np.inf] + [0.0] * 7), "perfect", p)


class TestParamValidation:
    def test_pilot_count(self):
        with pytest.raises(InvalidParameterError):
            LinkParams(8, 4, 2, 1.0)

    def test_coherence_interval(self):
        with pytest.raises(InvalidParameterError):
            LinkParams(8, 4, 4, 1.0, coherence_symbols=4)

    def test_home_row_must_be_unit(self):
        bc = np.full((2, 4), 0.5)
        with pytest.raises(InvalidParameterError):
            LinkParams(8, 4, 4, 1.0, beta_cells=bc)

    def test_pilot_power_identity(self):
        p = LinkParams(8, 4, 4, 3.0, beta=np.ones(4))
        assert p.pilot_power == pytest.approx(2.0 * p.half_power * 4)

    def test_case_validation(self):
        with pytest.raises(InvalidParameterError):
            Case("single", "dfe", "perfect")
        with pytest.raises(InvalidParameterError):
            Case("single", "zf", "perfect", "inv_n")  # scaling without ref power
