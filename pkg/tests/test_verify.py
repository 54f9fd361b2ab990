import math

import numpy as np
import pytest

from pointtilt import (
    CapTooSmall,
    Constant,
    DegenerateCoefficient,
    EpsOutOfRange,
    ExactAffine,
    IncompatibleIntensity,
    InvariantError,
    NotPositiveDefinite,
    PiecewiseBirth,
    ResetOU,
    ScenarioConfig,
)
from pointtilt.families import AlphaFamily, ConstantSeq, GeometricSeq
from pointtilt.simulate import path_stream
from pointtilt.verify import (
    cross_proposal_check,
    explosion_probe,
    gaussian_bound_check,
    gaussian_tail_constant,
    ou_moment_check,
    poisson_oracles,
    unit_mean_from_weights,
    unit_mean_test,
    weighted_law_vs_direct,
)

UNIT = Constant((1.0,))


def _cfg(mu, horizon=1.0, n_paths=20_000, seed=1, **kw):
    return ScenarioConfig(lambda_spec=UNIT, mu_spec=mu, horizon=horizon,
                          n_paths=n_paths, master_seed=seed, **kw)


class TestUnitMean:
    def test_identity_exact(self):
        res = unit_mean_test(_cfg(UNIT, n_paths=2_000))
        assert res.mean == 1.0
        assert res.std_error == 0.0
        assert res.verdict == "pass"

    def test_affine_passes(self):
        res = unit_mean_test(_cfg(ExactAffine(0.5, 0.3), n_paths=30_000, seed=2))
        assert res.verdict == "pass"

    def test_explosive_birth_fails(self):
        mu = PiecewiseBirth(AlphaFamily(GeometricSeq(1.0, 2.0)))
        res = unit_mean_test(_cfg(mu, horizon=5.0, n_paths=20_000, seed=3, event_cap=400))
        assert res.verdict == "fail"
        assert res.mean < 1.0 - 10 * res.std_error

    def test_needs_thousand_paths(self):
        with pytest.raises(ValueError):
            unit_mean_test(_cfg(UNIT, n_paths=100))

    def test_dead_band_classification(self):
        assert unit_mean_from_weights(np.full(100, 1.0)).verdict == "pass"
        w = np.concatenate([np.full(50, 0.9), np.full(50, 1.1)])
        assert unit_mean_from_weights(w).verdict == "pass"
        assert unit_mean_from_weights(np.full(100, 0.5)).verdict == "fail"

    def test_monotone_in_birth_rate_growth(self):
        means = []
        for r in (1.5, 2.0, 3.0):
            mu = PiecewiseBirth(AlphaFamily(GeometricSeq(1.0, r)))
            res = unit_mean_test(_cfg(mu, horizon=5.0, n_paths=15_000, seed=4,
                                      event_cap=400))
            means.append(res.mean)
        assert means[0] >= means[1] >= means[2]

    def test_se_shrinks_like_sqrt_two(self):
        r1 = unit_mean_test(_cfg(ExactAffine(0.5, 0.3), n_paths=20_000, seed=5))
        r2 = unit_mean_test(_cfg(ExactAffine(0.5, 0.3), n_paths=40_000, seed=5))
        ratio = r1.std_error / r2.std_error
        assert math.sqrt(2) * 0.9 <= ratio <= math.sqrt(2) * 1.1


class TestWeightedLaw:
    def test_identity_tv_small(self):
        res = weighted_law_vs_direct(_cfg(UNIT, n_paths=200_000, seed=6),
                                     statistic="count_marginal")
        assert res.value <= 0.005

    def test_affine_mean_count_agrees(self):
        res = weighted_law_vs_direct(_cfg(ExactAffine(1.0, 0.5), n_paths=30_000, seed=7),
                                     statistic="mean_count")
        assert res.agree
        # direct-side oracle: mean count solves m' = 1 + 0.5 m
        exact = 2.0 * (math.exp(0.5) - 1.0)
        se_direct = res.combined_se
        assert abs(res.est_direct - exact) <= 4 * se_direct

    def test_affine_marginal_close(self):
        res = weighted_law_vs_direct(_cfg(ExactAffine(1.0, 0.5), n_paths=50_000, seed=8),
                                     statistic="count_marginal")
        assert res.value <= max(3 * res.combined_se, 0.02)
        assert res.pmf_weighted.sum() == pytest.approx(1.0, abs=1e-9)
        assert res.pmf_direct.sum() == pytest.approx(1.0, abs=1e-9)

    def test_diffusion_target_rejected(self):
        ou = ResetOU(xi=ConstantSeq(1.0), a=ConstantSeq(0.0), b=ConstantSeq(-1.0), sigma=1.0)
        from pointtilt import NotDirectlySimulable
        with pytest.raises(NotDirectlySimulable):
            weighted_law_vs_direct(_cfg(ou, n_paths=1_000))

    def test_unknown_statistic(self):
        with pytest.raises(ValueError):
            weighted_law_vs_direct(_cfg(UNIT, n_paths=1_000), statistic="median")


class TestCrossProposal:
    def test_constant_target_both_match_truth(self):
        res = cross_proposal_check(UNIT, (1.0, 2.0), _cfg(UNIT, n_paths=15_000, seed=9))
        assert abs(res.estimate_1 - 1.0) <= 3 * res.se_1
        assert abs(res.estimate_2 - 1.0) <= 3 * res.se_2
        assert res.agree

    def test_reset_ou_agrees(self):
        ou = ResetOU(xi=ConstantSeq(1.0), a=ConstantSeq(0.0), b=ConstantSeq(-1.0), sigma=0.5)
        res = cross_proposal_check(ou, (1.0, 2.0), _cfg(ou, n_paths=15_000, seed=10))
        assert res.agree

    def test_zero_base_rate_rejected(self):
        with pytest.raises(IncompatibleIntensity):
            cross_proposal_check(UNIT, (0.0, 2.0), _cfg(UNIT, n_paths=1_000))

    def test_zero_reset_b_rejected_at_construction(self):
        with pytest.raises(InvariantError):
            ResetOU(xi=ConstantSeq(1.0), a=ConstantSeq(0.0), b=ConstantSeq(0.0), sigma=1.0)


class TestExplosionProbe:
    def test_divergent_rates_no_mass(self):
        probe = explosion_probe(AlphaFamily(ConstantSeq(1.0)), 5.0, 50_000, 200,
                                path_stream(11, 0, 3))
        assert probe.mass <= 3 * probe.std_error + 1e-12

    def test_geometric_mass_matches_unit_mean_gap(self):
        fam = AlphaFamily(GeometricSeq(1.0, 2.0))
        probe = explosion_probe(fam, 5.0, 50_000, 200, path_stream(12, 0, 3))
        assert 0.0 < probe.mass < 1.0
        assert probe.cap_stable
        res = unit_mean_test(_cfg(PiecewiseBirth(fam), horizon=5.0, n_paths=50_000,
                                  seed=13, event_cap=400))
        gap = abs((1.0 - res.mean) - probe.mass)
        combined = math.sqrt(res.std_error ** 2 + probe.std_error ** 2)
        assert gap <= 3 * combined

    def test_tiny_horizon_negligible_mass(self):
        probe = explosion_probe(AlphaFamily(GeometricSeq(1.0, 2.0)), 1e-3, 20_000, 200,
                                path_stream(14, 0, 3))
        assert probe.mass < 0.01

    def test_cap_too_small(self):
        with pytest.raises(CapTooSmall):
            explosion_probe(AlphaFamily(ConstantSeq(1.0)), 1.0, 100, 5,
                            path_stream(15, 0, 3))


class TestPoissonOracles:
    def test_mgf_at_log_two(self):
        res = poisson_oracles(1.0, math.log(2.0), 0.5, 500_000, path_stream(16, 0, 3))
        assert res.mgf_closed_form == pytest.approx(math.e)
        assert res.mgf_ok

    def test_zero_exponent_exact(self):
        res = poisson_oracles(1.0, 0.0, 0.0, 10_000, path_stream(17, 0, 3))
        assert res.mgf_estimate == 1.0
        assert res.mgf_closed_form == 1.0

    def test_xlogx_stable_below_one(self):
        res = poisson_oracles(1.0, 0.0, 0.5, 500_000, path_stream(18, 0, 3))
        assert math.isfinite(res.xlogx_estimate)
        assert not res.xlogx_stability_flag

    def test_eps_out_of_range(self):
        with pytest.raises(EpsOutOfRange):
            poisson_oracles(1.0, 0.0, 1.0, 100, path_stream(19, 0, 3))


class TestGaussianBound:
    def test_tail_constants(self):
        assert gaussian_tail_constant(1) == pytest.approx(math.sqrt(2.0))
        assert gaussian_tail_constant(2) == pytest.approx(2.0)

    def test_standard_normal_holds(self):
        res = gaussian_bound_check(np.zeros(1), np.eye(1), 0.1, 0.5, 100_000,
                                   path_stream(20, 0, 3))
        assert res.holds
        assert res.lhs_estimate < res.rhs_bound

    def test_tiny_exponent_trivial(self):
        res = gaussian_bound_check(np.zeros(2), np.eye(2), 1e-10, 0.5, 10_000,
                                   path_stream(21, 0, 3))
        assert res.lhs_estimate == pytest.approx(1.0, abs=1e-6)
        assert res.rhs_bound >= 1.0
        assert res.holds

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefinite):
            gaussian_bound_check(np.zeros(2), np.diag([1.0, -1.0]), 0.1, 0.5, 100,
                                 path_stream(22, 0, 3))

    def test_asymmetric_rejected(self):
        bad = np.array([[1.0, 0.5], [0.2, 1.0]])
        with pytest.raises(NotPositiveDefinite):
            gaussian_bound_check(np.zeros(2), bad, 0.1, 0.5, 100, path_stream(23, 0, 3))


class TestOUMoments:
    def test_exact_matches_closed_form(self):
        res = ou_moment_check(0.0, -1.0, 1.0, 1.0, 1.0, 100_000, "exact",
                              path_stream(24, 0, 3))
        assert res.mean_exact == pytest.approx(math.exp(-1.0))
        assert res.var_exact == pytest.approx((1 - math.exp(-2.0)) / 2)
        assert res.mean_within_3se and res.var_within_4se

    def test_sigma_zero_deterministic(self):
        res = ou_moment_check(0.0, -1.0, 0.0, 1.0, 1.0, 1_000, "exact",
                              path_stream(25, 0, 3))
        assert res.var_estimate == pytest.approx(0.0, abs=1e-30)
        assert res.mean_estimate == pytest.approx(math.exp(-1.0))

    def test_positive_b_growth(self):
        res = ou_moment_check(0.0, 0.5, 1.0, 1.0, 1.0, 100_000, "exact",
                              path_stream(26, 0, 3))
        assert res.mean_exact == pytest.approx(math.exp(0.5))
        assert res.mean_within_3se

    def test_degenerate_b(self):
        with pytest.raises(DegenerateCoefficient):
            ou_moment_check(0.0, 0.0, 1.0, 1.0, 1.0, 100, "exact", path_stream(27, 0, 3))
