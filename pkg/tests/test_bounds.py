"""Closed-form bound machinery: trivial identities, golden values,
orderings against the exact mixtures, and the threshold search."""

import logging
import math

import numpy as np
import pytest

from mnac_gt.bounds import (
    bernoulli_kl,
    beta1_min,
    beta2_min,
    bound_report,
    false_positive_eta,
    gap_from_betas,
    gap_G,
    n_gt,
    n_gt_from_betas,
    optimize_threshold,
    pfp_upper_bound,
    pmd_upper_bound,
    q1_exact,
    q1_lower_bound,
    q2_exact,
    q2_upper_bound,
)
from mnac_gt.capacity import binary_entropy_nats, min_user_id_cost_lb
from mnac_gt.errors import ConfigError, NumericalFailure, ValidityError
from mnac_gt.params import DiscoveryConfig, ErrorTarget, SystemParams, params_for_snr

LN2 = math.log(2.0)

# the mixture-oracle configuration used throughout: ell=100, alpha=0.1,
# p=1/11, rho=1e-2, tau2=sigma_w^2
PARAMS_100 = params_for_snr(ell=100, alpha=0.1, snr=1e-2)
CFG_100 = DiscoveryConfig(p=1.0 / 11.0, tau2=1.0)


def random_valid_configs(count, seed, ell_max=150):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        ell = int(rng.integers(2, ell_max))
        params = params_for_snr(
            ell=ell,
            alpha=float(rng.uniform(0.005, 0.6)),
            snr=float(rng.uniform(1e-4, 0.2)),
        )
        tau2_hi = 2.0 * (params.power * params.sigma2_h + params.sigma2_w)
        cfg = DiscoveryConfig(tau2=float(rng.uniform(0.0, 1.0)) * tau2_hi)
        yield params, cfg


class TestQ1Q2:
    def test_single_user_closed_forms(self):
        params = SystemParams(ell=1, alpha=0.3, power=2.0, sigma2_h=1.5, sigma2_w=0.7)
        cfg = DiscoveryConfig(p=0.5, tau2=1.1)
        expected_q1 = 1.0 - math.exp(-1.1 / (1.5 * 2.0 + 0.7))
        assert q1_exact(params, cfg) == pytest.approx(expected_q1, rel=1e-12)
        assert q2_exact(params, cfg) == pytest.approx(math.exp(-1.1 / 0.7), rel=1e-12)

    def test_zero_threshold(self):
        cfg = DiscoveryConfig(p=1.0 / 11.0, tau2=0.0)
        assert q1_exact(PARAMS_100, cfg) == 0.0
        assert q2_exact(PARAMS_100, cfg) == pytest.approx(1.0, rel=1e-12)
        assert q1_lower_bound(PARAMS_100, cfg) == 0.0
        assert q2_upper_bound(PARAMS_100, cfg) == 1.0

    def test_golden_mixtures(self):
        assert q1_exact(PARAMS_100, CFG_100) == pytest.approx(0.6252128642453101, rel=1e-9)
        assert q2_exact(PARAMS_100, CFG_100) == pytest.approx(0.3711593005020995, rel=1e-9)
        assert q1_lower_bound(PARAMS_100, CFG_100) == pytest.approx(0.6251968292809836, rel=1e-9)

    def test_jensen_ordering_random_configs(self):
        # the q1 bound must hold everywhere inside its validity region
        for params, cfg in random_valid_configs(1000, seed=11):
            assert q1_lower_bound(params, cfg) <= q1_exact(params, cfg) + 1e-12

    def test_q2_ordering_logged_not_failed_outside_strict_region(self, caplog):
        # concavity of the q2 mixture is only guaranteed for
        # tau2 <= 2*sigma_w^2; violations beyond it are logged
        violations_strict = 0
        soft = 0
        log = logging.getLogger("test.q2_ordering")
        with caplog.at_level(logging.WARNING):
            for params, cfg in random_valid_configs(100, seed=5):
                if q2_exact(params, cfg) > q2_upper_bound(params, cfg) + 1e-12:
                    if cfg.tau2 <= 2.0 * params.sigma2_w:
                        violations_strict += 1
                    else:
                        soft += 1
                        log.warning("q2 ordering violated at tau2=%g", cfg.tau2)
        assert violations_strict == 0

    def test_identity_is_exact_shared_expression(self):
        for params, cfg in random_valid_configs(100, seed=3):
            assert q2_upper_bound(params, cfg) == 1.0 - q1_lower_bound(params, cfg)

    def test_jensen_precondition_enforced(self):
        params = PARAMS_100
        cfg = DiscoveryConfig(tau2=2.0 * (params.power * params.sigma2_h + params.sigma2_w) + 0.1)
        with pytest.raises(ValidityError):
            q1_lower_bound(params, cfg)


class TestBernoulliKl:
    def test_zero_at_equal(self):
        assert bernoulli_kl(0.3, 0.3) == 0.0

    def test_known_value(self):
        a, b = 0.1, 0.2
        expected = a * math.log(a / b) + (1 - a) * math.log((1 - a) / (1 - b))
        assert bernoulli_kl(a, b) == pytest.approx(expected, rel=1e-12)

    def test_domain(self):
        with pytest.raises(ConfigError):
            bernoulli_kl(0.5, 0.0)


class TestPmdBound:
    def test_no_margin_gives_trivial_bound(self):
        # delta = 0: the bound collapses to alpha*ell
        cfg = DiscoveryConfig(p=1 / 11, tau2=1.0, delta_margin=0.0, n=500)
        b = pmd_upper_bound(PARAMS_100, cfg)
        assert b.product == pytest.approx(PARAMS_100.alpha * PARAMS_100.ell, rel=1e-12)

    def test_p_zero_gives_trivial_bound(self):
        cfg = DiscoveryConfig(p=0.0, tau2=1.0, n=500)
        assert pmd_upper_bound(PARAMS_100, cfg).product == pytest.approx(10.0, rel=1e-12)

    def test_product_form_below_exponential_form(self):
        for params, cfg in random_valid_configs(200, seed=17):
            b = pmd_upper_bound(params, cfg, n=1000)
            assert b.product <= b.exponential * (1 + 1e-12)

    def test_monotone_in_n_and_delta(self):
        cfg = DiscoveryConfig(p=1 / 11, tau2=1.0)
        vals = [pmd_upper_bound(PARAMS_100, cfg, n=n).product for n in (0, 10, 100, 1000, 10000)]
        assert all(x >= y for x, y in zip(vals, vals[1:]))
        by_delta = [
            pmd_upper_bound(
                PARAMS_100, DiscoveryConfig(p=1 / 11, tau2=1.0, delta_margin=d), n=1000
            ).product
            for d in (0.0, 0.05, 0.1, 0.5, 1.0)
        ]
        assert all(x >= y for x, y in zip(by_delta, by_delta[1:]))

    def test_golden_low_snr_configuration(self):
        params = params_for_snr(ell=10**4, alpha=1e-2, snr=1e-4)
        cfg = DiscoveryConfig(delta_margin=0.05, tau2=2.0002, n=10**5)
        b = pmd_upper_bound(params, cfg)
        assert b.product == pytest.approx(2.4868742941859896, rel=1e-12)
        assert b.product <= b.exponential


class TestPfpBound:
    def test_zero_uses(self):
        assert pfp_upper_bound(PARAMS_100, CFG_100, n=0) == 0.0

    def test_zero_margin_gives_zero_bound(self):
        cfg = DiscoveryConfig(p=1 / 11, tau2=1.0, delta_margin=0.0, n=1000)
        assert pfp_upper_bound(PARAMS_100, cfg) == 0.0

    def test_monotone_in_n(self):
        vals = [pfp_upper_bound(PARAMS_100, CFG_100, n=n) for n in (0, 10, 100, 1000)]
        assert all(x <= y for x, y in zip(vals, vals[1:]))

    def test_margin_domain_error(self):
        # enormous margin pushes q2 - q1*Delta below zero
        cfg = DiscoveryConfig(p=1 / 11, tau2=1.0, delta_margin=50.0, n=100)
        with pytest.raises(ValidityError):
            pfp_upper_bound(PARAMS_100, cfg)

    def test_golden_low_snr_configuration(self):
        params = params_for_snr(ell=10**4, alpha=1e-2, snr=1e-4)
        cfg = DiscoveryConfig(delta_margin=0.05, tau2=2.0002, n=10**5)
        assert pfp_upper_bound(params, cfg) == pytest.approx(9899.618395990562, rel=1e-12)


class TestBetaFactors:
    TARGET = ErrorTarget(delta_exp=1.0)

    def test_beta1_limit_vanishes_with_delta_exp(self):
        # alpha = 1/ell makes the formula factor equal delta_exp
        params = params_for_snr(ell=1000, alpha=1e-3, snr=1e-3)
        cfg = DiscoveryConfig(tau2=1.0)
        tiny = beta1_min(params, cfg, ErrorTarget(delta_exp=1e-9))
        small = beta1_min(params, cfg, ErrorTarget(delta_exp=1e-3))
        assert 0.0 < tiny.formula < small.formula
        assert tiny.formula == pytest.approx(small.formula * 1e-6, rel=1e-6)

    def test_beta1_golden(self):
        params = params_for_snr(ell=10**4, alpha=1e-2, snr=1e-4)
        cfg = DiscoveryConfig(delta_margin=0.05, tau2=2.0002)
        res = beta1_min(params, cfg, self.TARGET)
        assert res.feasible
        assert res.formula == pytest.approx(129960.6227189083, rel=1e-9)

    def test_beta1_solved_hits_target_exactly(self):
        params = params_for_snr(ell=10**4, alpha=1e-2, snr=1e-4)
        cfg = DiscoveryConfig(delta_margin=0.05, tau2=2.0002)
        res = beta1_min(params, cfg, self.TARGET)
        n = res.solved * binary_entropy_nats(params.alpha) / params.alpha
        bound = pmd_upper_bound(params, cfg, n=n).exponential
        assert bound == pytest.approx(params.ell ** -self.TARGET.delta_exp, rel=1e-6)

    def test_formula_sized_n_meets_target_via_product_form(self):
        # the printed formula carries slack; the sharper product form at
        # n = beta1_formula * H2(alpha)/alpha must still meet the target
        for ell, alpha, snr in ((10**4, 1e-2, 1e-4), (10**5, 1e-2, 1e-3), (2000, 0.05, 1e-3)):
            params = params_for_snr(ell=ell, alpha=alpha, snr=snr)
            cfg = DiscoveryConfig(delta_margin=0.05, tau2=1.0)
            res = beta1_min(params, cfg, self.TARGET)
            if not res.feasible:
                continue
            n = res.formula * binary_entropy_nats(alpha) / alpha
            bound = pmd_upper_bound(params, cfg, n=n).product
            assert bound <= ell ** -self.TARGET.delta_exp * (1 + 1e-6)

    def test_beta1_infeasible_by_formula_still_solves(self):
        # (1+delta)*ln(ell) < ln(1/alpha): formula factor negative
        params = params_for_snr(ell=10, alpha=1e-3, snr=1e-3)
        cfg = DiscoveryConfig(tau2=1.0)
        res = beta1_min(params, cfg, ErrorTarget(delta_exp=0.5))
        assert not res.feasible and res.formula < 0.0
        assert res.solved >= 0.0

    def test_beta2_vanishes_for_huge_population_target(self):
        params = params_for_snr(ell=10**6, alpha=1e-3, snr=1e-4)
        cfg = DiscoveryConfig(delta_margin=0.05, tau2=2.0002)
        assert beta2_min(params, cfg, ErrorTarget(delta_exp=2.0)) < 1e-10

    def test_beta2_golden(self):
        params = params_for_snr(ell=10**4, alpha=1e-2, snr=1e-4)
        cfg = DiscoveryConfig(delta_margin=0.05, tau2=2.0002)
        assert beta2_min(params, cfg, self.TARGET) == pytest.approx(2.158196505134553e-05, rel=1e-9)

    def test_beta2_near_pole_is_large_but_finite(self):
        # (1-alpha)*ell^(1+delta) barely above 1
        params = params_for_snr(ell=2, alpha=0.5, snr=1e-3)
        cfg = DiscoveryConfig(delta_margin=0.05, tau2=1.0, p=0.5)
        delta_exp = math.log2(1.0001 / 0.5) - 1.0
        val = beta2_min(params, cfg, ErrorTarget(delta_exp=delta_exp))
        assert math.isfinite(val) and val > 100.0

    def test_beta2_pole_rejected(self):
        # (1-alpha)*ell^(1+delta) = 0.8 <= 1
        params = params_for_snr(ell=2, alpha=0.8, snr=1e-3)
        cfg = DiscoveryConfig(delta_margin=0.05, tau2=1.0, p=0.5)
        with pytest.raises(ValidityError):
            beta2_min(params, cfg, ErrorTarget(delta_exp=1.0))


class TestNgtAndGap:
    TARGET = ErrorTarget(delta_exp=1.0)

    def test_unit_betas_substitution(self):
        assert n_gt_from_betas(1.0, 1.0, 100, 0.5) == pytest.approx(100 * LN2, rel=1e-12)

    def test_gap_zero_when_product_is_one(self):
        assert gap_from_betas(2.0, 10.0, 0.05) == pytest.approx(0.0, abs=1e-15)

    def test_gap_identity_with_n_ratio(self):
        params = params_for_snr(ell=10**4, alpha=1e-2, snr=1e-4)
        cfg = DiscoveryConfig(delta_margin=0.05, tau2=2.0002)
        g = gap_G(params, cfg, self.TARGET)
        ngt = n_gt(params, cfg, self.TARGET)
        n0 = min_user_id_cost_lb(params)
        assert g == pytest.approx((ngt - n0) / n0, rel=1e-9)

    def test_golden_composition(self):
        params = params_for_snr(ell=10**4, alpha=1e-2, snr=1e-4)
        cfg = DiscoveryConfig(delta_margin=0.05, tau2=2.0002)
        assert n_gt(params, cfg, self.TARGET) == pytest.approx(72779942.77970298, rel=1e-9)
        assert gap_G(params, cfg, self.TARGET) == pytest.approx(742.8767379276873, rel=1e-9)


class TestOptimizeThreshold:
    TARGET = ErrorTarget(delta_exp=1.0)

    def test_returns_feasible_minimizer(self):
        params = params_for_snr(ell=10**4, alpha=1e-2, snr=1e-4)
        cfg = DiscoveryConfig(delta_margin=0.05)
        tau2, report = optimize_threshold(params, cfg, self.TARGET, grid_points=50)
        tau2_hi = 2.0 * (params.power * params.sigma2_h + params.sigma2_w)
        assert 0.0 < tau2 <= tau2_hi
        # argmin over the evaluated grid
        for i in range(1, 51):
            candidate = tau2_hi * i / 50
            try:
                val = n_gt(params, cfg.with_tau2(candidate), self.TARGET)
            except ValidityError:
                continue
            assert report.n_gt <= val * (1 + 1e-12)

    def test_golden_pair_and_grid_stability(self):
        params = params_for_snr(ell=10**4, alpha=1e-2, snr=1e-4)
        cfg = DiscoveryConfig(delta_margin=0.05)
        tau2, report = optimize_threshold(params, cfg, self.TARGET, grid_points=200)
        assert tau2 == pytest.approx(2.0002, rel=1e-12)
        assert report.n_gt == pytest.approx(72779942.77970298, rel=1e-9)
        _, report_fine = optimize_threshold(params, cfg, self.TARGET, grid_points=2000)
        assert report_fine.n_gt == pytest.approx(report.n_gt, rel=0.02)

    def test_everywhere_infeasible_raises(self):
        params = params_for_snr(ell=100, alpha=0.1, snr=1e-2)
        cfg = DiscoveryConfig(delta_margin=1000.0)  # q2 - q1*Delta < 0 on the whole grid
        with pytest.raises(NumericalFailure):
            optimize_threshold(params, cfg, self.TARGET, grid_points=20)

    def test_grid_points_validated(self):
        with pytest.raises(ConfigError):
            optimize_threshold(PARAMS_100, DiscoveryConfig(), self.TARGET, grid_points=1)


class TestBoundReport:
    def test_row_matches_column_order(self):
        params = params_for_snr(ell=200, alpha=0.07, snr=1e-2)
        cfg = DiscoveryConfig(delta_margin=0.05, tau2=1.0, n=500)
        report = bound_report(params, cfg, ErrorTarget(delta_exp=1.0))
        row = report.to_row()
        assert row[0] == 200 and row[4] == 500
        assert len(row) == 19
        assert report.q1_lb <= report.q1_exact
        assert report.q2_ub == 1.0 - report.q1_lb

    def test_eta_in_unit_interval(self):
        eta = false_positive_eta(PARAMS_100, CFG_100)
        assert 0.0 < eta < 1.0
