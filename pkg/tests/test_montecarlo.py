"""Trial harness and conditional estimators against the closed forms."""

import math

import numpy as np
import pytest

from mnac_gt.bounds import q1_exact, q2_exact
from mnac_gt.montecarlo import (
    TrialStats,
    estimate_q1_q2,
    run_discovery_trials,
    wilson_interval,
)
from mnac_gt.params import DiscoveryConfig, SystemParams, params_for_snr


class TestWilson:
    def test_contains_point_estimate(self):
        lo, hi = wilson_interval(30, 100)
        assert lo < 0.3 < hi

    def test_empty_draws(self):
        lo, hi = wilson_interval(0, 0)
        assert math.isnan(lo) and math.isnan(hi)

    def test_degenerate_counts_stay_in_unit_interval(self):
        assert wilson_interval(0, 50)[0] == pytest.approx(0.0, abs=1e-12)
        assert wilson_interval(50, 50)[1] == pytest.approx(1.0, abs=1e-12)
        for hits, n in ((0, 50), (50, 50), (25, 50)):
            lo, hi = wilson_interval(hits, n)
            assert 0.0 <= lo <= hi <= 1.0


class TestTrialStats:
    def test_merge_adds_fields(self):
        a = TrialStats(trials=2, md_union_count=1, q1_hits=3, q1_draws=5)
        b = TrialStats(trials=3, md_union_count=0, q1_hits=1, q1_draws=5)
        m = a.merged(b)
        assert m.trials == 5 and m.md_union_count == 1 and m.q1_est == 0.4

    def test_unavailable_estimates_are_nan(self):
        assert math.isnan(TrialStats().q1_est)
        assert math.isnan(TrialStats().p_md)


class TestRunDiscoveryTrials:
    def test_no_active_users_no_misses(self):
        params = SystemParams(ell=50, alpha=0.0)
        cfg = DiscoveryConfig(n=40, p=0.2, tau2=1.0)
        stats = run_discovery_trials(params, cfg, trials=30, seed=1)
        assert stats.md_union_count == 0
        assert stats.md_user_total == 0
        assert stats.q1_draws == 0  # nobody active, no conditioning events

    def test_noiseless_comp_has_no_misses(self):
        # vanishing noise, threshold under the weakest single-user energy,
        # q1 fed as zero: exact COMP, no misdetections in any trial
        params = SystemParams(ell=12, alpha=0.3, power=1.0, sigma2_h=1.0, sigma2_w=1e-60)
        cfg = DiscoveryConfig(n=60, p=0.2, tau2=1e-9)
        stats = run_discovery_trials(params, cfg, trials=200, seed=3, q1_override=0.0)
        assert stats.md_union_count == 0

    def test_union_counts_bounded_by_user_totals(self):
        params = params_for_snr(ell=60, alpha=0.1, snr=1e-2)
        cfg = DiscoveryConfig(n=150, tau2=1.5)
        stats = run_discovery_trials(params, cfg, trials=100, seed=5)
        assert stats.md_union_count <= stats.md_user_total
        assert stats.fp_union_count <= stats.fp_user_total
        assert stats.md_union_count <= stats.trials

    def test_deterministic_across_worker_counts(self):
        params = params_for_snr(ell=40, alpha=0.15, snr=1e-2)
        cfg = DiscoveryConfig(n=120, tau2=1.2)
        one = run_discovery_trials(params, cfg, trials=60, seed=9, workers=1)
        four = run_discovery_trials(params, cfg, trials=60, seed=9, workers=4)
        assert one == four

    def test_fixed_matrix_mode_differs_from_redraw(self):
        params = params_for_snr(ell=40, alpha=0.15, snr=1e-2)
        cfg = DiscoveryConfig(n=120, tau2=1.2)
        redraw = run_discovery_trials(params, cfg, trials=50, seed=2)
        fixed = run_discovery_trials(params, cfg, trials=50, seed=2, redraw_matrix=False)
        assert redraw != fixed


class TestEstimateQ1Q2:
    def test_zero_threshold_estimates(self):
        params = params_for_snr(ell=20, alpha=0.2, snr=1e-2)
        cfg = DiscoveryConfig(tau2=0.0)
        stats = estimate_q1_q2(params, cfg, draws=2000, seed=0)
        assert stats.q1_est == 0.0
        assert stats.q2_est == 1.0

    def test_single_user_closed_form(self):
        params = SystemParams(ell=1, alpha=0.5, power=2.0, sigma2_h=1.0, sigma2_w=0.5)
        cfg = DiscoveryConfig(p=0.7, tau2=1.0)
        stats = estimate_q1_q2(params, cfg, draws=200_000, seed=4)
        expected = 1.0 - math.exp(-1.0 / (2.0 + 0.5))
        lo, hi = stats.q1_interval
        assert lo <= expected <= hi

    def test_mid_config_matches_mixtures(self):
        params = params_for_snr(ell=100, alpha=0.1, snr=1e-2)
        cfg = DiscoveryConfig(p=1.0 / 11.0, tau2=1.0)
        draws = 200_000
        stats = estimate_q1_q2(params, cfg, draws=draws, seed=11)
        for est, truth in ((stats.q1_est, q1_exact(params, cfg)), (stats.q2_est, q2_exact(params, cfg))):
            se = math.sqrt(truth * (1.0 - truth) / draws)
            assert abs(est - truth) <= 4.0 * se

    def test_interval_shrinks_like_root_two(self):
        params = params_for_snr(ell=50, alpha=0.1, snr=1e-2)
        cfg = DiscoveryConfig(tau2=1.0)
        w = []
        for draws in (50_000, 100_000):
            stats = estimate_q1_q2(params, cfg, draws=draws, seed=8)
            lo, hi = stats.q1_interval
            w.append(hi - lo)
        ratio = w[1] / w[0]
        assert abs(ratio - 1.0 / math.sqrt(2.0)) < 0.2 / math.sqrt(2.0)

    def test_deterministic_across_worker_counts(self):
        params = params_for_snr(ell=30, alpha=0.2, snr=1e-2)
        cfg = DiscoveryConfig(tau2=0.8)
        a = estimate_q1_q2(params, cfg, draws=70_000, seed=13, workers=1)
        b = estimate_q1_q2(params, cfg, draws=70_000, seed=13, workers=3)
        assert a == b
