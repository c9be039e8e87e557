"""Monte Carlo estimation of discovery error rates and of q1/q2.

run_discovery_trials simulates the full pipeline (signature matrix,
activity, fading, noise, energy detection, noisy-COMP decoding) and
tallies misdetections and false positives per trial, both as union
events (at least one affected user in the round) and as summed per-user
counts.

estimate_q1_q2 samples the conditional test-energy laws at the physical
level with a designated user, matching the construction behind the
closed forms: for q1 the designated user is forced active and included
in the test, for q2 it is inactive; everything else (the other users'
activity, inclusion, fading, and the noise) is drawn fresh per draw.
Each draw is an independent channel use, so binomial/Wilson error bars
apply exactly.
"""

from __future__ import annotations

import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import resolve_q1_q2
from .channel import (
    Seed,
    TAG_CONDITIONAL,
    energy_detect,
    gen_signature_matrix,
    rng_stream,
    sample_activity,
    sample_received,
)
from .decoder import count_errors, ncomp_decode
from .errors import ConfigError
from .params import DiscoveryConfig, SystemParams
from .pool import resolve_workers

_CHUNK = 1 << 15  # draws per RNG chunk; fixed so results don't depend on workers


def wilson_interval(hits: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if n == 0:
        return (math.nan, math.nan)
    phat = hits / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


TRIAL_STATS_COLUMNS = [
    "trials", "md_union_count", "fp_union_count", "md_user_total", "fp_user_total",
    "p_md", "p_md_lo", "p_md_hi", "p_fp", "p_fp_lo", "p_fp_hi",
    "q1_draws", "q1_est", "q1_lo", "q1_hi", "q2_draws", "q2_est", "q2_lo", "q2_hi",
]


@dataclass(frozen=True)
class TrialStats:
    """Accumulated Monte Carlo tallies with 95% Wilson intervals."""

    trials: int = 0
    md_union_count: int = 0
    fp_union_count: int = 0
    md_user_total: int = 0
    fp_user_total: int = 0
    q1_hits: int = 0
    q1_draws: int = 0
    q2_hits: int = 0
    q2_draws: int = 0

    @property
    def p_md(self) -> float:
        """Union-event misdetection rate: trials with >= 1 missed user."""
        return self.md_union_count / self.trials if self.trials else math.nan

    @property
    def p_fp(self) -> float:
        return self.fp_union_count / self.trials if self.trials else math.nan

    @property
    def p_md_interval(self) -> tuple[float, float]:
        return wilson_interval(self.md_union_count, self.trials)

    @property
    def p_fp_interval(self) -> tuple[float, float]:
        return wilson_interval(self.fp_union_count, self.trials)

    @property
    def q1_est(self) -> float:
        return self.q1_hits / self.q1_draws if self.q1_draws else math.nan

    @property
    def q2_est(self) -> float:
        return self.q2_hits / self.q2_draws if self.q2_draws else math.nan

    @property
    def q1_interval(self) -> tuple[float, float]:
        return wilson_interval(self.q1_hits, self.q1_draws)

    @property
    def q2_interval(self) -> tuple[float, float]:
        return wilson_interval(self.q2_hits, self.q2_draws)

    def merged(self, other: "TrialStats") -> "TrialStats":
        return TrialStats(
            *(getattr(self, f) + getattr(other, f) for f in (
                "trials", "md_union_count", "fp_union_count", "md_user_total",
                "fp_user_total", "q1_hits", "q1_draws", "q2_hits", "q2_draws",
            ))
        )

    def to_row(self) -> list:
        md_lo, md_hi = self.p_md_interval
        fp_lo, fp_hi = self.p_fp_interval
        q1_lo, q1_hi = self.q1_interval
        q2_lo, q2_hi = self.q2_interval
        return [
            self.trials, self.md_union_count, self.fp_union_count,
            self.md_user_total, self.fp_user_total,
            self.p_md, md_lo, md_hi, self.p_fp, fp_lo, fp_hi,
            self.q1_draws, self.q1_est, q1_lo, q1_hi,
            self.q2_draws, self.q2_est, q2_lo, q2_hi,
        ]


def _one_trial(
    t: int,
    params: SystemParams,
    cfg: DiscoveryConfig,
    seed: int,
    q1_rule: float,
    fixed_matrix,
    iid_fading: bool,
) -> TrialStats:
    tau2 = cfg.require_tau2()
    S = fixed_matrix if fixed_matrix is not None else gen_signature_matrix(
        params.ell, cfg.require_n(), cfg.resolved_p(params), Seed(seed, t)
    )
    b = sample_activity(params.ell, params.alpha, Seed(seed, t))
    y = sample_received(S, b, params, Seed(seed, t), iid_fading=iid_fading)
    yt = energy_detect(y, tau2)
    b_hat = ncomp_decode(S, yt, q1_rule, cfg.delta_margin)
    tally = count_errors(b, b_hat)

    # conditional counters, designated user 0: its included tests feed the
    # q1 estimate when it is active; every test feeds q2 when it is inactive
    s0 = S.bits[:, 0].astype(bool)
    if b[0]:
        q1_draws = int(np.count_nonzero(s0))
        q1_hits = q1_draws - int(yt[s0].sum())
        q2_hits = q2_draws = 0
    else:
        q1_hits = q1_draws = 0
        q2_draws = S.n
        q2_hits = int(yt.sum())
    return TrialStats(
        trials=1,
        md_union_count=int(tally.md_any),
        fp_union_count=int(tally.fp_any),
        md_user_total=tally.md_count,
        fp_user_total=tally.fp_count,
        q1_hits=q1_hits,
        q1_draws=q1_draws,
        q2_hits=q2_hits,
        q2_draws=q2_draws,
    )


def run_discovery_trials(
    params: SystemParams,
    cfg: DiscoveryConfig,
    trials: int,
    seed: int,
    redraw_matrix: bool = True,
    q1_override: float | None = None,
    iid_fading: bool = False,
    workers: int | None = None,
    progress: bool = False,
) -> TrialStats:
    """Repeated independent discovery rounds, decoded with the q1 of
    cfg.q1_mode (or q1_override when given).

    The signature matrix is redrawn every trial by default, matching the
    probabilistic design; redraw_matrix=False freezes the trial-0 draw.
    Trial t uses RNG streams (seed, tag, t), so results are independent
    of execution order and worker count.
    """
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    q1_rule = q1_override if q1_override is not None else resolve_q1_q2(params, cfg)[0]
    fixed = None
    if not redraw_matrix:
        fixed = gen_signature_matrix(
            params.ell, cfg.require_n(), cfg.resolved_p(params), Seed(seed, 0)
        )

    total = TrialStats()
    step = max(1, trials // 20)
    nworkers = resolve_workers(workers)
    with ThreadPoolExecutor(max_workers=nworkers) as pool:
        futures = [
            pool.submit(_one_trial, t, params, cfg, seed, q1_rule, fixed, iid_fading)
            for t in range(trials)
        ]
        for done, fut in enumerate(futures, start=1):
            total = total.merged(fut.result())
            if progress and (done % step == 0 or done == trials):
                print(f"[trials] {done}/{trials}", file=sys.stderr)
    return total


def _conditional_chunk(
    params: SystemParams, p: float, tau2: float, seed: int, chunk_idx: int, m: int
) -> tuple[int, int]:
    """One chunk of m designated-user draws for each of q1 and q2.

    Draws the full physical model: per-interferer activity and inclusion
    bits, per-user fading, and fresh noise for every draw (one channel
    use per draw, so block fading plays no role here).
    """
    rng = rng_stream(seed, TAG_CONDITIONAL, chunk_idx)
    ell = params.ell
    sqrtP = math.sqrt(params.power)
    scale_h = math.sqrt(params.sigma2_h / 2.0)
    scale_w = math.sqrt(params.sigma2_w / 2.0)

    def interference(size):
        active = rng.random((size, ell - 1)) < params.alpha
        included = rng.random((size, ell - 1)) < p
        mask = active & included
        h = rng.normal(scale=scale_h, size=(size, ell - 1)) + 1j * rng.normal(
            scale=scale_h, size=(size, ell - 1)
        )
        return (mask * h).sum(axis=1)

    # q1: designated user active and included in the test
    z = interference(m)
    h0 = rng.normal(scale=scale_h, size=m) + 1j * rng.normal(scale=scale_h, size=m)
    w = rng.normal(scale=scale_w, size=m) + 1j * rng.normal(scale=scale_w, size=m)
    e1 = np.abs(sqrtP * (h0 + z) + w) ** 2
    q1_hits = int(np.count_nonzero(~(e1 > tau2)))

    # q2: designated user inactive; the test sees only the others
    z = interference(m)
    w = rng.normal(scale=scale_w, size=m) + 1j * rng.normal(scale=scale_w, size=m)
    e2 = np.abs(sqrtP * z + w) ** 2
    q2_hits = int(np.count_nonzero(e2 > tau2))
    return q1_hits, q2_hits


def estimate_q1_q2(
    params: SystemParams,
    cfg: DiscoveryConfig,
    draws: int,
    seed: int,
    workers: int | None = None,
) -> TrialStats:
    """Monte Carlo estimates of q1 and q2 from `draws` conditional draws
    each, converging to the exact mixture values q1_exact / q2_exact."""
    if draws < 1:
        raise ConfigError(f"draws must be >= 1, got {draws}")
    tau2 = cfg.require_tau2()
    p = cfg.resolved_p(params)
    sizes = [_CHUNK] * (draws // _CHUNK)
    if draws % _CHUNK:
        sizes.append(draws % _CHUNK)

    q1_hits = q2_hits = 0
    nworkers = resolve_workers(workers)
    with ThreadPoolExecutor(max_workers=nworkers) as pool:
        futures = [
            pool.submit(_conditional_chunk, params, p, tau2, seed, c, m)
            for c, m in enumerate(sizes)
        ]
        for fut in futures:
            h1, h2 = fut.result()
            q1_hits += h1
            q2_hits += h2
    return TrialStats(q1_hits=q1_hits, q1_draws=draws, q2_hits=q2_hits, q2_draws=draws)
