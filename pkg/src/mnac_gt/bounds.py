"""Closed-form error probabilities and channel-use requirements for
noisy-COMP group-testing discovery.

Conditioned on the number Q of interfering active users included in a
test, the received amplitude is complex Gaussian, so the test energy is
exponential. With Q ~ Binomial(ell-1, p*alpha):

    q1 = 1 - sum_g P(Q=g) * exp(-tau2 / (sigma^2*P*(1+g) + sigma_w^2))
    q2 =     sum_g P(Q=g) * exp(-tau2 / (sigma^2*P*g     + sigma_w^2))

(q1: a test containing a given active user reads negative; q2: a test
reads positive given a designated user is inactive.) Jensen's inequality
gives the closed bounds, valid while tau2 <= 2*(sigma^2*P + sigma_w^2):

    q1 >= q1_lb = 1 - exp(-(tau2/sigma_w^2) / ((p*alpha*(ell-1)+1)*rho + 1))
    q2 <= q2_ub = 1 - q1_lb

On top of these sit the misdetection / false-positive union bounds, the
beta factors needed to push each below ell**(-delta_exp), the resulting
channel-use requirement n_gt and the fractional gap G over the
identification-cost lower bound. All logs are natural; the ln(2) factor
in the beta1 formula is kept exactly as printed in its source, and the
numerically inverted beta1_solved is reported alongside so the slack
between the two is visible rather than hidden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.stats import binom

from .capacity import DEFAULT_CAPACITY, CapacityFn, binary_entropy_nats, min_user_id_cost_lb
from .errors import ConfigError, NumericalFailure, ValidityError
from .params import DiscoveryConfig, ErrorTarget, SystemParams

# truncation of the Binomial(ell-1, p*alpha) mixture: every neglected term
# of the mixture lies in [0, 1], so the absolute error is below the
# neglected tail mass
_TAIL_MASS = 1e-13
_ONE_MINUS_E2 = -math.expm1(-2.0)  # 1 - e^{-2}


def _interference_weights(params: SystemParams, cfg: DiscoveryConfig) -> tuple[np.ndarray, np.ndarray]:
    """Truncated pmf of the interfering-user count Q ~ Bin(ell-1, p*alpha)."""
    m = params.ell - 1
    q = cfg.resolved_p(params) * params.alpha
    if m == 0 or q == 0.0:
        return np.array([0]), np.array([1.0])
    g_max = m if q >= 1.0 else min(m, int(binom.isf(_TAIL_MASS, m, q)) + 1)
    g = np.arange(0, g_max + 1)
    w = np.exp(binom.logpmf(g, m, q))
    return g, w


def q1_exact(params: SystemParams, cfg: DiscoveryConfig) -> float:
    """Probability that a test containing a designated active user reads
    negative, by exact mixture over the interferer count."""
    tau2 = cfg.require_tau2()
    g, w = _interference_weights(params, cfg)
    var = params.sigma2_h * params.power * (1.0 + g) + params.sigma2_w
    # clip away float accumulation noise; a probability by construction
    return float(min(max(1.0 - np.sum(w * np.exp(-tau2 / var)), 0.0), 1.0))


def q2_exact(params: SystemParams, cfg: DiscoveryConfig) -> float:
    """Probability that a test reads positive given a designated user is
    inactive (the other ell-1 users interfere as usual)."""
    tau2 = cfg.require_tau2()
    g, w = _interference_weights(params, cfg)
    var = params.sigma2_h * params.power * g + params.sigma2_w
    return float(min(max(np.sum(w * np.exp(-tau2 / var)), 0.0), 1.0))


def jensen_tau2_max(params: SystemParams) -> float:
    """Largest threshold for which the Jensen bounds are guaranteed:
    tau2 <= 2*(sigma^2*P + sigma_w^2)."""
    return 2.0 * (params.sigma2_h * params.power + params.sigma2_w)


def _jensen_exponent(params: SystemParams, cfg: DiscoveryConfig) -> float:
    tau2 = cfg.require_tau2()
    if tau2 > jensen_tau2_max(params):
        raise ValidityError(
            f"tau2={tau2!r} violates the convexity condition "
            f"tau2 <= 2*(sigma^2*P + sigma_w^2) = {jensen_tau2_max(params)!r}"
        )
    p = cfg.resolved_p(params)
    return (tau2 / params.sigma2_w) / ((p * params.alpha * (params.ell - 1) + 1.0) * params.rho + 1.0)


def q1_lower_bound(params: SystemParams, cfg: DiscoveryConfig) -> float:
    """Jensen lower bound on q1 (valid while tau2 <= 2*(sigma^2*P + sigma_w^2))."""
    return -math.expm1(-_jensen_exponent(params, cfg))


def q2_upper_bound(params: SystemParams, cfg: DiscoveryConfig) -> float:
    """Jensen upper bound on q2; shares its expression with q1_lower_bound
    so that q2_ub == 1 - q1_lb holds exactly in floating point."""
    return 1.0 - q1_lower_bound(params, cfg)


def resolve_q1_q2(params: SystemParams, cfg: DiscoveryConfig) -> tuple[float, float]:
    """(q1, q2) as consumed by the decision rule and the bound formulas,
    per cfg.q1_mode: the bounded forms by default, the exact mixtures on
    request."""
    if cfg.q1_mode == "exact":
        return q1_exact(params, cfg), q2_exact(params, cfg)
    q1 = q1_lower_bound(params, cfg)
    return q1, 1.0 - q1


def bernoulli_kl(a: float, b: float) -> float:
    """KL divergence D(Bern(a) || Bern(b)) in nats."""
    if not 0.0 <= a <= 1.0 or not 0.0 < b < 1.0:
        raise ConfigError(f"need a in [0,1] and b in (0,1), got a={a}, b={b}")
    d = 0.0
    if a > 0.0:
        d += a * math.log(a / b)
    if a < 1.0:
        d += (1.0 - a) * math.log((1.0 - a) / (1.0 - b))
    return d


class PmdBounds(NamedTuple):
    """Misdetection union bound; the product form is the headline value,
    the weaker exponential form is kept for the beta1 inversion."""

    product: float
    exponential: float


def pmd_upper_bound(params: SystemParams, cfg: DiscoveryConfig, n: float | None = None) -> PmdBounds:
    """Upper bounds on P(any active user is misdetected) over n tests:

        product:      alpha*ell * (1 - p + p*exp(-2*(q1*Delta)^2))^n
        exponential:  alpha*ell * exp(-n * p * (1 - e^-2) * (q1*Delta)^2)

    q1 per cfg.q1_mode. Both can exceed 1 and are reported raw.
    """
    if n is None:
        n = cfg.require_n()
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    q1, _ = resolve_q1_q2(params, cfg)
    p = cfg.resolved_p(params)
    x2 = (q1 * cfg.delta_margin) ** 2
    lead = params.alpha * params.ell
    product = lead * math.exp(n * math.log1p(p * math.expm1(-2.0 * x2)))
    exponential = lead * math.exp(-n * p * _ONE_MINUS_E2 * x2)
    return PmdBounds(product=product, exponential=exponential)


def false_positive_eta(params: SystemParams, cfg: DiscoveryConfig) -> float:
    """Per-test factor eta = exp(-D(q2 - q1*Delta || q2) / sqrt(2*pi*q1*q2))."""
    q1, q2 = resolve_q1_q2(params, cfg)
    if q1 * q2 == 0.0:
        raise ValidityError(f"q1*q2 must be positive, got q1={q1}, q2={q2}")
    a = q2 - q1 * cfg.delta_margin
    if a <= 0.0:
        raise ValidityError(
            f"q2 - q1*Delta = {a!r} <= 0: no room below q2 for the divergence term"
        )
    d = bernoulli_kl(a, q2)
    return math.exp(-d / math.sqrt(2.0 * math.pi * q1 * q2))


def pfp_upper_bound(params: SystemParams, cfg: DiscoveryConfig, n: float | None = None) -> float:
    """Upper bound on P(any inactive user is declared active) over n tests:

        (1 - alpha)*ell * (1 - (1 - p + p*eta)^n)

    Can exceed 1 and is reported raw.
    """
    if n is None:
        n = cfg.require_n()
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    eta = false_positive_eta(params, cfg)
    p = cfg.resolved_p(params)
    return (1.0 - params.alpha) * params.ell * -math.expm1(n * math.log1p(-p * (1.0 - eta)))


@dataclass(frozen=True)
class Beta1Result:
    """Misdetection beta factor: the printed closed form (with its ln(2)
    factor kept verbatim) and the numerically inverted value that makes
    the exponential-form bound hit ell**(-delta_exp) exactly."""

    formula: float
    solved: float
    feasible: bool


def beta1_min(params: SystemParams, cfg: DiscoveryConfig, target: ErrorTarget) -> Beta1Result:
    """Smallest beta1 so that n = beta1 * H2(alpha)/alpha tests push the
    misdetection bound below ell**(-delta_exp):

        formula = ln(2) / (p*(1-e^-2)*(q1*Delta)^2)
                  * ((1+delta_exp)*ln(ell)/ln(1/alpha) - 1)

    A non-positive formula value is reported as infeasible-by-formula;
    the bisection-solved value is computed either way.
    """
    if not 0.0 < params.alpha < 1.0:
        raise ConfigError(f"alpha must be strictly inside (0, 1), got {params.alpha}")
    q1, _ = resolve_q1_q2(params, cfg)
    x2 = (q1 * cfg.delta_margin) ** 2
    if x2 == 0.0:
        raise ValidityError("q1*Delta = 0 leaves the misdetection bound without a margin")
    p = cfg.resolved_p(params)
    denom = p * _ONE_MINUS_E2 * x2
    factor = (1.0 + target.delta_exp) * math.log(params.ell) / math.log(1.0 / params.alpha) - 1.0
    formula = math.log(2.0) / denom * factor

    # invert alpha*ell*exp(-beta * (H2/alpha) * p * (1-e^-2) * (q1*Delta)^2)
    # = ell^-delta_exp; monotone in beta, bisected to 1e-9 relative
    goal = params.ell ** (-target.delta_exp)
    h_over_a = binary_entropy_nats(params.alpha) / params.alpha

    def expo(beta: float) -> float:
        return pmd_upper_bound(params, cfg, n=beta * h_over_a).exponential

    if expo(0.0) <= goal:
        solved = 0.0
    else:
        lo, hi = 0.0, 1.0
        while expo(hi) > goal:
            lo, hi = hi, hi * 2.0
            if hi > 1e30:
                raise NumericalFailure("beta1 bisection failed to bracket the target")
        while hi - lo > 1e-9 * hi:
            mid = 0.5 * (lo + hi)
            if expo(mid) > goal:
                lo = mid
            else:
                hi = mid
        solved = 0.5 * (lo + hi)
    return Beta1Result(formula=formula, solved=solved, feasible=formula > 0.0)


def beta2_min(params: SystemParams, cfg: DiscoveryConfig, target: ErrorTarget) -> float:
    """Beta factor of the false-positive requirement:

        1/(p*(1-eta)) * 1/ln(1/alpha) * ln(A / (A - 1)),
        A = (1-alpha) * ell^(delta_exp + 1)

    requiring A > 1 and eta < 1. Logs are natural throughout.
    """
    if not 0.0 < params.alpha < 1.0:
        raise ConfigError(f"alpha must be strictly inside (0, 1), got {params.alpha}")
    a_big = (1.0 - params.alpha) * params.ell ** (target.delta_exp + 1.0)
    if a_big <= 1.0:
        raise ValidityError(
            f"(1-alpha)*ell^(1+delta_exp) = {a_big!r} <= 1: the false-positive "
            "target is unreachable at this size"
        )
    eta = false_positive_eta(params, cfg)
    if eta >= 1.0:
        raise ValidityError("eta >= 1: the false-positive bound has no margin")
    p = cfg.resolved_p(params)
    return -math.log1p(-1.0 / a_big) / (p * (1.0 - eta) * math.log(1.0 / params.alpha))


def n_gt_from_betas(beta1: float, beta2: float, ell: int, alpha: float) -> float:
    """Channel uses the discovery scheme needs: max(beta1, beta2) * ell * H2(alpha)."""
    return max(beta1, beta2) * ell * binary_entropy_nats(alpha)


def n_gt(params: SystemParams, cfg: DiscoveryConfig, target: ErrorTarget) -> float:
    """Channel-use requirement with the beta formulas of this configuration."""
    b1 = beta1_min(params, cfg, target).formula
    b2 = beta2_min(params, cfg, target)
    return n_gt_from_betas(b1, b2, params.ell, params.alpha)


def gap_from_betas(beta_max: float, k: float, c: float) -> float:
    """Fractional excess channel uses over the identification-cost bound."""
    return beta_max * k * c - 1.0


def gap_G(
    params: SystemParams,
    cfg: DiscoveryConfig,
    target: ErrorTarget,
    cap: CapacityFn = DEFAULT_CAPACITY,
) -> float:
    """Gap G = max(beta1, beta2) * k * C(rho) - 1, identically
    (n_gt - n0)/n0 with n0 the identification-cost lower bound."""
    b1 = beta1_min(params, cfg, target).formula
    b2 = beta2_min(params, cfg, target)
    return gap_from_betas(max(b1, b2), params.k, cap(params.rho))


BOUND_REPORT_COLUMNS = [
    "ell", "alpha", "k", "rho", "n", "p", "delta", "tau2",
    "q1_exact", "q1_lb", "q2_exact", "q2_ub", "pmd_ub", "pfp_ub",
    "beta1", "beta2", "n_gt", "n0", "gap_g",
]


@dataclass(frozen=True)
class BoundReport:
    """Every closed-form quantity of one configuration, one CSV row.

    pmd_ub / pfp_ub are union bounds and may exceed 1; they are reported
    raw. beta1 is the printed formula value; beta1_solved and the
    exponential-form misdetection bound ride along outside the CSV row.
    """

    ell: int
    alpha: float
    k: float
    rho: float
    n: int
    p: float
    delta: float
    tau2: float
    q1_exact: float
    q1_lb: float
    q2_exact: float
    q2_ub: float
    pmd_ub: float
    pfp_ub: float
    beta1: float
    beta2: float
    n_gt: float
    n0: float
    gap_g: float
    pmd_ub_exponential: float = float("nan")
    beta1_solved: float = float("nan")

    def to_row(self) -> list:
        return [getattr(self, c) for c in BOUND_REPORT_COLUMNS]


def bound_report(
    params: SystemParams,
    cfg: DiscoveryConfig,
    target: ErrorTarget,
    cap: CapacityFn = DEFAULT_CAPACITY,
) -> BoundReport:
    """Assemble the full report at cfg.tau2; when cfg.n is unset the
    bounds are evaluated at n = ceil(n_gt)."""
    b1 = beta1_min(params, cfg, target)
    b2 = beta2_min(params, cfg, target)
    ngt = n_gt_from_betas(b1.formula, b2, params.ell, params.alpha)
    n0 = min_user_id_cost_lb(params, cap)
    gap = gap_from_betas(max(b1.formula, b2), params.k, cap(params.rho))
    n = cfg.n if cfg.n is not None else max(1, math.ceil(ngt))
    pmd = pmd_upper_bound(params, cfg, n=n)
    pfp = pfp_upper_bound(params, cfg, n=n)
    return BoundReport(
        ell=params.ell,
        alpha=params.alpha,
        k=params.k,
        rho=params.rho,
        n=n,
        p=cfg.resolved_p(params),
        delta=cfg.delta_margin,
        tau2=cfg.require_tau2(),
        q1_exact=q1_exact(params, cfg),
        q1_lb=q1_lower_bound(params, cfg),
        q2_exact=q2_exact(params, cfg),
        q2_ub=q2_upper_bound(params, cfg),
        pmd_ub=pmd.product,
        pfp_ub=pfp,
        beta1=b1.formula,
        beta2=b2,
        n_gt=ngt,
        n0=n0,
        gap_g=gap,
        pmd_ub_exponential=pmd.exponential,
        beta1_solved=b1.solved,
    )


def optimize_threshold(
    params: SystemParams,
    cfg: DiscoveryConfig,
    target: ErrorTarget,
    grid_points: int = 200,
    cap: CapacityFn = DEFAULT_CAPACITY,
) -> tuple[float, BoundReport]:
    """Exhaustive threshold search minimizing n_gt.

    Evaluates a uniform grid of tau2 over (0, 2*(sigma^2*P + sigma_w^2)],
    skipping grid points where a bound formula leaves its domain; ties go
    to the smaller threshold. Raises NumericalFailure when no grid point
    is feasible.
    """
    if grid_points < 2:
        raise ConfigError(f"grid_points must be >= 2, got {grid_points}")
    tau2_hi = jensen_tau2_max(params)
    best_tau2 = None
    best_ngt = math.inf
    for i in range(1, grid_points + 1):
        tau2 = tau2_hi * i / grid_points
        try:
            ngt = n_gt(params, cfg.with_tau2(tau2), target)
        except ValidityError:
            continue
        if ngt < best_ngt:
            best_ngt, best_tau2 = ngt, tau2
    if best_tau2 is None:
        raise NumericalFailure(
            f"threshold search found no feasible point on {grid_points} grid "
            f"points over (0, {tau2_hi!r}]"
        )
    return best_tau2, bound_report(params, cfg.with_tau2(best_tau2), target, cap)
