"""Binary entropy and the low-SNR non-coherent Rayleigh capacity.

The single-user capacity model is the two-mass-point (on-off) input
approximation valid for SNR up to 1e-2:

    C(rho) = rho - rho*ln(1 + u)/u - pi*rho*csc(pi/u) * (rho/(u + u^2))^(1/u) / (1 + u)

with u = x1^2 > 1 the root of the stationarity condition

    u - (1 + u)*ln(1 + u)
      - pi*(rho/(u + u^2))^(1/u) * csc(pi/u) * [1 + u - pi*cot(pi/u) + ln(rho/(u + u^2))] = 0.

Everything here is in nats; conversion to bits happens only at display
time. All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, NumericalFailure, ValidityError
from .params import SystemParams

log = logging.getLogger(__name__)

# root search window for u = x1^2 and convergence targets
_U_MIN = 1.0 + 1e-6
_U_MAX = 1e6
_SCAN_POINTS = 4000
_BISECT_WIDTH = 1e-12
_RESIDUAL_TOL = 1e-10


def binary_entropy_nats(alpha: float) -> float:
    """Binary entropy H2(alpha) = -a*ln(a) - (1-a)*ln(1-a) in nats.

    Uses the convention 0*ln(0) = 0, so H2(0) = H2(1) = 0.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must be in [0, 1], got {alpha}")
    h = 0.0
    if alpha > 0.0:
        h -= alpha * math.log(alpha)
    if alpha < 1.0:
        h -= (1.0 - alpha) * math.log(1.0 - alpha)
    return h


def onoff_residual(u, rho):
    """Residual of the on-off input stationarity condition at u = x1^2.

    The power term (rho/(u + u^2))^(1/u) is evaluated in log space; it
    underflows otherwise for small rho and large u. Vectorized in u.
    """
    u = np.asarray(u, dtype=float)
    a = np.exp((np.log(rho) - np.log(u + u * u)) / u)
    s = np.sin(np.pi / u)
    bracket = 1.0 + u - np.pi * (np.cos(np.pi / u) / s) + np.log(rho / (u + u * u))
    return u - (1.0 + u) * np.log1p(u) - np.pi * a / s * bracket


def _capacity_at(u: float, rho: float) -> float:
    a = math.exp((math.log(rho) - math.log(u + u * u)) / u)
    return (
        rho
        - rho * math.log1p(u) / u
        - math.pi * rho * a / (math.sin(math.pi / u) * (1.0 + u))
    )


def solve_x1(rho: float) -> float:
    """Solve the on-off stationarity condition for x1 at the given SNR.

    Scans u = x1^2 on a log grid over (1 + 1e-6, 1e6] for sign changes of
    the residual, then bisects each bracket to an interval width of 1e-12.
    Restricting to u > 1 keeps pi/u inside (0, pi), away from the csc/cot
    poles. If several roots exist the one maximizing the capacity is
    returned and a warning is logged; a uniqueness proof is not available.
    """
    if rho <= 0.0:
        raise ConfigError(f"rho must be > 0, got {rho}")
    grid = np.logspace(math.log10(_U_MIN), math.log10(_U_MAX), _SCAN_POINTS)
    vals = onoff_residual(grid, rho)
    sign = np.sign(vals)
    idx = np.flatnonzero((sign[:-1] != sign[1:]) & np.isfinite(vals[:-1]) & np.isfinite(vals[1:]))
    if idx.size == 0:
        raise NumericalFailure(
            f"no sign change of the on-off residual for rho={rho!r} on "
            f"u in ({_U_MIN}, {_U_MAX}]"
        )

    roots = []
    for i in idx:
        a, b = float(grid[i]), float(grid[i + 1])
        fa = float(vals[i])
        while b - a > _BISECT_WIDTH:
            m = 0.5 * (a + b)
            fm = float(onoff_residual(m, rho))
            if fm == 0.0:
                a = b = m
                break
            if (fa < 0.0) == (fm < 0.0):
                a, fa = m, fm
            else:
                b = m
        roots.append(0.5 * (a + b))

    if len(roots) > 1:
        log.warning(
            "on-off stationarity condition has %d roots at rho=%g (brackets %s); "
            "keeping the capacity-maximizing one",
            len(roots), rho, [f"{r:.6g}" for r in roots],
        )
    u = max(roots, key=lambda r: _capacity_at(r, rho))
    resid = float(onoff_residual(u, rho))
    if abs(resid) >= _RESIDUAL_TOL:
        raise NumericalFailure(
            f"root refinement stalled at rho={rho!r}: residual {resid:.3e}"
        )
    return math.sqrt(u)


def _low_snr_capacity(rho: float) -> float:
    x1 = solve_x1(rho)
    return _capacity_at(x1 * x1, rho)


@dataclass(frozen=True)
class CapacityFn:
    """Pluggable single-user capacity model rho -> nats per channel use.

    Calls outside the declared validity range raise ValidityError unless
    allow_out_of_range is set, so a general-SNR model can be swapped in
    without touching any caller.
    """

    fn: Callable[[float], float]
    validity: tuple[float, float] = (0.0, 1e-2)
    name: str = "low_snr_onoff"
    allow_out_of_range: bool = False

    def __call__(self, rho: float) -> float:
        lo, hi = self.validity
        if not (lo < rho <= hi) and not self.allow_out_of_range:
            raise ValidityError(
                f"rho={rho!r} outside validity range ({lo}, {hi}] of capacity "
                f"model {self.name!r}; pass allow_out_of_range=True to override"
            )
        return self.fn(rho)


DEFAULT_CAPACITY = CapacityFn(fn=_low_snr_capacity)


def c_su(rho: float, cap: CapacityFn = DEFAULT_CAPACITY) -> float:
    """Single-user non-coherent capacity at SNR rho, in nats per use."""
    return cap(rho)


def capacity_upper_bound(
    n: float, params: SystemParams, cap: CapacityFn = DEFAULT_CAPACITY
) -> float:
    """Upper bound on the per-user message length ln(M) over n channel uses:

        ln(M) <= n * C(rho) - H2(alpha)/alpha      [nats]

    The raw (possibly negative) value is returned; clamping at zero for
    display is the caller's business.
    """
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    if not 0.0 < params.alpha < 1.0:
        raise ConfigError(
            f"alpha must be strictly inside (0, 1), got {params.alpha}"
        )
    return n * cap(params.rho) - binary_entropy_nats(params.alpha) / params.alpha


def min_user_id_cost_lb(params: SystemParams, cap: CapacityFn = DEFAULT_CAPACITY) -> float:
    """Lower bound on the channel uses needed to identify the active users:

        n(ell) >= H2(alpha) / (alpha * C(rho))

    This is exactly the zero crossing of capacity_upper_bound in n.
    """
    if not 0.0 < params.alpha < 1.0:
        raise ConfigError(
            f"alpha must be strictly inside (0, 1), got {params.alpha}"
        )
    return binary_entropy_nats(params.alpha) / (params.alpha * cap(params.rho))
