"""System and discovery-round parameter containers.

All quantities are linear (no dB anywhere in the library). The per-symbol
SNR is rho = P * sigma2_h / sigma2_w and the expected number of active
users is k = alpha * ell; both are derived, never stored independently.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import ConfigError

Q1_MODES = ("jensen_lb", "exact")


@dataclass(frozen=True)
class SystemParams:
    """Population and link parameters for one configuration.

    ell:       number of users in the system
    alpha:     per-user activity probability
    power:     per-user transmit power P (linear)
    sigma2_h:  Rayleigh fading variance sigma^2 (linear)
    sigma2_w:  complex noise variance sigma_w^2 (linear)
    """

    ell: int
    alpha: float
    power: float = 1.0
    sigma2_h: float = 1.0
    sigma2_w: float = 1.0

    def __post_init__(self):
        if self.ell < 1:
            raise ConfigError(f"ell must be >= 1, got {self.ell}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        for name in ("power", "sigma2_h", "sigma2_w"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")

    @property
    def rho(self) -> float:
        """Per-symbol SNR P * sigma^2 / sigma_w^2."""
        return self.power * self.sigma2_h / self.sigma2_w

    @property
    def k(self) -> float:
        """Expected number of active users alpha * ell."""
        return self.alpha * self.ell


def params_for_snr(ell: int, alpha: float, snr: float, sigma2_w: float = 1.0) -> SystemParams:
    """Build SystemParams hitting a target SNR with unit fading variance."""
    if snr <= 0.0:
        raise ConfigError(f"snr must be > 0, got {snr}")
    return SystemParams(ell=ell, alpha=alpha, power=snr * sigma2_w, sigma2_h=1.0, sigma2_w=sigma2_w)


@dataclass(frozen=True)
class DiscoveryConfig:
    """Design knobs of one group-testing discovery round.

    n:            number of channel uses (tests); None until chosen
    p:            per-entry signature inclusion probability; None means the
                  default 1/(k+1)
    delta_margin: decision-margin multiplier Delta of the noisy-COMP rule
    tau2:         energy-detector threshold (same units as sigma2_w); None
                  until chosen/optimized
    q1_mode:      which q1/q2 the bound formulas and the decoder consume:
                  "jensen_lb" (bounded forms, the default) or "exact"
    """

    n: int | None = None
    p: float | None = None
    delta_margin: float = 0.05
    tau2: float | None = None
    q1_mode: str = "jensen_lb"

    def __post_init__(self):
        if self.n is not None and self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.p is not None and not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"p must be in [0, 1], got {self.p}")
        if self.delta_margin < 0.0:
            raise ConfigError(f"delta_margin must be >= 0, got {self.delta_margin}")
        if self.tau2 is not None and self.tau2 < 0.0:
            raise ConfigError(f"tau2 must be >= 0, got {self.tau2}")
        if self.q1_mode not in Q1_MODES:
            raise ConfigError(f"q1_mode must be one of {Q1_MODES}, got {self.q1_mode!r}")

    def resolved_p(self, params: SystemParams) -> float:
        """Inclusion probability; defaults to 1/(k+1) for the given system."""
        return self.p if self.p is not None else 1.0 / (params.k + 1.0)

    def require_n(self) -> int:
        if self.n is None:
            raise ConfigError("this operation needs cfg.n to be set")
        return self.n

    def require_tau2(self) -> float:
        if self.tau2 is None:
            raise ConfigError("this operation needs cfg.tau2 to be set")
        return self.tau2

    def with_tau2(self, tau2: float) -> "DiscoveryConfig":
        return replace(self, tau2=tau2)

    def with_n(self, n: int) -> "DiscoveryConfig":
        return replace(self, n=n)


@dataclass(frozen=True)
class ErrorTarget:
    """Polynomial error target: misdetection/false-positive probability
    below ell**(-delta_exp)."""

    delta_exp: float = 1.0

    def __post_init__(self):
        if self.delta_exp <= 0.0:
            raise ConfigError(f"delta_exp must be > 0, got {self.delta_exp}")
