"""Sampling of one group-testing discovery round.

A round consists of a Bernoulli(p) signature matrix S (n uses x ell
users), an activity vector b ~ Bern(alpha)^ell, per-user Rayleigh fading
coefficients h_j ~ CN(0, sigma^2) held fixed over the round (block
fading), complex noise w_i ~ CN(0, sigma_w^2), the on-off superposition

    y = sqrt(P) * sum_j h_j * b_j * s_j + w

and the 1-bit energy decisions yt_i = 1{|y_i|^2 > tau^2}.

Reproducibility: every sampler derives its generator from
(master seed, purpose tag, stream index), so draws are bit-identical for
the same triple and independent across stream indices regardless of
execution order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError
from .params import SystemParams

# purpose tags for stream derivation
TAG_SIGNATURE = 0
TAG_ACTIVITY = 1
TAG_FADING = 2
TAG_NOISE = 3
TAG_CONDITIONAL = 4


class Seed(NamedTuple):
    """Master seed plus stream index; equal pairs reproduce equal draws."""

    master: int
    stream: int = 0


def rng_stream(seed: int | Seed, tag: int, stream: int | None = None) -> np.random.Generator:
    """Independent generator for (seed, purpose tag, stream index)."""
    if isinstance(seed, Seed):
        master, s = seed.master, seed.stream
    else:
        master, s = int(seed), 0
    if stream is not None:
        s = stream
    ss = np.random.SeedSequence(entropy=master, spawn_key=(tag, s))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class SignatureMatrix:
    """Binary n x ell matrix; column j is the signature of user j.

    p is the generation parameter, kept for bookkeeping only.
    """

    bits: np.ndarray
    p: float

    def __post_init__(self):
        if self.bits.ndim != 2 or min(self.bits.shape) < 1:
            raise ConfigError(f"signature matrix must be 2-D and non-empty, got shape {self.bits.shape}")

    @property
    def n(self) -> int:
        return self.bits.shape[0]

    @property
    def ell(self) -> int:
        return self.bits.shape[1]


def gen_signature_matrix(ell: int, n: int, p: float, seed: int | Seed) -> SignatureMatrix:
    """i.i.d. Bernoulli(p) signature matrix, deterministic per seed."""
    if ell < 1 or n < 1:
        raise ConfigError(f"need ell >= 1 and n >= 1, got ell={ell}, n={n}")
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"p must be in [0, 1], got {p}")
    rng = rng_stream(seed, TAG_SIGNATURE)
    # uint32 threshold compare is ~2x faster than drawing doubles at these sizes
    thresh = np.uint32(round(p * (1 << 32))) if p < 1.0 else None
    if thresh is None:
        bits = np.ones((n, ell), dtype=np.uint8)
    else:
        bits = (rng.integers(0, 1 << 32, size=(n, ell), dtype=np.uint32) < thresh).astype(np.uint8)
    return SignatureMatrix(bits=bits, p=p)


def sample_activity(ell: int, alpha: float, seed: int | Seed) -> np.ndarray:
    """Activity vector b with i.i.d. Bern(alpha) entries (uint8)."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must be in [0, 1], got {alpha}")
    rng = rng_stream(seed, TAG_ACTIVITY)
    return (rng.random(ell) < alpha).astype(np.uint8)


def _cn_samples(rng: np.random.Generator, size, variance: float) -> np.ndarray:
    """Circularly-symmetric complex Gaussian, total variance as given."""
    scale = np.sqrt(variance / 2.0)
    return rng.normal(scale=scale, size=size) + 1j * rng.normal(scale=scale, size=size)


def sample_fading(ell: int, params: SystemParams, seed: int | Seed, n: int | None = None) -> np.ndarray:
    """Per-user fading h_j ~ CN(0, sigma^2).

    Block fading by default: one coefficient per user for the whole round.
    With n set, an (n, ell) array is drawn instead (independent fading per
    channel use) for sensitivity studies.
    """
    rng = rng_stream(seed, TAG_FADING)
    size = ell if n is None else (n, ell)
    return _cn_samples(rng, size, params.sigma2_h)


def sample_received(
    S: SignatureMatrix,
    b: np.ndarray,
    params: SystemParams,
    seed: int | Seed,
    iid_fading: bool = False,
) -> np.ndarray:
    """Received vector y = sqrt(P) * sum_j h_j b_j s_j + w over one round.

    One h_j per user per round by default; iid_fading=True redraws fading
    independently for every channel use instead.
    """
    if S.ell != len(b):
        raise ConfigError(f"dimension mismatch: matrix has {S.ell} users, activity has {len(b)}")
    n = S.n
    rng_w = rng_stream(seed, TAG_NOISE)
    w = _cn_samples(rng_w, n, params.sigma2_w)
    active = np.flatnonzero(b)
    if active.size == 0:
        return w
    sqrtP = np.sqrt(params.power)
    cols = S.bits[:, active].astype(np.float64)
    if iid_fading:
        h = sample_fading(S.ell, params, seed, n=n)[:, active]
        return sqrtP * (cols * h).sum(axis=1) + w
    h = sample_fading(S.ell, params, seed)[active]
    return sqrtP * (cols @ h) + w


def energy_detect(y: np.ndarray, tau2: float) -> np.ndarray:
    """1-bit decisions yt_i = 1{|y_i|^2 > tau2} (strict, uint8).

    The tie |y|^2 == tau2 has probability zero under continuous noise; the
    strict inequality just makes the boundary deterministic.
    """
    if tau2 < 0.0:
        raise ConfigError(f"tau2 must be >= 0, got {tau2}")
    return (np.abs(y) ** 2 > tau2).astype(np.uint8)


def round_dump_rows(y: np.ndarray, tau2: float) -> list[list]:
    """Debug rows (channel_use, re_y, im_y, energy, outcome) for one round."""
    yt = energy_detect(y, tau2)
    return [
        [i, float(y[i].real), float(y[i].imag), float(abs(y[i]) ** 2), int(yt[i])]
        for i in range(len(y))
    ]


ROUND_DUMP_COLUMNS = ["channel_use", "re_y", "im_y", "energy", "outcome"]
