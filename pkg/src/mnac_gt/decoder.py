"""Noisy-COMP decision rule and error accounting.

A user is declared active when the fraction of its tests that came back
positive is at least 1 - q1*(1 + Delta), where q1 is the design value of
the probability that a test containing an active user still reads
negative. With q1 = 0 this is exact COMP (every test positive).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .channel import SignatureMatrix
from .errors import ConfigError


@dataclass(frozen=True)
class ErrorTally:
    """Per-round error counts of a decoded activity vector."""

    md_count: int
    fp_count: int

    @property
    def md_any(self) -> bool:
        return self.md_count > 0

    @property
    def fp_any(self) -> bool:
        return self.fp_count > 0


def ncomp_decode(
    S: SignatureMatrix | np.ndarray,
    y_tilde: np.ndarray,
    q1: float,
    delta: float,
) -> np.ndarray:
    """Decode an activity estimate from 1-bit test outcomes.

    For user j with N_j = sum_i s_j(i) included tests, of which
    S_j = sum_i s_j(i)*yt_i were positive, declare active iff

        S_j / N_j >= 1 - q1*(1 + delta)         (non-strict, as printed)

    Users with N_j = 0 were never tested and are declared inactive: there
    is no evidence of activity, and the rule stays total.
    """
    if not 0.0 <= q1 <= 1.0:
        raise ConfigError(f"q1 must be in [0, 1], got {q1}")
    if delta < 0.0:
        raise ConfigError(f"delta must be >= 0, got {delta}")
    bits = S.bits if isinstance(S, SignatureMatrix) else np.asarray(S)
    if bits.shape[0] != len(y_tilde):
        raise ConfigError(
            f"dimension mismatch: matrix has {bits.shape[0]} tests, outcomes {len(y_tilde)}"
        )
    thresh = 1.0 - q1 * (1.0 + delta)
    if thresh < 0.0:
        warnings.warn(
            f"q1*(1+delta) = {q1 * (1.0 + delta):.4g} > 1: the activity rule "
            "degenerates to 'every tested user is active'",
            RuntimeWarning,
            stacklevel=2,
        )
    n_j = bits.sum(axis=0, dtype=np.int64)
    pos = np.asarray(y_tilde, dtype=bool)
    s_j = bits[pos, :].sum(axis=0, dtype=np.int64)
    # S_j >= thresh * N_j avoids the 0/0 division and keeps N_j = 0 inactive
    return ((s_j >= thresh * n_j) & (n_j > 0)).astype(np.uint8)


def count_errors(b: np.ndarray, b_hat: np.ndarray) -> ErrorTally:
    """Exact per-user comparison of truth b against estimate b_hat."""
    b = np.asarray(b, dtype=bool)
    b_hat = np.asarray(b_hat, dtype=bool)
    if b.shape != b_hat.shape:
        raise ConfigError(f"length mismatch: {b.shape} vs {b_hat.shape}")
    md = int(np.count_nonzero(b & ~b_hat))
    fp = int(np.count_nonzero(~b & b_hat))
    return ErrorTally(md_count=md, fp_count=fp)


def hidden_users(S: SignatureMatrix | np.ndarray, b: np.ndarray) -> np.ndarray:
    """Inactive users that noiseless COMP can never clear.

    A tested inactive user is hidden when every channel use that includes
    it also includes at least one active user, so all of its tests read
    positive under ideal (OR-channel) outcomes. Untested users (N_j = 0)
    are not hidden; the decoder declares them inactive.
    """
    bits = S.bits if isinstance(S, SignatureMatrix) else np.asarray(S)
    b = np.asarray(b, dtype=bool)
    test_has_active = (bits[:, b].sum(axis=1) > 0) if b.any() else np.zeros(bits.shape[0], dtype=bool)
    out = np.zeros(bits.shape[1], dtype=np.uint8)
    for j in range(bits.shape[1]):
        if b[j]:
            continue
        uses = bits[:, j].astype(bool)
        if uses.any() and test_has_active[uses].all():
            out[j] = 1
    return out
