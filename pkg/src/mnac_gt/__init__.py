"""Capacity bounds and group-testing active-device discovery for the
Rayleigh-fading many-access channel."""

from .bounds import (
    Beta1Result,
    BoundReport,
    PmdBounds,
    bernoulli_kl,
    beta1_min,
    beta2_min,
    bound_report,
    gap_G,
    n_gt,
    optimize_threshold,
    pfp_upper_bound,
    pmd_upper_bound,
    q1_exact,
    q1_lower_bound,
    q2_exact,
    q2_upper_bound,
)
from .capacity import (
    DEFAULT_CAPACITY,
    CapacityFn,
    binary_entropy_nats,
    c_su,
    capacity_upper_bound,
    min_user_id_cost_lb,
    solve_x1,
)
from .channel import (
    Seed,
    SignatureMatrix,
    energy_detect,
    gen_signature_matrix,
    sample_activity,
    sample_received,
)
from .decoder import ErrorTally, count_errors, hidden_users, ncomp_decode
from .errors import ConfigError, NumericalFailure, ValidityError
from .montecarlo import TrialStats, estimate_q1_q2, run_discovery_trials
from .params import DiscoveryConfig, ErrorTarget, SystemParams, params_for_snr

__version__ = "0.1.0"
