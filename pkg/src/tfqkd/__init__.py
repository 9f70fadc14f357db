"""Certified secret-key rates for twin-field QKD with discrete phase randomization.

Pipeline: closed-form photon statistics (`states`), an honest-channel
simulator producing the protocol observables (`channel`), semidefinite
programs bounding the two phase-error rates with independently verifiable
dual certificates (`sdp`, `bounds`), and key-rate assembly with intensity
optimization and loss sweeps (`keyrate`).  The `tfqkd` console script in
`cli` exposes the same pipeline as `rate`, `sweep` and `compare` commands.
"""

from .bounds import (
    DEFAULT_F,
    DEFAULT_N_CUT,
    INTENSITY_FLOOR,
    BoundComputation,
    PhaseErrorBounds,
    ProtocolConfig,
    bound_phase_errors,
    build_sdp_diff,
    build_sdp_same,
    eph_bound_infinite_M,
    information_leak,
)
from .channel import (
    ChannelParams,
    KeyModeStats,
    NoiseParams,
    ObservedStats,
    click_probabilities,
    exact_yield,
    key_mode_stats,
    observe,
    test_mode_gains,
)
from .keyrate import (
    INFINITE_PHASES,
    KeyRatePoint,
    key_rate,
    optimize_point,
    plob_bound,
    sweep,
)
from .sdp import (
    CertificateError,
    DualCertificate,
    GramSDP,
    SolveReport,
    problem_from_json,
    problem_to_json,
    solve,
    svec,
    unsvec,
    verify_dual,
)
from .states import (
    ModMWeights,
    ParityCoeffVectors,
    binary_entropy,
    fidelity,
    fidelity_complement,
    mod_m_weights,
    parity_coeffs,
    poisson_pmf,
)

__version__ = "0.1.0"

__all__ = [
    "BoundComputation",
    "CertificateError",
    "ChannelParams",
    "DEFAULT_F",
    "DEFAULT_N_CUT",
    "DualCertificate",
    "GramSDP",
    "INFINITE_PHASES",
    "INTENSITY_FLOOR",
    "KeyModeStats",
    "KeyRatePoint",
    "ModMWeights",
    "NoiseParams",
    "ObservedStats",
    "ParityCoeffVectors",
    "PhaseErrorBounds",
    "ProtocolConfig",
    "SolveReport",
    "binary_entropy",
    "bound_phase_errors",
    "build_sdp_diff",
    "build_sdp_same",
    "click_probabilities",
    "eph_bound_infinite_M",
    "exact_yield",
    "fidelity",
    "fidelity_complement",
    "information_leak",
    "key_mode_stats",
    "key_rate",
    "mod_m_weights",
    "observe",
    "optimize_point",
    "parity_coeffs",
    "plob_bound",
    "poisson_pmf",
    "problem_from_json",
    "problem_to_json",
    "solve",
    "svec",
    "sweep",
    "test_mode_gains",
    "unsvec",
    "verify_dual",
    "__version__",
]
