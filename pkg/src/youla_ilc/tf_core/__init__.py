"""z-domain transfer-function algebra, analysis and simulation."""

from .io import format_tf, parse_tf, read_signal_csv, read_tf, write_signal_csv, write_tf
from .polynomial import DegenerateInputError, Polynomial, companion_matrix, poly_from_roots, poly_roots
from .simulation import (
    DifferenceEquation,
    Signal,
    apply_acausal,
    causal_factor,
    simulate,
    zero_phase_filter,
)
from .transfer import (
    DEFAULT_CANCEL_TOL,
    AlgebraicLoopError,
    ImproperSystemError,
    SampleTimeMismatch,
    StabilityReport,
    TransferFunction,
    feedback,
    freq_response,
    is_stable,
    minreal,
    nyquist,
    probe_frequencies,
    tf_add,
    tf_div,
    tf_inv,
    tf_mul,
    tf_sub,
)

__all__ = [
    "AlgebraicLoopError",
    "DEFAULT_CANCEL_TOL",
    "DegenerateInputError",
    "DifferenceEquation",
    "ImproperSystemError",
    "Polynomial",
    "SampleTimeMismatch",
    "Signal",
    "StabilityReport",
    "TransferFunction",
    "apply_acausal",
    "causal_factor",
    "companion_matrix",
    "feedback",
    "format_tf",
    "freq_response",
    "is_stable",
    "minreal",
    "nyquist",
    "parse_tf",
    "poly_from_roots",
    "poly_roots",
    "probe_frequencies",
    "read_signal_csv",
    "read_tf",
    "simulate",
    "tf_add",
    "tf_div",
    "tf_inv",
    "tf_mul",
    "tf_sub",
    "write_signal_csv",
    "write_tf",
    "zero_phase_filter",
]
