"""Fourier transforms of coin-tossing type measures.

The measure is the law of ``sum X_n 2^-n`` with independent bits
``P(X_n = 1) = (1 - phi(n)) / 2``.  The package evaluates its Fourier
transform with rigorous truncation bounds, checks the explicit decay
envelopes and the combinatorics behind them in exact arithmetic, and runs
empirical normality diagnostics on sampled points.
"""

from cointoss.errors import (
    CointossError,
    InvalidWeightSpec,
    PrecisionExhausted,
    PreconditionViolation,
    RangeViolation,
)
from cointoss.weights import (
    CaseTag,
    Family,
    WeightSpec,
    classify_ratio,
    eval_phi,
    parse_weight_spec,
    singularity_diagnostic,
)
from cointoss.transform import (
    TransformValue,
    factor,
    mu_hat,
    mu_hat_at_pow2,
    mu_hat_sq,
    parse_rational,
    reduce_argument,
)

__version__ = "0.1.0"

__all__ = [
    "CaseTag",
    "CointossError",
    "Family",
    "InvalidWeightSpec",
    "PrecisionExhausted",
    "PreconditionViolation",
    "RangeViolation",
    "TransformValue",
    "WeightSpec",
    "classify_ratio",
    "eval_phi",
    "factor",
    "mu_hat",
    "mu_hat_at_pow2",
    "mu_hat_sq",
    "parse_rational",
    "parse_weight_spec",
    "reduce_argument",
    "singularity_diagnostic",
]
