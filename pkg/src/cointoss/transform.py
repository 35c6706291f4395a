"""Fourier transform of the coin-tossing measure as a truncated product.

    mu_hat(t) = prod_{n>=1} ( (1 + phi(n))/2 + (1 - phi(n))/2 * e(t / a^n) )

with ``e(x) = exp(2 pi i x)`` and base ``a = 2`` unless stated otherwise.

Arguments are exact rationals.  ``t / a^n mod 1`` is reduced with integer
arithmetic and only converted to binary64 right before the trigonometric
call, after folding it into ``[0, 1/4]`` so that sin and cos are evaluated
with small relative error.

Error model
-----------
Writing ``mu_hat = P_N * T`` where ``P_N`` is the product of the first
``N`` factors and ``T`` the tail, every tail factor satisfies
``|f_n - 1| <= pi |t| a^-n``, hence ``|T - 1| <= expm1(pi |t| sum_{n>N} a^-n)``
and ``|mu_hat - P_N| <= |P_N| |T - 1|``.  The reported ``truncation_bound``
is this quantity, evaluated with the conservative sum
``a^-N * a / (a - 1)``, plus a relative floating-point term.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

from cointoss.errors import InvalidWeightSpec, RangeViolation
from cointoss.weights import WeightSpec

RationalArgument = Fraction

DEFAULT_GUARD_BITS = 40

# Largest truncation index accepted before refusing the evaluation.
MAX_TERMS = 1 << 22

_U = 2.0**-53
# Relative rounding budget per factor (sin/cos of a folded argument, the
# combination c^2 + phi s^2 and one complex multiply stay well below this).
_FACTOR_REL_ERR = 32 * _U

_RATIONAL = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*)?$")


@dataclass(frozen=True)
class TransformValue:
    """A transform evaluation and a rigorous bound on its distance to the truth.

    ``truncation_bound`` already includes ``fp_bound``.
    """

    value: complex | float
    truncation_bound: float
    terms_used: int
    fp_bound: float = 0.0

    @property
    def modulus(self) -> float:
        return abs(self.value)


def parse_rational(text: str) -> Fraction:
    """Parse ``<int>`` or ``<int>/<int>``; scientific notation is rejected."""
    match = _RATIONAL.match(text)
    if not match:
        raise InvalidWeightSpec(f"not a rational literal: {text!r}")
    num, den = match.groups()
    if den is not None and int(den) == 0:
        raise RangeViolation("zero denominator")
    return Fraction(int(num), int(den) if den else 1)


def as_rational(t) -> Fraction:
    if isinstance(t, Fraction):
        return t
    if isinstance(t, (int, Rational)):
        return Fraction(t)
    if isinstance(t, str):
        return parse_rational(t)
    raise TypeError(f"transform arguments must be exact rationals, got {type(t).__name__}")


def reduce_argument(t, base: int, n: int) -> tuple[Fraction, Fraction]:
    """Exact ``frac(t / base^n)`` and its distance to the nearest integer.

    >>> reduce_argument(13, 2, 3)
    (Fraction(5, 8), Fraction(3, 8))
    """
    if base < 2:
        raise RangeViolation("base must be at least 2")
    if n < 0:
        raise RangeViolation("n must be nonnegative")
    t = as_rational(t)
    modulus = t.denominator * base**n
    r = t.numerator % modulus
    frac = Fraction(r, modulus)
    return frac, min(frac, 1 - frac)


def sincos_pi(num: int, den: int) -> tuple[float, float]:
    """``(sin(pi x), cos(pi x))`` for the exact rational ``x = num/den`` in [0, 1).

    The argument is folded into [0, 1/4] exactly before rounding, so that
    zeros at x = 0 and x = 1/2 come out exact and values near them keep
    full relative accuracy.
    """
    flip = 2 * num > den  # x > 1/2: sin(pi(1-x)) = sin(pi x), cos changes sign
    if flip:
        num = den - num
    if 4 * num <= den:
        arg = math.pi * (num / den)
        s, c = math.sin(arg), math.cos(arg)
    else:
        # x in (1/4, 1/2]: use the complement 1/2 - x = (den - 2 num) / (2 den)
        arg = math.pi * ((den - 2 * num) / (2 * den))
        s, c = math.cos(arg), math.sin(arg)
    return s, (-c if flip else c)


def _factor_sc(phi: float, s: float, c: float) -> complex:
    # (1+phi)/2 + (1-phi)/2 e(x) with all-positive real part c^2 + phi s^2
    return complex(c * c + phi * s * s, (1.0 - phi) * s * c)


def factor(phi_n: float, theta) -> complex:
    """One factor ``(1+phi)/2 + (1-phi)/2 * e(theta)`` of the product."""
    if not 0.0 <= phi_n <= 1.0:
        raise RangeViolation(f"phi must lie in [0, 1], got {phi_n}")
    theta = as_rational(theta) % 1
    s, c = sincos_pi(theta.numerator, theta.denominator)
    return _factor_sc(phi_n, s, c)


def _ceil_log(abs_num: int, den: int, base: int) -> int:
    """Smallest e >= 0 with base^e * den >= abs_num."""
    if abs_num <= den:
        return 0
    e = max(0, int((abs_num.bit_length() - den.bit_length()) / math.log2(base)) - 1)
    while base**e * den < abs_num:
        e += 1
    while e > 0 and base ** (e - 1) * den >= abs_num:
        e -= 1
    return e


def truncation_index(t, guard_bits: int, base: int = 2) -> int:
    """``max(0, ceil(log_base |t|)) + guard_bits``."""
    t = as_rational(t)
    if guard_bits < 1:
        raise RangeViolation("guard_bits must be at least 1")
    n_terms = _ceil_log(abs(t.numerator), t.denominator, base) + guard_bits
    if n_terms > MAX_TERMS:
        raise RangeViolation(f"|t| needs {n_terms} terms, beyond the horizon {MAX_TERMS}")
    return n_terms


def tail_bound(t, n_terms: int, base: int = 2) -> float:
    """Bound on ``|T - 1|`` for the tail product after ``n_terms`` factors."""
    t = as_rational(t)
    scaled = Fraction(abs(t.numerator) * base, t.denominator * base**n_terms * (base - 1))
    return math.expm1(math.pi * float(scaled))


def _assemble(prod, abs_prod: float, tail: float, n_terms: int, inexact: int) -> TransformValue:
    # factors at a zero reduced argument are exactly 1 and cost no rounding
    fp = abs_prod * math.expm1(inexact * _FACTOR_REL_ERR * 1.01)
    bound = (abs_prod + fp) * tail + fp
    return TransformValue(prod, bound, n_terms, fp)


def mu_hat(spec: WeightSpec, t, guard_bits: int = DEFAULT_GUARD_BITS, base: int = 2) -> TransformValue:
    """Evaluate the transform at the rational ``t``.

    For ``base >= 3`` the point masses sit at ``base^-n`` instead of ``2^-n``.
    """
    if base < 2:
        raise RangeViolation("base must be at least 2")
    t = as_rational(t)
    n_terms = truncation_index(t, guard_bits, base)
    phis = spec.values(n_terms).tolist()
    num, modulus = t.numerator, t.denominator
    prod = 1 + 0j
    inexact = 0
    for n in range(1, n_terms + 1):
        modulus *= base
        r = num % modulus
        if r:
            s, c = sincos_pi(r, modulus)
            prod *= _factor_sc(phis[n - 1], s, c)
            inexact += 1
    return _assemble(prod, abs(prod), tail_bound(t, n_terms, base), n_terms, inexact)


def mu_hat_sq(spec: WeightSpec, t, guard_bits: int = DEFAULT_GUARD_BITS) -> TransformValue:
    """``|mu_hat(t)|^2`` as the product of ``phi^2 sin^2 + cos^2`` terms.

    Every tail term lies in ``[1 - pi^2 x_n^2, 1]`` with ``x_n = t 2^-n``,
    so the tail sits in ``[1 - pi^2 t^2 4^-N / 3, 1]``.
    """
    t = as_rational(t)
    n_terms = truncation_index(t, guard_bits)
    phis = spec.values(n_terms).tolist()
    num, modulus = t.numerator, t.denominator
    prod = 1.0
    inexact = 0
    for n in range(1, n_terms + 1):
        modulus *= 2
        r = num % modulus
        if r:
            s, c = sincos_pi(r, modulus)
            phi = phis[n - 1]
            prod *= c * c + phi * phi * s * s
            inexact += 1
    x = float(Fraction(abs(t.numerator), t.denominator * 2**n_terms))
    tail = min(1.0, math.pi**2 * x * x / 3.0)
    return _assemble(prod, prod, tail, n_terms, inexact)


def mu_hat_at_pow2(spec: WeightSpec, m: int, guard_bits: int = DEFAULT_GUARD_BITS) -> TransformValue:
    """Transform at ``t = 2^m`` using the closed form of the leading factors.

    Factors ``n <= m`` are exactly 1 and factor ``m + 1`` is exactly
    ``phi(m + 1)``; the rest are evaluated at ``2^(m - n)``.
    """
    if m < 0:
        raise RangeViolation("m must be nonnegative")
    n_terms = truncation_index(2**m, guard_bits)
    phis = spec.values(n_terms, start=m + 1).tolist()
    prod = complex(phis[0])
    for k in range(2, n_terms - m + 1):  # n = m + k, argument 2^-k
        s, c = sincos_pi(1, 2**k)
        prod *= _factor_sc(phis[k - 1], s, c)
    return _assemble(prod, abs(prod), tail_bound(2**m, n_terms), n_terms, n_terms - m - 1)


def _windows64(t: int, n_terms: int) -> np.ndarray:
    """``floor(frac(t / 2^n) * 2^64)`` for n = 1..n_terms as uint64."""
    nbytes = (n_terms + 64) // 8 + 9
    shifted = (t << 64) & ((1 << (8 * nbytes)) - 1)
    buf = np.frombuffer(shifted.to_bytes(nbytes, "little"), dtype=np.uint8)
    n = np.arange(1, n_terms + 1)
    offset, shift = n // 8, (n % 8).astype(np.uint64)
    words = np.ndarray(shape=(nbytes - 8,), dtype="<u8", buffer=buf, strides=(1,))
    lo = words[offset] >> shift
    hi = buf[offset + 8].astype(np.uint64) << ((np.uint64(64) - shift) % np.uint64(64))
    hi[shift == 0] = 0
    return lo | hi


def mu_hat_sq_integer(spec: WeightSpec, t: int, guard_bits: int = DEFAULT_GUARD_BITS,
                      phis: np.ndarray | None = None) -> tuple[float, float]:
    """Fast ``|mu_hat(t)|^2`` for a (possibly huge) integer ``t``.

    The binary digits of ``t`` feed a vectorised evaluation in which each
    reduced argument keeps its 64 leading fractional bits.  Returns the
    value and an absolute error bound covering both the truncation and the
    dropped low-order bits.
    """
    t = abs(int(t))
    n_terms = truncation_index(t, guard_bits)
    if phis is None or len(phis) < n_terms:
        phis = spec.values(n_terms)
    phis = phis[:n_terms]
    w = _windows64(t, n_terms)
    top = w >= np.uint64(1 << 63)
    d_int = np.where(top, (~w) + np.uint64(1), w)  # distance to nearest integer * 2^64
    low = d_int <= np.uint64(1 << 62)
    d = d_int.astype(np.float64) * 2.0**-64
    e = (np.uint64(1 << 63) - d_int).astype(np.float64) * 2.0**-64
    arg = np.pi * np.where(low, d, e)
    sa, ca = np.sin(arg), np.cos(arg)
    s = np.where(low, sa, ca)
    c = np.where(low, ca, sa)
    g = c * c + phis * phis * s * s
    with np.errstate(under="ignore"):
        prod = float(np.prod(g))
    x = t / (1 << n_terms)
    tail = min(1.0, math.pi**2 * x * x / 3.0)
    # each g within 16 ulps of the exact factor plus the effect of bits below 2^-64
    abs_err = n_terms * (16 * _U + 8.0 * 2.0**-64)
    return prod, prod * tail + abs_err


def abs_mu_hat_integer(spec: WeightSpec, t: int, guard_bits: int = DEFAULT_GUARD_BITS,
                       phis: np.ndarray | None = None) -> TransformValue:
    """``|mu_hat(t)|`` for an integer ``t`` via :func:`mu_hat_sq_integer`."""
    sq, err = mu_hat_sq_integer(spec, t, guard_bits, phis)
    value = math.sqrt(sq)
    bound = max(math.sqrt(sq + err) - value, value - math.sqrt(max(sq - err, 0.0)))
    return TransformValue(value, bound, truncation_index(t, guard_bits))
