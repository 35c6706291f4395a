"""Normality diagnostics for points drawn from the coin-tossing measure.

A sample is a finite prefix ``X_1 .. X_L`` of the random binary digits, so
it pins the point down to ``[x_L, x_L + 2^-L)``.  Everything downstream
(base conversion, orbits ``b^n x mod 1``) works on the exact integer
``X = x_L 2^L`` and only reports what that interval determines.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import gmpy2
import numpy as np
from scipy import stats

from cointoss._random import keyed_generator
from cointoss.errors import PrecisionExhausted, PreconditionViolation, RangeViolation
from cointoss.transform import DEFAULT_GUARD_BITS, abs_mu_hat_integer, truncation_index
from cointoss.weights import WeightSpec, eval_phi

# Stream id separating digit sampling from other keyed draws.
_DIGIT_STREAM = 0x5EED_D161

CHI2_QUANTILE = 0.999
WEYL_GUARD_LOG2 = 20
WEYL_CONSTANT = 5.0
BURN_IN = 64


@dataclass(frozen=True)
class SamplePoint:
    seed: int
    digits: np.ndarray  # uint8, digits[n-1] is X_n

    @property
    def length(self) -> int:
        return len(self.digits)

    @property
    def numerator(self) -> int:
        """``X`` with ``x_L = X / 2^L``."""
        if self.length == 0:
            return 0
        packed = np.packbits(self.digits, bitorder="big").tobytes()
        return int.from_bytes(packed, "big") >> (8 * len(packed) - self.length)

    def value(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.length)


@dataclass(frozen=True)
class DigitStream:
    base: int
    digits: np.ndarray

    @property
    def certified_length(self) -> int:
        return len(self.digits)

    def skip(self, count: int) -> "DigitStream":
        return DigitStream(self.base, self.digits[count:])

    def to_text(self) -> str:
        return "".join(np.base_repr(int(d), self.base).lower() for d in self.digits) if self.base > 10 \
            else (self.digits + ord("0")).astype(np.uint8).tobytes().decode()


def sample_point(spec: WeightSpec, L: int, seed: int) -> SamplePoint:
    """Draw the first ``L`` binary digits of a point distributed by the measure.

    Digit ``n`` is 1 with probability ``(1 - phi(n)) / 2``.  Uniforms come
    from a counter-based stream keyed on ``seed``, so the ``n``-th digit is
    the same for every ``L >= n``.
    """
    if L < 1:
        raise RangeViolation("L must be positive")
    u = keyed_generator(seed, _DIGIT_STREAM).random(L)
    p_one = 0.5 * (1.0 - spec.values(L))
    return SamplePoint(seed, (u < p_one).astype(np.uint8))


def _interval(x) -> tuple[int, int, int]:
    """``(lo, hi, den)``: the value is known to lie in ``[lo/den, hi/den)``, or is exactly ``lo/den`` if equal."""
    if isinstance(x, SamplePoint):
        X = x.numerator
        return X, X + 1, 1 << x.length
    x = Fraction(x)
    if not 0 <= x < 1:
        raise RangeViolation("exact inputs must lie in [0, 1)")
    return x.numerator, x.numerator, x.denominator


def _digits_of(value: int, base: int, width: int) -> np.ndarray:
    text = gmpy2.mpz(value).digits(base).rjust(width, "0")
    chars = np.frombuffer(text.encode(), dtype=np.uint8)
    # gmpy2 writes 0-9 then a-z
    return (chars - np.where(chars >= ord("a"), ord("a") - 10, ord("0"))).astype(np.uint8)


def binary_to_base(x, b: int, max_digits: int) -> DigitStream:
    """Base-``b`` digits of a sampled point (or an exact rational in [0, 1)).

    For a sample only the leading digits shared by the whole interval
    ``[x_L, x_L + 2^-L)`` are emitted.
    """
    if b < 2:
        raise RangeViolation("base must be at least 2")
    if max_digits < 1:
        raise RangeViolation("max_digits must be positive")
    lo, hi, den = _interval(x)
    exact = lo == hi
    if exact:
        K = max_digits
    else:
        # beyond L log_b 2 + 1 digits nothing can be certified
        K = min(max_digits, int(math.log(den, b)) + 2)
    scale = b**K
    lo_top = lo * scale // den
    digits = _digits_of(lo_top, b, K)
    if not exact:
        hi_top = (hi * scale - 1) // den  # largest value of floor(b^K y) for y < hi
        other = _digits_of(hi_top, b, K)
        diff = np.flatnonzero(digits != other)
        certified = int(diff[0]) if diff.size else K
        if certified == 0:
            raise PrecisionExhausted("the first base-%d digit is already ambiguous" % b)
        digits = digits[:certified]
    return DigitStream(b, digits.copy())


def long_division_digits(num: int, den: int, b: int, count: int) -> list[int]:
    """Schoolbook base-``b`` digits of ``num/den`` in [0, 1)."""
    out = []
    r = num
    for _ in range(count):
        r *= b
        out.append(r // den)
        r %= den
    return out


@dataclass(frozen=True)
class BlockFrequency:
    base: int
    block_len: int
    counts: np.ndarray
    chi_square: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.chi_square <= self.threshold


def block_frequency(stream: DigitStream, block_len: int, quantile: float = CHI2_QUANTILE) -> BlockFrequency:
    """Overlapping block counts and the chi-square statistic against uniform."""
    b = stream.base
    cells = b**block_len
    if block_len < 1:
        raise PreconditionViolation("block_len must be positive")
    if stream.certified_length < 10 * cells:
        raise PreconditionViolation(
            f"{stream.certified_length} digits is too few for blocks of {cells} kinds")
    d = stream.digits.astype(np.int64)
    n_blocks = len(d) - block_len + 1
    codes = np.zeros(n_blocks, dtype=np.int64)
    for i in range(block_len):
        codes = codes * b + d[i:i + n_blocks]
    counts = np.bincount(codes, minlength=cells)
    expected = n_blocks / cells
    chi2 = float(((counts - expected) ** 2).sum() / expected)
    threshold = float(stats.chi2.ppf(quantile, cells - 1))
    return BlockFrequency(b, block_len, counts, chi2, threshold)


def _orbit_numerators(x, b: int, h: int, N: int) -> tuple[list[int], int]:
    lo, _, den = _interval(x)
    r = (h * lo) % den
    out = []
    for _ in range(N):
        out.append(r)
        r = (r * b) % den
    return out, den


def weyl_valid_length(L: int, b: int, h: int = 1, N: int | None = None) -> int:
    """Number of leading orbit terms ``n = 0, 1, ..`` with ``|h| b^n 2^-L <= 2^-20``."""
    limit = 1 << max(0, L - WEYL_GUARD_LOG2) if L >= WEYL_GUARD_LOG2 else 0
    count = 0
    power = abs(h)
    while power <= limit and (N is None or count < N):
        count += 1
        power *= b
    return count


@dataclass(frozen=True)
class WeylSum:
    value: complex
    valid: bool
    n_used: int


def weyl_sum(x, b: int, h: int, N: int) -> WeylSum:
    """``(1/N) sum_{n<N} e(h b^n x)`` with the orbit reduced exactly.

    For a sample, terms whose uncertainty ``|h| b^n 2^-L`` exceeds 2^-20 are
    untrustworthy; in that case ``N`` is shortened and ``valid`` is False.
    """
    if b < 2:
        raise RangeViolation("base must be at least 2")
    if h == 0:
        raise RangeViolation("h must be nonzero")
    if N < 1:
        raise RangeViolation("N must be positive")
    valid = True
    if isinstance(x, SamplePoint):
        usable = weyl_valid_length(x.length, b, h, N)
        if usable < N:
            valid, N = False, max(usable, 1)
    nums, den = _orbit_numerators(x, b, h, N)
    total = sum(cmath.exp(2j * math.pi * (r / den)) for r in nums)
    return WeylSum(total / N, valid, N)


def orbit(x, b: int, N: int) -> np.ndarray:
    """``b^n x mod 1`` for ``n = 0..N-1`` as floats."""
    nums, den = _orbit_numerators(x, b, 1, N)
    return np.array([r / den for r in nums])


def star_discrepancy(values) -> float:
    """Star discrepancy of a finite set in [0, 1) from the sorted points."""
    u = np.sort(np.asarray(values, dtype=float))
    if u.size == 0:
        raise PreconditionViolation("need at least one point")
    n = u.size
    i = np.arange(1, n + 1)
    return float(max((i / n - u).max(), (u - (i - 1) / n).max()))


@dataclass(frozen=True)
class DelDiagnostic:
    sums: np.ndarray  # sums[M-1] = sum_{n<M} |mu_hat(h b^n)|
    moduli: np.ndarray
    bounds: np.ndarray
    fitted_exponent: float


def del_partial_sums(spec: WeightSpec, h: int, b: int, N: int,
                     guard_bits: int = DEFAULT_GUARD_BITS) -> DelDiagnostic:
    """Partial sums of ``|mu_hat(h b^n)|`` and their growth exponent.

    The exponent is the least-squares slope of ``log S_M`` against
    ``log M`` over ``M`` in the upper half of ``1..N``; a value below 1
    means the sums grow sublinearly.
    """
    if b < 2:
        raise RangeViolation("base must be at least 2")
    if h == 0:
        raise RangeViolation("h must be nonzero")
    if N < 2:
        raise PreconditionViolation("need N >= 2 to fit an exponent")
    t_max = abs(h) * b ** (N - 1)
    phis = spec.values(truncation_index(t_max, guard_bits))
    moduli = np.empty(N)
    bounds = np.empty(N)
    t = abs(h)
    for n in range(N):
        tv = abs_mu_hat_integer(spec, t, guard_bits, phis)
        moduli[n], bounds[n] = tv.value, tv.truncation_bound
        t *= b
    sums = np.cumsum(moduli)
    M = np.arange(1, N + 1)
    upper = M >= max(2, (N + 1) // 2)
    slope = np.polyfit(np.log(M[upper]), np.log(sums[upper]), 1)[0]
    return DelDiagnostic(sums, moduli, bounds, float(slope))


# -- Cassels residue strings ----------------------------------------------------------

def two_adic_split(b: int) -> tuple[int, int, int | None]:
    """``b = b0 2^tau0`` with ``b0`` odd, and the largest ``l`` with ``b = 1 mod 2^l``.

    ``l`` is None for even ``b``.
    """
    if b < 2:
        raise RangeViolation("b must be at least 2")
    tau0 = (b & -b).bit_length() - 1
    b0 = b >> tau0
    if tau0:
        return b0, tau0, None
    l = ((b - 1) & -(b - 1)).bit_length() - 1
    return b0, tau0, l


@dataclass(frozen=True)
class CasselsReport:
    b: int
    h: int
    l: int
    r: int
    coverage: dict[str, int]

    @property
    def passed(self) -> bool:
        return len(self.coverage) == 1 << self.r and all(c == 1 for c in self.coverage.values())

    def to_dict(self) -> dict[str, Any]:
        counts = list(self.coverage.values())
        return {"pass": self.passed, "b": self.b, "h": self.h, "l": self.l, "r": self.r,
                "distinct": len(self.coverage), "min_count": min(counts), "max_count": max(counts)}


def cassels_string(h: int, b: int, n: int, l: int, r: int) -> str:
    """Bits ``d_l d_(l+1) .. d_(l+r-1)`` of ``h b^n``, lowest index first."""
    window = (h * pow(b, n, 1 << (l + r)) % (1 << (l + r))) >> l
    return "".join("1" if window >> i & 1 else "0" for i in range(r))


def cassels_check(h: int, b: int, r: int) -> CasselsReport:
    """Verify that the ``r``-bit strings of ``h b^n``, ``n < 2^r``, are all distinct."""
    if h % 2 == 0:
        raise PreconditionViolation("h must be odd")
    if r < 1:
        raise PreconditionViolation("r must be positive")
    _, tau0, l = two_adic_split(b)
    if tau0 or l < 2:
        raise PreconditionViolation(
            f"need odd b with b = 1 mod 4, got b={b}; square b first when b = 3 mod 4")
    mod = 1 << (l + r)
    coverage: dict[str, int] = {}
    value = h % mod
    for _ in range(1 << r):
        window = value >> l
        key = "".join("1" if window >> i & 1 else "0" for i in range(r))
        coverage[key] = coverage.get(key, 0) + 1
        value = value * b % mod
    return CasselsReport(b, h, l, r, coverage)


def regular_pairs(bits: str, epsilon: float) -> tuple[int, str]:
    """Count adjacent ``01``/``10`` pairs; ``CaseI`` when there are at least ``epsilon * len``."""
    if not bits:
        raise PreconditionViolation("bits must be nonempty")
    if not 0 < epsilon < 0.25:
        raise PreconditionViolation("epsilon must lie in (0, 1/4)")
    count = sum(a != b for a, b in zip(bits, bits[1:]))
    return count, ("CaseI" if count >= epsilon * len(bits) else "CaseII")


def regular_pair_factor(spec: WeightSpec, h: int, b: int, n: int, k: int) -> tuple[float, float]:
    """Modulus of factor ``k + 2`` at ``t = h b^n`` and its contraction ceiling.

    When bits ``k`` and ``k + 1`` of ``h b^n`` differ, ``||h b^n 2^-(k+2)|| >= 1/4``
    and the factor is at most ``7/8 + phi(1)/8``.
    """
    den = 1 << (k + 2)
    x = Fraction((h * b**n) % den, den)
    phi = eval_phi(spec, k + 2)
    value = abs(0.5 * (1 + phi) + 0.5 * (1 - phi) * cmath.exp(2j * math.pi * float(x)))
    return value, 7 / 8 + eval_phi(spec, 1) / 8


# -- batch report ------------------------------------------------------------------

@dataclass
class NormalityResult:
    seed: int
    tests: list[dict[str, Any]] = field(default_factory=list)

    def add(self, name: str, statistic: float, threshold: float, passed: bool):
        self.tests.append({"name": name, "statistic": statistic,
                           "threshold": threshold, "pass": bool(passed)})


def normality_tests(spec: WeightSpec, seed: int, L: int = 1 << 15, block_lens=(1, 2, 3),
                    bases=(3,), weyl_bases=(2, 3), weyl_N: int = 1 << 10, h: int = 1,
                    burn_in: int = BURN_IN) -> NormalityResult:
    """Run the per-sample battery: block chi-squares, certified conversions, Weyl sums."""
    point = sample_point(spec, L, seed)
    result = NormalityResult(seed)
    binary = DigitStream(2, point.digits).skip(burn_in)
    for ell in block_lens:
        bf = block_frequency(binary, ell)
        result.add(f"base2_block{ell}_chi2", bf.chi_square, bf.threshold, bf.passed)
    for b in bases:
        stream = binary_to_base(point, b, L).skip(burn_in)
        bf = block_frequency(stream, 1)
        result.add(f"base{b}_block1_chi2", bf.chi_square, bf.threshold, bf.passed)
    threshold = WEYL_CONSTANT / math.sqrt(weyl_N)
    for b in weyl_bases:
        ws = weyl_sum(point, b, h, weyl_N)
        result.add(f"weyl_b{b}_h{h}", abs(ws.value), threshold, ws.valid and abs(ws.value) <= threshold)
    return result
