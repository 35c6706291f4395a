"""Explicit decay envelopes and the block combinatorics behind them.

For an integer ``t`` with ``2^m <= t < 2^(m+1)`` the indices ``n = 1..m``
with ``||t / 2^n|| < 2^-K`` are *members*.  Maximal runs of members form
blocks; the first non-member after a block, when it is ``<= m``, is the
block's *good index*.  Each good index ``n`` following a block of length
``l`` puts ``t / 2^n`` within ``2^(-K-l)`` of a half-odd integer, which is
what makes the transform small.

All membership and half-odd-integer tests are exact: thresholds ``2^-K``
use a ``K`` rounded up to a multiple of 1/64 and are compared through
integer powers.
"""

from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Iterable

import numpy as np

from cointoss._random import keyed_generator, random_bits
from cointoss.errors import PreconditionViolation, RangeViolation
from cointoss.transform import DEFAULT_GUARD_BITS, mu_hat, mu_hat_at_pow2
from cointoss.weights import CaseTag, WeightSpec, classify_ratio, eval_phi

K_QUANTUM = 64
CASE2_K = 3
GAMMA_CAP = 1.0 - 1e-6
TWO_TERM_SLACK = 1e-12
FIT_MIN_ROWS = 8
SCAN_HEADER = "t,modulus,trunc_bound,theory_bound,lemma31_bound"


@dataclass(frozen=True)
class Report:
    """Outcome of a verification: ``lhs`` is compared against ``rhs``."""

    passed: bool
    lhs: float
    rhs: float
    margin: float
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"pass": self.passed, "lhs": self.lhs, "rhs": self.rhs,
                "margin": self.margin, **self.details}


# -- exact threshold comparisons ---------------------------------------------

def quantize_k(K) -> Fraction:
    """Round ``K`` up to the next multiple of 1/64."""
    return Fraction(math.ceil(Fraction(K) * K_QUANTUM), K_QUANTUM)


def below_pow2(num: int, den: int, exponent: Fraction) -> bool:
    """Exactly decide ``num/den < 2^-exponent`` for ``num >= 0``.

    ``exponent`` must have a power-of-two denominator (any quantized K).
    """
    if num == 0:
        return True
    ratio = num / den
    threshold = 2.0 ** -float(exponent)
    if ratio < threshold * (1 - 1e-9):
        return True
    if ratio > threshold * (1 + 1e-9):
        return False
    p, q = exponent.numerator, exponent.denominator
    # (num/den)^q < 2^-p
    if p >= 0:
        return (num**q) << p < den**q
    return num**q < (den**q) << -p


def _k_admissible(K: Fraction) -> bool:
    # 3 * 2^-K <= 1  <=>  2^p >= 3^q
    return 2 ** K.numerator >= 3 ** K.denominator if K > 0 else False


# -- constants -----------------------------------------------------------------

@dataclass(frozen=True)
class DecayConstants:
    """Constants of the decay envelope for one weight.

    Case 1 populates ``C`` and ``final_multiplier``; case 2 populates
    ``C1`` and ``C2``.  ``gamma`` plays the role of the decay exponent in
    either case.
    """

    case_tag: CaseTag
    K_phi: float
    delta: float
    gamma: float
    C: float | None = None
    C1: float | None = None
    C2: float | None = None
    final_multiplier: float | None = None

    @property
    def K_exact(self) -> Fraction:
        return Fraction(self.K_phi)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["case_tag"] = self.case_tag.value
        return d


def case1_k(spec: WeightSpec) -> float:
    """Unrounded ``1/2 log2(5 pi^2 / (4 (1 - phi(2)^2)))``."""
    return 0.5 * math.log2(5 * math.pi**2 / (4 * (1 - eval_phi(spec, 2) ** 2)))


def derive_constants(spec: WeightSpec, case_tag: CaseTag | None = None, K=None) -> DecayConstants:
    """Envelope constants for ``spec``; ``K`` overrides the default threshold exponent."""
    if case_tag is None:
        case_tag = classify_ratio(spec)
    if case_tag is CaseTag.MIXED:
        raise PreconditionViolation("no decay envelope for weights of mixed ratio type")
    phi1 = eval_phi(spec, 1)
    if phi1 >= 1:
        raise RangeViolation(f"phi(1) = {phi1} must be below 1")
    if K is not None:
        K = quantize_k(K)
        if not _k_admissible(K):
            raise PreconditionViolation(f"K = {float(K)} violates 3 * 2^-K <= 1")
    elif case_tag is CaseTag.CASE1:
        K = quantize_k(max(case1_k(spec), math.log2(3)))
    else:
        K = Fraction(CASE2_K)
    K_f = float(K)
    delta = 1 - (1 - phi1**2) * math.sin(math.pi * 2.0**-K_f) ** 2
    gamma = min(-math.log2(delta) / 2, GAMMA_CAP)
    if case_tag is CaseTag.CASE1:
        C = 1 + math.pi**2 * 4.0**-K_f / phi1**2
        return DecayConstants(case_tag, K_f, delta, gamma, C=C, final_multiplier=2 * math.sqrt(C))
    C1 = 1 + phi1**2
    return DecayConstants(case_tag, K_f, delta, gamma, C1=C1, C2=2**gamma * math.sqrt(C1))


def theoretical_bound(consts: DecayConstants, spec: WeightSpec, t) -> float:
    """Upper envelope for ``|mu_hat(t)|``, valid for ``t >= 2``."""
    if t < 2:
        raise RangeViolation("the envelope is stated for t >= 2")
    log2t = math.log2(t)
    if consts.case_tag is CaseTag.CASE1:
        return consts.final_multiplier * eval_phi(spec, math.ceil(consts.gamma * log2t))
    return consts.C2 * 2.0 ** (-consts.gamma * log2t)


# -- blocks --------------------------------------------------------------------

@dataclass(frozen=True)
class Block:
    start: int
    length: int
    good_index: int | None  # None for a run reaching n = m


@dataclass(frozen=True)
class BlockDecomposition:
    t: int
    K_phi: float
    m: int
    membership: tuple[bool, ...]  # entry n-1 says whether index n is a member
    blocks: tuple[Block, ...]
    k: int
    j: int

    @property
    def members(self) -> list[int]:
        return [n for n, hit in enumerate(self.membership, start=1) if hit]

    def to_dict(self) -> dict[str, Any]:
        return {
            "t": self.t, "K": self.K_phi, "m": self.m, "k": self.k, "j": self.j,
            "members": self.members,
            "blocks": [asdict(b) for b in self.blocks],
        }


def block_decompose(t: int, K) -> BlockDecomposition:
    if t < 2:
        raise RangeViolation("block decomposition needs t >= 2")
    Kq = quantize_k(K)
    if not _k_admissible(Kq):
        raise PreconditionViolation(f"K = {float(Kq)} violates 3 * 2^-K <= 1")
    t = int(t)
    m = t.bit_length() - 1
    membership = []
    for n in range(1, m + 1):
        r = t & ((1 << n) - 1)
        membership.append(below_pow2(min(r, (1 << n) - r), 1 << n, Kq))
    blocks = []
    n = 1
    while n <= m:
        if not membership[n - 1]:
            n += 1
            continue
        start = n
        while n <= m and membership[n - 1]:
            n += 1
        blocks.append(Block(start, n - start, n if n <= m else None))
    k = sum(membership)
    j = sum(b.good_index is not None for b in blocks)
    return BlockDecomposition(t, float(Kq), m, tuple(membership), tuple(blocks), k, j)


def verify_lemma22(decomp: BlockDecomposition) -> Report:
    """Check that every good index lands next to a half-odd integer.

    For a block of length ``l`` with good index ``n`` the nearest odd
    ``k`` to ``t / 2^(n-1)`` must satisfy ``|t/2^n - k/2| < 2^(-K-l)``.
    """
    K = Fraction(decomp.K_phi)
    rows = []
    worst = -math.inf
    for b in decomp.blocks:
        if b.good_index is None:
            continue
        n = b.good_index
        odd = 2 * (decomp.t >> n) + 1
        num = abs(decomp.t - odd * (1 << (n - 1)))
        ok = below_pow2(num, 1 << n, K + b.length)
        dist = num / (1 << n)
        threshold = 2.0 ** -(float(K) + b.length)
        worst = max(worst, dist / threshold)
        rows.append({"good_index": n, "length": b.length, "odd_k": odd,
                     "distance": dist, "threshold": threshold, "pass": ok})
    passed = all(r["pass"] for r in rows)
    worst = 0.0 if worst == -math.inf else worst
    return Report(passed, worst, 1.0, 1.0 - worst, {"t": decomp.t, "blocks": rows})


def lemma31_bound(spec: WeightSpec, decomp: BlockDecomposition, consts: DecayConstants) -> float:
    """Product envelope ``delta^(m-k-j) prod (phi(n_i)^2 + pi^2 4^-(l_i+K))`` for ``|mu_hat|^2``."""
    if consts.K_phi != decomp.K_phi:
        raise PreconditionViolation(f"K mismatch: constants {consts.K_phi}, blocks {decomp.K_phi}")
    bound = consts.delta ** (decomp.m - decomp.k - decomp.j)
    for b in decomp.blocks:
        if b.good_index is not None:
            bound *= eval_phi(spec, b.good_index) ** 2 + math.pi**2 * 4.0 ** -(b.length + consts.K_phi)
    return bound


def check_lemma21(a: float, b: float, t: float) -> bool:
    """``|a + b e(t)| <= a + b - 4 min(a, b) ||t||^2`` up to a relative slack of 1e-12."""
    if a <= 0 or b <= 0:
        raise RangeViolation("a and b must be positive")
    dist = abs(t - round(t))
    lhs = abs(a + b * cmath.exp(2j * math.pi * t))
    rhs = a + b - 4 * min(a, b) * dist * dist
    return lhs <= rhs + TWO_TERM_SLACK * (a + b)


def check_corollary_tl1(phi_n: float, phi_1: float, x: float) -> bool:
    """Single-factor contraction ``|f| <= 1 - 2 (1 - phi(1)) ||x||^2`` for ``phi_n <= phi_1``."""
    dist = abs(x - round(x))
    lhs = abs(0.5 * (1 + phi_n) + 0.5 * (1 - phi_n) * cmath.exp(2j * math.pi * x))
    return lhs <= 1 - 2 * (1 - phi_1) * dist * dist + TWO_TERM_SLACK


# -- scans ---------------------------------------------------------------------

@dataclass(frozen=True)
class ScanRow:
    t: int
    modulus: float
    trunc_bound: float
    theory_bound: float
    lemma31_bound: float  # square root of the product envelope, i.e. modulus scale


@dataclass
class ScanTable:
    rows: list[ScanRow]

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        lines = [SCAN_HEADER]
        for r in self.rows:
            lines.append(",".join([str(r.t)] + [format(v, ".17g") for v in
                                   (r.modulus, r.trunc_bound, r.theory_bound, r.lemma31_bound)]))
        return "\n".join(lines) + "\n"


def octave_points(m: int, samples: int, seed: int) -> list[int]:
    """Scan abscissae for octave ``[2^m, 2^(m+1))``: both ends plus keyed random draws."""
    points = [1 << m]
    if samples >= 2:
        points.append((1 << (m + 1)) - 1)
    for i in range(samples - 2):
        points.append((1 << m) + random_bits(keyed_generator(seed, m, i), m))
    return points


def _scan_row(job: tuple) -> ScanRow:
    spec, t, guard_bits, consts = job
    value = mu_hat(spec, t, guard_bits)
    if consts is None:
        theory = envelope = math.nan
    else:
        theory = theoretical_bound(consts, spec, t)
        envelope = math.sqrt(lemma31_bound(spec, block_decompose(t, consts.K_phi), consts))
    return ScanRow(t, value.modulus, value.truncation_bound, theory, envelope)


def _map(func, jobs: list, threads: int | None) -> list:
    workers = threads or os.cpu_count() or 1
    if workers <= 1 or len(jobs) < 2:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def decay_scan(spec: WeightSpec, m_min: int, m_max: int, samples_per_octave: int, seed: int,
               guard_bits: int = DEFAULT_GUARD_BITS, threads: int | None = 1) -> ScanTable:
    """Evaluate ``|mu_hat|`` and its envelopes across octaves ``m_min..m_max``.

    Rows are sorted by ``t``; the table does not depend on ``threads``.
    Weights of mixed ratio type get NaN envelopes.
    """
    if not 2 <= m_min <= m_max:
        raise PreconditionViolation("need 2 <= m_min <= m_max")
    if samples_per_octave < 1:
        raise PreconditionViolation("samples_per_octave must be positive")
    tag = classify_ratio(spec)
    consts = None if tag is CaseTag.MIXED else derive_constants(spec, tag)
    ts = sorted(t for m in range(m_min, m_max + 1) for t in octave_points(m, samples_per_octave, seed))
    rows = _map(_scan_row, [(spec, t, guard_bits, consts) for t in ts], threads)
    return ScanTable(rows)


def fit_decay_exponent(table: ScanTable, model: str = "PowerLaw", envelope: bool = False) -> float:
    """Least-squares decay exponent of ``|mu_hat|``.

    ``PowerLaw`` fits ``log|mu_hat|`` against ``log t``, ``LogLaw`` against
    ``log log t``; the negated slope is returned.  With ``envelope`` only the
    largest usable value in each octave enters the fit, which is the
    quantity an O(.) upper rate describes.
    """
    usable = [r for r in table.rows if r.modulus > r.trunc_bound and r.modulus > 0]
    if envelope:
        best: dict[int, ScanRow] = {}
        for r in usable:
            m = r.t.bit_length() - 1
            if m not in best or r.modulus > best[m].modulus:
                best[m] = r
        usable = [best[m] for m in sorted(best)]
    if len(usable) < FIT_MIN_ROWS:
        raise PreconditionViolation(f"only {len(usable)} usable rows, need {FIT_MIN_ROWS}")
    logt = np.array([math.log(r.t) for r in usable])
    if model == "PowerLaw":
        x = logt
    elif model == "LogLaw":
        x = np.log(logt)
    else:
        raise PreconditionViolation(f"unknown model {model!r}")
    y = np.log([r.modulus for r in usable])
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


# -- lower bounds ----------------------------------------------------------------

def _sq_error(value: float, bound: float) -> float:
    # | |v|^2 - |mu|^2 | <= (2 |v| + bound) * bound
    return (2 * value + bound) * bound


def lower_bound_check(spec: WeightSpec, m: int, guard_bits: int = DEFAULT_GUARD_BITS) -> Report:
    """``|mu_hat(2^m)|^2 >= (4 / pi^2) phi(m+1)^2`` up to the evaluation error."""
    tv = mu_hat_at_pow2(spec, m, guard_bits)
    lhs = tv.modulus**2
    rhs = 4 / math.pi**2 * eval_phi(spec, m + 1) ** 2
    err = _sq_error(tv.modulus, tv.truncation_bound)
    return Report(lhs >= rhs - err, lhs, rhs, lhs - rhs, {"m": m, "error": err})


def rajchman_floor(a: int) -> float:
    return 4 / math.pi**2 * math.cos(math.pi / a) ** 2


def rajchman_check(spec: WeightSpec, a: int, k_max: int,
                   guard_bits: int = DEFAULT_GUARD_BITS, tol: float = 0.0) -> Report:
    """Base-``a`` transform stays above ``(4/pi^2) cos^2(pi/a)`` at ``t = a^k``."""
    if a < 3:
        raise PreconditionViolation("the non-decay floor needs a >= 3")
    if k_max < 1:
        raise PreconditionViolation("k_max must be positive")
    floor = rajchman_floor(a)
    rows = []
    for k in range(1, k_max + 1):
        tv = mu_hat(spec, a**k, guard_bits, base=a)
        lhs = tv.modulus**2
        err = _sq_error(tv.modulus, tv.truncation_bound)
        rows.append({"k": k, "lhs": lhs, "error": err, "pass": lhs >= floor - err - tol})
    worst = min(rows, key=lambda r: r["lhs"])
    return Report(all(r["pass"] for r in rows), worst["lhs"], floor, worst["lhs"] - floor,
                  {"a": a, "floor": floor, "rows": rows})


def pow2_moduli(spec: WeightSpec, ks: Iterable[int], guard_bits: int = DEFAULT_GUARD_BITS) -> list[float]:
    """``|mu_hat(2^k)|`` for each ``k``; base 2 decays, unlike ``a >= 3``."""
    return [mu_hat_at_pow2(spec, k, guard_bits).modulus for k in ks]
