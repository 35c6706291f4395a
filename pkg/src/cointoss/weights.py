"""Weight functions phi: N -> (0, 1) and their classification.

A weight is described by a short DSL string::

    const:<c> | power:<tau> | logpow:<tau> | geo:<kappa> | table:<path>

with the family definitions

    const   phi(n) = c
    power   phi(n) = (n + 1) ** -tau
    logpow  phi(n) = log2(n + 3) ** -tau
    geo     phi(n) = kappa ** -n
    table   phi(n) = n-th entry of a one-column CSV, extended geometrically

The unit shifts in ``power`` and ``logpow`` keep ``phi(1) < 1``.
"""

from __future__ import annotations

import csv
import enum
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cointoss.errors import InvalidWeightSpec, RangeViolation

# Smallest positive binary64; underflowing weights are clamped here so that
# every evaluation stays inside (0, 1).
TINY = math.ulp(0.0)

_DECIMAL = re.compile(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)$")


class Family(enum.Enum):
    CONST = "const"
    POWER = "power"
    LOGPOW = "logpow"
    GEOMETRIC = "geo"
    TABLE = "table"


class CaseTag(enum.Enum):
    """Which hypothesis on the ratio phi(n)/phi(n+1) holds."""

    CASE1 = "Case1"  # ratio < 2 everywhere
    CASE2 = "Case2"  # ratio >= 2 everywhere
    MIXED = "Mixed"


class Singularity(enum.Enum):
    SINGULAR = "Singular"
    ABS_CONTINUOUS = "AbsContinuous"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class WeightSpec:
    """Immutable description of a weight function.

    Instances are callable: ``spec(n)`` is ``eval_phi(spec, n)``.
    """

    family: Family
    params: tuple[float, ...] = ()
    table_values: tuple[float, ...] | None = None

    def __post_init__(self):
        _validate(self)

    def __call__(self, n: int) -> float:
        return eval_phi(self, n)

    def values(self, n_max: int, start: int = 1) -> np.ndarray:
        """phi(start), ..., phi(n_max) as a float64 array, bit-identical to ``eval_phi``."""
        return np.array([eval_phi(self, k) for k in range(start, n_max + 1)], dtype=np.float64)

    def __str__(self):
        if self.family is Family.TABLE:
            return f"table:<{len(self.table_values)} values>"
        return f"{self.family.value}:{self.params[0]!r}"


def _validate(spec: WeightSpec) -> None:
    fam = spec.family
    if fam is Family.TABLE:
        vals = spec.table_values
        if not vals:
            raise InvalidWeightSpec("table weight needs at least one value")
        for v in vals:
            if not 0.0 < v < 1.0:
                raise RangeViolation(f"table value {v} outside (0, 1)")
        if any(b > a for a, b in zip(vals, vals[1:])):
            raise InvalidWeightSpec("table values must be non-increasing")
        return
    if len(spec.params) != 1:
        raise InvalidWeightSpec(f"{fam.value} takes exactly one parameter")
    p = spec.params[0]
    if not math.isfinite(p):
        raise InvalidWeightSpec(f"non-finite parameter {p}")
    if fam is Family.CONST:
        if not 0.0 < p < 1.0:
            raise RangeViolation(f"const value {p} outside (0, 1)")
    elif fam in (Family.POWER, Family.LOGPOW):
        if p <= 0:
            raise InvalidWeightSpec(f"{fam.value} exponent must be positive, got {p}")
    elif fam is Family.GEOMETRIC:
        if p <= 1:
            raise InvalidWeightSpec(f"geo base must exceed 1, got {p}")


def _parse_decimal(text: str) -> float:
    text = text.strip()
    if not _DECIMAL.match(text):
        raise InvalidWeightSpec(f"not a decimal literal: {text!r}")
    return float(text)


def _load_table(path: str) -> tuple[float, ...]:
    try:
        with open(Path(path), newline="") as fh:
            rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    except OSError as exc:
        raise InvalidWeightSpec(f"cannot read table {path!r}: {exc}") from exc
    values = []
    for i, row in enumerate(rows):
        if len(row) != 1:
            raise InvalidWeightSpec(f"{path}: row {i + 1} is not a single column")
        try:
            values.append(_parse_decimal(row[0]))
        except InvalidWeightSpec:
            if i == 0:  # header line
                continue
            raise
    return tuple(values)


def parse_weight_spec(text: str) -> WeightSpec:
    """Parse weight DSL text into a :class:`WeightSpec`.

    >>> parse_weight_spec("geo:2")(3)
    0.125
    """
    if not isinstance(text, str) or ":" not in text:
        raise InvalidWeightSpec(f"expected '<family>:<arg>', got {text!r}")
    name, _, arg = text.partition(":")
    try:
        family = Family(name.strip().lower())
    except ValueError:
        raise InvalidWeightSpec(f"unknown weight family {name!r}") from None
    if family is Family.TABLE:
        if not arg.strip():
            raise InvalidWeightSpec("table needs a path")
        return WeightSpec(family, (), _load_table(arg.strip()))
    return WeightSpec(family, (_parse_decimal(arg),))


def eval_phi(spec: WeightSpec, n: int) -> float:
    """Evaluate phi(n) for n >= 1."""
    if n < 1:
        raise RangeViolation(f"weights are indexed from 1, got n={n}")
    fam = spec.family
    if fam is Family.CONST:
        return spec.params[0]
    if fam is Family.POWER:
        value = (n + 1.0) ** -spec.params[0]
    elif fam is Family.LOGPOW:
        value = math.log2(n + 3) ** -spec.params[0]
    elif fam is Family.GEOMETRIC:
        value = spec.params[0] ** -n  # underflows to 0.0, clamped below
    else:
        return _table_value(spec.table_values, n)
    return max(value, TINY)


def _table_value(vals: tuple[float, ...], n: int) -> float:
    size = len(vals)
    if n <= size:
        return vals[n - 1]
    if size < 2:
        raise RangeViolation(f"one-entry table cannot be extended to n={n}")
    ratio = vals[-1] / vals[-2]
    # last value times ratio^(n - size), in log space so it underflows cleanly
    log_value = math.log(vals[-1]) + (n - size) * math.log(ratio)
    return min(max(math.exp(log_value), TINY), math.nextafter(1.0, 0.0))


def _analytic_case(spec: WeightSpec) -> CaseTag | None:
    fam = spec.family
    if fam is Family.TABLE:
        return None
    if fam is Family.CONST:
        return CaseTag.CASE1
    p = spec.params[0]
    if fam is Family.GEOMETRIC:
        return CaseTag.CASE2 if p >= 2 else CaseTag.CASE1
    # power and logpow ratios decrease in n towards 1, so n = 1 is the worst
    if fam is Family.POWER:
        first = 1.5**p
    else:
        first = (math.log2(5) / 2.0) ** p
    return CaseTag.CASE1 if first < 2 else CaseTag.MIXED


def empirical_case(spec: WeightSpec, horizon: int) -> CaseTag:
    """Classify from the ratios phi(n)/phi(n+1), n = 1..horizon, only.

    Indices where the weight has underflowed to the clamp are skipped.
    """
    below = above = False
    prev = eval_phi(spec, 1)
    for n in range(1, horizon + 1):
        nxt = eval_phi(spec, n + 1)
        if nxt <= TINY or prev <= TINY:
            break
        if prev / nxt < 2:
            below = True
        else:
            above = True
        prev = nxt
    if below and above:
        return CaseTag.MIXED
    return CaseTag.CASE2 if above else CaseTag.CASE1


def classify_ratio(spec: WeightSpec, horizon: int = 1000) -> CaseTag:
    """Decide which ratio hypothesis holds for ``spec``.

    Named families are classified in closed form; tables by scanning the
    ratios up to ``horizon``.
    """
    if horizon < 2:
        raise RangeViolation("horizon must be at least 2")
    tag = _analytic_case(spec)
    if tag is None:
        tag = empirical_case(spec, horizon)
    return tag


def singularity_diagnostic(spec: WeightSpec, horizon: int) -> tuple[Singularity, float]:
    """Partial sum of phi(n)^2 up to ``horizon`` and the singularity verdict.

    The measure is singular exactly when the full series diverges.
    """
    if horizon < 1:
        raise RangeViolation("horizon must be at least 1")
    vals = spec.values(horizon)
    partial = math.fsum((vals * vals).tolist())
    fam = spec.family
    if fam in (Family.CONST, Family.LOGPOW):
        verdict = Singularity.SINGULAR
    elif fam is Family.POWER:
        verdict = Singularity.SINGULAR if spec.params[0] <= 0.5 else Singularity.ABS_CONTINUOUS
    elif fam is Family.GEOMETRIC:
        verdict = Singularity.ABS_CONTINUOUS
    else:
        verdict = Singularity.UNDETERMINED
    return verdict, partial
