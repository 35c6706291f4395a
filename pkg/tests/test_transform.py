import cmath
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cointoss import (InvalidWeightSpec, RangeViolation, factor, mu_hat, mu_hat_at_pow2,
                      mu_hat_sq, parse_rational, parse_weight_spec, reduce_argument)
from cointoss.transform import (abs_mu_hat_integer, mu_hat_sq_integer, sincos_pi,
                                tail_bound, truncation_index)

from oracles import mu_hat_mp

SPECS = ["geo:2", "geo:1.5", "power:0.5", "logpow:1", "const:0.3"]


def test_reduce_examples():
    assert reduce_argument(13, 2, 3) == (Fraction(5, 8), Fraction(3, 8))
    assert reduce_argument(2**10, 2, 7) == (0, 0)
    assert reduce_argument(Fraction(7, 4), 2, 1) == (Fraction(7, 8), Fraction(1, 8))


def test_reduce_negative_and_huge():
    assert reduce_argument(-1, 2, 2) == (Fraction(3, 4), Fraction(1, 4))
    t = 3**5000 + 1
    frac, _ = reduce_argument(t, 2, 4000)
    assert frac == Fraction(t % 2**4000, 2**4000)


@given(st.integers(-10**30, 10**30), st.integers(1, 10**6), st.integers(2, 12), st.integers(0, 60))
def test_reduce_matches_fraction_arithmetic(num, den, base, n):
    t = Fraction(num, den)
    frac, dist = reduce_argument(t, base, n)
    x = t / base**n
    assert frac == x - math.floor(x)
    assert 0 <= frac < 1 and dist == min(frac, 1 - frac) <= Fraction(1, 2)


def test_factor_examples():
    assert factor(0.7, 0) == 1
    assert factor(0.25, Fraction(1, 2)) == 0.25
    assert factor(0.0, Fraction(1, 4)) == pytest.approx(0.5 + 0.5j, abs=2**-52)
    with pytest.raises(RangeViolation):
        factor(1.5, 0)


@given(st.floats(0, 1), st.fractions(min_value=0, max_value=1, max_denominator=10**9))
def test_factor_modulus_at_most_one(phi, theta):
    f = factor(phi, theta)
    ref = (1 + phi) / 2 + (1 - phi) / 2 * cmath.exp(2j * math.pi * float(theta))
    assert abs(f) <= 1 + 1e-15
    assert abs(f - ref) <= 1e-14


@given(st.integers(0, 2**40), st.integers(1, 2**40))
def test_sincos_matches_libm(num, den):
    num %= den
    s, c = sincos_pi(num, den)
    assert s >= 0
    assert abs(s - math.sin(math.pi * num / den)) <= 1e-15
    assert abs(c - math.cos(math.pi * num / den)) <= 1e-15


def test_sincos_exact_zeros():
    assert sincos_pi(1, 2) == (1.0, 0.0)
    assert sincos_pi(0, 7) == (0.0, 1.0)


def test_parse_rational():
    assert parse_rational("100") == 100
    assert parse_rational("-7/4") == Fraction(-7, 4)
    for bad in ("1e3", "1.5", "x", "1/"):
        with pytest.raises(InvalidWeightSpec):
            parse_rational(bad)
    with pytest.raises(RangeViolation):
        parse_rational("1/0")


def test_zero_argument_is_exact():
    for text in SPECS:
        tv = mu_hat(parse_weight_spec(text), 0)
        assert tv.value == 1 and tv.truncation_bound == 0
        sq = mu_hat_sq(parse_weight_spec(text), 0)
        assert sq.value == 1 and sq.truncation_bound == 0


def test_point_mass_limit(near_one):
    tv = mu_hat(near_one, 37)
    assert abs(tv.value - 1) <= 1e-9
    assert mu_hat_sq(near_one, 12345).value == pytest.approx(1, abs=1e-9)


def test_pow2_path_agrees(geo2, power_half):
    a = mu_hat(geo2, 32, guard_bits=60)
    b = mu_hat_at_pow2(geo2, 5, guard_bits=60)
    assert abs(a.value - b.value) <= a.truncation_bound + b.truncation_bound
    a = mu_hat(power_half, 32)
    b = mu_hat_at_pow2(power_half, 5)
    assert abs(a.value - b.value) <= a.truncation_bound + b.truncation_bound


def test_pow2_leading_factor(geo2):
    tv = mu_hat_at_pow2(geo2, 0)
    assert tv.modulus >= 2 / math.pi * 0.5 - tv.truncation_bound


def test_modulus_squared_consistency(geo2):
    v = mu_hat(geo2, 100)
    sq = mu_hat_sq(geo2, 100)
    err = (2 * v.modulus + v.truncation_bound) * v.truncation_bound + sq.truncation_bound
    assert abs(v.modulus**2 - sq.value) <= err


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(SPECS), st.integers(-2**50, 2**50), st.integers(1, 1000), st.sampled_from([2, 3, 5]))
def test_bound_covers_high_precision_oracle(text, num, den, base):
    spec = parse_weight_spec(text)
    t = Fraction(num, den)
    tv = mu_hat(spec, t, guard_bits=20, base=base)
    ref = mu_hat_mp(spec, t, base=base)
    assert abs(tv.value - ref) <= tv.truncation_bound
    assert tv.modulus <= 1 + tv.truncation_bound


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(SPECS), st.integers(0, 2**60))
def test_sq_bound_covers_oracle(text, t):
    spec = parse_weight_spec(text)
    sq = mu_hat_sq(spec, t, guard_bits=12)
    assert abs(sq.value - abs(mu_hat_mp(spec, t)) ** 2) <= sq.truncation_bound


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(SPECS), st.integers(2, 2**300))
def test_integer_fast_path(text, t):
    spec = parse_weight_spec(text)
    exact = mu_hat_sq(spec, t)
    fast, err = mu_hat_sq_integer(spec, t)
    assert abs(fast - exact.value) <= err + exact.truncation_bound
    tv = abs_mu_hat_integer(spec, t)
    assert abs(tv.value**2 - fast) <= 1e-15


def test_fast_path_large_power_of_three(geo2):
    t = 3**4000
    exact = mu_hat_sq(geo2, t)
    fast, err = mu_hat_sq_integer(geo2, t)
    assert abs(fast - exact.value) <= err + exact.truncation_bound


def test_truncation_index_and_horizon():
    assert truncation_index(100, 40) == 7 + 40
    assert truncation_index(Fraction(1, 3), 10) == 10
    with pytest.raises(RangeViolation):
        truncation_index(2**(1 << 23), 40)
    assert tail_bound(0, 5) == 0


@given(st.integers(1, 2**40), st.integers(1, 30))
def test_more_guard_bits_shrinks_tail(t, g):
    assert tail_bound(t, truncation_index(t, g + 5)) <= tail_bound(t, truncation_index(t, g))
