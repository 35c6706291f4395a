import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cointoss import PrecisionExhausted, PreconditionViolation, eval_phi, parse_weight_spec
from cointoss.normality import (DigitStream, SamplePoint, binary_to_base, block_frequency,
                                cassels_check, cassels_string, del_partial_sums,
                                long_division_digits, normality_tests, orbit, regular_pair_factor,
                                regular_pairs, sample_point, star_discrepancy, two_adic_split,
                                weyl_sum, weyl_valid_length)


# -- sampling --------------------------------------------------------------------

def test_point_mass_samples_zero(near_one):
    assert sample_point(near_one, 100, seed=9).digits.sum() == 0


def test_sampling_deterministic_and_prefix_stable(geo2):
    a = sample_point(geo2, 500, seed=11)
    assert np.array_equal(a.digits, sample_point(geo2, 500, seed=11).digits)
    assert np.array_equal(a.digits[:100], sample_point(geo2, 100, seed=11).digits)
    assert not np.array_equal(a.digits, sample_point(geo2, 500, seed=12).digits)


def test_sample_numerator_matches_digits(geo2):
    p = sample_point(geo2, 77, seed=1)
    assert p.numerator == int("".join(map(str, p.digits)), 2)
    assert p.value() == Fraction(p.numerator, 2**77)


def test_marginal_law(geo2):
    seeds = 10_000
    digits = np.array([sample_point(geo2, 10, s).digits for s in range(seeds)])
    for n in (1, 2, 3, 10):
        p = 0.5 * (1 - eval_phi(geo2, n))
        sigma = math.sqrt(p * (1 - p) / seeds)
        assert abs(digits[:, n - 1].mean() - p) <= 4 * sigma


# -- base conversion -------------------------------------------------------------

def test_exact_conversions():
    assert binary_to_base(Fraction(1, 2), 3, 20).digits.tolist() == [1] * 20
    assert binary_to_base(Fraction(3, 4), 3, 8).digits.tolist() == [2, 0] * 4
    assert binary_to_base(Fraction(5, 7), 16, 12).to_text() == "b6db6db6db6d"


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.integers(3, 36), st.integers(1, 400))
def test_certified_digits_match_long_division(seed, b, L):
    p = sample_point(parse_weight_spec("power:0.5"), L, seed)
    try:
        stream = binary_to_base(p, b, 10**6)
    except PrecisionExhausted:
        # the whole interval must straddle a first-digit boundary
        lo, hi = p.value(), p.value() + Fraction(1, 2**L)
        assert math.floor(lo * b) != math.floor((hi - Fraction(1, 2**(L + 10))) * b)
        return
    n = stream.certified_length
    assert stream.digits.tolist() == long_division_digits(p.numerator, 2**L, b, n)
    # the top of the interval agrees too, so no cell boundary is straddled
    top = p.numerator * 2**10 + 2**10 - 1
    assert stream.digits.tolist() == long_division_digits(top, 2 ** (L + 10), b, n)
    assert n <= L * math.log(2, b) + 2


def test_first_digit_ambiguous():
    # [1/2, 1) straddles 2/3
    with pytest.raises(PrecisionExhausted):
        binary_to_base(SamplePoint(0, np.array([1], dtype=np.uint8)), 3, 5)


# -- block frequency -------------------------------------------------------------

def test_block_frequency_examples():
    alternating = DigitStream(2, np.array([0, 1] * 500, dtype=np.uint8))
    assert block_frequency(alternating, 1).chi_square == pytest.approx(0.0)
    zeros = DigitStream(2, np.zeros(1000, dtype=np.uint8))
    assert block_frequency(zeros, 1).chi_square == pytest.approx(1000.0)
    assert not block_frequency(zeros, 1).passed
    with pytest.raises(PreconditionViolation):
        block_frequency(DigitStream(3, np.zeros(50, dtype=np.uint8)), 2)


def test_block_frequency_threshold():
    bf = block_frequency(DigitStream(2, np.array([0, 1] * 500, dtype=np.uint8)), 3)
    assert bf.threshold == pytest.approx(24.321886347856854, rel=1e-12)  # chi2(7) 99.9% quantile


# -- Weyl sums and discrepancy --------------------------------------------------

def test_weyl_examples():
    assert weyl_sum(Fraction(0), 3, 1, 50).value == 1
    ws = weyl_sum(Fraction(1, 3), 2, 1, 64)
    assert ws.value.real == pytest.approx(-0.5) and abs(ws.value.imag) < 1e-15


@given(st.integers(2, 500), st.integers(2, 10), st.integers(1, 60))
def test_orbit_exact(q, b, N):
    if math.gcd(q, b) != 1:
        return
    x = Fraction(1, q)
    expected = [(pow(b, n, q) % q) / q for n in range(N)]
    assert orbit(x, b, N).tolist() == expected
    order = next(k for k in range(1, q + 1) if pow(b, k, q) == 1 % q)
    values = orbit(x, b, N + order)
    assert values[order:].tolist() == values[:N].tolist()


def test_weyl_validity_guard(geo2):
    p = sample_point(geo2, 200, seed=3)
    assert weyl_valid_length(200, 2, 1, 1000) == 181
    ws = weyl_sum(p, 2, 1, 1000)
    assert not ws.valid and ws.n_used == 181
    assert weyl_sum(p, 2, 1, 100).valid


def test_star_discrepancy_examples():
    assert star_discrepancy([0.0]) == 1.0
    N = 64
    assert star_discrepancy([(2 * i - 1) / (2 * N) for i in range(1, N + 1)]) == pytest.approx(1 / (2 * N))


def test_orbit_discrepancy_of_samples(geo2):
    passes = sum(star_discrepancy(orbit(sample_point(geo2, 1 << 15, s), 3, 1024)) <= 0.08
                 for s in range(20))
    assert passes >= 18


# -- DEL -------------------------------------------------------------------------

def test_del_point_mass(near_one):
    diag = del_partial_sums(near_one, 1, 3, 256)
    assert diag.sums[-1] == pytest.approx(256, rel=1e-6)
    assert diag.fitted_exponent == pytest.approx(1.0, abs=1e-6)


def test_del_base_two(geo2):
    assert del_partial_sums(geo2, 1, 2, 1 << 10).fitted_exponent < 1


def test_del_moduli_agree_with_exact_path(geo2):
    from cointoss import mu_hat
    diag = del_partial_sums(geo2, 1, 3, 40)
    for n in (0, 5, 39):
        tv = mu_hat(geo2, 3**n)
        assert abs(diag.moduli[n] - tv.modulus) <= diag.bounds[n] + tv.truncation_bound


# -- Cassels and regular pairs ---------------------------------------------------

def test_two_adic_split_examples():
    assert two_adic_split(12) == (3, 2, None)
    assert two_adic_split(5) == (5, 0, 2)
    assert two_adic_split(9) == (9, 0, 3)


def test_cassels_five():
    residues = [pow(5, n, 32) for n in range(8)]
    assert residues == [1, 5, 25, 29, 17, 21, 9, 13]
    strings = [cassels_string(1, 5, n, 2, 3) for n in range(8)]
    assert strings == ["000", "100", "011", "111", "001", "101", "010", "110"]
    assert cassels_check(1, 5, 3).passed


def test_cassels_preconditions():
    with pytest.raises(PreconditionViolation):
        cassels_check(1, 3, 4)
    with pytest.raises(PreconditionViolation):
        cassels_check(2, 5, 4)
    with pytest.raises(PreconditionViolation):
        cassels_check(1, 6, 4)
    assert all(cassels_check(1, 9, r).passed for r in range(1, 13))


@pytest.mark.parametrize("r", range(1, 11))
def test_cassels_h3_b5(r):
    assert cassels_check(3, 5, r).passed


def test_regular_pair_examples():
    assert regular_pairs("0101", 0.1)[0] == 3
    assert regular_pairs("0000", 0.2) == (0, "CaseII")
    assert regular_pairs("10", 0.2) == (1, "CaseI")
    with pytest.raises(PreconditionViolation):
        regular_pairs("01", 0.3)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(["geo:2", "power:0.5", "logpow:1"]), st.sampled_from([1, 3, 5]),
       st.sampled_from([5, 9, 13, 17]), st.integers(0, 300), st.integers(0, 40))
def test_regular_pair_contracts_factor(text, h, b, n, k):
    t = h * b**n
    if (t >> k & 1) == (t >> (k + 1) & 1):
        return
    value, ceiling = regular_pair_factor(parse_weight_spec(text), h, b, n, k)
    assert value <= ceiling + 1e-15


# -- battery ---------------------------------------------------------------------

def test_battery_shape(geo2):
    result = normality_tests(geo2, seed=0, L=1 << 13)
    names = [t["name"] for t in result.tests]
    assert names == ["base2_block1_chi2", "base2_block2_chi2", "base2_block3_chi2",
                     "base3_block1_chi2", "weyl_b2_h1", "weyl_b3_h1"]
    assert all(set(t) == {"name", "statistic", "threshold", "pass"} for t in result.tests)
