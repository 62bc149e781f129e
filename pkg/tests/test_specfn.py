"""Special-function oracles.

Every routine is checked against an independent route: mpmath at raised
precision, a literal finite sum, or a textbook recurrence driven by
hypothesis.
"""

import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.errors import DomainError, NonConvergenceError
from artifact.specfn import (
    APERY,
    confluent_m_neg,
    erf_complex,
    exp_scaled_erf,
    harmonic_number,
    polygamma_int,
    polylog_half,
)

mpmath.mp.dps = 40


# --- complex error function ------------------------------------------------

def _erf_taylor(z, terms=160):
    """Erf by its Taylor series.  The series alternates with terms that
    peak near e^{|z|^2}, so it is summed in extended precision; it is
    still an independent route (no erf call anywhere)."""
    total = mpmath.mpc(0)
    power = mpmath.mpc(z)
    factorial = mpmath.mpf(1)
    for k in range(terms):
        total += power / (factorial * (2 * k + 1))
        power *= -mpmath.mpc(z) ** 2
        factorial *= k + 1
    return complex(2 / mpmath.sqrt(mpmath.pi) * total)


@pytest.mark.parametrize(
    "z",
    [0.3, 1.0, 2.0 + 0.5j, -1.2 + 1.7j, 0.1 - 2.0j, 3.0 + 3.0j],
)
def test_erf_complex_taylor_oracle(z):
    assert erf_complex(complex(z)) == pytest.approx(_erf_taylor(complex(z)), rel=1e-13, abs=1e-14)


def test_erf_complex_mpmath_grid():
    rng = np.random.default_rng(7)
    points = rng.uniform(-4.0, 4.0, size=(40, 2))
    for x, y in points:
        z = complex(x, y)
        expected = complex(mpmath.erf(mpmath.mpc(x, y)))
        assert erf_complex(z) == pytest.approx(expected, rel=1e-12, abs=1e-13)


@given(
    st.complex_numbers(
        min_magnitude=0.0, max_magnitude=4.0, allow_nan=False, allow_infinity=False
    )
)
def test_erf_complex_symmetries(z):
    odd = erf_complex(-z)
    assert odd == pytest.approx(-erf_complex(z), rel=1e-12, abs=1e-13)
    mirrored = erf_complex(z.conjugate())
    assert mirrored == pytest.approx(erf_complex(z).conjugate(), rel=1e-12, abs=1e-13)


def test_exp_scaled_erf_matches_plain_at_zero_scale():
    for z in (0.5, 1.0 + 1.0j, -2.0 + 0.3j):
        assert exp_scaled_erf(complex(z), 0.0) == pytest.approx(
            erf_complex(complex(z)), rel=1e-14
        )


@pytest.mark.parametrize("y", [20.0, 60.0, 129.14])
def test_exp_scaled_erf_large_imaginary(y):
    """e^{-y^2} Erf(x - i y) stays finite where the unscaled factors
    overflow; mpmath at high precision is the oracle."""
    for x in (-2.0, 0.0, 1.5, 3.0):
        z = complex(x, -y)
        got = exp_scaled_erf(z, -(y * y))
        expected = complex(mpmath.exp(-(mpmath.mpf(y) ** 2)) * mpmath.erf(mpmath.mpc(x, -y)))
        assert got == pytest.approx(expected, rel=1e-11, abs=1e-300)
        assert math.isfinite(got.real) and math.isfinite(got.imag)


# --- confluent hypergeometric at negative integer order --------------------

def _laguerre_sum(n, z):
    """L_n(z) as the exact finite sum with rational binomials."""
    total = mpmath.mpf(0)
    for k in range(n + 1):
        coeff = Fraction(math.comb(n, k), math.factorial(k))
        total += (-1) ** k * mpmath.mpf(coeff.numerator) / coeff.denominator * mpmath.mpf(z) ** k
    return float(total)


@pytest.mark.parametrize("n", [0, 1, 2, 5, 17, 40])
@pytest.mark.parametrize("z", [0.0, 1e-6, 0.37, 4.0, 30.0])
def test_confluent_matches_laguerre_finite_sum(n, z):
    assert confluent_m_neg(n, z) == pytest.approx(_laguerre_sum(n, z), rel=1e-10, abs=1e-12)


@given(st.integers(min_value=0, max_value=30), st.floats(min_value=0.0, max_value=10.0))
@settings(max_examples=60)
def test_confluent_recurrence(n, z):
    """(n+1) L_{n+1} = (2n+1-z) L_n - n L_{n-1}."""
    if n == 0:
        assert confluent_m_neg(0, z) == pytest.approx(1.0, rel=1e-14)
        return
    left = (n + 1) * confluent_m_neg(n + 1, z)
    right = (2 * n + 1 - z) * confluent_m_neg(n, z) - n * confluent_m_neg(n - 1, z)
    assert left == pytest.approx(right, rel=1e-9, abs=1e-10)


def test_confluent_rejects_negative_argument_order():
    with pytest.raises(DomainError):
        confluent_m_neg(-1, 0.5)


# --- polylogarithm of order one half ----------------------------------------

@pytest.mark.parametrize("z", [0.1, 0.5, 0.9, 0.99, -0.7])
def test_polylog_half_long_sum(z):
    """Direct partial sums are the oracle; mpmath cross-checks them."""
    direct = math.fsum(z**k / math.sqrt(k) for k in range(1, 200001))
    tolerance = 1e-9 if abs(z) < 0.95 else 1e-6
    assert polylog_half(z) == pytest.approx(direct, rel=tolerance)
    assert polylog_half(z) == pytest.approx(
        float(mpmath.polylog(mpmath.mpf("0.5"), z)), rel=1e-10
    )


def test_polylog_half_domain():
    with pytest.raises(DomainError):
        polylog_half(1.0)
    with pytest.raises(DomainError):
        polylog_half(-1.5)


def test_polylog_half_small_argument_is_linear():
    assert polylog_half(1e-12) == pytest.approx(1e-12, rel=1e-6)


def test_polylog_half_respects_term_budget():
    with pytest.raises(NonConvergenceError):
        polylog_half(0.999999, max_terms=100)


# --- polygamma and harmonic numbers -----------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 10, 50, 101])
def test_polygamma_order_one_direct_sum(n):
    """psi'(n) = pi^2/6 - sum_{k<n} 1/k^2."""
    expected = math.pi**2 / 6.0 - math.fsum(1.0 / k**2 for k in range(1, n))
    assert polygamma_int(1, n) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("n", [1, 2, 3, 10, 50, 101])
def test_polygamma_order_two_direct_sum(n):
    """psi''(n) = -2 zeta(3) + 2 sum_{k<n} 1/k^3."""
    expected = -2.0 * APERY + 2.0 * math.fsum(1.0 / k**3 for k in range(1, n))
    assert polygamma_int(2, n) == pytest.approx(expected, rel=1e-12, abs=1e-13)


@given(st.integers(min_value=1, max_value=400))
@settings(max_examples=80)
def test_polygamma_recurrences(n):
    assert polygamma_int(1, n + 1) == pytest.approx(
        polygamma_int(1, n) - 1.0 / n**2, rel=1e-12
    )
    assert polygamma_int(2, n + 1) == pytest.approx(
        polygamma_int(2, n) + 2.0 / n**3, rel=1e-11, abs=1e-14
    )


def test_polygamma_rejects_unsupported_input():
    with pytest.raises(DomainError):
        polygamma_int(3, 4)
    with pytest.raises(DomainError):
        polygamma_int(1, 0)


def test_apery_constant():
    assert APERY == pytest.approx(float(mpmath.zeta(3)), rel=1e-15)


@given(st.integers(min_value=0, max_value=300))
@settings(max_examples=60)
def test_harmonic_number_exact(n):
    expected = Fraction(0)
    for k in range(1, n + 1):
        expected += Fraction(1, k)
    assert harmonic_number(n) == pytest.approx(float(expected), rel=1e-14)
