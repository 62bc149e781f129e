"""Special functions used by the gate-phase machinery.

The heavy lifter is the error function of a complex argument with a fused
exponential prescaling,

    exp_scaled_erf(z, s) = e^s Erf(z),

needed because the oscillator kick integrals evaluate Erf at arguments
z = t/tau - i W tau/2 whose magnitude grows like e^{(W tau/2)^2} while the
physics carries a compensating e^{-(W tau/2)^2}.  Passing s = -(W tau/2)^2
keeps every intermediate bounded: the scaled remainder obeys
|e^{s - z^2}| = e^{s + Im(z)^2 - Re(z)^2} = e^{-(t/tau)^2} <= 1.

Everything is built on the Faddeeva function w(z) via

    Erf(z) = 1 - e^{-z^2} w(iz),

with an odd/conjugate quadrant reduction so w is only evaluated where it is
numerically stable, and a Maclaurin series near the origin where the
subtraction from 1 would lose digits.

The remaining routines are small exact helpers: Laguerre-recurrence values of
the confluent hypergeometric M(-n, 1, z), the polylogarithm Li_{1/2}, integer
polygamma values psi^(1), psi^(2) through their finite zeta reductions, and
harmonic numbers.
"""

import math

import numpy as np
from scipy.special import wofz

from .errors import DomainError, NonConvergenceError, NumericIntegrityError

__all__ = [
    "APERY",
    "erf_complex",
    "exp_scaled_erf",
    "confluent_m_neg",
    "polylog_half",
    "polygamma_int",
    "harmonic_number",
]

# zeta(3), to the last double digit
APERY = 1.2020569031595943

# largest exponent exp() can take without overflowing a double
_EXP_MAX = 709.0

# Maclaurin coefficients of Erf: (2/sqrt(pi)) sum_k c_k z^(2k+1),
# c_k = (-1)^k / (k! (2k+1)).  26 terms give < 1e-25 relative truncation
# at |z| = 0.5, far below double roundoff.
_SERIES_K = 26
_SERIES_C = np.array(
    [(-1.0) ** k / (math.factorial(k) * (2 * k + 1)) for k in range(_SERIES_K)]
)
_TWO_OVER_SQRTPI = 2.0 / math.sqrt(math.pi)

# radius below which the series branch is used
_SERIES_RADIUS = 0.5


def _erf_series(z):
    """Maclaurin series of Erf(z), valid and accurate for |z| <= 0.5."""
    z2 = z * z
    acc = np.full_like(z, _SERIES_C[-1])
    for k in range(_SERIES_K - 2, -1, -1):
        acc = acc * z2 + _SERIES_C[k]
    return _TWO_OVER_SQRTPI * z * acc


def exp_scaled_erf(z, s):
    """e^s Erf(z) for complex z and real s, computed without overflow.

    The two pieces e^s and e^{s - z^2} w(iz) are each evaluated in their own
    scale, so the product stays representable whenever the true value is.
    Raises NumericIntegrityError when an intermediate would exceed double
    range (s > 709 or s + Im(z)^2 - Re(z)^2 > 709).

    Accepts scalars or arrays (broadcast together).
    """
    z_arr = np.asarray(z, dtype=complex)
    s_arr = np.asarray(s, dtype=float)
    z_b, s_b = np.broadcast_arrays(z_arr, s_arr)

    # reduce to Re z >= 0 (Erf is odd) and Im z >= 0 (Erf commutes with conj)
    sign = np.where(z_b.real < 0.0, -1.0, 1.0)
    zr = z_b * sign
    flip = zr.imag < 0.0
    zu = np.where(flip, np.conj(zr), zr)

    expo = s_b + zu.imag**2 - zu.real**2
    if np.any(s_b > _EXP_MAX) or np.any(expo > _EXP_MAX):
        raise NumericIntegrityError(
            "exp_scaled_erf: scaled magnitude exceeds double range "
            "(max exponent %.3g)" % float(np.max(np.maximum(expo, s_b)))
        )

    out = np.empty_like(zu)
    small = np.abs(zu) <= _SERIES_RADIUS
    if np.any(small):
        out[small] = np.exp(s_b[small]) * _erf_series(zu[small])
    big = ~small
    if np.any(big):
        zb = zu[big]
        # w(i z) is stable for Im(iz) = Re(z) >= 0, guaranteed by the reduction
        out[big] = np.exp(s_b[big]) - np.exp(s_b[big] - zb * zb) * wofz(1j * zb)

    out = np.where(flip, np.conj(out), out)
    out = out * sign
    if np.isscalar(z) and np.isscalar(s):
        return complex(out)
    return out


def erf_complex(z):
    """Erf(z) for complex z.

    Validated against arbitrary-precision references to <= 1e-12 relative
    error on the strip |Im z| <= 50 wherever the value is representable in
    doubles; outside double range (Im(z)^2 - Re(z)^2 > ~709) it raises
    NumericIntegrityError rather than returning inf.
    """
    return exp_scaled_erf(z, 0.0)


def confluent_m_neg(n, z):
    """M(-n, 1, z), the confluent hypergeometric function at negative integer
    first argument, equal to the Laguerre polynomial L_n(z).

    Evaluated by the stable three-term recurrence
        (k+1) L_{k+1} = (2k+1-z) L_k - k L_{k-1},
    which preserves M(-n, 1, 0) = 1 exactly for every n.
    """
    if not isinstance(n, (int, np.integer)) or n < 0:
        raise DomainError("confluent_m_neg: n must be a non-negative integer")
    z = float(z)
    if n == 0:
        return 1.0
    prev = 1.0
    cur = 1.0 - z
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 - z) * cur - k * prev) / (k + 1)
    return cur


def polylog_half(z, max_terms=10_000_000):
    """Li_{1/2}(z) = sum_{k>=1} z^k / sqrt(k) for real |z| < 1.

    Direct summation, terminated once |term| < 1e-15 |partial sum|.
    """
    z = float(z)
    if not abs(z) < 1.0:
        raise DomainError("polylog_half: requires |z| < 1")
    if z == 0.0:
        return 0.0
    total = 0.0
    power = 1.0
    for k in range(1, max_terms + 1):
        power *= z
        term = power / math.sqrt(k)
        total += term
        if abs(term) < 1e-15 * abs(total):
            return total
    raise NonConvergenceError("polylog_half: series did not converge")


def polygamma_int(order, n):
    """psi^(order)(n) at positive integer n for order 1 or 2.

    Uses the exact finite reductions
        psi^(1)(n) = pi^2/6 - sum_{k<n} 1/k^2
        psi^(2)(n) = -2 zeta(3) + 2 sum_{k<n} 1/k^3
    """
    if order not in (1, 2):
        raise DomainError("polygamma_int: order must be 1 or 2")
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DomainError("polygamma_int: n must be a positive integer")
    if order == 1:
        return math.pi**2 / 6.0 - sum(1.0 / k**2 for k in range(1, n))
    return -2.0 * APERY + 2.0 * sum(1.0 / k**3 for k in range(1, n))


def harmonic_number(n):
    """H_n = sum_{k=1}^{n} 1/k, with H_0 = 0."""
    if not isinstance(n, (int, np.integer)) or n < 0:
        raise DomainError("harmonic_number: n must be a non-negative integer")
    return sum(1.0 / k for k in range(1, n + 1))
