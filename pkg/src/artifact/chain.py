"""Linear arrays of microtraps: site coefficients and pairwise gate phases.

With N ions on a lattice of spacing d along the trap axis, each ion sees
the summed Coulomb field of all the others.  To the same quadratic order
used for the two-ion model this does three things per site i:

  * stiffens the axial frequency, w_i = w sqrt(1 + eps eta_i),
  * shifts the equilibrium position by x_tilde_i = (d/2) eps eta_i' /
    (1 + eps eta_i),
  * adds a state-independent energy offset epsilon_i (reported in units
    of m w^2 / 2, hence m^2).

eta_i and eta_i' are lattice sums of 1/|i-j|^3 and (i-j)/|i-j|^3 over the
other sites.  Both have closed forms in polygamma functions of integer
argument, which this module evaluates and verifies against the direct
finite sums on every call.  They are bounded by zeta(3) and pi^2/12: the
interior of a long chain approaches the first, the edge ions the second.

A pushed pair (i, j) then accumulates the conditional phase

    sqrt(pi/8) xi^2 eps w tau / (|i-j|^3 (1+eps eta_i)(1+eps eta_j))

to first order in the inter-well coupling, i.e. the two-ion classical
phase diluted by the inverse cube of the site distance and corrected by
the site stiffenings.  The phase carries no dependence on any ion's
motional quantum numbers at this order; that is a structural feature of
the formula (the numbers n never enter), not a numerical coincidence.

Site indices in this module are 0-based; trap centers sit at (i+1) d so
the geometry matches a chain occupying sites 1..N of an infinite lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import polygamma

from .classical import theta_cl
from .errors import DomainError, NumericIntegrityError
from .model import ForcePulse, TrapModel
from .quantum import _window, phi_of_omega
from .specfn import APERY

__all__ = [
    "ETA_BOUND",
    "ETA_PRIME_BOUND",
    "ChainConfig",
    "ChainCoefficients",
    "ChainPhaseTable",
    "PairPhase",
    "chain_coefficients",
    "chain_phase_table",
    "pair_phase",
]

ETA_BOUND = APERY
ETA_PRIME_BOUND = math.pi**2 / 12.0

# Closed forms and direct sums are independent routes to the same lattice
# sums; disagreement beyond accumulated rounding means one of them was
# transcribed wrong.
_CROSS_CHECK_TOL = 1e-12


def _prefix_power_sums(n_max, power):
    """S_m = sum_{k=1}^m k^-power for m = 0..n_max (S_0 = 0)."""
    out = np.zeros(n_max + 1)
    if n_max > 0:
        np.cumsum(np.arange(1, n_max + 1, dtype=float) ** -power, out=out[1:])
    return out


def _eta_closed(site, n_ions):
    """eta at 1-based site index via the polygamma reduction."""
    return 0.25 * (
        polygamma(2, site) + polygamma(2, n_ions + 1 - site)
    ) + APERY


def _eta_prime_closed(site, n_ions):
    """eta' at 1-based site index via the polygamma reduction."""
    return 0.5 * (polygamma(1, n_ions + 1 - site) - polygamma(1, site))


@dataclass(frozen=True)
class ChainCoefficients:
    """Per-site lattice coefficients of an N-ion chain.

    eta, eta_prime are dimensionless; omega_i is in rad/s, x_tilde in m,
    epsilon_i in m^2 (energy offsets in units of m w^2 / 2).  Arrays are
    read-only views indexed by 0-based site.
    """

    n_ions: int
    eta: np.ndarray
    eta_prime: np.ndarray
    omega_i: np.ndarray
    x_tilde: np.ndarray
    epsilon_i: np.ndarray

    def validate(self, tol=1e-14):
        """Check the reflection symmetries and analytic bounds.

        eta must be symmetric and eta' antisymmetric under reversal of the
        chain, and both must respect their infinite-chain bounds zeta(3)
        and pi^2/12.  Raises NumericIntegrityError on violation.
        """
        if np.max(np.abs(self.eta - self.eta[::-1])) > tol:
            raise NumericIntegrityError(
                "chain coefficients: eta not reflection-symmetric"
            )
        if np.max(np.abs(self.eta_prime + self.eta_prime[::-1])) > tol:
            raise NumericIntegrityError(
                "chain coefficients: eta' not reflection-antisymmetric"
            )
        slack = 1.0 + 1e-15
        if np.max(np.abs(self.eta)) > ETA_BOUND * slack:
            raise NumericIntegrityError(
                "chain coefficients: |eta| exceeds zeta(3)"
            )
        if np.max(np.abs(self.eta_prime)) > ETA_PRIME_BOUND * slack:
            raise NumericIntegrityError(
                "chain coefficients: |eta'| exceeds pi^2/12"
            )
        return self


def chain_coefficients(model, n_ions):
    """Site frequencies, shifts, and offsets for an n_ions chain.

    eta and eta' are computed twice, from the polygamma closed forms and
    from the direct finite sums, and the two routes must agree to 1e-12;
    otherwise NumericIntegrityError is raised.  The returned coefficients
    are validated for reflection symmetry and bounds.
    """
    n = int(n_ions)
    if n != n_ions or n < 2:
        raise DomainError("chain_coefficients: n_ions must be an integer >= 2")

    site = np.arange(1, n + 1)
    eta = _eta_closed(site, n)
    eta_prime = _eta_prime_closed(site, n)

    s3 = _prefix_power_sums(n - 1, 3)
    s2 = _prefix_power_sums(n - 1, 2)
    eta_direct = 0.5 * (s3[site - 1] + s3[n - site])
    eta_prime_direct = 0.5 * (s2[site - 1] - s2[n - site])
    drift = max(
        np.max(np.abs(eta - eta_direct)),
        np.max(np.abs(eta_prime - eta_prime_direct)),
    )
    if drift > _CROSS_CHECK_TOL:
        raise NumericIntegrityError(
            "chain_coefficients: polygamma and direct-sum routes disagree "
            "by %.3e" % drift
        )

    eps = model.epsilon
    stiffening = 1.0 + eps * eta
    omega_i = model.omega * np.sqrt(stiffening)
    x_tilde = 0.5 * model.d * eps * eta_prime / stiffening

    s1 = _prefix_power_sums(n - 1, 1)
    epsilon_i = stiffening * x_tilde**2 - 0.5 * eps * model.d**2 * s1[n - site]

    for array in (eta, eta_prime, omega_i, x_tilde, epsilon_i):
        array.flags.writeable = False
    return ChainCoefficients(
        n_ions=n,
        eta=eta,
        eta_prime=eta_prime,
        omega_i=omega_i,
        x_tilde=x_tilde,
        epsilon_i=epsilon_i,
    ).validate()


class PairPhase(NamedTuple):
    """Conditional phase of one pushed pair: the full form with the
    site-stiffening denominators, and its leading theta_cl / |i-j|^3
    approximation."""

    full: float
    leading: float

    def __float__(self):
        return self.full


def pair_phase(model, pulse, i, j, n_ions=None, alpha_i=1, alpha_j=1):
    """Conditional phase between the ions at 0-based sites i and j.

    Both ions must be pushed (alpha = 1) for a nonzero result.  n_ions
    fixes the chain length entering the site stiffenings; it defaults to
    the shortest chain containing both sites.  i = j is rejected: an ion
    has no pair phase with itself.
    """
    i = int(i)
    j = int(j)
    if i < 0 or j < 0:
        raise DomainError("pair_phase: site indices must be >= 0")
    if i == j:
        raise DomainError("pair_phase: sites must differ")
    if alpha_i not in (0, 1) or alpha_j not in (0, 1):
        raise DomainError("pair_phase: alpha_i, alpha_j must be 0 or 1")
    if n_ions is None:
        n_ions = max(i, j) + 1
    n = int(n_ions)
    if n < max(i, j) + 1 or n < 2:
        raise DomainError("pair_phase: n_ions must cover both sites")

    if alpha_i * alpha_j == 0:
        return PairPhase(0.0, 0.0)

    falloff = float(abs(i - j)) ** 3
    leading = theta_cl(model, pulse) / falloff
    eps = model.epsilon
    stiff_i = 1.0 + eps * _eta_closed(i + 1, n)
    stiff_j = 1.0 + eps * _eta_closed(j + 1, n)
    full = (
        math.sqrt(math.pi / 8.0)
        * pulse.xi**2
        * eps
        * model.omega
        * pulse.tau
        / (falloff * stiff_i * stiff_j)
    )
    return PairPhase(full, leading)


@dataclass(frozen=True)
class ChainConfig:
    """Joint state of an N-ion chain: internal qubit values alpha_i in
    {0, 1} and motional occupation triples (n_x, n_y, n_z) per ion."""

    n_ions: int
    internal: tuple
    motional: tuple

    def __post_init__(self):
        n = int(self.n_ions)
        if n != self.n_ions or n < 2:
            raise DomainError("ChainConfig: n_ions must be an integer >= 2")
        internal = tuple(int(a) for a in self.internal)
        motional = tuple(
            tuple(int(q) for q in triple) for triple in self.motional
        )
        if len(internal) != n or len(motional) != n:
            raise DomainError(
                "ChainConfig: internal and motional must have n_ions entries"
            )
        if any(a not in (0, 1) for a in internal):
            raise DomainError("ChainConfig: internal values must be 0 or 1")
        for triple in motional:
            if len(triple) != 3 or any(q < 0 for q in triple):
                raise DomainError(
                    "ChainConfig: motional entries must be triples of "
                    "non-negative integers"
                )
        object.__setattr__(self, "n_ions", n)
        object.__setattr__(self, "internal", internal)
        object.__setattr__(self, "motional", motional)

    @classmethod
    def uniform(cls, n_ions, internal=1, motional=(0, 0, 0)):
        """Chain with every ion in the same internal and motional state."""
        return cls(
            n_ions=n_ions,
            internal=(internal,) * n_ions,
            motional=(tuple(motional),) * n_ions,
        )


@dataclass(frozen=True)
class ChainPhaseTable:
    """Phases accumulated by a chain over one pulse window.

    single[i] is the one-ion phase (driven-mode phase at the site
    frequency, the linear push phase from the trap-center offset, and the
    kinetic phase of the occupied levels).  pairs[i, j] is the full-form
    conditional phase of the unordered pair, stored symmetrically with a
    zero diagonal; pairs_leading holds the theta_cl / |i-j|^3 form.
    positions are the trap centers in meters.
    """

    config: ChainConfig
    coefficients: ChainCoefficients
    positions: np.ndarray
    single: np.ndarray
    pairs: np.ndarray
    pairs_leading: np.ndarray

    def conditional_total(self, leading=False):
        """Sum of pair phases over unordered pairs."""
        matrix = self.pairs_leading if leading else self.pairs
        return float(np.sum(np.triu(matrix, k=1)))


def chain_phase_table(model, pulse, config, t0=None, t=None):
    """Single-ion phases and the pairwise conditional-phase matrix.

    The single-ion phase uses the driven-mode phase evaluated at the
    stiffened site frequency, so neighbors of an occupied region detune
    slightly from the isolated-trap value; the pair matrix uses the full
    form with both site stiffenings.  The epsilon_i offsets are carried in
    the coefficients but contribute no conditional phase (they do not
    depend on the internal state) and are left out of the table.
    """
    if not isinstance(config, ChainConfig):
        raise DomainError("chain_phase_table: config must be a ChainConfig")
    t0, t = _window(pulse, t0, t)
    span = t - t0
    n = config.n_ions
    coeffs = chain_coefficients(model, n)

    alpha = np.array(config.internal, dtype=float)
    occ = np.array(config.motional, dtype=float)
    positions = model.d * np.arange(1, n + 1, dtype=float)

    single = np.empty(n)
    area_phase = (
        math.sqrt(math.pi) * model.omega * pulse.tau * pulse.xi / model.a_omega
    )
    for k in range(n):
        driven = 0.0
        if alpha[k]:
            driven = pulse.xi**2 * phi_of_omega(
                model, pulse, coeffs.omega_i[k], t0, t
            ) + area_phase * positions[k]
        kinetic = (
            occ[k, 0] * coeffs.omega_i[k] + (occ[k, 1] + occ[k, 2]) * model.omega
        ) * span
        single[k] = driven - kinetic

    site = np.arange(n, dtype=float)
    distance = np.abs(site[:, None] - site[None, :])
    falloff = np.zeros_like(distance)
    off_diagonal = distance > 0.0
    falloff[off_diagonal] = distance[off_diagonal] ** -3.0
    pushed_pair = alpha[:, None] * alpha[None, :]

    stiffening = 1.0 + model.epsilon * coeffs.eta
    pairs = (
        math.sqrt(math.pi / 8.0)
        * pulse.xi**2
        * model.epsilon
        * model.omega
        * pulse.tau
        * pushed_pair
        * falloff
        / (stiffening[:, None] * stiffening[None, :])
    )
    pairs_leading = theta_cl(model, pulse) * pushed_pair * falloff

    for array in (positions, single, pairs, pairs_leading):
        array.flags.writeable = False
    return ChainPhaseTable(
        config=config,
        coefficients=coeffs,
        positions=positions,
        single=single,
        pairs=pairs,
        pairs_leading=pairs_leading,
    )
