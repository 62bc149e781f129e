"""Trap geometry, ion species, and the state-dependent force pulse.

Two ions sit in separate harmonic wells of frequency w (axial direction x)
whose centers are a distance d0 apart.  Their Coulomb repulsion pushes the
equilibrium separation out to d > d0 and mixes into the normal modes through
the single dimensionless coupling

    epsilon = q^2 / (pi eps0 m w^2 d^3),

evaluated at the actual equilibrium separation d.  The relative-coordinate
potential V(r) = mu w^2 (r - d0)^2 / 2 + lam / r (mu = m/2 the reduced mass,
lam = q^2 / 4 pi eps0) has its minimum displaced by delta_x = d - d0, which
solves mu w^2 delta_x = lam / (delta_x + d0)^2 and has the closed form

    delta_x = (4 d0 / 3) sinh^2{ (1/6) ln[eta + 1 + sqrt(eta (eta + 2))] },
    eta = lam / (2 mu w^2 (d0/3)^3).

Harmonizing the Coulomb term around d yields the mode frequencies

    nu       = w sqrt(1 + epsilon)      (axial stretch)
    nu_perp  = w sqrt(1 - epsilon/2)    (transverse relative, twofold)
    w~       = w sqrt(1 + epsilon/2)    (single-well axial, curvature at d)

which satisfy the trace identity nu^2 + 2 nu_perp^2 = 3 w^2 exactly.

The qubit-state-dependent force is a Gaussian pulse F(t) = xi e^{-(t/tau)^2}
(dimensionless amplitude xi in units of hbar w / a_w), displacing the well of
an ion in state alpha by alpha a_w F(t).
"""

import math
import warnings
from dataclasses import dataclass

from .errors import DomainError, NumericIntegrityError

__all__ = [
    "HBAR",
    "Q_E",
    "EPS0",
    "K_B",
    "ATOMIC_MASS",
    "IonSpecies",
    "CA40",
    "TrapModel",
    "ForcePulse",
    "build_trap_model",
    "force_profile",
    "displacement",
]

# CODATA 2018
HBAR = 1.054571817e-34      # J s
Q_E = 1.602176634e-19       # C
EPS0 = 8.8541878128e-12     # F / m
K_B = 1.380649e-23          # J / K
ATOMIC_MASS = 1.66053906660e-27  # kg

# Coulomb constant q^2 / 4 pi eps0
_LAM = Q_E**2 / (4.0 * math.pi * EPS0)


@dataclass(frozen=True)
class IonSpecies:
    """An ion species, identified by name and mass in atomic units."""

    name: str
    mass_u: float

    @property
    def mass(self):
        """Mass in kg."""
        return self.mass_u * ATOMIC_MASS


CA40 = IonSpecies("40Ca+", 39.9626)


@dataclass(frozen=True)
class TrapModel:
    """All derived trap quantities for one (species, w, d0) working point.

    Frequencies are angular (rad/s), lengths in meters.  `equilibrium`
    records which separation convention produced `d`:

      exact   d = d0 + delta_x with delta_x the exact root (default)
      linear  d = d0 (1 + epsilon(d0)/2), first order in the coupling
      bare    d = d0, Coulomb displacement ignored

    epsilon is always evaluated at the stored d; epsilon_bare (at d0) is
    kept as a diagnostic of how much the convention matters.
    """

    species: IonSpecies
    omega: float
    d0: float
    a_omega: float
    epsilon: float
    delta_x: float
    d: float
    nu: float
    nu_perp: float
    omega_tilde: float
    a_nu: float
    a_omega_tilde: float
    epsilon_bare: float
    equilibrium: str

    @property
    def mass(self):
        return self.species.mass

    @property
    def mu(self):
        """Reduced mass of the ion pair."""
        return 0.5 * self.species.mass

    @property
    def lam(self):
        """Coulomb constant q^2 / 4 pi eps0."""
        return _LAM

    @property
    def offset_energy(self):
        """Static energy offset lam/d + mu w^2 delta_x^2 / 2 of the
        displaced equilibrium (global phase only, never conditional)."""
        return _LAM / self.d + 0.5 * self.mu * self.omega**2 * self.delta_x**2

    def validate(self, tol=1e-12):
        """Re-derive every field from (species, omega, d0, equilibrium) and
        check self-consistency.  Raises NumericIntegrityError on drift."""
        rebuilt = build_trap_model(
            self.species, self.omega, self.d0, equilibrium=self.equilibrium
        )
        for name in (
            "a_omega",
            "epsilon",
            "delta_x",
            "d",
            "nu",
            "nu_perp",
            "omega_tilde",
            "a_nu",
            "a_omega_tilde",
            "epsilon_bare",
        ):
            a = getattr(self, name)
            b = getattr(rebuilt, name)
            if abs(a - b) > tol * max(abs(a), abs(b)):
                raise NumericIntegrityError(
                    "TrapModel.validate: field %r drifted (%r vs %r)"
                    % (name, a, b)
                )
        trace = self.nu**2 + 2.0 * self.nu_perp**2
        if abs(trace - 3.0 * self.omega**2) > tol * 3.0 * self.omega**2:
            raise NumericIntegrityError(
                "TrapModel.validate: nu^2 + 2 nu_perp^2 != 3 w^2"
            )
        return self


def _epsilon_at(mass, omega, separation):
    return Q_E**2 / (math.pi * EPS0 * mass * omega**2 * separation**3)


def _exact_delta_x(mu, omega, d0):
    """Exact root of mu w^2 x = lam / (x + d0)^2, closed hyperbolic form."""
    eta = _LAM / (2.0 * mu * omega**2 * (d0 / 3.0) ** 3)
    arg = eta + 1.0 + math.sqrt(eta * (eta + 2.0))
    return (4.0 * d0 / 3.0) * math.sinh(math.log(arg) / 6.0) ** 2


def build_trap_model(species, omega, d0, equilibrium="exact"):
    """Construct a TrapModel for the given species, well frequency w (rad/s)
    and well separation d0 (m).

    Raises DomainError if the resulting coupling epsilon >= 1 (the stretch
    mode would soften away: confinement too weak for this separation) and
    NumericIntegrityError if the exact equilibrium root fails its residual
    check to 1e-9 relative.
    """
    if omega <= 0.0 or d0 <= 0.0:
        raise DomainError("build_trap_model: omega and d0 must be positive")
    m = species.mass
    mu = 0.5 * m
    eps_bare = _epsilon_at(m, omega, d0)

    if equilibrium == "exact":
        delta_x = _exact_delta_x(mu, omega, d0)
        d = d0 + delta_x
        residual = mu * omega**2 * delta_x - _LAM / d**2
        if abs(residual) > 1e-9 * mu * omega**2 * delta_x:
            raise NumericIntegrityError(
                "build_trap_model: equilibrium root residual %.3e" % residual
            )
    elif equilibrium == "linear":
        delta_x = 0.5 * eps_bare * d0
        d = d0 + delta_x
    elif equilibrium == "bare":
        delta_x = 0.0
        d = d0
    else:
        raise DomainError(
            "build_trap_model: equilibrium must be exact, linear, or bare"
        )

    eps = _epsilon_at(m, omega, d)
    if not eps < 1.0:
        raise DomainError(
            "build_trap_model: epsilon = %.4f >= 1, confinement too weak "
            "for this separation" % eps
        )

    nu = omega * math.sqrt(1.0 + eps)
    nu_perp = omega * math.sqrt(1.0 - 0.5 * eps)
    omega_tilde = omega * math.sqrt(1.0 + 0.5 * eps)

    model = TrapModel(
        species=species,
        omega=omega,
        d0=d0,
        a_omega=math.sqrt(HBAR / (m * omega)),
        epsilon=eps,
        delta_x=delta_x,
        d=d,
        nu=nu,
        nu_perp=nu_perp,
        omega_tilde=omega_tilde,
        a_nu=math.sqrt(HBAR / (mu * nu)),
        a_omega_tilde=math.sqrt(HBAR / (m * omega_tilde)),
        epsilon_bare=eps_bare,
        equilibrium=equilibrium,
    )

    trace = nu**2 + 2.0 * nu_perp**2
    if abs(trace - 3.0 * omega**2) > 1e-12 * 3.0 * omega**2:
        raise NumericIntegrityError(
            "build_trap_model: mode trace identity violated"
        )
    return model


@dataclass(frozen=True)
class ForcePulse:
    """Gaussian force pulse F(t) = xi e^{-(t/tau)^2} on the window
    [t_start, t_end], with t_start < 0 < t_end.

    xi is the dimensionless peak amplitude (force in units hbar w / a_w);
    xi = 0 is allowed and means no drive, which identity checks rely on.
    tau is the 1/e half-width in seconds.  If the profile has not decayed
    to |F| < 1e-5 xi at the window edges a warning is emitted: closed-form
    results that drop boundary terms then pick up relative errors of the
    order of the edge value.
    """

    xi: float
    tau: float
    t_start: float
    t_end: float

    def __post_init__(self):
        if self.xi < 0.0 or self.tau <= 0.0:
            raise DomainError("ForcePulse: xi must be nonnegative, tau positive")
        if not (self.t_start < 0.0 < self.t_end):
            raise DomainError("ForcePulse: window must satisfy t_start < 0 < t_end")
        edge = max(
            math.exp(-((self.t_start / self.tau) ** 2)),
            math.exp(-((self.t_end / self.tau) ** 2)),
        )
        if edge >= 1e-5:
            warnings.warn(
                "ForcePulse: profile only decayed to %.3e xi at the window "
                "edge; boundary terms dropped by closed forms are of that "
                "relative size" % edge,
                stacklevel=2,
            )

    def with_tau(self, tau):
        """Same pulse shape and window with a different width."""
        return _pulse_no_warn(self.xi, tau, self.t_start, self.t_end)

    def with_window(self, t_start, t_end):
        return _pulse_no_warn(self.xi, self.tau, t_start, t_end)


def _pulse_no_warn(xi, tau, t_start, t_end):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ForcePulse(xi, tau, t_start, t_end)


def force_profile(pulse, t):
    """Dimensionless pulse profile F(t) = xi e^{-(t/tau)^2}; t may be an array."""
    import numpy as np

    u = np.asarray(t, dtype=float) / pulse.tau
    out = pulse.xi * np.exp(-(u**2))
    if np.isscalar(t):
        return float(out)
    return out


def displacement(model, pulse, alpha, t):
    """Trap-center displacement a_w alpha F(t) of an ion in qubit state
    alpha in {0, 1} (meters)."""
    return alpha * model.a_omega * force_profile(pulse, t)
