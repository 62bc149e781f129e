"""Classical model of the pulsed gate phase and its thermal statistics.

Treating the motion classically, the pushed trajectories change the Coulomb
interaction energy and the accumulated action splits by internal branch.
For ground-state (non-oscillating) ions the branch phase is an explicit
power series in the push amplitude over the separation,

    phi^{ab} = -(a - b)^2 sqrt(pi/8) xi^2 eps wt tau
               sum_{n>=1} [(a - b) xi a_wt / d]^{n-1} / sqrt(2 (n + 1)),

with wt the barycentric-corrected frequency and a_wt its oscillator length.
The conditional combination phi00 - phi01 - phi10 + phi11 keeps only even
powers and resums exactly to theta_cl Li_{1/2}(u^2)/u^2 with
u = xi a_wt / d and

    theta_cl = sqrt(pi/8) xi^2 eps wt tau,

the classical gate phase.  Residual thermal oscillation of energies E_1,
E_2 and phases wt t_1, wt t_2 perturbs each branch phase at first order in
the oscillation amplitude over d; averaging over a Boltzmann ensemble gives
the mean gate phase, and the spread of the phase fluctuation

    eps_th = (3 theta_cl / hbar wt)(a_wt / d)^2
             [E_1 + E_2 - 2 sqrt(E_1 E_2) cos(wt (t_1 - t_2)) - 2 kT]

sets the classical fidelity.  The combination E_1 + E_2 - 2 sqrt(E_1 E_2)
cos(..) is the relative-motion energy; for Boltzmann-distributed energies
and uniform phases it is itself exponentially distributed with mean 2 kT.

The fidelity of the phase-corrected gate is the thermal average of the
overlap form

    Xi(a, b) = (1 - a - b)^2 + a^2 + b^2
               + 2 a (1 - a - b) cos((kap - 1) eps_th)
               + 2 b (1 - a - b) cos((kap + 1) eps_th)
               + 2 a b cos(2 kap eps_th),

minimized over the correction weights (a, b) in the unit square, where
kap = d / (sqrt2 xi a_wt) is the ratio of the cubic to the quartic
sensitivity.  For kap <= 3 the minimum sits at a = 1 with interior b and
equals [1 + cos((3 kap - 1) eps_th)]/2; for kap > 3 it sits at the corner
(1, 1).  Suppressing the cubic term (kap -> 0) leaves the quartic-only
fidelity [1 + cos(eps_th)]/2.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import HBAR, K_B

__all__ = [
    "ClassicalInitial",
    "ThermalEnsemble",
    "SeriesSum",
    "ClassicalPhaseTable",
    "MeanGatePhase",
    "ClassicalFidelity",
    "theta_cl",
    "phi_cl_ground",
    "gate_phase_polylog",
    "delta_phi_thermal",
    "classical_phase_table",
    "mean_gate_phase",
    "kappa",
    "eps_thermal",
    "xi_overlap",
    "xi_overlap_min",
    "classical_fidelity",
]


@dataclass(frozen=True)
class ClassicalInitial:
    """Residual classical oscillation of the two ions: energies in joules
    and the times t1, t2 at which each ion passes its turning point."""

    e1: float = 0.0
    e2: float = 0.0
    t1: float = 0.0
    t2: float = 0.0

    def __post_init__(self):
        if self.e1 < 0.0 or self.e2 < 0.0:
            raise DomainError("oscillation energies must be >= 0")


@dataclass(frozen=True)
class ThermalEnsemble:
    """Boltzmann ensemble of residual motion at a given temperature.

    kt_over_hw is k_B T / (hbar wt), the mean occupation in the classical
    (equipartition) sense; both representations are kept so either can be
    specified exactly."""

    temperature: float
    kt_over_hw: float

    def __post_init__(self):
        if self.temperature < 0.0:
            raise DomainError("temperature must be >= 0")

    @classmethod
    def from_temperature(cls, model, temperature):
        if temperature < 0.0:
            raise DomainError("temperature must be >= 0")
        return cls(
            temperature=float(temperature),
            kt_over_hw=K_B * float(temperature) / (HBAR * model.omega_tilde),
        )

    @classmethod
    def from_kt(cls, model, kt_over_hw):
        if kt_over_hw < 0.0:
            raise DomainError("kT/(hbar w) must be >= 0")
        return cls(
            temperature=float(kt_over_hw) * HBAR * model.omega_tilde / K_B,
            kt_over_hw=float(kt_over_hw),
        )

    @property
    def kt(self):
        return K_B * self.temperature


def _kt_over_hw(model, ensemble):
    """Accept a ThermalEnsemble or a bare temperature in kelvin."""
    if ensemble is None:
        return 0.0
    if isinstance(ensemble, ThermalEnsemble):
        return ensemble.kt_over_hw
    t = float(ensemble)
    if t < 0.0:
        raise DomainError("temperature must be >= 0")
    return K_B * t / (HBAR * model.omega_tilde)


@dataclass(frozen=True)
class SeriesSum:
    """Value of a truncated power series together with the magnitude of the
    last term added and the number of terms, for convergence inspection."""

    value: float
    last_term: float
    terms: int

    def __float__(self):
        return self.value


def theta_cl(model, pulse):
    """Classical gate phase sqrt(pi/8) xi^2 eps wt tau (leading order in
    the push amplitude over the separation)."""
    return (
        math.sqrt(math.pi / 8.0)
        * pulse.xi**2
        * model.epsilon
        * model.omega_tilde
        * pulse.tau
    )


def phi_cl_ground(model, pulse, alpha=0, beta=0, n_max=12):
    """Classical branch phase of non-oscillating ions as the power series
    in (alpha - beta) xi a_wt / d; terms below 1e-15 of the running sum are
    dropped.  Requires xi a_wt / d < 1."""
    if alpha not in (0, 1) or beta not in (0, 1):
        raise DomainError("internal states must be 0 or 1")
    u = pulse.xi * model.a_omega_tilde / model.d
    if not u < 1.0:
        raise DomainError("phi_cl_ground: series requires xi a_wt / d < 1")
    if alpha == beta:
        return SeriesSum(value=0.0, last_term=0.0, terms=0)
    pref = -((alpha - beta) ** 2) * theta_cl(model, pulse)
    x = (alpha - beta) * u
    acc = 0.0
    term = 0.0
    n = 0
    for n in range(1, n_max + 1):
        term = x ** (n - 1) / math.sqrt(2.0 * (n + 1))
        acc += term
        if abs(term) < 1e-15 * abs(acc):
            break
    return SeriesSum(value=pref * acc, last_term=pref * term, terms=n)


def gate_phase_polylog(model, pulse):
    """Exact resummation of the conditional classical phase,
    theta_cl Li_{1/2}(u^2) / u^2 with u = xi a_wt / d."""
    from .specfn import polylog_half

    u = pulse.xi * model.a_omega_tilde / model.d
    if not u < 1.0:
        raise DomainError("gate_phase_polylog: requires xi a_wt / d < 1")
    return theta_cl(model, pulse) * polylog_half(u * u) / (u * u)


def delta_phi_thermal(model, pulse, initial, alpha=0, beta=0, cross_sign=1.0):
    """First-order phase perturbation of branch (alpha, beta) from residual
    oscillation,

        dphi = 3 (a - b) sqrt(pi/8) xi^2 eps wt tau
               [ (a_wt/d) / (sqrt2 xi) + (a - b) (a_wt/d)^2 ]
               (E1 + E2 + 2 sqrt(E1 E2) cos(wt (t1 - t2))) / (hbar wt).

    cross_sign scales the interference term (the relative-motion energy
    carries it with the opposite sign; see the fidelity routines).  Valid
    in the adiabatic regime; a pulse with wt tau < 20 triggers a warning.
    """
    if alpha not in (0, 1) or beta not in (0, 1):
        raise DomainError("internal states must be 0 or 1")
    if model.omega_tilde * pulse.tau < 20.0:
        warnings.warn(
            "delta_phi_thermal: wt tau < 20, outside the adiabatic regime "
            "the first-order form assumes",
            stacklevel=2,
        )
    s = alpha - beta
    ratio = model.a_omega_tilde / model.d
    bracket = ratio / (math.sqrt(2.0) * pulse.xi) + s * ratio * ratio
    energy = (
        initial.e1
        + initial.e2
        + cross_sign
        * 2.0
        * math.sqrt(initial.e1 * initial.e2)
        * math.cos(model.omega_tilde * (initial.t1 - initial.t2))
    )
    return (
        3.0
        * s
        * math.sqrt(math.pi / 8.0)
        * pulse.xi**2
        * model.epsilon
        * model.omega_tilde
        * pulse.tau
        * bracket
        * energy
        / (HBAR * model.omega_tilde)
    )


@dataclass(frozen=True)
class ClassicalPhaseTable:
    """2x2 classical branch phases: ground series values, the first-order
    thermal corrections, and their sum."""

    phi: np.ndarray
    ground: np.ndarray
    thermal_corr: np.ndarray

    @property
    def signed_sum(self):
        t = self.phi
        return t[0, 0] - t[0, 1] - t[1, 0] + t[1, 1]


def classical_phase_table(model, pulse, initial=None, n_max=12):
    """Assemble the classical branch-phase table, optionally with the
    first-order perturbation of a residual oscillation."""
    ground = np.array(
        [
            [float(phi_cl_ground(model, pulse, a, b, n_max)) for b in (0, 1)]
            for a in (0, 1)
        ]
    )
    if initial is None:
        corr = np.zeros((2, 2))
    else:
        corr = np.array(
            [
                [delta_phi_thermal(model, pulse, initial, a, b) for b in (0, 1)]
                for a in (0, 1)
            ]
        )
    return ClassicalPhaseTable(phi=ground + corr, ground=ground, thermal_corr=corr)


@dataclass(frozen=True)
class MeanGatePhase:
    """Thermal mean of the classical gate phase.

    quoted:    theta_cl [1 + (a_wt/d)^2 (xi^2/sqrt2 + 6 kT/(hbar wt))]
    series_consistent:
               theta_cl [1 + (a_wt/d)^2 xi^2/sqrt2] - 12 theta_cl
               (a_wt/d)^2 kT/(hbar wt)

    The two differ in the thermal term: averaging the first-order branch
    perturbation over the ensemble and taking the signed sum gives the
    -12 kT coefficient, which Monte-Carlo sampling of the table confirms;
    the quoted +6 kT form is reported alongside for reference."""

    quoted: float
    series_consistent: float

    def __float__(self):
        return self.series_consistent


def mean_gate_phase(model, pulse, ensemble=None):
    """Mean conditional phase over a Boltzmann ensemble of residual motion."""
    kt_hw = _kt_over_hw(model, ensemble)
    th = theta_cl(model, pulse)
    ratio2 = (model.a_omega_tilde / model.d) ** 2
    quoted = th * (
        1.0 + ratio2 * (pulse.xi**2 / math.sqrt(2.0) + 6.0 * kt_hw)
    )
    consistent = (
        th * (1.0 + ratio2 * pulse.xi**2 / math.sqrt(2.0))
        - 12.0 * th * ratio2 * kt_hw
    )
    return MeanGatePhase(quoted=quoted, series_consistent=consistent)


# ---------------------------------------------------------------------------
# classical fidelity


def kappa(model, pulse):
    """Sensitivity ratio kap = d / (sqrt2 xi a_wt) between the cubic
    (push-linear) and quartic thermal phase terms."""
    if pulse.xi == 0.0:
        raise DomainError("kappa: undefined for a pulse with xi = 0")
    return model.d / (math.sqrt(2.0) * pulse.xi * model.a_omega_tilde)


def eps_thermal(model, pulse, initial, ensemble=None):
    """Thermal phase fluctuation

        eps_th = (3 theta_cl / hbar wt)(a_wt/d)^2
                 [E1 + E2 - 2 sqrt(E1 E2) cos(wt (t1 - t2)) - 2 kT]

    of one ensemble member (relative-motion energy minus its mean)."""
    kt_hw = _kt_over_hw(model, ensemble)
    e_rel = (
        initial.e1
        + initial.e2
        - 2.0
        * math.sqrt(initial.e1 * initial.e2)
        * math.cos(model.omega_tilde * (initial.t1 - initial.t2))
    )
    return (
        3.0
        * theta_cl(model, pulse)
        * (model.a_omega_tilde / model.d) ** 2
        * (e_rel / (HBAR * model.omega_tilde) - 2.0 * kt_hw)
    )


def xi_overlap(a, b, kap, eps):
    """Gate overlap Xi(a, b) at phase fluctuation eps for correction
    weights (a, b) in the unit square."""
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
        raise DomainError("xi_overlap: weights must lie in [0, 1]")
    r = 1.0 - a - b
    return (
        r * r
        + a * a
        + b * b
        + 2.0 * a * r * math.cos((kap - 1.0) * eps)
        + 2.0 * b * r * math.cos((kap + 1.0) * eps)
        + 2.0 * a * b * math.cos(2.0 * kap * eps)
    )


def xi_overlap_min(kap, eps):
    """Minimizer (a, b) of Xi over the unit square and its value, in the
    small-fluctuation regime.

    At a = 1 the stationary point in b is
    b = sin((3 kap - 1) eps / 2) / (2 sin((kap + 1) eps / 2)), which tends
    to (3 kap - 1)/(2 (kap + 1)) as eps -> 0: interior for kap <= 3 and
    clipped to the corner b = 1 beyond."""
    if kap <= 3.0:
        if eps == 0.0:
            b = (3.0 * kap - 1.0) / (2.0 * (kap + 1.0))
        else:
            den = 2.0 * math.sin(0.5 * (kap + 1.0) * eps)
            b = math.sin(0.5 * (3.0 * kap - 1.0) * eps) / den
        b = min(max(b, 0.0), 1.0)
        return 1.0, b, 0.5 * (1.0 + math.cos((3.0 * kap - 1.0) * eps))
    return 1.0, 1.0, xi_overlap(1.0, 1.0, kap, eps)


@dataclass(frozen=True)
class ClassicalFidelity:
    """Thermal classical gate fidelity.

    value: quadrature average of the minimized overlap.  series_full and
    series_suppressed are the small-spread closed forms
    1 - 2 sigma^2 (kap^2 - 1) and 1 - sigma^2/4, with
    sigma = 6 theta_cl (kT/hbar wt)(a_wt/d)^2 the fluctuation spread."""

    value: float
    series_full: float
    series_suppressed: float
    kappa: float
    sigma: float

    def __float__(self):
        return self.value


def _thermal_cos_means(chis, scale, nodes=64):
    """<cos(chi * scale * (x1 + x2 - 2 sqrt(x1 x2) cos p - 2))> for
    x1, x2 ~ Exp(1) and p uniform, by Gauss-Laguerre x Gauss-Laguerre x
    midpoint-phase quadrature.

    The two oscillation phases enter only through their difference, so a
    single phase axis suffices."""
    x, wx = np.polynomial.laguerre.laggauss(nodes)
    p = (np.arange(nodes) + 0.5) * (2.0 * math.pi / nodes)
    rel = (
        x[:, None, None]
        + x[None, :, None]
        - 2.0 * np.sqrt(x[:, None, None] * x[None, :, None]) * np.cos(p)[None, None, :]
        - 2.0
    )
    w2 = wx[:, None] * wx[None, :]
    out = []
    for chi in chis:
        integ = np.cos(chi * scale * rel).mean(axis=2)
        out.append(float(np.sum(w2 * integ)))
    return out


def classical_fidelity(model, pulse, ensemble=None, suppress_cubic=False, nodes=64):
    """Classical gate fidelity over a Boltzmann ensemble.

    The minimized overlap is averaged over E1, E2 ~ Exp(kT) and a uniform
    phase difference with 64-node Gauss-Laguerre quadrature on each energy
    and midpoint quadrature on the phase.  kap <= 3 averages the interior
    form [1 + cos((3 kap - 1) eps_th)]/2; kap > 3 the corner form
    Xi(1, 1).  suppress_cubic=True drops the cubic sensitivity (kap -> 0),
    the quartic-only fidelity [1 + cos(eps_th)]/2.

    Accurate while the spread sigma stays small against 1/kap; the closed
    series fields lose another order earlier.
    """
    kt_hw = _kt_over_hw(model, ensemble)
    th = theta_cl(model, pulse)
    kap = kappa(model, pulse)
    ratio2 = (model.a_omega_tilde / model.d) ** 2
    sigma = 6.0 * th * kt_hw * ratio2
    series_full = 1.0 - 2.0 * sigma * sigma * (kap * kap - 1.0)
    series_supp = 1.0 - 0.25 * sigma * sigma
    if kt_hw == 0.0:
        return ClassicalFidelity(
            value=1.0,
            series_full=1.0,
            series_suppressed=1.0,
            kappa=kap,
            sigma=0.0,
        )
    # eps_th = scale * (x1 + x2 - 2 sqrt(x1 x2) cos p - 2) in kT energy units
    scale = 3.0 * th * kt_hw * ratio2
    if suppress_cubic:
        (c,) = _thermal_cos_means([1.0], scale, nodes)
        value = 0.5 * (1.0 + c)
    elif kap <= 3.0:
        (c,) = _thermal_cos_means([3.0 * kap - 1.0], scale, nodes)
        value = 0.5 * (1.0 + c)
    else:
        cp, cm, c2 = _thermal_cos_means(
            [kap + 1.0, kap - 1.0, 2.0 * kap], scale, nodes
        )
        value = 3.0 - 2.0 * (cp + cm) + 2.0 * c2
    return ClassicalFidelity(
        value=value,
        series_full=series_full,
        series_suppressed=series_supp,
        kappa=kap,
        sigma=sigma,
    )
