"""Command line front end: batch runs over the library, tables out.

Subcommands: phases, fidelity, tune, numsim, chain.  Each emits one or
more tables in a plain dialect: `#`-prefixed metadata lines, a header row
of column names, then numeric rows, comma separated (or tab with
--format tsv).  Floats are serialized with repr, the shortest string that
reparses to the same double, so a header fed back through --config
reproduces the run bit for bit in single-threaded mode.

Metadata lines come in two kinds.  `key = value` lines are the resolved
configuration: stripped of the leading `# ` they form a valid config
file.  `key: value` lines are informational (version, derived results,
convergence flags) and are ignored by the config parser.

Unit handling, the single most likely source of error: a frequency with
an Hz-family suffix is multiplied by 2 pi (`--omega 1 MHz` means
2 pi x 1e6 rad/s); a bare number or an explicit `rad/s` suffix is taken
as angular frequency literally.  Lengths accept m/mm/um/nm, times
s/ms/us, temperatures K/mK/uK; bare numbers are SI base units.
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .chain import ETA_BOUND, ETA_PRIME_BOUND, ChainConfig, chain_phase_table
from .classical import ThermalEnsemble, classical_fidelity
from .errors import (
    ConfigError,
    DomainError,
    NonConvergenceError,
    NumericIntegrityError,
)
from .model import IonSpecies, ForcePulse, build_trap_model, force_profile
from .numint import SimGrid, evolve, phase_series
from .quantum import (
    GROUND,
    delta_theta,
    gate_phase_theta,
    mean_delta_theta,
    phi_of_omega,
    quantum_fidelity,
    tune_tau,
    unperturbed_phases,
)

SPECIES = {"40Ca+": 39.9626}

_TWO_PI = 2.0 * math.pi
_FREQ_UNITS = {"rad/s": 1.0, "hz": _TWO_PI, "khz": _TWO_PI * 1e3, "mhz": _TWO_PI * 1e6}
_LENGTH_UNITS = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "μm": 1e-6, "nm": 1e-9}
_TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "μs": 1e-6}
_TEMP_UNITS = {"k": 1.0, "mk": 1e-3, "uk": 1e-6, "µk": 1e-6, "μk": 1e-6}

_QUANTITY_RE = re.compile(r"^\s*([-+0-9.eE,\s]*?)\s*([a-zA-Zµμ/]*)\s*$")


def _split_quantity(text, units, what):
    """Split '41.1069 us' into its numeric part and unit factor."""
    m = _QUANTITY_RE.match(text)
    if not m or not m.group(1).strip():
        raise ConfigError("%s: cannot parse quantity %r" % (what, text))
    number, unit = m.group(1), m.group(2)
    if not unit:
        return number, 1.0
    key = unit if unit == "rad/s" else unit.lower()
    if key not in units:
        raise ConfigError(
            "%s: unknown unit %r (accepted: %s)"
            % (what, unit, ", ".join(sorted(units)))
        )
    return number, units[key]


def parse_quantity(text, units, what):
    number, factor = _split_quantity(text, units, what)
    try:
        return float(number) * factor
    except ValueError:
        raise ConfigError("%s: bad number %r" % (what, number)) from None


def parse_quantity_list(text, units, what):
    number, factor = _split_quantity(text, units, what)
    try:
        return tuple(float(part) * factor for part in number.split(","))
    except ValueError:
        raise ConfigError("%s: bad number list %r" % (what, number)) from None


def _parse_int_list(text, what, length=None):
    try:
        values = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ConfigError("%s: expected comma-separated integers, got %r" % (what, text)) from None
    if length is not None and len(values) != length:
        raise ConfigError("%s: expected %d integers, got %d" % (what, length, len(values)))
    return values


def _parse_bool(text, what):
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigError("%s: expected true/false, got %r" % (what, text))


def _parse_target(text):
    """Gate-phase target: a number in rad, or 'pi' / '2pi' / '0.5pi'."""
    lowered = text.strip().lower()
    if lowered.endswith("pi"):
        head = lowered[:-2].strip()
        return (float(head) if head else 1.0) * math.pi
    return float(text)


class ResultTable:
    """Named numeric columns plus metadata, rendered as one output block."""

    def __init__(self, metadata, columns, converged=True):
        self.metadata = list(metadata)
        self.columns = dict(columns)
        self.converged = converged
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise NumericIntegrityError("ResultTable: ragged columns %r" % lengths)

    def render(self, fmt):
        delim = "\t" if fmt == "tsv" else ","
        lines = ["# " + entry for entry in self.metadata]
        names = list(self.columns)
        lines.append(delim.join(names))
        for row in zip(*self.columns.values()):
            lines.append(delim.join(_cell(value) for value in row))
        return "\n".join(lines) + "\n"


def _cell(value):
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return repr(float(value))


# --- configuration -------------------------------------------------------

_DEFAULTS = {
    "species": "40Ca+",
    "mass_u": None,
    "omega": _TWO_PI * 1e6,
    "separation": 20e-6,
    "equilibrium": "exact",
    "xi": 0.7,
    "tau": 41.1069e-6,
    "window_start": -150e-6,
    "window_end": 150e-6,
    "format": "csv",
    "threads": None,
    "temp": (1e-3,),
    "target": math.pi,
    "mode": "echo",
    "n_cut": 48,
    "l_cut": 24,
    "k_max": 4,
    "tol": 1e-10,
    "dt": 2e-9,
    "adaptive": True,
    "initial": (0, 0),
    "allow_unconverged": False,
    "n_ions": 5,
    "alpha": None,
    "motional": (0, 0, 0),
    "check_maxima": False,
}

# how each config-file key is converted; flags reuse the same converters
_PARSERS = {
    "species": lambda v: v.strip(),
    "mass_u": lambda v: float(v),
    "omega": lambda v: parse_quantity(v, _FREQ_UNITS, "omega"),
    "separation": lambda v: parse_quantity(v, _LENGTH_UNITS, "separation"),
    "equilibrium": lambda v: v.strip(),
    "xi": lambda v: float(v),
    "tau": lambda v: parse_quantity(v, _TIME_UNITS, "tau"),
    "window_start": lambda v: parse_quantity(v, _TIME_UNITS, "window_start"),
    "window_end": lambda v: parse_quantity(v, _TIME_UNITS, "window_end"),
    "format": lambda v: v.strip(),
    "threads": lambda v: int(v),
    "temp": lambda v: parse_quantity_list(v, _TEMP_UNITS, "temp"),
    "target": _parse_target,
    "mode": lambda v: v.strip(),
    "n_cut": lambda v: int(v),
    "l_cut": lambda v: int(v),
    "k_max": lambda v: int(v),
    "tol": lambda v: float(v),
    "dt": lambda v: parse_quantity(v, _TIME_UNITS, "dt"),
    "adaptive": lambda v: _parse_bool(v, "adaptive"),
    "initial": lambda v: _parse_int_list(v, "initial", 2),
    "allow_unconverged": lambda v: _parse_bool(v, "allow_unconverged"),
    "n_ions": lambda v: int(v),
    "alpha": lambda v: _parse_int_list(v, "alpha"),
    "motional": lambda v: _parse_int_list(v, "motional", 3),
    "check_maxima": lambda v: _parse_bool(v, "check_maxima"),
}

_CONFIG_LINE_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")
_INFO_LINE_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_-]*\s*:")


def read_config_file(path):
    """Parse a key = value config file (informational `key:` lines and
    comments are skipped, unknown keys are errors with their line)."""
    entries = {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        match = _CONFIG_LINE_RE.match(line)
        if not match:
            if _INFO_LINE_RE.match(line):
                continue
            raise ConfigError("%s:%d: expected 'key = value'" % (path, lineno))
        key, value = match.group(1), match.group(2).strip()
        if key not in _PARSERS:
            raise ConfigError("%s:%d: unknown key %r" % (path, lineno, key))
        try:
            entries[key] = _PARSERS[key](value)
        except ConfigError as exc:
            raise ConfigError("%s:%d: %s" % (path, lineno, exc)) from None
        except ValueError as exc:
            raise ConfigError("%s:%d: %s = %r: %s" % (path, lineno, key, value, exc)) from None
    return entries


class RunConfig:
    """Fully resolved run parameters (SI units throughout)."""

    def __init__(self, values):
        self.__dict__.update(_DEFAULTS)
        self.__dict__.update(values)
        if self.format not in ("csv", "tsv"):
            raise ConfigError("format must be csv or tsv, got %r" % self.format)
        if self.mass_u is None:
            if self.species not in SPECIES:
                raise ConfigError(
                    "unknown species %r and no --mass-u given (known: %s)"
                    % (self.species, ", ".join(sorted(SPECIES)))
                )
            self.mass_u = SPECIES[self.species]
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def build(self):
        species = IonSpecies(self.species, self.mass_u)
        model = build_trap_model(species, self.omega, self.separation, self.equilibrium)
        pulse = ForcePulse(self.xi, self.tau, self.window_start, self.window_end)
        return model, pulse

    def worker_count(self):
        return self.threads if self.threads else (os.cpu_count() or 1)

    def config_lines(self, keys):
        """Resolved `key = value` metadata lines for the given keys."""
        lines = []
        for key in keys:
            value = getattr(self, key)
            if key in ("omega",):
                text = repr(float(value)) + " rad/s"
            elif key in ("separation",):
                text = repr(float(value)) + " m"
            elif key in ("tau", "window_start", "window_end", "dt"):
                text = repr(float(value)) + " s"
            elif key == "temp":
                text = ",".join(repr(float(t)) for t in value) + " K"
            elif key in ("adaptive", "allow_unconverged", "check_maxima"):
                text = "true" if value else "false"
            elif key in ("initial", "motional", "alpha"):
                text = ",".join(str(int(part)) for part in value)
            elif isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, int):
                text = str(value)
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append("%s = %s" % (key, text))
        return lines


_COMMON_KEYS = (
    "species", "mass_u", "omega", "separation", "equilibrium",
    "xi", "tau", "window_start", "window_end", "format",
)


def _header(cfg, command, extra_keys=(), info=()):
    lines = ["artifact-version: " + __version__, "command: " + command]
    lines.extend(cfg.config_lines(_COMMON_KEYS + tuple(extra_keys)))
    lines.extend(info)
    return lines


# --- commands ------------------------------------------------------------

def cmd_phases(cfg):
    """Four-branch phase decomposition at one working point."""
    model, pulse = cfg.build()
    theta = gate_phase_theta(model, pulse)
    shift = delta_theta(model, pulse, GROUND)
    branches = [(0, 0), (0, 1), (1, 0), (1, 1)]
    records = [unperturbed_phases(model, pulse, GROUND, a, b) for a, b in branches]
    columns = {
        "alpha": [a for a, _ in branches],
        "beta": [b for _, b in branches],
        "dynamic_cm": [r.dynamic_cm for r in records],
        "linear_cm": [r.linear_cm for r in records],
        "kinetic_cm": [r.kinetic_cm for r in records],
        "dynamic_rel": [r.dynamic_rel for r in records],
        "linear_rel": [r.linear_rel for r in records],
        "kinetic_rel": [r.kinetic_rel for r in records],
        "total": [r.total for r in records],
        "theta_over_pi": [theta / math.pi] * 4,
        "delta_theta": [shift] * 4,
    }
    info = ("theta_rad: " + repr(theta), "delta_theta_rad: " + repr(shift))
    return [(None, ResultTable(_header(cfg, "phases", info=info), columns))]


def cmd_fidelity(cfg):
    """Gate fidelity versus temperature, classical and quantum."""
    model, pulse = cfg.build()
    temps = cfg.temp
    if not temps:
        raise ConfigError("fidelity: empty temperature grid")
    if any(b <= a for a, b in zip(temps, temps[1:])):
        raise ConfigError("fidelity: temperatures must be strictly ascending")

    def one(temperature):
        ensemble = ThermalEnsemble.from_temperature(model, temperature)
        f_cl = classical_fidelity(model, pulse, ensemble).value
        f_improved = classical_fidelity(model, pulse, ensemble, suppress_cubic=True).value
        quantum = quantum_fidelity(model, pulse, ensemble)
        return (f_cl, f_improved, quantum.exact, quantum.thermal_closed)

    with ThreadPoolExecutor(max_workers=cfg.worker_count()) as pool:
        results = list(pool.map(one, temps))

    columns = {
        "T_K": list(temps),
        "F_cl": [r[0] for r in results],
        "F_cl_improved": [r[1] for r in results],
        "F_quantum_exact": [r[2] for r in results],
        "F_quantum_approx": [r[3] for r in results],
        "one_minus_F": [1.0 - r[2] for r in results],
    }
    return [(None, ResultTable(_header(cfg, "fidelity", ("temp", "threads") if cfg.threads else ("temp",)), columns))]


def cmd_tune(cfg):
    """Pulse-width calibration to a target conditional phase."""
    if cfg.target == 0.0:
        raise ConfigError("tune: target 0 is degenerate (theta -> 0 only as tau -> 0)")
    if cfg.mode not in ("echo", "single"):
        raise ConfigError("tune: mode must be echo or single")
    model, pulse = cfg.build()
    try:
        tau_star = tune_tau(model, pulse, cfg.target, mode=cfg.mode)
    except NonConvergenceError as exc:
        samples = []
        for tau in np.geomspace(0.05 * cfg.tau, 20.0 * cfg.tau, 8):
            theta = gate_phase_theta(model, pulse.with_tau(float(tau)))
            samples.append("  theta(%.6e s) = %.6e rad" % (tau, theta))
        raise NonConvergenceError(
            "%s\ntheta(tau) samples for diagnosis:\n%s" % (exc, "\n".join(samples))
        ) from None
    tuned = pulse.with_tau(tau_star)
    theta = gate_phase_theta(model, tuned)
    achieved = theta + (mean_delta_theta(model, tuned) if cfg.mode == "echo" else 0.0)
    columns = {
        "tau_s": [tau_star],
        "theta_rad": [theta],
        "achieved_rad": [achieved],
        "target_rad": [cfg.target],
        "residual_rad": [achieved - cfg.target],
    }
    return [(None, ResultTable(_header(cfg, "tune", ("target", "mode")), columns))]


def cmd_numsim(cfg):
    """Brute-force integration: gate-phase and projection time series."""
    model, pulse = cfg.build()
    grid = SimGrid(cfg.n_cut, cfg.l_cut, cfg.k_max, cfg.dt, cfg.tol)
    t0, t_end = cfg.window_start, cfg.window_end
    branches = {}
    for alpha, beta in ((0, 0), (0, 1), (1, 0)):
        branches[(alpha, beta)] = evolve(
            model, pulse, grid, cfg.initial, alpha, beta, t0, t_end,
            adaptive=cfg.adaptive,
        )
    converged = all(r.converged for r in branches.values())

    times = [cp.time for cp in branches[(0, 1)].checkpoints]
    series = {
        key: phase_series(model, pulse, cfg.initial, key[0], key[1], t0, r.checkpoints)
        for key, r in branches.items()
    }
    rel = 2.0 * series[(0, 0)] - series[(0, 1)] - series[(1, 0)]
    cm = np.array(
        [2.0 * pulse.xi**2 * phi_of_omega(model, pulse, model.omega, t0, tk) for tk in times]
    )
    theta_series = cm + rel
    theta_analytic = gate_phase_theta(model, pulse)
    theta_num = float(theta_series[-1])

    columns = {
        "time_s": times,
        "theta_over_pi": list(theta_series / math.pi),
        "projection": [cp.projection for cp in branches[(0, 1)].checkpoints],
        "force": [force_profile(pulse, tk) for tk in times],
    }
    info = (
        "theta_num_rad: " + repr(theta_num),
        "theta_analytic_rad: " + repr(theta_analytic),
        "difference_rad: " + repr(theta_num - theta_analytic),
        "peak_leakage: " + repr(max(r.leakage for r in branches.values())),
        "converged: " + ("true" if converged else "false"),
    )
    keys = ("n_cut", "l_cut", "k_max", "tol", "dt", "adaptive", "initial", "allow_unconverged")
    outputs = [(None, ResultTable(_header(cfg, "numsim", keys, info), columns, converged))]

    if cfg.dump_amplitudes:
        rows = {"time_s": [], "n": [], "l": [], "re": [], "im": []}
        for cp in branches[(0, 1)].checkpoints:
            n_idx, l_idx = np.nonzero(np.abs(cp.amplitudes) > 1e-14)
            for ni, li in zip(n_idx, l_idx):
                value = cp.amplitudes[ni, li]
                rows["time_s"].append(cp.time)
                rows["n"].append(int(ni))
                rows["l"].append(int(li))
                rows["re"].append(value.real)
                rows["im"].append(value.imag)
        note = ("table: amplitude checkpoints of the (0,1) branch; "
                "entries below 1e-14 omitted",)
        outputs.append(
            (cfg.dump_amplitudes,
             ResultTable(_header(cfg, "numsim", keys, note), rows, converged))
        )
    return outputs


def cmd_chain(cfg):
    """Per-site coefficients and pairwise conditional phases for a chain."""
    model, pulse = cfg.build()
    n = cfg.n_ions
    if n < 2:
        raise ConfigError("chain: n_ions must be at least 2")
    alphas = cfg.alpha if cfg.alpha is not None else (1,) * n
    if len(alphas) != n:
        raise ConfigError("chain: alpha list length %d != n_ions %d" % (len(alphas), n))
    config = ChainConfig(
        n_ions=n,
        internal=tuple(alphas),
        motional=tuple(tuple(cfg.motional) for _ in range(n)),
    )
    table = chain_phase_table(model, pulse, config)
    coeffs = table.coefficients

    info = [
        "conditional_total_full_rad: " + repr(table.conditional_total()),
        "conditional_total_leading_rad: " + repr(table.conditional_total(leading=True)),
    ]
    if cfg.check_maxima:
        eta_max = float(np.max(coeffs.eta))
        eta_prime_max = float(np.max(np.abs(coeffs.eta_prime)))
        info.extend([
            "eta_max_observed: " + repr(eta_max),
            "eta_bound: " + repr(ETA_BOUND),
            "eta_gap: " + repr(ETA_BOUND - eta_max),
            "eta_prime_max_observed: " + repr(eta_prime_max),
            "eta_prime_bound: " + repr(ETA_PRIME_BOUND),
            "eta_prime_gap: " + repr(ETA_PRIME_BOUND - eta_prime_max),
        ])
    keys = ("n_ions", "alpha", "motional", "check_maxima")
    site_columns = {
        "site": list(range(1, n + 1)),
        "alpha": list(alphas),
        "eta": list(coeffs.eta),
        "eta_prime": list(coeffs.eta_prime),
        "omega_i_rad_s": list(coeffs.omega_i),
        "x_tilde_m": list(coeffs.x_tilde),
        "epsilon_i": list(coeffs.epsilon_i),
        "single_phase_rad": list(table.single),
    }
    cfg.alpha = alphas  # resolved value for the reproducibility header
    sites = ResultTable(_header(cfg, "chain", keys, tuple(info)), site_columns)

    pair_columns = {"site_i": [], "site_j": [], "phase_full_rad": [], "phase_leading_rad": []}
    for i in range(n):
        for j in range(i + 1, n):
            pair_columns["site_i"].append(i + 1)
            pair_columns["site_j"].append(j + 1)
            pair_columns["phase_full_rad"].append(table.pairs[i, j])
            pair_columns["phase_leading_rad"].append(table.pairs_leading[i, j])
    pairs = ResultTable(("table: pairwise conditional phases (1-based sites)",), pair_columns)
    return [(None, sites), (None, pairs)]


COMMANDS = {
    "phases": cmd_phases,
    "fidelity": cmd_fidelity,
    "tune": cmd_tune,
    "numsim": cmd_numsim,
    "chain": cmd_chain,
}


# --- argument parsing ----------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    parser = _Parser(
        prog="iongate",
        description="Conditional-phase-gate toolbox for ions in separate microtraps.",
        epilog="Frequencies with Hz/kHz/MHz suffix are multiplied by 2 pi; "
               "bare numbers or rad/s are angular. See module docs for the dialect.",
    )
    common = argparse.ArgumentParser(add_help=False)
    arg = common.add_argument
    arg("--species", help="ion species name (built in: 40Ca+)")
    arg("--mass-u", dest="mass_u", help="ion mass in atomic units (overrides species lookup)")
    arg("--omega", help="well frequency, e.g. '1 MHz' (2 pi applied) or '6.28e6 rad/s'")
    arg("--separation", help="well separation, e.g. '20 um'")
    arg("--xi", help="dimensionless force amplitude")
    arg("--tau", help="pulse width, e.g. '41.1069 us'")
    arg("--window", help="integration window 'T0,T1' or half-width 'T' for (-T, T)")
    arg("--temp", help="temperature or comma list, e.g. '0.5,1,2 mK'")
    arg("--temp-range", dest="temp_range", help="linear grid 'START,STOP,COUNT[ unit]'")
    arg("--equilibrium", choices=("exact", "linear", "bare"), help="separation convention")
    arg("--format", choices=("csv", "tsv"), help="output dialect (default csv)")
    arg("--out", help="output file (default stdout)")
    arg("--threads", help="worker pool size for sweeps (default: available cores)")
    arg("--config", help="key = value config file; flags override it")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("phases", parents=[common], help="four-branch phase decomposition")
    sub.add_parser("fidelity", parents=[common], help="fidelity vs temperature table")

    tune = sub.add_parser("tune", parents=[common], help="calibrate tau to a target phase")
    tune.add_argument("--target", help="target conditional phase: rad, or 'pi', '2pi'")
    tune.add_argument("--mode", choices=("echo", "single"), help="calibration equation")

    numsim = sub.add_parser("numsim", parents=[common], help="brute-force integration")
    numsim.add_argument("--n-cut", dest="n_cut", help="axial cutoff (default 48)")
    numsim.add_argument("--l-cut", dest="l_cut", help="transverse cutoff (default 24)")
    numsim.add_argument("--k-max", dest="k_max", help="highest multipole 2|3|4 (default 4)")
    numsim.add_argument("--tol", help="adaptive per-step tolerance (default 1e-10)")
    numsim.add_argument("--dt", help="fixed-step size (with --fixed-step)")
    numsim.add_argument("--fixed-step", action="store_true", default=None,
                        help="use fixed steps of --dt instead of adaptive stepping")
    numsim.add_argument("--initial", help="starting basis state 'n,l' (default 0,0)")
    numsim.add_argument("--allow-unconverged", action="store_true", default=None,
                        dest="allow_unconverged",
                        help="emit results and exit 0 even if leakage flags the run")
    numsim.add_argument("--dump-amplitudes", dest="dump_amplitudes", metavar="FILE",
                        help="write checkpoint amplitudes (time,n,l,re,im) to FILE")

    chain = sub.add_parser("chain", parents=[common], help="N-ion chain tables")
    chain.add_argument("--n-ions", dest="n_ions", help="chain length (default 5)")
    chain.add_argument("--alpha", help="per-site internal states, e.g. '1,0,1'")
    chain.add_argument("--motional", help="uniform motional state 'nx,ny,nz'")
    chain.add_argument("--check-maxima", dest="check_maxima", action="store_true",
                       default=None, help="report coefficient maxima against their bounds")
    return parser


def resolve_config(args):
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key in (
        "species", "mass_u", "omega", "separation", "xi", "tau",
        "equilibrium", "format", "threads", "temp", "target", "mode",
        "n_cut", "l_cut", "k_max", "tol", "initial", "allow_unconverged",
        "n_ions", "alpha", "motional", "check_maxima", "dt",
    ):
        flag = getattr(args, key, None)
        if flag is None:
            continue
        values[key] = _PARSERS[key](flag) if isinstance(flag, str) else flag
    if getattr(args, "window", None) is not None:
        parts = parse_quantity_list(args.window, _TIME_UNITS, "window")
        if len(parts) == 1:
            values["window_start"], values["window_end"] = -parts[0], parts[0]
        elif len(parts) == 2:
            values["window_start"], values["window_end"] = parts
        else:
            raise ConfigError("window: expected one or two times, got %r" % (args.window,))
    if getattr(args, "temp_range", None) is not None:
        grid = parse_quantity_list(args.temp_range, _TEMP_UNITS, "temp-range")
        if len(grid) != 3:
            raise ConfigError("temp-range: expected 'START,STOP,COUNT'")
        start, stop, count = grid[0], grid[1], int(round(grid[2]))
        if count < 2 or stop <= start:
            raise ConfigError("temp-range: need COUNT >= 2 and STOP > START")
        values["temp"] = tuple(np.linspace(start, stop, count))
    if getattr(args, "fixed_step", None):
        values["adaptive"] = False

    cfg = RunConfig(values)
    cfg.dump_amplitudes = getattr(args, "dump_amplitudes", None)
    cfg.out = args.out
    return cfg


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print("iongate: error: %s" % exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)

    try:
        cfg = resolve_config(args)
        outputs = COMMANDS[args.command](cfg)
    except (ConfigError, DomainError) as exc:
        print("iongate: error: %s" % exc, file=sys.stderr)
        return 1
    except NumericIntegrityError as exc:
        print("iongate: numeric integrity: %s" % exc, file=sys.stderr)
        return 2
    except NonConvergenceError as exc:
        print("iongate: did not converge: %s" % exc, file=sys.stderr)
        return 3

    main_text = "".join(t.render(cfg.format) for path, t in outputs if path is None)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as handle:
            handle.write(main_text)
    else:
        sys.stdout.write(main_text)
    for path, table in outputs:
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as handle:
                handle.write(table.render(cfg.format))

    if not all(t.converged for _, t in outputs):
        if not getattr(cfg, "allow_unconverged", False):
            print("iongate: integration flagged non-converged "
                  "(rerun with --allow-unconverged to accept)", file=sys.stderr)
            return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
