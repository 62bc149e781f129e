"""Shared fixtures.

The brute-force integrations are by far the slowest thing in the suite
(minutes), so every result a test might want from them is computed once
per session and shared: the three-branch evolutions at multipole orders
2, 3, 4, a cutoff-doubled pair for the convergence check, and a
fixed-step error ladder for the order measurement.
"""

import math

import pytest

from artifact.model import CA40, ForcePulse, build_trap_model

OMEGA = 2.0 * math.pi * 1e6
SEPARATION = 20e-6
XI = 0.7
TAU = 41.1069e-6
WINDOW = 150e-6


@pytest.fixture(scope="session")
def model():
    return build_trap_model(CA40, OMEGA, SEPARATION)


@pytest.fixture(scope="session")
def model_linear():
    return build_trap_model(CA40, OMEGA, SEPARATION, equilibrium="linear")


@pytest.fixture(scope="session")
def model_bare():
    return build_trap_model(CA40, OMEGA, SEPARATION, equilibrium="bare")


@pytest.fixture(scope="session")
def pulse():
    return ForcePulse(XI, TAU, -WINDOW, WINDOW)


@pytest.fixture(scope="session")
def brute_force(model, pulse):
    """Branch evolutions and assembled gate phase at k_max = 2, 3, 4."""
    from artifact.numint import SimGrid, evolve
    from artifact.quantum import phi_of_omega

    cm = 2.0 * pulse.xi**2 * phi_of_omega(model, pulse, model.omega)
    out = {}
    for k in (2, 3, 4):
        grid = SimGrid(n_cut=48, l_cut=24, k_max=k, tol=1e-10)
        branches = {
            (a, b): evolve(model, pulse, grid, (0, 0), a, b)
            for (a, b) in ((0, 0), (0, 1), (1, 0))
        }
        rel = (
            2.0 * branches[(0, 0)].phase
            - branches[(0, 1)].phase
            - branches[(1, 0)].phase
        )
        out[k] = {"branches": branches, "theta": cm + rel}
    return out


@pytest.fixture(scope="session")
def cutoff_pair(model, pulse):
    """Full-order gate phase at a cutoff and at its double."""
    from artifact.numint import SimGrid, numeric_gate_phase

    small = numeric_gate_phase(model, pulse, SimGrid(16, 8, 4, 2e-9, 1e-9), (0, 0))
    big = numeric_gate_phase(model, pulse, SimGrid(32, 16, 4, 2e-9, 1e-9), (0, 0))
    return small, big


@pytest.fixture(scope="session")
def halving_errors(model, pulse):
    """Fixed-step global errors against a tight adaptive reference, for
    step counts 256, 512, 1024 per checkpoint interval (each halving the
    step), on a shortened window to keep this quick.  Coarser steps hit
    the norm-defect guard before the halving regime is reached, and the
    finest point sits close to the reference's own error floor."""
    import numpy as np

    from artifact.numint import SimGrid, evolve

    short = pulse.with_window(-80e-6, 80e-6)
    span = short.t_end - short.t_start
    interval = span / math.ceil(span / (pulse.tau / 20.0))
    reference = evolve(model, short, SimGrid(12, 6, 2, 2e-9, 1e-13), (0, 0), 0, 1)
    errors = {}
    defects = {}
    for k in (256, 512, 1024):
        grid = SimGrid(12, 6, 2, interval / k, 1e-10)
        run = evolve(model, short, grid, (0, 0), 0, 1, adaptive=False)
        errors[k] = float(
            np.linalg.norm(run.state.amplitudes - reference.state.amplitudes)
        )
        defects[k] = run.state.norm_defect
    return errors, defects
