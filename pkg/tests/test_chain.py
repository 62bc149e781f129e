"""Microtrap arrays beyond two ions: lattice coefficients and pair phases."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.chain import (
    ETA_BOUND,
    ETA_PRIME_BOUND,
    ChainCoefficients,
    ChainConfig,
    chain_coefficients,
    chain_phase_table,
    pair_phase,
)
from artifact.classical import theta_cl
from artifact.errors import DomainError, NumericIntegrityError
from artifact.quantum import gate_phase_theta


def _exact_site_sums(n, power):
    """sum_{k=1}^{m} k^-power as exact fractions, m = 0..n."""
    acc = [Fraction(0)]
    for k in range(1, n + 1):
        acc.append(acc[-1] + Fraction(1, k**power))
    return acc


# --- lattice coefficients -------------------------------------------------------

def test_chain_coefficients_against_exact_fractions(model):
    """The polygamma closed forms must reproduce exact rational partial
    sums over inverse cubes (eta) and inverse squares (eta')."""
    n = 7
    s3 = _exact_site_sums(n, 3)
    s2 = _exact_site_sums(n, 2)
    eta_exact = [float((s3[i - 1] + s3[n - i]) / 2) for i in range(1, n + 1)]
    etap_exact = [float((s2[i - 1] - s2[n - i]) / 2) for i in range(1, n + 1)]
    coeffs = chain_coefficients(model, n)
    assert np.max(np.abs(coeffs.eta - eta_exact)) < 1e-14
    assert np.max(np.abs(coeffs.eta_prime - etap_exact)) < 1e-14
    assert not coeffs.eta.flags.writeable


def test_chain_coefficients_two_ions(model):
    """A pair of traps is the two-ion model: both sites stiffen to the
    barycentric frequency and the shifts are opposite halves."""
    coeffs = chain_coefficients(model, 2)
    assert coeffs.eta == pytest.approx([0.5, 0.5], abs=1e-15)
    assert coeffs.eta_prime == pytest.approx([-0.5, 0.5], abs=1e-15)
    assert np.max(np.abs(coeffs.omega_i - model.omega_tilde)) < 1e-9 * model.omega_tilde


@given(n=st.integers(2, 220))
@settings(max_examples=40, deadline=None)
def test_chain_coefficients_symmetry_and_bounds(model, n):
    coeffs = chain_coefficients(model, n)
    assert np.max(np.abs(coeffs.eta - coeffs.eta[::-1])) < 1e-14
    assert np.max(np.abs(coeffs.eta_prime + coeffs.eta_prime[::-1])) < 1e-14
    assert coeffs.eta.max() < ETA_BOUND
    assert np.abs(coeffs.eta_prime).max() < ETA_PRIME_BOUND
    assert coeffs.eta.min() > 0.0
    # stiffening grows monotonically from the edge to the middle
    half = coeffs.eta[: (n + 1) // 2]
    assert np.all(np.diff(half) >= 0.0)
    assert np.all(coeffs.omega_i > model.omega)


def test_chain_coefficients_long_chain_limits(model):
    assert ETA_BOUND == pytest.approx(1.2020569031595942, rel=1e-15)
    assert ETA_PRIME_BOUND == pytest.approx(math.pi**2 / 12.0, rel=1e-15)
    gaps = chain_coefficients(model, 101)
    assert ETA_BOUND - gaps.eta.max() == pytest.approx(1.9603999466877298e-4, rel=1e-9)
    assert ETA_PRIME_BOUND - np.abs(gaps.eta_prime).max() == pytest.approx(
        4.97508333166663e-3, rel=1e-9
    )
    wide = chain_coefficients(model, 10000)
    center_gap = ETA_BOUND - wide.eta.max()
    assert 0.0 < center_gap < 3e-8
    edge_gap = ETA_PRIME_BOUND - np.abs(wide.eta_prime).max()
    assert 0.0 < edge_gap < 6e-5


def test_chain_coefficients_validation(model):
    with pytest.raises(DomainError):
        chain_coefficients(model, 1)
    with pytest.raises(DomainError):
        chain_coefficients(model, 2.5)
    good = chain_coefficients(model, 3)
    tampered = ChainCoefficients(
        n_ions=3,
        eta=np.array([0.5, 1.0, 0.6]),
        eta_prime=good.eta_prime.copy(),
        omega_i=good.omega_i.copy(),
        x_tilde=good.x_tilde.copy(),
        epsilon_i=good.epsilon_i.copy(),
    )
    with pytest.raises(NumericIntegrityError, match="symmetric"):
        tampered.validate()
    oversized = ChainCoefficients(
        n_ions=3,
        eta=np.array([0.5, 1.3, 0.5]),
        eta_prime=good.eta_prime.copy(),
        omega_i=good.omega_i.copy(),
        x_tilde=good.x_tilde.copy(),
        epsilon_i=good.epsilon_i.copy(),
    )
    with pytest.raises(NumericIntegrityError, match="zeta"):
        oversized.validate()


# --- pairwise conditional phases -------------------------------------------------

def test_pair_phase_distance_two(model, pulse):
    pair = pair_phase(model, pulse, 0, 2, 3)
    assert pair.leading == pytest.approx(theta_cl(model, pulse) / 8.0, rel=1e-14)
    assert pair.leading == pytest.approx(0.41421019678769955, rel=1e-12)
    assert pair.full == pytest.approx(0.3915630298535785, rel=1e-12)
    assert pair.full < pair.leading


def test_pair_phase_ratio_identity(model, pulse):
    """full/leading must carry exactly the bare-over-barycentric frequency
    ratio and the two site stiffenings."""
    for (i, j, n) in ((0, 1, 2), (1, 4, 6), (0, 2, 3)):
        pair = pair_phase(model, pulse, i, j, n)
        coeffs = chain_coefficients(model, n)
        stiff = 1.0 + model.epsilon * coeffs.eta
        expected = model.omega / (model.omega_tilde * stiff[i] * stiff[j])
        assert pair.full / pair.leading == pytest.approx(expected, rel=1e-13)


def test_pair_phase_two_sites_matches_quantum_route(model, pulse):
    """For two traps the chain reduction must land on the exactly solved
    conditional phase up to the quadratic coupling correction."""
    pair = pair_phase(model, pulse, 0, 1)
    theta = gate_phase_theta(model, pulse)
    rel = (pair.full - theta) / theta
    assert rel == pytest.approx(-4.3981804807157506e-4, rel=1e-6)
    assert abs(rel) < model.epsilon**2 / 3.0


def test_pair_phase_validation(model, pulse):
    assert pair_phase(model, pulse, 2, 5, 8, alpha_i=0) == (0.0, 0.0)
    assert pair_phase(model, pulse, 2, 5, 8, alpha_j=0) == (0.0, 0.0)
    with pytest.raises(DomainError):
        pair_phase(model, pulse, 3, 3)
    with pytest.raises(DomainError):
        pair_phase(model, pulse, -1, 2)
    with pytest.raises(DomainError):
        pair_phase(model, pulse, 0, 4, n_ions=3)
    with pytest.raises(DomainError):
        pair_phase(model, pulse, 0, 1, alpha_i=2)


# --- full chain table -------------------------------------------------------------

def test_chain_config_validation():
    with pytest.raises(DomainError):
        ChainConfig(1, (1,), ((0, 0, 0),))
    with pytest.raises(DomainError):
        ChainConfig(3, (1, 0), ((0, 0, 0),) * 3)
    with pytest.raises(DomainError):
        ChainConfig(2, (1, 2), ((0, 0, 0),) * 2)
    with pytest.raises(DomainError):
        ChainConfig(2, (1, 1), ((0, -1, 0), (0, 0, 0)))
    with pytest.raises(DomainError):
        ChainConfig(2, (1, 1), ((0, 0), (0, 0, 0)))
    uniform = ChainConfig.uniform(4, internal=0, motional=(1, 2, 3))
    assert uniform.internal == (0, 0, 0, 0)
    assert uniform.motional == ((1, 2, 3),) * 4


def test_chain_phase_table_three_sites(model, pulse):
    config = ChainConfig(3, (1, 0, 1), ((0, 0, 0),) * 3)
    table = chain_phase_table(model, pulse, config)
    assert np.array_equal(table.positions, model.d * np.arange(1.0, 4.0))
    # undriven center ion in its ground state accumulates nothing
    assert table.single[1] == 0.0
    assert table.single[0] == pytest.approx(411545.4562069898, rel=1e-12)
    assert table.single[2] == pytest.approx(1234556.141604047, rel=1e-12)
    # only the pushed outer pair contributes a conditional phase
    assert table.pairs[0, 1] == 0.0 and table.pairs[1, 2] == 0.0
    assert np.array_equal(table.pairs, table.pairs.T)
    assert np.all(np.diag(table.pairs) == 0.0)
    assert table.conditional_total() == pytest.approx(0.3915630298535785, rel=1e-12)
    assert table.conditional_total(leading=True) == pytest.approx(
        0.41421019678769955, rel=1e-12
    )
    pair = pair_phase(model, pulse, 0, 2, 3)
    assert table.pairs[0, 2] == pytest.approx(pair.full, rel=1e-14)


def test_chain_phase_table_uniform_five(model, pulse):
    table = chain_phase_table(model, pulse, ChainConfig.uniform(5))
    brute = sum(
        pair_phase(model, pulse, i, j, 5).full
        for i in range(5)
        for j in range(i + 1, 5)
    )
    assert table.conditional_total() == pytest.approx(brute, rel=1e-13)
    assert np.all(table.single > 0.0)


def test_chain_phase_table_kinetic_bookkeeping(model, pulse):
    cold = chain_phase_table(model, pulse, ChainConfig(3, (1, 0, 1), ((0, 0, 0),) * 3))
    warm = chain_phase_table(
        model, pulse, ChainConfig(3, (1, 0, 1), ((2, 1, 0), (0, 0, 0), (0, 0, 0)))
    )
    span = pulse.t_end - pulse.t_start
    axial = cold.coefficients.omega_i[0]
    assert warm.single[0] == cold.single[0] - (2.0 * axial + model.omega) * span
    # occupation never touches the conditional part
    assert np.array_equal(warm.pairs, cold.pairs)
    idle = chain_phase_table(
        model, pulse, ChainConfig(3, (0, 0, 0), ((1, 0, 0),) * 3)
    )
    assert np.all(idle.pairs == 0.0)
    assert idle.conditional_total() == 0.0
    assert np.all(idle.single < 0.0)
    with pytest.raises(DomainError):
        chain_phase_table(model, pulse, config=(1, 0, 1))
