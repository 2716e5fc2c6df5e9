import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from cavity_nls import (CavityConfig, MolecularModel, PulseSpec, build_three_level, build_two_level,
                        gaussian_ft, pulse_envelope)


def test_two_level_structure():
    m = build_two_level(100.0, mu_ge=2.0, gamma=0.3, gamma_phi=0.5)
    assert m.dim == 2
    assert list(m.excitation) == [0, 1]
    np.testing.assert_array_equal(m.mu_minus, [[0, 2], [0, 0]])
    np.testing.assert_array_equal(m.frame_hamiltonian(99.0), np.diag([0, 1.0]))
    rates = -np.sort(np.linalg.eigvals(m.dissipator()).real)
    # coherences at (gamma + gamma_phi)/2, population at gamma
    np.testing.assert_allclose(np.sort(rates), [0.0, 0.3, 0.4, 0.4], atol=1e-12)


def test_three_level_dephasing_rates():
    m = build_three_level(1.0, 2.8, gamma_phi=0.1)
    assert list(m.excitation) == [0, 1, 2]
    gen = m.dissipator()
    d = 3
    rate = lambda i, j: -gen[i * d + j, i * d + j].real  # noqa: E731
    assert rate(1, 0) == pytest.approx(0.05)
    assert rate(2, 0) == pytest.approx(0.05)
    assert rate(2, 1) == pytest.approx(0.1)
    assert rate(1, 1) == pytest.approx(0.0)


@pytest.mark.parametrize("kwargs", [
    dict(h0=[[0, 1j], [1j, 1]], mu_plus=[[0, 0], [1, 0]]),
    dict(h0=np.eye(2), mu_plus=np.zeros((3, 3))),
    dict(h0=np.eye(2), mu_plus=[[0, 0], [1, 0]], dissipators=[(np.eye(2), -1.0)]),
    dict(h0=[[0, 0.1], [0.1, 1]], mu_plus=[[0, 0], [1, 0]]),
    dict(h0=np.eye(2), mu_plus=[[0, 0], [1, 0]], excitation=[0, 2]),
])
def test_model_validation(kwargs):
    with pytest.raises(ValueError):
        MolecularModel(**kwargs)


def test_builder_validation():
    with pytest.raises(ValueError):
        build_two_level(-1.0)
    with pytest.raises(ValueError):
        build_two_level(1.0, gamma=-0.1)
    with pytest.raises(ValueError):
        build_three_level(2.0, 1.0)


@given(st.floats(0.1, 10), st.floats(1, 1e4), st.floats(0.1, 4))
def test_collective_coupling(g_sqrt_n, n, mu):
    cav = CavityConfig.from_collective_coupling(50.0, g_sqrt_n, n_molecules=n, mu_ge=mu)
    assert cav.coupling(mu) * np.sqrt(n) == pytest.approx(g_sqrt_n)


@pytest.mark.parametrize("kwargs", [dict(kappa=0.0), dict(e0=-1.0), dict(n_molecules=0.5)])
def test_cavity_validation(kwargs):
    with pytest.raises(ValueError):
        CavityConfig(omega_c=1.0, **kwargs)


def test_pulse_validation_and_envelope():
    with pytest.raises(ValueError):
        PulseSpec(1.0, 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        PulseSpec(-1.0, 1.0, 0.0, 1.0)
    p = PulseSpec(1.0, 10.0, 3.0, 0.5)
    assert pulse_envelope(p, 3.0) == 1.0
    assert pulse_envelope(p, 3.5) == pytest.approx(np.exp(-0.5))
    assert p.with_(phi=1.0).phi == 1.0 and p.phi == 0.0


@given(st.floats(-3, 3), st.floats(0.05, 1.0), st.floats(-10, 10))
@settings(max_examples=30, deadline=None)
def test_gaussian_ft_matches_quadrature(tau, tau_w, w):
    p = PulseSpec(1.0, 0.0, tau, tau_w)
    lo, hi = tau - 12 * tau_w, tau + 12 * tau_w
    re = quad(lambda t: pulse_envelope(p, t) * np.cos(w * t), lo, hi, limit=200)[0]
    im = quad(lambda t: pulse_envelope(p, t) * np.sin(w * t), lo, hi, limit=200)[0]
    expected = (re + 1j * im) / np.sqrt(2 * np.pi)
    assert abs(gaussian_ft(p, w) - expected) <= 1e-9 * max(tau_w, 1.0)
