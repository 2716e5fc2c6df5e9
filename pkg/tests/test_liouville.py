import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cavity_nls.liouville import (commutator_superop, left_superop, lindblad_superop, liouvillian,
                                  right_superop, sandwich_superop, unvec, vec)

dims = st.integers(min_value=1, max_value=4)
finite = st.floats(min_value=-5, max_value=5, allow_nan=False, allow_infinity=False)


def complex_matrix(d):
    return st.tuples(arrays(float, (d, d), elements=finite), arrays(float, (d, d), elements=finite)).map(
        lambda ab: ab[0] + 1j * ab[1])


pairs = dims.flatmap(lambda d: st.tuples(complex_matrix(d), complex_matrix(d), complex_matrix(d)))


@given(pairs)
def test_vec_roundtrip(mats):
    a, _, _ = mats
    assert np.array_equal(unvec(vec(a)), a)


@given(pairs)
@settings(max_examples=50)
def test_superoperators_match_matrix_products(mats):
    a, b, rho = mats
    v = vec(rho)
    np.testing.assert_allclose(left_superop(a) @ v, vec(a @ rho), atol=1e-10)
    np.testing.assert_allclose(right_superop(b) @ v, vec(rho @ b), atol=1e-10)
    np.testing.assert_allclose(sandwich_superop(a, b) @ v, vec(a @ rho @ b), atol=1e-10)
    np.testing.assert_allclose(commutator_superop(a) @ v, vec(a @ rho - rho @ a), atol=1e-10)


@given(pairs, st.floats(min_value=0, max_value=3))
@settings(max_examples=50)
def test_dissipator_preserves_trace_and_hermiticity(mats, rate):
    op, _, x = mats
    rho = x @ x.conj().T
    d = op.shape[0]
    drho = unvec(lindblad_superop(op, rate) @ vec(rho))
    scale = 1 + rate * np.linalg.norm(op) ** 2 * np.linalg.norm(rho)
    assert abs(np.trace(drho)) <= 1e-10 * scale
    np.testing.assert_allclose(drho, drho.conj().T, atol=1e-10 * scale)
    expected = rate * (op @ rho @ op.conj().T - 0.5 * (op.conj().T @ op @ rho + rho @ op.conj().T @ op))
    np.testing.assert_allclose(drho, expected, atol=1e-10 * scale)
    assert drho.shape == (d, d)


def test_two_level_generator_rates():
    sigma = np.array([[0, 1], [0, 0]], dtype=complex)
    gen = liouvillian(np.diag([0.0, 2.0]), [(sigma, 0.4), (sigma.conj().T @ sigma, 0.2)])
    # |e><g| component: row-major index 1*2+0
    assert gen[2, 2] == pytest.approx(-2j - 0.3)
    assert gen[3, 3] == pytest.approx(-0.4)


def test_zero_rate_and_validation():
    assert not np.any(lindblad_superop(np.eye(3), 0.0))
    with pytest.raises(ValueError):
        lindblad_superop(np.eye(2), -1.0)
    with pytest.raises(ValueError):
        commutator_superop(np.ones((2, 3)))
    with pytest.raises(ValueError):
        sandwich_superop(np.eye(2), np.eye(3))
    with pytest.raises(ValueError):
        unvec(np.ones(5))
    with pytest.raises(ValueError):
        vec(np.ones(4))
