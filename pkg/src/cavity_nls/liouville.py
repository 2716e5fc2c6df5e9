"""Liouville-space algebra.

Density matrices are stacked row by row, so ``vec(rho) = rho.reshape(-1)``.
With this ordering left multiplication ``A rho`` becomes ``kron(A, I)`` and
right multiplication ``rho B`` becomes ``kron(I, B.T)``.
"""
import numpy as np


def vec(rho):
    """Row-major stacking of a square matrix (works on stacks ``(..., d, d)``)."""
    rho = np.asarray(rho)
    if rho.ndim < 2 or rho.shape[-1] != rho.shape[-2]:
        raise ValueError(f"expected square matrix, got shape {rho.shape}")
    return rho.reshape(rho.shape[:-2] + (rho.shape[-1] ** 2,))


def unvec(v):
    """Inverse of :func:`vec`."""
    v = np.asarray(v)
    d = int(round(np.sqrt(v.shape[-1])))
    if d * d != v.shape[-1]:
        raise ValueError(f"length {v.shape[-1]} is not a perfect square")
    return v.reshape(v.shape[:-1] + (d, d))


def _square(a, name="operator"):
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def left_superop(a):
    a = _square(a)
    return np.kron(a, np.eye(a.shape[0]))


def right_superop(b):
    b = _square(b)
    return np.kron(np.eye(b.shape[0]), b.T)


def sandwich_superop(a, b):
    """Superoperator of ``rho -> a @ rho @ b``."""
    a = _square(a)
    b = _square(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return np.kron(a, b.T)


def commutator_superop(a):
    """Superoperator ``L`` with ``L @ vec(rho) == vec(a @ rho - rho @ a)``."""
    a = _square(a)
    eye = np.eye(a.shape[0])
    return np.kron(a, eye) - np.kron(eye, a.T)


def lindblad_superop(op, rate):
    """Dissipator ``rate * (L rho L^+ - {L^+ L, rho} / 2)`` in Liouville space."""
    if rate < 0:
        raise ValueError(f"Lindblad rate must be non-negative, got {rate}")
    op = _square(op, "Lindblad operator")
    d = op.shape[0]
    if rate == 0:
        return np.zeros((d * d, d * d), dtype=complex)
    ldl = op.conj().T @ op
    eye = np.eye(d)
    sup = np.kron(op, op.conj()) - 0.5 * (np.kron(ldl, eye) + np.kron(eye, ldl.T))
    return rate * sup


def liouvillian(h, dissipators=()):
    """Generator ``-i [h, .] + sum_k D_k`` acting on row-major vectors."""
    out = -1j * commutator_superop(h)
    for op, rate in dissipators:
        out = out + lindblad_superop(op, rate)
    return out
