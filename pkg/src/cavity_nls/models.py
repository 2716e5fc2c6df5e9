"""Molecular, cavity and pulse definitions.

All frequencies and rates are in units of the cavity loss rate kappa by
convention, times in units of 1/kappa.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .liouville import lindblad_superop, commutator_superop


def _excitation_numbers(mu_plus):
    """Number of quanta of every level, found by walking ``mu_plus`` from level 0."""
    dim = mu_plus.shape[0]
    exc = np.full(dim, -1, dtype=int)
    exc[0] = 0
    changed = True
    while changed:
        changed = False
        for hi, lo in zip(*np.nonzero(np.abs(mu_plus) > 0)):
            if exc[lo] >= 0 and exc[hi] < 0:
                exc[hi] = exc[lo] + 1
                changed = True
            elif exc[hi] >= 0 and exc[lo] < 0:
                exc[lo] = exc[hi] - 1
                changed = True
    # levels not reachable through the dipole are left in the ground manifold
    exc[exc < 0] = 0
    return exc


@dataclass(frozen=True, eq=False)
class MolecularModel:
    """One representative molecule.

    Attributes
    ----------
    h0 : (dim, dim) Hermitian matrix, absolute level energies.
    mu_plus : raising part of the dipole operator; ``mu_minus`` is its adjoint.
    dissipators : sequence of ``(operator, rate)`` Lindblad channels.
    excitation : quanta per level, used to move into the rotating frame.
        Derived from ``mu_plus`` when omitted.
    """

    h0: np.ndarray
    mu_plus: np.ndarray
    dissipators: tuple = ()
    excitation: np.ndarray | None = None

    def __post_init__(self):
        h0 = np.asarray(self.h0, dtype=complex)
        mu = np.asarray(self.mu_plus, dtype=complex)
        if h0.ndim != 2 or h0.shape[0] != h0.shape[1]:
            raise ValueError("h0 must be a square matrix")
        if mu.shape != h0.shape:
            raise ValueError("mu_plus must have the same shape as h0")
        if not np.allclose(h0, h0.conj().T, atol=1e-12):
            raise ValueError("h0 must be Hermitian")
        diss = tuple((np.asarray(op, dtype=complex), float(rate)) for op, rate in self.dissipators)
        for op, rate in diss:
            if rate < 0:
                raise ValueError(f"negative dissipation rate {rate}")
            if op.shape != h0.shape:
                raise ValueError("Lindblad operator has wrong dimension")
        exc = _excitation_numbers(mu) if self.excitation is None else np.asarray(self.excitation, dtype=int)
        if exc.shape != (h0.shape[0],):
            raise ValueError("excitation must list one integer per level")
        hi, lo = np.nonzero(np.abs(mu) > 0)
        if np.any(exc[hi] != exc[lo] + 1):
            raise ValueError("mu_plus must only connect a level to one with one more quantum")
        # the rotating frame is exp(i w N t); h0 has to conserve the quanta
        if np.any(np.abs(h0[exc[:, None] != exc[None, :]]) > 1e-12):
            raise ValueError("h0 must not couple levels with different excitation numbers")
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "mu_plus", mu)
        object.__setattr__(self, "dissipators", diss)
        object.__setattr__(self, "excitation", exc)

    @property
    def dim(self):
        return self.h0.shape[0]

    @property
    def mu_minus(self):
        return self.mu_plus.conj().T

    @property
    def dipole(self):
        return self.mu_plus + self.mu_minus

    def ground_state(self):
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        rho[0, 0] = 1.0
        return rho

    def frame_hamiltonian(self, carrier):
        """``h0 - carrier * N``: the free Hamiltonian seen in the rotating frame."""
        return self.h0 - carrier * np.diag(self.excitation).astype(complex)

    def dissipator(self):
        d2 = self.dim ** 2
        out = np.zeros((d2, d2), dtype=complex)
        for op, rate in self.dissipators:
            out += lindblad_superop(op, rate)
        return out

    def free_generator(self, carrier=0.0):
        """Liouvillian ``-i L0 + D`` in the frame rotating at ``carrier``."""
        return -1j * commutator_superop(self.frame_hamiltonian(carrier)) + self.dissipator()

    def with_h0(self, h0):
        return replace(self, h0=h0)


def build_two_level(omega0, mu_ge=1.0, gamma=0.0, gamma_phi=0.0):
    """Two-level system |g>, |e> with emission rate ``gamma`` and pure dephasing ``gamma_phi``.

    The coherence decays at ``(gamma + gamma_phi) / 2``.
    """
    if omega0 <= 0:
        raise ValueError("omega0 must be positive")
    if gamma < 0 or gamma_phi < 0:
        raise ValueError("rates must be non-negative")
    sigma = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|
    diss = []
    if gamma > 0:
        diss.append((sigma, gamma))
    if gamma_phi > 0:
        diss.append((sigma.conj().T @ sigma, gamma_phi))
    return MolecularModel(
        h0=np.diag([0.0, omega0]),
        mu_plus=mu_ge * sigma.conj().T,
        dissipators=tuple(diss),
    )


def build_three_level(omega2, omega3, mu12=1.0, mu23=np.sqrt(2.0), gamma_phi=0.0):
    """Ladder |1>, |2>, |3> with level energies 0, ``omega2``, ``omega3``.

    Dephasing acts through the projectors on |2> and |3>, each at rate
    ``gamma_phi``: rho_21 and rho_31 decay at ``gamma_phi / 2``, rho_32 at
    ``gamma_phi``.
    """
    if not omega3 > omega2 > 0:
        raise ValueError("need omega3 > omega2 > 0")
    if gamma_phi < 0:
        raise ValueError("rates must be non-negative")
    mu_plus = np.zeros((3, 3), dtype=complex)
    mu_plus[1, 0] = mu12
    mu_plus[2, 1] = mu23
    diss = []
    if gamma_phi > 0:
        diss.append((np.diag([0.0, 1.0, 0.0]), gamma_phi))
        diss.append((np.diag([0.0, 0.0, 1.0]), gamma_phi))
    return MolecularModel(
        h0=np.diag([0.0, omega2, omega3]),
        mu_plus=mu_plus,
        dissipators=tuple(diss),
        excitation=np.array([0, 1, 2]),
    )


@dataclass(frozen=True)
class CavityConfig:
    """Single cavity mode with frequency ``omega_c`` and loss rate ``kappa``.

    ``e0`` is the zero-point field amplitude; the single-molecule coupling is
    ``mu_ge * e0`` and the collective one ``mu_ge * e0 * sqrt(n_molecules)``.
    """

    omega_c: float
    kappa: float = 1.0
    n_molecules: float = 1.0
    e0: float = 1.0

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.e0 < 0:
            raise ValueError("e0 must be non-negative")
        if self.n_molecules < 1:
            raise ValueError("n_molecules must be >= 1")

    @classmethod
    def from_collective_coupling(cls, omega_c, g_sqrt_n, kappa=1.0, n_molecules=1.0, mu_ge=1.0):
        """Pick ``e0`` such that ``mu_ge * e0 * sqrt(n_molecules) == g_sqrt_n``."""
        return cls(omega_c=omega_c, kappa=kappa, n_molecules=n_molecules,
                   e0=g_sqrt_n / (mu_ge * np.sqrt(n_molecules)))

    def coupling(self, mu_ge=1.0):
        return mu_ge * self.e0


@dataclass(frozen=True)
class PulseSpec:
    """Gaussian input pulse ``eta * f(t - tau) * exp(-i omega t - i phi)``.

    ``k`` is the transverse wavevector, only used by multimode cavities.
    """

    eta: float
    omega: float
    tau: float
    tau_w: float
    phi: float = 0.0
    k: float = 0.0

    def __post_init__(self):
        if self.tau_w <= 0:
            raise ValueError("tau_w must be positive")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")

    def envelope(self, t):
        return pulse_envelope(self, t)

    def with_(self, **kw):
        return replace(self, **kw)


def pulse_envelope(p, t):
    """``exp(-(t - tau)^2 / (2 tau_w^2))``, peak value 1 at ``t = tau``."""
    t = np.asarray(t, dtype=float)
    return np.exp(-0.5 * ((t - p.tau) / p.tau_w) ** 2)


def gaussian_ft(p, omega):
    """``(1/sqrt(2 pi)) int f(t) exp(i omega t) dt = tau_w exp(-omega^2 tau_w^2 / 2) exp(i omega tau)``.

    ``omega`` may be complex (analytic continuation).
    """
    omega = np.asarray(omega)
    return p.tau_w * np.exp(-0.5 * (omega * p.tau_w) ** 2) * np.exp(1j * omega * p.tau)
