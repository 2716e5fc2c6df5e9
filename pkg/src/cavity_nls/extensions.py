"""Disordered ensembles, bright/dark populations and a transverse multimode cavity."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics.full import Trajectory, propagate_full_batch
from .dynamics.hierarchy import propagate_hierarchy_batch
from .dynamics.system import TimeGrid
from .models import MolecularModel, PulseSpec, build_two_level


@dataclass(frozen=True)
class DisorderEnsemble:
    """Weighted list of molecular members sharing one cavity field."""

    members: tuple  # ((MolecularModel, weight), ...)

    def __post_init__(self):
        members = tuple((m, float(w)) for m, w in self.members)
        if not members:
            raise ValueError("ensemble needs at least one member")
        if len({m.dim for m, _ in members}) != 1:
            raise ValueError("all members must share the same dimension")
        weights = np.array([w for _, w in members])
        if np.any(weights < 0):
            raise ValueError("weights must be non-negative")
        if not np.isclose(weights.sum(), 1.0, rtol=0, atol=1e-12):
            raise ValueError("weights must sum to one")
        object.__setattr__(self, "members", members)

    @property
    def models(self):
        return [m for m, _ in self.members]

    @property
    def weights(self):
        return np.array([w for _, w in self.members])

    @classmethod
    def two_subensembles(cls, omega0, delta, **kw):
        """Two equal halves with transition frequencies ``omega0 -+ delta``."""
        if delta < 0 or delta >= omega0:
            raise ValueError("need 0 <= delta < omega0")
        return cls(((build_two_level(omega0 - delta, **kw), 0.5), (build_two_level(omega0 + delta, **kw), 0.5)))


def propagate_disordered(ens: DisorderEnsemble, cavity, pulses, grid: TimeGrid, *, mode="full",
                         rwa=False, max_n=2, max_m=1, phase_resolved=False, **kw):
    """Propagate all members against the shared field.

    ``mode="full"`` returns a :class:`Trajectory` whose ``rho`` carries a
    member axis.  ``mode="hierarchy"`` takes ``pulses = [pump, probe]`` and
    returns a hierarchy state with per-member density corrections.
    """
    pulses = list(pulses)
    if mode == "full":
        return propagate_full_batch(ens.models, ens.weights, cavity, [pulses], grid, rwa=rwa, **kw)[0]
    if mode == "hierarchy":
        pump = pulses[0]
        probe = pulses[1] if len(pulses) > 1 else None
        return propagate_hierarchy_batch(None, cavity, [pump], [probe], grid, max_n=max_n, max_m=max_m,
                                         phase_resolved=phase_resolved, rwa=True, models=ens.models,
                                         weights=ens.weights, **kw)[0]
    raise ValueError(f"unknown mode {mode!r}; use 'full' or 'hierarchy'")


def bright_dark(sigma_exp, pop, n_molecules, tol=1e-9):
    """Bright and dark populations of a homogeneous mean-field state.

    ``p_B = <s+s> + (N-1)|<s>|^2`` and ``p_D = (N-1)(<s+s> - |<s>|^2)``,
    exact in ``N``; ``p_B + p_D = N <s+s>``.
    """
    sigma_exp = np.asarray(sigma_exp, dtype=complex)
    pop = np.asarray(pop, dtype=float)
    coh2 = np.abs(sigma_exp) ** 2
    if np.any(pop < -tol) or np.any(pop > 1 + tol):
        raise ValueError("excited population outside [0, 1]")
    if np.any(coh2 > pop + tol):
        raise ValueError("|<sigma>|^2 exceeds <sigma+ sigma>: state is not physical")
    if n_molecules < 1:
        raise ValueError("n_molecules must be >= 1")
    p_b = pop + (n_molecules - 1) * coh2
    p_d = (n_molecules - 1) * (pop - coh2)
    return p_b, p_d


def bright_dark_from_rho(rho, n_molecules, tol=1e-9):
    """Bright/dark populations from two-level density matrices ``(..., 2, 2)``."""
    rho = np.asarray(rho)
    return bright_dark(rho[..., 1, 0], rho[..., 1, 1].real, n_molecules, tol)


@dataclass(frozen=True)
class MultimodeCavity:
    """Transverse modes ``k = 2 pi j / W``, ``j = -N_k/2 .. N_k/2 - 1``, with molecules grouped on ``N_k`` sites."""

    n_k: int
    width: float
    omega_c: float
    kappa: float = 1.0
    n_molecules: float = 1.0
    e0: float = 1.0
    velocity: float = 1.0
    r0: float = 0.0

    def __post_init__(self):
        if self.n_k < 1:
            raise ValueError("n_k must be >= 1")
        if self.width <= 0:
            raise ValueError("width must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")

    @property
    def dr(self):
        return self.width / self.n_k

    @property
    def k(self):
        return 2 * np.pi / self.width * (np.arange(self.n_k) - self.n_k // 2)

    @property
    def r(self):
        return self.r0 + self.dr * np.arange(self.n_k)

    @property
    def omega_k(self):
        return self.omega_c + (self.k * self.velocity) ** 2 / (2 * self.omega_c)

    @property
    def n_per_site(self):
        return self.n_molecules / self.n_k

    def coupling(self):
        return np.exp(1j * np.outer(self.k, self.r))

    def mode_of(self, k, tol=1e-9):
        idx = int(np.argmin(np.abs(self.k - k)))
        if abs(self.k[idx] - k) > tol * max(1.0, abs(k)):
            raise ValueError(f"wavevector {k} is not on the cavity grid")
        return idx


@dataclass
class MultimodeResult:
    t: np.ndarray
    alpha: np.ndarray  # (T, N_k)
    rho: np.ndarray  # (T, N_k, d, d)
    k: np.ndarray
    r: np.ndarray
    frame_carrier: float

    def excitation(self, model: MolecularModel, n_per_site):
        """``sum_k |alpha_k|^2 + N_E sum_n <N_n>`` with ``N`` the quanta operator."""
        quanta = np.einsum("j,tnjj->t", model.excitation.astype(float), self.rho).real
        return np.sum(np.abs(self.alpha) ** 2, axis=1) + n_per_site * quanta


def propagate_multimode(mm: MultimodeCavity, model, pulses, grid: TimeGrid, *, carrier=None, **kw):
    """Rotating-wave dynamics of all modes and sites; pulse ``k`` selects the driven mode."""
    pulses = list(pulses)
    mode_index = [mm.mode_of(p.k) for p in pulses]
    weights = np.full(mm.n_k, 1.0 / mm.n_k)
    traj: Trajectory = propagate_full_batch(
        [model] * mm.n_k, weights, mm, [pulses], grid, rwa=True, carrier=carrier,
        mode_frequencies=mm.omega_k, coupling=mm.coupling(), mode_index=mode_index, **kw)[0]
    alpha = traj.alpha.reshape(traj.t.size, -1)
    rho = traj.rho.reshape(traj.t.size, mm.n_k, model.dim, model.dim)
    return MultimodeResult(t=traj.t, alpha=alpha, rho=rho, k=mm.k, r=mm.r, frame_carrier=traj.frame_carrier)
