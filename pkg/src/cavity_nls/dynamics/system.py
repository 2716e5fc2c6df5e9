"""Rotating-frame assembly shared by the full and perturbative propagators.

A *site* is a group of identical molecules (count ``n_s``) sharing one
density matrix; a *mode* is one cavity field amplitude.  The single-mode,
single-ensemble problem is one site and one mode; disorder adds sites,
multimode cavities add modes and sites.  Everything is expressed in a frame
rotating at ``carrier``: the field picks up ``exp(i carrier t)`` and every
level ``|j>`` picks up ``exp(i carrier N_j t)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..liouville import commutator_superop, vec
from ..models import MolecularModel, CavityConfig, PulseSpec


@dataclass(frozen=True)
class TimeGrid:
    """Uniform output grid plus integrator settings."""

    t0: float
    t_end: float
    n_points: int = 2 ** 14
    rtol: float = 1e-9
    atol: float = 1e-12
    max_step: float | None = None
    method: str = "dp5"

    def __post_init__(self):
        if not self.t_end > self.t0:
            raise ValueError("t_end must exceed t0")
        if self.n_points < 2:
            raise ValueError("need at least two output points")

    @property
    def times(self):
        return np.linspace(self.t0, self.t_end, self.n_points)

    @property
    def dt_out(self):
        return (self.t_end - self.t0) / (self.n_points - 1)

    def step_limit(self, pulses):
        # never let a step jump over a pulse
        widths = [p.tau_w for p in pulses]
        limit = min(widths) if widths else np.inf
        return min(limit, self.max_step) if self.max_step is not None else limit


@dataclass
class Ensemble:
    """Numerical form of the molecular sites and cavity modes in the rotating frame."""

    generators: np.ndarray  # (S, d2, d2) free Liouvillian -i L0 + D
    lplus: np.ndarray  # (S, d2, d2) commutator with mu_plus
    lminus: np.ndarray  # (S, d2, d2)
    tr_minus: np.ndarray  # (S, d2): Tr[mu_minus rho] = tr_minus . vec(rho)
    tr_plus: np.ndarray
    n_per_site: np.ndarray  # (S,)
    coupling: np.ndarray  # (K, S) exp(i k r_s)
    mode_detuning: np.ndarray  # (K,) omega_k - carrier
    kappa: float
    e0: float
    carrier: float
    rwa: bool
    rho0: np.ndarray  # (S, d2)
    dim: int

    @property
    def n_sites(self):
        return self.generators.shape[0]

    @property
    def n_modes(self):
        return self.coupling.shape[0]


def build_ensemble(models, n_per_site, cavity: CavityConfig, carrier, *, rwa,
                   mode_frequencies=None, coupling=None, rho0=None):
    models = list(models)
    dims = {m.dim for m in models}
    if len(dims) != 1:
        raise ValueError("all ensemble members must share the same dimension")
    dim = dims.pop()
    gens = np.stack([m.free_generator(carrier) for m in models])
    lplus = np.stack([commutator_superop(m.mu_plus) for m in models])
    lminus = np.stack([commutator_superop(m.mu_minus) for m in models])
    tr_minus = np.stack([m.mu_minus.T.reshape(-1) for m in models])
    tr_plus = np.stack([m.mu_plus.T.reshape(-1) for m in models])
    if mode_frequencies is None:
        mode_frequencies = np.array([cavity.omega_c])
    mode_frequencies = np.asarray(mode_frequencies, dtype=float)
    if coupling is None:
        coupling = np.ones((mode_frequencies.size, len(models)), dtype=complex)
    if rho0 is None:
        rho0 = np.stack([vec(m.ground_state()) for m in models])
    else:
        rho0 = np.asarray(rho0, dtype=complex)
        if rho0.ndim == 2 and rho0.shape == (dim, dim):
            rho0 = np.stack([vec(rho0)] * len(models))
    return Ensemble(
        generators=gens, lplus=lplus, lminus=lminus, tr_minus=tr_minus, tr_plus=tr_plus,
        n_per_site=np.asarray(n_per_site, dtype=float), coupling=np.asarray(coupling, dtype=complex),
        mode_detuning=mode_frequencies - carrier, kappa=cavity.kappa, e0=cavity.e0,
        carrier=float(carrier), rwa=bool(rwa), rho0=rho0, dim=dim,
    )


def common_carrier(pulses, carrier=None, lab_frame=False):
    if lab_frame:
        return 0.0
    if carrier is not None:
        return float(carrier)
    carriers = {float(p.omega) for p in pulses}
    if len(carriers) > 1:
        raise ValueError("pulses have different carriers; pass carrier= or lab_frame=True")
    return carriers.pop() if carriers else 0.0


@dataclass
class PulseTable:
    """Per-batch pulse parameters, arrays of shape ``(B, J)``."""

    eta: np.ndarray
    phi: np.ndarray
    tau: np.ndarray
    tau_w: np.ndarray
    detuning: np.ndarray  # omega_j - carrier
    mode: np.ndarray  # (J,) driven mode index

    @classmethod
    def from_batch(cls, batch, carrier, mode_index=None):
        batch = [list(ps) for ps in batch]
        n_j = {len(ps) for ps in batch}
        if len(n_j) != 1:
            raise ValueError("every batch member needs the same number of pulses")
        J = n_j.pop()

        def arr(attr):
            return np.array([[getattr(p, attr) for p in ps] for ps in batch], dtype=float).reshape(len(batch), J)

        mode = np.zeros(J, dtype=int) if mode_index is None else np.asarray(mode_index, dtype=int)
        return cls(eta=arr("eta"), phi=arr("phi"), tau=arr("tau"), tau_w=arr("tau_w"),
                   detuning=arr("omega") - carrier, mode=mode)

    def drive(self, t, n_modes):
        """Input term ``sum_j eta_j f_j(t) exp(-i d_j t - i phi_j)`` per mode, shape ``(B, K)``."""
        env = np.exp(-0.5 * ((t - self.tau) / self.tau_w) ** 2)
        vals = self.eta * env * np.exp(-1j * (self.detuning * t + self.phi))
        if n_modes == 1:
            return vals.sum(axis=1, keepdims=True)
        out = np.zeros((vals.shape[0], n_modes), dtype=complex)
        for j, k in enumerate(self.mode):
            out[:, k] += vals[:, j]
        return out


def full_rhs(ens: Ensemble, pulses: PulseTable):
    """Right-hand side for the nonperturbative mean-field state ``(B, K + S d2)``."""
    K, S, d2 = ens.n_modes, ens.n_sites, ens.dim ** 2
    e0, w = ens.e0, ens.carrier
    decay = -(0.5 * ens.kappa + 1j * ens.mode_detuning)
    cconj = ens.coupling.conj().T  # (S, K)
    single = K == 1 and S == 1

    def rhs(t, y):
        B = y.shape[0]
        alpha = y[:, :K]
        rho = y[:, K:].reshape(B, S, d2)
        field = alpha @ ens.coupling if not single else alpha * ens.coupling[0, 0]  # (B, S)
        free = np.einsum("sij,bsj->bsi", ens.generators, rho)
        qp = np.einsum("sij,bsj->bsi", ens.lplus, rho)
        qm = np.einsum("sij,bsj->bsi", ens.lminus, rho)
        fp = field[:, :, None]
        fm = field.conj()[:, :, None]
        if ens.rwa:
            drho = free - 1j * e0 * (fp * qp + fm * qm)
            pol = np.einsum("sj,bsj->bs", ens.tr_minus, rho)
        else:
            rot = np.exp(2j * w * t)
            drho = free - 1j * e0 * ((fp + fm * rot) * qp + (fm + fp / rot) * qm)
            pol = np.einsum("sj,bsj->bs", ens.tr_minus, rho) + rot * np.einsum("sj,bsj->bs", ens.tr_plus, rho)
        src = pol * ens.n_per_site[None, :]
        if single:
            source = src * cconj[0, 0]
        else:
            source = src @ cconj
        dalpha = decay[None, :] * alpha - 1j * e0 * source - pulses.drive(t, K)
        return np.concatenate([dalpha, drho.reshape(B, S * d2)], axis=1)

    return rhs


def linear_decay_rates(ens: Ensemble, tol=1e-9):
    """Decay rates of the linear field/coherence modes that the drive can reach.

    Eigen-decomposes the first-order (rotating-wave) equations around the
    initial state and keeps modes with a non-negligible residue in the
    field-to-field response.
    """
    K, S, d2 = ens.n_modes, ens.n_sites, ens.dim ** 2
    n = K + S * d2
    M = np.zeros((n, n), dtype=complex)
    M[:K, :K] = np.diag(-(0.5 * ens.kappa + 1j * ens.mode_detuning))
    for s in range(S):
        sl = slice(K + s * d2, K + (s + 1) * d2)
        M[sl, sl] = ens.generators[s]
        for k in range(K):
            M[k, sl] = -1j * ens.e0 * ens.n_per_site[s] * np.conj(ens.coupling[k, s]) * ens.tr_minus[s]
            M[sl, k] = -1j * ens.e0 * ens.coupling[k, s] * (ens.lplus[s] @ ens.rho0[s])
    lam, V = np.linalg.eig(M)
    W = np.linalg.inv(V)
    residue = np.abs(V[:K, :]).max(axis=0) * np.abs(W[:, :K]).max(axis=1)
    keep = residue > tol * residue.max()
    return np.sort(-lam[keep].real)


def default_grid(models, cavity, pulses, *, weights=None, n_points=2 ** 14, decay=1e-8,
                 min_window=12.0, carrier=None, **kw):
    """Time window from 0 to the last pulse plus the time the slowest linear mode needs to decay by ``decay``.

    The window is never shorter than ``min_window / kappa`` after the last pulse.
    """
    models = [models] if isinstance(models, MolecularModel) else list(models)
    weights = np.full(len(models), 1.0 / len(models)) if weights is None else np.asarray(weights)
    pulses = [p for p in pulses if p is not None]
    carrier = common_carrier(pulses, carrier)
    ens = build_ensemble(models, cavity.n_molecules * weights, cavity, carrier, rwa=True)
    rates = linear_decay_rates(ens)
    r_min = rates[rates > 0].min() if np.any(rates > 0) else cavity.kappa / 2
    last = max(p.tau + 5 * p.tau_w for p in pulses)
    tail = max(min_window / cavity.kappa, np.log(1 / decay) / r_min)
    return TimeGrid(0.0, float(last + tail), n_points, **kw)
