"""Nonperturbative mean-field propagation of one cavity mode and its molecules."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..integrator import integrate
from ..liouville import unvec
from .system import TimeGrid, PulseTable, build_ensemble, common_carrier, full_rhs


@dataclass
class Trajectory:
    """Cavity amplitude and density matrices sampled on ``t``, in the frame rotating at ``frame_carrier``.

    ``rho`` has shape ``(T, dim, dim)`` for a single ensemble and
    ``(T, S, dim, dim)`` when several sites share the field.
    """

    t: np.ndarray
    alpha: np.ndarray
    rho: np.ndarray | None
    frame_carrier: float
    rwa: bool

    def lab_alpha(self):
        return self.alpha * np.exp(-1j * self.frame_carrier * self.t)

    def populations(self):
        return np.real(np.diagonal(self.rho, axis1=-2, axis2=-1))

    def polarization(self, mu_minus):
        """``Tr[mu_minus rho(t)]`` in the rotating frame."""
        return np.einsum("ij,...ji->...", mu_minus, self.rho)


def propagate_full_batch(models, weights, cavity, pulse_sets, grid: TimeGrid, *, rwa=False,
                         carrier=None, lab_frame=False, rho0=None, store_rho=True,
                         mode_frequencies=None, coupling=None, mode_index=None, stats=None):
    """Propagate several pulse configurations through the same system in one batched run.

    ``models``/``weights`` describe the molecular sites (fractions of
    ``cavity.n_molecules``); ``mode_frequencies``/``coupling`` describe
    additional cavity modes and ``mode_index`` the mode each pulse drives.
    """
    pulse_sets = [list(ps) for ps in pulse_sets]
    flat = [p for ps in pulse_sets for p in ps]
    carrier = common_carrier(flat, carrier, lab_frame)
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or weights.size != len(models) or np.any(weights < 0):
        raise ValueError("need one non-negative weight per model")
    ens = build_ensemble(models, cavity.n_molecules * weights, cavity, carrier, rwa=rwa,
                         mode_frequencies=mode_frequencies, coupling=coupling, rho0=rho0)
    table = PulseTable.from_batch(pulse_sets, carrier, mode_index)
    rhs = full_rhs(ens, table)
    B, K, S, d2 = len(pulse_sets), ens.n_modes, ens.n_sites, ens.dim ** 2
    y0 = np.zeros((B, K + S * d2), dtype=complex)
    y0[:, K:] = ens.rho0.reshape(-1)
    observe = None if store_rho else (lambda ys: ys[:, :, :K])
    out = integrate(rhs, y0, grid.times, rtol=grid.rtol, atol=grid.atol,
                    max_step=grid.step_limit(flat), observe=observe, method=grid.method, stats=stats)
    trajs = []
    for b in range(B):
        alpha = out[:, b, :K]
        alpha = alpha[:, 0] if K == 1 else alpha
        rho = None
        if store_rho:
            rho = unvec(out[:, b, K:].reshape(-1, S, d2))
            rho = rho[:, 0] if S == 1 else rho
        trajs.append(Trajectory(t=grid.times, alpha=alpha, rho=rho, frame_carrier=carrier, rwa=rwa))
    return trajs


def propagate_full(model, cavity, pulses, grid: TimeGrid, *, rwa=False, carrier=None,
                   lab_frame=False, rho0=None, stats=None):
    """Solve the coupled field/molecule mean-field equations for one set of pulses.

    The dipole coupling is ``E0 (alpha + alpha*) mu`` unless ``rwa`` keeps only
    ``alpha mu_plus + alpha* mu_minus``.  Without ``lab_frame`` the pulses must
    share a carrier, which becomes the frame frequency.
    """
    return propagate_full_batch([model], [1.0], cavity, [pulses], grid, rwa=rwa, carrier=carrier,
                                lab_frame=lab_frame, rho0=rho0, stats=stats)[0]
