"""Perturbative hierarchy in pump order n, probe order m and phase signature v.

Each order ``(n, m)`` of the density matrix is driven by every product of a
lower-order field ``alpha^(n-j)(m-j')`` with ``rho^(j)(j')``; all pairs with
``(j, j') != (n, m)`` contribute, not only ``j < n and j' < m``.  Only the
first-order fields are driven by the input pulses.

With ``phase_resolved=True`` every order is split further by the phase
signature ``v = (v_p, v_p')`` multiplying ``exp(-i v . Phi)``.  A field
component with signature ``u`` raises through ``mu_plus`` into ``u + w`` and
its conjugate lowers through ``mu_minus`` into ``-u + w``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import NamedTuple

import numpy as np

from ..integrator import integrate, IntegrationStats
from ..models import MolecularModel, CavityConfig, PulseSpec
from .system import TimeGrid, Ensemble, build_ensemble


class OrderIndex(NamedTuple):
    n: int
    m: int
    v: tuple | None = None

    @property
    def order(self):
        return self.n + self.m

    def conjugate(self):
        if self.v is None:
            return self
        return OrderIndex(self.n, self.m, (-self.v[0], -self.v[1]))


def phase_values(order):
    """Signatures reachable with ``order`` interactions of +-1 each."""
    return tuple(range(-order, order + 1, 2))


def allowed_phases(n, m):
    return [(a, b) for a in phase_values(n) for b in phase_values(m)]


def check_phase(n, m, v):
    if n < 0 or m < 0:
        raise ValueError("orders must be non-negative")
    if v is not None and tuple(v) not in allowed_phases(n, m):
        raise ValueError(f"phase {v} not reachable at order ({n})({m})")


@dataclass
class HierarchyEntry:
    alpha: np.ndarray | None  # (T,) cavity amplitude, None when identically zero
    rho: np.ndarray | None  # (T, d2) or (T, S, d2) for several sites


@dataclass
class HierarchyState:
    """Trajectories of all stored perturbative orders on a common time grid."""

    t: np.ndarray
    entries: dict
    frame_carrier: float
    phase_resolved: bool
    rwa: bool
    pump: PulseSpec
    probe: PulseSpec | None
    max_n: int
    max_m: int
    pruned: dict = field(default_factory=dict)

    def keys(self):
        return list(self.entries)

    def _select(self, n, m, v, attr):
        check_phase(n, m, v)
        if not self.phase_resolved:
            if v is not None:
                raise ValueError("hierarchy is not phase resolved")
            e = self.entries.get(OrderIndex(n, m, None))
            return getattr(e, attr) if e is not None else None
        if v is not None:
            e = self.entries.get(OrderIndex(n, m, tuple(v)))
            return getattr(e, attr) if e is not None else None
        parts = [getattr(e, attr) for k, e in self.entries.items()
                 if k.n == n and k.m == m and getattr(e, attr) is not None]
        return sum(parts) if parts else None

    def alpha(self, n, m, v=None):
        """Field coefficient; for phase-resolved states ``v=None`` sums all signatures at zero phase."""
        if n > self.max_n or m > self.max_m:
            raise KeyError(f"order ({n})({m}) was not propagated")
        out = self._select(n, m, v, "alpha")
        return np.zeros(self.t.size, dtype=complex) if out is None else out

    def rho(self, n, m, v=None):
        if n > self.max_n or m > self.max_m:
            raise KeyError(f"order ({n})({m}) was not propagated")
        out = self._select(n, m, v, "rho")
        if out is None:
            any_rho = next((e.rho for e in self.entries.values() if e.rho is not None), None)
            if any_rho is None:
                raise ValueError("density matrices were not stored")
            return np.zeros_like(any_rho)
        return out


def _order_keys(max_n, max_m, phase_resolved, max_order=None):
    keys = []
    for n, m in product(range(max_n + 1), range(max_m + 1)):
        if max_order is not None and n + m > max_order:
            continue
        if phase_resolved:
            keys += [OrderIndex(n, m, v) for v in allowed_phases(n, m)]
        else:
            keys.append(OrderIndex(n, m, None))
    keys.sort(key=lambda k: (k.n + k.m, k.n, k.m, k.v or (0, 0)))
    return keys


def _build_terms(keys, rwa, phase_resolved):
    """Source terms ``(target, alpha_key, conj, op, rot)``; op +1 = mu_plus, rot = exponent of exp(i w t)."""
    index = {k: i for i, k in enumerate(keys)}
    terms = []
    for tgt in keys:
        for a in keys:
            if a.n + a.m == 0:
                continue
            for w in keys:
                if a.n + w.n != tgt.n or a.m + w.m != tgt.m:
                    continue
                if phase_resolved:
                    u, wv = a.v, w.v
                    if (u[0] + wv[0], u[1] + wv[1]) == tgt.v:
                        terms.append((index[tgt], index[a], index[w], False, +1, 0))
                    if (-u[0] + wv[0], -u[1] + wv[1]) == tgt.v:
                        terms.append((index[tgt], index[a], index[w], True, -1, 0))
                else:
                    terms.append((index[tgt], index[a], index[w], False, +1, 0))
                    terms.append((index[tgt], index[a], index[w], True, -1, 0))
                    if not rwa:
                        terms.append((index[tgt], index[a], index[w], False, -1, -2))
                        terms.append((index[tgt], index[a], index[w], True, +1, +2))
    terms.sort(key=lambda x: x[0])
    return np.array(terms, dtype=int).reshape(-1, 6)


def _hierarchy_rhs(ens: Ensemble, keys, terms, pump_tab, probe_tab, phase_resolved):
    E = len(keys)
    S, d2 = ens.n_sites, ens.dim ** 2
    e0, w = ens.e0, ens.carrier
    decay = -(0.5 * ens.kappa + 1j * ens.mode_detuning[0])
    tgt, a_idx, w_idx = terms[:, 0], terms[:, 1], terms[:, 2]
    conj = terms[:, 3].astype(bool)
    plus = terms[:, 4] > 0
    rot = terms[:, 5]
    has_rot = bool(np.any(rot != 0))
    targets, starts = np.unique(tgt, return_index=True)
    nrm = ens.n_per_site
    driven_p = [i for i, k in enumerate(keys) if (k.n, k.m) == (1, 0) and (k.v in (None, (1, 0)))]
    driven_pp = [i for i, k in enumerate(keys) if (k.n, k.m) == (0, 1) and (k.v in (None, (0, 1)))]

    def rhs(t, y):
        B = y.shape[0]
        alpha = y[:, :E]
        rho = y[:, E:].reshape(B, S, E, d2)
        drho = np.einsum("sij,bsej->bsei", ens.generators, rho)
        if terms.size:
            qp = np.einsum("sij,bsej->bsei", ens.lplus, rho)
            qm = np.einsum("sij,bsej->bsei", ens.lminus, rho)
            fa = alpha[:, a_idx]
            fa = np.where(conj[None, :], fa.conj(), fa)
            if has_rot:
                fa = fa * np.exp(1j * w * t * rot)[None, :]
            q = np.where(plus[None, None, :, None], qp[:, :, w_idx], qm[:, :, w_idx])
            contrib = fa[:, None, :, None] * q
            summed = np.add.reduceat(contrib, starts, axis=2)
            drho[:, :, targets] += -1j * e0 * summed
        pol = np.einsum("sj,bsej->bse", ens.tr_minus, rho)
        if not ens.rwa:
            pol = pol + np.exp(2j * w * t) * np.einsum("sj,bsej->bse", ens.tr_plus, rho)
        src = np.einsum("bse,s->be", pol, nrm) if S > 1 else pol[:, 0] * nrm[0]
        dalpha = decay * alpha - 1j * e0 * src
        if driven_p:
            dp = pump_tab(t)
            for i in driven_p:
                dalpha[:, i] -= dp
        if driven_pp and probe_tab is not None:
            dpp = probe_tab(t)
            for i in driven_pp:
                dalpha[:, i] -= dpp
        return np.concatenate([dalpha, drho.reshape(B, S * E * d2)], axis=1)

    return rhs


def _unit_drive(pulses, carrier, include_phase):
    """Unit-amplitude drive ``f(t - tau) exp(-i d t [- i phi])`` per batch member."""
    tau = np.array([p.tau for p in pulses])
    tau_w = np.array([p.tau_w for p in pulses])
    det = np.array([p.omega for p in pulses]) - carrier
    phi = np.array([p.phi for p in pulses]) if include_phase else np.zeros(len(pulses))

    def drive(t):
        return np.exp(-0.5 * ((t - tau) / tau_w) ** 2 - 1j * (det * t + phi))

    return drive


def propagate_hierarchy_batch(model, cavity, pumps, probes, grid: TimeGrid, *, max_n=2, max_m=1,
                              phase_resolved=False, rwa=True, max_order=None, store_rho=True,
                              keep=None, carrier=None, models=None, weights=None, stats=None,
                              prune_tol=1e-13):
    """Propagate one hierarchy per ``(pump, probe)`` pair, sharing the time stepping.

    ``models``/``weights`` replace ``model`` by a weighted set of ensemble members
    (fractions of ``cavity.n_molecules``).  ``keep`` restricts which orders
    ``(n, m)`` are stored.  Returns a list of :class:`HierarchyState`.
    """
    if max_n < 0 or max_m < 0:
        raise ValueError("maximum orders must be non-negative")
    if phase_resolved and not rwa:
        raise ValueError("phase-resolved propagation requires the rotating-wave approximation")
    pumps = list(pumps)
    probes = list(probes) if probes is not None else [None] * len(pumps)
    if len(probes) != len(pumps):
        raise ValueError("pumps and probes must have equal length")
    if carrier is None:
        carrier = pumps[0].omega
    if models is None:
        models, weights = [model], [1.0]
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or not np.isclose(weights.sum(), 1.0):
        raise ValueError("weights must be non-negative and sum to one")
    ens = build_ensemble(models, cavity.n_molecules * weights, cavity, carrier, rwa=rwa)
    keys = _order_keys(max_n, max_m, phase_resolved, max_order)
    terms = _build_terms(keys, rwa, phase_resolved)
    include_phase = not phase_resolved
    pump_tab = _unit_drive(pumps, carrier, include_phase)
    probe_tab = _unit_drive(probes, carrier, include_phase) if probes[0] is not None else None
    rhs = _hierarchy_rhs(ens, keys, terms, pump_tab, probe_tab, phase_resolved)

    B, S, E, d2 = len(pumps), ens.n_sites, len(keys), ens.dim ** 2
    y0 = np.zeros((B, E + S * E * d2), dtype=complex)
    zero = keys.index(OrderIndex(0, 0, (0, 0) if phase_resolved else None))
    rho0 = np.zeros((S, E, d2), dtype=complex)
    rho0[:, zero] = ens.rho0
    y0[:, E:] = rho0.reshape(-1)

    stored = [i for i, k in enumerate(keys) if keep is None or (k.n, k.m) in keep]

    def observe(ys):
        m_ = ys.shape[0]
        a = ys[:, :, :E][:, :, stored]
        if not store_rho:
            return a
        r = ys[:, :, E:].reshape(m_, B, S, E, d2)[:, :, :, stored]
        return np.concatenate([a, r.reshape(m_, B, -1)], axis=2)

    all_pulses = [p for p in pumps + probes if p is not None]
    out = integrate(rhs, y0, grid.times, rtol=grid.rtol, atol=grid.atol,
                    max_step=grid.step_limit(all_pulses), observe=observe, method=grid.method,
                    stats=stats)

    states = []
    ns = len(stored)
    a_scale = max(np.max(np.abs(out[:, :, :ns])), 1e-300)
    for b in range(B):
        entries, pruned = {}, {}
        for j, i in enumerate(stored):
            key = keys[i]
            a = out[:, b, j]
            r = None
            if store_rho:
                r = out[:, b, ns:].reshape(-1, S, ns, d2)[:, :, j]
                r = r[:, 0] if S == 1 else r
            a_max = float(np.max(np.abs(a)))
            r_max = float(np.max(np.abs(r))) if r is not None else np.inf
            a_zero = a_max <= prune_tol * a_scale
            if phase_resolved and a_zero and r is not None and r_max <= prune_tol:
                pruned[key] = max(a_max, r_max)
                continue
            if a_zero and key.order > 0:
                pruned.setdefault(key, a_max)
                a = None
            entries[key] = HierarchyEntry(alpha=a, rho=r)
        states.append(HierarchyState(
            t=grid.times, entries=entries, frame_carrier=carrier, phase_resolved=phase_resolved,
            rwa=rwa, pump=pumps[b], probe=probes[b], max_n=max_n, max_m=max_m, pruned=pruned))
    return states


def propagate_hierarchy(model, cavity, pump, probe, grid, *, max_n=2, max_m=1, phase_resolved=False,
                        rwa=True, **kw):
    """Order- (and optionally phase-) resolved perturbative propagation for one pump/probe pair."""
    return propagate_hierarchy_batch(model, cavity, [pump], [probe], grid, max_n=max_n, max_m=max_m,
                                     phase_resolved=phase_resolved, rwa=rwa, **kw)[0]


def resum(h: HierarchyState, eta_p, eta_pp, phi_p=None, phi_pp=None, max_order=None, what="alpha"):
    """``sum eta_p^n eta_pp^m exp(-i v . Phi) X^(n)(m)_v`` over the stored entries.

    Phaseless hierarchies already carry the pulse phases in their drive, so
    explicit phases are rejected for them.
    """
    if what not in ("alpha", "rho"):
        raise ValueError("what must be 'alpha' or 'rho'")
    if not h.phase_resolved and (phi_p is not None or phi_pp is not None):
        raise ValueError("phaseless hierarchy: phases are fixed by the pulses")
    if h.phase_resolved:
        phi_p = h.pump.phi if phi_p is None else phi_p
        phi_pp = (h.probe.phi if h.probe is not None else 0.0) if phi_pp is None else phi_pp
    total = None
    for key, entry in h.entries.items():
        if max_order is not None and key.order > max_order:
            continue
        x = getattr(entry, what)
        if x is None:
            continue
        coef = eta_p ** key.n * eta_pp ** key.m
        if key.v is not None:
            coef = coef * np.exp(-1j * (key.v[0] * phi_p + key.v[1] * phi_pp))
        term = coef * x
        total = term if total is None else total + term
    if total is None:
        return np.zeros(h.t.size, dtype=complex)
    return total
