"""Frequency-domain observables: field spectra, transmission and differential transmission.

Fourier convention: ``X(w) = (1/sqrt(2 pi)) int x(t) exp(i w t) dt``.  Spectra
are computed from rotating-frame trajectories, so the natural axis is the
offset from the frame carrier; ``Spectrum.omega`` stores absolute
frequencies and ``Spectrum.offset`` the rotating-frame ones.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .models import CavityConfig, MolecularModel, PulseSpec, gaussian_ft

DEFAULT_FLOOR = 1e-3
DEFAULT_PAD = 4


class SpectrumWarning(UserWarning):
    pass


@dataclass
class Spectrum:
    omega: np.ndarray  # absolute frequencies
    values: np.ndarray
    frame_carrier: float
    valid: np.ndarray | None = None

    @property
    def offset(self):
        return self.omega - self.frame_carrier

    @property
    def d_omega(self):
        return self.omega[1] - self.omega[0]

    def window(self, lo, hi):
        """Restrict to rotating-frame offsets ``lo <= w <= hi``."""
        sel = (self.offset >= lo) & (self.offset <= hi)
        valid = None if self.valid is None else self.valid[sel]
        return Spectrum(self.omega[sel], self.values[sel], self.frame_carrier, valid)


@dataclass
class DTResult:
    """Differential transmission over delays (rows) and frequencies (columns)."""

    tau_delta: np.ndarray
    omega: np.ndarray  # absolute frequencies
    dt: np.ndarray
    valid: np.ndarray
    frame_carrier: float
    v: tuple | None = None

    @property
    def offset(self):
        return self.omega - self.frame_carrier


def _check_uniform(t):
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("time grid must be one-dimensional with at least two points")
    dt = np.diff(t)
    if np.any(dt <= 0) or np.max(np.abs(dt - dt.mean())) > 1e-9 * max(abs(dt.mean()), 1e-300) * t.size:
        raise ValueError("time grid must be uniform")
    return (t[-1] - t[0]) / (t.size - 1)


def fft_size(n, pad=DEFAULT_PAD):
    return int(2 ** np.ceil(np.log2(n * pad)))


def field_to_spectrum(t, x, frame_carrier=0.0, pad=DEFAULT_PAD, decay_tol=1e-6, n_fft=None):
    """Trapezoid-weighted, zero-padded DFT of uniformly sampled ``x(t)``.

    ``x`` may carry leading batch dimensions; time is the last axis.  Warns
    when the trajectory has not decayed below ``decay_tol`` of its peak.
    """
    dt = _check_uniform(t)
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=complex)
    if x.shape[-1] != t.size:
        raise ValueError("trajectory and time grid lengths differ")
    peak = np.max(np.abs(x)) if x.size else 0.0
    if peak > 0 and np.max(np.abs(x[..., -1])) > decay_tol * peak:
        warnings.warn("trajectory has not decayed at the end of the time window; "
                      "spectrum will show truncation ripples", SpectrumWarning, stacklevel=2)
    n = n_fft or fft_size(t.size, pad)
    if n < t.size:
        raise ValueError("FFT size smaller than the trajectory")
    w = np.ones(t.size)
    w[0] = w[-1] = 0.5
    # sum_k x_k exp(i w_j t_k) = exp(i w_j t0) * n * ifft(x)_j
    vals = scipy.fft.ifft(x * w, n=n, axis=-1) * n
    freqs = 2 * np.pi * scipy.fft.fftfreq(n, d=dt)
    vals = vals * np.exp(1j * freqs * t[0]) * dt / np.sqrt(2 * np.pi)
    freqs = scipy.fft.fftshift(freqs)
    vals = scipy.fft.fftshift(vals, axes=-1)
    return Spectrum(omega=freqs + frame_carrier, values=vals, frame_carrier=frame_carrier)


def probe_weight(probe: PulseSpec, omega):
    """``|f~(w - w_probe)|`` at absolute frequencies ``omega``."""
    return np.abs(gaussian_ft(probe, np.asarray(omega) - probe.omega))


def valid_window(probe, omega, floor=DEFAULT_FLOOR):
    weight = probe_weight(probe, omega)
    mask = weight >= floor * np.max(weight)
    if not np.any(mask):
        raise ValueError("probe has no spectral weight on this frequency grid")
    return weight, mask


def transmission(alpha_spec: Spectrum, probe: PulseSpec, kappa, eta=None, floor=DEFAULT_FLOOR):
    """``(kappa/2)^2 |alpha|^2 / (eta^2 |f~|^2)``, NaN outside the probe band.

    ``eta`` defaults to ``probe.eta``; pass ``eta=1`` for hierarchy coefficients.
    """
    eta = probe.eta if eta is None else eta
    if eta <= 0:
        raise ValueError("probe amplitude must be positive")
    weight, mask = valid_window(probe, alpha_spec.omega, floor)
    out = np.full(alpha_spec.omega.shape, np.nan)
    out[mask] = (0.5 * kappa) ** 2 * np.abs(alpha_spec.values[..., mask]) ** 2 / (eta * weight[mask]) ** 2
    return Spectrum(alpha_spec.omega, out, alpha_spec.frame_carrier, mask)


def _dt_formula(a01, a21, weight, mask, kappa, eta_p):
    out = np.full(a01.shape, np.nan)
    prod = np.conj(a01[..., mask]) * a21[..., mask]
    out[..., mask] = (0.5 * kappa) ** 2 * eta_p ** 2 * 2 * prod.real / weight[mask] ** 2
    return out


def _order_spectrum(h, n, m, v, pad, n_fft=None):
    a = h.alpha(n, m, v)
    return field_to_spectrum(h.t, a, h.frame_carrier, pad=pad, decay_tol=np.inf, n_fft=n_fft)


def dt_spectrum(h, probe, kappa, eta_p, floor=DEFAULT_FLOOR, pad=DEFAULT_PAD):
    """Lowest-order differential transmission ``(k/2)^2 eta_p^2 2 Re[a01* a21] / |f~|^2``."""
    for order in ((0, 1), (2, 1)):
        if order[0] > h.max_n or order[1] > h.max_m:
            raise ValueError(f"hierarchy lacks order {order}")
    s01 = _order_spectrum(h, 0, 1, None, pad)
    s21 = _order_spectrum(h, 2, 1, None, pad)
    weight, mask = valid_window(probe, s01.omega, floor)
    return Spectrum(s01.omega, _dt_formula(s01.values, s21.values, weight, mask, kappa, eta_p),
                    h.frame_carrier, mask)


DT_PHASES = ((0, 1), (2, -1))


def dt_phase(h, v, probe, kappa, eta_p, floor=DEFAULT_FLOOR, pad=DEFAULT_PAD):
    """Contribution of the ``(2)(1)`` phase component ``v`` to the differential transmission.

    The probe reference is the conjugate linear field, i.e. the ``(0,-1)``
    component of ``alpha*``.  Components are taken at zero pulse phases.
    """
    v = tuple(v)
    if v not in DT_PHASES:
        raise ValueError(f"phase {v} does not contribute to the probe transmission; use one of {DT_PHASES}")
    if not h.phase_resolved:
        raise ValueError("phase components need a phase-resolved hierarchy")
    s01 = _order_spectrum(h, 0, 1, (0, 1), pad)
    s21 = _order_spectrum(h, 2, 1, v, pad)
    weight, mask = valid_window(probe, s01.omega, floor)
    return Spectrum(s01.omega, _dt_formula(s01.values, s21.values, weight, mask, kappa, eta_p),
                    h.frame_carrier, mask)


def dt_exact(h, probe, kappa, eta_p, eta_pp, floor=DEFAULT_FLOOR, pad=DEFAULT_PAD):
    """Difference of resummed probe transmissions with and without the pump.

    Only probe-dependent orders (``m >= 1``) enter, so the transmitted pump
    itself is excluded.  The result approaches :func:`dt_spectrum` as
    ``eta_p -> 0``.
    """
    on = np.zeros(h.t.size, dtype=complex)
    off = np.zeros(h.t.size, dtype=complex)
    for key, entry in h.entries.items():
        if key.m == 0 or entry.alpha is None:
            continue
        coef = eta_p ** key.n * eta_pp ** key.m
        on += coef * entry.alpha
        if key.n == 0:
            off += coef * entry.alpha
    s_on = field_to_spectrum(h.t, on, h.frame_carrier, pad=pad, decay_tol=np.inf)
    s_off = field_to_spectrum(h.t, off, h.frame_carrier, pad=pad, decay_tol=np.inf)
    t_on = transmission(s_on, probe, kappa, eta=eta_pp, floor=floor)
    t_off = transmission(s_off, probe, kappa, eta=eta_pp, floor=floor)
    return Spectrum(s_on.omega, t_on.values - t_off.values, h.frame_carrier, t_on.valid)


def stack_dt(rows, taus, v=None):
    """Assemble per-delay spectra into a :class:`DTResult`."""
    omega = rows[0].omega
    valid = rows[0].valid
    return DTResult(tau_delta=np.asarray(taus, dtype=float), omega=omega,
                    dt=np.stack([r.values for r in rows]), valid=valid,
                    frame_carrier=rows[0].frame_carrier, v=v)


def coherence_pole(model: MolecularModel, upper=1, lower=0):
    """Complex frequency ``w - i Gamma`` of the coherence ``|upper><lower|`` (no rotating frame)."""
    d = model.dim
    gen = model.free_generator(0.0)
    idx = upper * d + lower
    return 1j * gen[idx, idx]


def polariton_frequencies(cavity: CavityConfig, model: MolecularModel):
    """Roots of ``(w - w_c + i k/2)(w - w0 + i G) = g^2 N``, sorted by real part."""
    if model.dim != 2:
        raise ValueError("polariton frequencies are defined for two-level models")
    a = cavity.omega_c - 0.5j * cavity.kappa
    b = coherence_pole(model)
    g2n = (cavity.e0 * abs(model.mu_plus[1, 0])) ** 2 * cavity.n_molecules
    roots = np.roots([1.0, -(a + b), a * b - g2n])
    return tuple(sorted(roots, key=lambda z: z.real))


def find_peaks(spec: Spectrum, lo=None, hi=None, min_prominence=0.05):
    """Local maxima of a real spectrum restricted to its valid window, strongest first."""
    from scipy.signal import find_peaks as _fp

    vals = np.where(spec.valid if spec.valid is not None else True, spec.values, -np.inf)
    vals = np.nan_to_num(vals, nan=-np.inf)
    sel = np.ones(vals.shape, dtype=bool)
    if lo is not None:
        sel &= spec.offset >= lo
    if hi is not None:
        sel &= spec.offset <= hi
    vals = np.where(sel, vals, -np.inf)
    finite = np.isfinite(vals)
    base = np.where(finite, vals, np.min(vals[finite]) if finite.any() else 0.0)
    idx, props = _fp(base, prominence=min_prominence * np.max(base))
    order = np.argsort(base[idx])[::-1]
    return spec.omega[idx[order]]


def dt_scan(model, cavity, pump, probe, taus, grid=None, *, components=("total",), eta_p=None,
            models=None, weights=None, floor=DEFAULT_FLOOR, pad=DEFAULT_PAD, **kw):
    """Differential transmission for a list of pump-probe delays.

    All delays are propagated together on one time grid; the probe arrives at
    ``pump.tau + tau_delta``.  ``components`` may contain ``"total"`` and the
    phase pairs ``(0, 1)`` / ``(2, -1)``.  Returns ``{component: DTResult}``.
    """
    from .dynamics.hierarchy import propagate_hierarchy_batch
    from .dynamics.system import default_grid

    taus = np.asarray(taus, dtype=float)
    comps = [c if c == "total" else tuple(c) for c in components]
    for c in comps:
        if c != "total" and c not in DT_PHASES:
            raise ValueError(f"unknown component {c}")
    phase_resolved = any(c != "total" for c in comps)
    eta_p = pump.eta if eta_p is None else eta_p
    probes = [probe.with_(tau=pump.tau + tau) for tau in taus]
    if grid is None:
        last = probes[int(np.argmax(taus))]
        grid = default_grid(models or [model], cavity, [pump, last], weights=weights)
    states = propagate_hierarchy_batch(model, cavity, [pump] * len(taus), probes, grid, max_n=2, max_m=1,
                                       phase_resolved=phase_resolved, rwa=True, store_rho=False,
                                       keep={(0, 1), (2, 1)}, models=models, weights=weights, **kw)
    out = {}
    for c in comps:
        rows = []
        for h, pr in zip(states, probes):
            if c == "total":
                rows.append(dt_spectrum(h, pr, cavity.kappa, eta_p, floor, pad))
            else:
                rows.append(dt_phase(h, c, pr, cavity.kappa, eta_p, floor, pad))
        out[c] = stack_dt(rows, taus, None if c == "total" else c)
    return out
