"""Independent references for the perturbative hierarchy.

Two routes that share no code with the hierarchy integrator:

* closed-form Fourier-domain solutions for a two-level ensemble under the
  rotating-wave approximation (linear field and the ``(2)(1)`` field);
* brute-force extraction of a perturbative coefficient from many runs of the
  nonperturbative propagator at scaled amplitudes and cycled phases.

All frequencies in the closed forms are rotating-frame offsets from the
common pulse carrier.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .dynamics.full import propagate_full_batch
from .dynamics.hierarchy import OrderIndex, check_phase
from .dynamics.system import TimeGrid, common_carrier
from .models import CavityConfig, MolecularModel, PulseSpec, gaussian_ft
from .spectra import Spectrum, field_to_spectrum


@dataclass
class OracleReport:
    name: str
    omega: np.ndarray
    reference: np.ndarray
    test: np.ndarray
    max_abs_error: float
    max_rel_error: float
    rel_l2_error: float
    tolerance: float | None = None
    atol: float = 0.0

    @property
    def passed(self):
        if self.tolerance is None:
            return True
        return self.rel_l2_error <= self.tolerance or self.max_abs_error <= self.atol


def _ratio(err, ref):
    # a vanishing reference is only matched exactly; ``atol`` covers the rest
    if ref > 0:
        return float(err / ref)
    return 0.0 if err == 0 else float("inf")


def compare(name, reference, test, omega=None, mask=None, tolerance=None, atol=0.0):
    """Error summary of ``test`` against ``reference`` restricted to ``mask``.

    Relative errors are normalised by the largest reference magnitude. A
    comparison also passes when every absolute error is below ``atol``, which
    covers references that vanish identically (an uncoupled cavity, say).
    """
    ref = np.asarray(reference)
    tst = np.asarray(test)
    if mask is None:
        mask = np.ones(ref.shape, dtype=bool)
    diff = np.abs(tst[mask] - ref[mask])
    scale = np.max(np.abs(ref[mask])) if np.any(mask) else 0.0
    l2 = np.linalg.norm(ref[mask])
    return OracleReport(
        name=name,
        omega=np.asarray(omega)[mask] if omega is not None else np.flatnonzero(mask),
        reference=ref[mask], test=tst[mask],
        max_abs_error=float(diff.max()) if diff.size else 0.0,
        max_rel_error=_ratio(diff.max() if diff.size else 0.0, scale),
        rel_l2_error=_ratio(np.linalg.norm(diff), l2),
        tolerance=tolerance, atol=float(atol),
    )


@dataclass(frozen=True)
class _TwoLevel:
    g: float
    n: float
    gamma: float  # population relaxation
    gamma_c: float  # coherence decay rate
    det_c: float  # omega_c - carrier
    det_0: float  # omega_0 - carrier
    kappa: float

    def cavity_term(self, z):
        return 0.5 * self.kappa + 1j * (self.det_c - z)

    def molecule_term(self, z):
        return self.gamma_c + 1j * (self.det_0 - z)


def _two_level(cavity: CavityConfig, model: MolecularModel, carrier):
    if model.dim != 2:
        raise ValueError("closed forms exist only for two-level models")
    gen = model.free_generator(0.0)
    coh = gen[2, 2]  # vec index of |e><g|
    gamma = -gen[3, 3].real  # decay of rho_ee
    params = _TwoLevel(g=cavity.e0 * abs(model.mu_plus[1, 0]), n=cavity.n_molecules, gamma=gamma,
                       gamma_c=-coh.real, det_c=cavity.omega_c - carrier, det_0=-coh.imag - carrier,
                       kappa=cavity.kappa)
    return params


def _linear_fields(p: _TwoLevel, pulse: PulseSpec, carrier, z):
    """Coefficients of ``alpha`` and ``rho_eg`` per unit amplitude at complex offsets ``z``."""
    drive = np.exp(-1j * pulse.phi) * gaussian_ft(pulse, z - (pulse.omega - carrier))
    if p.g == 0:
        return -drive / p.cavity_term(z), np.zeros_like(drive)
    mol = p.molecule_term(z)
    denom = p.cavity_term(z) * mol + p.g ** 2 * p.n
    alpha = -drive * mol / denom
    return alpha, 1j * p.g * drive / denom


def first_order_closed(cavity, model, pulse, omega, carrier=None):
    """Closed-form linear field and coherence spectra at absolute frequencies ``omega``."""
    carrier = pulse.omega if carrier is None else carrier
    p = _two_level(cavity, model, carrier)
    omega = np.asarray(omega)
    alpha, coh = _linear_fields(p, pulse, carrier, omega - carrier)
    return Spectrum(omega, alpha, carrier), Spectrum(omega, coh, carrier)


def alpha_first_order_closed(cavity, model, pulse, omega, carrier=None):
    """Linear field per unit input amplitude, ``-f~ / (k/2 + i(w_c - w) + g^2 N / (G + i(w0 - w)))``."""
    return first_order_closed(cavity, model, pulse, omega, carrier)[0]


def closed_form_poles(cavity, model, carrier=0.0):
    """Zeros of the linear-response denominator, as absolute complex frequencies."""
    p = _two_level(cavity, model, carrier)
    a = p.det_c - 0.5j * cavity.kappa
    b = p.det_0 - 1j * p.gamma_c
    roots = np.roots([1.0, -(a + b), a * b - p.g ** 2 * p.n])
    return tuple(sorted(carrier + roots, key=lambda z: z.real))


@dataclass
class ThirdOrderClosed:
    t: np.ndarray
    alpha: np.ndarray
    frame_carrier: float
    spectrum: Spectrum


def alpha_third_order_closed(cavity, model, pump, probe, grid, tau_delta=None, *, eps=None,
                             period=None, pad=4):
    """Pump-probe field ``alpha^(2)(1)`` of a two-level ensemble from its Fourier-domain solution.

    The population change ``w = rho_ee - rho_gg`` obeys
    ``dw/dt = 4 g Im(alpha rho_eg*) - gamma w``, and the third-order field is
    ``-i g N F(w) / (D_c(w) D_0(w) + g^2 N)`` with
    ``F = i g (alpha01 w20 + alpha10 w11)``.  Each product is a convolution of
    spectra; convolutions are evaluated with FFTs on a periodic grid with the
    same sampling step as ``grid``.  To keep the ``1/(gamma - i w)`` pole off
    the real axis every first-order factor is evaluated at ``w + i eps``
    (i.e. damped by ``exp(-eps t)``); the damping is removed at the end.
    """
    if tau_delta is not None:
        probe = probe.with_(tau=pump.tau + tau_delta)
    carrier = common_carrier([pump, probe])
    p = _two_level(cavity, model, carrier)
    t_out = grid.times
    dt = grid.dt_out
    span = t_out[-1] - t_out[0]
    if eps is None:
        eps = 0.05 * cavity.kappa
    if eps <= 0:
        raise ValueError("eps must be positive")
    if period is None:
        period = 1.5 * span + 25.0 / eps
    n = int(2 ** np.ceil(np.log2(max(period, span * 1.01) / dt)))
    if n * dt <= span:
        raise ValueError("convolution grid too short for the time window")
    omega = 2 * np.pi * scipy.fft.fftfreq(n, d=dt)
    tk = t_out[0] + dt * np.arange(n)
    norm_t = dt / np.sqrt(2 * np.pi)
    norm_w = (2 * np.pi / (n * dt)) / np.sqrt(2 * np.pi)

    def to_time(spec):
        return scipy.fft.fft(spec * np.exp(-1j * omega * t_out[0])) * norm_w

    def to_freq(x):
        return scipy.fft.ifft(x) * n * norm_t * np.exp(1j * omega * t_out[0])

    z1 = omega + 1j * eps
    a10, s10 = (to_time(x) for x in _linear_fields(p, pump, carrier, z1))
    a01, s01 = (to_time(x) for x in _linear_fields(p, probe, carrier, z1))

    def population(src):
        # src: damped Im(alpha rho_eg*) at 2 eps
        return to_time(4 * p.g * to_freq(src) / (p.gamma + 2 * eps - 1j * omega))

    w20 = population(np.imag(a10 * np.conj(s10)))
    w11 = population(np.imag(a10 * np.conj(s01) + a01 * np.conj(s10)))
    force = 1j * p.g * (a01 * w20 + a10 * w11)
    z3 = omega + 3j * eps
    denom = p.cavity_term(z3) * p.molecule_term(z3) + p.g ** 2 * p.n
    a21 = to_time(-1j * p.g * p.n * to_freq(force) / denom)
    m = t_out.size
    # leakage check: the damped field must have died out before the grid wraps
    tail = np.max(np.abs(a21[-max(n // 16, 1):]))
    if tail > 1e-10 * max(np.max(np.abs(a21[:m])), 1e-300):
        raise ValueError("convolution grid too narrow: wrap-around leakage above threshold")
    alpha = a21[:m] * np.exp(3 * eps * tk[:m])
    spec = field_to_spectrum(t_out, alpha, carrier, pad=pad, decay_tol=np.inf)
    return ThirdOrderClosed(t=t_out, alpha=alpha, frame_carrier=carrier, spectrum=spec)


@dataclass
class Extraction:
    t: np.ndarray
    alpha: np.ndarray
    frame_carrier: float
    target: OrderIndex
    n_runs: int


def _ladder_matrix(amps, first_power):
    amps = np.asarray(amps, dtype=float)
    powers = first_power + 2 * np.arange(amps.size)
    return amps[:, None] ** powers[None, :]


def finite_difference_extraction(model, cavity, pump, probe, target, grid: TimeGrid, *, scale=1e-3,
                                 ladder=(1.0, 2.0, 4.0), rwa=True, cycles=None, stats=None):
    """Perturbative field coefficient fitted from nonperturbative runs.

    Runs the full propagator on a grid of pump/probe phases and amplitudes.
    A discrete Fourier sum over the phases keeps the ``exp(-i v . Phi)``
    component; a Vandermonde fit in each amplitude over the powers
    ``l, l+2, l+4`` isolates the ``eta_p^n eta_p'^m`` term, where ``l`` is
    the lowest order sharing the target's phase class.  Phase cycles
    default to ``2n+2`` and ``2m+2`` points, which keeps every same-order
    alias apart.  With ``target.v is None`` only the parity
    is cycled and the pulse phases are kept, which reproduces a phaseless
    hierarchy entry.
    """
    target = OrderIndex(*target) if not isinstance(target, OrderIndex) else target
    n, m, v = target
    check_phase(n, m, v)
    if n + m > 3:
        raise ValueError("finite-difference extraction is limited to total order 3")
    carrier = common_carrier([x for x in (pump, probe) if x is not None])
    if n + m == 0:
        return Extraction(grid.times, np.zeros(grid.n_points, dtype=complex), carrier, target, 0)
    if m > 0 and probe is None:
        raise ValueError("target needs a probe pulse")

    def axis(order, pulse, which):
        # returns amplitudes, phases, Vandermonde matrix, Fourier weights, coefficient row
        if order == 0:
            return [0.0], [pulse.phi if pulse is not None else 0.0], np.ones((1, 1)), np.ones(1), 0
        if v is None:
            count = 2
            phases = pulse.phi + np.pi * np.arange(count)
            weights = np.exp(1j * order * np.pi * np.arange(count)) / count
            lowest = order % 2
        else:
            count = (2 * order + 2) if cycles is None else cycles[which]
            if count <= 2 * order:
                raise ValueError(f"{count} phase cycles alias order {order}")
            phases = 2 * np.pi * np.arange(count) / count
            weights = np.exp(1j * v[which] * phases) / count
            lowest = abs(v[which])
        amps = scale * np.asarray(ladder, dtype=float)
        row = (order - lowest) // 2
        if row >= amps.size:
            raise ValueError("amplitude ladder too short for the requested order")
        return list(amps), list(phases), _ladder_matrix(amps, lowest), weights, row

    amps_p, ph_p, vand_p, w_p, row_p = axis(n, pump, 0)
    amps_pp, ph_pp, vand_pp, w_pp, row_pp = axis(m, probe, 1)
    sets, index = [], []
    for i, ap in enumerate(amps_p):
        for j, app in enumerate(amps_pp):
            for a, fp in enumerate(ph_p):
                for b, fpp in enumerate(ph_pp):
                    ps = [pump.with_(eta=ap, phi=fp)]
                    if probe is not None:
                        ps.append(probe.with_(eta=app, phi=fpp))
                    sets.append(ps)
                    index.append((i, j, a, b))
    runs = propagate_full_batch([model], [1.0], cavity, sets, grid, rwa=rwa, carrier=carrier,
                                store_rho=False, stats=stats)
    y = np.zeros((len(amps_p), len(amps_pp), grid.n_points), dtype=complex)
    for (i, j, a, b), r in zip(index, runs):
        y[i, j] += w_p[a] * w_pp[b] * r.alpha
    # solve (V_p kron V_pp) c = y, then pick the target powers
    c = np.linalg.solve(vand_p, y.reshape(len(amps_p), -1)).reshape(y.shape)
    c = np.linalg.solve(vand_pp, np.moveaxis(c, 1, 0).reshape(len(amps_pp), -1))
    c = c.reshape(len(amps_pp), len(amps_p), grid.n_points)
    return Extraction(grid.times, c[row_pp, row_p], carrier, target, len(sets))
