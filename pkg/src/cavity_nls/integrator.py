"""Adaptive Dormand-Prince 5(4) integrator with dense output.

Works on complex state arrays of any shape, typically ``(batch, n)``, so that
many independent propagations share one time-stepping loop.  Error control
uses the max-norm over all components, which makes the accepted step
sequence insensitive to duplicated components (two identical ensemble
members step exactly like one).

The solution is only stored at the requested uniform output times, after an
optional ``observe`` reduction, so long runs never keep the full state history.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate

# Dormand & Prince (1980) tableau with the Shampine dense-output polynomial.
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


class IntegrationError(RuntimeError):
    pass


@dataclass
class IntegrationStats:
    n_steps: int = 0
    n_rejected: int = 0
    n_rhs: int = 0


def _max_norm(x, scale):
    return float(np.max(np.abs(x) / scale)) if x.size else 0.0


def _initial_step(fun, t0, y0, f0, rtol, atol, max_step):
    scale = atol + np.abs(y0) * rtol
    d0 = _max_norm(y0, scale)
    d1 = _max_norm(f0, scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    y1 = y0 + h0 * f0
    f1 = fun(t0 + h0, y1)
    d2 = _max_norm(f1 - f0, scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, max_step)


def _dense_eval(y_old, h, K, theta):
    # theta: (m,) in [0, 1]; returns (m, *y.shape)
    Q = np.tensordot(_P.T, K, axes=(1, 0))  # (4, *shape)
    powers = np.cumprod(np.repeat(theta[:, None], 4, axis=1), axis=1)  # (m, 4)
    return y_old[None] + h * np.tensordot(powers, Q, axes=(1, 0))


def integrate(fun, y0, t_out, *, rtol=1e-9, atol=1e-12, max_step=np.inf,
              observe=None, method="dp5", max_steps=10_000_000, stats=None):
    """Integrate ``dy/dt = fun(t, y)`` and sample at the times ``t_out``.

    Parameters
    ----------
    fun : callable ``(t, y) -> dy`` with ``y`` shaped like ``y0``.
    t_out : increasing output times; integration starts at ``t_out[0]``.
    observe : optional reduction applied to a stack ``(m, *y.shape)`` of
        sampled states before storing.
    method : ``"dp5"`` (default) or any explicit scipy solver name such as
        ``"DOP853"``; the latter uses scipy's RMS error norm.

    Returns
    -------
    array of shape ``(len(t_out), ...)``.
    """
    t_out = np.asarray(t_out, dtype=float)
    if t_out.ndim != 1 or t_out.size < 2 or np.any(np.diff(t_out) <= 0):
        raise ValueError("t_out must be a strictly increasing 1-D array")
    y0 = np.asarray(y0, dtype=complex)
    if observe is None:
        observe = lambda ys: ys  # noqa: E731
    stats = stats if stats is not None else IntegrationStats()
    first = observe(y0[None])[0]
    out = np.empty((t_out.size,) + np.shape(first), dtype=np.result_type(first, complex))
    out[0] = first
    if method != "dp5":
        return _integrate_scipy(fun, y0, t_out, rtol, atol, max_step, observe, method, out, stats)

    t = t_out[0]
    t_end = t_out[-1]
    y = y0.copy()
    f = fun(t, y)
    stats.n_rhs += 1
    h = _initial_step(fun, t, y, f, rtol, atol, max_step)
    stats.n_rhs += 1
    K = np.empty((7,) + y.shape, dtype=complex)
    next_idx = 1
    while next_idx < t_out.size:
        if stats.n_steps >= max_steps:
            raise IntegrationError(f"exceeded {max_steps} steps at t={t}")
        h = min(h, max_step, t_end - t)
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow at t={t}")
        K[0] = f
        for s in range(1, 6):
            dy = np.tensordot(_A[s], K[:s], axes=(0, 0)) * h
            K[s] = fun(t + _C[s] * h, y + dy)
        y_new = y + h * np.tensordot(_B, K[:6], axes=(0, 0))
        f_new = fun(t + h, y_new)
        K[6] = f_new
        stats.n_rhs += 6
        err = h * np.tensordot(_E, K, axes=(0, 0))
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = _max_norm(err, scale)
        if not np.isfinite(err_norm):
            raise IntegrationError(f"non-finite error estimate at t={t}")
        if err_norm <= 1.0:
            t_new = t + h
            if t_end - t_new < 1e-12 * max(1.0, abs(t_end)):
                t_new = t_end
            stop = np.searchsorted(t_out, t_new, side="right")
            if stop > next_idx:
                theta = (t_out[next_idx:stop] - t) / h
                out[next_idx:stop] = observe(_dense_eval(y, h, K, theta))
                next_idx = stop
            t, y, f = t_new, y_new, f_new
            stats.n_steps += 1
            factor = MAX_FACTOR if err_norm == 0 else min(MAX_FACTOR, SAFETY * err_norm ** -0.2)
            h *= factor
        else:
            stats.n_rejected += 1
            h *= max(MIN_FACTOR, SAFETY * err_norm ** -0.2)
    return out


def _integrate_scipy(fun, y0, t_out, rtol, atol, max_step, observe, method, out, stats):
    shape = y0.shape
    solver_cls = getattr(scipy.integrate, method)

    def flat(t, y):
        stats.n_rhs += 1
        return fun(t, y.reshape(shape)).ravel()

    solver = solver_cls(flat, t_out[0], y0.ravel(), t_out[-1], rtol=rtol, atol=atol,
                        max_step=max_step, vectorized=False)
    next_idx = 1
    while next_idx < t_out.size:
        msg = solver.step()
        if solver.status == "failed":
            raise IntegrationError(msg)
        stats.n_steps += 1
        stop = np.searchsorted(t_out, solver.t, side="right")
        if solver.status == "finished":
            stop = t_out.size
        if stop > next_idx:
            dense = solver.dense_output()
            ys = dense(t_out[next_idx:stop]).T.reshape((stop - next_idx,) + shape)
            out[next_idx:stop] = observe(ys)
            next_idx = stop
    return out
