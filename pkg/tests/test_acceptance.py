"""Acceptance criteria, one recorded line each (see the terminal summary)."""
import time

import numpy as np
import pytest

from cavity_nls import CavityConfig, PulseSpec, build_three_level, build_two_level
from cavity_nls.dynamics import TimeGrid, propagate_full, propagate_full_batch, propagate_hierarchy, resum
from cavity_nls.dynamics.system import default_grid
from cavity_nls.extensions import DisorderEnsemble, MultimodeCavity, propagate_disordered, propagate_multimode
from cavity_nls.oracle import alpha_first_order_closed, alpha_third_order_closed, finite_difference_extraction
from cavity_nls.spectra import dt_scan, field_to_spectrum, find_peaks, transmission, valid_window

KAPPA = 1.0
G_SQRT_N = 3.0
W0 = 100.0


def cavity(omega_c=W0):
    return CavityConfig.from_collective_coupling(omega_c, G_SQRT_N, kappa=KAPPA)


def rel_l2(ref, test, mask=None):
    mask = np.ones(np.shape(ref), dtype=bool) if mask is None else mask
    return float(np.linalg.norm(test[mask] - ref[mask]) / np.linalg.norm(ref[mask]))


def envelope(res, mask=None):
    """Largest |dT| over the valid window, one value per delay."""
    mask = res.valid if mask is None else mask
    return np.max(np.abs(res.dt[:, mask]), axis=1)


# narrowband-in-time pulses of the oracle and linear figures
S1_PUMP = PulseSpec(1.0, W0, 2.0, 0.05)


def test_criterion_1_linear_response(criterion):
    start = time.perf_counter()
    model = build_two_level(W0)
    cav = cavity()
    grid = default_grid(model, cav, [S1_PUMP])
    h = propagate_hierarchy(model, cav, S1_PUMP, None, grid, max_n=1, max_m=0)
    spec = field_to_spectrum(h.t, h.alpha(1, 0), h.frame_carrier)
    trans = transmission(spec, S1_PUMP, KAPPA, eta=1.0)
    peaks = np.sort(find_peaks(trans, lo=-10, hi=10)[:2]) - h.frame_carrier
    closed = alpha_first_order_closed(cav, model, S1_PUMP, spec.omega, carrier=h.frame_carrier)
    err = rel_l2(closed.values, spec.values, trans.valid)
    elapsed = time.perf_counter() - start
    bin_ = spec.d_omega
    peak_err = np.abs(peaks - np.array([-G_SQRT_N, G_SQRT_N]))
    ok = peaks.size == 2 and np.all(peak_err <= bin_) and err <= 1e-6 and elapsed < 5.0
    criterion("criterion 1 (linear response)", ok,
              f"peaks {peaks[0]:+.4f}, {peaks[1]:+.4f} (bin {bin_:.4f}); closed vs hierarchy rel L2 {err:.2e} "
              f"(<= 1e-6); {elapsed:.1f} s (< 5 s)")
    assert ok


def test_criterion_2_third_order_triangle(criterion):
    start = time.perf_counter()
    model = build_two_level(W0)
    cav = cavity()
    probe = S1_PUMP.with_(tau=S1_PUMP.tau + 1.0)
    grid = default_grid(model, cav, [S1_PUMP, probe])
    h = propagate_hierarchy(model, cav, S1_PUMP, probe, grid)
    closed = alpha_third_order_closed(cav, model, S1_PUMP, probe, grid).spectrum
    fd = finite_difference_extraction(model, cav, S1_PUMP, probe, (2, 1, None), grid)
    spec = lambda x: field_to_spectrum(grid.times, x, h.frame_carrier, decay_tol=np.inf).values  # noqa: E731
    hier, fdv = spec(h.alpha(2, 1)), spec(fd.alpha)
    _, mask = valid_window(probe, closed.omega)
    errs = {"hier/closed": rel_l2(closed.values, hier, mask), "fd/hier": rel_l2(hier, fdv, mask),
            "fd/closed": rel_l2(closed.values, fdv, mask)}
    elapsed = time.perf_counter() - start
    ok = max(errs.values()) <= 1e-3 and elapsed < 120
    criterion("criterion 2 (third-order oracle triangle)", ok,
              ", ".join(f"{k} {v:.2e}" for k, v in errs.items()) + f" (<= 1e-3); {elapsed:.1f} s (< 120 s)")
    assert ok


def _resum_slopes(rwa, etas, grid, model, cav, pump, probe):
    fulls = propagate_full_batch([model], [1.0], cav, [[pump.with_(eta=e), probe.with_(eta=e)] for e in etas],
                                 grid, rwa=rwa)
    out = {}
    for n in (1, 3):
        h = propagate_hierarchy(model, cav, pump, probe, grid, max_n=n, max_m=n, max_order=n, rwa=rwa)
        joint, field = [], []
        for e, f in zip(etas, fulls):
            da = np.linalg.norm(resum(h, e, e) - f.alpha)
            dr = np.linalg.norm(resum(h, e, e, what="rho").reshape(f.rho.shape) - f.rho)
            joint.append(np.hypot(da, dr))
            field.append(da)
        out[n] = (np.polyfit(np.log(etas), np.log(joint), 1)[0], np.polyfit(np.log(etas), np.log(field), 1)[0])
    return out


def test_criterion_3_resummation_order(criterion):
    start = time.perf_counter()
    model = build_two_level(W0)
    cav = cavity()
    probe = S1_PUMP.with_(tau=3.0)
    grid = TimeGrid(0, 20, 2001, rtol=1e-11, atol=1e-14)
    etas = np.array([0.025, 0.05, 0.1, 0.2])
    results = {rwa: _resum_slopes(rwa, etas, grid, model, cav, S1_PUMP, probe) for rwa in (True, False)}
    elapsed = time.perf_counter() - start
    ok = elapsed < 120
    parts = []
    for rwa, res in results.items():
        for n, (joint, field) in res.items():
            ok &= abs(joint - (n + 1)) <= 0.1 * (n + 1)
            parts.append(f"{'rwa' if rwa else 'full'} N={n}: slope {joint:.3f} (field alone {field:.2f})")
    criterion("criterion 3 (resummation order)", ok,
              "; ".join(parts) + f"; target N+1 within 10%; {elapsed:.1f} s (< 120 s)")
    assert ok


@pytest.fixture(scope="module")
def fig4_scan():
    model = build_two_level(W0, gamma_phi=0.1)
    pump = PulseSpec(1.0, W0, 2.0, 0.1)
    taus = np.linspace(0.0, 6.0, 20)
    start = time.perf_counter()
    res = dt_scan(model, cavity(), pump, pump, taus, components=("total", (0, 1), (2, -1)))
    return res, time.perf_counter() - start


def test_criterion_4_phase_separation(criterion, fig4_scan):
    res, elapsed = fig4_scan
    tot, a, b = res["total"], res[(0, 1)], res[(2, -1)]
    m = tot.valid
    sum_err = float(np.max(np.abs(a.dt[:, m] + b.dt[:, m] - tot.dt[:, m])) / np.max(np.abs(tot.dt[:, m])))
    env = envelope(b)
    # fit after the pulses have separated
    sel = tot.tau_delta >= 1.0
    rate = -np.polyfit(tot.tau_delta[sel], np.log(env[sel]), 1)[0]
    target = KAPPA + 0.1
    ok = sum_err <= 1e-10 and abs(rate - target) <= 0.2 * target and elapsed < 300
    criterion("criterion 4 (phase separation)", ok,
              f"sum rule max rel error {sum_err:.1e} (<= 1e-10); (2,-1) envelope decay rate {rate:.3f} vs "
              f"kappa+gamma_phi {target:.2f} (within 20%: {abs(rate - target) <= 0.2 * target}); "
              f"20-point scan {elapsed:.1f} s (< 300 s)")
    assert ok


def test_criterion_5_invariants(criterion):
    model = build_two_level(W0, gamma=0.2, gamma_phi=0.1)
    cav = cavity()
    pump = PulseSpec(1.0, W0, 2.0, 0.1)
    probe = pump.with_(tau=3.0)
    grid = TimeGrid(0, 25, 2501)
    h = propagate_hierarchy(model, cav, pump, probe, grid, max_n=3, max_m=1, phase_resolved=True)
    tr_err, pair_err = 0.0, 0.0
    for key, e in h.entries.items():
        rho = e.rho.reshape(-1, 2, 2)
        tr_err = max(tr_err, np.max(np.abs(np.trace(rho, axis1=1, axis2=2) - (key.order == 0))))
        partner = h.entries.get(key.conjugate())
        if partner is not None:
            dag = np.conj(np.swapaxes(partner.rho.reshape(-1, 2, 2), 1, 2))
            pair_err = max(pair_err, np.max(np.abs(rho - dag)))
    g = propagate_hierarchy(model, cav, pump, probe, grid, max_n=3, max_m=1)
    herm_err = max(np.max(np.abs(e.rho.reshape(-1, 2, 2) - np.conj(np.swapaxes(e.rho.reshape(-1, 2, 2), 1, 2))))
                   for e in g.entries.values())
    strong = [pump.with_(eta=3.0), probe.with_(eta=3.0)]
    min_eig = min(np.linalg.eigvalsh(propagate_full(m, c, strong, grid).rho).min() for m, c in
                  [(model, cav), (build_three_level(W0, 2 * W0 - 2.0, gamma_phi=0.1), cav)])
    fd_err = 0.0
    for v in [(2, -1), (0, 1)]:
        fd = finite_difference_extraction(model, cav, pump, probe, (2, 1, v), grid)
        fd_err = max(fd_err, rel_l2(h.alpha(2, 1, v), fd.alpha))
    ok = tr_err <= 1e-10 and max(pair_err, herm_err) <= 1e-10 and min_eig >= -1e-9 and fd_err <= 1e-6
    criterion("criterion 5 (invariants)", ok,
              f"trace {tr_err:.1e}; conjugate pairing {pair_err:.1e}, hermiticity {herm_err:.1e} (<= 1e-10); "
              f"min eigenvalue {min_eig:.1e} (>= -1e-9); phase-cycled vs resolved {fd_err:.1e} (<= 1e-6)")
    assert ok


def test_criterion_6_long_delay_stationarity(criterion):
    model = build_two_level(W0, gamma_phi=1.0)
    pump = PulseSpec(1.0, W0, 2.0, 0.05)
    res = dt_scan(model, cavity(), pump, pump, [5.0, 7.0])["total"]
    m = res.valid
    change = rel_l2(res.dt[0], res.dt[1], m)
    ok = change < 0.05
    criterion("criterion 6 (long-delay stationarity)", ok, f"relative L2 change 5/kappa -> 7/kappa {change:.4f} (< 0.05)")
    assert ok


def _persistence(model, cav, pump, gamma_phi):
    tau_star = 3.0 / (KAPPA + gamma_phi)
    taus = np.union1d(np.linspace(0.0, 6.0, 25), [tau_star])
    env = envelope(dt_scan(model, cav, pump, pump, taus, components=((2, -1),))[(2, -1)])
    return float(env[np.argmin(np.abs(taus - tau_star))] / env.max())


def test_criterion_7_three_level_persistence(criterion):
    gamma_phi = 0.1
    three = _persistence(build_three_level(1.0, 2.8, gamma_phi=gamma_phi), cavity(1.0),
                         PulseSpec(1.0, 1.0, 2.0, 0.1), gamma_phi)
    two = _persistence(build_two_level(W0, gamma_phi=gamma_phi), cavity(), PulseSpec(1.0, W0, 2.0, 0.1), gamma_phi)
    ok = three > 1e-2 and two < 1e-2
    criterion("criterion 7 (3LS pathway persistence)", ok,
              f"(2,-1) envelope at 3/(kappa+gamma_phi) over peak: 3LS {three:.3f} (> 1e-2: {three > 1e-2}), "
              f"2LS {two:.3f} (< 1e-2: {two < 1e-2})")
    assert ok


def test_criterion_8_reductions(criterion):
    cav = CavityConfig.from_collective_coupling(W0, G_SQRT_N, n_molecules=10.0)
    pump = PulseSpec(1.5, W0, 2.0, 0.1)
    probe = pump.with_(tau=3.0, eta=0.5)
    grid = TimeGrid(0, 15, 1501)
    single = build_two_level(W0, gamma_phi=0.2)
    ens = DisorderEnsemble.two_subensembles(W0, 0.0, gamma_phi=0.2)
    dis = 0.0
    for rwa in (True, False):
        a = propagate_full(single, cav, [pump, probe], grid, rwa=rwa)
        b = propagate_disordered(ens, cav, [pump, probe], grid, rwa=rwa)
        dis = max(dis, np.max(np.abs(a.alpha - b.alpha)), np.max(np.abs(a.rho - b.rho[:, 0])))
    ha = propagate_hierarchy(single, cav, pump, probe, grid)
    hb = propagate_disordered(ens, cav, [pump, probe], grid, mode="hierarchy")
    dis = max(dis, np.max(np.abs(ha.alpha(2, 1) - hb.alpha(2, 1))))
    mm = MultimodeCavity(n_k=1, width=10.0, omega_c=W0, kappa=cav.kappa, n_molecules=cav.n_molecules, e0=cav.e0)
    one = propagate_full(single, cav, [pump, probe], grid, rwa=True)
    res = propagate_multimode(mm, single, [pump, probe], grid)
    multi = max(np.max(np.abs(res.alpha[:, 0] - one.alpha)), np.max(np.abs(res.rho[:, 0] - one.rho)))
    rtol = 1e-10
    lossless = MultimodeCavity(n_k=8, width=10.0, omega_c=W0, kappa=0.0, n_molecules=8.0, e0=1.0)
    kick = PulseSpec(1.0, W0, 1.0, 0.1, k=lossless.k[5])
    lgrid = TimeGrid(0, 20, 2001, rtol=rtol, atol=1e-13)
    lres = propagate_multimode(lossless, build_two_level(W0), [kick], lgrid)
    exc = lres.excitation(build_two_level(W0), lossless.n_per_site)
    after = lgrid.times > kick.tau + 6 * kick.tau_w
    drift = float(np.ptp(exc[after]) / exc[after].max())
    # global error of an adaptive solver accumulates to a small multiple of rtol
    ok = dis <= 1e-12 and multi <= 1e-12 and drift <= 10 * rtol
    criterion("criterion 8 (reductions)", ok,
              f"disorder delta=0 {dis:.1e}, multimode N_k=1 {multi:.1e} (<= 1e-12); lossless excitation drift "
              f"{drift:.1e} at rtol {rtol:.0e} (<= 10 rtol)")
    assert ok
