"""Experiment drivers behind the ``cavity-nls`` subcommands.

Each command returns ``(files, status)`` where ``files`` maps output names to
their text; the caller writes them atomically.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .. import __version__
from ..dynamics.full import propagate_full_batch
from ..dynamics.hierarchy import propagate_hierarchy
from ..dynamics.system import TimeGrid, default_grid
from ..extensions import MultimodeCavity, bright_dark_from_rho, propagate_multimode
from ..oracle import (alpha_first_order_closed, alpha_third_order_closed, compare,
                      finite_difference_extraction)
from ..spectra import (Spectrum, SpectrumWarning, dt_scan, field_to_spectrum, polariton_frequencies, transmission,
                       valid_window)
from .config import ConfigError, build_cavity, build_models, build_pulse, to_json
from .output import config_digest, render_csv
from .plotting import heatmap_script

UNITS = "frequencies and rates in kappa, times in 1/kappa"


class Context:
    def __init__(self, cfg, command, jobs=1):
        self.cfg = cfg
        self.command = command
        self.jobs = jobs
        self.resolved = to_json(cfg)
        # destination and plot scripts do not change results, so they stay out of the digest
        hashed = {k: dict(v) if isinstance(v, dict) else v for k, v in cfg.items()}
        hashed["output"].pop("dir", None)
        hashed["output"].pop("plot_script", None)
        self.digest = config_digest(to_json(hashed))
        self.models, self.weights = build_models(cfg)
        self.cavity = build_cavity(cfg)
        self.pump = build_pulse(cfg["pump"])
        self.probe = build_pulse(cfg["probe"]) if cfg["probe"] is not None else None

    def meta(self, **extra):
        out = {"generator": f"cavity-nls {__version__}", "command": self.command, "config_sha256": self.digest,
               "units": UNITS}
        out.update({k: (f"{v:.12e}" if isinstance(v, float) else v) for k, v in extra.items()})
        return out

    def grid(self, pulses):
        num = self.cfg["numerics"]
        kw = dict(rtol=num["rtol"], atol=num["atol"], method=num["method"])
        if num["t_end"] is not None:
            return TimeGrid(0.0, num["t_end"], num["n_points"], **kw)
        return default_grid(self.models, self.cavity, pulses, weights=self.weights, n_points=num["n_points"],
                            decay=num["decay"], **kw)

    def omega_mask(self, offset, valid):
        mask = np.asarray(valid, dtype=bool).copy()
        rng = self.cfg["output"]["omega_range"]
        if rng is not None:
            mask &= (offset >= rng[0]) & (offset <= rng[1])
        if not mask.any():
            raise ConfigError("no frequencies left in the requested output window")
        return mask


def _require_probe(ctx):
    if ctx.probe is None:
        raise ConfigError(f"command {ctx.command} needs a [probe] section")


def cmd_linear(ctx):
    pump = ctx.pump
    grid = ctx.grid([pump])
    if len(ctx.models) == 1:
        h = propagate_hierarchy(ctx.models[0], ctx.cavity, pump, None, grid, max_n=1, max_m=0)
    else:
        from ..dynamics.hierarchy import propagate_hierarchy_batch
        h = propagate_hierarchy_batch(None, ctx.cavity, [pump], [None], grid, max_n=1, max_m=0,
                                      models=ctx.models, weights=ctx.weights)[0]
    spec = field_to_spectrum(h.t, h.alpha(1, 0), h.frame_carrier, pad=ctx.cfg["numerics"]["pad"])
    trans = transmission(spec, pump, ctx.cavity.kappa, eta=1.0, floor=ctx.cfg["numerics"]["floor"])
    mask = ctx.omega_mask(spec.offset, trans.valid)
    cols = ["omega", "omega_rot", "T", "alpha_re", "alpha_im"]
    data = [spec.omega[mask], spec.offset[mask], trans.values[mask], spec.values[mask].real, spec.values[mask].imag]
    meta = {"frame_carrier": h.frame_carrier}
    if ctx.cfg["system"]["kind"] == "2ls":
        closed = alpha_first_order_closed(ctx.cavity, ctx.models[0], pump, spec.omega, carrier=h.frame_carrier)
        tc = transmission(closed, pump, ctx.cavity.kappa, eta=1.0, floor=ctx.cfg["numerics"]["floor"])
        cols += ["T_closed", "alpha_closed_re", "alpha_closed_im"]
        data += [tc.values[mask], closed.values[mask].real, closed.values[mask].imag]
        lo, hi = polariton_frequencies(ctx.cavity, ctx.models[0])
        meta.update(polariton_lower=lo.real, polariton_upper=hi.real,
                    polariton_lower_width=-2 * lo.imag, polariton_upper_width=-2 * hi.imag)
    return {"linear.csv": render_csv(cols, np.column_stack(data), ctx.meta(**meta))}, 0


def cmd_full(ctx):
    pulses = [ctx.pump] + ([ctx.probe] if ctx.probe is not None else [])
    grid = ctx.grid(pulses)
    rwa = bool(ctx.cfg["numerics"]["rwa"])
    traj = propagate_full_batch(ctx.models, ctx.weights, ctx.cavity, [pulses], grid, rwa=rwa)[0]
    return _full_tables(ctx, traj, pulses, "full"), 0


def _full_tables(ctx, traj, pulses, stem):
    rho = traj.rho if traj.rho.ndim == 4 else traj.rho[:, None]
    T, S, d, _ = rho.shape
    cols = ["t", "alpha_re", "alpha_im"]
    data = [traj.t, traj.alpha.real, traj.alpha.imag]
    for s, model in enumerate(ctx.models):
        tag = "" if S == 1 else f"_m{s}"
        pops = np.real(np.diagonal(rho[:, s], axis1=1, axis2=2))
        for j in range(d):
            cols.append(f"pop{tag}_{j}")
            data.append(pops[:, j])
        pol = np.einsum("ij,tji->t", model.mu_minus, rho[:, s])
        cols.append(f"P_abs2{tag}")
        data.append(np.abs(pol) ** 2)
        if d == 2:
            n_s = ctx.cavity.n_molecules * ctx.weights[s]
            if n_s >= 1:  # bright/dark split needs at least one molecule per member
                pb, pd = bright_dark_from_rho(rho[:, s], n_s, tol=1e-6)
                cols += [f"p_B{tag}", f"p_D{tag}"]
                data += [pb, pd]
    files = {f"{stem}.csv": render_csv(cols, np.column_stack(data),
                                       ctx.meta(frame_carrier=traj.frame_carrier, rwa=str(traj.rwa).lower()))}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SpectrumWarning)
        spec = field_to_spectrum(traj.t, traj.alpha, traj.frame_carrier, pad=ctx.cfg["numerics"]["pad"])
    cols = ["omega", "omega_rot", "alpha_re", "alpha_im"]
    if len(pulses) == 1:
        trans = transmission(spec, pulses[0], ctx.cavity.kappa, floor=ctx.cfg["numerics"]["floor"])
        mask = ctx.omega_mask(spec.offset, trans.valid)
        cols.append("T")
        extra = [trans.values[mask]]
    else:
        mask = ctx.omega_mask(spec.offset, np.ones(spec.omega.size, dtype=bool))
        extra = []
    data = [spec.omega[mask], spec.offset[mask], spec.values[mask].real, spec.values[mask].imag] + extra
    files[f"{stem}_spectrum.csv"] = render_csv(cols, np.column_stack(data),
                                               ctx.meta(frame_carrier=traj.frame_carrier))
    return files


def _dt_chunk(args):
    cfg, taus, comps, grid = args
    ctx = Context(cfg, "worker")
    comps = [c if c == "total" else tuple(int(x) for x in c.split(",")) for c in comps]
    model = ctx.models[0] if len(ctx.models) == 1 else None
    models = None if len(ctx.models) == 1 else ctx.models
    weights = None if len(ctx.models) == 1 else ctx.weights
    res = dt_scan(model, ctx.cavity, ctx.pump, ctx.probe, taus, grid, components=comps, models=models,
                  weights=weights, floor=cfg["numerics"]["floor"], pad=cfg["numerics"]["pad"])
    return {("total" if k == "total" else f"{k[0]},{k[1]}"): v for k, v in res.items()}


def run_dt_scan(ctx, comps):
    _require_probe(ctx)
    taus = ctx.cfg["scan"]["tau_delta"]
    if taus is None:
        raise ConfigError("[scan] tau_delta is required for delay scans")
    last = ctx.probe.with_(tau=ctx.pump.tau + max(taus))
    grid = ctx.grid([ctx.pump, last])
    chunk = ctx.cfg["scan"]["chunk"]
    jobs = [(ctx.cfg, taus[i:i + chunk], comps, grid) for i in range(0, len(taus), chunk)]
    if ctx.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=ctx.jobs) as pool:
            parts = list(pool.map(_dt_chunk, jobs))
    else:
        parts = [_dt_chunk(j) for j in jobs]
    files = {}
    plot = ctx.cfg["output"]["plot_script"]
    for comp in comps:
        rows = [p[comp] for p in parts]
        first = rows[0]
        mask = ctx.omega_mask(first.offset, first.valid)
        tau = np.concatenate([r.tau_delta for r in rows])
        dt = np.concatenate([r.dt for r in rows])[:, mask]
        n_w = int(mask.sum())
        table = np.column_stack([np.repeat(tau, n_w), np.tile(first.omega[mask], tau.size),
                                 np.tile(first.offset[mask], tau.size), dt.reshape(-1)])
        if comp == "total":
            name, zcol = "dt.csv", "dT"
        else:
            name, zcol = f"dt_v_{comp.replace(',', '_')}.csv", "dT_v"
        meta = ctx.meta(frame_carrier=first.frame_carrier, component=comp, eta_p=ctx.pump.eta)
        files[name] = render_csv(["tau_delta", "omega", "omega_rot", zcol], table, meta)
        if plot:
            script, text = heatmap_script(name, f"DT component {comp}", zcol=zcol)
            files[script] = text
    return files


def cmd_dt_scan(ctx):
    return run_dt_scan(ctx, ctx.cfg["scan"]["components"]), 0


def cmd_phase_scan(ctx):
    comps = ["total", "0,1", "2,-1"]
    return run_dt_scan(ctx, comps), 0


def cmd_oracle_check(ctx):
    if ctx.cfg["system"]["kind"] != "2ls":
        raise ConfigError("oracle-check needs a two-level system (system.kind = \"2ls\")")
    model, cav, pump = ctx.models[0], ctx.cavity, ctx.pump
    tol = ctx.cfg["oracle"]["tolerance"]
    probe = ctx.probe if ctx.probe is not None else pump
    probe = probe.with_(tau=pump.tau + ctx.cfg["oracle"]["tau_delta"])
    grid = ctx.grid([pump, probe])
    pad = ctx.cfg["numerics"]["pad"]
    h = propagate_hierarchy(model, cav, pump, probe, grid, max_n=2, max_m=1, phase_resolved=True,
                            store_rho=False)
    spec = lambda x: field_to_spectrum(grid.times, x, h.frame_carrier, pad=pad, decay_tol=np.inf)  # noqa: E731
    floor = ctx.cfg["numerics"]["floor"]
    _, mask_p = valid_window(pump, spec(h.alpha(1, 0)).omega, floor)
    s10 = spec(h.alpha(1, 0))
    _, mask_pp = valid_window(probe, s10.omega, floor)
    closed10 = alpha_first_order_closed(cav, model, pump, s10.omega, carrier=h.frame_carrier)
    closed21 = alpha_third_order_closed(cav, model, pump, probe, grid, pad=pad).spectrum
    s21 = spec(h.alpha(2, 1))
    fd = finite_difference_extraction(model, cav, pump, probe, (2, 1, None), grid,
                                      scale=ctx.cfg["oracle"]["fd_scale"])
    fd_v = finite_difference_extraction(model, cav, pump, probe, (2, 1, (2, -1)), grid,
                                        scale=ctx.cfg["oracle"]["fd_scale"])
    sfd = spec(fd.alpha)
    # absolute floor: finite-difference noise relative to the linear response
    atol = 1e-9 * float(np.max(np.abs(s10.values)))
    reports = [
        compare("alpha10_closed_vs_hierarchy", closed10.values, s10.values, s10.omega, mask_p, tol),
        compare("alpha21_closed_vs_hierarchy", closed21.values, s21.values, s21.omega, mask_pp, tol, atol),
        compare("alpha21_fd_vs_hierarchy", s21.values, sfd.values, s21.omega, mask_pp, tol, atol),
        compare("alpha21_fd_vs_closed", closed21.values, sfd.values, s21.omega, mask_pp, tol, atol),
        compare("alpha21_v2m1_fd_vs_hierarchy", spec(h.alpha(2, 1, (2, -1))).values, spec(fd_v.alpha).values,
                s21.omega, mask_pp, tol, atol),
    ]
    files = {}
    summary = []
    meta_names = {}
    for i, r in enumerate(reports):
        meta_names[f"quantity_{i}"] = r.name
        summary.append([i, r.max_abs_error, r.max_rel_error, r.rel_l2_error, tol, r.atol, float(r.passed)])
        table = np.column_stack([r.omega, r.omega - h.frame_carrier, r.reference.real, r.reference.imag,
                                 r.test.real, r.test.imag])
        files[f"oracle_{r.name}.csv"] = render_csv(
            ["omega", "omega_rot", "ref_re", "ref_im", "test_re", "test_im"], table,
            ctx.meta(frame_carrier=h.frame_carrier, quantity=r.name))
    files["oracle_summary.csv"] = render_csv(
        ["quantity", "max_abs_error", "max_rel_error", "rel_l2_error", "tolerance", "atol", "passed"],
        np.array(summary), ctx.meta(frame_carrier=h.frame_carrier, **meta_names), allow_inf=True)
    lines = [f"{'PASS' if r.passed else 'FAIL'} {r.name}: rel_l2={r.rel_l2_error:.3e} "
             f"max_rel={r.max_rel_error:.3e} max_abs={r.max_abs_error:.3e} (tolerance {tol:.1e}, atol {r.atol:.1e})"
             for r in reports]
    lines.append("frequency convention: rotating-frame offsets from the common pulse carrier")
    files["oracle_summary.txt"] = "\n".join(lines) + "\n"
    return files, 0 if all(r.passed for r in reports) else 2


def cmd_disorder(ctx):
    pulses = [ctx.pump] + ([ctx.probe] if ctx.probe is not None else [])
    grid = ctx.grid(pulses)
    rwa = bool(ctx.cfg["numerics"]["rwa"])
    traj = propagate_full_batch(ctx.models, ctx.weights, ctx.cavity, [pulses], grid, rwa=rwa)[0]
    files = _full_tables(ctx, traj, pulses, "disorder_full")
    if ctx.cfg["scan"]["tau_delta"] is not None and ctx.probe is not None:
        files.update(run_dt_scan(ctx, ctx.cfg["scan"]["components"]))
    return files, 0


def cmd_multimode(ctx):
    mmc = ctx.cfg["multimode"]
    if len(ctx.models) != 1:
        raise ConfigError("multimode runs need a single molecular species (2ls or 3ls)")
    model = ctx.models[0]
    mm = MultimodeCavity(n_k=mmc["n_k"], width=mmc["width"], omega_c=ctx.cavity.omega_c,
                         kappa=ctx.cavity.kappa, n_molecules=ctx.cavity.n_molecules, e0=ctx.cavity.e0,
                         velocity=mmc["velocity"])
    pulses = [ctx.pump] + ([ctx.probe] if ctx.probe is not None else [])
    for p in pulses:
        try:
            mm.mode_of(p.k)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    grid = ctx.grid(pulses)
    res = propagate_multimode(mm, model, pulses, grid)
    cols, data = ["t"], [res.t]
    for j in range(mm.n_k):
        cols += [f"alpha_k{j}_re", f"alpha_k{j}_im"]
        data += [res.alpha[:, j].real, res.alpha[:, j].imag]
    quanta = np.einsum("j,tnjj->tn", model.excitation.astype(float), res.rho).real
    for n in range(mm.n_k):
        cols.append(f"excited_site{n}")
        data.append(quanta[:, n])
    cols.append("excitation_total")
    data.append(res.excitation(model, mm.n_per_site))
    meta = ctx.meta(frame_carrier=res.frame_carrier,
                    k=" ".join(f"{x:.12e}" for x in mm.k), r=" ".join(f"{x:.12e}" for x in mm.r),
                    omega_k=" ".join(f"{x:.12e}" for x in mm.omega_k))
    files = {"multimode.csv": render_csv(cols, np.column_stack(data), meta)}
    if mm.kappa > 0:
        # per-mode transmission by analogy with the single-mode relation, referenced to the first pulse
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SpectrumWarning)
            spec = field_to_spectrum(res.t, res.alpha.T, res.frame_carrier, pad=ctx.cfg["numerics"]["pad"])
        ref = pulses[0]
        _, valid = valid_window(ref, spec.omega, ctx.cfg["numerics"]["floor"])
        mask = ctx.omega_mask(spec.offset, valid)
        cols, data = ["omega", "omega_rot"], [spec.omega[mask], spec.offset[mask]]
        for j in range(mm.n_k):
            tj = transmission(Spectrum(spec.omega, spec.values[j], spec.frame_carrier), ref, mm.kappa,
                              floor=ctx.cfg["numerics"]["floor"])
            cols.append(f"T_k{j}")
            data.append(tj.values[mask])
        files["multimode_spectrum.csv"] = render_csv(cols, np.column_stack(data),
                                                     ctx.meta(frame_carrier=res.frame_carrier, reference_pulse="pump"))
    return files, 0


COMMANDS = {
    "linear": cmd_linear,
    "full": cmd_full,
    "dt-scan": cmd_dt_scan,
    "phase-scan": cmd_phase_scan,
    "oracle-check": cmd_oracle_check,
    "disorder": cmd_disorder,
    "multimode": cmd_multimode,
}
