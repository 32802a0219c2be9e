"""Scenario runners behind the command line: distributions, sweeps, reports."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import half_sum_distribution, half_sum_weights, rabi_kinematics, \
    zero_overlap_distribution
from .config import ScenarioConfig, to_json
from .errors import CWLMError, IllConditionedStencil, InsufficientDecay
from .model import validate_experimental, validate_single_detector
from .propagate import rotate_post_selector, time_averaged_expectation
from .statistics import (
    ConditionedCF,
    compare,
    cumulants,
    fit_shift_model,
    invert,
    joint_distribution,
    sample_cf,
)

NORM_TOL = 1e-6
IMAG_TOL = 1e-9
CERTAINTY_FLOOR = 1e-12  # relative to the peak density


@dataclass
class RunResult:
    files: list = field(default_factory=list)
    degraded: bool = False
    physics_ok: bool = True
    summary: dict = field(default_factory=dict)


def _fmt(x) -> str:
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def write_csv(path: Path, header: list[str], columns: list) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def _derived(cfg: ScenarioConfig) -> dict:
    d = cfg.detector
    out = {"gamma": d.gamma, "t_a": d.t_a, "K": d.K,
           "sigma": {_fmt(t): d.sigma(t) for t in cfg.t_values}}
    if cfg.model == "experimental":
        out["K_dephasing"] = cfg.qubit.gamma_d * d.t_a
    return out


def _validation(cfg: ScenarioConfig, strict: bool):
    if cfg.model == "experimental":
        return validate_experimental(cfg.qubit, cfg.detector, strict=strict)
    rep = validate_single_detector(cfg.detector, strict=strict)
    if cfg.model == "two_detector" and cfg.detector_y is not None:
        rep_y = validate_single_detector(cfg.detector_y, strict=strict)
        rep.checks.extend(rep_y.checks)
    return rep


def _selectors(cfg: ScenarioConfig, t: float):
    out = []
    for p in cfg.post_selectors:
        if p is not None and cfg.frame_rotation:
            p = rotate_post_selector(p, cfg.hamiltonian(), t)
        out.append(p)
    return out


def _residuals(dist, cf) -> dict:
    return {"integral_error": abs(dist.integral() - 1), "imag_residual": dist.imag_residual,
            "min_density": dist.min_density(), "cf_at_zero_error": abs(cf.value_at_zero() - 1),
            "cf_symmetry_residual": cf.symmetry_residual(), "n_points": int(cf.values.size),
            "selection_probability": float(np.real(cf.normalization))}


def _bad(res: dict) -> bool:
    return res["integral_error"] > NORM_TOL or res["imag_residual"] > IMAG_TOL


def _sidecar(cfg: ScenarioConfig, out: Path, name: str, files: list, extra: dict) -> Path:
    side = {"tool_version": __version__, "config": cfg.echo, "derived": _derived(cfg),
            "files": files}
    side.update(extra)
    path = out / f"{name}.json"
    path.write_text(to_json(side))
    return path


# ---------------------------------------------------------------- distribution


def run_distribution(cfg: ScenarioConfig, out: Path, strict: bool = False) -> RunResult:
    out.mkdir(parents=True, exist_ok=True)
    res = RunResult()
    rep = _validation(cfg, strict)
    res.physics_ok = rep.passed
    if cfg.model == "two_detector":
        return _run_joint(cfg, out, res, rep)
    l = cfg.liouvillian()
    entries = []
    for i, t in enumerate(cfg.t_values):
        dists, resids = [], []
        try:
            for p in _selectors(cfg, t):
                cf = sample_cf(l, cfg.initial_state, p, t, cfg.grid)
                dist = invert(cf)
                dists.append(dist)
                resids.append(_residuals(dist, cf))
        except InsufficientDecay as exc:
            res.degraded = True
            entries.append({"t": t, "error": str(exc)})
            continue
        path = out / f"{cfg.name}_T{i:02d}.csv"
        if len(dists) == 2:
            cmp_ = compare(dists[0], dists[1])
            peak = max(np.max(dists[0].density), np.max(dists[1].density))
            cert = np.where(np.maximum(dists[0].density, 0) + np.maximum(dists[1].density, 0)
                            > CERTAINTY_FLOOR * peak, cmp_.certainty, np.nan)
            cols = [dists[0].grid, dists[0].density, dists[1].density, cmp_.difference, cert]
            header = ["O", "P_plus", "P_minus", "difference", "certainty"]
            extra = {"extrema": cmp_.extrema}
        else:
            cols = [dists[0].grid, dists[0].density]
            header = ["O", "P"]
            extra = {"mean": dists[0].mean()}
        if cfg.o_range is not None:
            m = (cols[0] >= cfg.o_range[0]) & (cols[0] <= cfg.o_range[1])
            cols = [c[m] for c in cols]
        write_csv(path, header, cols)
        res.files.append(path)
        bad = any(_bad(r) for r in resids)
        res.degraded |= bad
        entries.append({"file": path.name, "t": t, "t_over_ta": t / cfg.detector.t_a,
                        "post_selectors": cfg.post_labels, "residuals": resids,
                        "degraded": bad, **extra})
    res.files.append(_sidecar(cfg, out, cfg.name, entries,
                              {"validation": rep.as_dict(), "degraded": res.degraded}))
    return res


def _run_joint(cfg, out, res, rep) -> RunResult:
    jl = cfg.joint_liouvillian()
    entries = []
    for i, t in enumerate(cfg.t_values):
        p = _selectors(cfg, t)[0]
        d2 = joint_distribution(jl, cfg.initial_state, p, t, cfg.grid, cfg.grid)
        gx, gy = np.meshgrid(d2.grid_x, d2.grid_y, indexing="ij")
        path = out / f"{cfg.name}_T{i:02d}.csv"
        cols = [gx.reshape(-1), gy.reshape(-1), d2.density.reshape(-1)]
        if cfg.o_range is not None:
            lo, hi = cfg.o_range
            m = (cols[0] >= lo) & (cols[0] <= hi) & (cols[1] >= lo) & (cols[1] <= hi)
            cols = [c[m] for c in cols]
        write_csv(path, ["O_x", "O_y", "P"], cols)
        dx, dy = d2.grid_x[1] - d2.grid_x[0], d2.grid_y[1] - d2.grid_y[0]
        integral_err = abs(float(d2.density.sum() * dx * dy) - 1)
        bad = integral_err > NORM_TOL or d2.imag_residual > IMAG_TOL
        res.degraded |= bad
        res.files.append(path)
        entries.append({"file": path.name, "t": t, "integral_error": integral_err,
                        "imag_residual": d2.imag_residual, "degraded": bad})
    res.files.append(_sidecar(cfg, out, cfg.name, entries,
                              {"validation": rep.as_dict(), "degraded": res.degraded}))
    return res


def run_fig1_extras(cfg: ScenarioConfig, out: Path) -> list[Path]:
    """Shifted-Gaussian decomposition and the zero-overlap curves for K = 1, 2, 5."""
    t = cfg.t_values[0]
    d = cfg.detector
    sigma = d.sigma(t)
    grid = np.linspace(-4, 4, 801)
    cols, header = [grid], ["O"]
    summary = {}
    for label in ("Z+", "Z-"):
        w = half_sum_weights(cfg.initial_state, label, cfg.observable, d.gamma * t)
        total = half_sum_distribution(w, sigma, grid)
        summary[label] = w.centre_weights()
        for c, weight in w.centre_weights().items():
            cols.append(weight * np.exp(-0.5 * ((grid - c) / sigma) ** 2)
                        / (sigma * math.sqrt(2 * math.pi)))
            header.append(f"{label}_component_{c:+g}")
        cols.append(total.density)
        header.append(f"{label}_total")
    p1 = out / f"{cfg.name}_decomposition.csv"
    write_csv(p1, header, cols)
    x = np.linspace(-4, 4, 801)
    p2 = out / f"{cfg.name}_zero_overlap.csv"
    write_csv(p2, ["O_over_sigma", "K1", "K2", "K5", "gaussian"],
              [x] + [zero_overlap_distribution(k, 1.0, x).density for k in (1, 2, 5)]
              + [np.exp(-0.5 * x**2) / math.sqrt(2 * math.pi)])
    p3 = out / f"{cfg.name}_decomposition.json"
    p3.write_text(to_json({"tool_version": __version__, "sigma": sigma, "gamma_t": d.gamma * t,
                           "centre_weights": {k: {_fmt(c): v for c, v in ws.items()}
                                              for k, ws in summary.items()}}))
    return [p1, p2, p3]


# ---------------------------------------------------------------- sweeps


def _mean_of(l, cfg, p, t):
    """Conditioned mean from kappa_1, falling back to the inverted distribution."""
    cf = ConditionedCF(l, cfg.initial_state, p, t)
    try:
        k = cumulants(cf, n_max=1)
        return k.mean_output, float(cf.denominator.real), "cumulant"
    except IllConditionedStencil:
        dist = invert(sample_cf(l, cfg.initial_state, p, t, cfg.grid))
        return dist.mean(), float(cf.denominator.real), "distribution"


def run_sweep(cfg: ScenarioConfig, out: Path, quantity: str | None = None,
              strict: bool = False) -> RunResult:
    out.mkdir(parents=True, exist_ok=True)
    res = RunResult()
    rep = _validation(cfg, strict)
    res.physics_ok = rep.passed
    quantity = quantity or (cfg.sweep or {}).get("quantity", "mean")
    if len(cfg.t_values) < 2:
        raise ValueError("a sweep needs at least two t values")
    l = cfg.liouvillian()
    u = cfg.time_unit
    ts = np.array(cfg.t_values)
    cols = {f"T_{u}": ts, "T_over_ta": ts / cfg.detector.t_a}
    if cfg.qubit.omega:
        cols["omega_T"] = ts * cfg.qubit.omega
    notes = {}
    labels = [lab.replace("+", "plus").replace("-", "minus") for lab in cfg.post_labels]
    if quantity == "mean":
        cols["unconditioned_mean"] = np.array(
            [time_averaged_expectation(l, cfg.initial_state, cfg.observable.matrix, t)
             for t in ts])
        if cfg.observable_label == "y" and cfg.initial_label == "Z+" and cfg.qubit.omega:
            cols["Y_free"] = np.asarray(rabi_kinematics(ts, cfg.qubit.omega, cfg.qubit.delta).y_avg)
        for lab, raw_lab in zip(labels, cfg.post_labels):
            means, probs, how = [], [], []
            for t in ts:
                p = _selectors_one(cfg, raw_lab, t)
                m, pr, h = _mean_of(l, cfg, p, t)
                means.append(m)
                probs.append(pr)
                how.append(h)
            cols[f"mean_{lab}"] = np.array(means)
            cols[f"p_{lab}"] = np.array(probs)
            notes[f"mean_{lab}_method"] = how
    elif quantity == "cumulants":
        for lab, raw_lab in zip(labels, cfg.post_labels):
            ks = []
            for t in ts:
                p = _selectors_one(cfg, raw_lab, t)
                ks.append(cumulants(ConditionedCF(l, cfg.initial_state, p, t), n_max=4,
                                    check=False))
            for n in range(1, 5):
                cols[f"kappa{n}_{lab}"] = np.array([k[n] for k in ks])
                cols[f"kappa{n}_err_{lab}"] = np.array([k.errors[n - 1] for k in ks])
    elif quantity == "difference_max":
        if len(cfg.post_selectors) != 2:
            raise ValueError("difference_max needs two post-selectors")
        rows = {k: [] for k in ("difference_max", "O_at_max", "difference_min", "O_at_min",
                                "relative_difference_at_0", "certainty_at_0")}
        comps = []
        for t in ts:
            p_pl, p_mi = _selectors(cfg, t)
            dp = invert(sample_cf(l, cfg.initial_state, p_pl, t, cfg.grid))
            dm = invert(sample_cf(l, cfg.initial_state, p_mi, t, cfg.grid))
            c = compare(dp, dm)
            comps.append(c)
            for k in ("difference_max", "O_at_max", "difference_min", "O_at_min"):
                rows[k].append(c.extrema[k.replace("O_at", "o_at")])
            i0 = int(np.argmin(np.abs(c.grid)))
            rows["relative_difference_at_0"].append(c.difference[i0] / dp.density[i0])
            rows["certainty_at_0"].append(c.certainty[i0])
        cols.update({k: np.array(v) for k, v in rows.items()})
        if (cfg.sweep or {}).get("fit_shift"):
            long_t = [c for c in comps if c.t_total >= 4 * cfg.detector.t_a * (1 - 1e-12)]
            if long_t:
                try:
                    fit = fit_shift_model(long_t, cfg.detector.t_a)
                    notes["shift_fit"] = {"S": fit.s, "mean_o": fit.mean_o,
                                          "relative_residual": fit.residual,
                                          "t_values": [c.t_total for c in long_t]}
                except CWLMError as exc:
                    notes["shift_fit"] = {"error": str(exc)}
    else:
        raise ValueError(f"unknown sweep quantity {quantity!r}")
    path = out / f"{cfg.name}_sweep_{quantity}.csv"
    write_csv(path, list(cols), list(cols.values()))
    res.files.append(path)
    res.summary = notes
    res.files.append(_sidecar(cfg, out, f"{cfg.name}_sweep_{quantity}", [path.name],
                              {"quantity": quantity, "notes": notes,
                               "validation": rep.as_dict(), "degraded": False}))
    return res


def _selectors_one(cfg, label, t):
    i = cfg.post_labels.index(label)
    return _selectors(cfg, t)[i]


# ---------------------------------------------------------------- validation report


def run_validate(cfg: ScenarioConfig, out: Path, strict: bool = False) -> RunResult:
    out.mkdir(parents=True, exist_ok=True)
    rep = _validation(cfg, strict=False)
    res = RunResult(physics_ok=rep.passed)
    d = cfg.detector
    lines = [f"scenario {cfg.name} ({cfg.model})", f"tool version {__version__}", "",
             "inequalities (lhs >= rhs):"]
    for c in rep.checks:
        lines.append(f"  {'PASS' if c.passed else 'FAIL'}  {c.name}: "
                     f"lhs={c.lhs:.6g} rhs={c.rhs:.6g} margin={c.margin:.6g}")
    lines += ["", f"gamma = {d.gamma:.6g} per {cfg.time_unit}", f"t_a   = {d.t_a:.6g} {cfg.time_unit}",
              f"K     = {d.K:.6g}"]
    for k, v in rep.derived.items():
        if k not in ("gamma", "t_a", "K"):
            lines.append(f"{k} = {v}")
    for n in rep.notes:
        lines.append(f"note: {n}")
    lines += ["", f"{'T':>14} {'T/t_a':>10} {'sigma':>10}"]
    for t in cfg.t_values:
        lines.append(f"{t:14.6g} {t / d.t_a:10.4g} {d.sigma(t):10.4g}")
    txt = out / f"{cfg.name}_validation.txt"
    txt.write_text("\n".join(lines) + "\n")
    js = out / f"{cfg.name}_validation.json"
    js.write_text(to_json({"tool_version": __version__, "config": cfg.echo,
                           "report": rep.as_dict(), "derived": _derived(cfg)}))
    res.files += [txt, js]
    res.summary = rep.as_dict()
    return res


# ---------------------------------------------------------------- trajectories


def run_trajectories(cfg: ScenarioConfig, out: Path, strict: bool = False,
                     seed: int | None = None, threads: int = 1) -> RunResult:
    from .trajectories import (TrajectoryConfig, ensemble_histogram, ks_distance,
                               simulate_ensemble, write_records)

    if cfg.trajectories is None:
        raise ValueError("config has no 'trajectories' section")
    out.mkdir(parents=True, exist_ok=True)
    rep = _validation(cfg, strict)
    res = RunResult(physics_ok=rep.passed)
    opts = cfg.trajectories
    tc = TrajectoryConfig(n_traj=opts["n_traj"], seed=opts["seed"] if seed is None else seed,
                          dt=opts["dt"])
    l = cfg.liouvillian()
    summary = []
    for i, t in enumerate(cfg.t_values):
        sels = _selectors(cfg, t)
        complementary = (len(sels) == 2 and sels[0] is not None and sels[1] is not None
                         and np.allclose(sels[0].op + sels[1].op, np.eye(2), atol=1e-12))
        runs = [(sels[0], [(cfg.post_labels[0], "selected"), (cfg.post_labels[1], "rejected")])] \
            if complementary else [(p, [(lab, "selected")]) for p, lab in zip(sels, cfg.post_labels)]
        for p, targets in runs:
            batch = simulate_ensemble(l, cfg.initial_state, p, t, tc, threads=threads)
            if opts["dump_records"]:
                rp = out / f"{cfg.name}_T{i:02d}_records.csv"
                write_records(batch, rp)
                res.files.append(rp)
            for lab, cond in targets:
                p_ref = p if cond == "selected" else (None if p is None else p.complement())
                cf = sample_cf(l, cfg.initial_state, p_ref, t, cfg.grid)
                ref = invert(cf)
                h = ensemble_histogram(batch, cond, bins=opts["bins"])
                ks = ks_distance(h, ref)
                n_sel = int(batch.selected.sum()) if cond == "selected" else \
                    int((~batch.selected).sum())
                q = float(np.real(cf.normalization))
                se = math.sqrt(max(q * (1 - q), 1e-300) / len(batch))
                z = (n_sel / len(batch) - q) / se
                tag = lab.replace("+", "plus").replace("-", "minus")
                hp = out / f"{cfg.name}_T{i:02d}_{tag}_histogram.csv"
                write_csv(hp, ["O", "density", "stderr", "count"],
                          [h.distribution.grid, h.distribution.density, h.stderr, h.counts])
                res.files.append(hp)
                summary.append({"t": t, "post_selector": lab, "file": hp.name,
                                "n_runs": len(batch), "n_selected": n_sel,
                                "expected_fraction": q, "fraction_z_score": z,
                                "ks_statistic": ks.statistic, "ks_p_value": ks.p_value,
                                "dt": batch.dt, "n_steps": batch.n_steps})
    side = out / f"{cfg.name}_trajectories.json"
    side.write_text(to_json({"tool_version": __version__, "config": cfg.echo,
                             "seed": tc.seed, "results": summary,
                             "validation": rep.as_dict()}))
    res.files.append(side)
    res.summary = {"results": summary}
    return res
