"""Run a validated manifest and write results.csv, summary.json and plot.svg."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import spectral as sp
from .attractor import (
    RateRangeError,
    absorbing_radius,
    bound_report,
    decay_bound,
    derive_constants,
    drift_residual,
    pullback_entry_time,
    radius_boundedness,
    steady_state,
)
from .ensemble import family_mean_square, family_norm, require_universe, run_ensemble, sample_initial
from .integrate import simulate_path
from .manifest import Manifest
from .model import validate_params
from .rng import BrownianStream
from .spectral import ConfigurationError, SpectralState

ABSORB_SLACK = 1e-2
STEADY_RESIDUAL_TOL = 1e-10
STEADY_DRIFT_TOL = 1e-8


@dataclass(frozen=True)
class Verdict:
    passed: bool
    margin: float
    note: str = ""

    def as_dict(self) -> dict:
        return {"status": "pass" if self.passed else "fail", "margin": self.margin, "note": self.note}


@dataclass
class RunOutcome:
    artifacts: list[Path]
    verdicts: dict[str, Verdict]
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts.values())


# ---------------------------------------------------------------------------
# output helpers


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % (float(x) + 0.0)
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x) + 0.0
        return x if math.isfinite(x) else None
    return x


def write_summary(path: Path, summary: dict) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    return path


def write_plot(path: Path, title: str, xlabel: str, curves: list[tuple], log_y: bool = False) -> Path:
    """Static SVG; ``curves`` holds ``(x, y, label, band)`` with optional CI band."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "mra", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for x, y, label, band in curves:
            line = ax.plot(x, y, label=label)[0]
            if band is not None:
                ax.fill_between(x, y - band, y + band, color=line.get_color(), alpha=0.25, linewidth=0)
        ax.set_xlabel(xlabel)
        ax.set_title(title)
        if log_y:
            ax.set_yscale("log")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path


def _margin(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.max(values)) if values.size else -math.inf


# ---------------------------------------------------------------------------
# experiment kinds


def _constants(m: Manifest, params, basis):
    eps = m.get("experiment", "epsilon")
    return derive_constants(params, basis, epsilon=eps) if eps is not None else derive_constants(params, basis)


def _exp_check(m, params, basis, out):
    report = validate_params(params, basis)
    rows = [(c.name, c.status, c.margin) for c in report.checks]
    verdicts = {c.name: Verdict(c.passed, c.margin, c.note) for c in report.checks}
    summary = {}
    try:
        summary["constants"] = _constants(m, params, basis).as_dict()
    except (RateRangeError, ConfigurationError) as exc:
        summary["constants"] = None
        summary["constants_note"] = str(exc)
    return [write_csv(out / "results.csv", ["assumption", "status", "margin"], rows)], verdicts, summary, None


def _initial_state(m, basis):
    spec = m.family()
    return sample_initial(spec, m.get("time", "tau"), 0, m.get("ensemble", "seed"), basis)


def _exp_simulate(m, params, basis, out):
    tau, T, dt = m.get("time", "tau"), m.get("time", "T"), m.get("time", "dt")
    stream = BrownianStream(m.get("ensemble", "seed"), 0, dt) if params.stochastic else None
    traj = simulate_path(_initial_state(m, basis), tau, T, dt, params, stream, m.get("time", "record_every"))
    rows = zip(traj.times, traj.h_sq, traj.v_sq, traj.a_values, traj.h2_sq)
    path = write_csv(out / "results.csv", ["t", "h_sq", "v_sq", "a", "h2_sq"], rows)
    verdicts = {"completed": Verdict(True, _margin(traj.h_sq) - 1e12, "no blow-up")}
    plot = ("single path", "t", [(traj.times, traj.h_sq, "||u||^2", None), (traj.times, traj.v_sq, "||u||_V^2", None)])
    return [path], verdicts, {"final_h_sq": traj.h_sq[-1]}, plot


def _run(m, params, basis, spec, residuals=False):
    return run_ensemble(
        params,
        spec,
        m.get("time", "tau"),
        m.get("time", "T"),
        m.get("time", "dt"),
        m.get("ensemble", "paths"),
        m.get("ensemble", "seed"),
        basis,
        record_every=m.get("time", "record_every"),
        residuals=residuals,
    )


def _residual_verdict(res) -> Verdict:
    excess = np.abs(res.residual_mean) - res.residual_ci
    inside = float(np.mean(excess <= 0))
    return Verdict(bool(np.all(excess <= 0)), _margin(excess), f"{inside:.3f} of recorded times inside the CI")


def _exp_ensemble(m, params, basis, out):
    residuals = bool(m.get("experiment", "residuals"))
    res = _run(m, params, basis, m.family(), residuals)
    header = ["t", "mean_h_sq", "ci_half_width", "mean_v_sq"]
    cols = [res.times, res.mean_h_sq, res.ci_half_width, res.mean_v_sq]
    verdicts = {"completed": Verdict(True, -math.inf)}
    if residuals:
        header += ["residual_mean", "residual_ci"]
        cols += [_pad(res.residual_mean, len(res.times)), _pad(res.residual_ci, len(res.times))]
        verdicts["energy_identity"] = _residual_verdict(res)
    path = write_csv(out / "results.csv", header, zip(*cols))
    plot = ("ensemble mean square", "t", [(res.times, res.mean_h_sq, "E||u||^2", res.ci_half_width)])
    return [path], verdicts, {"paths": res.path_count}, plot


def _pad(x, n):
    """Residuals live on intervals; the final recorded time has none."""
    out = np.full(n, math.nan)
    out[: len(x)] = x
    return out


def _bound_rows(times, res, bound):
    margin = res.mean_h_sq - bound - res.ci_half_width
    return margin, zip(times, res.mean_h_sq, res.ci_half_width, bound, margin)


BOUND_HEADER = ["t", "mean_h_sq", "ci_half_width", "bound", "margin"]


def _exp_decay(m, params, basis, out):
    consts = _constants(m, params, basis)
    spec = m.family()
    tau = m.get("time", "tau")
    res = _run(m, params, basis, spec)
    E0 = family_mean_square(spec, tau, basis)
    bound = decay_bound(res.times, tau, E0, params, consts)
    margin, rows = _bound_rows(res.times, res, bound)
    path = write_csv(out / "results.csv", BOUND_HEADER, rows)
    report = bound_report(res.times, bound, res.mean_h_sq, res.ci_half_width)
    verdicts = {"decay_bound": Verdict(report.passed, report.violation_margin, "max of mean - bound - CI")}
    plot = ("decay bound", "t", [(res.times, res.mean_h_sq, "E||u||^2", res.ci_half_width), (res.times, bound, "bound", None)])
    return [path], verdicts, {"constants": consts.as_dict(), "E0": E0}, plot


def _exp_absorb(m, params, basis, out):
    consts = _constants(m, params, basis)
    spec = m.family()
    require_universe(spec, consts.rate)
    tau = m.get("time", "tau")
    res = _run(m, params, basis, spec)
    radius = np.asarray(absorbing_radius(res.times, params, consts), dtype=float)
    slack = 1.0 if params.stochastic else 1.0 + ABSORB_SLACK
    bound = radius * slack
    margin, rows = _bound_rows(res.times, res, bound)
    path = write_csv(out / "results.csv", BOUND_HEADER, rows)
    # after e^{-rate s} ||D(tau)||^2 <= 1 the mean square must sit inside the ball
    entry = max(0.0, math.log(max(family_norm(spec, tau), 1e-300)) / consts.rate)
    after = res.times - tau >= entry
    v = _margin(margin[after])
    verdicts = {"absorbed_after_entry": Verdict(v <= 0, v, f"rows with t - tau >= {entry:.6g}")}
    plot = ("absorbing radius", "t", [(res.times, res.mean_h_sq, "E||u||^2", res.ci_half_width), (res.times, bound, "radius", None)])
    summary = {"constants": consts.as_dict(), "entry_time": entry, "radius_slack": slack}
    return [path], verdicts, summary, plot


def _exp_entry(m, params, basis, out):
    consts = _constants(m, params, basis)
    spec = m.family()
    t = m.get("experiment", "t")
    r = pullback_entry_time(
        t,
        spec,
        params,
        consts,
        basis,
        dt=m.get("time", "dt"),
        paths=m.get("ensemble", "paths"),
        master_seed=m.get("ensemble", "seed"),
        s_cap=m.get("experiment", "s_cap"),
    )
    rows = zip(r.grid, r.mean_h_sq, np.full(len(r.grid), r.radius), r.absorbed)
    path = write_csv(out / "results.csv", ["s", "mean_h_sq_at_t", "radius", "absorbed"], rows)
    verdicts = {
        "entry_time": Verdict(r.measured <= r.grid_step_bound, r.measured - r.grid_step_bound, "measured - first grid value >= theoretical"),
        "absorbed_after_theoretical": Verdict(r.report.passed, r.report.violation_margin),
    }
    summary = {
        "constants": consts.as_dict(),
        "theoretical_entry_time": r.theoretical,
        "measured_entry_time": r.measured,
        "grid_step_bound": r.grid_step_bound,
        "radius": r.radius,
    }
    plot = (
        f"pullback entry at t = {t:g}",
        "s",
        [(r.grid, r.mean_h_sq, "E||u(t)||^2", r.ci), (r.grid, np.full(len(r.grid), r.radius), "radius", None)],
    )
    return [path], verdicts, summary, plot


def _exp_steady(m, params, basis, out):
    if not (params.forcing.is_zero or params.forcing.is_constant):
        raise ConfigurationError("steady states need constant forcing")
    h0 = params.forcing.mode_vector(basis)
    z = steady_state(params, h0, basis)
    resid = drift_residual(params, z)
    tau, T, dt = m.get("time", "tau"), m.get("time", "T"), m.get("time", "dt")
    traj = simulate_path(z, tau, T, dt, params)
    drift = float(np.max(np.abs(traj.gammas - z.gamma)))
    verdicts = {
        "residual": Verdict(resid <= STEADY_RESIDUAL_TOL, resid - STEADY_RESIDUAL_TOL),
        "fixed_under_flow": Verdict(drift <= STEADY_DRIFT_TOL, drift - STEADY_DRIFT_TOL),
    }
    summary = {"residual": resid, "max_drift": drift, "z_h_sq": sp.h_norm_sq(z.gamma)}
    try:
        consts = _constants(m, params, basis)
    except (RateRangeError, ConfigurationError) as exc:
        summary["constants_note"] = str(exc)
    else:
        taus = m.get("experiment", "radius_times") or [-10.0, 0.0, 10.0]
        R = np.array([float(absorbing_radius(x, params, consts)) for x in taus])
        v = _margin(sp.h_norm_sq(z.gamma) - R)
        verdicts["inside_radius"] = Verdict(v <= 0, v, "||z||^2 - R(tau) over " + ", ".join(f"{x:g}" for x in taus))
        summary["constants"] = consts.as_dict()
        summary["radius"] = dict(zip((f"{x:g}" for x in taus), R))
    rows = [(j + 1, basis.lam[j], z.gamma[j]) for j in range(basis.N)]
    path = write_csv(out / "results.csv", ["mode", "lambda", "gamma"], rows)
    return [path], verdicts, summary, None


def _linear_oracle(params, basis, gamma0, times, tau):
    """Closed-form ``||u||^2`` (deterministic) or ``E||u||^2`` (Ito linear noise)."""
    if params.a.kind != "constant" or params.f.kind not in ("zero", "linear") or not params.forcing.is_zero:
        raise ConfigurationError("oracle-compare needs constant a, zero or linear f, and zero forcing")
    if params.sigma.kind not in ("zero", "affine") or params.sigma.at_zero != 0.0:
        raise ConfigurationError("oracle-compare needs zero noise or affine noise with s0 = 0")
    s = params.f.slope if params.f.kind == "linear" else 0.0
    c = params.sigma.c if params.sigma.kind == "affine" else 0.0
    growth = 2 * (s - params.a.m * basis.lam) + c * c
    return np.exp(np.outer(np.asarray(times) - tau, growth)) @ (gamma0**2)


def _exp_oracle(m, params, basis, out):
    spec = m.family()
    if spec.shape != "point":
        raise ConfigurationError("oracle-compare needs a point family")
    tau, dt = m.get("time", "tau"), m.get("time", "dt")
    g0 = spec._padded(spec.state, basis)
    scale = float(np.sum(g0**2))
    if params.stochastic:
        res = _run(m, params, basis, spec, residuals=True)
        times, measured, ci = res.times, res.mean_h_sq, res.ci_half_width
        tol = ci + 3 * dt * scale
    else:
        traj = simulate_path(SpectralState(g0, basis), tau, m.get("time", "T"), dt, params, None, m.get("time", "record_every"))
        times, measured = traj.times, traj.h_sq
        ci = np.zeros_like(times)
        tol = 2 * dt * scale
    oracle = _linear_oracle(params, basis, g0, times, tau)
    err = measured - oracle
    header = ["t", "measured", "oracle", "ci_half_width", "error"]
    cols = [times, measured, oracle, ci, err]
    verdicts = {"moment_oracle": Verdict(bool(np.all(np.abs(err) <= tol)), _margin(np.abs(err) - tol))}
    if params.stochastic:
        header += ["residual_mean", "residual_ci"]
        cols += [_pad(res.residual_mean, len(times)), _pad(res.residual_ci, len(times))]
        verdicts["energy_identity"] = _residual_verdict(res)
    path = write_csv(out / "results.csv", header, zip(*cols))
    plot = ("closed-form oracle", "t", [(times, measured, "simulated", ci), (times, oracle, "oracle", None)])
    return [path], verdicts, {"final_error": err[-1]}, plot


RUNNERS = {
    "check": _exp_check,
    "simulate": _exp_simulate,
    "ensemble": _exp_ensemble,
    "absorb": _exp_absorb,
    "decay": _exp_decay,
    "entry-time": _exp_entry,
    "steady": _exp_steady,
    "oracle-compare": _exp_oracle,
}


def run_experiment(manifest: Manifest, out_dir: str | os.PathLike | None = None) -> RunOutcome:
    """Run the manifest's experiment; the outcome lists the written artifact paths."""
    out = Path(out_dir if out_dir is not None else manifest.get("output", "dir"))
    basis = manifest.basis()
    params = manifest.params()
    out.mkdir(parents=True, exist_ok=True)
    artifacts, verdicts, extra, plot = RUNNERS[manifest.kind](manifest, params, basis, out)
    summary = {
        "experiment": manifest.kind,
        "verdict": "pass" if all(v.passed for v in verdicts.values()) else "fail",
        "verdicts": {k: v.as_dict() for k, v in verdicts.items()},
        "manifest": manifest.to_dict(),
        **extra,
    }
    if manifest.kind in ("decay", "absorb", "check") and params.forcing is not None:
        try:
            rate = summary.get("constants", {}) or {}
            if rate.get("rate"):
                summary["radius_class"] = radius_boundedness(params.forcing, rate["rate"]).kind
        except ValueError:
            pass
    artifacts.append(write_summary(out / "summary.json", summary))
    if plot is not None and manifest.get("output", "plot"):
        artifacts.append(write_plot(out / "plot.svg", plot[0], plot[1], plot[2]))
    return RunOutcome(artifacts, verdicts, summary)
