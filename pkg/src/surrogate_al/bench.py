"""Seeded experiment campaigns, budget sweeps and CSV output.

Trial ``i`` of a campaign with master seed ``s`` draws all of its
randomness from ``SeedSequence([s, i])``, so every budget in a sweep sees
the same data streams and results do not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .classes import FiniteClass, LinearBallClass, MonotoneGridClass
from .complexity import ThresholdParams
from .config import ConfigError, ExperimentConfig
from .learners import TrialRecord, run_algorithm1, run_erm_passive
from .losses import lemma3_params, make_loss
from .synth import (make_discrete, make_monotone, make_threshold_tsybakov, make_two_point,
                    threshold_grid_class, two_point_class)

__all__ = [
    "CSV_HEADER",
    "SWEEP_HEADER",
    "UPDATES_HEADER",
    "SweepCell",
    "build_loss",
    "build_problem",
    "build_class",
    "build_params",
    "trial_seed",
    "run_experiment",
    "records_to_csv",
    "write_outputs",
    "sweep",
    "sweep_to_csv",
    "sweep_svg",
    "two_point_preset",
    "monotone_preset",
]

CSV_HEADER = ("trial", "method", "eps", "labels_used", "unlabeled_used", "excess_error",
              "excess_surrogate", "success", "seed", "wall_ms")
SWEEP_HEADER = ("eps", "method", "budget_found", "success_rate", "bound_exceeded")
UPDATES_HEADER = ("trial", "m", "q", "t_hat", "min_risk", "budget", "dis_mass")


# --------------------------------------------------------------------------
# building blocks from a config


def build_loss(cfg: ExperimentConfig):
    return make_loss(cfg["loss.kind"], cfg["loss.f_bar"], cfg["loss.metric_bound"])


def build_problem(cfg: ExperimentConfig, eps: float | None = None):
    """Problem of the config; ``eps`` replaces the two-point ``eps0`` when sweeping."""
    kind = cfg["problem.kind"]
    try:
        if kind == "two_point":
            eps0 = cfg["problem.two_point.eps0"] if eps is None else eps
            return make_two_point(cfg["problem.two_point.z"], eps0, cfg["problem.two_point.eta_x0"])
        if kind == "discrete":
            return make_discrete(cfg["problem.discrete.masses"], cfg["problem.discrete.eta"])
        if kind == "threshold_tsybakov":
            return make_threshold_tsybakov(cfg["problem.threshold_tsybakov.t"],
                                           cfg["problem.threshold_tsybakov.alpha"],
                                           cfg["problem.threshold_tsybakov.z"])
        return make_monotone(cfg["problem.monotone.eta_kind"], cfg["problem.monotone.grid"])
    except ValueError as exc:
        raise ConfigError(str(exc), key=f"problem.{kind}", source=cfg.source)


def build_class(cfg: ExperimentConfig, problem, loss):
    kind = cfg["class.kind"]
    if kind in ("two_point", "threshold_grid", "finite") and not problem.discrete:
        raise ConfigError("a finite class needs a discrete problem", key="class.kind",
                          line=cfg.lines.get("class.kind"), source=cfg.source)
    if kind in ("monotone_grid", "linear_ball") and problem.discrete:
        raise ConfigError(f"{kind} needs a continuous problem", key="class.kind",
                          line=cfg.lines.get("class.kind"), source=cfg.source)
    if kind == "two_point":
        if cfg["problem.kind"] != "two_point":
            raise ConfigError("the two_point class needs the two_point problem", key="class.kind",
                              line=cfg.lines.get("class.kind"), source=cfg.source)
        return two_point_class(problem, loss, cfg["class.two_point.order"])
    if kind == "threshold_grid":
        n = cfg["class.threshold_grid.atoms"]
        if n != len(problem.masses):
            raise ConfigError("atom count differs from the problem", key="class.threshold_grid.atoms",
                              line=cfg.lines.get("class.threshold_grid.atoms"), source=cfg.source)
        return threshold_grid_class(n, loss.f_bar)
    if kind == "finite":
        table = np.array(cfg["class.finite.table"], dtype=float)
        if table.ndim != 2 or table.shape[1] != len(problem.masses):
            raise ConfigError("table rows must have one value per atom", key="class.finite.table",
                              line=cfg.lines.get("class.finite.table"), source=cfg.source)
        return FiniteClass(table)
    if kind == "monotone_grid":
        return MonotoneGridClass(cfg["class.monotone_grid.cells"], loss.f_bar)
    return LinearBallClass(cfg["class.linear_ball.dim"], cfg["class.linear_ball.radius"],
                           cfg["class.linear_ball.affine"])


def build_params(cfg: ExperimentConfig) -> ThresholdParams:
    return ThresholdParams(cfg["threshold.variant"], cfg["threshold.c0"], cfg["threshold.scale"],
                           cfg["threshold.vc_dim"], cfg["experiment.delta"])


def trial_seed(master: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master), int(trial)])


def two_point_preset() -> dict:
    """Settings of the two-point separation benchmark."""
    return {
        "problem.kind": "two_point",
        "problem.two_point.z": 0.25,
        "problem.two_point.eps0": 0.1,
        "problem.two_point.eta_x0": 0.75,
        "class.kind": "two_point",
        "loss.kind": "quadratic",
        "loss.f_bar": 1.0,
        "threshold.variant": "rademacher",
        "threshold.scale": 0.02,
        "experiment.delta": 0.1,
        "experiment.trials": 50,
        "sweep.eps": (0.1, 0.03, 0.01),
    }


def monotone_preset() -> dict:
    """Settings of the monotone-class benchmark with ``eta(x) = x``."""
    return {
        "problem.kind": "monotone",
        "problem.monotone.eta_kind": "linear",
        "class.kind": "monotone_grid",
        "class.monotone_grid.cells": 32,
        "loss.kind": "quadratic",
        "loss.f_bar": 1.0,
        "threshold.variant": "strong_convexity",
        "threshold.scale": 0.05,
        "experiment.delta": 0.1,
        "experiment.trials": 100,
        "experiment.eps": 0.1,
        "budget.u": 2 ** 15,
        "budget.n": 2 ** 12,
    }


# --------------------------------------------------------------------------
# campaigns


@dataclass(frozen=True)
class _Job:
    values: dict
    method: str
    trial: int
    budget: int | None
    eps: float | None


def _run_job(job: _Job):
    cfg = ExperimentConfig(dict(job.values))
    loss = build_loss(cfg)
    follows = cfg["problem.kind"] == "two_point" and job.eps is not None and cfg["sweep.eps0_follows_eps"]
    problem = build_problem(cfg, job.eps if follows else None)
    fclass = build_class(cfg, problem, loss)
    seed = trial_seed(cfg["experiment.master_seed"], job.trial)
    if job.method == "active":
        u = cfg["budget.u"] if job.budget is None else cfg["sweep.u"]
        n = cfg["budget.n"] if job.budget is None else job.budget
        _, rec = run_algorithm1(problem, fclass, loss, u, n, build_params(cfg), seed)
    else:
        m = cfg["budget.m"] if job.budget is None else job.budget
        _, rec = run_erm_passive(problem, fclass, loss, m, seed)
    return rec


def _methods(cfg):
    mode = cfg["experiment.mode"]
    return ("active", "passive") if mode == "both" else (mode,)


def _execute(jobs, n_jobs: int):
    if n_jobs <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * n_jobs))))


def _check_runnable(cfg):
    loss = build_loss(cfg)
    problem = build_problem(cfg)
    fclass = build_class(cfg, problem, loss)
    if "active" in _methods(cfg):
        build_params(cfg)
        if cfg["threshold.variant"] == "rademacher" and fclass.kind != "finite":
            raise ConfigError("the rademacher threshold needs a finite class",
                              key="threshold.variant", line=cfg.lines.get("threshold.variant"),
                              source=cfg.source)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, out: str | None = None):
    """Run every trial of the config and write the outputs.

    Returns the records in ``(trial, method)`` order.
    """
    _check_runnable(cfg)
    work = [_Job(cfg.values, method, trial, None, None)
            for trial in range(cfg["experiment.trials"]) for method in _methods(cfg)]
    records = _execute(work, jobs)
    out = out if out is not None else cfg["output.path"]
    if out:
        write_outputs(cfg, records, out)
    return records


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _record_row(cfg, trial, rec: TrialRecord, eps):
    success = (not rec.failed) and rec.final_excess_error < eps
    wall = int(round(rec.wall_time * 1000)) if cfg["output.timing"] else 0
    return (trial, rec.method, _fmt(float(eps)), rec.labels_used, rec.unlabeled_used,
            _fmt(float(rec.final_excess_error)), _fmt(float(rec.final_excess_surrogate)),
            int(success), f"{cfg['experiment.master_seed']}:{trial}", wall)


def _to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def records_to_csv(cfg: ExperimentConfig, records, eps: float | None = None) -> str:
    """Trial rows in the fixed schema ``CSV_HEADER``."""
    eps = cfg["experiment.eps"] if eps is None else eps
    per = len(_methods(cfg))
    rows = [_record_row(cfg, i // per, rec, eps) for i, rec in enumerate(records)]
    return _to_csv(CSV_HEADER, rows)


def _updates_csv(cfg, records) -> str:
    per = len(_methods(cfg))
    rows = []
    for i, rec in enumerate(records):
        for u in rec.updates:
            rows.append((i // per, u.m, u.q, _fmt(u.t_hat), _fmt(u.min_risk), _fmt(u.budget),
                         _fmt(u.dis_mass)))
    return _to_csv(UPDATES_HEADER, rows)


def provenance(cfg: ExperimentConfig) -> str:
    """Every setting and the derived constants, for the output sidecar."""
    loss = build_loss(cfg)
    b, beta = lemma3_params(loss)
    head = [f"# surrogate_al {__version__}",
            f"# derived.loss_bound = {loss.loss_bound!r}",
            f"# derived.lipschitz_L = {loss.lipschitz_L!r}",
            f"# derived.convexity_c = {loss.convexity_c!r}",
            f"# derived.convexity_r = {loss.convexity_r!r}",
            f"# derived.metric_bound = {loss.metric_bound!r}",
            f"# derived.b = {b!r}",
            f"# derived.beta = {beta!r}"]
    return "\n".join(head) + "\n" + cfg.dump()


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def write_outputs(cfg, records, out: str) -> None:
    """Write the trial CSV plus ``.provenance.txt`` and ``.updates.csv`` sidecars."""
    _write(out, records_to_csv(cfg, records))
    stem = os.path.splitext(out)[0]
    _write(stem + ".provenance.txt", provenance(cfg))
    _write(stem + ".updates.csv", _updates_csv(cfg, records))


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepCell:
    eps: float
    method: str
    budget_found: int | None
    success_rate: float
    bound_exceeded: bool
    evaluations: tuple
    records: tuple


def _evaluate(cfg, method, eps, budget, jobs):
    work = [_Job(cfg.values, method, trial, budget, eps) for trial in range(cfg["experiment.trials"])]
    records = _execute(work, jobs)
    errs = np.array([np.inf if r.failed else r.final_excess_error for r in records])
    ok = bool(np.median(errs) < eps)
    return ok, float(np.mean(errs < eps)), tuple(records)


def _search(cfg, method, eps, jobs):
    """Smallest budget whose median trial reaches excess error below ``eps``."""
    cap = cfg["sweep.max_budget"]
    seen = {}

    def test(b):
        if b not in seen:
            seen[b] = _evaluate(cfg, method, eps, b, jobs)
        return seen[b][0]

    lo, hi = 0, 1
    while not test(hi):
        lo = hi
        if hi >= cap:
            rate, recs = seen[hi][1], seen[hi][2]
            return SweepCell(eps, method, None, rate, True, tuple(sorted(seen)), recs)
        hi = min(2 * hi, cap)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if test(mid):
            hi = mid
        else:
            lo = mid
    return SweepCell(eps, method, hi, seen[hi][1], False, tuple(sorted(seen)), seen[hi][2])


def sweep(cfg: ExperimentConfig, jobs: int = 1, out: str | None = None):
    """Budget search for each target in ``sweep.eps`` and each method.

    Active learning searches the label budget ``n`` with ``u = sweep.u``;
    passive learning searches the sample size ``m``.
    """
    _check_runnable(cfg)
    cells = [_search(cfg, method, eps, jobs)
             for eps in cfg["sweep.eps"] for method in _methods(cfg)]
    out = out if out is not None else cfg["output.path"]
    if out:
        _write(out, sweep_to_csv(cells))
        stem = os.path.splitext(out)[0]
        _write(stem + ".provenance.txt", provenance(cfg))
        _write(stem + ".trials.csv", _sweep_trials_csv(cfg, cells))
        if cfg["output.svg"]:
            _write(stem + ".svg", sweep_svg(cells))
    return cells


def sweep_to_csv(cells) -> str:
    rows = [(_fmt(c.eps), c.method, "" if c.budget_found is None else c.budget_found,
             _fmt(c.success_rate), int(c.bound_exceeded)) for c in cells]
    return _to_csv(SWEEP_HEADER, rows)


def _sweep_trials_csv(cfg, cells) -> str:
    rows = []
    for c in cells:
        rows += [_record_row(cfg, i, r, c.eps) for i, r in enumerate(c.records)]
    return _to_csv(CSV_HEADER, rows)


def sweep_svg(cells, width: int = 480, height: int = 320) -> str:
    """Log-log line chart of budget against ``1/eps``, one line per method."""
    pts = [(1.0 / c.eps, c.budget_found, c.method) for c in cells if c.budget_found]
    pad = 50
    if not pts:
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
                f'<text x="{pad}" y="{pad}">no budgets found</text></svg>\n')
    lx = [math.log10(p[0]) for p in pts]
    ly = [math.log10(p[1]) for p in pts]
    x0, x1 = min(lx), max(lx) + 1e-9
    y0, y1 = min(0.0, min(ly)), max(ly) + 1e-9

    def sx(v):
        return pad + (v - x0) / (x1 - x0 if x1 > x0 else 1.0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0 if y1 > y0 else 1.0) * (height - 2 * pad)

    colors = {"active": "#1f77b4", "passive": "#d62728"}
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'font-family="sans-serif" font-size="11">',
             f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
             f'<text x="{width / 2:.0f}" y="{height - 12}" text-anchor="middle">1/eps (log)</text>',
             f'<text x="14" y="{height / 2:.0f}" transform="rotate(-90 14 {height / 2:.0f})" '
             f'text-anchor="middle">budget (log)</text>']
    for k, method in enumerate(sorted({p[2] for p in pts})):
        sel = sorted((a, b) for a, b, m in pts if m == method)
        coords = " ".join(f"{sx(math.log10(a)):.1f},{sy(math.log10(b)):.1f}" for a, b in sel)
        col = colors.get(method, "#2ca02c")
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{col}" stroke-width="2"/>')
        for a, b in sel:
            parts.append(f'<circle cx="{sx(math.log10(a)):.1f}" cy="{sy(math.log10(b)):.1f}" '
                         f'r="3" fill="{col}"><title>{method}: eps={1 / a:g}, budget={b}</title></circle>')
        parts.append(f'<text x="{width - pad - 60}" y="{pad + 14 * k}" fill="{col}">{method}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
