"""Command line entry point: ``surrogate-al {run,sweep,theta,calibration,oracle}``.

Exit codes: 0 on success, 1 when an oracle check fails, 2 on a
configuration error, 3 when ``--strict`` is set and a trial hit an
infeasible version space.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import bench
from .config import ConfigError, ExperimentConfig, load_config

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="surrogate-al", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--seed", type=int, metavar="N", help="override experiment.master_seed")
    common.add_argument("--out", metavar="PATH", help="output CSV (default: output.path or stdout)")
    common.add_argument("--trials", type=int, metavar="N", help="override experiment.trials")
    common.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes")
    common.add_argument("--strict", action="store_true",
                        help="exit with status 3 if any trial hit an infeasible version space")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run trials at fixed budgets")
    sub.add_parser("sweep", parents=[common], help="search the budget reaching each eps")
    sub.add_parser("theta", parents=[common], help="disagreement coefficient curve")
    sub.add_parser("calibration", parents=[common], help="psi tables against closed forms")
    sub.add_parser("oracle", parents=[common], help="spot checks against brute force")
    return p


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["experiment.master_seed"] = args.seed
    if args.trials is not None:
        overrides["experiment.trials"] = args.trials
    return cfg.with_values(overrides) if overrides else cfg


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_run(cfg, args):
    out = args.out or cfg["output.path"]
    records = bench.run_experiment(cfg, jobs=args.jobs, out=out)
    if not out:
        sys.stdout.write(bench.records_to_csv(cfg, records))
    failed = sum(r.failed for r in records)
    if failed:
        print(f"{failed} trial(s) hit an infeasible version space", file=sys.stderr)
    return EXIT_INFEASIBLE if args.strict and failed else EXIT_OK


def _cmd_sweep(cfg, args):
    out = args.out or cfg["output.path"]
    cells = bench.sweep(cfg, jobs=args.jobs, out=out)
    if not out:
        sys.stdout.write(bench.sweep_to_csv(cells))
    failed = any(r.failed for c in cells for r in c.records)
    return EXIT_INFEASIBLE if args.strict and failed else EXIT_OK


def _cmd_theta(cfg, args):
    from .synth import disagreement_curve

    loss = bench.build_loss(cfg)
    problem = bench.build_problem(cfg)
    fclass = bench.build_class(cfg, problem, loss)
    rng = np.random.default_rng(cfg["experiment.master_seed"])
    rows = disagreement_curve(problem, fclass, loss, cfg["theta.r0"], rng=rng)
    text = bench._to_csv(("r", "dis_mass", "ratio", "theta_running_sup"),
                         [tuple(repr(float(v)) for v in row) for row in rows])
    _emit(text, args.out or cfg["output.path"])
    return EXIT_OK


def calibration_rows(cfg):
    """Rows ``(loss, x, psi_tilde, psi, closed_form, abs_diff)`` for the configured losses.

    Without ``calibration.f_bar`` the exponential loss uses ``f_bar = 20``
    (its minimiser runs off to infinity as ``eta -> 1``) and the others 1.
    """
    from .losses import calibration_table, make_loss, psi_tilde

    x = np.linspace(0.0, 1.0, cfg["calibration.points"])
    rows = []
    for kind in cfg["calibration.losses"]:
        f_bar = cfg["calibration.f_bar"]
        if f_bar is None:
            f_bar = 20.0 if kind == "exponential" else 1.0
        loss = make_loss(kind, f_bar)
        env = calibration_table(loss).envelope(x)
        pt = psi_tilde(loss, x)
        closed = loss.closed_form_psi(x)
        for i in range(len(x)):
            rows.append((kind, repr(float(x[i])), repr(float(pt[i])), repr(float(env[i])),
                         repr(float(closed[i])), repr(float(abs(env[i] - closed[i])))))
    return rows


def _cmd_calibration(cfg, args):
    text = bench._to_csv(("loss", "x", "psi_tilde", "psi", "closed_form", "abs_diff"),
                         calibration_rows(cfg))
    _emit(text, args.out or cfg["output.path"])
    return EXIT_OK


def oracle_checks(cfg):
    """Rows ``(check, value, reference, abs_diff, pass)``."""
    from .classes import dis_contains, erm
    from .classes import MonotoneGridClass
    from .losses import conditional_risk, make_loss
    from .oracle import (DiscreteScenario, brute_dis, brute_erm, exact_gamma_transform, exact_phi,
                         random_finite_version_space, random_monotone_instance)
    from .synth import make_two_point, two_point_class

    rng = np.random.default_rng(cfg["experiment.master_seed"])
    loss = bench.build_loss(cfg)
    rows = []

    prob = make_two_point(cfg["problem.two_point.z"], cfg["problem.two_point.eps0"],
                          cfg["problem.two_point.eta_x0"])
    scen = DiscreteScenario(two_point_class(prob, loss), prob, loss, cfg["oracle.m"])
    gamma = exact_gamma_transform(scen, loss, cfg["oracle.eps"])
    eta1 = prob.eta_values[1]
    z1 = prob.f_star(loss).values[1]
    ref = np.inf
    if prob.params["eps0"] > cfg["oracle.eps"]:
        ref = float(prob.masses[1] * (conditional_risk(loss, eta1, -z1)
                                      - conditional_risk(loss, eta1, z1)))
    diff = 0.0 if gamma == ref else abs(gamma - ref)
    rows.append(("gamma_two_point", gamma, ref, diff, diff <= 1e-12))
    phi = exact_phi(scen)
    rows.append(("phi_two_point", phi, "", "", phi >= 0))

    quad = make_loss("quadratic")
    cls = MonotoneGridClass(cfg["class.monotone_grid.cells"])
    worst = 0.0
    for _ in range(cfg["oracle.instances"]):
        batch = random_monotone_instance(rng)
        worst = max(worst, float(np.max(np.abs(erm(cls, quad, batch).values
                                               - brute_erm(cls, quad, batch).values))))
    rows.append(("pav_vs_brute", worst, 0.0, worst, worst <= 1e-6))

    mismatches = 0
    for _ in range(cfg["oracle.instances"]):
        vs, n_atoms = random_finite_version_space(rng, loss)
        mismatches += sum(dis_contains(vs, loss, x) != brute_dis(vs, x) for x in range(n_atoms))
    rows.append(("dis_vs_enumeration", mismatches, 0, mismatches, mismatches == 0))
    return rows


def _cmd_oracle(cfg, args):
    rows = oracle_checks(cfg)
    text = bench._to_csv(("check", "value", "reference", "abs_diff", "pass"),
                         [(c, repr(v) if isinstance(v, float) else v,
                           repr(r) if isinstance(r, float) else r,
                           repr(d) if isinstance(d, float) else d, int(bool(ok)))
                          for c, v, r, d, ok in rows])
    _emit(text, args.out or cfg["output.path"])
    return EXIT_OK if all(r[4] for r in rows) else EXIT_CHECK


COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "theta": _cmd_theta,
    "calibration": _cmd_calibration,
    "oracle": _cmd_oracle,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1", key="--jobs")
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
