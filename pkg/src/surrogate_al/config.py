"""Flat ``key = value`` experiment configuration.

One setting per line, dotted keys, ``#`` starts a comment.  Every key has
a default, so an empty document is valid.  Unknown keys, malformed lines
and bad values raise :class:`ConfigError` carrying the line number and
the key.

Example::

    # two-point separation
    problem.kind = two_point
    problem.two_point.z = 0.25
    threshold.scale = 0.02
    sweep.eps = 0.1, 0.03, 0.01
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = ["ConfigError", "ExperimentConfig", "SCHEMA", "parse_config", "load_config"]


class ConfigError(ValueError):
    """Invalid configuration; ``line`` and ``key`` locate the problem when known."""

    def __init__(self, message, line: int | None = None, key: str | None = None, source="<config>"):
        self.line, self.key, self.source = line, key, source
        where = source
        if line is not None:
            where += f":{line}"
        if key is not None:
            where += f": {key}"
        super().__init__(f"{where}: {message}")


def _bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _floats(text):
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    return tuple(float(p) for p in parts)


def _table(text):
    rows = [r for r in text.split(";") if r.strip()]
    return tuple(tuple(float(v) for v in r.split(",")) for r in rows)


def _opt(conv):
    def parse(text):
        return None if text.strip().lower() in ("", "none", "auto") else conv(text)
    return parse


def _choice(*options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {t!r}")
        return t
    return parse


def _names(text):
    return tuple(p.strip() for p in text.split(",") if p.strip())


LOSS_KINDS = ("exponential", "hinge", "quadratic", "truncated_quadratic", "zero_one")

# key -> (parser, default)
SCHEMA = {
    "experiment.mode": (_choice("active", "passive", "both"), "active"),
    "experiment.trials": (int, 50),
    "experiment.master_seed": (int, 0),
    "experiment.delta": (float, 0.1),
    "experiment.eps": (float, 0.1),
    "loss.kind": (_choice(*LOSS_KINDS), "quadratic"),
    "loss.f_bar": (float, 1.0),
    "loss.metric_bound": (_opt(float), None),
    "class.kind": (_choice("two_point", "threshold_grid", "finite", "monotone_grid", "linear_ball"),
                   "two_point"),
    "class.two_point.order": (_choice("g_first", "f_star_first"), "g_first"),
    "class.threshold_grid.atoms": (int, 100),
    "class.finite.table": (_opt(_table), None),
    "class.monotone_grid.cells": (int, 32),
    "class.linear_ball.dim": (int, 1),
    "class.linear_ball.radius": (float, 1.0),
    "class.linear_ball.affine": (_bool, True),
    "problem.kind": (_choice("two_point", "discrete", "threshold_tsybakov", "monotone"), "two_point"),
    "problem.two_point.z": (float, 0.25),
    "problem.two_point.eps0": (float, 0.1),
    "problem.two_point.eta_x0": (float, 0.75),
    "problem.discrete.masses": (_opt(_floats), None),
    "problem.discrete.eta": (_opt(_floats), None),
    "problem.threshold_tsybakov.t": (float, 0.5),
    "problem.threshold_tsybakov.alpha": (float, 1.0),
    "problem.threshold_tsybakov.z": (float, 0.3),
    "problem.monotone.eta_kind": (_choice("linear", "custom"), "linear"),
    "problem.monotone.grid": (_opt(_floats), None),
    "threshold.variant": (_choice("rademacher", "recursive_vc", "strong_convexity"), "rademacher"),
    "threshold.c0": (float, 1.0),
    "threshold.scale": (float, 1.0),
    "threshold.vc_dim": (_opt(int), None),
    "budget.u": (int, 4096),
    "budget.n": (int, 256),
    "budget.m": (int, 256),
    "sweep.eps": (_floats, (0.1, 0.03, 0.01)),
    "sweep.u": (int, 2 ** 16),
    "sweep.max_budget": (int, 2 ** 16),
    "sweep.eps0_follows_eps": (_bool, True),
    "theta.r0": (float, 0.01),
    "calibration.points": (int, 101),
    "calibration.losses": (_names, LOSS_KINDS),
    "calibration.f_bar": (_opt(float), None),
    "oracle.eps": (float, 0.05),
    "oracle.m": (int, 3),
    "oracle.instances": (int, 100),
    "output.path": (_opt(str), None),
    "output.timing": (_bool, False),
    "output.svg": (_bool, False),
}


@dataclass
class ExperimentConfig:
    """Resolved settings plus the lines they came from."""

    values: dict = field(default_factory=lambda: {k: d for k, (_, d) in SCHEMA.items()})
    lines: dict = field(default_factory=dict)
    source: str = "<config>"

    def __getitem__(self, key):
        return self.values[key]

    def replace(self, **updates) -> "ExperimentConfig":
        """Copy with dotted keys given as ``experiment__trials=...`` or via a dict."""
        new = dict(self.values)
        for k, v in updates.items():
            new[k.replace("__", ".")] = v
        cfg = ExperimentConfig(new, dict(self.lines), self.source)
        cfg.validate()
        return cfg

    def with_values(self, mapping: dict) -> "ExperimentConfig":
        unknown = set(mapping) - set(SCHEMA)
        if unknown:
            raise ConfigError("unknown key", key=sorted(unknown)[0], source=self.source)
        new = dict(self.values)
        new.update(mapping)
        cfg = ExperimentConfig(new, dict(self.lines), self.source)
        cfg.validate()
        return cfg

    def _fail(self, key, message):
        raise ConfigError(message, line=self.lines.get(key), key=key, source=self.source)

    def validate(self) -> None:
        v = self.values
        if not 0 < v["experiment.delta"] < 0.25:
            self._fail("experiment.delta", "must lie in (0, 1/4)")
        if v["experiment.trials"] < 1:
            self._fail("experiment.trials", "must be at least 1")
        if not v["loss.f_bar"] > 0:
            self._fail("loss.f_bar", "must be positive")
        if v["threshold.scale"] < 0:
            self._fail("threshold.scale", "must be nonnegative")
        if not v["threshold.c0"] > 0:
            self._fail("threshold.c0", "must be positive")
        for key in ("budget.u", "budget.n"):
            if v[key] < 0:
                self._fail(key, "must be nonnegative")
        if v["budget.m"] < 1:
            self._fail("budget.m", "must be at least 1")
        eps = v["sweep.eps"]
        if not eps or any(e <= 0 or e >= 1 for e in eps):
            self._fail("sweep.eps", "needs values in (0, 1)")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            self._fail("sweep.eps", "must be strictly decreasing")
        if v["sweep.max_budget"] < 1:
            self._fail("sweep.max_budget", "must be at least 1")
        if not v["theta.r0"] > 0:
            self._fail("theta.r0", "must be positive")
        for name in v["calibration.losses"]:
            if name not in LOSS_KINDS:
                self._fail("calibration.losses", f"unknown loss {name!r}")
        if v["class.kind"] == "finite" and v["class.finite.table"] is None:
            self._fail("class.finite.table", "required when class.kind = finite")
        if v["problem.kind"] == "discrete":
            if v["problem.discrete.masses"] is None or v["problem.discrete.eta"] is None:
                self._fail("problem.discrete.masses", "masses and eta are required for a discrete problem")
            if len(v["problem.discrete.masses"]) != len(v["problem.discrete.eta"]):
                self._fail("problem.discrete.eta", "must have as many entries as the masses")
        if v["problem.kind"] == "monotone" and v["problem.monotone.eta_kind"] == "custom" \
                and v["problem.monotone.grid"] is None:
            self._fail("problem.monotone.grid", "required when eta_kind = custom")
        if not math.isfinite(v["experiment.eps"]) or not 0 < v["experiment.eps"] < 1:
            self._fail("experiment.eps", "must lie in (0, 1)")

    def dump(self) -> str:
        """Every setting, one per line, in schema order."""
        out = []
        for key in SCHEMA:
            out.append(f"{key} = {_format(self.values[key])}")
        return "\n".join(out) + "\n"


def _format(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(", ".join(repr(x) for x in row) for row in value)
        return ", ".join(repr(x) if isinstance(x, float) else str(x) for x in value)
    return repr(value) if isinstance(value, float) else str(value)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse a configuration document; see the module docstring for the format."""
    cfg = ExperimentConfig(source=source)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno, source=source)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError("unknown key", line=lineno, key=key, source=source)
        if key in cfg.lines:
            raise ConfigError(f"duplicate key (first set on line {cfg.lines[key]})",
                              line=lineno, key=key, source=source)
        parser = SCHEMA[key][0]
        try:
            cfg.values[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"bad value {value!r}: {exc}", line=lineno, key=key, source=source)
        cfg.lines[key] = lineno
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=str(path))
    return parse_config(text, source=str(path))
