"""Command-line experiment runner.

Configuration files are flat ``key = value`` lines with ``#`` comments::

    experiment = maxwell-fourier
    T = 50
    k-list = 2.2, 2.5, 2.8

``grainkin run cfg.txt --set dt=0.005`` runs one experiment and writes
``series.csv``, ``report.csv``, ``plot.gp`` and ``config.txt`` (the effective
configuration) to the output directory.  Exit status is 0 when every
criterion passes, 2 when one fails and 1 on a runtime error.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import traceback
from dataclasses import dataclass, fields, replace
from pathlib import Path

from . import experiments as ex
from .errors import ConfigError

__all__ = ["ExperimentConfig", "parse_config", "apply_overrides", "run", "list_experiments", "main"]

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2

# per-experiment defaults; keys absent here fall back to the generic ones
_DEFAULTS = {
    "constants": dict(L=200.0, N=2**14, xi_max=60.0, M=8192),
    "maxwell-fourier": dict(xi_max=60.0, M=8192, dt=0.01, T=50.0),
    "maxwell-physical": dict(gamma=0.0, L=200.0, N=2**14, xi_max=40.0, M=2048, dt=0.05, T=50.0),
    "profile": dict(gamma=0.1, L=40.0, N=4096, dt=0.1, T=3000.0),
    "uniqueness-probe": dict(gamma=0.1, L=40.0, N=4096, dt=0.1, T=3000.0),
    "gap": dict(L=200.0, N=2**14, dt=0.05, T=100.0),
}
_GENERIC = dict(gamma=0.0, c=0.25, L=200.0, N=2**14, xi_max=60.0, M=8192, dt=0.01, T=50.0,
                k_list=(2.2, 2.5, 2.8), a=2.5, tol=1e-4, seed=0, gammas=())


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "constants"
    gamma: float | None = None
    c: float | None = None
    L: float | None = None
    N: int | None = None
    xi_max: float | None = None
    M: int | None = None
    dt: float | None = None
    T: float | None = None
    k_list: tuple | None = None
    a: float | None = None
    tol: float | None = None
    seed: int | None = None
    gammas: tuple | None = None
    output: str = "grainkin-out"

    def resolved(self) -> "ExperimentConfig":
        """Fill unset parameters with the experiment's defaults and validate."""
        if self.experiment not in ex.EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; "
                              f"choose one of {', '.join(sorted(ex.EXPERIMENTS))}", "experiment")
        base = {**_GENERIC, **_DEFAULTS[self.experiment]}
        filled = {k: base[k] for k in base if getattr(self, k) is None}
        cfg = replace(self, **filled)
        _validate(cfg)
        return cfg

    def echo(self) -> str:
        lines = [f"experiment = {self.experiment}"]
        for f in fields(self):
            if f.name in ("experiment", "output"):
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(repr(float(x)) for x in v)
            lines.append(f"{_external(f.name)} = {v}")
        lines.append(f"output = {self.output}")
        return "\n".join(lines) + "\n"


_KEYS = {f.name for f in fields(ExperimentConfig)}
_INT_KEYS = {"N", "M", "seed"}
_LIST_KEYS = {"k_list", "gammas"}
_STR_KEYS = {"experiment", "output"}


def _internal(key: str) -> str:
    return key.strip().replace("-", "_")


def _external(name: str) -> str:
    return name.replace("_", "-")


def _convert(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _STR_KEYS:
            if not raw:
                raise ValueError
            return raw
        if key in _LIST_KEYS:
            return tuple(float(v) for v in raw.replace(",", " ").split())
        if key in _INT_KEYS:
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError
        return v
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r} for {_external(key)}", _external(key)) from None


def _validate(cfg: ExperimentConfig) -> None:
    def need(ok, key, msg):
        if not ok:
            raise ConfigError(msg, key)

    need(0.0 <= cfg.gamma < 1.0, "gamma", "gamma must lie in [0,1)")
    if cfg.experiment in ("profile", "uniqueness-probe"):
        need(cfg.gamma > 0.0, "gamma", "gamma must lie in (0,1) for steady profiles")
    need(cfg.c > 0, "c", "c must be positive")
    need(cfg.L > 0, "L", "L must be positive")
    need(cfg.N >= 8 and cfg.N % 2 == 0, "N", "N must be an even integer >= 8")
    need(cfg.xi_max > 0, "xi_max", "xi_max must be positive")
    need(cfg.M >= 4, "M", "M must be an integer >= 4")
    need(0 < cfg.dt <= 0.5, "dt", "dt must lie in (0, 0.5]")
    need(cfg.T > 0, "T", "T must be positive")
    need(len(cfg.k_list) > 0 and all(2.0 < k < 3.0 for k in cfg.k_list), "k-list",
         "k-list entries must lie in (2,3)")
    need(2.0 < cfg.a < 3.0, "a", "a must lie in (2,3)")
    need(cfg.tol > 0, "tol", "tol must be positive")
    need(cfg.seed >= 0, "seed", "seed must be a nonnegative integer")
    need(all(0.0 < g < 1.0 for g in cfg.gammas), "gammas", "gammas entries must lie in (0,1)")


def _assign(values: dict, line: str, where: str) -> None:
    if "=" not in line:
        raise ConfigError(f"{where}: expected 'key = value', got {line.strip()!r}")
    key, raw = line.split("=", 1)
    name = _internal(key)
    if name not in _KEYS:
        raise ConfigError(f"{where}: unknown key {key.strip()!r}", key.strip())
    values[name] = _convert(name, raw)


def parse_config(text: str, overrides=()) -> ExperimentConfig:
    """Parse ``key = value`` text (plus ``key=value`` overrides) into a validated config."""
    values: dict = {}
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if line:
            _assign(values, line, f"line {no}")
    for item in overrides:
        _assign(values, item, "--set")
    return ExperimentConfig(**values).resolved()


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    values: dict = {}
    for item in overrides:
        _assign(values, item, "--set")
    return replace(cfg, **values).resolved()


# ------------------------------------------------------------ running

def _call(cfg: ExperimentConfig) -> ex.Outcome:
    e = cfg.experiment
    if e == "constants":
        return ex.constants(cfg.L, cfg.N, cfg.xi_max, cfg.M, cfg.seed)
    if e == "maxwell-fourier":
        return ex.maxwell_fourier(cfg.xi_max, cfg.M, cfg.dt, cfg.T, cfg.k_list)
    if e == "maxwell-physical":
        return ex.maxwell_physical(cfg.L, cfg.N, cfg.dt, cfg.T, cfg.gamma, cfg.c, cfg.xi_max, cfg.M)
    if e == "profile":
        return ex.profile(cfg.gamma, cfg.c, cfg.L, cfg.N, cfg.dt, cfg.tol, cfg.T, cfg.a, cfg.gammas)
    if e == "uniqueness-probe":
        return ex.uniqueness_probe(cfg.gamma, cfg.c, cfg.L, cfg.N, cfg.dt, cfg.tol, cfg.T, cfg.a)
    return ex.gap(cfg.a, cfg.L, cfg.N, cfg.dt, cfg.T)


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _plot_script(columns) -> str:
    lines = ["set datafile separator ','", "set key autotitle columnhead",
             "set logscale y", "set xlabel 't'", "set terminal pngcairo size 900,600",
             "set output 'series.png'"]
    if len(columns) > 1:
        plots = ", ".join(f"'series.csv' using 1:{i + 1} with lines" for i in range(1, len(columns)))
        lines.append(f"plot {plots}")
    return "\n".join(lines) + "\n"


def write_outputs(outdir: Path, cfg: ExperimentConfig, outcome: ex.Outcome) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.txt").write_text(cfg.echo())
    _write_csv(outdir / "series.csv", outcome.columns,
               [[_fmt(v) for v in row] for row in outcome.series])
    _write_csv(outdir / "report.csv", ["key", "value", "reference", "provenance", "status"],
               [[r.key, _fmt(r.value), _fmt(r.reference), r.provenance, r.status]
                for r in outcome.rows])
    (outdir / "plot.gp").write_text(_plot_script(outcome.columns))


def run(cfg: ExperimentConfig, out=None) -> int:
    """Run one experiment and write its outputs; returns the exit status."""
    out = out or sys.stdout
    outdir = Path(cfg.output)
    try:
        outcome = _call(cfg)
    except Exception as err:  # report any solver failure as a diagnostic row
        outcome = ex.Outcome(["t"])
        outcome.rows.append(ex.Row("error", float("nan"), None, "oracle", "fail"))
        write_outputs(outdir, cfg, outcome)
        with open(outdir / "report.csv", "a", newline="") as fh:
            fh.write(f"# {type(err).__name__}: {str(err).replace(chr(10), ' ')}\n")
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        if os.environ.get("GRAINKIN_DEBUG"):
            traceback.print_exc()
        return EXIT_ERROR
    write_outputs(outdir, cfg, outcome)
    for r in outcome.rows:
        print(f"{r.key:32s} {r.value: .9g}  [{r.provenance}] {r.status}", file=out)
    return EXIT_FAIL if outcome.failed else EXIT_OK


def list_experiments() -> str:
    return "\n".join(f"{name}: {ex.EXPERIMENTS[name][1]}" for name in sorted(ex.EXPERIMENTS)) + "\n"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="grainkin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one configured experiment")
    p_run.add_argument("config", nargs="?", help="key = value configuration file")
    p_run.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override one configuration entry")
    p_run.add_argument("-o", "--output", help="output directory (overrides the config)")
    sub.add_parser("list", help="list the available experiments")
    args = parser.parse_args(argv)

    if args.command == "list":
        sys.stdout.write(list_experiments())
        return EXIT_OK
    try:
        text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
        overrides = list(args.overrides)
        if args.output:
            overrides.append(f"output={args.output}")
        cfg = parse_config(text, overrides)
    except (ConfigError, OSError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_ERROR
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
