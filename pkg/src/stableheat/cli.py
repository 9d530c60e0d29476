"""Command-line runner: ``stableheat {density,heat,perimeter,simulate,verify}``.

Settings come from an optional ``--config`` file (INI sections ``law``,
``interval``, ``grid``, ``mc``, ``tolerances``, ``output``) and are then
overridden by flags. Tables are CSV with shortest round-trip float
formatting. Exit codes: 0 success or all checks pass, 1 some check failed,
2 bad configuration or a numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import json
import math
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import Tolerances, verify_theorem
from .interval_heat import (
    Interval,
    fractional_perimeter,
    fractional_perimeter_quadrature,
    h_limit_constant,
    heat_loss,
)
from .path_sim import MCConfig, l_measure, q_measure, r_measure, simulate_ensemble
from .quadrature import QuadratureError
from .stable_core import StableLaw

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    start: float
    ratio: float
    count: int

    def __post_init__(self):
        if not (self.start > 0 and 0 < self.ratio < 1 and self.count >= 1):
            raise ConfigError("t grid needs start > 0, 0 < ratio < 1 and count >= 1 (strictly decreasing toward 0)")

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        try:
            start, ratio, count = text.split(":")
            return cls(float(start), float(ratio), int(count))
        except ValueError as exc:
            raise ConfigError(f"bad t grid {text!r}; expected start:ratio:count") from exc

    def times(self) -> list[float]:
        # 15 significant digits keeps 0.1 * 0.1**2 printing as 0.001
        return [float(f"{self.start * self.ratio**k:.15g}") for k in range(self.count)]

    def __str__(self):
        return f"{self.start!r}:{self.ratio!r}:{self.count}"


@dataclass
class ExperimentConfig:
    alpha: float = 1.5
    interval: tuple[float, float] = (0.0, 1.0)
    t_grid: GridSpec = GridSpec(0.1, 0.1, 6)
    x_grid: tuple[float, float, int] = (-20.0, 20.0, 81)
    seed: int | None = 12345
    n_paths: int = 100_000
    n_steps: tuple[int, ...] = (250, 1000, 4000)
    workers: int = 1
    block_paths: int = 1000
    bridge: bool = False
    tolerances: Tolerances = Tolerances()
    output: str | None = None

    def validate(self, uses_mc: bool):
        if not 0 < self.alpha <= 2:
            raise ConfigError(f"alpha must lie in (0, 2], got {self.alpha}")
        try:
            Interval(*self.interval)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if uses_mc:
            if self.seed is None:
                raise ConfigError("a seed is required for Monte Carlo runs")
            try:
                self.mc()
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        for f in dataclasses.fields(self.tolerances):
            if not getattr(self.tolerances, f.name) > 0:
                raise ConfigError(f"tolerance {f.name} must be positive")

    def mc(self) -> MCConfig:
        return MCConfig(
            seed=self.seed,
            n_paths=self.n_paths,
            n_steps=self.n_steps,
            block_paths=self.block_paths,
            workers=self.workers,
            bridge=self.bridge,
        )

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "interval": list(self.interval),
            "t_grid": str(self.t_grid),
            "x_grid": list(self.x_grid),
            "seed": self.seed,
            "n_paths": self.n_paths,
            "n_steps": list(self.n_steps),
            "block_paths": self.block_paths,
            "bridge": self.bridge,
            "tolerances": dataclasses.asdict(self.tolerances),
        }


def _parse_pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad interval {text!r}; expected a,b") from exc
    return a, b


def _parse_steps(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in str(text).split(","))
    except ValueError as exc:
        raise ConfigError(f"bad step schedule {text!r}") from exc


def _parse_xgrid(text: str) -> tuple[float, float, int]:
    try:
        lo, hi, n = text.split(":")
        return float(lo), float(hi), int(n)
    except ValueError as exc:
        raise ConfigError(f"bad x grid {text!r}; expected start:stop:count") from exc


def load_config(path: str | None) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    try:
        if parser.has_option("law", "alpha"):
            cfg.alpha = parser.getfloat("law", "alpha")
        if parser.has_section("interval"):
            cfg.interval = (parser.getfloat("interval", "a", fallback=0.0), parser.getfloat("interval", "b", fallback=1.0))
        if parser.has_option("grid", "t_grid"):
            cfg.t_grid = GridSpec.parse(parser.get("grid", "t_grid"))
        if parser.has_option("grid", "x_grid"):
            cfg.x_grid = _parse_xgrid(parser.get("grid", "x_grid"))
        if parser.has_section("mc"):
            mc = parser["mc"]
            cfg.seed = mc.getint("seed", fallback=cfg.seed)
            cfg.n_paths = mc.getint("paths", fallback=cfg.n_paths)
            if "steps" in mc:
                cfg.n_steps = _parse_steps(mc["steps"])
            cfg.workers = mc.getint("workers", fallback=cfg.workers)
            cfg.block_paths = mc.getint("block_paths", fallback=cfg.block_paths)
            cfg.bridge = mc.getboolean("bridge", fallback=cfg.bridge)
        if parser.has_section("tolerances"):
            known = {f.name for f in dataclasses.fields(Tolerances)}
            over = {}
            for k, v in parser["tolerances"].items():
                if k not in known:
                    raise ConfigError(f"unknown tolerance {k!r}")
                over[k] = float(v)
            cfg.tolerances = dataclasses.replace(cfg.tolerances, **over)
        if parser.has_option("output", "dir"):
            cfg.output = parser.get("output", "dir")
    except (ValueError, configparser.Error) as exc:
        raise ConfigError(f"bad config file {path}: {exc}") from None
    return cfg


def resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.alpha is not None:
        cfg.alpha = args.alpha
    if args.interval is not None:
        cfg.interval = _parse_pair(args.interval)
    if args.t_grid is not None:
        cfg.t_grid = GridSpec.parse(args.t_grid)
    if getattr(args, "x_grid", None) is not None:
        cfg.x_grid = _parse_xgrid(args.x_grid)
    if args.paths is not None:
        cfg.n_paths = args.paths
    if args.steps is not None:
        cfg.n_steps = _parse_steps(args.steps)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if getattr(args, "bridge", False):
        cfg.bridge = True
    if args.out is not None:
        cfg.output = args.out
    return cfg


def version_string() -> str:
    """Package version plus ``git describe`` of the source tree when available."""
    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}+{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def emit(cfg: ExperimentConfig, name: str, text: str):
    if cfg.output is None:
        sys.stdout.write(text)
        return
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text, encoding="utf-8")


def cmd_density(cfg: ExperimentConfig) -> int:
    law = StableLaw(cfg.alpha)
    lo, hi, n = cfg.x_grid
    rows = []
    for x in np.linspace(lo, hi, n):
        p = float(law.density(x))
        if law.has_closed_form:
            ref = 1.0 / (math.pi * (1.0 + x * x)) if law.is_cauchy else math.exp(-x * x / 4.0) / math.sqrt(4.0 * math.pi)
            rows.append([float(x), p, ref, abs(p - ref)])
        else:
            rows.append([float(x), p, None, None])
    emit(cfg, "density.csv", render_csv(["x", "p1_alpha", "closed_form_if_any", "abs_err"], rows))
    return EXIT_OK


def cmd_heat(cfg: ExperimentConfig) -> int:
    law = StableLaw(cfg.alpha)
    interval = Interval(*cfg.interval)
    lim = h_limit_constant(cfg.alpha, interval)
    rows = []
    failed = False
    for t in sorted(cfg.t_grid.times(), reverse=True):
        try:
            h = heat_loss(law, interval, t)
            norm = lim.normalizer(t)
            rows.append([t, h, h / norm if norm > 0 else None, lim.constant, "ok"])
        except (QuadratureError, ZeroDivisionError) as exc:
            failed = True
            rows.append([t, None, None, lim.constant, f"failed: {exc}"])
    emit(cfg, "heat.csv", render_csv(["t", "H", "H_over_normalizer", "predicted_constant", "status"], rows))
    return EXIT_CONFIG if failed else EXIT_OK


def cmd_perimeter(cfg: ExperimentConfig) -> int:
    interval = Interval(*cfg.interval)
    closed = fractional_perimeter(cfg.alpha, interval)
    quad = fractional_perimeter_quadrature(cfg.alpha, interval)
    rows = [[cfg.alpha, interval.a, interval.b, closed, quad, abs(quad - closed) / closed]]
    emit(cfg, "perimeter.csv", render_csv(["alpha", "a", "b", "closed_form", "quadrature", "rel_err"], rows))
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig) -> int:
    law = StableLaw(cfg.alpha)
    interval = Interval(*cfg.interval)
    ensembles = simulate_ensemble(law, cfg.mc())
    rows = []
    for n in sorted(ensembles):
        ens = ensembles[n]
        for t in sorted(cfg.t_grid.times(), reverse=True):
            s = t ** (1.0 / law.alpha)
            q = q_measure(ens, law, interval, t)
            lm = l_measure(ens, law, interval, t)
            rm = r_measure(ens, law, interval, t)
            resid = float(np.max(np.abs(q - (interval.length - 2.0 * s * lm + s * rm))))
            row = [n, t]
            for v in (q, lm, rm):
                row += [float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(v.size))]
            rows.append(row + [resid])
    header = ["n_steps", "t", "Q", "Q_se", "L", "L_se", "r", "r_se", "identity_max_residual"]
    emit(cfg, "simulate.csv", render_csv(header, rows))
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, use_mc: bool) -> int:
    interval = Interval(*cfg.interval)
    mc = cfg.mc() if use_mc else None
    report = verify_theorem(cfg.alpha, interval, cfg.t_grid.times(), mc, cfg.tolerances)
    table_keys = ["t", "h_ratio", "h_constant", "q_ratio_spectral", "q_ratio_mc", "q_ratio_mc_se", "q_constant", "q_gap"]
    table = render_csv(table_keys, [[row.get(k) for k in table_keys] for row in report.rows])
    body = {
        "version": version_string(),
        "config": cfg.as_dict() | {"monte_carlo": use_mc},
        "checks": [dataclasses.asdict(c) for c in report.checks],
        "passed": report.passed,
        "notes": report.notes,
        "empirical_slopes": report.slopes,
        "rows": report.rows,
    }
    emit(cfg, "verify_table.csv", table)
    emit(cfg, "verify_report.json", json.dumps(body, indent=2, sort_keys=True) + "\n")
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: value={c.value!r} target={c.target!r} threshold={c.threshold!r} {c.detail}", file=sys.stderr)
    for note in report.notes:
        print(f"note: {note}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file; flags override it")
    common.add_argument("--alpha", type=float)
    common.add_argument("--interval", help="a,b")
    common.add_argument("--t-grid", dest="t_grid", help="start:ratio:count, geometric and decreasing")
    common.add_argument("--paths", type=int)
    common.add_argument("--steps", help="step count or comma-separated schedule")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--out", help="output directory (default: stdout)")

    p = argparse.ArgumentParser(prog="stableheat", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    d = sub.add_parser("density", parents=[common], help="density of X_1 on an x grid")
    d.add_argument("--x-grid", dest="x_grid", help="start:stop:count")
    sub.add_parser("heat", parents=[common], help="heat loss H(t) on a t grid")
    sub.add_parser("perimeter", parents=[common], help="fractional perimeter, closed form vs quadrature")
    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo Q, L, r on a t grid")
    s.add_argument("--bridge", action="store_true", help="exact bridge extremes (alpha = 2)")
    v = sub.add_parser("verify", parents=[common], help="small-time limit checks and report")
    v.add_argument("--bridge", action="store_true")
    mc = v.add_mutually_exclusive_group()
    mc.add_argument("--mc", dest="use_mc", action="store_true", default=None, help="force the Monte Carlo route")
    mc.add_argument("--no-mc", dest="use_mc", action="store_false", help="deterministic routes only")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        uses_mc = args.command == "simulate"
        use_mc = False
        if args.command == "verify":
            use_mc = args.use_mc if args.use_mc is not None else cfg.alpha != 2.0
            uses_mc = use_mc
        cfg.validate(uses_mc)
        if args.command == "density":
            return cmd_density(cfg)
        if args.command == "heat":
            return cmd_heat(cfg)
        if args.command == "perimeter":
            return cmd_perimeter(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        return cmd_verify(cfg, use_mc)
    except (ConfigError, QuadratureError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
