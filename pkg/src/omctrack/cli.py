"""Command-line interface.

Subcommands: ``design``, ``sweep``, ``track``, ``error-bound``, ``simulate``
and ``rerun``. Every run writes a JSON manifest (command, options, config
snapshot, seed, version, outputs); ``omctrack rerun MANIFEST`` replays it.

Exit codes: 0 success, 2 usage or config error, 3 infeasible design,
4 numeric or rank failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from importlib import metadata
from pathlib import Path
from typing import Callable

import numpy as np

from . import link_design as ld
from .config import Config, ConfigError, load_config
from .harness import (
    Curve,
    expected_trajectory_metrics,
    run_tracking_experiment,
    simulate_trajectory,
    sweep_link_curves,
)
from .tracking import Method, RankDeficientError, theoretical_error

log = logging.getLogger("omctrack")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERIC = 4


def toolkit_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def full(x: float) -> str:
    """Round-trip representation used in CSV output."""
    return format(float(x), ".17g")


def sci(x: float, digits: int = 2) -> str:
    """Compact scientific notation such as ``3.93e-2``."""
    if x == 0 or not math.isfinite(x):
        return f"{x:g}"
    exp = math.floor(math.log10(abs(x)))
    mant = round(x / 10 ** exp, digits)
    if abs(mant) >= 10:
        mant /= 10
        exp += 1
    return f"{mant:.{digits}f}e{exp}"


def _interval_text(iv: ld.Interval, var: str, unit: str, fmt: Callable[[float], str]) -> str:
    if iv.is_empty:
        return "no solution"
    return f"{fmt(iv.lo)} < {var} < {fmt(iv.hi)} {unit}"


class Run:
    """Per-invocation context: stdout sink, outputs written, manifest."""

    def __init__(self, command: str, config: Config, options: dict, stdout=None):
        self.command = command
        self.config = config
        self.options = options
        self.stdout = stdout or sys.stdout
        self.outputs: list[str] = []

    def echo(self, text: str = ""):
        print(text, file=self.stdout)

    def write_csv(self, path: str | None, header: list[str], rows) -> None:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(header)
        writer.writerows(rows)
        self._emit(path, buf.getvalue())

    def write_json(self, path: str | None, payload) -> None:
        self._emit(path, json.dumps(payload, indent=2) + "\n")

    def _emit(self, path: str | None, text: str) -> None:
        if path is None:
            self.stdout.write(text)
            return
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        self.outputs.append(str(path))

    def manifest(self, exit_code: int) -> dict:
        return {
            "command": self.command,
            "options": self.options,
            "config_source": self.config.source,
            "config": self.config.snapshot(),
            "seed": self.options.get("seed"),
            "version": toolkit_version(),
            "outputs": self.outputs,
            "exit_code": exit_code,
        }

    def write_manifest(self, exit_code: int) -> str:
        path = self.options.get("manifest")
        if path is None:
            out = self.options.get("out")
            path = f"{out}.manifest.json" if out else f"omctrack-{self.command}.manifest.json"
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.manifest(exit_code), indent=2) + "\n")
        return str(path)


# -- commands ---------------------------------------------------------------


def cmd_design(run: Run) -> int:
    cfg = run.config
    z = cfg.number("link.z", positive=True)
    aA = cfg.number("link.aA", positive=True)
    sigma_t, sigma_p = cfg.spreads()
    thr = cfg.thresholds()
    rule = ld.design_rule(aA, sigma_t, sigma_p, thr, z)
    w_opt = ld.optimal_beam_width(aA, thr.gamma_th)

    if run.options.get("format") == "json":
        def iv(i):
            return None if i.is_empty else [i.lo, i.hi]
        run.write_json(run.options.get("out"), {
            "feasible": rule.feasible,
            "constraint_average_power": iv(rule.average_power),
            "constraint_outage": iv(rule.outage),
            "width": iv(rule.width),
            "divergence": iv(rule.divergence),
            "optimal_width": w_opt,
            "min_expected_outage": rule.min_expected_outage,
        })
    else:
        meters = lambda v: "0" if v == 0 else f"{v:.2f}"  # noqa: E731
        run.echo(f"Spot-size design: z = {z:g} m, aA = {aA:g} W m^2, "
                 f"sigma_t^2 + sigma_p^2 = {sigma_t ** 2 + sigma_p ** 2:g} m^2")
        run.echo(f"  Constraint 1 (average power > {thr.eta:g} W):   "
                 + _interval_text(rule.average_power, "w_z", "m", meters))
        run.echo(f"  Constraint 2 (expected outage < {thr.xi:g}): "
                 + _interval_text(rule.outage, "w_z", "m", meters))
        run.echo("  Spot-size rule:                     "
                 + _interval_text(rule.width, "w_z", "m", meters))
        run.echo("  Divergence angle:                   "
                 + _interval_text(rule.divergence, "phi", "rad", sci))
        run.echo(f"  Outage-optimal width:               w_z = {w_opt:.2f} m "
                 f"(expected outage {rule.min_expected_outage:.4g})")
        if not rule.feasible:
            run.echo("INFEASIBLE: no beam width meets both constraints.")
            if rule.outage.is_empty:
                run.echo(f"  Minimum attainable expected outage is {rule.min_expected_outage:.6g} "
                         f"(at w_z = {w_opt:.4g} m); xi = {thr.xi:g} is below it.")
    return EXIT_OK if rule.feasible else EXIT_INFEASIBLE


def cmd_sweep(run: Run) -> int:
    cfg = run.config
    curve = run.options.get("curve") or cfg.raw("sweep.curve")
    try:
        curve = Curve(curve)
    except ValueError:
        raise ConfigError(f"unknown curve {curve!r}; choose avg_power or expected_outage") from None
    exp = cfg.experiment()
    grid = cfg.width_grid()
    points = sweep_link_curves(exp, curve, grid, oracle=not run.options.get("no_oracle"))
    out = run.options.get("out")
    if run.options.get("format") == "json":
        run.write_json(out, [p._asdict() for p in points])
    else:
        run.write_csv(out, ["w_z", "value", "series", "method"],
                      ([full(p.abscissa), full(p.ordinate), p.series, p.method] for p in points))
    if out:
        run.echo(f"wrote {len(points)} rows to {out}")
    return EXIT_OK


def cmd_track(run: Run) -> int:
    cfg = run.config
    opts = run.options
    exp = cfg.experiment(seed=opts.get("seed"), trials=opts.get("trials"),
                         require=("beacons", "noise"))
    target = opts.get("target")
    if target is None:
        if not cfg.has("target"):
            raise ConfigError("no target given: pass --target X Y or set 'target' in the config")
        target = cfg.point("target")
    target = tuple(float(v) for v in target)
    method = Method(opts["algorithm"])
    try:
        stats = run_tracking_experiment(exp, target, method, keep_trials=True)
    except RankDeficientError as exc:
        raise RankDeficientError(f"{cfg.source}: {exc}") from exc

    summary = {
        "algorithm": method.value,
        "target": list(target),
        "trials": stats.trials,
        "seed": exp.master_seed,
        "mean_radial_error": stats.mean_radial_error,
        "rms_error": stats.rms_error,
        "error_angle": stats.error_angle,
    }
    run.options["seed"] = exp.master_seed
    if opts.get("format") == "json":
        run.write_json(None, summary)
    else:
        run.echo(f"{method.value} tracking of ({target[0]:g}, {target[1]:g}) over {stats.trials} trials "
                 f"(seed {exp.master_seed})")
        run.echo(f"  mean radial error: {stats.mean_radial_error:.6g} m")
        run.echo(f"  rms error:         {stats.rms_error:.6g} m")
        run.echo(f"  error angle:       {stats.error_angle:.6g} rad")
    out = opts.get("out")
    if out:
        rows = ([t, full(e[0]), full(e[1]), full(err)]
                for t, (e, err) in enumerate(zip(stats.estimates, stats.errors)))
        run.write_csv(out, ["trial", "est_x", "est_y", "error"], rows)
    return EXIT_OK


def cmd_error_bound(run: Run) -> int:
    cfg = run.config
    exp = cfg.experiment(require=("beacons", "noise"))
    points = run.options.get("points") or cfg.points("error_bound.points")
    rows, failed = [], 0
    for x, y in points:
        try:
            err = theoretical_error((x, y), exp.array, exp.noise)
            rows.append({"x": x, "y": y, "error": err})
        except RankDeficientError as exc:
            failed += 1
            rows.append({"x": x, "y": y, "error": None, "message": str(exc)})
    if run.options.get("format") == "json":
        run.write_json(run.options.get("out"), rows)
    elif run.options.get("format") == "csv":
        run.write_csv(run.options.get("out"), ["x", "y", "error"],
                      ([full(r["x"]), full(r["y"]), "" if r["error"] is None else full(r["error"])]
                       for r in rows))
    else:
        run.echo(f"Theoretical tracking error (sigma_n = {exp.noise.sigma_n:g} W)")
        run.echo(f"  {'target (m)':>16}  error (m)")
        for r in rows:
            where = f"({r['x']:g}, {r['y']:g})"
            value = f"{r['error']:.4f}" if r["error"] is not None else f"rank error: {r['message']}"
            run.echo(f"  {where:>16}  {value}")
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_simulate(run: Run) -> int:
    cfg = run.config
    opts = run.options
    exp = cfg.experiment(seed=opts.get("seed"), require=("link", "thresholds"))
    steps = opts.get("steps") or cfg.integer("simulation.steps", default=100_000, minimum=1)
    traj = simulate_trajectory(exp, steps)
    want_outage, want_power = expected_trajectory_metrics(exp)
    run.options["seed"] = exp.master_seed
    summary = {
        "steps": steps,
        "seed": exp.master_seed,
        "beam_width": exp.main_beam.beam_width,
        "outage_rate": traj.outage_rate,
        "expected_outage": want_outage,
        "mean_power": traj.mean_power,
        "average_power": want_power,
    }
    if opts.get("format") == "json":
        run.write_json(None, summary)
    else:
        run.echo(f"Trajectory: {steps} intervals, w_z = {summary['beam_width']:.4g} m, "
                 f"seed {exp.master_seed}")
        run.echo(f"  outage rate: {traj.outage_rate:.5g} (closed form {want_outage:.5g})")
        run.echo(f"  mean power:  {traj.mean_power:.5g} W (closed form {want_power:.5g} W)")
    out = opts.get("out")
    if out:
        rows = ([k + 1, full(traj.target[k, 0]), full(traj.target[k, 1]), full(traj.center[k, 0]),
                 full(traj.center[k, 1]), full(traj.power[k]), int(traj.outage[k])]
                for k in range(len(traj)))
        run.write_csv(out, ["interval", "target_x", "target_y", "center_x", "center_y", "power",
                            "outage"], rows)
    return EXIT_OK


COMMANDS = {
    "design": cmd_design,
    "sweep": cmd_sweep,
    "track": cmd_track,
    "error-bound": cmd_error_bound,
    "simulate": cmd_simulate,
}


# -- argument parsing ------------------------------------------------------


def _point(text: str) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y but got {text!r}") from None
    if not (math.isfinite(x) and math.isfinite(y)):
        raise argparse.ArgumentTypeError(f"point must be finite: {text!r}")
    return x, y


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="omctrack", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=False, trials=False):
        p.add_argument("--config", required=True,
                       help="config file, or a bundled name such as table1")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=["csv", "json"], default=None)
        p.add_argument("--manifest", help="where to write the run manifest")
        if seed:
            p.add_argument("--seed", type=_seed)
        if trials:
            p.add_argument("--trials", type=_positive_int)

    common(sub.add_parser("design", help="spot-size design rule"))
    p = sub.add_parser("sweep", help="link curves versus beam width")
    common(p)
    p.add_argument("--curve", choices=[c.value for c in Curve])
    p.add_argument("--no-oracle", action="store_true", help="skip the numeric-integration series")
    p = sub.add_parser("track", help="Monte-Carlo tracking accuracy")
    common(p, seed=True, trials=True)
    p.add_argument("--algorithm", required=True, choices=[m.value for m in Method])
    p.add_argument("--target", nargs=2, type=float, metavar=("X", "Y"))
    p = sub.add_parser("error-bound", help="theoretical tracking error")
    common(p)
    p.add_argument("--points", nargs="+", type=_point, metavar="X,Y")
    p = sub.add_parser("simulate", help="simulate a tracked random-walk trajectory")
    common(p, seed=True)
    p.add_argument("--steps", type=_positive_int)
    p = sub.add_parser("rerun", help="replay a run manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="override the recorded output path")
    p.add_argument("--manifest-out", help="where to write the replay's manifest")
    return parser


_OPTION_KEYS = ("out", "format", "manifest", "seed", "trials", "curve", "no_oracle", "algorithm",
                "target", "points", "steps")


def execute(command: str, config: Config, options: dict, stdout=None) -> int:
    """Run one command against a parsed config; returns the exit code."""
    run = Run(command, config, dict(options), stdout=stdout)
    code = COMMANDS[command](run)
    run.write_manifest(code)
    return code


def _replay(args) -> tuple[str, Config, dict]:
    data = json.loads(Path(args.manifest).read_text())
    options = dict(data["options"])
    options["out"] = args.out if args.out else options.get("out")
    options["manifest"] = args.manifest_out
    if options.get("target") is not None:
        options["target"] = tuple(options["target"])
    if options.get("points") is not None:
        options["points"] = [tuple(p) for p in options["points"]]
    return data["command"], Config(data["config"], f"{args.manifest}#config"), options


def main(argv: list[str] | None = None, stdout=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    err = sys.stderr
    try:
        if args.command == "rerun":
            command, config, options = _replay(args)
        else:
            command = args.command
            config = load_config(args.config)
            options = {k: getattr(args, k) for k in _OPTION_KEYS if hasattr(args, k)}
        return execute(command, config, options, stdout=stdout)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_USAGE
    except RankDeficientError as exc:
        print(f"rank failure: {exc}", file=err)
        return EXIT_NUMERIC
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=err)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=err)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
