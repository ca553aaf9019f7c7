"""Command-line interface: ``nwcorr {correlate,sweep,chsh,validate} --config run.yaml``.

Exit codes: 0 success, 1 validation error, 2 completed with accuracy
warnings (or failed points), 3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ConfigError, build_point, expand_sweep, parse_config, validate
from .estimator import LocalizedCorrelation
from .exceptions import AccuracyError, AccuracyWarning, DegenerateStateError, DomainError

EXIT_OK, EXIT_INVALID, EXIT_WARNINGS, EXIT_INTERNAL = 0, 1, 2, 3

CORRELATION_COLUMNS = ["index", "regime", "sweep_1", "sweep_2", "a_x", "a_y", "a_z", "b_x", "b_y", "b_z",
                       "value", "abs_error", "status", "message", "point"]
CHSH_COLUMNS = ["index", "regime", "sweep_1", "sweep_2", "S", "abs_error", "C_ab", "C_abp", "C_apb", "C_apbp",
                "status", "message", "point"]

_ESTIMATORS = {}


def _fitted(point):
    key = json.dumps([point.regime, point.mass, {k: repr(v) for k, v in point.state.items()},
                      {k: repr(v) for k, v in point.detectors.items()}, repr(point.spec)], sort_keys=True)
    est = _ESTIMATORS.get(key)
    if est is None:
        s = point.state
        est = LocalizedCorrelation(
            regime=point.regime, mass=point.mass,
            momentum_a=s.get("momentum_a", (0, 0, 0)), momentum_b=s.get("momentum_b", (0, 0, 0)),
            profile_a=s.get("profile_a"), profile_b=s.get("profile_b"),
            direction_a=s.get("direction_a", (0, 0, 1)), direction_b=s.get("direction_b", (0, 0, -1)),
            detector_a=point.detectors["a"], detector_b=point.detectors["b"], quadrature=point.spec,
        ).fit()
        if len(_ESTIMATORS) > 256:
            _ESTIMATORS.clear()
        _ESTIMATORS[key] = est
    return est


def evaluate_point(command, sweep_values, data):
    """Evaluate one configuration point and return its output row (without ``index``)."""
    started = time.perf_counter()
    row = {"regime": data.get("regime"),
           "sweep_1": sweep_values[0] if len(sweep_values) > 0 else "",
           "sweep_2": sweep_values[1] if len(sweep_values) > 1 else "",
           "point": json.dumps(data, sort_keys=True, separators=(",", ":"))}
    status, message = "ok", ""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AccuracyWarning)
            point = build_point(data, command)
            if point is None:
                raise DomainError("invalid point")
            est = _fitted(point)
        if est.warnings_:
            status, message = "warning", " | ".join(est.warnings_)
        if command == "chsh":
            a, ap, b, bp = point.chsh
            rows = np.array([np.r_[a, b], np.r_[a, bp], np.r_[ap, b], np.r_[ap, bp]])
            values, errs = est.predict(rows, return_error=True)
            row.update(S=float(values @ [1.0, -1.0, 1.0, 1.0]), abs_error=float(errs.sum()),
                       C_ab=float(values[0]), C_abp=float(values[1]), C_apb=float(values[2]), C_apbp=float(values[3]))
        else:
            a, b = point.measurement
            value, err = est.predict(np.r_[a, b][None, :], return_error=True)
            row.update(a_x=a[0], a_y=a[1], a_z=a[2], b_x=b[0], b_y=b[1], b_z=b[2],
                       value=float(value[0]), abs_error=float(err[0]))
    except (AccuracyError, DegenerateStateError, DomainError) as exc:
        status, message = "error", f"{type(exc).__name__}: {exc}"
    row["status"] = status
    row["message"] = message
    row["wall_time"] = time.perf_counter() - started
    return row


def _evaluate_all(command, points, jobs):
    args = [(command, values, data) for values, data in points]
    if jobs <= 1 or len(args) <= 1:
        return [evaluate_point(*a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map() yields in submission order, so rows stay in input order.
        return list(pool.map(evaluate_point, *zip(*args), chunksize=max(1, len(args) // (4 * jobs))))


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def render(rows, columns, fmt):
    """Serialize rows as CSV or JSON with a fixed column order."""
    if fmt == "json":
        payload = [{c: (float(r[c]) if isinstance(r.get(c), (float, np.floating)) else r.get(c, "")) for c in columns}
                   for r in rows]
        return json.dumps(payload, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def build_parser():
    parser = argparse.ArgumentParser(prog="nwcorr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [("correlate", "evaluate a single point"),
                            ("sweep", "evaluate a 1D or 2D parameter scan"),
                            ("chsh", "evaluate the CHSH combination (optionally over a sweep)"),
                            ("validate", "check a configuration without running it")]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML run configuration")
        if name == "validate":
            p.add_argument("--for", dest="target", choices=["correlate", "sweep", "chsh"], default=None,
                           help="subcommand the config is meant for (default: inferred)")
            continue
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweep points")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed (Monte Carlo)")
        p.add_argument("--output", default=None, help="output path (default: config output.path or stdout)")
        p.add_argument("--format", choices=["csv", "json"], default=None)
        p.add_argument("--timing", action="store_true", help="append a wall_time column (breaks byte-determinism)")
    return parser


def _infer_target(data):
    if "chsh" in data:
        return "chsh"
    return "sweep" if "sweep" in data else "correlate"


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_INVALID
        try:
            data, lines = parse_config(text)
        except ConfigError as exc:
            print(f"{args.config}: {exc}", file=sys.stderr)
            return EXIT_INVALID

        if args.command == "validate":
            problems = validate(data, lines, args.target or _infer_target(data))
            for msg in problems:
                print(f"{args.config}: {msg}")
            return EXIT_INVALID if problems else EXIT_OK

        if args.seed is not None:
            data["seed"] = args.seed
            data.setdefault("quadrature", {})
            if isinstance(data["quadrature"], dict):
                data["quadrature"]["mc_seed"] = args.seed
        if args.command == "chsh" and "measurement" in data:
            data.pop("measurement")
        problems = validate(data, lines, args.command)
        if problems:
            for msg in problems:
                print(f"{args.config}: {msg}", file=sys.stderr)
            return EXIT_INVALID
        output = data.get("output") or {}
        fmt = args.format or output.get("format", "csv")
        path = args.output or output.get("path")

        points, _ = expand_sweep(data, lines)
        rows = _evaluate_all(args.command, points, max(1, args.jobs))
        columns = list(CHSH_COLUMNS if args.command == "chsh" else CORRELATION_COLUMNS)
        if args.timing:
            columns.append("wall_time")
        for i, row in enumerate(rows):
            row["index"] = i
        text_out = render(rows, columns, fmt)
        if path:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text_out)
        else:
            sys.stdout.write(text_out)
        flagged = [r for r in rows if r["status"] != "ok"]
        if flagged:
            print(f"completed with {len(flagged)} flagged point(s)", file=sys.stderr)
            return EXIT_WARNINGS
        return EXIT_OK
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
