"""Command line front end: run, table, compare, plotdata.

``run`` simulates a ``.cbd`` model and writes the trace (and optionally the
impulse log) as CSV or JSON; the resolved configuration is echoed to
standard output as a single JSON manifest.  ``table`` prints the
backward-difference cascade of a unit step together with both magnitude
estimates.  ``compare`` aligns two trace files and reports deviations.
``plotdata`` turns a trace into polyline segments split at discontinuities
plus an arrow list for the impulses.

Exit codes: 0 success, 1 model errors, 2 runtime/simulation errors,
3 time-grid mismatch in ``compare``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import analysis, dsl
from .engine import (
    EngineError,
    ImpulseEvent,
    SimConfig,
    Trace,
    simulate,
)
from .graph import ModelError
from .signals import StepSample

TRACE_HEADER = "time,signal,left,right"
IMPULSE_HEADER = "time,signal,order,coefficient"


def _fmt(x: float) -> str:
    """17 significant digits, enough for exact text round trips."""
    return format(float(x), ".17g")


# --- trace serialization --------------------------------------------------


def write_trace(trace: Trace, path: Path, fmt: str) -> None:
    rows = [
        (t, name, sample.left, sample.right)
        for i, t in enumerate(trace.times)
        for name, samples in trace.signals.items()
        for sample in (samples[i],)
    ]
    if fmt == "csv":
        lines = [TRACE_HEADER]
        lines += [f"{_fmt(t)},{name},{_fmt(l)},{_fmt(r)}" for t, name, l, r in rows]
        path.write_text("\n".join(lines) + "\n")
    else:
        payload = {"trace": [
            {"time": t, "signal": name, "left": l, "right": r}
            for t, name, l, r in rows
        ]}
        path.write_text(json.dumps(payload, indent=1) + "\n")


def write_impulses(trace: Trace, path: Path, fmt: str) -> None:
    if fmt == "csv":
        lines = [IMPULSE_HEADER]
        lines += [
            f"{_fmt(e.time)},{e.signal},{e.order},{_fmt(e.coefficient)}"
            for e in trace.impulses
        ]
        path.write_text("\n".join(lines) + "\n")
    else:
        payload = {"impulses": [
            {"time": e.time, "signal": e.signal, "order": e.order,
             "coefficient": e.coefficient}
            for e in trace.impulses
        ]}
        path.write_text(json.dumps(payload, indent=1) + "\n")


def read_trace(path: Path, impulse_path: Path | None = None) -> Trace:
    """Load a trace file (CSV or JSON by extension) back into a Trace."""
    rows: list[tuple[float, str, float, float]] = []
    if path.suffix == ".json":
        payload = json.loads(path.read_text())
        for row in payload["trace"]:
            rows.append((float(row["time"]), row["signal"],
                         float(row["left"]), float(row["right"])))
    else:
        lines = path.read_text().splitlines()
        if not lines or lines[0] != TRACE_HEADER:
            raise ValueError(f"{path}: not a trace file")
        for line in lines[1:]:
            time_s, name, left_s, right_s = line.split(",")
            rows.append((float(time_s), name, float(left_s), float(right_s)))
    trace = Trace(mode="file")
    for t, name, left, right in rows:
        if not trace.times or trace.times[-1] != t:
            trace.times.append(t)
        trace.signals.setdefault(name, []).append(
            StepSample(left, right)
        )
    lengths = {len(samples) for samples in trace.signals.values()}
    if lengths and lengths != {len(trace.times)}:
        raise ValueError(f"{path}: ragged trace")
    if impulse_path is not None:
        trace.impulses.extend(read_impulses(impulse_path))
    return trace


def read_impulses(path: Path) -> list[ImpulseEvent]:
    events = []
    if path.suffix == ".json":
        payload = json.loads(path.read_text())
        for row in payload["impulses"]:
            events.append(ImpulseEvent(float(row["time"]), row["signal"],
                                       int(row["order"]), float(row["coefficient"])))
    else:
        lines = path.read_text().splitlines()
        if not lines or lines[0] != IMPULSE_HEADER:
            raise ValueError(f"{path}: not an impulse log")
        for line in lines[1:]:
            time_s, name, order_s, coeff_s = line.split(",")
            events.append(ImpulseEvent(float(time_s), name,
                                       int(order_s), float(coeff_s)))
    return events


# --- subcommands ------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    source_path = Path(args.model)
    try:
        text = source_path.read_text()
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    result = dsl.parse(text)
    if not result.ok:
        for diagnostic in result.diagnostics:
            print(f"{source_path}:{diagnostic}", file=sys.stderr)
        return 1
    model, diagnostics = dsl.validate(result.model)
    if model is None:
        for diagnostic in diagnostics:
            print(f"{source_path}:{diagnostic}", file=sys.stderr)
        return 1

    watch = tuple(s for s in (args.watch or "").split(",") if s)
    try:
        config = SimConfig(
            mode=args.mode, h=args.step, t_end=args.end,
            zc_tol=args.zc_tol, h_min=args.min_step, watch=watch,
        )
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1

    try:
        trace = simulate(model, args.top, config)
    except ModelError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except EngineError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    out_path = Path(args.out)
    write_trace(trace, out_path, args.format)
    impulse_path = Path(args.impulses) if args.impulses else None
    if impulse_path is not None:
        write_impulses(trace, impulse_path, args.format)

    manifest = {
        "top": args.top,
        "mode": config.mode,
        "h": config.h,
        "t_end": config.t_end,
        "zc_tol": config.zc_tol,
        "h_min": config.h_min,
        "watched": list(trace.signals),
        "source_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "steps": len(trace.times),
        "impulse_events": len(trace.impulses),
        "warnings": trace.warnings,
        "outputs": {
            "trace": str(out_path),
            "impulses": str(impulse_path) if impulse_path else None,
        },
    }
    print(json.dumps(manifest))
    return 0


def cmd_table(args: argparse.Namespace) -> int:
    try:
        table = analysis.finite_difference_table(args.order, args.step)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    header = ["offset"] + [f"order{k}" for k in range(args.order + 1)]
    print(",".join(header))
    for m in table.offsets:
        row = [str(m)] + [_fmt(table.value(m, k)) for k in range(args.order + 1)]
        print(",".join(row))
    if args.order >= 1:
        estimate = analysis.max_magnitude(args.order, args.step, args.amplitude)
        alternative = analysis.halforder_magnitude_estimate(
            args.order, args.step, args.amplitude
        )
        print(f"max_magnitude,{_fmt(estimate.value)}")
        print(f"halforder_estimate,{_fmt(alternative)}")
        if estimate.overflow_risk:
            print("warning: overflow-risk", file=sys.stderr)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    try:
        trace_a = read_trace(Path(args.a), Path(args.impulses_a)
                             if args.impulses_a else None)
        trace_b = read_trace(Path(args.b), Path(args.impulses_b)
                             if args.impulses_b else None)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    try:
        report = analysis.compare_traces(trace_a, trace_b, args.rel_tol)
    except analysis.TimeGridMismatch as err:
        print(json.dumps({"ok": False, "error": str(err)}))
        return 3
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(json.dumps(report.to_dict()))
    return 0 if report.ok else 1


def cmd_plotdata(args: argparse.Namespace) -> int:
    try:
        trace = read_trace(Path(args.trace),
                           Path(args.impulses) if args.impulses else None)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    payload: dict[str, dict] = {}
    for name, samples in trace.signals.items():
        segments: list[list[list[float]]] = []
        current: list[list[float]] = []
        for t, sample in zip(trace.times, samples):
            if sample.left != sample.right:
                current.append([t, sample.left])
                segments.append(current)
                current = [[t, sample.right]]
            else:
                current.append([t, sample.left])
        if current:
            segments.append(current)
        arrows = [
            {"time": e.time, "order": e.order, "coefficient": e.coefficient}
            for e in trace.impulses if e.signal == name
        ]
        payload[name] = {"segments": segments, "arrows": arrows}
    Path(args.out).write_text(json.dumps({"signals": payload}, indent=1) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbdsim",
        description="Block diagram simulator with first-class discontinuities "
                    "and impulses",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a .cbd model")
    run.add_argument("model")
    run.add_argument("--top", required=True)
    run.add_argument("--mode", choices=["symbolic", "numerical"],
                     default="symbolic")
    run.add_argument("--step", type=float, required=True)
    run.add_argument("--end", type=float, required=True)
    run.add_argument("--zc-tol", type=float, default=1e-9)
    run.add_argument("--min-step", type=float, default=1e-12)
    run.add_argument("--watch", default="")
    run.add_argument("--format", choices=["csv", "json"], default="csv")
    run.add_argument("--out", required=True)
    run.add_argument("--impulses")
    run.set_defaults(handler=cmd_run)

    table = sub.add_parser("table", help="print the difference cascade of a unit step")
    table.add_argument("--order", type=int, required=True)
    table.add_argument("--step", type=float, required=True)
    table.add_argument("--amplitude", type=float, default=1.0)
    table.set_defaults(handler=cmd_table)

    compare = sub.add_parser("compare", help="compare two trace files")
    compare.add_argument("a")
    compare.add_argument("b")
    compare.add_argument("--rel-tol", type=float, default=1e-12)
    compare.add_argument("--impulses-a")
    compare.add_argument("--impulses-b")
    compare.set_defaults(handler=cmd_compare)

    plotdata = sub.add_parser("plotdata", help="emit plot segments and arrows")
    plotdata.add_argument("--trace", required=True)
    plotdata.add_argument("--impulses")
    plotdata.add_argument("--out", required=True)
    plotdata.set_defaults(handler=cmd_plotdata)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
