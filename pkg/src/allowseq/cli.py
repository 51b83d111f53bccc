"""Command-line surface, file formats and run orchestration.

Trace file format (authoritative):

    ALLOWSEQ v1
    t=<int> lo=<int> hi=<int>
    <initial values, space separated>
    # <depth> begin <label>        (annotation lines, optional)
    F <c> <d>                      (single flip)
    S <c1> <d1> <c2> <d2> ...      (disjoint multi-flip step)
    # <depth> end <label>

Steps appear in application order; parsing then serializing reproduces a
file byte for byte.  Exit codes: 0 success, 1 property violated or
structured failure, 2 malformed input, 3 refusal by a resource guard.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from fractions import Fraction

from .construction import (ConstructionFailure, full_construction,
                           recursive_step, reflect, reflect_instance,
                           reflect_mirrored, shift, shift_instance,
                           step_instance)
from .engine import (INF, FileSink, FlipStep, Trace, TraceRecorder,
                     verify_stream, verify_trace)
from .errors import ConstructionBug, ContractError, RefusalError
from .geom import (PointSet, circular_sequence, deviation_imbalance_link,
                   format_points, line_imbalances, parse_points,
                   render_points_svg, render_trace_svg)
from .oracle import SEARCH_GUARD, search_best_deviation
from .planner import plan_sizes
from .seqcore import CentredSequence, Flip, Window

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_MALFORMED = 2
EXIT_REFUSED = 3

MAGIC = "ALLOWSEQ v1"


class TraceParseError(Exception):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def serialize_trace(tr) -> str:
    """Text form of a trace, annotations interleaved at their positions."""
    if isinstance(tr, TraceRecorder):
        tr = tr.to_trace()
    lines = [MAGIC,
             f"t={tr.window.t} lo={tr.initial.lo} hi={tr.initial.hi}",
             " ".join(str(v) for v in tr.initial.values)]
    opens = {}
    closes = {}
    for start, end, depth, label in tr.annotations:
        opens.setdefault(start, []).append((depth, label))
        closes.setdefault(end, []).append((depth, label))
    for idx in sorted(opens):
        opens[idx].sort()
    for idx in sorted(closes):
        closes[idx].sort(reverse=True)
    for i, step in enumerate(tr.steps + (None,)):
        for depth, label in closes.get(i, ()):
            lines.append(f"# {depth} end {label}")
        for depth, label in opens.get(i, ()):
            lines.append(f"# {depth} begin {label}")
        if step is None:
            break
        if len(step.flips) == 1:
            f = step.flips[0]
            lines.append(f"F {f.c} {f.d}")
        else:
            lines.append("S " + " ".join(f"{f.c} {f.d}" for f in step.flips))
    return "\n".join(lines) + "\n"


def _parse_step_line(lineno, line):
    parts = line.split()
    kind = parts[0]
    nums = parts[1:]
    if len(nums) < 2 or len(nums) % 2:
        raise TraceParseError(lineno, "flip line needs c/d pairs")
    try:
        vals = [int(x) for x in nums]
    except ValueError:
        raise TraceParseError(lineno, "flip bounds must be integers")
    if kind == "F" and len(vals) != 2:
        raise TraceParseError(lineno, "'F' lines carry exactly one flip")
    try:
        return FlipStep([Flip(vals[i], vals[i + 1])
                         for i in range(0, len(vals), 2)])
    except ContractError as exc:
        raise TraceParseError(lineno, str(exc))


def iter_trace_file(fh):
    """Stream (header, steps) from a trace file: yields the (window,
    initial) pair first, then FlipStep objects one at a time."""
    lineno = 0

    def readline():
        nonlocal lineno
        line = fh.readline()
        lineno += 1
        return line

    magic = readline().rstrip("\n")
    if magic != MAGIC:
        raise TraceParseError(lineno, f"bad magic {magic!r}")
    params = readline().rstrip("\n").split()
    try:
        kv = dict(p.split("=", 1) for p in params)
        t, lo, hi = int(kv["t"]), int(kv["lo"]), int(kv["hi"])
    except (ValueError, KeyError):
        raise TraceParseError(lineno, "expected 't=<int> lo=<int> hi=<int>'")
    vals_line = readline().rstrip("\n")
    try:
        vals = [int(x) for x in vals_line.split()]
    except ValueError:
        raise TraceParseError(lineno, "initial values must be integers")
    if len(vals) != hi - lo + 1:
        raise TraceParseError(lineno, f"expected {hi - lo + 1} values, "
                                      f"got {len(vals)}")
    try:
        initial = CentredSequence(lo, vals)
        window = Window(t)
    except ContractError as exc:
        raise TraceParseError(lineno, str(exc))

    def steps():
        nonlocal lineno
        while True:
            line = fh.readline()
            lineno += 1
            if not line:
                return
            line = line.rstrip("\n")
            if not line:
                raise TraceParseError(lineno, "blank line inside trace")
            if line.startswith("#"):
                parts = line.split(maxsplit=3)
                if len(parts) < 4 or parts[2] not in ("begin", "end"):
                    raise TraceParseError(lineno,
                                          "annotation must be '# <depth> "
                                          "begin/end <label>'")
                continue
            if line[0] not in "FS":
                raise TraceParseError(lineno, f"unknown line kind {line[:1]!r}")
            yield _parse_step_line(lineno, line)

    return (window, initial), steps()


def parse_trace(text: str) -> Trace:
    """Full in-memory parse, including annotations, for round-tripping."""
    import io

    fh = io.StringIO(text)
    lineno = 0
    lines = text.split("\n")
    (window, initial), _ = iter_trace_file(io.StringIO(text))
    steps = []
    annotations = []
    stack = []
    for i, raw in enumerate(lines[3:], start=4):
        if raw == "":
            continue
        if raw.startswith("#"):
            parts = raw.split(maxsplit=3)
            if len(parts) < 4:
                raise TraceParseError(i, "bad annotation line")
            depth, kind, label = int(parts[1]), parts[2], parts[3]
            if kind == "begin":
                stack.append((len(steps), depth, label))
            elif kind == "end":
                if not stack or stack[-1][1] != depth or stack[-1][2] != label:
                    raise TraceParseError(i, "unbalanced annotation nesting")
                start, dep, lab = stack.pop()
                annotations.append((start, len(steps), dep, lab))
            else:
                raise TraceParseError(i, "annotation must begin or end")
            continue
        steps.append(_parse_step_line(i, raw))
    if stack:
        raise TraceParseError(len(lines), "unclosed annotation")
    annotations.sort(key=lambda a: (a[1], -a[0], -a[2]))
    return Trace(window, initial, tuple(steps), tuple(annotations))


def write_trace(tr, path):
    with open(path, "w") as fh:
        fh.write(serialize_trace(tr))


def _fmt_dev(dev):
    if dev is None or dev == INF:
        return "inf"
    dev = Fraction(dev)
    return f"{dev.numerator}/{dev.denominator}"


def _report_lines(rep, machine):
    if machine:
        return [f"allowable={int(rep.allowable)}",
                f"all_valid={int(rep.all_valid)}",
                f"reaches_reversal={int(rep.reaches_reversal)}",
                f"min_deviation={_fmt_dev(rep.min_deviation)}",
                f"steps={rep.step_count}",
                f"flips={rep.flip_count}"]
    lines = [f"allowable:        {'yes' if rep.allowable else 'NO'}",
             f"all flips valid:  {'yes' if rep.all_valid else 'NO'}",
             f"reaches reversal: {'yes' if rep.reaches_reversal else 'NO'}",
             f"min deviation:    {_fmt_dev(rep.min_deviation)}",
             f"steps / flips:    {rep.step_count} / {rep.flip_count}"]
    if rep.first_violation:
        idx, flip, reason = rep.first_violation
        lines.append(f"first violation:  step {idx} flip {flip}: {reason}")
    return lines


# ---------------------------------------------------------------------------
# Subcommands.


def cmd_verify(args) -> int:
    try:
        with open(args.trace) as fh:
            (window, initial), steps = iter_trace_file(fh)
            rep = verify_stream(initial, window, steps)
    except FileNotFoundError:
        print(f"no such file: {args.trace}", file=sys.stderr)
        return EXIT_MALFORMED
    except TraceParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    for line in _report_lines(rep, args.machine):
        print(line)
    ok = rep.allowable and rep.all_valid
    if args.strict:
        ok = ok and (rep.min_deviation == INF or rep.min_deviation > window.t)
    return EXIT_OK if ok else EXIT_VIOLATION


def _max_cells(args):
    env = os.environ.get("ALLOWSEQ_MAX_CELLS")
    if args.max_cells is not None:
        return args.max_cells
    if env:
        return int(env)
    return 10**8


def cmd_construct(args) -> int:
    t = args.t
    started = time.perf_counter()
    if args.stage in ("step", "full") and args.plan:
        table = plan_sizes(t, args.d, args.k, args.n)
        sys.stdout.write(table.to_text())
        return EXIT_OK

    out_fh = open(args.out, "w") if args.out else None
    sink = FileSink(out_fh) if out_fh else None
    try:
        if args.stage == "full":
            try:
                result = full_construction(t, args.d, args.k,
                                           max_cells=_max_cells(args),
                                           sink=sink)
            except RefusalError as exc:
                print(f"refused: {exc}", file=sys.stderr)
                return EXIT_REFUSED
            if isinstance(result, ConstructionFailure):
                if args.machine:
                    print(f"failure_stage={result.stage.replace(' ', '-')}")
                    print(f"achieved={result.achieved}")
                    print(f"required={result.required}")
                else:
                    print(f"structured failure at {result.stage}: "
                          f"{result.message}")
                return EXIT_VIOLATION
            rec = result
        elif args.stage == "step":
            table = plan_sizes(t, args.d, args.k, args.n)
            if table.cells is None or table.cells > _max_cells(args):
                size = table.cells if table.cells is not None else "astronomical"
                print(f"refused: projected size {size} cells exceeds the "
                      f"limit", file=sys.stderr)
                return EXIT_REFUSED
            rec = step_instance(t, args.d, args.k, args.n, sink=sink)
            recursive_step(rec, args.d, args.k, args.n,
                           strict_certificates=not args.lenient)
        elif args.stage == "shift":
            n = args.n if args.n_given else 3 ** (2 * t)
            rec, a, b, c = shift_instance(t, n, sink=sink)
            shift(rec, a, b, c)
        elif args.stage == "reflect":
            n = args.n if args.n_given else 3 ** (2 * t) + 4 * t + 2
            rec, x, a, b, c = reflect_instance(t, n, args.c_size, sink=sink)
            reflect(rec, x, a, b, c)
        elif args.stage == "reflect-mirrored":
            n = args.n if args.n_given else 3 ** (2 * t) + 4 * t + 2
            rec, x, a, b, c = reflect_instance(t, n, args.c_size, sink=sink,
                                               mirrored=True)
            reflect_mirrored(rec, x, a, b, c)
        else:
            raise ContractError(f"unknown stage {args.stage}")
    finally:
        if out_fh:
            out_fh.close()
            if not os.path.getsize(args.out):
                os.unlink(args.out)

    elapsed = time.perf_counter() - started
    if args.out:
        with open(args.out) as fh:
            (window, initial), steps = iter_trace_file(fh)
            rep = verify_stream(initial, window, steps)
        if not (rep.allowable and rep.all_valid):
            print("self-check failed on the written trace", file=sys.stderr)
            return EXIT_VIOLATION
    n_cells = rec.hi - rec.lo + 1
    if args.machine:
        print(f"cells={n_cells}")
        print(f"flips={rec.flip_count}")
        print(f"min_deviation={_fmt_dev(rec.min_deviation)}")
        print(f"seconds={elapsed:.3f}")
    else:
        print(f"cells={n_cells} flips={rec.flip_count} "
              f"min_deviation={_fmt_dev(rec.min_deviation)} "
              f"wall={elapsed:.3f}s")
    return EXIT_OK


def cmd_search(args) -> int:
    try:
        res = search_best_deviation(args.n, mode=args.mode, force=args.force)
    except RefusalError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    sys.stdout.write(res.to_text())
    return EXIT_OK


def cmd_points(args) -> int:
    try:
        with open(args.points) as fh:
            ps = parse_points(fh.read())
    except FileNotFoundError:
        print(f"no such file: {args.points}", file=sys.stderr)
        return EXIT_MALFORMED
    except ContractError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    if args.action == "sequence":
        hp = circular_sequence(ps)
        sys.stdout.write(serialize_trace(hp.to_trace()))
        return EXIT_OK
    if args.action == "imbalance":
        records, mn = line_imbalances(ps)
        for rec in sorted(records, key=lambda r: r.labels):
            print(f"line {','.join(map(str, rec.labels))}: "
                  f"left={rec.left_count} right={rec.right_count} "
                  f"imbalance={rec.imbalance}")
        print(f"minimum imbalance: {mn}")
        return EXIT_OK
    if args.action == "link":
        try:
            ok = deviation_imbalance_link(ps)
        except ContractError as exc:
            print(f"cannot check: {exc}", file=sys.stderr)
            return EXIT_MALFORMED
        records, mn = line_imbalances(ps)
        if ok:
            print(f"link holds: line imbalance = 2 x deviation on every "
                  f"event; min imbalance = {mn}")
            return EXIT_OK
        print("link violated")
        return EXIT_VIOLATION
    raise ContractError(f"unknown action {args.action}")


def cmd_render(args) -> int:
    if args.points:
        try:
            with open(args.input) as fh:
                ps = parse_points(fh.read())
        except (FileNotFoundError, ContractError) as exc:
            print(f"cannot read points: {exc}", file=sys.stderr)
            return EXIT_MALFORMED
        svg = render_points_svg(ps, with_lines=args.lines)
    else:
        try:
            with open(args.input) as fh:
                tr = parse_trace(fh.read())
        except FileNotFoundError:
            print(f"no such file: {args.input}", file=sys.stderr)
            return EXIT_MALFORMED
        except TraceParseError as exc:
            print(f"parse error: {exc}", file=sys.stderr)
            return EXIT_MALFORMED
        svg = render_trace_svg(tr)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(svg)
    else:
        sys.stdout.write(svg)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(
        prog="allowseq",
        description="Allowable sequences with off-centre flips: construct, "
                    "verify, search, and the point-set bridge.")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("construct", help="run a construction stage")
    c.add_argument("--stage", required=True,
                   choices=["shift", "reflect", "reflect-mirrored", "step",
                            "full"])
    c.add_argument("--t", type=int, required=True)
    c.add_argument("--d", type=int, default=None)
    c.add_argument("--k", type=int, default=0)
    c.add_argument("--n", type=int, default=1)
    c.add_argument("--c-size", type=int, default=1,
                   help="size of the carried block for reflect stages")
    c.add_argument("--plan", action="store_true",
                   help="print the recurrence table instead of materializing")
    c.add_argument("--lenient", action="store_true",
                   help="report failed certificates instead of raising")
    c.add_argument("--out", default=None, help="trace file to write")
    c.add_argument("--max-cells", type=int, default=None)
    c.add_argument("--machine", action="store_true")
    c.set_defaults(func=cmd_construct)

    v = sub.add_parser("verify", help="verify a trace file")
    v.add_argument("trace")
    v.add_argument("--strict", action="store_true",
                   help="additionally require min deviation > t")
    v.add_argument("--machine", action="store_true")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("search", help="exhaustive best-deviation search")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--mode", choices=["single", "multi"], default="single")
    s.add_argument("--force", action="store_true",
                   help=f"override the n <= {SEARCH_GUARD} guard")
    s.set_defaults(func=cmd_search)

    p = sub.add_parser("points", help="point-set computations")
    p.add_argument("points")
    p.add_argument("--action", choices=["sequence", "imbalance", "link"],
                   required=True)
    p.set_defaults(func=cmd_points)

    r = sub.add_parser("render", help="render a trace or point set as SVG")
    r.add_argument("input")
    r.add_argument("--points", action="store_true",
                   help="treat the input as a point-set file")
    r.add_argument("--lines", action="store_true",
                   help="draw all determined lines (with --points)")
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "command", None) == "construct":
        args.n_given = "--n" in (argv if argv is not None else sys.argv)
        if args.stage in ("step", "full") and args.d is None:
            ap.error("--d is required for step and full stages")
    try:
        return args.func(args)
    except ContractError as exc:
        print(f"invalid request: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except ConstructionBug as exc:
        print(f"construction bug: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except RefusalError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED


if __name__ == "__main__":
    sys.exit(main())
