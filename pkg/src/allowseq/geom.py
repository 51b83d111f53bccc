"""Planar point sets, rotating-projection sequences and line imbalances.

Everything is exact: coordinates are Fractions, event ordering uses only
cross-product sign tests, and side counts come from a 3x3 orientation
determinant.  A half rotation of the projection direction sweeps out an
allowable sequence of permutations; the flip generated by a line through
two points has deviation exactly half that line's point-count imbalance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Iterable, Optional

from .engine import FlipStep, TraceRecorder, Trace
from .errors import ContractError
from .seqcore import CentredSequence, Flip, Window


@dataclass(frozen=True)
class PointSet:
    points: tuple  # ((x, y) Fractions), labelled 1..n in storage order

    def __init__(self, points: Iterable):
        pts = tuple((Fraction(x), Fraction(y)) for x, y in points)
        if len(set(pts)) != len(pts):
            raise ContractError("points must be pairwise distinct")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)


def orientation(a, b, c) -> int:
    """Sign of the signed area of triangle abc (+1 ccw, -1 cw, 0 flat)."""
    det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return (det > 0) - (det < 0)


def in_general_position(ps: PointSet) -> bool:
    pts = ps.points
    n = len(pts)
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                if orientation(pts[i], pts[j], pts[k]) == 0:
                    return False
    return True


@dataclass(frozen=True)
class LineRecord:
    labels: tuple        # 1-based labels of the points on the line
    left_count: int
    right_count: int

    @property
    def imbalance(self) -> int:
        return abs(self.left_count - self.right_count)


def _line_key(p, q):
    """Canonical integer key (A, B, C) for the line Ax + By = C."""
    a = q[1] - p[1]
    b = p[0] - q[0]
    c = a * p[0] + b * p[1]
    den = a.denominator * b.denominator * c.denominator
    ai, bi, ci = int(a * den), int(b * den), int(c * den)
    g = gcd(gcd(abs(ai), abs(bi)), abs(ci)) or 1
    ai, bi, ci = ai // g, bi // g, ci // g
    if ai < 0 or (ai == 0 and bi < 0):
        ai, bi, ci = -ai, -bi, -ci
    return (ai, bi, ci)


def line_imbalances(ps: PointSet):
    """All lines through at least two points with exact side counts.
    Returns (records, minimum imbalance)."""
    pts = ps.points
    n = len(pts)
    if n < 2:
        raise ContractError("need at least two points")
    lines = {}
    for i in range(n):
        for j in range(i + 1, n):
            lines.setdefault(_line_key(pts[i], pts[j]), (i, j))
    records = []
    for key, (i, j) in lines.items():
        on, left, right = [], 0, 0
        for k in range(n):
            s = orientation(pts[i], pts[j], pts[k])
            if s == 0:
                on.append(k + 1)
            elif s > 0:
                left += 1
            else:
                right += 1
        records.append(LineRecord(tuple(on), left, right))
    return records, min(r.imbalance for r in records)


@dataclass(frozen=True)
class SwapEvent:
    """One simultaneous batch of projection-order reversals."""

    step: FlipStep
    groups: tuple       # collinear label groups generating each flip


@dataclass(frozen=True)
class HalfPeriod:
    n: int
    initial: tuple      # the identity labelling 1..n
    events: tuple       # SwapEvents in rotation order

    def steps(self):
        return tuple(ev.step for ev in self.events)

    def to_trace(self) -> Trace:
        """Replay the events into a windowless trace on [1, n]."""
        rec = TraceRecorder(CentredSequence(1, self.initial), Window(0))
        for ev in self.events:
            rec.emit_step(ev.step)
        return rec.to_trace()


def _event_vector(p, q):
    """Primitive integer direction, at angle in (0, pi], at which the
    projections of p and q coincide (the normal of q - p)."""
    vx, vy = q[0] - p[0], q[1] - p[1]
    ex, ey = -vy, vx
    den = ex.denominator * ey.denominator
    xi, yi = int(ex * den), int(ey * den)
    g = gcd(abs(xi), abs(yi))
    xi, yi = xi // g, yi // g
    # Upper half plane; the half-turn boundary is represented by (-1, 0).
    if yi < 0 or (yi == 0 and xi > 0):
        xi, yi = -xi, -yi
    return (xi, yi)


def circular_sequence(ps: PointSet) -> HalfPeriod:
    """Rotate the projection direction through a half turn and record the
    swap events.  Labels 1..n follow the starting order, which breaks
    projection ties by the lexicographic (x, y) perturbation."""
    pts = ps.points
    n = len(pts)
    if n < 1:
        raise ContractError("need at least one point")
    order = sorted(range(n), key=lambda i: pts[i])
    label = {idx: lab for lab, idx in enumerate(order, start=1)}
    # Group unordered pairs by their event direction.
    events = {}
    for i in range(n):
        for j in range(i + 1, n):
            events.setdefault(_event_vector(pts[i], pts[j]), []).append((i, j))

    evs = list(events.items())
    # Sort by angle in (0, pi] using exact cross products.  The starting
    # direction is (1, eps); an event u1 precedes u2 when u1 x u2 > 0.
    import functools

    def cmp(a, b):
        (ax, ay), (bx, by) = a[0], b[0]
        cross = ax * by - ay * bx
        return -1 if cross > 0 else (1 if cross < 0 else 0)

    evs.sort(key=functools.cmp_to_key(cmp))

    perm = [label[i] for i in order]          # identity 1..n
    position = {lab: k + 1 for k, lab in enumerate(perm)}
    result = []
    for vec, pairs in evs:
        # One simultaneous event: several parallel lines may fire at once,
        # each contributing the reversal of its own collinear group.  Find
        # the groups as connected components of the pair graph.
        comp = {}
        for i, j in pairs:
            ri = comp.setdefault(i, i)
            while comp[ri] != ri:
                ri = comp[ri]
            rj = comp.setdefault(j, j)
            while comp[rj] != rj:
                rj = comp[rj]
            comp[ri] = rj
        groups_by_root = {}
        for i in comp:
            r = i
            while comp[r] != r:
                r = comp[r]
            groups_by_root.setdefault(r, []).append(i)
        step_flips = []
        groups = []
        for members in groups_by_root.values():
            labs = sorted((label[i] for i in members),
                          key=lambda lab: position[lab])
            c, d = position[labs[0]], position[labs[-1]]
            if d - c + 1 != len(labs):
                raise ContractError("collinear group is not contiguous; "
                                    "geometry violated")
            if labs != sorted(labs):
                raise ContractError("swap group is not label-increasing; "
                                    "geometry violated")
            step_flips.append(Flip(c, d))
            groups.append(tuple(labs))
        pack = sorted(zip(step_flips, groups), key=lambda fg: fg[0].c)
        step = FlipStep([f for f, _ in pack])
        result.append(SwapEvent(step, tuple(g for _, g in pack)))
        for f in step.flips:
            seg = [perm[p - 1] for p in range(f.c, f.d + 1)]
            for offset, lab in enumerate(reversed(seg)):
                perm[f.c - 1 + offset] = lab
                position[lab] = f.c + offset
    if perm != list(range(n, 0, -1)):
        raise ContractError("half period did not reach the reversal")
    return HalfPeriod(n, tuple(range(1, n + 1)), tuple(result))


def deviation_imbalance_link(ps: PointSet) -> bool:
    """For general-position sets: every swap event's flip [a, b] satisfies
    line imbalance = |n - b - a + 1| = twice the flip's deviation."""
    if not in_general_position(ps):
        raise ContractError("the link check needs general position")
    pts = ps.points
    n = len(pts)
    order = sorted(range(n), key=lambda i: pts[i])
    label_to_idx = {lab: idx for lab, idx in enumerate(order, start=1)}
    hp = circular_sequence(ps)
    for ev in hp.events:
        for f, group in zip(ev.step.flips, ev.groups):
            if len(group) != 2:
                return False
            i, j = (label_to_idx[g] for g in group)
            left = right = 0
            for k in range(n):
                if k in (i, j):
                    continue
                s = orientation(pts[i], pts[j], pts[k])
                if s > 0:
                    left += 1
                elif s < 0:
                    right += 1
                else:
                    return False
            if abs(left - right) != abs(n - f.d - f.c + 1):
                return False
    return True


# ---------------------------------------------------------------------------
# Rendering.


def _svg_header(width, height):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" '
            f'viewBox="0 0 {width:.1f} {height:.1f}" '
            f'width="{width:.1f}" height="{height:.1f}">')


def _xscale(steps: int):
    """Step index to x offset; linear up to 10^4 steps, then compressed."""
    import math

    def f(i):
        if i <= 10_000:
            return float(i)
        return 10_000.0 + 2_000.0 * math.log10(i / 10_000.0)

    return f


def render_trace_svg(tr) -> str:
    """Wiring-diagram rendering: one polyline per element, x = step index,
    y = position; the window band is shaded."""
    if isinstance(tr, TraceRecorder):
        tr = tr.to_trace()
    lo, hi = tr.initial.lo, tr.initial.hi
    n = hi - lo + 1
    t = tr.window.t
    xs = _xscale(len(tr.steps))
    unit_x, unit_y, pad = 24.0, 14.0, 20.0
    width = pad * 2 + unit_x * max(1.0, xs(len(tr.steps)))
    height = pad * 2 + unit_y * (n - 1 if n > 1 else 1)

    def X(i):
        return pad + unit_x * xs(i)

    def Y(pos):
        return pad + unit_y * (hi - pos)

    paths = {v: [(X(0), Y(lo + i))] for i, v in enumerate(tr.initial.values)}
    state = list(tr.initial.values)
    for si, step in enumerate(tr.steps, start=1):
        for f in step.flips:
            i, j = f.c - lo, f.d - lo + 1
            state[i:j] = state[i:j][::-1]
        for i, v in enumerate(state):
            paths[v].append((X(si), Y(lo + i)))
    out = [_svg_header(width, height)]
    if -t <= hi and t >= lo:
        band_top = Y(min(t, hi))
        band_bot = Y(max(-t, lo))
        out.append(f'<rect x="0" y="{band_top - unit_y / 2:.1f}" '
                   f'width="{width:.1f}" '
                   f'height="{band_bot - band_top + unit_y:.1f}" '
                   f'fill="#f2d4d4"/>')
    for v, pts in sorted(paths.items()):
        coords = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
        out.append(f'<polyline points="{coords}" fill="none" '
                   f'stroke="#36597f" stroke-width="1.2"/>')
        out.append(f'<text x="{pts[0][0] - 14:.1f}" y="{pts[0][1] + 3:.1f}" '
                   f'font-size="9">{v}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_points_svg(ps: PointSet, with_lines: bool = False) -> str:
    """Draw the points (and optionally all determined lines, labelled with
    their imbalances)."""
    pts = [(float(x), float(y)) for x, y in ps.points]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    span = max(max(xs) - min(xs), max(ys) - min(ys)) or 1.0
    scale = 320.0 / span
    pad = 30.0

    def X(x):
        return pad + (x - min(xs)) * scale

    def Y(y):
        return pad + (max(ys) - y) * scale

    width = pad * 2 + (max(xs) - min(xs)) * scale
    height = pad * 2 + (max(ys) - min(ys)) * scale
    out = [_svg_header(width, height)]
    if with_lines:
        records, _ = line_imbalances(ps)
        for rec in records:
            i, j = rec.labels[0] - 1, rec.labels[-1] - 1
            x1, y1 = X(pts[i][0]), Y(pts[i][1])
            x2, y2 = X(pts[j][0]), Y(pts[j][1])
            out.append(f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" '
                       f'y2="{y2:.1f}" stroke="#bbbbbb" stroke-width="0.8"/>')
            out.append(f'<text x="{(x1 + x2) / 2:.1f}" y="{(y1 + y2) / 2:.1f}"'
                       f' font-size="8" fill="#995555">{rec.imbalance}</text>')
    for k, (x, y) in enumerate(pts, start=1):
        out.append(f'<circle cx="{X(x):.1f}" cy="{Y(y):.1f}" r="3.5" '
                   f'fill="#203a58"/>')
        out.append(f'<text x="{X(x) + 5:.1f}" y="{Y(y) - 5:.1f}" '
                   f'font-size="10">{k}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Point-set file format: one "x y" pair per line, rational or integer
# coordinates, '#' comments.


def parse_points(text: str) -> PointSet:
    pts = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ContractError(f"line {ln}: expected 'x y', got {raw!r}")
        try:
            pts.append((Fraction(parts[0]), Fraction(parts[1])))
        except (ValueError, ZeroDivisionError) as exc:
            raise ContractError(f"line {ln}: bad coordinate ({exc})")
    return PointSet(pts)


def format_points(ps: PointSet) -> str:
    lines = []
    for x, y in ps.points:
        fx = str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
        fy = str(y.numerator) if y.denominator == 1 else f"{y.numerator}/{y.denominator}"
        lines.append(f"{fx} {fy}")
    return "\n".join(lines) + "\n"
