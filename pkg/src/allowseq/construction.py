"""Constructive procedures that emit verified flips into a trace.

The two primitives are shifting (bring a designated block into the
window) and reflection (carry a block across the window), both realized
out of block swaps, region sorts and one wide flip whose midpoint sits
just outside the window.  On top of them sit the balanced block
decomposition, the recursive growth step, and the full pipeline from an
identity sequence to its reversal.

Positions are absolute throughout; the window is always [-t, t].  Region
bookkeeping inside the recursive step uses a SegmentMap: an ordered list
of named, sized segments tiling the working span, mirroring the block
concatenation expressions the procedures reason in.  Every physical move
derives its intervals from the map immediately before emitting, so the
map stays the single source of truth for where things are, and every
move is re-validated on concrete values by the recorder.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .engine import TraceRecorder
from .errors import ConstructionBug, ContractError, RefusalError
from .planner import (RecurrenceTable, SizePlan, alpha_closed, beta_closed,
                      plan_sizes, shift_thresholds)
from .seqcore import (Block, CentredSequence, PrefixWidth, Window,
                      _strictly_increasing, identity_sequence, is_r_balanced,
                      width, width_greedy)


def _ivlen(iv) -> int:
    return iv[1] - iv[0] + 1


def _empty(iv) -> bool:
    return iv[0] > iv[1]


def _check(cond, message):
    if not cond:
        raise ContractError(message)


# ---------------------------------------------------------------------------
# Mirrored view.


class MirrorView:
    """Position- and value-negated view of a recorder.

    A layout C^B^A^X whose order relations are all reversed looks, through
    the view, exactly like X^A^B^C with the standard relations, so the
    unmirrored procedures run on it unchanged.  Flips and moves are
    translated back to real coordinates before touching the recorder,
    whose own validation therefore still applies.
    """

    def __init__(self, rec):
        self.rec = rec

    @property
    def t(self):
        return self.rec.t

    @staticmethod
    def _m(iv):
        return (-iv[1], -iv[0])

    def values(self, lo, hi):
        return tuple(-v for v in reversed(self.rec.values(-hi, -lo)))

    def value_at(self, pos):
        return -self.rec.value_at(-pos)

    def emit_flip(self, c, d):
        self.rec.emit_flip(-d, -c)

    def swap_adjacent_blocks(self, left, right):
        self.rec.swap_adjacent_blocks(self._m(right), self._m(left))

    def sort_region_decreasing(self, region):
        self.rec.sort_region_decreasing(self._m(region))

    def annotate(self, label):
        return self.rec.annotate(label + " [mirrored]")


def _mir(iv):
    return (-iv[1], -iv[0])


# ---------------------------------------------------------------------------
# Shifting.


def _shift_rec(ops, t, k, a_iv, b_iv, c_iv, thresholds):
    """Level-k shifting: A on [k, t], B increasing with |B| >= N_k,
    |C| = t-k+1 and A < B < C.  Afterwards C sits on [k, t] (in order) and
    everything else is decreasing right of t.  Returns the D interval."""
    n = _ivlen(b_iv)
    need = thresholds[t - k]
    if n < need:
        raise ConstructionBug(f"shift level {k} needs |B| >= {need}, got {n}")
    if k == t:
        # A, B, C concatenate to one increasing run; flip it whole.  The
        # midpoint t + (n+1)/2 clears the window for every n >= 0.
        ops.emit_flip(a_iv[0], c_iv[1])
        return (t + 1, c_iv[1])

    n1 = thresholds[t - k - 1]
    span = t - k
    b1 = (b_iv[0], b_iv[0] + n1 - 1)
    b2 = (b1[1] + 1, b1[1] + span)
    b3 = (b2[1] + 1, b2[1] + span)
    b4 = (b3[1] + 1, b_iv[1])
    c1 = (c_iv[0], c_iv[0])
    cp_len = _ivlen(c_iv) - 1

    _shift_rec(ops, t, k + 1, (k + 1, t), b1, b2, thresholds)
    # Now: A1 at k, B2 on [k+1, t], leftovers E1, then B3, B4, C.
    e1 = (t + 1, t + span + n1)
    b3_now = (e1[1] + 1, e1[1] + span)
    ops.swap_adjacent_blocks(e1, b3_now)
    e1_now = (t + 1 + span, t + span + n1 + span)
    ops.swap_adjacent_blocks((e1_now[0], c1[0] - 1), c1)
    ops.emit_flip(k, 2 * t - k + 1)
    # Now: C1 at k, reversed B3 on [k+1, t], then reversed B2, A1, E1.
    e2 = (t + 1, 2 * t - k + 1 + _ivlen(e1))
    ops.sort_region_decreasing(e2)
    ops.swap_adjacent_blocks(e2, (e2[1] + 1, c_iv[1]))
    b4_now = (t + 1, t + _ivlen(b4))
    cp_now = (b4_now[1] + 1, b4_now[1] + cp_len)
    _shift_rec(ops, t, k + 1, (k + 1, t), b4_now, cp_now, thresholds)
    return (t + 1, c_iv[1])


def _require_layout(ops, x_iv, a_iv, b_iv, c_iv, min_b, name):
    t = ops.t
    _check(a_iv == (-t, t), f"{name}: the centred part must sit on [-t, t]")
    _check(b_iv[0] == t + 1, f"{name}: B must start at t+1")
    _check(b_iv[1] + 1 == c_iv[0], f"{name}: C must follow B")
    _check(_ivlen(b_iv) >= min_b,
           f"{name}: |B| = {_ivlen(b_iv)} is below the bound {min_b}")
    bv = ops.values(*b_iv)
    _check(_strictly_increasing(bv), f"{name}: B must be increasing")
    av = ops.values(*a_iv)
    cv = ops.values(*c_iv)
    _check(max(av) < min(bv), f"{name}: need A < B")
    _check(max(bv) < min(cv), f"{name}: need B < C")
    if x_iv is not None:
        _check(x_iv[1] + 1 == a_iv[0], f"{name}: X must end at -t-1")
        xv = ops.values(*x_iv)
        _check(_strictly_increasing(xv), f"{name}: X must be increasing")
        _check(_strictly_increasing(cv), f"{name}: C must be increasing")
        _check(max(xv) < min(av), f"{name}: need X < A")
        _check(_ivlen(x_iv) == _ivlen(c_iv), f"{name}: need |X| = |C|")


def shift(tr, a_iv, b_iv, c_iv):
    """Go from A^B^C to C-on-the-window, then a decreasing block.

    A occupies [-t, t]; B is increasing with |B| >= 3^(2t); |C| = 2t+1;
    A < B < C on values.  Returns (window interval, D interval)."""
    t = tr.t
    _check(_ivlen(c_iv) == 2 * t + 1, "shift: need |C| = 2t+1")
    _require_layout(tr, None, a_iv, b_iv, c_iv, 3 ** (2 * t), "shift")
    with tr.annotate(f"shift n={_ivlen(b_iv)}"):
        d_iv = _shift_rec(tr, t, -t, a_iv, b_iv, c_iv, shift_thresholds(t))
    return a_iv, d_iv


def shift_mirrored(tr, a_iv, b_iv, c_iv):
    """Mirrored shifting for the layout C^B^A with A > B > C."""
    view = MirrorView(tr)
    t = tr.t
    _check(_ivlen(c_iv) == 2 * t + 1, "shift: need |C| = 2t+1")
    _require_layout(view, None, _mir(a_iv), _mir(b_iv), _mir(c_iv),
                    3 ** (2 * t), "shift")
    with view.annotate(f"shift n={_ivlen(b_iv)}"):
        d_v = _shift_rec(view, t, -t, _mir(a_iv), _mir(b_iv), _mir(c_iv),
                         shift_thresholds(t))
    return a_iv, _mir(d_v)


# ---------------------------------------------------------------------------
# Reflection.


def _reflect_impl(ops, x_iv, a_iv, b_iv, c_iv):
    t = ops.t
    T = 3 ** (2 * t)
    _require_layout(ops, x_iv, a_iv, b_iv, c_iv, T + 4 * t + 2, "reflect")
    n = _ivlen(b_iv)
    xs = _ivlen(x_iv)
    b1 = (b_iv[0], b_iv[0] + n - 4 * t - 3)
    b2 = (b1[1] + 1, b1[1] + 2 * t + 1)
    with ops.annotate(f"reflect n={n} c={xs}"):
        _shift_rec(ops, t, -t, a_iv, b1, b2, shift_thresholds(t))
        dprime = (t + 1, t + _ivlen(b1) + 2 * t + 1)
        ops.swap_adjacent_blocks(dprime, (dprime[1] + 1, c_iv[1]))
        ops.emit_flip(-t - xs, 3 * t + 1 + xs)
        xbar = (3 * t + 2, 3 * t + 1 + xs)
        dprime_now = (xbar[1] + 1, xbar[1] + _ivlen(dprime))
        ops.swap_adjacent_blocks(xbar, dprime_now)
    return (-t - xs, -t - 1), a_iv, (t + 1, c_iv[1])


def reflect(tr, x_iv, a_iv, b_iv, c_iv):
    """Go from X^A^B^C to reversed-C ^ D-on-the-window ^ E.

    The window ends up holding the last 2t+1 values of B in reverse, E is
    decreasing below it.  Needs |X| = |C|, X/B/C increasing, X < A < B < C
    and |B| >= 3^(2t) + 4t + 2.  Returns (reversed-C, window, E) intervals."""
    return _reflect_impl(tr, x_iv, a_iv, b_iv, c_iv)


def reflect_mirrored(tr, x_iv, a_iv, b_iv, c_iv):
    """Mirrored reflection for the real layout C^B^A^X with C < B < A < X."""
    view = MirrorView(tr)
    cb_v, _, e_v = _reflect_impl(view, _mir(x_iv), _mir(a_iv), _mir(b_iv),
                                 _mir(c_iv))
    return _mir(cb_v), a_iv, _mir(e_v)


# ---------------------------------------------------------------------------
# Balanced decomposition (block level; no window involved).


def rearrangement_transpositions(current, target):
    """Adjacent transpositions (0-based left index, in order) realizing
    target from current, each swapping an ascending pair.  Raises when the
    reordering would need a descending swap."""
    cur = list(current)
    out = []
    placed = len(cur)
    for v in reversed(list(target)):
        idx = cur.index(v)
        while idx < placed - 1:
            if cur[idx] >= cur[idx + 1]:
                raise ContractError("rearrangement needs a non-ascending swap")
            cur[idx], cur[idx + 1] = cur[idx + 1], cur[idx]
            out.append(idx)
            idx += 1
        placed -= 1
    return out


@dataclass(frozen=True)
class Decomposition:
    blocks: tuple      # resulting increasing blocks, left to right
    schedule: tuple    # 1-based size-2 block flips, as Flip start positions
    result: Block      # concatenation of blocks

    @property
    def k(self) -> int:
        return len(self.blocks)


def decompose_balanced(b: Block, r) -> Decomposition:
    """Reorder an r-balanced block into C_1 ^ ... ^ C_k by valid size-2
    block flips: every C_i increasing, |C_i^-| >= floor(r), the negative
    parts ordered left to right, and k = width of the positive part.

    A block with no positive values is returned whole (k = 1)."""
    r = Fraction(r)
    report = is_r_balanced(b, r)
    if not report.balanced:
        raise ContractError(
            f"block is not {r}-balanced at prefix {report.witness}: "
            f"{report.detail}")
    pos_vals = [v for v in b if v > 0]
    neg_vals = [v for v in b if v < 0]
    if not pos_vals:
        return Decomposition((b,), (), b)
    r_int = int(r)
    k, chains = width_greedy(Block(pos_vals))
    chain_vals = [[pos_vals[i] for i in chain] for chain in chains]
    parts = []
    for j in range(k):
        if j < k - 1:
            negs = neg_vals[j * r_int : (j + 1) * r_int]
        else:
            negs = neg_vals[(k - 1) * r_int :]
        parts.append(negs + chain_vals[j])
    target = [v for part in parts for v in part]
    starts = rearrangement_transpositions(b.values, target)
    return Decomposition(tuple(Block(part) for part in parts),
                         tuple(c + 1 for c in starts), Block(target))


# ---------------------------------------------------------------------------
# Segment map.


class SegmentMap:
    """Named, sized segments tiling [lo, lo + total - 1], in order."""

    def __init__(self, lo, segs):
        self.lo = lo
        self.order = []
        self.sizes = {}
        for name, size in segs:
            self._add(name, size)
        self._starts = None

    def _add(self, name, size):
        if size < 0:
            raise ContractError(f"segment {name} has negative size")
        if size == 0:
            return
        if name in self.sizes:
            raise ContractError(f"duplicate segment {name}")
        self.order.append(name)
        self.sizes[name] = size

    def _ensure(self):
        if self._starts is None:
            starts = {}
            pos = self.lo
            for name in self.order:
                starts[name] = pos
                pos += self.sizes[name]
            self._starts = starts
            self._end = pos - 1

    def iv(self, name):
        self._ensure()
        s = self._starts[name]
        return (s, s + self.sizes[name] - 1)

    def span(self, first, last):
        self._ensure()
        i, j = self.order.index(first), self.order.index(last)
        if i > j:
            raise ContractError(f"span {first}..{last} is reversed")
        return (self._starts[first], self._starts[last] + self.sizes[last] - 1)

    def replace(self, names, pieces):
        """Replace a contiguous run of segments by new ones, same total."""
        idxs = [self.order.index(n) for n in names]
        if idxs != list(range(idxs[0], idxs[0] + len(idxs))):
            raise ContractError("replace needs a contiguous run")
        total = sum(self.sizes[n] for n in names)
        if total != sum(s for _, s in pieces):
            raise ContractError("replace must preserve total size")
        for n in names:
            del self.sizes[n]
        keep = [(n, s) for n, s in pieces if s > 0]
        for n, s in keep:
            if n in self.sizes:
                raise ContractError(f"duplicate segment {n}")
            self.sizes[n] = s
        self.order[idxs[0] : idxs[0] + len(idxs)] = [n for n, _ in keep]
        self._starts = None

    def split(self, name, pieces):
        self.replace([name], pieces)

    def rename(self, old, new):
        self.replace([old], [(new, self.sizes[old])])

    def move_run(self, names, *, after=None, to_front=False):
        taken = set(names)
        rest = [n for n in self.order if n not in taken]
        pos = 0 if to_front else rest.index(after) + 1
        self.order = rest[:pos] + list(names) + rest[pos:]
        self._starts = None

    def total_span(self):
        self._ensure()
        return (self.lo, self._end)


def _move_segments(rec, sm, names, *, after=None, to_front=False):
    """Physically move a contiguous segment run so it lands immediately
    after `after` (or at the front), then update the map."""
    first, last = names[0], names[-1]
    idxs = [sm.order.index(n) for n in names]
    if idxs != list(range(idxs[0], idxs[0] + len(idxs))):
        raise ContractError("_move_segments needs a contiguous run")
    run_iv = sm.span(first, last)
    dest_idx = 0 if to_front else sm.order.index(after) + 1
    cur_idx = idxs[0]
    if dest_idx == cur_idx:
        return
    if dest_idx < cur_idx:
        crossed_iv = sm.span(sm.order[dest_idx], sm.order[cur_idx - 1])
        rec.swap_adjacent_blocks(crossed_iv, run_iv)
    else:
        crossed_iv = sm.span(sm.order[idxs[-1] + 1], sm.order[dest_idx - 1])
        rec.swap_adjacent_blocks(run_iv, crossed_iv)
    sm.move_run(names, after=after, to_front=to_front)


# ---------------------------------------------------------------------------
# The recursive growth step.


@dataclass
class StepLayout:
    """Position intervals of the five result regions (empty: lo > hi)."""

    L: tuple
    W: tuple
    A: tuple
    B: tuple
    R: tuple

    def region_sizes(self):
        return {name: max(0, iv[1] - iv[0] + 1)
                for name, iv in (("L", self.L), ("W", self.W), ("A", self.A),
                                 ("B", self.B), ("R", self.R))}


@dataclass
class Certificate:
    index: int
    name: str
    passed: bool
    detail: str = ""


@dataclass
class StepOutcome:
    layout: StepLayout
    certificates: list
    x_size: int
    y_size: int
    flip_count: int
    recorder: TraceRecorder

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.certificates)


class _StepEnv:
    def __init__(self, rec, d, deep_certify=False, strict=True):
        self.rec = rec
        self.t = rec.t
        self.T = 3 ** (2 * self.t)
        self.d = d
        self.plan = SizePlan(self.t, d)
        self.deep_certify = deep_certify
        self.strict = strict
        self._counter = 0

    def fresh(self, tag):
        self._counter += 1
        return f"{tag}.{self._counter}"


def _entry_checks(env, k, n, x_iv, y_iv, depth):
    rec = env.rec
    t = env.t
    problem = None
    if _ivlen(x_iv) != env.plan.x(n, k):
        problem = f"|X| = {_ivlen(x_iv)} but the planner wants {env.plan.x(n, k)}"
    elif _ivlen(y_iv) != env.plan.y(n, k):
        problem = f"|Y| = {_ivlen(y_iv)} but the planner wants {env.plan.y(n, k)}"
    elif x_iv[1] != -t - 1 or y_iv[0] != t + 1:
        problem = "X and Y must be adjacent to the window"
    else:
        xv = rec.values(*x_iv)
        yv = rec.values(*y_iv)
        wv = rec.values(-t, t)
        if not _strictly_increasing(xv):
            problem = "X must be increasing"
        elif not _strictly_increasing(yv):
            problem = "Y must be increasing"
        elif not (max(xv) < min(wv) and max(wv) < min(yv)):
            problem = "need X < centre < Y on values"
        elif xv[-1] >= 0 or yv[0] <= 0:
            problem = "need X < 0 < Y"
    if problem:
        if depth == 0:
            raise ContractError(f"recursive step: {problem}")
        raise ConstructionBug(f"recursive step (inner): {problem}",
                              rec.annotation_stack())


def _rstep(env, k, n, x_iv, y_iv, depth):
    rec = env.rec
    t, T, d = env.t, env.T, env.d
    _entry_checks(env, k, n, x_iv, y_iv, depth)
    win = (-t, t)
    y_set = set(rec.values(*y_iv)) if (depth == 0 or env.deep_certify) else None

    if k == 0:
        c1 = (t + 1, t + T + 2 * t + 1)
        c2 = (c1[1] + 1, c1[1] + 2 * t + 1)
        c3 = (c2[1] + 1, c2[1] + n + 1)
        reflect(rec, x_iv, win, (c1[0], c2[1]), c3)
        w_iv = (-t - (n + 1), -t - 1)
        vals = rec.values(t + 1, y_iv[1])
        if any(v == 0 for v in vals):
            raise ConstructionBug("zero value entered a sign-split zone",
                                  rec.annotation_stack())
        pos_count = sum(1 for v in vals if v > 0)
        layout = StepLayout(L=(x_iv[0], x_iv[0] - 1), W=w_iv, A=win,
                            B=(t + 1, t + pos_count),
                            R=(t + pos_count + 1, y_iv[1]))
        if env.deep_certify and depth > 0:
            _certify(env, layout, 0, n, y_set, strict=env.strict)
        return layout

    m = d ** (k - 1)
    p = env.plan.p(k)
    x1 = env.plan.x(n + 1, k - 1)
    y1 = env.plan.y(n + 1, k - 1)
    u = T + 4 * t + 2
    F = env.fresh

    xp = F("Xp")
    P = {i: F(f"P{i}") for i in range(1, d + 1)}
    Q = {i: F(f"Q{i}") for i in range(1, d + 1)}
    win_seg = F("WIN")
    yp = F("Yp")
    segs = [(xp, p + 2 * t + 1)]
    segs += [(P[i], x1) for i in range(d, 0, -1)]
    segs += [(win_seg, 2 * t + 1)]
    segs += [(Q[i], y1) for i in range(1, d + 1)]
    segs += [(yp, _ivlen(y_iv) - d * y1)]
    sm = SegmentMap(x_iv[0], segs)
    if sm.total_span() != (x_iv[0], y_iv[1]):
        raise ConstructionBug("segment map does not tile the working span",
                              rec.annotation_stack())

    # Step 1: run the level below d times and herd the pieces apart.
    Ls, Ws, Bs, Rs = [], [], [], []
    with rec.annotate(f"step k={k}: repeat level {k-1} x{d}"):
        for i in range(1, d + 1):
            sub = _rstep(env, k - 1, n + 1, sm.iv(P[i]), sm.iv(Q[i]), depth + 1)
            sizes = sub.region_sizes()
            Li, Wi = F(f"L{i}"), F(f"W{i}")
            Bi, Ri = F(f"B{i}"), F(f"R{i}")
            sm.replace([P[i]], [(Li, sizes["L"]), (Wi, sizes["W"])])
            sm.replace([Q[i]], [(Bi, sizes["B"]), (Ri, sizes["R"])])
            if sizes["L"]:
                if Ls:
                    _move_segments(rec, sm, [Li], after=Ls[-1])
                else:
                    _move_segments(rec, sm, [Li], to_front=True)
                Ls.append(Li)
            _move_segments(rec, sm, [Wi], after=(Ws[-1] if Ws else xp))
            Ws.append(Wi)
            if i < d:
                _move_segments(rec, sm, [Bi, Ri], after=Q[d])
            _move_segments(rec, sm, [Ri], after=yp)
            Bs.insert(0, Bi)
            Rs.insert(0, Ri)

    # Step 2: gather the singleton tails of the W pieces next to the
    # window, then recycle them to the right side one row at a time.
    S = {i: F(f"S{i}") for i in range(1, m + 1)}
    ypp = F("Ypp")
    sm.replace([yp], [(S[i], T + d + 4 * t + 2) for i in range(1, m + 1)]
               + [(ypp, p)])

    w_span = sm.span(Ws[0], Ws[-1])
    kcells = []
    mrows = [[] for _ in range(m)]  # mrows[j-1] holds row j left to right
    for Wi in Ws:
        wv = rec.values(*sm.iv(Wi))
        if len(wv) != m * (n + 2):
            raise ConstructionBug("W piece has unexpected shape",
                                  rec.annotation_stack())
        kcells.extend(wv[: m * (n + 1)])
        tail = wv[m * (n + 1) :]
        for j in range(m, 0, -1):
            mrows[j - 1].append(tail[m - j])
    target = list(kcells)
    for j in range(m, 0, -1):
        target.extend(mrows[j - 1])
    with rec.annotate("gather tails"):
        rec.rearrange_region(w_span, target)
    WK = F("WK")
    MROW = {j: F(f"MR{j}") for j in range(1, m + 1)}
    sm.replace(Ws, [(WK, d * m * (n + 1))]
               + [(MROW[j], d) for j in range(m, 0, -1)])

    stack = []   # C-stack names, window side first
    ubrs = []
    rfront = Rs[0]  # leftmost segment of the R zone
    with rec.annotate("tail cycles"):
        for i in range(1, m + 1):
            Tt, Ji = F("Tt"), F("J")
            Ut, Ub = F("Ut"), F("Ub")
            sm.replace([S[i]], [(Tt, T), (Ji, 2 * t + 1),
                                (Ut, 2 * t + 1), (Ub, d)])
            _move_segments(rec, sm, [Tt, Ji, Ut, Ub], after=win_seg)
            shift(rec, win, sm.iv(Tt), sm.iv(Ji))
            CCi = F("CC")
            sm.replace([Tt, Ji], [(CCi, T + 2 * t + 1)])
            ccv = rec.values(*sm.iv(CCi))
            nneg = sum(1 for v in ccv if v < 0)
            if nneg:
                CCn = F("CCneg")
                sm.split(CCi, [(CCi, len(ccv) - nneg), (CCn, nneg)])
                _move_segments(rec, sm, [CCn], after=ypp)
                rfront = CCn
            _move_segments(rec, sm, [CCi], after=Ub)
            row = MROW[i]
            if sm.iv(row) != (-d - t, -t - 1):
                raise ConstructionBug("tail row out of position",
                                      rec.annotation_stack())
            rec.emit_flip(-d - t, d + 3 * t + 1)
            UbR, JR, Ni = F("UbR"), F("JR"), F("N")
            sm.replace([row], [(UbR, d)])
            sm.replace([Ut, Ub], [(JR, 2 * t + 1), (Ni, d)])
            stack = [JR, Ni, CCi] + stack
            if ubrs:
                _move_segments(rec, sm, [UbR], after=ubrs[-1])
            elif Ls:
                _move_segments(rec, sm, [UbR], after=Ls[-1])
            else:
                _move_segments(rec, sm, [UbR], to_front=True)
            ubrs.append(UbR)

    # Step 3: split the leading cell off every gathered K block, regroup
    # those singles around the window with the X' singletons, and reflect
    # them across one by one to become the new tail.
    with rec.annotate("form the new tail"):
        _move_segments(rec, sm, [ypp], after=win_seg)
        Qs = {i: F(f"Qs{i}") for i in range(1, p + 1)}
        sm.replace([ypp], [(Qs[i], 1) for i in range(1, p + 1)])

        xpv = rec.values(*sm.iv(xp))
        wkv = rec.values(*sm.iv(WK))
        md = m * d
        kprime = []
        osingles = []
        for i in range(md):
            blockv = wkv[i * (n + 1) : (i + 1) * (n + 1)]
            kprime.extend(blockv[:-1])
            osingles.append(blockv[-1])
        f_len = md - p * u
        if f_len < T:
            raise ConstructionBug("leftover singles shorter than 3^(2t)",
                                  rec.annotation_stack())
        target = list(kprime) + list(xpv[: 2 * t + 1]) + osingles[:f_len]
        off = f_len
        Gparts, Hparts = {}, {}
        for j in range(p, 0, -1):
            Gparts[j] = osingles[off : off + 2 * t + 1]
            Hparts[j] = osingles[off + 2 * t + 1 : off + u]
            off += u
        for j in range(p, 0, -1):
            target.append(xpv[2 * t + 1 + (p - j)])
            target.extend(Gparts[j])
            target.extend(Hparts[j])
        rec.rearrange_region(sm.span(xp, WK), target)
        WKp, XW, Fseg = F("WKp"), F("XW"), F("Fs")
        pieces = [(WKp, md * n), (XW, 2 * t + 1), (Fseg, f_len)]
        Ps, G, H = {}, {}, {}
        for j in range(p, 0, -1):
            Ps[j], G[j], H[j] = F(f"Ps{j}"), F(f"G{j}"), F(f"H{j}")
            pieces += [(Ps[j], 1), (G[j], 2 * t + 1), (H[j], T + 2 * t + 1)]
        sm.replace([xp, WK], pieces)

        qms, psrs, hrgr = [], [], []
        UT = None
        for i in range(1, p + 1):
            reflect_mirrored(rec, x_iv=sm.iv(Qs[i]), a_iv=win,
                             b_iv=sm.span(G[i], H[i]), c_iv=sm.iv(Ps[i]))
            Qm, HRi, PsRi = F("Qm"), F("HR"), F("PsR")
            if i == 1:
                UT = F("UT")
                mid = UT
            else:
                mid = F("GR")
            sm.replace([Ps[i], G[i], H[i]],
                       [(Qm, 1), (mid, 2 * t + 1), (HRi, T + 2 * t + 1)])
            sm.rename(Qs[i], PsRi)
            if i == 1:
                anchor = ubrs[-1] if ubrs else (Ls[-1] if Ls else None)
                if anchor is None:
                    _move_segments(rec, sm, [Qm, UT], to_front=True)
                else:
                    _move_segments(rec, sm, [Qm, UT], after=anchor)
                _move_segments(rec, sm, [HRi], after=WKp)
                hrgr.append(HRi)
            else:
                _move_segments(rec, sm, [Qm], after=qms[-1])
                _move_segments(rec, sm, [mid], after=hrgr[-1])
                hrgr.append(mid)
                _move_segments(rec, sm, [HRi], after=mid)
                hrgr.append(HRi)
            qms.append(Qm)
            if i < p:
                _move_segments(rec, sm, [PsRi], after=Qs[p])
            psrs.append(PsRi)

        shift_mirrored(rec, a_iv=win, b_iv=sm.iv(Fseg), c_iv=sm.iv(XW))
        GRp, FR = F("GRp"), F("FR")
        sm.replace([XW, Fseg], [(GRp, 2 * t + 1), (FR, f_len)])
        hrgr += [GRp, FR]

    l_names = Ls + ubrs + qms + [UT]
    w_names = [WKp] + hrgr
    b_names = list(reversed(psrs)) + stack + Bs
    r_names = ([rfront] if rfront not in Rs else []) + Rs
    expect = l_names + w_names + [win_seg] + b_names + r_names
    if sm.order != expect:
        raise ConstructionBug("final segment order is off: "
                              f"{sm.order} vs {expect}",
                              rec.annotation_stack())
    layout = StepLayout(
        L=sm.span(l_names[0], l_names[-1]),
        W=sm.span(w_names[0], w_names[-1]),
        A=win,
        B=sm.span(b_names[0], b_names[-1]),
        R=sm.span(r_names[0], r_names[-1]),
    )
    if env.deep_certify and depth > 0:
        _certify(env, layout, k, n, y_set, strict=env.strict)
    return layout


# ---------------------------------------------------------------------------
# Certificates.


def _certify(env, layout, k, n, y_set, strict=False):
    rec = env.rec
    t, T, d = env.t, env.T, env.d
    a_k = alpha_closed(t, T, d, k)
    b_k = beta_closed(T, d, k)
    certs = []

    def add(index, name, passed, detail=""):
        certs.append(Certificate(index, name, bool(passed), detail))

    add(1, "window placement", layout.A == (-t, t),
        f"A on {layout.A}")
    lv = rec.values(*layout.L) if not _empty(layout.L) else ()
    wv = rec.values(*layout.W)
    bv = rec.values(*layout.B)
    rv = rec.values(*layout.R)
    add(2, "sign separation",
        all(v > 0 for v in lv) and all(v > 0 for v in wv)
        and all(v < 0 for v in rv),
        "L, W > 0 > R")
    av = rec.values(*layout.A)
    if k > 0:
        ok3 = max(av) < min(bv)
        det3 = "A < B (k > 0)"
    else:
        ok3 = min(av) > max(bv)
        det3 = "A > B (k = 0)"
    add(3, "centre/B orientation", ok3, det3)
    add(4, "tail provenance", y_set is not None and set(wv) <= y_set,
        "W values all drawn from Y")
    m_final = d**k
    ok5 = len(wv) == m_final * (n + 1)
    det5 = f"|W| = {len(wv)}, m = {m_final}"
    if ok5:
        ks = [wv[i * n : (i + 1) * n] for i in range(m_final)]
        msing = wv[m_final * n :]
        # positional tail holds M_m .. M_1
        for kb in ks:
            if any(a <= b for a, b in zip(kb, kb[1:])):
                ok5 = False
                det5 = "a K piece is not decreasing"
                break
        if ok5:
            for j in range(m_final, 0, -1):
                mi = msing[m_final - j]
                if not (mi < min(ks[j - 1])):
                    ok5 = False
                    det5 = f"M_{j} not below K_{j}"
                    break
                if j > 1 and not (mi > max(ks[j - 2])):
                    ok5 = False
                    det5 = f"M_{j} not above K_{j-1}"
                    break
    add(5, "tail shape", ok5, det5)
    bpos = Block(v for v in bv if v > 0)
    wplus = width(bpos) if len(bpos) else 0
    add(6, "positive width bound", wplus <= a_k,
        f"width(B+) = {wplus} <= alpha_{k} = {a_k}")
    nneg = sum(1 for v in bv if v < 0)
    add(7, "negative count bound", nneg >= b_k,
        f"|B-| = {nneg} >= beta_{k} = {b_k}")
    ratio = Fraction(b_k, a_k)
    rep = is_r_balanced(Block(bv), ratio)
    add(8, "balancedness", rep.balanced,
        f"B is {ratio}-balanced" if rep.balanced else rep.detail)

    if strict and not all(c.passed for c in certs):
        bad = [c for c in certs if not c.passed]
        raise ConstructionBug(
            "certificates failed: " + "; ".join(f"({c.index}) {c.name}: "
                                                f"{c.detail}" for c in bad),
            rec.annotation_stack())
    return certs


def recursive_step(tr: TraceRecorder, d: int, k: int, n: int,
                   deep_certify: bool = False,
                   strict_certificates: bool = True) -> StepOutcome:
    """Run the growth step on a trace whose state is X ^ centre ^ Y with
    the planner's sizes for (t, d, k, n).  All eight result conditions are
    certified on the concrete final state; a failed certificate raises
    unless strict_certificates is off, in which case the outcome carries
    the failure list for inspection."""
    t = tr.t
    T = 3 ** (2 * t)
    if d < 9 * T:
        raise ContractError(f"need d >= 9T = {9 * T}, got {d}")
    if k < 0 or n < 1:
        raise ContractError("need k >= 0 and n >= 1")
    env = _StepEnv(tr, d, deep_certify=deep_certify,
                   strict=strict_certificates)
    x = env.plan.x(n, k)
    y = env.plan.y(n, k)
    x_iv = (-t - x, -t - 1)
    y_iv = (t + 1, t + y)
    if not (tr.lo <= x_iv[0] and y_iv[1] <= tr.hi):
        raise ContractError("trace domain does not fit the planned X and Y")
    flips_before = tr.flip_count
    y_set = set(tr.values(*y_iv))
    with tr.annotate(f"recursive step t={t} d={d} k={k} n={n}"):
        layout = _rstep(env, k, n, x_iv, y_iv, depth=0)
    certs = _certify(env, layout, k, n, y_set, strict=strict_certificates)
    sizes = layout.region_sizes()
    if sizes["L"] + sizes["W"] != x or sizes["B"] + sizes["R"] != y:
        raise ConstructionBug("result regions do not tile X and Y",
                              tr.annotation_stack())
    return StepOutcome(layout=layout, certificates=certs, x_size=x, y_size=y,
                       flip_count=tr.flip_count - flips_before, recorder=tr)


# ---------------------------------------------------------------------------
# Ready-made instances (symmetric domains so deviation is measured from 0).


def step_instance(t: int, d: int, k: int, n: int, sink=None,
                  paranoid: bool = False) -> TraceRecorder:
    """A trace holding X ^ centre ^ Y for the growth step, embedded in a
    symmetric domain.  The centre carries values t+1 .. 3t+1 (zero stays
    out of every sign-split zone), X and Y are identity-like runs."""
    plan = SizePlan(t, d)
    x, y = plan.x(n, k), plan.y(n, k)
    M = t + max(x, y) + 1
    vals = []
    for pos in range(-M, M + 1):
        vals.append(pos if pos < -t else pos + 2 * t + 1)
    rec = TraceRecorder(CentredSequence(-M, vals), Window(t), sink=sink,
                        paranoid=paranoid)
    return rec


def shift_instance(t: int, n: int, sink=None, decreasing_c: bool = False):
    """A trace laid out as A ^ B ^ C for shifting, symmetric domain.
    Returns (recorder, a_iv, b_iv, c_iv)."""
    c = 2 * t + 1
    M = t + n + c
    vals = list(range(-M, M + 1))
    if decreasing_c:
        i = M + t + n + 1
        vals[i : i + c] = reversed(vals[i : i + c])
    rec = TraceRecorder(CentredSequence(-M, vals), Window(t), sink=sink)
    return rec, (-t, t), (t + 1, t + n), (t + n + 1, t + n + c)


def reflect_instance(t: int, n: int, xsize: int, sink=None,
                     mirrored: bool = False):
    """A trace laid out as X ^ A ^ B ^ C (or its mirror image) for
    reflection.  Returns (recorder, x_iv, a_iv, b_iv, c_iv)."""
    M = t + max(xsize, n + xsize) + 1
    vals = list(range(-M, M + 1))
    rec = TraceRecorder(CentredSequence(-M, vals), Window(t), sink=sink)
    if not mirrored:
        return rec, (-t - xsize, -t - 1), (-t, t), (t + 1, t + n), \
            (t + n + 1, t + n + xsize)
    return rec, (t + 1, t + xsize), (-t, t), (-t - n, -t - 1), \
        (-t - n - xsize, -t - n - 1)


# ---------------------------------------------------------------------------
# The full pipeline.


@dataclass
class ConstructionFailure:
    """Structured failure value: the pipeline refused to proceed."""

    stage: str
    achieved: object          # Fraction or (lower, upper) bounds
    required: Fraction
    message: str
    table: Optional[RecurrenceTable] = None

    def __bool__(self):
        return False


def _finish_pipeline(rec, t, T, layout, xprime_iv, j_iv, r):
    """From X' ^ L ^ W ^ A ^ B ^ R (J parked at the far right) to the full
    reversal: decompose B, reflect each positive piece across the window,
    bring J back to the centre, and sort both sides decreasing."""
    b_iv = layout.B
    block = Block(rec.values(*b_iv))
    dec = decompose_balanced(block, r)
    with rec.annotate("apply decomposition"):
        for c in dec.schedule:
            rec.emit_flip(b_iv[0] + c - 1, b_iv[0] + c)
    sm = SegmentMap(b_iv[0], [(f"C{i}", len(blk))
                              for i, blk in enumerate(dec.blocks, start=1)])
    mcount = dec.k
    # Carve Z (the top 3^(2t) negatives) out of the last piece.
    last = f"C{mcount}"
    lastv = rec.values(*sm.iv(last))
    nneg = sum(1 for v in lastv if v < 0)
    if nneg < 2 * T + 4 * t + 2:
        raise ConstructionBug("last piece too negative-poor to carve Z",
                              rec.annotation_stack())
    zname = "Z"
    sm.split(last, [(last + "a", nneg - T), (zname, T),
                    (last + "b", len(lastv) - nneg)])
    _move_segments(rec, sm, [zname], after=last + "b")
    sm.replace([last + "a", last + "b"], [(last, len(lastv) - T)])

    pnames = []
    cursor = xprime_iv[1]
    for i in range(1, mcount + 1):
        ci = f"C{i}"
        civ = rec.values(*sm.iv(ci))
        neg = sum(1 for v in civ if v < 0)
        fsize = len(civ) - neg
        if neg < T + 4 * t + 2:
            raise ConstructionBug(f"piece {i} has too few negatives ({neg})",
                                  rec.annotation_stack())
        if fsize == 0:
            raise ConstructionBug(f"piece {i} has no positive values",
                                  rec.annotation_stack())
        if cursor - fsize + 1 < xprime_iv[0]:
            raise ConstructionBug("X' exhausted before the last piece",
                                  rec.annotation_stack())
        with rec.annotate(f"carry piece {i} across"):
            x_i = (cursor - fsize + 1, cursor)
            cursor -= fsize
            rec.move_block_right(x_i, -t - 1)
            x_i = (-t - fsize, -t - 1)
            clo = sm.iv(ci)[0]
            reflect(rec, x_i, (-t, t), (clo, clo + neg - 1),
                    (clo + neg, clo + neg + fsize - 1))
            # The window now holds the top 2t+1 negatives of the piece
            # reversed; F-bar landed on the X_i span; P_i fills the piece.
            pname = f"P{i}"
            sm.replace([ci], [(pname, len(civ))])
            if i < mcount:
                _move_segments(rec, sm, [pname], after=f"C{mcount}")
            pnames.insert(0, pname)
    if cursor != xprime_iv[0] - 1:
        raise ConstructionBug("X' size does not match the positive total",
                              rec.annotation_stack())

    with rec.annotate("recentre the parked piece"):
        # State right of the window: P_m .. P_1 ^ Z ^ R ^ J.
        jlen = _ivlen(j_iv)
        rec.move_block_left(sm.iv(zname), t + 1)
        # J leftward over R and the P pieces, landing right of Z.
        rec.swap_adjacent_blocks((t + 1 + T, j_iv[0] - 1), j_iv)
        shift(rec, (-t, t), (t + 1, t + T), (t + T + 1, t + T + jlen))

    with rec.annotate("final sorts"):
        rec.sort_region_decreasing((rec.lo, -t - 1))
        rec.sort_region_decreasing((t + 1, rec.hi))


def full_construction(t: int, d: int, k: int, *, max_cells: int = 10**8,
                      sink=None):
    """Build a complete trace from the identity on [-b, b] to its reversal
    with every flip midpoint outside [-t, t], for b = 3t + 1 + |Y|.

    The planned balance ratio beta_k/alpha_k must reach 3T + 1 before any
    materialization starts; otherwise the structured failure names the
    stage and the exact achieved ratio.  A feasible ratio with an
    infeasible cell count raises RefusalError."""
    T = 3 ** (2 * t)
    if d < 9 * T:
        raise ContractError(f"need d >= 9T = {9 * T}, got {d}")
    table = plan_sizes(t, d, k, 1)
    required = Fraction(3 * T + 1)
    if not table.gate_ok:
        achieved = table.ratio if table.ratio is not None else table.ratio_bounds
        return ConstructionFailure(
            stage="balance gate",
            achieved=achieved,
            required=required,
            message=(f"beta_{k}/alpha_{k} = {achieved} is below the required "
                     f"ratio {required}; pick larger d and k"),
            table=table,
        )
    if table.cells is None or table.cells > max_cells:
        size = table.cells if table.cells is not None else "astronomical"
        raise RefusalError(f"materialization needs {size} cells "
                           f"(limit {max_cells})")

    y = table.y_exact
    x = table.x_exact
    b = 3 * t + 1 + y
    rec = TraceRecorder(identity_sequence(-b, b), Window(t), sink=sink)
    with rec.annotate(f"full construction t={t} d={d} k={k}"):
        rec.emit_flip(-t, 3 * t + 1)
        # Park the piece now on [t+1, 3t+1] beyond Y.
        rec.swap_adjacent_blocks((t + 1, 3 * t + 1), (3 * t + 2, b))
        env = _StepEnv(rec, d)
        x_iv = (-t - x, -t - 1)
        y_iv = (t + 1, t + y)
        y_set = set(rec.values(*y_iv))
        layout = _rstep(env, k, 1, x_iv, y_iv, depth=0)
        _certify(env, layout, k, 1, y_set, strict=True)
        r = Fraction(beta_closed(T, d, k), alpha_closed(t, T, d, k))
        xprime_iv = (-b, -t - x - 1)
        j_iv = (b - 2 * t, b)
        _finish_pipeline(rec, t, T, layout, xprime_iv, j_iv, r)
    final = rec.values(rec.lo, rec.hi)
    if list(final) != list(range(b, -b - 1, -1)):
        raise ConstructionBug("pipeline did not reach the reversal",
                              rec.annotation_stack())
    return rec
