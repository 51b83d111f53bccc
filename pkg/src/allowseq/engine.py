"""Flip-trace recording and independent verification.

A TraceRecorder holds the evolving sequence and emits flips, either one at
a time (each validated against the current state and the window) or as
pre-validated batches produced by composite moves such as adjacent block
swaps.  Batches keep big runs cheap: a swap of blocks of sizes a and b is
a*b transpositions, but the recorder checks the one precondition that
makes them all valid (left block entirely below right block, region clear
of the window) and then applies the move as a single splice.

Sinks decide what to keep.  ListSink retains every step for replay and
serialization, FileSink streams steps to a text file, StatsSink keeps
only aggregates.  The recorder always tracks flip count and minimum
deviation itself, so even a stats-only run reports both.

verify_trace is deliberately independent of the recorder: it re-applies
steps with its own reversal code and re-derives validity, deviation and
the reversal check from scratch, holding only the current sequence.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

from .errors import ConstructionBug, ContractError, RangeError
from .seqcore import Block, CentredSequence, Flip, Window, _strictly_increasing

INF = float("inf")


@dataclass(frozen=True)
class FlipStep:
    """One or more pairwise disjoint flips applied simultaneously."""

    flips: tuple

    def __init__(self, flips: Iterable[Flip]):
        fs = tuple(sorted(flips, key=lambda f: f.c))
        if not fs:
            raise ContractError("a step needs at least one flip")
        for a, b in zip(fs, fs[1:]):
            if a.d >= b.c:
                raise ContractError(f"flips [{a.c},{a.d}] and [{b.c},{b.d}] overlap")
        object.__setattr__(self, "flips", fs)


@dataclass(frozen=True)
class Trace:
    """A finished, immutable flip trace."""

    window: Window
    initial: CentredSequence
    steps: tuple
    annotations: tuple = ()

    @property
    def t(self) -> int:
        return self.window.t


def _deviation(c: int, d: int, centre2: int) -> Fraction:
    return Fraction(abs(c + d - centre2), 2)


class ListSink:
    """Retains every step; supports conversion to a Trace."""

    def __init__(self):
        self.steps = []

    def on_step(self, flips):
        self.steps.append(FlipStep([Flip(c, d) for c, d in flips]))

    def on_transpositions(self, pairs):
        for c, d in pairs:
            self.steps.append(FlipStep([Flip(c, d)]))


class StatsSink:
    """Keeps nothing; the recorder's own aggregates are the record."""

    steps = None

    def on_step(self, flips):
        pass

    def on_transpositions(self, pairs):
        # The batch generators are lazy; aggregates come from the recorder.
        pass


class FileSink:
    """Streams a whole trace file to an open text handle: the header as
    soon as the recorder announces its initial state, then step and
    annotation lines as they happen."""

    steps = None

    def __init__(self, fh):
        self.fh = fh

    def begin(self, initial, window):
        self.fh.write("ALLOWSEQ v1\n")
        self.fh.write(f"t={window.t} lo={initial.lo} hi={initial.hi}\n")
        self.fh.write(" ".join(str(v) for v in initial.values) + "\n")

    def on_step(self, flips):
        flips = list(flips)
        if len(flips) == 1:
            c, d = flips[0]
            self.fh.write(f"F {c} {d}\n")
        else:
            parts = " ".join(f"{c} {d}" for c, d in flips)
            self.fh.write(f"S {parts}\n")

    def on_transpositions(self, pairs):
        write = self.fh.write
        for c, d in pairs:
            write(f"F {c} {d}\n")

    def on_annotation(self, depth, label):
        self.fh.write(f"# {depth} {label}\n")


class TraceRecorder:
    """Single-writer trace builder over a mutable current state."""

    def __init__(self, initial: CentredSequence, window: Window, sink=None,
                 paranoid: bool = False):
        self.initial = initial
        self.window = window
        self.lo = initial.lo
        self.hi = initial.hi
        self._vals = list(initial.values)
        self._centre2 = initial.lo + initial.hi
        self.sink = ListSink() if sink is None else sink
        if hasattr(self.sink, "begin"):
            self.sink.begin(initial, window)
        self.paranoid = paranoid
        self.flip_count = 0
        self.step_count = 0
        self.min_deviation: Optional[Fraction] = None
        self._ann_stack = []
        self.annotations = []

    # -- state access ------------------------------------------------

    @property
    def t(self) -> int:
        return self.window.t

    def value_at(self, pos: int) -> int:
        if not self.lo <= pos <= self.hi:
            raise RangeError(f"position {pos} outside [{self.lo}, {self.hi}]")
        return self._vals[pos - self.lo]

    def values(self, lo: int, hi: int) -> tuple:
        """Inclusive slice by positions; empty when lo > hi."""
        if lo > hi:
            return ()
        if not (self.lo <= lo and hi <= self.hi):
            raise RangeError(f"interval [{lo}, {hi}] outside [{self.lo}, {self.hi}]")
        return tuple(self._vals[lo - self.lo : hi - self.lo + 1])

    def current(self) -> CentredSequence:
        return CentredSequence(self.lo, self._vals)

    def to_trace(self) -> Trace:
        if not isinstance(self.sink, ListSink):
            raise ContractError("only ListSink recorders can produce a Trace")
        return Trace(self.window, self.initial, tuple(self.sink.steps),
                     tuple(self.annotations))

    # -- annotation stack ----------------------------------------------

    @contextmanager
    def annotate(self, label: str):
        start = self.step_count
        depth = len(self._ann_stack) + 1
        self._ann_stack.append(label)
        if hasattr(self.sink, "on_annotation"):
            self.sink.on_annotation(depth, "begin " + label)
        try:
            yield
        finally:
            self._ann_stack.pop()
            if hasattr(self.sink, "on_annotation"):
                self.sink.on_annotation(depth, "end " + label)
            # Scopes that emitted nothing leave no mark; this keeps the
            # serialized form free of same-position open/close pairs.
            if self.step_count > start:
                self.annotations.append((start, self.step_count, depth, label))

    def annotation_stack(self) -> tuple:
        return tuple(self._ann_stack)

    def _bug(self, message, flip=None):
        raise ConstructionBug(message, self.annotation_stack(), flip)

    # -- primitive emission --------------------------------------------

    def _track(self, c: int, d: int):
        dev = _deviation(c, d, self._centre2)
        if self.min_deviation is None or dev < self.min_deviation:
            self.min_deviation = dev
        self.flip_count += 1
        self.step_count += 1

    def emit_flip(self, c: int, d: int):
        """Validate and apply a single flip as its own step."""
        if not (self.lo <= c <= d <= self.hi):
            self._bug(f"flip [{c}, {d}] out of bounds", (c, d))
        i, j = c - self.lo, d - self.lo + 1
        run = self._vals[i:j]
        if not _strictly_increasing(run):
            self._bug(f"flip [{c}, {d}] is not an increasing run", (c, d))
        if abs(c + d) <= 2 * self.window.t:
            self._bug(f"flip [{c}, {d}] has midpoint inside the window", (c, d))
        self._vals[i:j] = run[::-1]
        self._track(c, d)
        self.sink.on_step([(c, d)])

    def emit_step(self, step: FlipStep):
        """Apply several disjoint flips as one step (all validated first)."""
        for f in step.flips:
            if not (self.lo <= f.c and f.d <= self.hi):
                self._bug(f"flip [{f.c}, {f.d}] out of bounds", (f.c, f.d))
            run = self._vals[f.c - self.lo : f.d - self.lo + 1]
            if not _strictly_increasing(run):
                self._bug(f"flip [{f.c}, {f.d}] is not an increasing run", (f.c, f.d))
            if not self.window.clears(f):
                self._bug(f"flip [{f.c}, {f.d}] has midpoint inside the window",
                          (f.c, f.d))
        for f in step.flips:
            i, j = f.c - self.lo, f.d - self.lo + 1
            self._vals[i:j] = self._vals[i:j][::-1]
            dev = _deviation(f.c, f.d, self._centre2)
            if self.min_deviation is None or dev < self.min_deviation:
                self.min_deviation = dev
            self.flip_count += 1
        self.step_count += 1
        self.sink.on_step([(f.c, f.d) for f in step.flips])

    # -- batched transposition runs --------------------------------------

    def _window_clear_region(self, lo: int, hi: int) -> bool:
        """True iff every adjacent transposition inside [lo, hi] clears the
        window: no i in [lo, hi-1] has its midpoint i + 1/2 inside [-t, t],
        which happens exactly for i in [-t, t-1]."""
        t = self.window.t
        if lo >= hi:
            return True
        return hi - 1 < -t or lo > t - 1

    def _batch(self, pairs_iter, count: int, lo: int, hi: int):
        """Record `count` transpositions spanning positions [lo, hi]."""
        if count == 0:
            return
        # Transposition midpoints (doubled) are the odd values 2i+1 for
        # i in [lo, hi-1]; find the one closest to the doubled centre.
        c2 = self._centre2
        if c2 <= 2 * lo + 1:
            dev = Fraction(2 * lo + 1 - c2, 2)
        elif c2 >= 2 * hi - 1:
            dev = Fraction(c2 - (2 * hi - 1), 2)
        else:
            dev = Fraction(0) if c2 % 2 else Fraction(1, 2)
        if self.min_deviation is None or dev < self.min_deviation:
            self.min_deviation = dev
        self.flip_count += count
        self.step_count += count
        self.sink.on_transpositions(pairs_iter)

    @staticmethod
    def _swap_pairs(lo: int, a: int, b: int) -> Iterator[tuple]:
        """Canonical schedule for swapping adjacent blocks of sizes a, b at
        position lo: each right element bubbles leftward, flips emitted at
        the rightmost position first."""
        for j in range(b):
            for i in range(lo + a + j, lo + j, -1):
                yield (i - 1, i)

    def swap_adjacent_blocks(self, left: tuple, right: tuple):
        """Exchange two adjacent blocks, left values all below right values.

        Intervals are inclusive (lo, hi); an empty side is a no-op.
        """
        llo, lhi = left
        rlo, rhi = right
        a = lhi - llo + 1
        b = rhi - rlo + 1
        if a <= 0 or b <= 0:
            return
        if lhi + 1 != rlo:
            self._bug(f"blocks [{llo},{lhi}] and [{rlo},{rhi}] are not adjacent")
        lv = self.values(llo, lhi)
        rv = self.values(rlo, rhi)
        if max(lv) >= min(rv):
            self._bug(f"cannot swap: [{llo},{lhi}] does not precede [{rlo},{rhi}]")
        if not self._window_clear_region(llo, rhi):
            self._bug(f"swap over [{llo},{rhi}] would cross the window")
        if self.paranoid:
            for c, d in self._swap_pairs(llo, a, b):
                self.emit_flip(c, d)
            return
        i, j, k = llo - self.lo, rlo - self.lo, rhi - self.lo + 1
        self._vals[i:k] = self._vals[j:k] + self._vals[i:j]
        self._batch(self._swap_pairs(llo, a, b), a * b, llo, rhi)

    def move_value_right(self, pos: int, dest: int):
        """Bubble the single element at pos rightward to dest."""
        if dest == pos:
            return
        self.swap_adjacent_blocks((pos, pos), (pos + 1, dest))

    def move_block_left(self, block: tuple, dest_lo: int):
        """Move block leftward so it starts at dest_lo (crossed cells must
        all be below the block's values)."""
        blo, bhi = block
        if dest_lo == blo:
            return
        if dest_lo > blo:
            raise ContractError("move_block_left must move left")
        self.swap_adjacent_blocks((dest_lo, blo - 1), (blo, bhi))

    def move_block_right(self, block: tuple, dest_hi: int):
        blo, bhi = block
        if dest_hi == bhi:
            return
        if dest_hi < bhi:
            raise ContractError("move_block_right must move right")
        self.swap_adjacent_blocks((blo, bhi), (bhi + 1, dest_hi))

    def sort_region_decreasing(self, region: tuple):
        """Sort region into strictly decreasing order by repeatedly flipping
        maximal increasing runs.  Each flip is validated individually."""
        rlo, rhi = region
        if rlo >= rhi:
            return
        while True:
            vals = self.values(rlo, rhi)
            runs = []
            start = 0
            n = len(vals)
            for i in range(1, n + 1):
                if i == n or vals[i] < vals[i - 1]:
                    if i - start >= 2:
                        runs.append((rlo + start, rlo + i - 1))
                    start = i
            if not runs:
                return
            for c, d in runs:
                self.emit_flip(c, d)

    def rearrange_region(self, region: tuple, target: Sequence[int]):
        """Reorder region into the given value sequence using rightward
        element journeys (every crossed element must exceed the mover)."""
        rlo, rhi = region
        cur = list(self.values(rlo, rhi))
        tgt = list(target)
        if sorted(cur) != sorted(tgt):
            self._bug("rearrange target is not a permutation of the region")
        # Work right-to-left: place the rightmost outstanding target value by
        # bubbling it right; everything it crosses is target-left of it.
        placed = rhi + 1
        for v in reversed(tgt):
            idx = rlo + cur.index(v)
            if idx == placed - 1:
                placed -= 1
                continue
            self.move_value_right(idx, placed - 1)
            cur.pop(idx - rlo)
            cur.insert(placed - 1 - rlo, v)
            placed -= 1


# -- independent verification ------------------------------------------


@dataclass(frozen=True)
class VerificationReport:
    allowable: bool
    all_valid: bool
    reaches_reversal: bool
    min_deviation: object  # Fraction, or inf when no flips
    step_count: int
    flip_count: int
    first_violation: Optional[tuple] = None  # (step index, (c, d), reason)


def verify_stream(initial: CentredSequence, window: Window,
                  steps: Iterable) -> VerificationReport:
    """Replay steps from scratch and report what actually holds.

    Violations are reported, never raised.  Memory stays O(sequence
    length): one pass, one working copy of the state.
    """
    lo, hi = initial.lo, initial.hi
    vals = list(initial.values)
    centre2 = lo + hi
    t = window.t
    allowable = True
    all_valid = True
    first_violation = None
    min_dev = None
    steps_n = 0
    flips_n = 0

    def violate(idx, flip, reason):
        nonlocal allowable, all_valid, first_violation
        allowable = False
        all_valid = False
        if first_violation is None:
            first_violation = (idx, flip, reason)

    for idx, step in enumerate(steps):
        flips = sorted(step.flips, key=lambda f: f.c) if isinstance(step, FlipStep) \
            else sorted(step, key=lambda f: f.c)
        steps_n += 1
        prev_d = None
        for f in flips:
            flips_n += 1
            if not (lo <= f.c <= f.d <= hi):
                violate(idx, (f.c, f.d), "out of bounds")
                continue
            if prev_d is not None and f.c <= prev_d:
                violate(idx, (f.c, f.d), "overlapping flips in one step")
            prev_d = f.d
            i, j = f.c - lo, f.d - lo + 1
            run = vals[i:j]
            if any(a >= b for a, b in zip(run, run[1:])):
                violate(idx, (f.c, f.d), "run not strictly increasing")
            if abs(f.c + f.d) <= 2 * t and all_valid:
                all_valid = False
                if first_violation is None:
                    first_violation = (idx, (f.c, f.d), "midpoint inside window")
            dev = _deviation(f.c, f.d, centre2)
            if min_dev is None or dev < min_dev:
                min_dev = dev
            vals[i:j] = run[::-1]

    reaches = vals == list(reversed(initial.values))
    return VerificationReport(
        allowable=allowable,
        all_valid=all_valid and allowable,
        reaches_reversal=reaches,
        min_deviation=min_dev if min_dev is not None else INF,
        step_count=steps_n,
        flip_count=flips_n,
        first_violation=first_violation,
    )


def verify_trace(tr) -> VerificationReport:
    """Verify a Trace, or a ListSink-backed recorder."""
    if isinstance(tr, TraceRecorder):
        tr = tr.to_trace()
    return verify_stream(tr.initial, tr.window, tr.steps)


def min_deviation(tr) -> Fraction:
    """Minimum |flip midpoint - domain centre| over all flips of a trace."""
    if isinstance(tr, TraceRecorder):
        if tr.flip_count == 0:
            raise ContractError("trace has no flips")
        return tr.min_deviation
    if not tr.steps:
        raise ContractError("trace has no flips")
    centre2 = tr.initial.lo + tr.initial.hi
    return min(_deviation(f.c, f.d, centre2) for s in tr.steps for f in s.flips)


def flip_imbalance(n: int, f: Flip) -> int:
    """For a flip [c, d] on the domain [1, n]: the difference between the
    point counts strictly before c and strictly after d."""
    if not (1 <= f.c <= f.d <= n):
        raise RangeError(f"flip [{f.c}, {f.d}] outside [1, {n}]")
    return abs(n - f.d - f.c + 1)


def new_trace(initial: CentredSequence, window: Window, sink=None,
              paranoid: bool = False) -> TraceRecorder:
    return TraceRecorder(initial, window, sink=sink, paranoid=paranoid)
