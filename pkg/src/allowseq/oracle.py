"""Brute-force oracles and exhaustive search over small state spaces.

Everything here is deliberately independent of the engine and the
constructive procedures: widths by dynamic programming and by full
subsequence enumeration, allowability by diffing consecutive
permutations, and the best achievable minimum deviation by exhaustive
threshold-indexed reachability.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Optional

from .engine import INF, FlipStep
from .errors import ContractError, RefusalError
from .seqcore import Block, CentredSequence, Flip

SEARCH_GUARD = 8
DEFAULT_SEED = 20240513


def width_dp(b: Block) -> int:
    """Longest strictly decreasing subsequence by the quadratic DP."""
    vals = b.values
    best = []
    for i, v in enumerate(vals):
        longest = 1
        for j in range(i):
            if vals[j] > v and best[j] + 1 > longest:
                longest = best[j] + 1
        best.append(longest)
    return max(best, default=0)


def width_enumerate(b: Block) -> int:
    """Width by trying every subsequence; only sane for tiny blocks."""
    vals = b.values
    if len(vals) > 12:
        raise RefusalError("full enumeration beyond size 12 is pointless")
    best = 0
    for size in range(len(vals), 0, -1):
        for idxs in combinations(range(len(vals)), size):
            seq = [vals[i] for i in idxs]
            if all(a > b2 for a, b2 in zip(seq, seq[1:])):
                return size
    return best


def allowability_bruteforce(steps: Iterable, initial: CentredSequence) -> bool:
    """Re-derive every transition from the permutations themselves.

    Applies the declared steps to produce the state sequence, then checks
    each consecutive pair independently: the changed cells must decompose
    into disjoint reversed runs that were increasing beforehand.  Declared
    flip lists are never trusted for the check itself.
    """
    lo = initial.lo
    states = [list(initial.values)]
    for step in steps:
        nxt = list(states[-1])
        for f in step.flips:
            i, j = f.c - lo, f.d - lo + 1
            if i < 0 or j > len(nxt):
                return False
            nxt[i:j] = nxt[i:j][::-1]
        states.append(nxt)
    for old, new in zip(states, states[1:]):
        pos_of = {v: i for i, v in enumerate(old)}
        i = 0
        n = len(old)
        while i < n:
            if old[i] == new[i]:
                i += 1
                continue
            j = pos_of[new[i]]
            if j <= i:
                return False
            seg_old = old[i : j + 1]
            if seg_old != new[i : j + 1][::-1]:
                return False
            if any(a >= b for a, b in zip(seg_old, seg_old[1:])):
                return False
            i = j + 1
    return True


@dataclass(frozen=True)
class SearchResult:
    n: int
    best_min_deviation: object    # Fraction, or INF when no flip is needed
    witness: tuple                # FlipSteps from the identity to the reversal
    states_explored: int

    def to_text(self) -> str:
        bd = self.best_min_deviation
        if bd == INF:
            head = f"{self.n} inf {self.states_explored}"
        else:
            head = f"{self.n} {bd.numerator}/{bd.denominator} {self.states_explored}"
        lines = [head]
        for step in self.witness:
            parts = " ".join(f"{f.c} {f.d}" for f in step.flips)
            lines.append(("F " if len(step.flips) == 1 else "S ") + parts)
        return "\n".join(lines) + "\n"


def _valid_flips(perm):
    """All intervals [c, d], c < d, whose run is strictly increasing
    (1-based positions)."""
    n = len(perm)
    res = []
    for c in range(n):
        for d in range(c + 1, n):
            if perm[d] <= perm[d - 1]:
                break
            res.append((c + 1, d + 1))
    return res


def _apply(perm, c, d):
    return perm[: c - 1] + tuple(reversed(perm[c - 1 : d])) + perm[d:]


def search_best_deviation(n: int, mode: str = "single",
                          force: bool = False) -> SearchResult:
    """Exhaustively maximize, over allowable sequences on [1, n], the
    minimum deviation |flip midpoint - (n+1)/2| along the way.

    Threshold-indexed reachability: for each candidate threshold q, walk
    the graph using only flips with deviation >= q and test whether the
    reversal is reachable.  A compound step applies its disjoint flips one
    at a time without changing any of their deviations, so single-flip
    reachability decides both modes; multi mode merely merges compatible
    consecutive flips in the reported witness.
    """
    if mode not in ("single", "multi"):
        raise ContractError(f"unknown mode {mode!r}")
    if n < 1:
        raise ContractError("need n >= 1")
    if n > SEARCH_GUARD and not force:
        raise RefusalError(
            f"n = {n} exceeds the guard {SEARCH_GUARD}; pass force to override")
    identity = tuple(range(1, n + 1))
    goal = tuple(range(n, 0, -1))
    if identity == goal:
        return SearchResult(n, INF, (), 1)
    centre2 = n + 1
    thresholds = sorted({Fraction(abs(c + d - centre2), 2)
                         for c in range(1, n + 1)
                         for d in range(c + 1, n + 1)}, reverse=True)
    for q in thresholds:
        parent = {identity: None}
        frontier = [identity]
        found = False
        while frontier and not found:
            nxt = []
            for perm in frontier:
                for c, d in _valid_flips(perm):
                    if Fraction(abs(c + d - centre2), 2) < q:
                        continue
                    child = _apply(perm, c, d)
                    if child in parent:
                        continue
                    parent[child] = (perm, (c, d))
                    if child == goal:
                        found = True
                        break
                    nxt.append(child)
                if found:
                    break
            frontier = nxt
        if found:
            flips = []
            cur = goal
            while parent[cur] is not None:
                prev, cd = parent[cur]
                flips.append(cd)
                cur = prev
            flips.reverse()
            steps = _witness_steps(identity, flips, mode)
            return SearchResult(n, q, tuple(steps), len(parent))
    raise ContractError("no threshold admits the reversal; impossible")


def _witness_steps(identity, flips, mode):
    if mode == "single":
        return [FlipStep([Flip(c, d)]) for c, d in flips]
    # Merge consecutive flips into one step while they are pairwise
    # disjoint and each run was increasing in the state before the step.
    steps = []
    state = identity
    group = []

    def run_ok(c, d):
        seg = state[c - 1 : d]
        return all(a < b for a, b in zip(seg, seg[1:]))

    def flush():
        nonlocal state, group
        if group:
            steps.append(FlipStep([Flip(c, d) for c, d in group]))
            for c, d in group:
                state = _apply(state, c, d)
            group = []

    for c, d in flips:
        clash = any(not (d < c2 or d2 < c) for c2, d2 in group)
        if clash or not run_ok(c, d):
            flush()
        group.append((c, d))
    flush()
    return steps


def reachable_states(n: int, min_deviation=Fraction(0)) -> int:
    """Count permutations reachable from the identity using valid flips of
    at least the given deviation; the direct reachability baseline."""
    identity = tuple(range(1, n + 1))
    centre2 = n + 1
    seen = {identity}
    frontier = [identity]
    while frontier:
        nxt = []
        for perm in frontier:
            for c, d in _valid_flips(perm):
                if Fraction(abs(c + d - centre2), 2) < min_deviation:
                    continue
                child = _apply(perm, c, d)
                if child not in seen:
                    seen.add(child)
                    nxt.append(child)
        frontier = nxt
    return len(seen)


def sample_balanced_block(size: int, r, seed: int = DEFAULT_SEED) -> Block:
    """A deterministic r-balanced block: an increasing negative backbone
    interleaved with descending chains of positive runs, each prefix
    keeping at least r * width of negatives ahead of it."""
    r = Fraction(r)
    if r < 0:
        raise ContractError("r must be >= 0")
    if size < 1:
        raise ContractError("need size >= 1")
    rng = random.Random(seed)
    need = int(r) if r == int(r) else int(r) + 1  # ceil
    if size <= need:
        # Not enough room for any positive chain: all-negative block.
        vals = sorted(rng.sample(range(-8 * size, 0), size))
        return Block(vals)
    k = rng.randint(1, max(1, min(size // (need + 1), 6)))
    chain_sizes = []
    budget = size - k * need
    for j in range(k):
        take = rng.randint(1, max(1, budget - (k - j - 1)))
        chain_sizes.append(take)
        budget -= take
    neg_total = size - sum(chain_sizes)
    neg_sizes = [need] * k
    spare = neg_total - k * need
    while spare > 0:
        add = rng.randint(0, spare)
        neg_sizes[rng.randrange(k)] += add
        spare -= add
    negs = sorted(rng.sample(range(-10 * size, 0), neg_total))
    # Positive chains live in disjoint descending value bands, so every
    # later chain deepens the width by exactly one.
    band = 2 * size
    chains = []
    for j, cs in enumerate(chain_sizes):
        hi = (k - j) * band
        chains.append(sorted(rng.sample(range(hi - band + 1, hi + 1), cs)))
    out = []
    ni = 0
    for j in range(k):
        out.extend(negs[ni : ni + neg_sizes[j]])
        ni += neg_sizes[j]
        out.extend(chains[j])
    return Block(out)
