"""Exact arithmetic for the construction's recurrences.

Everything here is integer or Fraction arithmetic; nothing is ever
floated.  The recurrences:

  alpha_0 = T + 4t + 2            alpha_{i+1} = d*alpha_i + 2*T*d^i + d
  beta_0  = 0                     beta_{i+1}  = d*beta_i + d^{i+1}/(3T)
  alpha'_l = 2*d^l*T + d          beta'_l     = d^{l+1}/(3T)

with T = 3^(2t), closed forms

  alpha_k = alpha_0*d^k + 2*T*k*d^(k-1) + d*(d^k - 1)/(d - 1)
  beta_k  = k*d^k/(3T)

and the shifting thresholds N_t = 0, N_k = 2*(N_{k+1} + t - k).

The materialization sizes follow

  x(n, 0) = n + 1                  y(n, 0) = T + 4t + 3 + n
  x(n, k) = d*x(n+1, k-1) + p_k + 2t + 1
  y(n, k) = d*y(n+1, k-1) + m_k*(T + d + 4t + 2) + p_k

with m_k = d^(k-1) and p_k = floor((d^k - T) / (T + 4t + 2)).

For parameter points where d^k would have millions of digits the planner
still certifies the balance-ratio gate beta_k/alpha_k >= 3T + 1 through
rigorous two-sided bounds obtained by dropping the vanishing d^(1-k) term
of the closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import ContractError

# Beyond these decimal-digit budgets the closed forms switch to rigorous
# bounding, so no astronomic integer is ever built and no gcd ever runs
# on one.  Materializable parameter points sit far below both limits.
_RATIO_DIGIT_LIMIT = 50_000
_SIZE_DIGIT_LIMIT = 10_000
_ENTRY_CAP = 512


def power_of_nine_exponent(T: int) -> int:
    """Return t with T = 9^t, or raise."""
    t = 0
    x = T
    while x > 1:
        if x % 9:
            raise ContractError(f"T = {T} is not a power of 9")
        x //= 9
        t += 1
    if T < 1:
        raise ContractError("T must be >= 1")
    return t


def shift_thresholds(t: int) -> list:
    """Minimum middle-block sizes for the shifting recursion, indexed from
    level t down to level -t (list position 0 is level t)."""
    ns = [0]
    for k in range(t - 1, -t - 1, -1):
        ns.append(2 * (ns[-1] + t - k))
    return ns


def alpha_closed(t: int, T: int, d: int, k: int) -> int:
    a0 = T + 4 * t + 2
    if k == 0:
        return a0
    return a0 * d**k + 2 * T * k * d ** (k - 1) + d * (d**k - 1) // (d - 1)


def beta_closed(T: int, d: int, k: int) -> Fraction:
    return Fraction(k * d**k, 3 * T)


def alpha_prime(T: int, d: int, l: int) -> int:
    return 2 * d**l * T + d

def beta_prime(T: int, d: int, l: int) -> Fraction:
    return Fraction(d ** (l + 1), 3 * T)


def balance_ratio_bounds(t: int, T: int, d: int, k: int) -> tuple:
    """Rigorous (lower, upper) bounds on beta_k/alpha_k as small Fractions.

    beta_k/alpha_k = (k*d/(3T)) / (a0*d + 2*T*k + d*(d - d^(1-k))/(d-1)),
    and 1 <= (d - d^(1-k))/(d-1) <= d/(d-1) for k >= 1.
    """
    if k < 1:
        return Fraction(0), Fraction(0)
    a0 = T + 4 * t + 2
    num = Fraction(k * d, 3 * T)
    lower = num / (a0 * d + 2 * T * k + Fraction(d * d, d - 1))
    upper = num / (a0 * d + 2 * T * k + d)
    return lower, upper


def ratio_at_least(t: int, d: int, k: int, bound) -> bool:
    """Decide beta_k/alpha_k >= bound by cross-multiplying unreduced
    integers, so no gcd ever runs on the big powers."""
    T = 3 ** (2 * t)
    bound = Fraction(bound)
    # beta_k = k*d^k / (3T); compare k*d^k * bound.den >= 3T * alpha_k * bound.num
    lhs = k * d**k * bound.denominator
    rhs = 3 * T * alpha_closed(t, T, d, k) * bound.numerator
    return lhs >= rhs


@dataclass
class RecurrenceTable:
    """Exact evaluations of the construction's recurrences for (t, d, k, n).

    `alpha`, `beta`, `alpha_p`, `beta_p` hold entries for i = 0..min(k, cap);
    `ratio` is beta_k/alpha_k when exactly representable, else None with
    `ratio_bounds` carrying rigorous enclosures.  `x_exact`/`y_exact` are the
    materialization sizes when computable, and `cells` their total including
    the window.
    """

    t: int
    T: int
    d: int
    k: int
    n: int
    alpha: tuple
    beta: tuple
    alpha_p: tuple
    beta_p: tuple
    shift_min: tuple                 # N at levels t, t-1, ..., -t
    ratio: Optional[Fraction]
    ratio_bounds: tuple              # (lower, upper) Fractions
    gate_threshold: int              # 3T + 1
    gate_ok: bool
    x_exact: Optional[int]
    y_exact: Optional[int]
    x_bound: Optional[int]
    y_bound: Optional[int]
    p_values: tuple                  # p_1..p_k when sizes are exact

    @property
    def cells(self) -> Optional[int]:
        if self.x_exact is None:
            return None
        return self.x_exact + self.y_exact + 2 * self.t + 1

    def balance_ratio_at_least(self, bound) -> bool:
        """Decide beta_k/alpha_k >= bound, by enclosure when decisive and
        by cross-multiplied exact comparison otherwise."""
        bound = Fraction(bound)
        lower, upper = self.ratio_bounds
        if lower >= bound:
            return True
        if upper < bound:
            return False
        if self.ratio is not None:
            return self.ratio >= bound
        return ratio_at_least(self.t, self.d, self.k, bound)

    def to_text(self, max_entries: int = 12) -> str:
        lines = [f"plan t={self.t} T={self.T} d={self.d} k={self.k} n={self.n}"]
        for j, nv in enumerate(self.shift_min):
            lines.append(f"N level={self.t - j} value={nv}")
        shown = min(len(self.alpha), max_entries + 1)
        for i in range(shown):
            lines.append(
                f"i={i} alpha={self.alpha[i]} beta={self.beta[i]} "
                f"alpha'={self.alpha_p[i]} beta'={self.beta_p[i]}"
            )
        if shown < len(self.alpha):
            lines.append(f"... ({len(self.alpha) - shown} more entries held)")
        if self.ratio is not None:
            lines.append(f"ratio={self.ratio}")
        else:
            lo, hi = self.ratio_bounds
            lines.append(f"ratio_lower={lo} ratio_upper={hi}")
        lines.append(f"gate_threshold={self.gate_threshold} gate_ok={self.gate_ok}")
        if self.x_exact is not None:
            lines.append(f"x={self.x_exact} y={self.y_exact} cells={self.cells}")
        if self.x_bound is not None:
            lines.append(f"x_bound={self.x_bound} y_bound={self.y_bound}")
        return "\n".join(lines) + "\n"


def _digits_of_power(d: int, k: int) -> float:
    import math

    return (k + 1) * math.log10(d) if d > 1 else 1.0


def plan_sizes(t: int, d: int, k: int, n: int) -> RecurrenceTable:
    """Evaluate every recurrence for the given parameters, exactly where
    feasible and through rigorous bounds otherwise."""
    if t < 0 or d < 1 or k < 0 or n < 1:
        raise ContractError("need t >= 0, d >= 1, k >= 0, n >= 1")
    T = 3 ** (2 * t)
    ns = shift_thresholds(t)
    if ns[-1] > T:
        raise ContractError("shifting threshold exceeded 3^(2t)")

    exact = _digits_of_power(d, k) <= _RATIO_DIGIT_LIMIT
    cap = min(k, _ENTRY_CAP)
    alphas, betas, aps, bps = [], [], [], []
    a = T + 4 * t + 2
    b = Fraction(0)
    for i in range(cap + 1):
        alphas.append(a)
        betas.append(b)
        aps.append(alpha_prime(T, d, i))
        bps.append(beta_prime(T, d, i))
        a = d * a + 2 * T * d**i + d
        b = d * b + Fraction(d ** (i + 1), 3 * T)

    ratio = None
    bounds = balance_ratio_bounds(t, T, d, k)
    if exact:
        ak = alpha_closed(t, T, d, k)
        bk = beta_closed(T, d, k)
        if k <= cap:
            if ak != alphas[k] or bk != betas[k]:
                raise ContractError("closed forms disagree with the recurrence")
        ratio = bk / ak if k >= 1 else Fraction(0)
        if k >= 1 and not (bounds[0] <= ratio <= bounds[1]):
            raise ContractError("ratio bounds do not enclose the exact ratio")

    gate_threshold = 3 * T + 1
    lo, hi = bounds
    if lo >= gate_threshold:
        gate_ok = True
    elif hi < gate_threshold:
        gate_ok = False
    elif ratio is not None:
        gate_ok = ratio >= gate_threshold
    else:
        gate_ok = ratio_at_least(t, d, k, gate_threshold)

    x_exact = y_exact = x_bound = y_bound = None
    p_values = ()
    if _digits_of_power(d, 2 * k + 1) <= _SIZE_DIGIT_LIMIT:
        unit = T + 4 * t + 2
        ps = [( d**j - T) // unit for j in range(1, k + 1)]
        x = n + k + 1
        y = T + 4 * t + 3 + (n + k)
        # Unwind from the innermost call (parameter n + k) outward.
        for j in range(1, k + 1):
            m = d ** (j - 1)
            x = d * x + ps[j - 1] + 2 * t + 1
            y = d * y + m * (T + d + 4 * t + 2) + ps[j - 1]
        x_exact, y_exact = x, y
        x_bound = y_bound = 10 * d ** (2 * k + 1) * n
        if x_exact > x_bound or y_exact > y_bound:
            raise ContractError("materialization sizes exceed 10*d^(2k+1)*n")
        p_values = tuple(ps)

    return RecurrenceTable(
        t=t, T=T, d=d, k=k, n=n,
        alpha=tuple(alphas), beta=tuple(betas),
        alpha_p=tuple(aps), beta_p=tuple(bps),
        shift_min=tuple(ns),
        ratio=ratio, ratio_bounds=bounds,
        gate_threshold=gate_threshold, gate_ok=gate_ok,
        x_exact=x_exact, y_exact=y_exact,
        x_bound=x_bound, y_bound=y_bound,
        p_values=p_values,
    )


class SizePlan:
    """Memoized x/y sizes for one (t, d) pair, used while materializing."""

    def __init__(self, t: int, d: int):
        self.t = t
        self.T = 3 ** (2 * t)
        self.d = d
        self._x = {}
        self._y = {}

    def p(self, k: int) -> int:
        return (self.d**k - self.T) // (self.T + 4 * self.t + 2)

    def m(self, k: int) -> int:
        return self.d ** (k - 1)

    def x(self, n: int, k: int) -> int:
        key = (n, k)
        if key not in self._x:
            if k == 0:
                self._x[key] = n + 1
            else:
                self._x[key] = (self.d * self.x(n + 1, k - 1)
                                + self.p(k) + 2 * self.t + 1)
        return self._x[key]

    def y(self, n: int, k: int) -> int:
        key = (n, k)
        if key not in self._y:
            if k == 0:
                self._y[key] = self.T + 4 * self.t + 3 + n
            else:
                self._y[key] = (self.d * self.y(n + 1, k - 1)
                                + self.m(k) * (self.T + self.d + 4 * self.t + 2)
                                + self.p(k))
        return self._y[key]

    def cells(self, n: int, k: int) -> int:
        return self.x(n, k) + self.y(n, k) + 2 * self.t + 1


def check_claim_monotonicity(T: int, d: int, l_max: int):
    """Verify beta'_l/alpha'_l > beta_{l+1}/alpha_{l+1} > beta_l/alpha_l in
    exact rationals for l = 0..l_max.  Returns (ok, first counterexample)."""
    t = power_of_nine_exponent(T)
    if d < 9 * T:
        raise ContractError("claim check requires d >= 9T")
    a = T + 4 * t + 2
    b = Fraction(0)
    for l in range(l_max + 1):
        a_next = d * a + 2 * T * d**l + d
        b_next = d * b + Fraction(d ** (l + 1), 3 * T)
        lhs = Fraction(beta_prime(T, d, l)) / alpha_prime(T, d, l)
        mid = b_next / a_next
        rhs = b / a if a else Fraction(0)
        if not (lhs > mid > rhs):
            return False, (l, lhs, mid, rhs)
        a, b = a_next, b_next
    return True, None
