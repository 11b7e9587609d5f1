"""Zero-dimension counterexample family.

Given beta in (0,1) and a strictly decreasing shrink function Phi -> 0, this
module places countably many affine full branches so that the limit set has
dimension exactly beta (Moran identity certified to a tiny residual) while
the orbits hitting the shrinking balls around y = 0 at rate Phi form a set
whose level cover sums collapse super-exponentially at every positive
exponent.

Branch widths decay like exp(-c n^2) and underflow doubles early, so the
width table is kept in log space throughout; linear-space widths are only
materialized where harmless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .systems import (
    AffineCountableFamily,
    Interval,
    MarkovSystem,
)
from .targets import CoverReport

__all__ = [
    "ShrinkFn",
    "CounterexampleSystem",
    "ZeroDimCoverReport",
    "build",
    "verify_moran",
    "zero_dim_cover_report",
]

_EULER_TAIL = 1.0 / (math.e - 1.0)  # sum_{k>=1} e^{-k}


@dataclass(frozen=True)
class ShrinkFn:
    """Strictly decreasing rate function n -> (0, 1), vanishing at infinity.

    Monotonicity and positivity are checked on the evaluated range; ``spec``
    is a parseable label used by the config round trip.
    """

    fn: Callable[[int], float]
    spec: str = "custom"
    _seen: dict = field(default_factory=dict, repr=False, compare=False)

    def __call__(self, n: int) -> float:
        if n in self._seen:
            return self._seen[n]
        v = float(self.fn(n))
        if not (v > 0.0):
            raise ValueError(f"shrink function must be positive; got {v} at {n}")
        prev = self._seen.get(n - 1)
        if prev is not None and not (v < prev):
            raise ValueError(f"shrink function must be strictly decreasing at {n}")
        nxt = self._seen.get(n + 1)
        if nxt is not None and not (nxt < v):
            raise ValueError(f"shrink function must be strictly decreasing at {n + 1}")
        self._seen[n] = v
        return v

    @staticmethod
    def power(p: float) -> "ShrinkFn":
        if p <= 0.0:
            raise ValueError("power exponent must be positive")
        return ShrinkFn(lambda n: float(n) ** (-p), spec=f"power:{p:g}")

    @staticmethod
    def exponential(c: float) -> "ShrinkFn":
        if c <= 0.0:
            raise ValueError("exponential rate must be positive")
        return ShrinkFn(lambda n: math.exp(-c * n), spec=f"exp:{c:g}")


def _geom_series(x: float) -> float:
    """sum_{q>=1} e^{-q x} = 1/(e^x - 1), closed form."""
    return 1.0 / math.expm1(x)


def _log_raw_width(phi: ShrinkFn, n: int) -> float:
    """log of min((2 + sum_q e^{-q/n})^{-n^2} e^{-2n^2}, (Phi(n)-Phi(n+1))/2)."""
    g = _geom_series(1.0 / n)
    first = -float(n * n) * (math.log(2.0 + g) + 2.0)
    gap = phi(n) - phi(n + 1)
    second = math.log(gap) - math.log(2.0)
    return min(first, second)


def _quad_tail(beta_like: float, m: int) -> float:
    """Certified bound for sum_{n > m} e^{-2*beta_like*n^2} (dominates the
    width-power tails since every raw width is below e^{-2n^2})."""
    first = math.exp(-2.0 * beta_like * (m + 1.0) ** 2)
    ratio = math.exp(-2.0 * beta_like * (2.0 * m + 3.0))
    return first / (1.0 - ratio)


@dataclass(frozen=True)
class CounterexampleSystem:
    """The built system: two wide branches near 1 and one branch per gap
    (Phi(n+1), Phi(n)) for n >= n0, all affine onto [0,1]."""

    beta: float
    phi: ShrinkFn
    n0: int
    log_r12: float
    v1: Interval
    v2: Interval
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def member(self, n: int) -> bool:
        return n in (1, 2) or n >= self.n0

    def log_width(self, n: int) -> float:
        if n in (1, 2):
            return self.log_r12
        if n < self.n0:
            raise ValueError(f"symbol {n} not in the counterexample alphabet")
        key = ("w", n)
        if key not in self._cache:
            self._cache[key] = _log_raw_width(self.phi, n)
        return self._cache[key]

    def interval(self, n: int) -> Interval:
        if n == 1:
            return self.v1
        if n == 2:
            return self.v2
        lo_gap = self.phi(n + 1)
        hi_gap = self.phi(n)
        c = 0.5 * (lo_gap + hi_gap)
        half = 0.5 * math.exp(self.log_width(n))
        return Interval(c - half, c + half)

    def width_tail_sum(self, exponent: float, beyond: int) -> float:
        """Upper bound for sum over alphabet members i > beyond of width^e,
        via the domination width_n <= e^{-n}."""
        if exponent <= 0.0:
            return math.inf
        total = 0.0
        if beyond < 1:
            total += math.exp(exponent * self.log_r12)
        if beyond < 2:
            total += math.exp(exponent * self.log_r12)
        k0 = max(beyond + 1, self.n0)
        total += math.exp(-exponent * k0) / -math.expm1(-exponent)
        return total

    def power_sum_tail_certified(self, exponent: float,
                                 target_slack: float = 1e-14) -> tuple[float, float]:
        """(explicit sum over n >= n0 of width_n^exponent, remainder bound).

        The explicit range is extended until the quadratic-domination tail
        drops below the slack target.
        """
        m = self.n0
        while _quad_tail(exponent, m) > target_slack and m < self.n0 + 400:
            m += 1
        total = 0.0
        for n in range(self.n0, m + 1):
            total += math.exp(exponent * self.log_width(n))
        return total, _quad_tail(exponent, m) + 1e-290

    def as_system(self) -> MarkovSystem:
        if "system" not in self._cache:
            family = AffineCountableFamily(
                member=self.member,
                log_width=self.log_width,
                left=lambda n: self.interval(n).lo,
                tail_sum=self.width_tail_sum,
                locate_fn=self._locate,
            )
            xi = math.exp(-max(self.log_r12, self.log_width(self.n0)))
            self._cache["system"] = MarkovSystem(family, xi=xi)
        return self._cache["system"]

    def _locate(self, x: float, scan_cap: int = 100_000) -> int | None:
        if self.v1.contains(x):
            return 1
        if self.v2.contains(x):
            return 2
        if x <= 0.0 or x >= self.phi(self.n0):
            return None
        n = self.n0
        while n < scan_cap:
            if self.phi(n + 1) <= x:
                return n if self.interval(n).contains(x) else None
            n += 1
        return None


def build(beta: float, phi: ShrinkFn, search_cap: int = 100_000) -> CounterexampleSystem:
    """Construct the counterexample for the given dimension and shrink rate.

    Picks the smallest threshold index n0 > 2 with Phi(n0) < 1 - 2^(1-1/beta)
    and a summable width-power tail, sizes the two wide branches so the
    Moran identity holds exactly, and centers every branch in its gap.
    """
    if not (0.0 < beta < 1.0):
        raise ValueError("beta must lie in (0, 1)")
    threshold = 1.0 - 2.0 ** (1.0 - 1.0 / beta)
    n0 = None
    for n in range(3, search_cap):
        cond1 = phi(n) < threshold
        cond2 = math.exp(-beta * n) / -math.expm1(-beta) < 1.0
        if cond1 and cond2:
            n0 = n
            break
    if n0 is None:
        raise RuntimeError(f"no threshold index below the search cap {search_cap}; "
                           "the shrink function appears not to vanish")
    probe = CounterexampleSystem(beta=beta, phi=phi, n0=n0, log_r12=0.0,
                                 v1=Interval(0.0, 0.0), v2=Interval(0.0, 0.0))
    small_sum, small_tail = probe.power_sum_tail_certified(beta)
    remaining = 1.0 - small_sum
    if not (remaining > 0.0):
        raise RuntimeError("width-power series consumed the Moran budget")
    log_r12 = (math.log1p(-small_sum) - math.log(2.0)) / beta
    r12 = math.exp(log_r12)
    gap_lo = phi(n0)
    mid = 0.5 * (gap_lo + 1.0)
    if not (2.0 * r12 < 1.0 - gap_lo):
        raise RuntimeError("wide branches do not fit above the gap region")
    c1 = 0.5 * (gap_lo + mid)
    c2 = 0.5 * (mid + 1.0)
    v1 = Interval(c1 - 0.5 * r12, c1 + 0.5 * r12)
    v2 = Interval(c2 - 0.5 * r12, c2 + 0.5 * r12)
    ce = CounterexampleSystem(beta=beta, phi=phi, n0=n0, log_r12=log_r12,
                              v1=v1, v2=v2)
    residual = verify_moran(ce)
    if residual > 1e-10:
        raise RuntimeError(f"Moran identity residual {residual:.3e} above 1e-10")
    return ce


def verify_moran(ce: CounterexampleSystem,
                 width_override: Callable[[int], float] | None = None) -> float:
    """Certified upper bound for |sum of width^beta - 1|.

    ``width_override`` is a diagnostic hook mapping a symbol to a log-width,
    letting corruption tests recompute the residual for a perturbed table.
    """
    logw = width_override if width_override is not None else ce.log_width
    beta = ce.beta
    m = ce.n0
    while _quad_tail(beta, m) > 1e-14 and m < ce.n0 + 400:
        m += 1
    total = math.exp(beta * logw(1)) + math.exp(beta * logw(2))
    for n in range(ce.n0, m + 1):
        total += math.exp(beta * logw(n))
    tail = _quad_tail(beta, m) + 1e-290
    return abs(total - 1.0) + tail


@dataclass(frozen=True)
class ZeroDimCoverReport:
    """Cover sums for the rate-Phi target at y=0 against the e^{-n} envelope."""

    cover: CoverReport
    envelope: tuple[tuple[int, float], ...]
    envelope_ok: bool
    full_series_bound: float


def zero_dim_cover_report(ce: CounterexampleSystem, eps: float, m: int,
                          n_max: int) -> ZeroDimCoverReport:
    """Per-level sums over the words whose last symbol is at least the level.

    The level-n family covers the points still within Phi(n) of 0 after n
    steps; by the product structure of affine widths the sum factorizes as
    (sum of all width^eps)^n times the last-symbol tail, every factor
    evaluated as a certified upper bound.  Levels are checked against the
    paper-style envelope e^{-n} * sum_k e^{-k}.
    """
    if eps <= 0.0:
        raise ValueError("exponent must be positive")
    if m <= 1.0 / eps:
        raise ValueError(f"start level must exceed 1/eps = {1.0 / eps:g}")
    if n_max < m:
        raise ValueError("n_max must be at least the start level")
    explicit, tail = ce.power_sum_tail_certified(eps)
    base_upper = 2.0 * math.exp(eps * ce.log_r12) + explicit + tail

    def last_factor(n: int) -> float:
        k0 = max(n, ce.n0)
        mm = k0
        while _quad_tail(eps, mm) > 1e-16 * math.exp(-float(n)) and mm < k0 + 400:
            mm += 1
        total = 0.0
        for k in range(k0, mm + 1):
            total += math.exp(eps * ce.log_width(k))
        return total + _quad_tail(eps, mm) + 1e-290

    per_level = []
    envelope = []
    ok = True
    total = 0.0
    for n in range(m, n_max + 1):
        value = base_upper ** n * last_factor(n)
        bound = math.exp(-float(n)) * _EULER_TAIL
        per_level.append((n, value))
        envelope.append((n, bound))
        total += value
        if value > bound:
            ok = False
    remainder = _EULER_TAIL * math.exp(-(n_max + 1.0)) / -math.expm1(-1.0)
    cover = CoverReport(s=eps, m=m, n_max=n_max, per_level=tuple(per_level),
                        total=total, geometric_tail_bound=remainder)
    return ZeroDimCoverReport(cover=cover, envelope=tuple(envelope),
                              envelope_ok=ok,
                              full_series_bound=_EULER_TAIL ** 2)
