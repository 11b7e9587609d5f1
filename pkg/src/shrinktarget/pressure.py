"""Birkhoff-sum brackets and two-sided truncated pressure estimates.

Potentials are nonnegative expression trees over the log-derivative
psi = log|T'|, constants, scalings and sums, plus raw per-symbol brackets.
The sign convention is fixed here once: partition sums always receive the
already-negated exponent, i.e. for a nonnegative potential u the weights are
exp(-end) with `end` an endpoint of the Birkhoff bracket of S_n(u).  The
"sup" mode uses the lower endpoint (a dominating sum, giving upper pressure
bounds); the "inf" mode uses the upper endpoint (a dominated sum, giving
Fekete lower bounds for a pressure of the form P(-u)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping

import numpy as np

from .systems import (
    BudgetExceededError,
    DEFAULT_WORD_BUDGET,
    Interval,
    MarkovSystem,
    Word,
    cylinder,
)

__all__ = [
    "Potential",
    "LogDerivative",
    "Constant",
    "Scale",
    "Sum",
    "PerSymbolBracket",
    "PressureEstimate",
    "BirkhoffTable",
    "birkhoff_bracket",
    "partition_sum",
    "pressure_bracket",
]


class Potential:
    """Base class for nonnegative potentials evaluated as cylinder brackets."""


@dataclass(frozen=True)
class LogDerivative(Potential):
    """The distinguished geometric potential psi = log|T'|."""


@dataclass(frozen=True)
class Constant(Potential):
    value: float

    def __post_init__(self):
        if self.value < 0.0:
            raise ValueError("constant potentials must be nonnegative")


@dataclass(frozen=True)
class Scale(Potential):
    factor: float
    inner: Potential

    def __post_init__(self):
        if self.factor < 0.0:
            raise ValueError("scale factors must be nonnegative")


@dataclass(frozen=True)
class Sum(Potential):
    left: Potential
    right: Potential


@dataclass(frozen=True)
class PerSymbolBracket(Potential):
    """Potential known only through per-branch [inf, sup] brackets.

    ``table`` maps a symbol to the bracket of the potential over that branch
    domain; ``variation`` optionally bounds var_n(S_n phi)/n (nonincreasing
    to zero, tempered distortion).
    """

    table: Callable[[int], tuple[float, float]]
    variation: Callable[[int], float] | None = None

    @staticmethod
    def from_mapping(entries: Mapping[int, tuple[float, float]],
                     variation: Callable[[int], float] | None = None) -> "PerSymbolBracket":
        data = dict(entries)
        for i, (lo, hi) in data.items():
            if not (0.0 <= lo <= hi):
                raise ValueError(f"bracket for symbol {i} must satisfy 0 <= lo <= hi")
        return PerSymbolBracket(table=lambda i: data[i], variation=variation)


@dataclass(frozen=True)
class _Flat:
    """Flattened potential: psi_coef * psi + const + sum of scaled tables."""

    psi_coef: float
    const: float
    tables: tuple[tuple[float, Callable[[int], tuple[float, float]]], ...]


def _flatten(pot: Potential, scale: float = 1.0) -> _Flat:
    if isinstance(pot, LogDerivative):
        return _Flat(scale, 0.0, ())
    if isinstance(pot, Constant):
        return _Flat(0.0, scale * pot.value, ())
    if isinstance(pot, Scale):
        return _flatten(pot.inner, scale * pot.factor)
    if isinstance(pot, Sum):
        a = _flatten(pot.left, scale)
        b = _flatten(pot.right, scale)
        return _Flat(a.psi_coef + b.psi_coef, a.const + b.const, a.tables + b.tables)
    if isinstance(pot, PerSymbolBracket):
        return _Flat(0.0, 0.0, ((scale, pot.table),))
    raise TypeError(f"unknown potential node {pot!r}")


def _per_symbol_ends(sys: MarkovSystem, flat: _Flat, i: int) -> tuple[float, float] | None:
    """Exact additive per-symbol bracket contribution, or None when the
    psi part does not decompose symbolwise (non-affine families)."""
    lo = hi = flat.const
    if flat.psi_coef != 0.0:
        lr = sys.branches.log_deriv_point(i)
        if lr is None:
            return None
        lo += flat.psi_coef * (-lr)
        hi += flat.psi_coef * (-lr)
    for sc, table in flat.tables:
        tlo, thi = table(i)
        lo += sc * tlo
        hi += sc * thi
    return (lo, hi)


def _per_symbol_psi_lo(sys: MarkovSystem, i: int) -> float:
    """Lower endpoint of the psi bracket over branch i (depth 1)."""
    lr = sys.branches.log_deriv_point(i)
    if lr is not None:
        return -lr
    dlo, dhi = sys.branches.deriv_bracket(i, Interval(0.0, 1.0))
    return -math.log(dhi)


def birkhoff_bracket(sys: MarkovSystem, pot: Potential, word: Word) -> tuple[float, float]:
    """Interval containing the range of S_n(pot) over the cylinder of the word.

    For the log-derivative the bracket is [-log dhi, -log dlo] of the
    cylinder derivative bracket; sums and scalings combine by interval
    arithmetic.
    """
    if not word:
        raise ValueError("word must be nonempty")
    flat = _flatten(pot)
    n = len(word)
    lo = hi = n * flat.const
    if flat.psi_coef != 0.0:
        add = _all_per_symbol_psi(sys, word)
        if add is not None:
            plo, phi_ = add
        else:
            dlo, dhi = cylinder(sys, word).deriv_bracket
            plo = -math.log(dhi) if dhi > 0.0 else math.inf
            phi_ = -math.log(dlo) if dlo > 0.0 else math.inf
        lo += flat.psi_coef * plo
        hi += flat.psi_coef * phi_
    for sc, table in flat.tables:
        for s in word:
            tlo, thi = table(s)
            lo += sc * tlo
            hi += sc * thi
    return (lo, hi)


def _all_per_symbol_psi(sys: MarkovSystem, word: Word) -> tuple[float, float] | None:
    total = 0.0
    for s in word:
        lr = sys.branches.log_deriv_point(s)
        if lr is None:
            return None
        total += -lr
    return (total, total)


@dataclass(frozen=True)
class PressureEstimate:
    """Two-sided truncated pressure bracket for P(-u) at truncation (F, n)."""

    lower: float
    upper: float
    truncation: tuple[frozenset[int], int]
    diverged: bool = False

    def __post_init__(self):
        if math.isfinite(self.lower) and math.isfinite(self.upper):
            if self.lower > self.upper + 1e-12:
                raise ValueError(f"invalid pressure bracket [{self.lower}, {self.upper}]")


def _logsumexp(arr: np.ndarray) -> float:
    m = float(np.max(arr))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(arr - m))))


class BirkhoffTable:
    """Cached per-word Birkhoff bracket endpoints over F^n for one potential.

    The table stores, for each level n, arrays (c_lo, c_hi) of bracket
    endpoints of S_n(u) over every word.  Partition sums for the scaled
    potential s*u are then single vectorized log-sum-exp passes, which is
    what dimension bisections iterate.
    """

    def __init__(self, sys: MarkovSystem, pot: Potential, subset,
                 budget: int = DEFAULT_WORD_BUDGET):
        self.sys = sys
        self.pot = pot
        self.symbols = tuple(sorted(set(subset)))
        if not self.symbols:
            raise ValueError("alphabet subset must be nonempty")
        for s in self.symbols:
            sys.branches._check_symbol(s)
        self.budget = budget
        self.flat = _flatten(pot)
        self._levels: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        ends = [_per_symbol_ends(sys, self.flat, i) for i in self.symbols]
        if all(e is not None for e in ends):
            self.additive: tuple[np.ndarray, np.ndarray] | None = (
                np.array([e[0] for e in ends]),
                np.array([e[1] for e in ends]),
            )
        else:
            self.additive = None

    def max_level(self) -> int:
        n = 1
        while len(self.symbols) ** (n + 1) <= self.budget:
            n += 1
        return n

    def level(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """(c_lo, c_hi) arrays over all words of length n (enumeration order
        is deterministic)."""
        if n in self._levels:
            return self._levels[n]
        count = len(self.symbols) ** n
        if count > self.budget:
            raise BudgetExceededError("partition", count, self.budget)
        if self.additive is not None:
            lo1, hi1 = self.additive
            c_lo = lo1
            c_hi = hi1
            for _ in range(n - 1):
                c_lo = (c_lo[:, None] + lo1[None, :]).ravel()
                c_hi = (c_hi[:, None] + hi1[None, :]).ravel()
            out = (np.asarray(c_lo, dtype=float), np.asarray(c_hi, dtype=float))
        else:
            out = self._enumerate_level(n)
        self._levels[n] = out
        return out

    def _enumerate_level(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        sys = self.sys
        fam = sys.branches
        flat = self.flat
        syms = self.symbols
        pc = flat.psi_coef
        # per-symbol additive part (constants + tables); psi handled on the fly
        base = []
        for i in syms:
            v_lo = v_hi = flat.const
            for sc, table in flat.tables:
                tlo, thi = table(i)
                v_lo += sc * tlo
                v_hi += sc * thi
            base.append((v_lo, v_hi))
        c_lo = np.empty(len(syms) ** n)
        c_hi = np.empty(len(syms) ** n)
        pos = 0
        # DFS over reversed words: prepending a symbol composes one more
        # outer branch, so nested-interval derivative brackets accumulate in
        # log space without underflow.
        stack = [(0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0)]
        while stack:
            depth, lo, hi, psi_lo, psi_hi, add_lo, add_hi = stack.pop()
            if depth == n:
                c_lo[pos] = pc * psi_lo + add_lo
                c_hi[pos] = pc * psi_hi + add_hi
                pos += 1
                continue
            j = Interval(lo, hi)
            for k in range(len(syms) - 1, -1, -1):
                s = syms[k]
                blo, bhi = fam.deriv_bracket(s, j)
                a = fam.apply(s, lo)
                b = fam.apply(s, hi)
                nlo, nhi = (a, b) if a <= b else (b, a)
                stack.append((depth + 1, nlo, nhi,
                              psi_lo - math.log(bhi),
                              psi_hi - math.log(blo),
                              add_lo + base[k][0],
                              add_hi + base[k][1]))
        return (c_lo[:pos], c_hi[:pos])

    def partition(self, scale: float, n: int, mode: str) -> float:
        """log sum over F^n of exp(-scale * end) with end the bracket
        endpoint selected by mode ('sup' -> lower endpoint, dominating)."""
        if mode not in ("sup", "inf"):
            raise ValueError("mode must be 'sup' or 'inf'")
        if self.additive is not None:
            lo1, hi1 = self.additive
            c = lo1 if mode == "sup" else hi1
            return n * _logsumexp(-scale * c)
        c_lo, c_hi = self.level(n)
        c = c_lo if mode == "sup" else c_hi
        return _logsumexp(-scale * c)

    def tail_rule(self) -> Callable[[float], float] | None:
        """Bound for the depth-1 dominating weight sum beyond F, as a
        function of the overall scale; None when no closed form applies."""
        fam = self.sys.branches
        chosen = set(self.symbols)
        if fam.finite:
            skipped = [i for i in fam.symbols() if i not in chosen]
            if not skipped:
                return lambda scale: 0.0
            ends = [self._depth1_lo_end(i) for i in skipped]
            return lambda scale: sum(math.exp(-scale * e) for e in ends)
        if self.flat.tables:
            return None  # no closed form joins a raw table with the family tail
        a = self.flat.psi_coef
        b = self.flat.const
        kmax = max(self.symbols)
        skipped = [i for i in _family_symbols_upto(fam, kmax) if i not in chosen]
        ends = [self._depth1_lo_end(i) for i in skipped]

        def rule(scale: float) -> float:
            tail = fam.tail_weight_sum(scale * a, kmax) * math.exp(-scale * b)
            return tail + sum(math.exp(-scale * e) for e in ends)

        return rule

    def _depth1_lo_end(self, i: int) -> float:
        v = self.flat.const + self.flat.psi_coef * _per_symbol_psi_lo(self.sys, i)
        for sc, table in self.flat.tables:
            v += sc * table(i)[0]
        return v

    def bracket(self, scale: float, n_max: int | None = None,
                tail: float | None = None) -> PressureEstimate:
        """Two-sided estimate of P(-scale*u) over the truncation.

        ``tail``: certified bound for the depth-1 dominating weight sum of
        the alphabet beyond F (None for subsystem semantics).  With a tail
        the upper bound is the depth-1 dominated sum; without it, deeper
        levels sharpen the upper bound by submultiplicativity.
        """
        if n_max is None:
            n_max = self.max_level()
        if n_max < 1:
            raise ValueError("n_max must be at least 1")
        lower = -math.inf
        upper = math.inf
        for n in range(1, n_max + 1):
            lower = max(lower, self.partition(scale, n, "inf") / n)
        if tail is None:
            for n in range(1, n_max + 1):
                upper = min(upper, self.partition(scale, n, "sup") / n)
            diverged = False
        else:
            diverged = not math.isfinite(tail)
            if diverged:
                upper = math.inf
            else:
                z1 = self.partition(scale, 1, "sup")
                upper = np.logaddexp(z1, math.log(tail)) if tail > 0.0 else z1
                upper = float(upper)
        return PressureEstimate(lower=lower, upper=upper,
                                truncation=(frozenset(self.symbols), n_max),
                                diverged=diverged)


def _family_symbols_upto(fam, kmax: int) -> Iterator[int]:
    for i in fam.symbols():
        if i > kmax:
            return
        yield i


def partition_sum(sys: MarkovSystem, pot: Potential, subset, n: int, mode: str,
                  budget: int = DEFAULT_WORD_BUDGET) -> float:
    """log sum_{w in F^n} exp(-end_w) with end_w the Birkhoff bracket
    endpoint of S_n(pot) selected by mode; log-sum-exp stabilized.

    'sup' selects the lower endpoint (dominating weights, the sum behind
    upper pressure bounds); 'inf' the upper endpoint.
    """
    table = BirkhoffTable(sys, pot, subset, budget=budget)
    return table.partition(1.0, n, mode)


def pressure_bracket(sys: MarkovSystem, pot: Potential, subset,
                     n_max: int | None = None,
                     tail: float | str | None = None,
                     budget: int = DEFAULT_WORD_BUDGET) -> PressureEstimate:
    """Two-sided truncated estimate of P(-pot) over the finite subset.

    The lower bound is the best Fekete (supermultiplicative) level value of
    the dominated sums, valid for the full system.  Without a tail the upper
    bound is the best submultiplicative level value of the dominating sums
    and certifies the F-subsystem; pass ``tail="family"`` (closed form from
    the branch family) or an explicit beyond-F bound to dominate the full
    countable alphabet, at the price of a depth-1 upper bound.  An infinite
    tail sets ``diverged`` and upper = +inf; finite-F lower bounds remain
    valid.
    """
    table = BirkhoffTable(sys, pot, subset, budget=budget)
    tail_value: float | None
    if tail == "family":
        rule = table.tail_rule()
        tail_value = math.inf if rule is None else rule(1.0)
    elif tail is None:
        tail_value = None
    else:
        tail_value = float(tail)
    return table.bracket(1.0, n_max=n_max, tail=tail_value)
