"""Expanding interval maps through their inverse-branch function systems.

A system is a family of contracting inverse branches indexed by a finite or
countable alphabet of positive integers (1-based).  Compositions of branches
over finite symbol words give nested cylinder intervals.  This module
provides cylinder geometry (interval, diameter, derivative bracket),
symbolic coding of points, projection of symbol words back to the line, and
word enumeration.

Derivative brackets for non-affine families are computed by outward-rounded
interval evaluation of each branch derivative on the current nested
interval; they are guaranteed to contain the true range of |phi_w'|.  For
affine families the bracket is an exact point (the product of the ratios).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

__all__ = [
    "Word",
    "Interval",
    "CylinderGeometry",
    "MarkovSystem",
    "BranchFamily",
    "AffineFamily",
    "AffineCountableFamily",
    "GaussFamily",
    "CustomMonotoneFamily",
    "EscapesRepellerError",
    "BudgetExceededError",
    "cylinder",
    "encode_point",
    "project_word",
    "enumerate_words",
    "forward_composer",
    "doubling_map",
    "affine_system",
    "gauss_system",
    "DEFAULT_WORD_BUDGET",
]

Word = tuple[int, ...]

DEFAULT_WORD_BUDGET = 10_000_000

# Outward-rounding pad: generous enough to absorb the handful of floating
# point operations behind each bracket endpoint.
_PAD = 1.0 - 2.0**-50


def _down(x: float) -> float:
    return x * _PAD


def _up(x: float) -> float:
    return x / _PAD


class EscapesRepellerError(Exception):
    """A point left the branch domains before the requested coding depth."""

    def __init__(self, depth: int):
        super().__init__(f"point escapes the branch domains at depth {depth}")
        self.depth = depth


class BudgetExceededError(Exception):
    """An enumeration would exceed the configured word budget."""

    def __init__(self, key: str, requested: float, budget: int,
                 completed_level: int | None = None):
        msg = f"budget '{key}' exceeded: {requested:.4g} words needed, budget {budget}"
        if completed_level is not None:
            msg += f" (deepest completed level: {completed_level})"
        super().__init__(msg)
        self.key = key
        self.requested = requested
        self.budget = budget
        self.completed_level = completed_level


@dataclass(frozen=True)
class Interval:
    """Closed subinterval of [0, 1]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo <= self.hi <= 1.0):
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def contains_interval(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def intersects(self, other: "Interval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def inside_open_ball(self, center: float, radius: float) -> bool:
        """Closed interval strictly inside (center - radius, center + radius).

        Floating-point ties count as outside.
        """
        return center - radius < self.lo and self.hi < center + radius


@dataclass(frozen=True)
class CylinderGeometry:
    """Geometry of phi_w([0,1]) for a finite word w."""

    word: Word
    interval: Interval
    diam: float
    deriv_bracket: tuple[float, float]


class BranchFamily:
    """Interface of an inverse-branch family.

    Branch indices are 1-based.  Implementations keep branch images inside
    [0,1] with pairwise disjoint interiors and sup|phi_i'| <= 1.
    """

    finite: bool = True

    @property
    def is_affine(self) -> bool:
        return False

    def contains_symbol(self, i: int) -> bool:
        raise NotImplementedError

    def symbols(self) -> Iterator[int]:
        """Alphabet in ascending index order (unbounded for countable families)."""
        raise NotImplementedError

    def branch_interval(self, i: int) -> Interval:
        raise NotImplementedError

    def apply(self, i: int, x: float) -> float:
        """phi_i(x) for x in [0,1]."""
        raise NotImplementedError

    def deriv_bracket(self, i: int, j: Interval) -> tuple[float, float]:
        """Outward bracket of |phi_i'| over the subinterval j."""
        raise NotImplementedError

    def locate(self, x: float) -> int | None:
        """Lowest-indexed branch whose closed image contains x, if any."""
        raise NotImplementedError

    def inverse(self, i: int, x: float) -> float:
        """The forward map T restricted to branch i (inverse of phi_i)."""
        raise NotImplementedError

    def log_deriv_point(self, i: int) -> float | None:
        """Exact log|phi_i'| when the branch derivative is constant, else None."""
        return None

    def tail_weight_sum(self, exponent: float, beyond: int) -> float:
        """Upper bound for sum_{i > beyond} sup|phi_i'|^exponent.

        Returns +inf when the sum diverges or no closed form is known.
        """
        return 0.0 if self.finite else math.inf

    def _check_symbol(self, i: int) -> None:
        if not self.contains_symbol(i):
            raise ValueError(f"symbol {i} not in the system alphabet")


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


class AffineFamily(BranchFamily):
    """Finitely many affine branches phi_i(x) = left_i + ratio_i * x."""

    finite = True

    def __init__(self, images: Sequence[tuple[float, float]],
                 ratios: Sequence[float] | None = None):
        if len(images) < 2:
            raise ValueError("at least two branches required")
        ivs = [Interval(lo, hi) for lo, hi in images]
        for iv in ivs:
            if not (0.0 < iv.width < 1.0):
                raise ValueError(f"branch image {iv} must have width in (0, 1)")
        for a, b in itertools.combinations(ivs, 2):
            if min(a.hi, b.hi) > max(a.lo, b.lo):
                raise ValueError(f"branch images {a} and {b} overlap")
        self.images = tuple(ivs)
        if ratios is None:
            self.ratios = tuple(iv.width for iv in ivs)
        else:
            # contraction ratios kept exactly as given; the image widths may
            # differ by an ulp through the placement arithmetic
            if len(ratios) != len(ivs):
                raise ValueError("one ratio per branch required")
            for r, iv in zip(ratios, ivs):
                if abs(r - iv.width) > 1e-12 * max(r, iv.width):
                    raise ValueError("ratio inconsistent with branch image width")
            self.ratios = tuple(float(r) for r in ratios)

    @property
    def is_affine(self) -> bool:
        return True

    def contains_symbol(self, i: int) -> bool:
        return 1 <= i <= len(self.images)

    def symbols(self) -> Iterator[int]:
        return iter(range(1, len(self.images) + 1))

    def branch_interval(self, i: int) -> Interval:
        self._check_symbol(i)
        return self.images[i - 1]

    def apply(self, i: int, x: float) -> float:
        iv = self.images[i - 1]
        return _clamp01(iv.lo + iv.width * x)

    def deriv_bracket(self, i: int, j: Interval) -> tuple[float, float]:
        r = self.ratios[i - 1]
        return (r, r)

    def locate(self, x: float) -> int | None:
        for i, iv in enumerate(self.images, start=1):
            if iv.contains(x):
                return i
        return None

    def inverse(self, i: int, x: float) -> float:
        iv = self.images[i - 1]
        return _clamp01((x - iv.lo) / iv.width)

    def log_deriv_point(self, i: int) -> float | None:
        return math.log(self.ratios[i - 1])


class AffineCountableFamily(BranchFamily):
    """Countable affine branch family defined lazily.

    Widths are supplied in log space so that subexponentially small branches
    survive double precision.  ``tail_sum(e, k)`` must return a certified
    upper bound for sum_{i > k} width_i^e (or +inf).
    """

    finite = False

    def __init__(self,
                 member: Callable[[int], bool],
                 log_width: Callable[[int], float],
                 left: Callable[[int], float],
                 tail_sum: Callable[[float, int], float],
                 locate_fn: Callable[[float], int | None] | None = None,
                 scan_limit: int = 100_000):
        self.member = member
        self.log_width = log_width
        self.left = left
        self.tail_sum = tail_sum
        self._locate_fn = locate_fn
        self.scan_limit = scan_limit

    @property
    def is_affine(self) -> bool:
        return True

    def contains_symbol(self, i: int) -> bool:
        return i >= 1 and self.member(i)

    def symbols(self) -> Iterator[int]:
        return (i for i in itertools.count(1) if self.member(i))

    def branch_interval(self, i: int) -> Interval:
        self._check_symbol(i)
        lo = self.left(i)
        return Interval(lo, min(1.0, lo + math.exp(self.log_width(i))))

    def apply(self, i: int, x: float) -> float:
        return _clamp01(self.left(i) + math.exp(self.log_width(i)) * x)

    def deriv_bracket(self, i: int, j: Interval) -> tuple[float, float]:
        w = math.exp(self.log_width(i))
        return (w, w)

    def locate(self, x: float) -> int | None:
        if self._locate_fn is not None:
            return self._locate_fn(x)
        for i in itertools.islice(self.symbols(), self.scan_limit):
            if self.branch_interval(i).contains(x):
                return i
        return None

    def inverse(self, i: int, x: float) -> float:
        w = math.exp(self.log_width(i))
        if w == 0.0:
            raise ValueError(f"branch {i} width underflows; cannot invert")
        return _clamp01((x - self.left(i)) / w)

    def log_deriv_point(self, i: int) -> float | None:
        return self.log_width(i)

    def tail_weight_sum(self, exponent: float, beyond: int) -> float:
        return self.tail_sum(exponent, beyond)


class GaussFamily(BranchFamily):
    """Inverse branches of the Gauss map: phi_i(x) = 1/(i + x), i >= 1."""

    finite = False

    def contains_symbol(self, i: int) -> bool:
        return i >= 1

    def symbols(self) -> Iterator[int]:
        return itertools.count(1)

    def branch_interval(self, i: int) -> Interval:
        self._check_symbol(i)
        return Interval(1.0 / (i + 1.0), 1.0 / i)

    def apply(self, i: int, x: float) -> float:
        return _clamp01(1.0 / (i + x))

    def deriv_bracket(self, i: int, j: Interval) -> tuple[float, float]:
        # |phi_i'(x)| = 1/(i+x)^2, decreasing in x
        a = i + j.hi
        b = i + j.lo
        return (_down(1.0 / (a * a)), _up(1.0 / (b * b)))

    def locate(self, x: float) -> int | None:
        if x <= 0.0 or x > 1.0:
            return None
        i0 = int(math.floor(1.0 / x))
        for i in (i0 - 1, i0, i0 + 1):
            if i >= 1 and self.branch_interval(i).contains(x):
                return i
        return None

    def inverse(self, i: int, x: float) -> float:
        return _clamp01(1.0 / x - i)

    def tail_weight_sum(self, exponent: float, beyond: int) -> float:
        # sup|phi_i'| = i^{-2}; integral comparison for the p-series tail
        if exponent <= 0.5:
            return math.inf
        k = max(1, beyond)
        return k ** (1.0 - 2.0 * exponent) / (2.0 * exponent - 1.0)


class CustomMonotoneFamily(BranchFamily):
    """Finitely many monotone C^1 branches given by evaluators.

    Each branch is a triple ``(apply_fn, deriv_range_fn, image)`` where
    ``deriv_range_fn(lo, hi)`` must return a bracket containing the range of
    |phi_i'| over [lo, hi], and sup|phi_i'| <= 1.
    """

    finite = True

    def __init__(self, branches: Sequence[tuple[Callable[[float], float],
                                                Callable[[float, float], tuple[float, float]],
                                                Interval]]):
        if len(branches) < 2:
            raise ValueError("at least two branches required")
        self.branches = tuple(branches)

    def contains_symbol(self, i: int) -> bool:
        return 1 <= i <= len(self.branches)

    def symbols(self) -> Iterator[int]:
        return iter(range(1, len(self.branches) + 1))

    def branch_interval(self, i: int) -> Interval:
        self._check_symbol(i)
        return self.branches[i - 1][2]

    def apply(self, i: int, x: float) -> float:
        return _clamp01(self.branches[i - 1][0](x))

    def deriv_bracket(self, i: int, j: Interval) -> tuple[float, float]:
        lo, hi = self.branches[i - 1][1](j.lo, j.hi)
        return (_down(lo), _up(hi))

    def locate(self, x: float) -> int | None:
        for i in self.symbols():
            if self.branch_interval(i).contains(x):
                return i
        return None

    def inverse(self, i: int, x: float) -> float:
        # monotone bisection of phi_i on [0,1]
        fn = self.branches[i - 1][0]
        increasing = fn(0.0) <= fn(1.0)
        lo, hi = 0.0, 1.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            v = fn(mid)
            if (v < x) == increasing:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


@dataclass(frozen=True)
class MarkovSystem:
    """Expanding Markov map seen through its inverse-branch family.

    ``xi`` is the uniform iterate-expansion constant (> 1) valid from depth
    ``expansion_depth`` on; ``distortion`` bounds rho_n (None means affine,
    rho identically zero).
    """

    branches: BranchFamily
    xi: float
    expansion_depth: int = 1
    distortion: Callable[[int], float] | None = None

    def __post_init__(self):
        if not self.xi > 1.0:
            raise ValueError("expansion constant xi must exceed 1")
        if self.branches.is_affine and self.distortion is not None:
            raise ValueError("affine families have zero distortion; pass None")

    def rho(self, n: int) -> float:
        return 0.0 if self.distortion is None else self.distortion(n)


def cylinder(sys: MarkovSystem, word: Word) -> CylinderGeometry:
    """Geometry of the cylinder phi_w([0,1]).

    The returned derivative bracket contains the true range of |phi_w'| over
    [0,1]; for affine families it is exact (lo == hi) and equals the
    diameter.
    """
    if not word:
        raise ValueError("word must be nonempty")
    fam = sys.branches
    for s in word:
        fam._check_symbol(s)
    lo, hi = 0.0, 1.0
    dlo = dhi = 1.0
    affine = fam.is_affine
    if affine:
        # constant branch derivatives: exact product in word order
        for s in word:
            dlo *= fam.deriv_bracket(s, Interval(0.0, 1.0))[0]
        dhi = dlo
        for s in reversed(word):
            a = fam.apply(s, lo)
            b = fam.apply(s, hi)
            lo, hi = (a, b) if a <= b else (b, a)
    else:
        for s in reversed(word):
            blo, bhi = fam.deriv_bracket(s, Interval(lo, hi))
            dlo = _down(dlo * blo)
            dhi = _up(dhi * bhi)
            a = fam.apply(s, lo)
            b = fam.apply(s, hi)
            lo, hi = (a, b) if a <= b else (b, a)
    iv = Interval(lo, hi)
    diam = dlo if affine else iv.width
    return CylinderGeometry(word=tuple(word), interval=iv, diam=diam,
                            deriv_bracket=(dlo, dhi))


def encode_point(sys: MarkovSystem, x: float, depth: int) -> Word:
    """The depth-n symbolic code of x; ties go to the lower branch index.

    Raises EscapesRepellerError (carrying the escape depth) when an iterate
    leaves the branch domains before depth symbols are assigned.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    fam = sys.branches
    symbols: list[int] = []
    cur = x
    for d in range(1, depth + 1):
        i = fam.locate(cur)
        if i is None:
            raise EscapesRepellerError(d)
        symbols.append(i)
        cur = fam.inverse(i, cur)
    return tuple(symbols)


def project_word(sys: MarkovSystem, prefix: Word, precision: float) -> Interval:
    """Interval of width <= precision containing the projection of the prefix
    extended periodically (the whole prefix repeated).

    The result is the deepest cylinder used, so it contains pi(w) for the
    periodic extension w and is nested in every prefix cylinder.
    """
    if precision <= 0.0:
        raise ValueError("precision must be positive")
    if not prefix:
        raise ValueError("prefix must be nonempty")
    word = list(prefix)
    # depth at which xi-contraction certainly reaches the precision
    cap = (len(prefix) + sys.expansion_depth + 8
           + int(math.ceil(max(0.0, -math.log(precision)) / math.log(sys.xi))))
    k = 0
    geo = cylinder(sys, tuple(word))
    while geo.interval.width > precision:
        if len(word) >= cap:
            raise RuntimeError("projection failed to contract to the requested precision")
        word.append(prefix[k % len(prefix)])
        k += 1
        geo = cylinder(sys, tuple(word))
    return geo.interval


def enumerate_words(alphabet_subset: Sequence[int] | frozenset[int], n: int,
                    budget: int = DEFAULT_WORD_BUDGET) -> Iterator[Word]:
    """All words of length n over the subset, in lexicographic order."""
    symbols = sorted(set(alphabet_subset))
    if not symbols:
        raise ValueError("alphabet subset must be nonempty")
    if n < 1:
        raise ValueError("depth must be at least 1")
    count = len(symbols) ** n
    if count > budget:
        raise BudgetExceededError("enumeration", count, budget)
    return itertools.product(symbols, repeat=n)


class _AffineComposer:
    """Forward composition phi_w for affine families: x -> lo + w*x."""

    __slots__ = ("fam", "lo", "w")

    def __init__(self, fam, lo: float = 0.0, w: float = 1.0):
        self.fam = fam
        self.lo = lo
        self.w = w

    def child(self, s: int) -> "_AffineComposer":
        iv = self.fam.branch_interval(s)
        return _AffineComposer(self.fam, self.lo + self.w * iv.lo, self.w * iv.width)

    def interval(self) -> tuple[float, float]:
        return (self.lo, self.lo + self.w)


class _MoebiusComposer:
    """Forward composition for Gauss branches via integer continuants.

    phi_w(t) = (p1 + t*p0) / (q1 + t*q0); exact in Python integers.
    """

    __slots__ = ("p0", "p1", "q0", "q1")

    def __init__(self, p0: int = 1, p1: int = 0, q0: int = 0, q1: int = 1):
        self.p0 = p0
        self.p1 = p1
        self.q0 = q0
        self.q1 = q1

    def child(self, s: int) -> "_MoebiusComposer":
        return _MoebiusComposer(self.p1, self.p1 * s + self.p0,
                                self.q1, self.q1 * s + self.q0)

    def interval(self) -> tuple[float, float]:
        a = self.p1 / self.q1
        b = (self.p1 + self.p0) / (self.q1 + self.q0)
        return (a, b) if a <= b else (b, a)


class _WordComposer:
    """Fallback forward composition by re-evaluating the stored word."""

    __slots__ = ("fam", "word")

    def __init__(self, fam, word: Word = ()):
        self.fam = fam
        self.word = word

    def child(self, s: int) -> "_WordComposer":
        return _WordComposer(self.fam, self.word + (s,))

    def interval(self) -> tuple[float, float]:
        lo, hi = 0.0, 1.0
        for s in reversed(self.word):
            a = self.fam.apply(s, lo)
            b = self.fam.apply(s, hi)
            lo, hi = (a, b) if a <= b else (b, a)
        return (lo, hi)


def forward_composer(sys: MarkovSystem):
    """Root composer for depth-first cylinder walks with true nesting."""
    fam = sys.branches
    if isinstance(fam, GaussFamily):
        return _MoebiusComposer()
    if fam.is_affine:
        return _AffineComposer(fam)
    return _WordComposer(fam)


def doubling_map() -> MarkovSystem:
    """Two affine branches of ratio 1/2 on [0,1/2] and [1/2,1]."""
    return MarkovSystem(AffineFamily([(0.0, 0.5), (0.5, 1.0)]), xi=2.0)


def affine_system(ratios: Sequence[float],
                  placements: Sequence[float] | None = None,
                  xi: float | None = None) -> MarkovSystem:
    """Finite affine system; branches packed from 0 unless placements given."""
    if placements is None:
        lefts = list(itertools.accumulate([0.0] + list(ratios[:-1])))
    else:
        lefts = list(placements)
    images = [(l, l + r) for l, r in zip(lefts, ratios)]
    if xi is None:
        xi = 1.0 / max(ratios)
    return MarkovSystem(AffineFamily(images, ratios=ratios), xi=xi)


def gauss_system() -> MarkovSystem:
    """The Gauss map x -> 1/x mod 1 via its countable inverse branches.

    Continuant estimates give |(T^n)'| > sqrt(2)^n from depth 2 and a
    per-cylinder distortion ratio of at most 4, hence rho_n = log(4)/n.
    """
    return MarkovSystem(GaussFamily(), xi=math.sqrt(2.0), expansion_depth=2,
                        distortion=lambda n: math.log(4.0) / n)
