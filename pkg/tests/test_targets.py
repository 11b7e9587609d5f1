import itertools
import math

import pytest
from hypothesis import given, settings, strategies as hyst

from shrinktarget import (
    Constant,
    ConstantRate,
    PotentialRate,
    TargetSpec,
    affine_system,
    cover_sum,
    cylinder,
    cylinder_density,
    doubling_map,
    gauss_system,
    hit_times,
    project_word,
    upper_dimension_certificate,
)

LOG2 = math.log(2.0)
ORIGIN_TARGET = TargetSpec(y=0.0, rate=ConstantRate(LOG2))


# ---------------------------------------------------------------- cover sums

def test_cover_doubling_geometric_closed_form():
    # oracle: level n holds 2^n words, each with diameter bound
    # 2^{-n} e^{-n log 2} = 4^{-n}; at s = 1 the level sum is 2^{-n}
    sys = doubling_map()
    rep = cover_sum(sys, ORIGIN_TARGET, s=1.0, m=3, n_max=10, subset={1, 2})
    for n, value in rep.per_level:
        assert value == pytest.approx(2.0 ** -n, rel=1e-12)
    assert rep.total == pytest.approx(2.0 ** -2 - 2.0 ** -10, rel=1e-12)


def test_cover_critical_exponent_flat_levels():
    # at s = 1/2 every level sum is exactly 1: non-summable, must refuse
    sys = doubling_map()
    rep = cover_sum(sys, ORIGIN_TARGET, s=0.5, m=3, n_max=9, subset={1, 2})
    for _, value in rep.per_level:
        assert value == pytest.approx(1.0, rel=1e-12)
    cert = upper_dimension_certificate(sys, ORIGIN_TARGET, s=0.5, m=3, n_max=9,
                                       subset={1, 2})
    assert not cert.accepted


def test_cover_empty_when_subset_misses_target():
    # branches live in [0, 0.3] and [0.4, 0.7]; the ball around y = 0.95 of
    # radius e^{-n log 4} < 0.05 never reaches them
    sys = affine_system([0.25, 0.25], placements=[0.0, 0.4], xi=4.0)
    target = TargetSpec(y=0.95, rate=ConstantRate(math.log(4.0)))
    rep = cover_sum(sys, target, s=0.7, m=2, n_max=8, subset={1, 2})
    assert rep.total == 0.0
    assert all(v == 0.0 for _, v in rep.per_level)


def test_cover_monotone_in_exponent():
    sys = doubling_map()
    totals = [cover_sum(sys, ORIGIN_TARGET, s, 3, 8, {1, 2}).total
              for s in (0.6, 0.8, 1.0, 1.2)]
    for a, b in zip(totals, totals[1:]):
        assert b <= a + 1e-15


def test_cover_pruning_sound_under_enlargement():
    sys = affine_system([0.3, 0.3, 0.3])
    target = TargetSpec(y=0.1, rate=ConstantRate(1.0))
    small = cover_sum(sys, target, 0.8, 2, 6, {1, 2})
    large = cover_sum(sys, target, 0.8, 2, 6, {1, 2, 3})
    for (_, a), (_, b) in zip(small.per_level, large.per_level):
        assert b >= a - 1e-15


def test_cover_potential_rate_matches_constant():
    sys = doubling_map()
    a = cover_sum(sys, TargetSpec(0.0, ConstantRate(0.4)), 0.9, 2, 7, {1, 2})
    b = cover_sum(sys, TargetSpec(0.0, PotentialRate(Constant(0.4))), 0.9, 2, 7, {1, 2})
    assert a.per_level == b.per_level


def test_cover_budget_error_reports_completed_level():
    from shrinktarget import BudgetExceededError

    sys = gauss_system()
    with pytest.raises(BudgetExceededError) as err:
        cover_sum(sys, TargetSpec(0.4, ConstantRate(1.0)), 0.8, 2, 12,
                  subset=range(1, 9), budget=5000)
    assert err.value.completed_level is not None
    assert 2 <= err.value.completed_level < 12


# ---------------------------------------------------------------- certificate

def test_certificate_accepts_above_critical():
    sys = doubling_map()
    cert = upper_dimension_certificate(sys, ORIGIN_TARGET, s=0.6, m=3, n_max=10,
                                       subset={1, 2})
    assert cert.accepted
    # oracle: per-level ratio e^{log2 - 0.6*2log2} = 2^{-0.2}
    assert cert.decay_ratio == pytest.approx(2.0 ** -0.2, rel=1e-9)
    assert cert.tail_bound is not None and cert.total_with_tail is not None
    assert "not a proof" in cert.message


def test_certificate_rejects_below_critical():
    sys = doubling_map()
    cert = upper_dimension_certificate(sys, ORIGIN_TARGET, s=0.4, m=3, n_max=10,
                                       subset={1, 2})
    assert not cert.accepted
    # oracle: ratio 2^{0.2} > 1
    assert cert.decay_ratio == pytest.approx(2.0 ** 0.2, rel=1e-9)


@pytest.mark.parametrize("alpha", [0.25, 1.0, 3.0])
def test_certificate_accepts_at_one_for_positive_rates(alpha):
    # oracle: at s = 1 the ratio is e^{-alpha} < 1 for the doubling map
    sys = doubling_map()
    cert = upper_dimension_certificate(sys, TargetSpec(0.0, ConstantRate(alpha)),
                                       s=1.0, m=2, n_max=8, subset={1, 2})
    assert cert.accepted
    assert cert.decay_ratio == pytest.approx(math.exp(-alpha), rel=1e-9)


def test_certificate_transition_brackets_critical_exponent():
    sys = doubling_map()

    def accepted(s):
        return upper_dimension_certificate(sys, ORIGIN_TARGET, s, 3, 10, {1, 2}).accepted

    lo, hi = 0.4, 0.6
    assert not accepted(lo) and accepted(hi)
    while hi - lo > 0.02:
        mid = 0.5 * (lo + hi)
        if accepted(mid):
            hi = mid
        else:
            lo = mid
    assert lo <= 0.5 <= hi
    assert hi - lo <= 0.02


# ---------------------------------------------------------------- density

def test_density_whole_space_tie_excluded():
    # the closed cylinder [1/2, 1] touches the boundary of the open ball
    # B(0, 1), so the tie-exclusion rule keeps only [0, 1/2]
    sys = doubling_map()
    assert cylinder_density(sys, 0.0, 1, 1.0, {1, 2}) == pytest.approx(0.5)
    # any radius beyond 1 recovers both level-1 cylinders
    r = 1.0 + 1e-9
    assert cylinder_density(sys, 0.0, 1, r, {1, 2}) == pytest.approx(1.0 / r)


def test_density_half_at_matching_radius():
    # cylinders inside B(0, 1/4): exactly [0, 1/8]; density (1/8)/(1/4) = 1/2
    sys = doubling_map()
    assert cylinder_density(sys, 0.0, 3, 2.0 * 2.0 ** -3, {1, 2}) == pytest.approx(0.5)


def test_density_zero_far_from_limit_set():
    sys = affine_system([0.25, 0.25], placements=[0.0, 0.75])
    # y in the central gap, radius smaller than the gap half-width
    assert cylinder_density(sys, 0.5, 4, 0.01, {1, 2}) == 0.0


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("kind", ["doubling", "gauss"])
def test_density_floor_at_projected_points(kind, seed):
    import random

    rng = random.Random(seed)
    if kind == "doubling":
        sys = doubling_map()
        symbols = [1, 2]
        subset = {1, 2}
    else:
        sys = gauss_system()
        symbols = [1, 2, 3, 4, 5]
        subset = set(range(1, 9))
    prefix = tuple(rng.choice(symbols) for _ in range(12))
    iv = project_word(sys, prefix, 1e-13)
    y = 0.5 * (iv.lo + iv.hi)
    for n in range(3, 11):
        r = 2.0 * cylinder(sys, prefix[:n]).diam
        density = cylinder_density(sys, y, n, r, subset)
        assert density >= 0.5 - 1e-9


def test_density_validates_input():
    sys = doubling_map()
    with pytest.raises(ValueError):
        cylinder_density(sys, 0.0, 0, 1.0, {1, 2})
    with pytest.raises(ValueError):
        cylinder_density(sys, 0.0, 2, 0.0, {1, 2})


# ---------------------------------------------------------------- hit times

def test_hits_fixed_point_on_target():
    sys = doubling_map()
    rep = hit_times(sys, itertools.repeat(1), TargetSpec(0.0, ConstantRate(1.0)), 50)
    assert rep.hits == tuple(range(1, 51))
    assert rep.misses == ()
    assert rep.undecided == ()


def test_hits_fixed_point_off_target():
    sys = doubling_map()
    rep = hit_times(sys, itertools.repeat(2), TargetSpec(0.0, ConstantRate(1.0)), 50)
    assert rep.misses == tuple(range(1, 51))
    assert rep.hits == ()
    assert rep.undecided == ()


def test_hits_binary_odometer_exact_schedule():
    # code (1,2,1,2,...) projects to 1/3; even shifts return to 1/3 and hit,
    # odd shifts sit at 2/3 with distance exactly 1/3, which beats the
    # threshold e^{-0.1 n} only once n >= 11 (exact ternary oracle)
    sys = doubling_map()
    rep = hit_times(sys, itertools.cycle([1, 2]), TargetSpec(1.0 / 3.0, ConstantRate(0.1)), 50)
    expect_hits = tuple(sorted([n for n in range(1, 51) if n % 2 == 0]
                               + [n for n in range(1, 51, 2) if 1.0 / 3.0 < math.exp(-0.1 * n)]))
    assert rep.hits == expect_hits
    assert rep.misses == tuple(n for n in range(1, 51, 2) if n >= 11)
    assert rep.undecided == ()


def test_hits_trichotomy_partition():
    sys = doubling_map()
    rep = hit_times(sys, itertools.cycle([1, 2, 2]), TargetSpec(0.2, ConstantRate(0.3)), 40)
    combined = sorted(rep.hits + rep.misses + rep.undecided)
    assert combined == list(range(1, 41))


def test_hits_constant_rate_equals_constant_potential():
    sys = doubling_map()
    a = hit_times(sys, itertools.cycle([1, 2]), TargetSpec(0.25, ConstantRate(0.7)), 40)
    b = hit_times(sys, itertools.cycle([1, 2]),
                  TargetSpec(0.25, PotentialRate(Constant(0.7))), 40)
    assert a == b


def test_hits_exhausted_code_yields_undecided():
    sys = doubling_map()
    rep = hit_times(sys, iter([1, 1, 1]), TargetSpec(0.0, ConstantRate(1.0)), 6)
    assert rep.undecided != ()
    assert set(rep.undecided) >= {4, 5, 6}


@settings(max_examples=20, deadline=None)
@given(hyst.integers(min_value=0, max_value=1000))
def test_hits_tightening_precision_only_resolves(seed):
    import random

    rng = random.Random(seed)
    sys = doubling_map()
    code = [rng.choice([1, 2]) for _ in range(90)]
    target = TargetSpec(rng.random(), ConstantRate(0.5))
    coarse = hit_times(sys, iter(code), target, 30, base_precision=1e-5)
    fine = hit_times(sys, iter(code), target, 30, base_precision=1e-12)
    assert set(fine.hits) >= set(coarse.hits)
    assert set(fine.misses) >= set(coarse.misses)
    assert set(fine.undecided) <= set(coarse.undecided)
