import math

import pytest
from hypothesis import given, settings, strategies as hyst

from shrinktarget import (
    Constant,
    LogDerivative,
    PerSymbolBracket,
    Scale,
    Sum,
    affine_system,
    birkhoff_bracket,
    doubling_map,
    gauss_system,
    partition_sum,
    pressure_bracket,
)

PSI = LogDerivative()


# ---------------------------------------------------------------- birkhoff

def test_birkhoff_doubling_psi_exact():
    sys = doubling_map()
    lo, hi = birkhoff_bracket(sys, PSI, (1, 2, 1, 2))
    assert lo == hi == pytest.approx(4 * math.log(2), rel=1e-15)


def test_birkhoff_gauss_psi_branch_one():
    sys = gauss_system()
    lo, hi = birkhoff_bracket(sys, PSI, (1,))
    # oracle: |T'| = 1/x^2 on [1/2, 1] spans [1, 4], so S_1(psi) spans [0, log 4]
    assert lo <= 0.0 + 1e-12
    assert hi >= math.log(4.0) - 1e-12
    assert lo == pytest.approx(0.0, abs=1e-12)
    assert hi == pytest.approx(math.log(4.0), abs=1e-12)


def test_birkhoff_constant_adds():
    sys = doubling_map()
    assert birkhoff_bracket(sys, Constant(0.3), (1, 1, 2, 2)) == (1.2, 1.2)


def test_birkhoff_scale_and_sum():
    sys = doubling_map()
    pot = Sum(Scale(2.0, PSI), Constant(1.0))
    lo, hi = birkhoff_bracket(sys, pot, (1, 2))
    assert lo == hi == pytest.approx(2 * (2 * math.log(2)) + 2.0)


def test_per_symbol_bracket_table():
    sys = doubling_map()
    pot = PerSymbolBracket.from_mapping({1: (0.1, 0.2), 2: (0.3, 0.5)})
    assert birkhoff_bracket(sys, pot, (1, 2)) == pytest.approx((0.4, 0.7))


def test_nonnegativity_validation():
    with pytest.raises(ValueError):
        Constant(-1.0)
    with pytest.raises(ValueError):
        Scale(-0.5, PSI)
    with pytest.raises(ValueError):
        PerSymbolBracket.from_mapping({1: (-0.1, 0.2)})


# ---------------------------------------------------------------- partition

def test_partition_zero_potential():
    sys = doubling_map()
    for mode in ("sup", "inf"):
        assert partition_sum(sys, Constant(0.0), {1, 2}, 3, mode) == pytest.approx(math.log(8))


def test_partition_doubling_unit_scale():
    sys = doubling_map()
    for mode in ("sup", "inf"):
        assert partition_sum(sys, Scale(1.0, PSI), {1, 2}, 5, mode) == pytest.approx(0.0, abs=1e-12)


def test_partition_gauss_depth_one_endpoint_oracle():
    sys = gauss_system()
    # oracle: direct evaluation of 1/(i+x)^2 at the interval endpoints
    w1 = 1.0 / (1.0 + 0.0) ** 2   # sup |phi_1'|
    w2 = 1.0 / (2.0 + 0.0) ** 2   # sup |phi_2'|
    expect = math.log(w1 + w2)
    got = partition_sum(sys, Scale(1.0, PSI), {1, 2}, 1, "sup")
    assert got == pytest.approx(expect, abs=1e-12)
    i1 = 1.0 / (1.0 + 1.0) ** 2   # inf |phi_1'|
    i2 = 1.0 / (2.0 + 1.0) ** 2
    got_inf = partition_sum(sys, Scale(1.0, PSI), {1, 2}, 1, "inf")
    assert got_inf == pytest.approx(math.log(i1 + i2), abs=1e-12)


# ---------------------------------------------------------------- pressure

def test_pressure_doubling_half_scale():
    sys = doubling_map()
    est = pressure_bracket(sys, Scale(0.5, PSI), {1, 2}, n_max=4)
    assert est.lower == pytest.approx(0.5 * math.log(2), rel=1e-12)
    assert est.upper == pytest.approx(0.5 * math.log(2), rel=1e-12)
    assert not est.diverged


def test_pressure_thirds_moran_zero():
    sys = affine_system([1 / 3, 1 / 3, 1 / 3])
    est = pressure_bracket(sys, Scale(1.0, PSI), {1, 2, 3}, n_max=3)
    assert est.lower == pytest.approx(0.0, abs=1e-12)
    assert est.upper == pytest.approx(0.0, abs=1e-12)


def test_pressure_gauss_diverges_below_half():
    sys = gauss_system()
    est = pressure_bracket(sys, Scale(0.4, PSI), {1, 2, 3}, n_max=2, tail="family")
    assert est.diverged
    assert est.upper == math.inf
    assert math.isfinite(est.lower)


def test_pressure_gauss_tail_converges_above_half():
    sys = gauss_system()
    est = pressure_bracket(sys, Scale(1.0, PSI), range(1, 9), n_max=2, tail="family")
    assert not est.diverged
    assert math.isfinite(est.upper)
    assert est.lower <= est.upper
    # Bowen: the full Gauss system has dimension 1, so P(-psi) <= 0
    assert est.lower <= 0.0


def test_pressure_no_tail_leaves_upper_infinite_for_table_potentials():
    sys = gauss_system()
    pot = Sum(PSI, PerSymbolBracket(table=lambda i: (0.0, 1.0 / i)))
    est = pressure_bracket(sys, pot, {1, 2}, n_max=2, tail="family")
    assert est.upper == math.inf
    assert math.isfinite(est.lower)


# ---------------------------------------------------------------- invariants

RATIO_LISTS = hyst.lists(hyst.floats(min_value=0.05, max_value=0.3), min_size=2,
                         max_size=5).filter(lambda rs: sum(rs) <= 1.0)


@settings(max_examples=50, deadline=None)
@given(RATIO_LISTS, hyst.floats(min_value=0.0, max_value=2.0))
def test_bracket_valid_and_zero_potential(ratios, s):
    sys = affine_system(ratios)
    full = frozenset(range(1, len(ratios) + 1))
    est = pressure_bracket(sys, Scale(s, PSI), full, n_max=3)
    assert est.lower <= est.upper + 1e-12
    zero = pressure_bracket(sys, Constant(0.0), full, n_max=3)
    assert zero.lower == zero.upper == pytest.approx(math.log(len(ratios)), rel=1e-14)


def test_lower_monotone_in_subset():
    sys = gauss_system()
    pot = Scale(1.5, PSI)
    prev = -math.inf
    for k in (2, 4, 8, 16):
        est = pressure_bracket(sys, pot, range(1, k + 1), n_max=3)
        assert est.lower >= prev - 1e-14
        prev = est.lower


def test_upper_nonincreasing_in_depth_gauss():
    sys = gauss_system()
    pot = Scale(1.0, PSI)
    uppers = [partition_sum(sys, pot, {1, 2, 3}, n, "sup") / n for n in range(1, 6)]
    for a, b in zip(uppers, uppers[1:]):
        assert b <= a + 1e-12


def test_submultiplicative_sup_sums():
    sys = gauss_system()
    pot = Scale(0.8, PSI)
    logz = {n: partition_sum(sys, pot, {1, 2}, n, "sup") for n in range(1, 7)}
    for m in range(1, 4):
        for n in range(1, 4):
            assert logz[m + n] <= logz[m] + logz[n] + 1e-12


def test_supermultiplicative_inf_sums():
    sys = gauss_system()
    pot = Scale(0.8, PSI)
    logz = {n: partition_sum(sys, pot, {1, 2}, n, "inf") for n in range(1, 7)}
    for m in range(1, 4):
        for n in range(1, 4):
            assert logz[m + n] >= logz[m] + logz[n] - 1e-12


@settings(max_examples=30, deadline=None)
@given(hyst.floats(min_value=0.0, max_value=1.5), hyst.floats(min_value=0.01, max_value=0.5))
def test_upper_monotone_in_scale(s, ds):
    sys = gauss_system()
    pot_small = Scale(s, Sum(PSI, Constant(0.2)))
    pot_large = Scale(s + ds, Sum(PSI, Constant(0.2)))
    a = pressure_bracket(sys, pot_small, {1, 2, 3}, n_max=3)
    b = pressure_bracket(sys, pot_large, {1, 2, 3}, n_max=3)
    assert b.upper <= a.upper + 1e-12
