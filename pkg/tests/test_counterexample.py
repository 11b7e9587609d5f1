import math

import pytest

from shrinktarget import (
    ShrinkFn,
    Truncation,
    bowen_dimension,
    build_counterexample,
    verify_moran,
    zero_dim_cover_report,
)


@pytest.fixture(scope="module")
def ce_half():
    return build_counterexample(0.5, ShrinkFn.power(1))


@pytest.fixture(scope="module")
def ce_nine():
    return build_counterexample(0.9, ShrinkFn.exponential(0.1))


# ---------------------------------------------------------------- build

def test_threshold_index_conditions(ce_half):
    # oracle: evaluate both conditions directly; n = 2 fails the first
    # (Phi(2) = 1/2 is not below 1 - 2^{-1}), n = 3 passes both
    threshold = 1.0 - 2.0 ** (1.0 - 1.0 / 0.5)
    assert not (1.0 / 2.0 < threshold)
    assert 1.0 / 3.0 < threshold
    assert math.exp(-0.5 * 3) / (1 - math.exp(-0.5)) < 1.0
    assert ce_half.n0 == 3


def test_wide_branch_width(ce_half):
    # r1 = 2^{-1/beta} (1 - S)^{1/beta} with S the width-power series
    s_series, s_tail = ce_half.power_sum_tail_certified(0.5)
    r1 = math.exp(ce_half.log_r12)
    assert r1 == pytest.approx(0.25 * (1 - s_series) ** 2, rel=1e-12)
    assert s_tail < 1e-12


def test_min_branch_comparison_at_three(ce_half):
    # oracle: numeric comparison of the two min arguments at n = 3
    g3 = 1.0 / (math.exp(1.0 / 3.0) - 1.0)
    first = (2.0 + g3) ** -9 * math.exp(-18.0)
    second = (1.0 / 3.0 - 1.0 / 4.0) / 2.0
    assert first < second
    assert math.exp(ce_half.log_width(3)) == pytest.approx(first, rel=1e-12)


def test_placement_inside_gaps(ce_half):
    phi = ce_half.phi
    for n in range(ce_half.n0, ce_half.n0 + 12):
        iv = ce_half.interval(n)
        assert phi(n + 1) < iv.lo <= iv.hi < phi(n)
    gap_lo = phi(ce_half.n0)
    for iv in (ce_half.v1, ce_half.v2):
        assert gap_lo < iv.lo < iv.hi < 1.0
    assert ce_half.v1.hi < ce_half.v2.lo


def test_width_feasibility(ce_half):
    # 1 - Phi(n0) > 2^{1 - 1/beta} > 2 r1
    r1 = math.exp(ce_half.log_r12)
    assert 1.0 - ce_half.phi(ce_half.n0) > 2.0 ** (1.0 - 1.0 / ce_half.beta) > 2.0 * r1


def test_widths_below_exponential(ce_half):
    for n in range(ce_half.n0, ce_half.n0 + 30):
        assert ce_half.log_width(n) < -float(n)


def test_origin_outside_branches(ce_half):
    sys = ce_half.as_system()
    assert sys.branches.locate(0.0) is None
    # but branch intervals accumulate at 0
    assert ce_half.interval(40).hi < ce_half.phi(40) < 1e-1


def test_shrink_fn_validation():
    with pytest.raises(ValueError):
        ShrinkFn.power(-1.0)
    increasing = ShrinkFn(lambda n: float(n))
    increasing(1)
    with pytest.raises(ValueError):
        increasing(2)
    nonpositive = ShrinkFn(lambda n: 0.0)
    with pytest.raises(ValueError):
        nonpositive(3)


def test_build_validates_beta():
    with pytest.raises(ValueError):
        build_counterexample(1.2, ShrinkFn.power(1))


# ---------------------------------------------------------------- moran

def test_moran_residual_tiny(ce_half, ce_nine):
    assert verify_moran(ce_half) <= 1e-10
    assert verify_moran(ce_nine) <= 1e-10


def test_moran_detects_corruption(ce_half):
    # halving r2 changes the sum by r2^beta (1 - 2^{-beta})
    corrupt = lambda i: ce_half.log_width(i) - (math.log(2.0) if i == 2 else 0.0)
    residual = verify_moran(ce_half, width_override=corrupt)
    expect = math.exp(0.5 * ce_half.log_r12) * (1.0 - 2.0 ** -0.5)
    assert residual == pytest.approx(expect, rel=1e-9)
    assert residual > 1e-2


def test_bowen_brackets_beta(ce_half, ce_nine):
    for ce in (ce_half, ce_nine):
        subset = frozenset({1, 2}) | frozenset(range(ce.n0, ce.n0 + 60))
        trunc = Truncation.single(subset, n_max=1, use_tail=True)
        res = bowen_dimension(ce.as_system(), trunc, tol=1e-7)
        assert res.certified
        assert res.bracket[0] - 1e-9 <= ce.beta <= res.bracket[1] + 1e-9
        assert abs(res.value - ce.beta) <= 1e-6


# ---------------------------------------------------------------- zero-dim

def test_cover_levels_below_envelope_half(ce_half):
    report = zero_dim_cover_report(ce_half, eps=0.5, m=3, n_max=12)
    assert report.envelope_ok
    for (n, value), (_, bound) in zip(report.cover.per_level, report.envelope):
        assert value <= bound
        assert bound == pytest.approx(math.exp(-n) / (math.e - 1.0), rel=1e-12)
    assert report.cover.total <= report.full_series_bound
    assert report.full_series_bound == pytest.approx((math.e - 1.0) ** -2, rel=1e-12)


def test_cover_levels_below_envelope_fifth(ce_half):
    report = zero_dim_cover_report(ce_half, eps=0.2, m=6, n_max=12)
    assert report.envelope_ok


def test_cover_level_decay_ratio(ce_half):
    report = zero_dim_cover_report(ce_half, eps=0.5, m=3, n_max=10)
    values = [v for _, v in report.cover.per_level]
    for a, b in zip(values, values[1:]):
        assert b <= a * math.exp(-1.0)


def test_cover_report_domain_errors(ce_half):
    with pytest.raises(ValueError):
        zero_dim_cover_report(ce_half, eps=0.5, m=2, n_max=8)
    with pytest.raises(ValueError):
        zero_dim_cover_report(ce_half, eps=0.0, m=3, n_max=8)
    with pytest.raises(ValueError):
        zero_dim_cover_report(ce_half, eps=0.5, m=9, n_max=8)


def test_cover_report_other_parameters(ce_nine):
    report = zero_dim_cover_report(ce_nine, eps=0.5, m=3, n_max=8)
    assert report.envelope_ok
