import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_centroid
from fuzzydevs.fuzzy import (ClippedSet, FuzzyError, FuzzyRule, LinguisticVariable,
                             PiecewiseLinearFn, RuleBase, Trapezoid, ZeroActivation, aggregate,
                             centroid, centroid_numeric, clip_consequent, crisp, eval_membership,
                             fis_evaluate, infer, rule_activation, triangle)

DRY = Trapezoid(0, 0, 30, 70)
WET = Trapezoid(30, 70, 100, 100)
CALM = Trapezoid(0, 0, 20, 50)
POWER = Trapezoid(20, 50, 100, 100)
FAST = Trapezoid(0.3, 0.3, 0.4, 0.6)
SLOW = Trapezoid(0.4, 0.6, 0.8, 0.8)
OUT = (0.3, 0.8)


@pytest.mark.parametrize("mf, x, expected", [
    (DRY, 45, 0.625),
    (DRY, 15, 1.0),
    (WET, 10, 0.0),
    (WET, 45, 0.375),
    (CALM, 35, 0.5),
    (POWER, 35, 0.5),
    (DRY, 0, 1.0),
    (DRY, -3, 0.0),
    (WET, 100, 1.0),
])
def test_eval_membership(mf, x, expected):
    assert eval_membership(mf, x) == pytest.approx(expected, abs=1e-15)


def test_trapezoid_rejects_unordered():
    with pytest.raises(FuzzyError):
        Trapezoid(0, 2, 1, 3)


def test_degenerate_shapes():
    tri = triangle(0, 1, 2)
    assert tri(1) == 1.0 and tri(0.5) == 0.5
    box = crisp(2, 4)
    assert box(2) == 1.0 and box(4) == 1.0 and box(4.0001) == 0.0


def test_rule_activation():
    assert rule_activation([0.625, 0.5]) == 0.5
    assert rule_activation([1.0, 1.0]) == 1.0
    assert rule_activation([0.0, 0.9]) == 0.0
    with pytest.raises(FuzzyError):
        rule_activation([])


def test_clip_consequent():
    c = clip_consequent(SLOW, 0.5)
    assert c == ClippedSet(0.5, SLOW)
    assert c(0.7) == 0.5
    zero = clip_consequent(FAST, 0.0)
    assert all(zero(u) == 0.0 for u in np.linspace(0.3, 0.8, 51))
    full = clip_consequent(FAST, 1.0)
    assert all(full(u) == FAST(u) for u in np.linspace(0.2, 0.9, 71))
    with pytest.raises(FuzzyError):
        clip_consequent(FAST, 1.5)


def test_aggregate_flat_half():
    f = aggregate([ClippedSet(0.5, FAST), ClippedSet(0.5, SLOW)], OUT)
    for u in np.linspace(0.3, 0.8, 101):
        assert f(u) == pytest.approx(0.5, abs=1e-12)
    assert f.span == (0.3, 0.8)


def test_aggregate_single_full_set_is_the_set():
    f = aggregate([ClippedSet(1.0, SLOW)], OUT)
    for u in np.linspace(0.3, 0.8, 101):
        assert f(u) == pytest.approx(SLOW(u), abs=1e-12)


def test_aggregate_idempotent():
    one = aggregate([ClippedSet(0.7, SLOW)], OUT)
    two = aggregate([ClippedSet(0.7, SLOW), ClippedSet(0.7, SLOW)], OUT)
    assert one == two


def test_aggregate_errors():
    with pytest.raises(FuzzyError):
        aggregate([], OUT)
    with pytest.raises(FuzzyError):
        aggregate([ClippedSet(1.0, Trapezoid(0, 1, 2, 3))], OUT)


def test_aggregate_records_crossings():
    # Two ramps crossing at u=0.5 must produce a breakpoint there.
    f = aggregate([ClippedSet(1.0, Trapezoid(0.0, 0.0, 0.0, 1.0)),
                   ClippedSet(1.0, Trapezoid(0.0, 1.0, 1.0, 1.0))], (0.0, 1.0))
    assert any(abs(u - 0.5) < 1e-15 for u, _ in f.breakpoints)
    assert f(0.5) == pytest.approx(0.5)
    assert f(0.25) == pytest.approx(0.75)


@pytest.mark.parametrize("f, expected", [
    (PiecewiseLinearFn(((0.3, 0.5), (0.8, 0.5))), 0.55),
    (aggregate([ClippedSet(1.0, SLOW)], OUT), 0.19333333333333333 / 0.3),
    (aggregate([ClippedSet(1.0, FAST)], OUT), 0.08166666666666667 / 0.2),
])
def test_centroid_hand_values(f, expected):
    assert centroid(f) == pytest.approx(expected, abs=1e-12)


def test_hand_values_against_brute_oracle():
    # Freezes the hand-integrated centroids by an independent route.
    assert brute_centroid([ClippedSet(1.0, SLOW)], *OUT) == pytest.approx(0.644444, abs=1e-6)
    assert brute_centroid([ClippedSet(1.0, FAST)], *OUT) == pytest.approx(0.408333, abs=1e-6)
    assert brute_centroid([ClippedSet(0.5, FAST), ClippedSet(0.5, SLOW)], *OUT) \
        == pytest.approx(0.55, abs=1e-9)


def test_centroid_zero_area():
    with pytest.raises(ZeroActivation):
        centroid(aggregate([ClippedSet(0.0, SLOW), ClippedSet(0.0, FAST)], OUT))


def test_centroid_numeric():
    flat = PiecewiseLinearFn(((0.3, 0.5), (0.8, 0.5)))
    assert centroid_numeric(flat, 10001) == pytest.approx(0.55, abs=1e-9)
    slow = aggregate([ClippedSet(1.0, SLOW)], OUT)
    assert centroid_numeric(slow, 10001) == pytest.approx(0.644444, abs=1e-4)
    with pytest.raises(ZeroActivation):
        centroid_numeric(PiecewiseLinearFn(((0.3, 0.0), (0.8, 0.0))), 10001)
    with pytest.raises(FuzzyError):
        centroid_numeric(flat, 1)


def test_piecewise_rejects_decreasing_abscissa():
    with pytest.raises(FuzzyError):
        PiecewiseLinearFn(((0.5, 0.1), (0.4, 0.2)))


@pytest.mark.parametrize("h, v, expected", [
    (45, 35, 0.550),
    (80, 10, 0.644444),
    (0, 100, 0.408333),
])
def test_fis_evaluate(rule_base, h, v, expected):
    assert fis_evaluate(rule_base, [h, v]) == pytest.approx(expected, abs=1e-6)


def test_infer_activations(rule_base):
    inf = infer(rule_base, [45, 35])
    got = {str(r): a for r, a in inf.activations}
    assert got == {"Dry&Calm->Slow": 0.5, "Wet&Calm->Slow": 0.375,
                   "Dry&Power->Fast": 0.5, "Wet&Power->Slow": 0.375}


def test_inputs_clamped(rule_base):
    assert fis_evaluate(rule_base, [-20, 250]) == fis_evaluate(rule_base, [0, 100])


def test_rule_base_validation():
    h = LinguisticVariable("H", (0, 100), (("Dry", DRY), ("Wet", WET)))
    v = LinguisticVariable("V", (0, 100), (("Calm", CALM), ("Power", POWER)))
    t = LinguisticVariable("tau", OUT, (("Fast", FAST), ("Slow", SLOW)))
    with pytest.raises(FuzzyError, match="missing"):
        RuleBase((h, v), t, (FuzzyRule(("Dry", "Calm"), "Slow"),))
    with pytest.raises(FuzzyError, match="unknown term"):
        RuleBase((h, v), t, (FuzzyRule(("Dry", "Breeze"), "Slow"),))
    with pytest.raises(FuzzyError, match="duplicate"):
        LinguisticVariable("H", (0, 100), (("Dry", DRY), ("Dry", WET)))
    with pytest.raises(FuzzyError, match="universe"):
        LinguisticVariable("H", (0, 50), (("Wet", WET),))


# Properties

reals = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


@st.composite
def trapezoids(draw, lo=0.0, hi=1.0, min_ramp=0.0):
    xs = sorted(draw(st.lists(st.floats(min_value=lo, max_value=hi), min_size=4, max_size=4)))
    a, b, c, d = xs
    if min_ramp:
        if b - a < min_ramp or d - c < min_ramp:
            a, b, c, d = lo, lo + (hi - lo) * 0.3, lo + (hi - lo) * 0.5, hi
    return Trapezoid(a, b, c, d)


@settings(max_examples=300, deadline=None)
@given(trapezoids(lo=-100, hi=100), reals)
def test_membership_in_unit_interval(mf, x):
    assert 0.0 <= mf(x) <= 1.0


def test_membership_range_fuzz():
    rng = np.random.default_rng(7)
    xs = rng.uniform(-200, 200, 10**6)
    for i, mf in enumerate((DRY, WET, CALM, POWER)):
        vals = [mf(float(x)) for x in xs[i::4]]
        assert min(vals) >= 0.0 and max(vals) <= 1.0


def test_partition_of_unity():
    for x in np.linspace(0, 100, 10001):
        assert abs(DRY(x) + WET(x) - 1.0) <= 1e-12
        assert abs(CALM(x) + POWER(x) - 1.0) <= 1e-12


@st.composite
def mixtures(draw):
    n = draw(st.integers(1, 5))
    sets = [ClippedSet(draw(st.floats(0.05, 1.0)), draw(trapezoids(min_ramp=0.02)))
            for _ in range(n)]
    return sets


@settings(max_examples=200, deadline=None)
@given(mixtures(), trapezoids(min_ramp=0.02), st.floats(0.0, 1.0))
def test_aggregate_monotone(sets, extra_base, level):
    f = aggregate(sets, (0.0, 1.0))
    g = aggregate(sets + [ClippedSet(level, extra_base)], (0.0, 1.0))
    for u in np.linspace(0.0, 1.0, 201):
        assert g(u) >= f(u) - 1e-12


@settings(max_examples=200, deadline=None)
@given(mixtures())
def test_aggregate_is_pointwise_max(sets):
    f = aggregate(sets, (0.0, 1.0))
    for u in np.linspace(0.0, 1.0, 157):
        assert f(u) == pytest.approx(max(s(u) for s in sets), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(mixtures())
def test_centroid_bounds_and_oracle(sets):
    f = aggregate(sets, (0.0, 1.0))
    y = centroid(f)
    assert min(s.base.l_foot for s in sets) - 1e-12 <= y <= max(s.base.r_foot for s in sets) + 1e-12
    assert abs(y - centroid_numeric(f, 10001)) <= 1e-4


def test_centroid_with_interior_jumps():
    rng = random.Random(3)
    for _ in range(50):
        sets = []
        for _ in range(rng.randint(1, 4)):
            a, b = sorted(rng.uniform(0, 1) for _ in range(2))
            sets.append(ClippedSet(rng.uniform(0.1, 1.0), crisp(a, b) if b - a > 0.01 else crisp(0.2, 0.6)))
        y = centroid(aggregate(sets, (0.0, 1.0)))
        assert y == pytest.approx(brute_centroid(sets, 0.0, 1.0), abs=1e-5)


@settings(max_examples=300, deadline=None)
@given(st.floats(-50, 150), st.floats(-50, 150))
def test_fis_output_inside_universe(h, v):
    from fuzzydevs.fuzzy import default_rule_base
    y = fis_evaluate(default_rule_base(), [h, v])
    assert 0.3 <= y <= 0.8
    assert not math.isnan(y)
