import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mutualcover import bounds as b
from mutualcover import probcore as pc
from mutualcover.bounds import CoveringSet, RatePair
from mutualcover.bounds.exponents import ternary_max
from mutualcover.errors import (EpsilonTooLarge, PreconditionMN, RegimeError,
                                ValidationError, ZeroVarentropy)
from mutualcover.oracle import density_window_set, exact_failure

from conftest import make_joint

LN2 = math.log(2)
DSBS_MI = 0.34663184364127914
DSBS_D2 = 0.47523989604098194


def product_joint():
    return pc.build_joint(np.outer([0.3, 0.7], [0.5, 0.25, 0.25]))


# --- covering bounds -------------------------------------------------------

def test_unilateral_product_clamps_to_one():
    j = product_joint()
    r = b.unilateral_bound(j, CoveringSet.full(j), 1, 1.0)
    assert r.value == 1.0
    assert any("clamped" in n for n in r.notes)


def test_unilateral_against_oracle():
    j = pc.tensor_power(pc.dsbs(0.11), 8)
    f = density_window_set(j, 8 * DSBS_MI - 2.0, 8 * DSBS_MI + 2.0)
    m = math.exp(8 * 0.5)
    r = b.unilateral_bound(j, f, m, 2.0)
    exact = exact_failure(j, f, int(m), 1)
    assert r.value >= exact


def test_resolvability_reduces_to_unilateral():
    j = pc.dsbs(0.2)
    f = CoveringSet.full(j)
    for m in (1, 3, 10):
        uni = b.unilateral_bound(j, f, m, 0.7)
        res = b.resolvability_bound(j, f, m, 1, 1e-9, 0.7)
        assert res.value == pytest.approx(uni.value, abs=1e-9)


def test_resolvability_against_oracle(rng):
    for _ in range(10):
        j = make_joint(rng, 3, 3)
        f = CoveringSet.density_threshold(j, -0.5)
        r = b.resolvability_bound(j, f, 3, 3, 0.5, 1.0)
        assert r.value >= exact_failure(j, f, 3, 3) - 1e-12


def test_secondmoment():
    j = pc.dsbs(0.11)
    f = CoveringSet.full(j)
    # eps -> 0 and F = everything: exp(I_inf)/(ML) + (1/M + 1/L)
    r = b.secondmoment_bound(j, f, 64, 64, 1e-12)
    expect = 1.78 / 64**2 + 2 / 64
    assert r.value == pytest.approx(expect, rel=1e-9)
    half = CoveringSet.from_mask([[1, 0], [0, 0]], j)
    assert half.mass(j) == pytest.approx(0.445)
    with pytest.raises(EpsilonTooLarge):
        b.secondmoment_bound(j, half, 4, 4, 0.6)
    with pytest.raises(ValidationError):
        b.secondmoment_bound(j, f, 4, 4, 1.0)


def test_secondmoment_verbatim_form_is_not_a_bound():
    j = pc.build_joint(np.full((2, 2), 0.25))
    empty = CoveringSet.empty(j)
    assert exact_failure(j, empty, 8, 8) == 1.0
    assert b.secondmoment_bound(j, empty, 8, 8, 0.1, verbatim=True).value < 1.0
    with pytest.raises(EpsilonTooLarge):
        b.secondmoment_bound(j, empty, 8, 8, 0.1)


def test_secondmoment_valid_against_oracle(rng):
    for _ in range(10):
        j = make_joint(rng, 2, 3)
        f = CoveringSet.full(j)
        r = b.secondmoment_bound(j, f, 6, 6, 0.05)
        assert r.value >= exact_failure(j, f, 6, 6) - 1e-12


def test_limited_independence_vacuous_and_oracle(rng):
    j = pc.dsbs(0.2)
    r = b.limited_independence_bound(j, CoveringSet.empty(j), 8, 8, math.log(4))
    assert r.value == 1.0 and "vacuous" in r.notes[0]
    for _ in range(10):
        j = make_joint(rng, 2, 3)
        f = CoveringSet.full(j)
        r = b.limited_independence_bound(j, f, 8, 8, math.log(4))
        assert r.value >= exact_failure(j, f, 8, 8) - 1e-12
    # large sizes drive it to 0
    j = pc.dsbs(0.2)
    assert b.limited_independence_bound(j, CoveringSet.full(j), 1e9, 1e9, 10).value < 1e-3


def test_talagrand_against_oracle_and_limited_independence(rng):
    j = pc.dsbs(0.2)
    assert b.talagrand_bound(j, CoveringSet.empty(j), 16, 16, 1.0).value == 1.0
    compared = 0
    for _ in range(40):
        j = make_joint(rng, 3, 3)
        f = CoveringSet.full(j)
        for gamma in (0.5, 1.0, 2.0):
            t = b.talagrand_bound(j, f, 16, 16, gamma)
            li = b.limited_independence_bound(j, f, 16, 16, gamma)
            assert t.value >= exact_failure(j, f, 16, 16) - 1e-12
            # the Talagrand denominator is at most four times the other one
            assert t.value <= math.exp(-1 / (4 * li.value)) * (1 + 1e-12)
    for _ in range(40):
        j = make_joint(rng, 3, 3)
        f = CoveringSet.full(j)
        for gamma in (3.0, 4.0, 5.0):
            t = b.talagrand_bound(j, f, 64, 64, gamma)
            li = b.limited_independence_bound(j, f, 64, 64, gamma)
            if li.value < 0.1:
                compared += 1
                assert t.value < li.value
    assert compared > 0


def test_talagrand_can_exceed_limited_independence_near_one_over_e():
    j = pc.dsbs(0.2)
    f = CoveringSet.full(j)
    t = b.talagrand_bound(j, f, 16, 16, 2.0).value
    li = b.limited_independence_bound(j, f, 16, 16, 2.0).value
    assert li < t < 1 / math.e


def test_talagrand_direct_formula():
    j = pc.dsbs(0.11)
    f = CoveringSet.full(j)
    m = l = 32
    gamma = 2 * math.log(32) - math.log(1.78)
    # truncation keeps every atom: density <= ln 1.78
    den = 4 * math.exp(-gamma) + 4 / 32
    r = b.talagrand_bound(j, f, m, l, gamma)
    assert r.value == pytest.approx(math.exp(-1 / den), rel=1e-12)
    assert r.log_value == pytest.approx(-1 / den, rel=1e-12)


def test_typical_optimized_product():
    j = product_joint()
    m, l = 5.0, 7.0
    r = b.typical_bound_optimized(j, 1.0, m, l)
    assert r.value == pytest.approx(math.exp(-1 / (2 / m + 2 / l + 4 / (m * l))), rel=1e-12)


def test_typical_optimized_matches_brute_force(rng):
    for _ in range(10):
        j = make_joint(rng, 3, 3)
        p, m, l = 0.7, 20.0, 30.0
        # oracle: try every eps on a fine grid
        best = 0.0
        for eps in np.linspace(0, p, 2001):
            sm = pc.smooth_mutual_information(j, eps)
            best = max(best, (p - eps) / (2 / m + 2 / l + 4 * math.exp(sm) / (m * l)))
        r = b.typical_bound_optimized(j, p, m, l)
        assert -r.log_value >= best - 1e-12
        assert -r.log_value <= best * (1 + 1e-3) + 1e-12
        at_zero = math.exp(-p / (2 / m + 2 / l + 4 * math.exp(pc.smooth_mutual_information(j, 0)) / (m * l)))
        assert r.value <= at_zero + 1e-15


def test_typical_optimized_rate_approaches_limit():
    base = pc.dsbs(0.11).spectrum
    target = min(0.5, 1 - DSBS_MI)
    errs = []
    for n in (20, 100, 200):
        r = b.typical_bound_optimized(base.power(n), 0.5, math.exp(n * 0.5), math.exp(n * 0.5))
        errs.append(abs(math.log(-r.log_value) / n - target))
    assert errs[0] > errs[-1]
    assert errs[-1] / target < 0.1


def test_multivariate_bound():
    j = pc.dsbs(0.2)
    mv = pc.MultivarPmf.from_joint(j)
    empty = np.zeros(mv.tensor.shape, dtype=bool)
    assert b.multivariate_bound(mv, [4, 4], 1.0, empty).value == 1.0
    for gamma in (0.5, 1.0, 2.0):
        r = b.multivariate_bound(mv, [64, 64], gamma)
        assert r.value >= exact_failure(j, CoveringSet.full(j), 64, 64) - 1e-12
    with pytest.raises(ValidationError):
        b.multivariate_bound(mv, [4], 1.0)


# --- simulation bounds -----------------------------------------------------

def test_sim_achievability():
    with pytest.raises(PreconditionMN):
        b.sim_achievability_bound(pc.dsbs(0.11), 2, 2, 0.9)
    prod = product_joint()
    assert b.sim_achievability_bound(prod, 1e6, 1e6, 0.5).value < 1e-6
    sp = pc.dsbs(0.11).spectrum.power(10)
    m = math.exp(10 * 0.6 * LN2)
    r = b.sim_achievability_bound(sp, m, m, 0.5)
    # threshold ln(0.5 M L / (3 ln 2)) is above the largest density 10 ln 1.78
    assert 2 * math.log(m) + math.log(0.5) - math.log(3 * LN2) > 10 * math.log(1.78)
    assert r.params["tail_term"] == 0.0
    assert r.value == r.params["typical_term"] > 0
    # smaller codebooks put the threshold between the two top levels
    r = b.sim_achievability_bound(sp, 20, 20, 0.5)
    assert r.params["tail_term"] == pytest.approx(0.89**10, rel=1e-12)


def test_sim_converse():
    assert b.sim_converse_bound(product_joint(), 4, 4).value == 0.0
    j = pc.dsbs(0.11)
    # one level above ln ML: d = ln 1.78 with mass 0.89
    ml = 1.5
    r = b.sim_converse_bound(j, ml, 1)
    assert r.value == pytest.approx((1 - ml / 1.78) * 0.89, rel=1e-12)


def test_converse_below_achievability(rng):
    checked = 0
    while checked < 100:
        j = make_joint(rng, 3, 3)
        p = 0.5
        m = l = 3 / p * math.log(1 / (1 - p)) * float(rng.uniform(1, 3))
        conv = b.sim_converse_bound(j, m, l).value
        ach = b.sim_achievability_bound(j, m, l, p).value
        assert conv <= ach + 1e-12
        checked += 1


def test_weighted_sampler_bound(rng):
    r_mean, r_tail = b.weighted_sampler_bound(product_joint(), 3, 5)
    assert r_mean.value == pytest.approx(1 / 16)
    small, _ = b.weighted_sampler_bound(pc.dsbs(0.11), 1e12, 1e12)
    assert small.value < 1e-11
    for _ in range(50):
        j = make_joint(rng, 3, 4)
        m, l = rng.uniform(1, 50, size=2)
        mean_bound, tail_bound = b.weighted_sampler_bound(j, m, l)
        assert mean_bound.value <= tail_bound.value + 1e-12


def test_worstcase_gap_bound():
    assert b.worstcase_gap_bound(product_joint(), 100, 100, 0.5).value == 0.0
    sp = pc.dsbs(0.11).spectrum.power(6)
    # threshold ln(81 / (6 ln 2)) = 2.96 lies between 5 and 6 high-density coordinates
    r = b.worstcase_gap_bound(sp, 9, 9, 0.5)
    assert r.value == pytest.approx(0.496981290961, abs=1e-12)
    assert r.value == pytest.approx(0.89**6, rel=1e-12)
    with pytest.raises(PreconditionMN):
        b.worstcase_gap_bound(sp, 9, 9, 0.99)
    with pytest.raises(ValidationError):
        b.worstcase_gap_bound(sp, 9, 9, 1.0)


def test_second_order_error():
    j = pc.dsbs(0.11)
    assert b.second_order_error(j, 0.0) == 0.5
    assert b.second_order_error(j, 1e3) == pytest.approx(0.0, abs=1e-300)
    assert b.second_order_error(j, pc.varentropy(j)) == pytest.approx(pc.q_function(1.0), rel=1e-12)
    prod = product_joint()
    assert b.second_order_error(prod, 0.0) == 0.5
    with pytest.raises(ZeroVarentropy):
        b.second_order_error(prod, 0.1)


# --- exponents -------------------------------------------------------------

def test_dee_exponent():
    j = pc.dsbs(0.11)
    assert b.dee_exponent(j, RatePair(DSBS_MI, DSBS_MI)) == pytest.approx(DSBS_MI)
    assert b.dee_exponent(product_joint(), RatePair(0.3, 0.2)) == pytest.approx(0.2)
    r = RatePair(0.6 * LN2, 0.2 * LN2)
    # R2 = 0.1386 is below R1 + R2 - I = 0.2079
    assert b.dee_exponent(j, r) == pytest.approx(0.2 * LN2)
    r = RatePair(0.3 * LN2, 0.4 * LN2)
    assert b.dee_exponent(j, r) == pytest.approx(0.7 * LN2 - DSBS_MI)


def test_multivariate_dee_exponent(rng):
    j = pc.dsbs(0.11)
    mv = pc.MultivarPmf.from_joint(j)
    r = RatePair(0.3, 0.4)
    assert b.multivariate_dee_exponent(mv, [0.3, 0.4]) == pytest.approx(b.dee_exponent(j, r))
    indep = np.einsum("a,b,c->abc", [0.5, 0.5], [0.2, 0.8], [0.1, 0.9])[None]
    assert b.multivariate_dee_exponent(pc.MultivarPmf.from_tensor(indep), [0.3, 0.1, 0.2]) \
        == pytest.approx(0.1)
    # brute force over subsets with an explicit per-cell divergence loop
    t = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)
    rates = [0.2, 0.5, 0.3]
    marg = [t.sum(axis=(1, 2)), t.sum(axis=(0, 2)), t.sum(axis=(0, 1))]
    best = math.inf
    for s in [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2)]:
        div = 0.0
        ps = {}
        for idx in np.ndindex(2, 2, 2):
            key = tuple(idx[i] for i in s)
            ps[key] = ps.get(key, 0.0) + t[idx]
        for key, pv in ps.items():
            q = math.prod(marg[i][k] for i, k in zip(s, key))
            div += pv * math.log(pv / q)
        best = min(best, sum(rates[i] for i in s) - div)
    got = b.multivariate_dee_exponent(pc.MultivarPmf.from_tensor(t[None]), rates)
    assert got == pytest.approx(best, abs=1e-12)
    with pytest.raises(ValidationError):
        b.multivariate_dee_exponent(pc.MultivarPmf.from_tensor(np.stack([t, t]) / 2), rates)


def grid_max(fn, lo, hi, n=200001):
    xs = np.linspace(lo, hi, n)
    return max(fn(x) for x in xs)


def test_sim_exponent():
    assert b.sim_exponent(product_joint(), RatePair(0.1, 0.1)) == math.inf
    j = pc.dsbs(0.11)
    assert b.sim_exponent(j, RatePair(0.1, 0.1)) == 0.0
    # 1.2 ln 2 exceeds the largest density ln 1.78, so the exponent is infinite
    assert b.sim_exponent(j, RatePair(0.6 * LN2, 0.6 * LN2)) == math.inf
    r = RatePair(0.25, 0.25)
    sp = j.spectrum
    oracle = grid_max(lambda a: a * 0.5 - sp.log_mgf(a), 0.0, 3.0, 30001)
    got = b.sim_exponent(j, r)
    assert got == pytest.approx(0.036018949030854064, abs=1e-6)
    assert got == pytest.approx(oracle, abs=1e-6)


def test_weighted_exponent():
    prod = product_joint()
    assert b.weighted_exponent(prod, RatePair(0.2, 0.3)) == pytest.approx(0.5)
    j = pc.dsbs(0.11)
    with pytest.raises(RegimeError):
        b.weighted_exponent(j, RatePair(0.1, 0.1))
    d = b.weighted_exponent_details(j, RatePair(0.2, 0.25))
    assert d.value == pytest.approx(0.014644083570203303, abs=1e-8)
    assert d.rho == pytest.approx(0.311337, abs=1e-4)
    assert d.case == "interior" and d.closed_form == pytest.approx(d.value, abs=1e-8)
    # on the boundary R = R^(1) both paths agree
    r1 = j.spectrum.tilted_mean(1.0)
    d = b.weighted_exponent_details(j, RatePair(r1 / 2, r1 / 2))
    assert d.rho == pytest.approx(1.0, abs=1e-6)
    assert d.value == pytest.approx(d.closed_form, abs=1e-8)
    # above R^(1) the value is R - D2
    d = b.weighted_exponent_details(j, RatePair(0.5, 0.5))
    assert d.case == "boundary"
    assert d.value == pytest.approx(1.0 - DSBS_D2, abs=1e-9)
    assert d.closed_form == pytest.approx(1.0 - DSBS_D2, abs=1e-12)


def test_weighted_regime_check():
    ok, diag = b.weighted_regime_check(product_joint(), RatePair(0.1, 0.1))
    assert not ok and diag["tilted_rate_1"] == pytest.approx(0.0, abs=1e-12)
    j = pc.dsbs(0.11)
    r1 = j.spectrum.tilted_mean(1.0)
    ok, diag = b.weighted_regime_check(j, RatePair(r1 / 2 + 0.01, r1 / 2 + 0.01))
    assert ok
    ok, _ = b.weighted_regime_check(j, RatePair(5, 5))
    assert not ok


def test_ternary_max():
    arg, val = ternary_max(lambda x: -(x - 0.3) ** 2 + 1, 0, 1)
    assert arg == pytest.approx(0.3, abs=1e-6) and val == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.49), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_exponent_ordering(q, r1, r2):
    """The weighted exponent never beats the optimal one."""
    j = pc.dsbs(q)
    rates = RatePair(r1, r2)
    mi = pc.mutual_information(j)
    if rates.total < mi:
        return
    assert b.weighted_exponent(j, rates) <= b.sim_exponent(j, rates) + 1e-9


def test_report_json():
    j = pc.dsbs(0.11)
    r = b.talagrand_bound(j, CoveringSet.full(j), 4, 4, 0.1)
    out = r.to_json()
    assert out["name"] == "talagrand" and "log_value" in out
    assert b.BoundReport("x", math.inf).to_json()["value"] == "inf"
