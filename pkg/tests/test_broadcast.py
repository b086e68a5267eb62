import math

import numpy as np
import pytest

from mutualcover import probcore as pc
from mutualcover.bounds import RatePair
from mutualcover.broadcast import (BroadcastSpec, ScoreFunction, default_scores,
                                   gallager_e0, induced_channels, receiver_error_bounds,
                                   marton_corner, phi, broadcast_exponent,
                                   broadcast_exponent_report)
from mutualcover.acceptance import bsc_pair_instance
from mutualcover.errors import ShapeMismatch, ValidationError


def bsc(p):
    return pc.CondPmf.from_matrix([[1 - p, p], [p, 1 - p]])


def bsc_spec(**kw):
    j = pc.dsbs(0.3)
    x = np.array([[0, 1], [1, 0]])  # x = u xor v
    return BroadcastSpec(j, bsc(0.05), bsc(0.1), x, **kw)


def e0_loops(p, w, theta):
    total = 0.0
    for y in range(len(w[0])):
        inner = sum(p[u] * w[u][y] ** (1 / (1 + theta)) for u in range(len(p)))
        total += inner ** (1 + theta)
    return -math.log(total)


def test_e0_basic_values():
    ch = bsc(0.1)
    assert gallager_e0(np.array([0.5, 0.5]), ch, 0.0) == pytest.approx(0.0, abs=1e-15)
    got = gallager_e0(np.array([0.5, 0.5]), ch, 0.5)
    assert got == pytest.approx(0.14004710212025784, abs=1e-12)
    assert got == pytest.approx(e0_loops([0.5, 0.5], [[0.9, 0.1], [0.1, 0.9]], 0.5), abs=1e-12)
    with pytest.raises(ValidationError):
        gallager_e0(np.array([0.5, 0.5]), ch, 1.5)
    with pytest.raises(ShapeMismatch):
        gallager_e0(np.array([1.0]), ch, 0.5)


def test_e0_identity_channel():
    q = 4
    p = np.full(q, 1 / q)
    eye = np.eye(q)
    for theta in (0.1, 0.5, 1.0):
        assert gallager_e0(p, eye, theta) == pytest.approx(theta * math.log(q))


def test_e0_slope_at_zero_is_mutual_information(rng):
    w = rng.dirichlet(np.ones(3), size=3)
    p = rng.dirichlet(np.ones(3))
    joint = p[:, None] * w
    mi = float(np.sum(joint * np.log(w / (p @ w)[None, :])))
    theta = 1e-6
    assert gallager_e0(p, w, theta) / theta == pytest.approx(mi, rel=1e-4)
    # concave and nondecreasing in theta
    ts = np.linspace(0, 1, 21)
    vals = np.array([gallager_e0(p, w, t) for t in ts])
    assert np.all(np.diff(vals) >= -1e-12)
    assert np.all(np.diff(vals, 2) <= 1e-12)


def test_spec_validation():
    j = pc.dsbs(0.3)
    with pytest.raises(ShapeMismatch):
        BroadcastSpec(j, bsc(0.1), bsc(0.1), np.zeros((3, 2), dtype=int))
    with pytest.raises(ValidationError):
        BroadcastSpec(j, bsc(0.1), bsc(0.1), np.full((2, 2), 2))
    with pytest.raises(ValidationError):
        BroadcastSpec(j, bsc(0.1), bsc(0.1), np.zeros((2, 2), dtype=int), theta1=2)
    with pytest.raises(ValidationError):
        ScoreFunction(np.array([[1.0, 0.0]]))


def test_induced_channels_hand_computed():
    spec = bsc_spec()
    y_u, z_v = induced_channels(spec.joint, spec.channel_y, spec.channel_z, spec.x_map)
    # given u = 0: v = 0 w.p. 0.7 sends x = 0, v = 1 sends x = 1
    assert y_u[0].tolist() == pytest.approx([0.7 * 0.95 + 0.3 * 0.05, 0.7 * 0.05 + 0.3 * 0.95])
    # given v = 1: u = 1 w.p. 0.7 sends x = 0, u = 0 sends x = 1
    assert z_v[1].tolist() == pytest.approx([0.7 * 0.9 + 0.3 * 0.1, 0.7 * 0.1 + 0.3 * 0.9])


def test_default_scores():
    spec = bsc_spec(theta1=0.0, theta2=0.5)
    h, g = default_scores(spec)
    y_u, _ = induced_channels(spec.joint, spec.channel_y, spec.channel_z, spec.x_map)
    out = spec.joint.p_u @ y_u
    np.testing.assert_allclose(h.table, y_u / out[None, :], rtol=1e-12)
    # independent input and output give constant scores
    j = pc.build_joint(np.outer([0.5, 0.5], [0.5, 0.5]))
    flat = pc.CondPmf.from_matrix([[0.5, 0.5], [0.5, 0.5]])
    s = BroadcastSpec(j, flat, flat, np.array([[0, 1], [1, 0]]))
    h, g = default_scores(s)
    np.testing.assert_allclose(h.table, 1.0)
    np.testing.assert_allclose(g.table, 1.0)


def test_zero_density_scores_are_floored_and_flagged():
    j = pc.dsbs(0.3)
    eye = pc.CondPmf.from_matrix(np.eye(2))
    s = BroadcastSpec(j, eye, eye, np.array([[0, 0], [1, 1]]))
    h, _ = default_scores(s)
    assert h.flags and (h.table > 0).all()


def test_phi_vanishes_in_trivial_cases():
    spec = bsc_spec(theta1=0.0, theta2=0.0)
    scores = default_scores(spec)
    assert np.allclose(phi(spec, 1, scores), 0.0)
    spec = bsc_spec()
    ones = ScoreFunction(np.ones((2, 2)))
    assert np.allclose(phi(spec, 1, (ones, ones)), 0.0)
    assert np.allclose(phi(spec, 2, (ones, ones)), 0.0)
    with pytest.raises(ValidationError):
        phi(spec, 3, (ones, ones))


def test_phi_brute_force(rng):
    j = pc.build_joint(rng.dirichlet(np.ones(4)).reshape(2, 2))
    wy = pc.CondPmf.from_matrix(rng.dirichlet(np.ones(2), size=2))
    wz = pc.CondPmf.from_matrix(rng.dirichlet(np.ones(2), size=2))
    x = np.array([[0, 1], [1, 1]])
    spec = BroadcastSpec(j, wy, wz, x, theta1=0.4, theta2=0.7)
    h, g = default_scores(spec)
    for which, s, w, pbar, theta in [(1, h.table, wy.matrix, j.p_u, 0.4),
                                     (2, g.table, wz.matrix, j.p_v, 0.7)]:
        table = phi(spec, which, (h, g))
        for u in range(2):
            for v in range(2):
                acc = 0.0
                a = u if which == 1 else v
                for y in range(2):
                    mean = sum(pbar[b] * s[b, y] for b in range(2))
                    acc += w[x[u, v], y] * (mean / s[a, y]) ** theta
                assert table[u, v] == pytest.approx(math.log(acc), abs=1e-12)


def test_receiver_error_bounds():
    spec = bsc_spec(m1=4, m2=4, n1=8, n2=8, gamma=1.0)
    res = receiver_error_bounds(spec)
    assert 0 < res.bound1.value <= 1 and 0 < res.bound2.value <= 1
    assert all(math.isfinite(t) for t in res.channel_terms)
    again = receiver_error_bounds(spec)
    assert again.bound1.value == res.bound1.value
    # huge gamma keeps every atom in F
    big = receiver_error_bounds(bsc_spec(gamma=50.0))
    assert big.covering_set.all()
    deg = receiver_error_bounds(bsc_spec(theta1=0.0, theta2=0.0))
    assert deg.bound1.value == 1.0
    assert any("degenerate" in n for n in deg.bound1.notes)
    assert deg.channel_terms[0] == pytest.approx(math.e)


def test_broadcast_exponent_behaviour():
    j, chans, x = bsc_pair_instance()
    corner = marton_corner(j, chans, x)
    small = broadcast_exponent(j, chans, x, RatePair(0.01, 0.01))
    assert small > 0
    # exponent shrinks as rates grow
    vals = [broadcast_exponent(j, chans, x, RatePair(r, r)) for r in (0.0, 0.005, 0.01, 0.02)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
    rep = broadcast_exponent_report(j, chans, x, RatePair(5.0, 0.01))
    assert rep.value == 0.0 and rep.notes
    # on the single-user corner the first term vanishes to first order in theta
    edge = broadcast_exponent(j, chans, x, RatePair(corner["i_uy"], 0.0))
    assert edge == pytest.approx(0.0, abs=1e-6)
    assert broadcast_exponent(j, chans, x, RatePair(corner["i_uy"] + 0.05, 0.0)) == 0.0


def test_contract_aliases():
    from mutualcover import broadcast as bc
    assert bc.lemma6_bound is bc.receiver_error_bounds
    assert bc.theorem2_exponent is bc.broadcast_exponent
    assert bc.theorem2_report is bc.broadcast_exponent_report
