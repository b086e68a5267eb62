"""Error exponents for two-receiver broadcast channels with two auxiliaries.

Gallager's function uses the usual sign convention
``E0(theta) = -ln sum_y (sum_u P(u) W(y|u)^(1/(1+theta)))^(1+theta)``, which is
nonnegative and satisfies ``E0(theta)/theta -> I`` as ``theta -> 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .bounds.types import BoundReport, RatePair, probability_report
from .errors import ShapeMismatch, ValidationError
from .probcore import CondPmf, JointPmf, Pmf

SCORE_FLOOR = 1e-300
THETA_STEP = 1e-3


def gallager_e0(p_in: Pmf | np.ndarray, channel: CondPmf | np.ndarray, theta: float) -> float:
    if not 0 <= theta <= 1:
        raise ValidationError(f"theta must lie in [0, 1], got {theta}")
    p = np.asarray(p_in.probs if isinstance(p_in, Pmf) else p_in, dtype=float)
    w = np.asarray(channel.matrix if isinstance(channel, CondPmf) else channel, dtype=float)
    if w.shape[0] != p.size:
        raise ShapeMismatch("channel rows must match the input alphabet")
    if theta == 0:
        return 0.0
    s = 1.0 / (1.0 + theta)
    inner = p @ np.power(w, s)
    return -float(np.log(np.sum(np.power(inner, 1.0 + theta))))


@dataclass(frozen=True)
class BroadcastSpec:
    joint: JointPmf
    channel_y: CondPmf
    channel_z: CondPmf
    x_map: np.ndarray  # x_map[u, v] = index of the channel input
    m1: int = 1
    m2: int = 1
    n1: int = 1
    n2: int = 1
    theta1: float = 0.5
    theta2: float = 0.5
    gamma: float = 1.0

    def __post_init__(self):
        x = np.asarray(self.x_map)
        if x.shape != self.joint.shape:
            raise ShapeMismatch(f"x map shape {x.shape} must equal {self.joint.shape}")
        n_x = self.channel_y.matrix.shape[0]
        if self.channel_z.matrix.shape[0] != n_x:
            raise ShapeMismatch("both channels need the same input alphabet")
        if not np.issubdtype(x.dtype, np.integer) or x.min() < 0 or x.max() >= n_x:
            raise ValidationError("x map entries must be input indices")
        for t in (self.theta1, self.theta2):
            if not 0 <= t <= 1:
                raise ValidationError(f"theta must lie in [0, 1], got {t}")
        for n in (self.m1, self.m2, self.n1, self.n2):
            if int(n) != n or n < 1:
                raise ValidationError("message and list sizes must be positive integers")


@dataclass(frozen=True)
class ScoreFunction:
    table: np.ndarray
    flags: tuple = field(default=())

    def __post_init__(self):
        if np.any(~(self.table > 0)):
            raise ValidationError("score tables must be strictly positive")


def induced_channels(j: JointPmf, channel_y: CondPmf, channel_z: CondPmf,
                     x_map) -> tuple[np.ndarray, np.ndarray]:
    """P_{Y|U} and P_{Z|V} obtained by averaging the channels over the other auxiliary.

    Rows of null-probability symbols average uniformly over the partner.
    """
    x = np.asarray(x_map)
    wy = channel_y.matrix[x]  # (U, V, Y)
    wz = channel_z.matrix[x]  # (U, V, Z)
    pu, pv = j.p_u, j.p_v
    cond_v = np.where(pu[:, None] > 0, j.matrix / np.where(pu > 0, pu, 1)[:, None],
                      1.0 / j.shape[1])
    cond_u = np.where(pv[None, :] > 0, j.matrix / np.where(pv > 0, pv, 1)[None, :],
                      1.0 / j.shape[0])
    y_given_u = np.einsum("uv,uvy->uy", cond_v, wy)
    z_given_v = np.einsum("uv,uvz->vz", cond_u, wz)
    return y_given_u, z_given_v


def _score(p_in: np.ndarray, w: np.ndarray, theta: float) -> ScoreFunction:
    out = p_in @ w
    with np.errstate(divide="ignore"):
        dens = np.log(w) - np.log(out)[None, :]
    table = np.exp(dens / (1.0 + theta))
    floored = ~(table > 0)
    flags = ()
    if floored.any():
        table = np.where(floored, SCORE_FLOOR, table)
        flags = (f"{int(floored.sum())} zero-density cell(s) floored at {SCORE_FLOOR:g}",)
    return ScoreFunction(table, flags)


def default_scores(spec: BroadcastSpec) -> tuple[ScoreFunction, ScoreFunction]:
    """h(u, y) = exp(i(u;y)/(1+theta1)) and g(v, z) = exp(i(v;z)/(1+theta2))."""
    y_u, z_v = induced_channels(spec.joint, spec.channel_y, spec.channel_z, spec.x_map)
    return (_score(spec.joint.p_u, y_u, spec.theta1),
            _score(spec.joint.p_v, z_v, spec.theta2))


def phi(spec: BroadcastSpec, which: int, scores: tuple[ScoreFunction, ScoreFunction]) -> np.ndarray:
    """Table over U x V of ln E[(E[s(bar A, Y)|Y] / s(a, Y))^theta | (U,V)=(u,v)].

    ``which=1`` uses (h, Y, U-side), ``which=2`` uses (g, Z, V-side).
    """
    x = np.asarray(spec.x_map)
    if which == 1:
        s, w, p_bar, theta = scores[0].table, spec.channel_y.matrix, spec.joint.p_u, spec.theta1
        own = s[:, None, :]  # (U, 1, Y)
    elif which == 2:
        s, w, p_bar, theta = scores[1].table, spec.channel_z.matrix, spec.joint.p_v, spec.theta2
        own = s[None, :, :]  # (1, V, Z)
    else:
        raise ValidationError("which must be 1 or 2")
    mean_s = p_bar @ s  # E[s(bar A, y)] per output symbol
    ratio = np.power(mean_s[None, None, :] / own, theta)
    return np.log(np.einsum("uvy,uvy->uv", w[x], np.broadcast_to(ratio, w[x].shape)))


@dataclass(frozen=True)
class ReceiverBounds:
    bound1: BoundReport
    bound2: BoundReport
    covering_term: float
    channel_terms: tuple[float, float]
    covering_set: np.ndarray


def receiver_error_bounds(spec: BroadcastSpec, scores=None) -> ReceiverBounds:
    """Single-shot error bounds for the two receivers."""
    if scores is None:
        scores = default_scores(spec)
    j = spec.joint
    support = j.matrix > 0
    phis = [phi(spec, 1, scores), phi(spec, 2, scores)]
    means = [float(np.sum(j.matrix[support] * p[support])) for p in phis]
    f = support.copy()
    for p, mu in zip(phis, means):
        f &= p <= mu + spec.gamma + 1e-12 * max(1.0, abs(mu))
    thr = math.log(spec.n1) + math.log(spec.n2) - spec.gamma
    num = float(j.matrix[f & (j.density <= thr)].sum())
    den = 4.0 * math.exp(-spec.gamma) + 2.0 / spec.n1 + 2.0 / spec.n2
    cover = math.exp(-num / den)
    notes = []
    if spec.theta1 == 0 and spec.theta2 == 0:
        notes.append("degenerate: theta1 = theta2 = 0 makes the channel terms e^gamma")
    for sc in scores:
        notes.extend(sc.flags)
    reports, terms = [], []
    for k, (mk, nk, th) in enumerate([(spec.m1, spec.n1, spec.theta1),
                                      (spec.m2, spec.n2, spec.theta2)]):
        log_term = th * (math.log(mk) + math.log(nk)) + means[k] + spec.gamma
        term = math.exp(min(log_term, 700.0))
        terms.append(term)
        reports.append(probability_report(f"receiver{k + 1}_error", cover + term,
                                          {"theta": th, "gamma": spec.gamma,
                                           "mean_phi": means[k], "covering_term": cover,
                                           "channel_term": term}, notes))
    return ReceiverBounds(reports[0], reports[1], cover, tuple(terms), f)


def _terms(e1: float, e2: float, theta: float, rates: RatePair, mi: float):
    return (e1 - theta * rates.r1, e2 - theta * rates.r2,
            0.5 * (e1 + e2 - theta * (rates.total + mi)))


def broadcast_exponent_report(j: JointPmf, channels: tuple[CondPmf, CondPmf], x_map,
                    rates: RatePair) -> BoundReport:
    """max over theta in [0,1] of the smallest of the three exponent terms."""
    cy, cz = channels
    y_u, z_v = induced_channels(j, cy, cz, x_map)
    mi = j.spectrum.mean()

    def value(theta):
        e1 = gallager_e0(j.p_u, y_u, theta)
        e2 = gallager_e0(j.p_v, z_v, theta)
        return min(_terms(e1, e2, theta, rates, mi))

    grid = np.linspace(0.0, 1.0, int(round(1 / THETA_STEP)) + 1)
    vals = np.array([value(t) for t in grid])
    i = int(np.argmax(vals))
    best_t, best_v = float(grid[i]), float(vals[i])
    lo, hi = max(0.0, best_t - THETA_STEP), min(1.0, best_t + THETA_STEP)
    res = minimize_scalar(lambda t: -value(t), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    if -res.fun > best_v:
        best_t, best_v = float(res.x), float(-res.fun)
    e1 = gallager_e0(j.p_u, y_u, best_t)
    e2 = gallager_e0(j.p_v, z_v, best_t)
    t1, t2, t3 = _terms(e1, e2, best_t, rates, mi)
    notes = []
    value_out = best_v
    if best_v <= 0:
        value_out = 0.0
        notes.append("no positive exponent certified; floored at 0")
    return BoundReport("broadcast_exponent", value_out,
                       {"theta": best_t, "r1": rates.r1, "r2": rates.r2,
                        "term_receiver1": t1, "term_receiver2": t2, "term_covering": t3,
                        "e0_y": e1, "e0_z": e2, "mutual_information_uv": mi},
                       notes, kind="exponent")


def broadcast_exponent(j: JointPmf, channels: tuple[CondPmf, CondPmf], x_map,
                       rates: RatePair) -> float:
    return broadcast_exponent_report(j, channels, x_map, rates).value


# names used by the public interface contract
Lemma6Result = ReceiverBounds
lemma6_bound = receiver_error_bounds
theorem2_report = broadcast_exponent_report
theorem2_exponent = broadcast_exponent


def marton_corner(j: JointPmf, channels: tuple[CondPmf, CondPmf], x_map) -> dict:
    """I(U;Y), I(V;Z) and I(U;V) for the induced channels."""
    y_u, z_v = induced_channels(j, *channels, x_map)
    return {"i_uy": _mutual_info(j.p_u, y_u), "i_vz": _mutual_info(j.p_v, z_v),
            "i_uv": j.spectrum.mean()}


def _mutual_info(p: np.ndarray, w: np.ndarray) -> float:
    out = p @ w
    joint = p[:, None] * w
    pos = joint > 0
    return float(np.sum(joint[pos] * (np.log(w[pos]) - np.log(np.broadcast_to(out, w.shape)[pos]))))
