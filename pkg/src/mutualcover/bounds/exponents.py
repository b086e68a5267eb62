"""Asymptotic exponents for i.i.d. sources with codebooks of size exp(nR)."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ..errors import RegimeError, ValidationError
from ..probcore import DensitySpectrum, JointPmf, MultivarPmf, as_spectrum
from .types import BoundReport, RatePair

ALPHA_MAX = 50.0
INF_SLOPE_TOL = 1e-6
SEARCH_TOL = 1e-9


def ternary_max(fn, lo: float, hi: float, tol: float = SEARCH_TOL) -> tuple[float, float]:
    """Maximize a concave function on [lo, hi]; returns (argmax, max)."""
    phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc < fd:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = fn(d)
        else:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = fn(c)
    cands = [(lo, fn(lo)), (hi, fn(hi)), ((a + b) / 2, fn((a + b) / 2))]
    return max(cands, key=lambda t: t[1])


def _mi(x) -> float:
    return as_spectrum(x).mean()


def dee_exponent(x: JointPmf | DensitySpectrum, rates: RatePair) -> float:
    """Double-exponential decay rate of the typical-F covering failure."""
    if not (rates.r1 > 0 and rates.r2 > 0):
        raise ValidationError("rates must be positive")
    return min(rates.r1, rates.r2, rates.total - _mi(x))


def multivariate_dee_exponent(p: MultivarPmf, rates) -> float:
    """min over nonempty S of sum_{i in S} R_i - D(P_{V_S} || prod P_{V_i})."""
    k = p.k
    if k > 6:
        raise ValidationError("subset enumeration supports k <= 6")
    rates = [float(r) for r in rates]
    if len(rates) != k:
        raise ValidationError("one rate per coordinate required")
    pz = p.p_z
    if np.count_nonzero(pz > 0) != 1:
        raise ValidationError("Z must be constant (a point mass)")
    joint = p.tensor[int(np.argmax(pz))] / pz.max()
    marg = [joint.sum(axis=tuple(a for a in range(k) if a != i)) for i in range(k)]
    best = math.inf
    for r in range(1, k + 1):
        for subset in itertools.combinations(range(k), r):
            others = tuple(a for a in range(k) if a not in subset)
            ps = joint.sum(axis=others) if others else joint
            prod = np.ones(())
            for i in subset:
                prod = np.multiply.outer(prod, marg[i])
            pos = ps > 0
            div = float(np.sum(ps[pos] * (np.log(ps[pos]) - np.log(prod[pos]))))
            best = min(best, sum(rates[i] for i in subset) - div)
    return best


def sim_exponent(x: JointPmf | DensitySpectrum, rates: RatePair) -> float:
    """Optimal joint-simulation error exponent (may be +inf)."""
    return sim_exponent_report(x, rates).value


def sim_exponent_report(x, rates: RatePair) -> BoundReport:
    r = rates.total
    if not r > 0:
        raise ValidationError("R1 + R2 must be positive")
    spec = as_spectrum(x)
    params = {"r1": rates.r1, "r2": rates.r2}
    if r - spec.tilted_mean(ALPHA_MAX) > INF_SLOPE_TOL:
        return BoundReport("sim_exponent", math.inf, {**params, "alpha": math.inf},
                           ["rate exceeds the maximal density"], kind="exponent")
    if r <= spec.mean():
        return BoundReport("sim_exponent", 0.0, {**params, "alpha": 0.0},
                           ["R1+R2 <= I: supremum approached as alpha -> 0"],
                           kind="exponent")
    fn = lambda a: a * r - spec.log_mgf(a)  # noqa: E731
    # the [0, 1] search keeps this comparable with the weighted exponent
    alpha, val = max(ternary_max(fn, 0.0, ALPHA_MAX), ternary_max(fn, 0.0, 1.0),
                     key=lambda t: t[1])
    return BoundReport("sim_exponent", max(val, 0.0), {**params, "alpha": alpha},
                       kind="exponent")


@dataclass(frozen=True)
class WeightedExponent:
    value: float
    rho: float
    case: str  # "interior" (tilted-rate equation) or "boundary" (rho = 1)
    closed_form: float
    tilted_rate_1: float


def weighted_exponent_details(x: JointPmf | DensitySpectrum,
                              rates: RatePair) -> WeightedExponent:
    spec = as_spectrum(x)
    r = rates.total
    mi = spec.mean()
    if r < mi - 1e-12:
        raise RegimeError(f"R1+R2={r:.12g} is below I={mi:.12g}")
    rho, val = ternary_max(lambda s: s * r - spec.log_mgf(s), 0.0, 1.0)
    r1 = spec.tilted_mean(1.0)
    if r <= r1:
        # solve R^(rho) = R1 + R2; D(P^(1+rho) || P) = rho R^(rho) - ln E[e^(rho i)]
        if r <= mi:
            rho_star = 0.0
        elif r >= r1:
            rho_star = 1.0
        else:
            rho_star = brentq(lambda s: spec.tilted_mean(s) - r, 0.0, 1.0, xtol=1e-14)
        closed = rho_star * spec.tilted_mean(rho_star) - spec.log_mgf(rho_star)
        case = "interior"
    else:
        closed = r - spec.log_mgf(1.0)
        case = "boundary"
        rho_star = 1.0
    return WeightedExponent(max(val, 0.0), rho, case, closed, r1)


def weighted_exponent(x: JointPmf | DensitySpectrum, rates: RatePair) -> float:
    """Exponent guaranteed for the weighted (likelihood) sampler."""
    return weighted_exponent_details(x, rates).value


def weighted_regime_check(x: JointPmf | DensitySpectrum,
                          rates: RatePair) -> tuple[bool, dict]:
    """Whether the rates sit where the weighted sampler is provably suboptimal."""
    spec = as_spectrum(x)
    r1 = spec.tilted_mean(1.0)
    d2 = spec.log_mgf(1.0)
    upper = 2 * r1 - max(d2, rates.r1, rates.r2)
    inside = r1 < rates.total < upper
    return inside, {"tilted_rate_1": r1, "renyi_2": d2, "sum_rate": rates.total,
                    "upper": upper}
