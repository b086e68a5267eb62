"""Bounds on the total variation achievable by selecting one codeword pair."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import expit

from ..errors import PreconditionMN, ValidationError, ZeroVarentropy
from ..probcore import DensitySpectrum, JointPmf, as_spectrum, q_function
from .covering import _log_ml, typical_bound_optimized
from .types import BoundReport, probability_report

GAMMA_GRID = np.logspace(-6, 3, 200)


def _check_p(p: float) -> None:
    if not 0 < p < 1:
        raise ValidationError(f"p must lie in (0, 1), got {p}")


def _size_threshold(p: float, factor: float) -> float:
    return factor / p * math.log(1.0 / (1.0 - p))


def _spectral_threshold(lml: float, p: float) -> float:
    # ln(p M L / (3 ln(1/(1-p))))
    return lml + math.log(p) - math.log(3.0 * math.log(1.0 / (1.0 - p)))


def sim_achievability_bound(x: JointPmf | DensitySpectrum, m: float, l: float,
                            p: float) -> BoundReport:
    """Achievable simulation error: max of a spectral tail and the typical-F bound."""
    _check_p(p)
    need = _size_threshold(p, 3.0)
    if m < need or l < need:
        raise PreconditionMN(f"M, L must be >= {need:.6g} for p={p}")
    spec = as_spectrum(x)
    lml = _log_ml(m, l)
    tail = spec.tail_gt(_spectral_threshold(lml, p))
    typical = typical_bound_optimized(spec, p, m, l)
    raw = max(tail, typical.value)
    dominant = "tail" if tail >= typical.value else "typical"
    return probability_report("sim_achievability", raw,
                              {"m": m, "l": l, "p": p, "tail_term": tail,
                               "typical_term": typical.value,
                               "eps": typical.params["eps"]},
                              [f"dominant={dominant}"])


def sim_converse_bound(x: JointPmf | DensitySpectrum, m: float, l: float) -> BoundReport:
    """sup over lambda > 0 of (1 - e^-lambda) P[density > ln ML + lambda].

    The tail is a step function, so on each step the product increases in
    lambda and the supremum is the left limit at a jump: lambda -> d - ln ML
    for some level d above ln ML (approached, not attained).
    """
    spec = as_spectrum(x)
    lml = _log_ml(m, l)
    above = spec.values > lml
    if not above.any():
        return probability_report("sim_converse", 0.0, {"m": m, "l": l, "lambda": None},
                                  ["tail empty for every lambda > 0"])
    vals = spec.values[above]
    tails = np.cumsum(spec.probs[above][::-1])[::-1]  # mass at or above each level
    cand = -np.expm1(-(vals - lml)) * tails
    best = int(np.argmax(cand))
    return probability_report("sim_converse", float(cand[best]),
                              {"m": m, "l": l, "lambda": float(vals[best] - lml)},
                              ["supremum approached as lambda increases to the jump"])


def weighted_sampler_bound(x: JointPmf | DensitySpectrum, m: float,
                           l: float) -> tuple[BoundReport, BoundReport]:
    """The two guarantees for the weighted sampler: (mean form, tail form)."""
    spec = as_spectrum(x)
    lml = _log_ml(m, l)
    # E[1 / (1 + ML e^-density)] = E[expit(density - ln ML)]
    mean_bound = float(np.dot(spec.probs, expit(spec.values - lml)))
    jumps = lml - spec.values
    gammas = np.concatenate([jumps[jumps > 0], GAMMA_GRID])
    vals = np.array([spec.tail_gt(lml - g) for g in gammas]) + np.exp(-gammas)
    best = int(np.argmin(vals))
    tail_bound = min(float(vals[best]), spec.total)  # gamma -> infinity gives the total mass
    gamma_star = float(gammas[best]) if vals[best] <= spec.total else math.inf
    r_mean = probability_report("weighted_mean", mean_bound, {"m": m, "l": l})
    r_tail = probability_report("weighted_tail", tail_bound, {"m": m, "l": l, "gamma": gamma_star})
    return r_mean, r_tail


def worstcase_gap_bound(x: JointPmf | DensitySpectrum, m: float, l: float,
                        p: float) -> BoundReport:
    """Spectral bound on the covering gap over sets F with P_UV(F) < p."""
    _check_p(p)
    need = _size_threshold(p, 6.0)
    if m < need or l < need:
        raise PreconditionMN(f"M, L must be >= {need:.6g} for p={p}")
    spec = as_spectrum(x)
    t = _spectral_threshold(_log_ml(m, l), p)
    return probability_report("worstcase_gap", spec.tail_gt(t),
                              {"m": m, "l": l, "p": p, "threshold": t})


def second_order_error(x: JointPmf | DensitySpectrum, a_coefficient: float) -> float:
    """Gaussian approximation Q(A / V) of the simulation error."""
    v = as_spectrum(x).std()
    if v == 0:
        if a_coefficient != 0:
            raise ZeroVarentropy("mutual varentropy is 0")
        return 0.5
    return q_function(a_coefficient / v)
