"""Upper bounds on the probability that no codeword pair lands in F."""
from __future__ import annotations

import itertools
import math

import numpy as np

from ..errors import EpsilonTooLarge, ValidationError
from ..probcore import (DensitySpectrum, JointPmf, MultivarPmf, as_spectrum,
                        smooth_mutual_information)
from .types import BoundReport, CoveringSet, probability_report


def _log_ml(m: float, l: float) -> float:
    if m < 1 or l < 1:
        raise ValidationError(f"codebook sizes must be >= 1, got M={m}, L={l}")
    return math.log(m) + math.log(l)


def _positive(name: str, x: float) -> None:
    if not x > 0:
        raise ValidationError(f"{name} must be positive, got {x}")


def _truncated_mass(j: JointPmf, f: CoveringSet, threshold: float) -> float:
    """P[(U,V) in F, density <= threshold]."""
    f.check(j)
    keep = f.mask & (j.matrix > 0) & (j.density <= threshold)
    return float(j.matrix[keep].sum())


def unilateral_bound(j: JointPmf, f: CoveringSet, m: float, gamma: float) -> BoundReport:
    """Single codebook of size ``m`` against one independent V."""
    _positive("gamma", gamma)
    if m < 1:
        raise ValidationError("M must be >= 1")
    miss = 1.0 - f.mass(j)
    tail = j.spectrum.tail_ge(math.log(m) - gamma)
    raw = miss + tail + math.exp(-math.exp(gamma))
    return probability_report("unilateral", raw, {"m": m, "gamma": gamma},
                              [f"miss={miss:.12g}", f"tail={tail:.12g}"])


def resolvability_bound(j: JointPmf, f: CoveringSet, m: float, l: float,
                        delta: float, gamma: float) -> BoundReport:
    _positive("delta", delta)
    _positive("gamma", gamma)
    lml = _log_ml(m, l)
    miss = 1.0 - f.mass(j)
    # exp(density) >= ML e^-gamma - delta, compared in log space
    ratio = delta * math.exp(gamma - lml)
    if ratio >= 1.0:
        tail = j.spectrum.total
    else:
        tail = j.spectrum.tail_ge(lml - gamma + math.log1p(-ratio))
    raw = miss + tail + (min(m, l) - 1) / delta + math.exp(-math.exp(gamma))
    return probability_report("resolvability", raw,
                              {"m": m, "l": l, "delta": delta, "gamma": gamma},
                              [f"miss={miss:.12g}", f"tail={tail:.12g}"])


def secondmoment_bound(j: JointPmf, f: CoveringSet, m: float, l: float, eps: float,
                       verbatim: bool = False) -> BoundReport:
    """Chebyshev-style bound driven by the smooth mutual information.

    By default the slack term is ``P_UV(F) - eps``; ``verbatim=True`` uses
    ``P_UV(F^c) - eps`` as the formula is usually printed, which is not a
    valid bound (it is below 1 for F empty).
    """
    if not 0 < eps < 1:
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    lml = _log_ml(m, l)
    mass_f = f.mass(j)
    base = (1.0 - mass_f) if verbatim else mass_f
    slack = base - eps
    if slack <= 0:
        label = "P_UV(F^c)" if verbatim else "P_UV(F)"
        raise EpsilonTooLarge(f"{label}={base:.12g} must exceed eps={eps}")
    smooth = smooth_mutual_information(j, eps)
    raw = (math.exp(smooth - lml) / slack
           + (1.0 / m + 1.0 / l) / slack**2)
    notes = ["verbatim F^c form" if verbatim else "P_UV(F) form"]
    return probability_report("secondmoment", raw,
                              {"m": m, "l": l, "eps": eps, "smooth_mi": smooth}, notes)


def limited_independence_bound(j: JointPmf, f: CoveringSet, m: float, l: float,
                               gamma: float) -> BoundReport:
    _positive("gamma", gamma)
    lml = _log_ml(m, l)
    mass = _truncated_mass(j, f, lml - gamma)
    params = {"m": m, "l": l, "gamma": gamma, "truncated_mass": mass}
    if mass <= 0:
        return probability_report("limited_independence", 1.0, params,
                                  ["vacuous: truncated mass is 0"])
    raw = (math.exp(-gamma) + 1.0 / m + 1.0 / l) / mass
    return probability_report("limited_independence", raw, params)


def talagrand_denominator(gamma: float, m: float, l: float) -> float:
    return 4.0 * math.exp(-gamma) + 2.0 / m + 2.0 / l


def talagrand_bound(j: JointPmf, f: CoveringSet, m: float, l: float,
                    gamma: float) -> BoundReport:
    """Sub-Gaussian covering bound under full independence."""
    _positive("gamma", gamma)
    lml = _log_ml(m, l)
    mass = _truncated_mass(j, f, lml - gamma)
    arg = mass / talagrand_denominator(gamma, m, l)
    return probability_report("talagrand", math.exp(-arg),
                              {"m": m, "l": l, "gamma": gamma, "truncated_mass": mass},
                              log_value=-arg)


def typical_bound_optimized(x: JointPmf | DensitySpectrum, p: float, m: float,
                            l: float) -> BoundReport:
    """Worst case over all F with P_UV(F) >= p, optimized over truncation.

    The infimum over eps is attained on the finite set of masses obtained by
    dropping whole density levels from the top, so it is evaluated exactly
    there.
    """
    if not 0 < p <= 1:
        raise ValidationError(f"p must lie in (0, 1], got {p}")
    spec = as_spectrum(x)
    lml = _log_ml(m, l)
    eps_grid, levels = spec.smooth_levels()
    ok = eps_grid <= p + 1e-12
    eps_grid, levels = eps_grid[ok], levels[ok]
    with np.errstate(over="ignore"):
        den = 2.0 / m + 2.0 / l + 4.0 * np.exp(levels - lml)
    args = np.maximum(p - eps_grid, 0.0) / den
    best = int(np.argmax(args))
    arg = float(args[best])
    return probability_report(
        "typical_optimized", math.exp(-arg),
        {"m": m, "l": l, "p": p, "eps": float(eps_grid[best]),
         "smooth_mi": float(levels[best])},
        log_value=-arg)


def multivariate_bound(p: MultivarPmf, sizes, gamma: float,
                       f: np.ndarray | None = None) -> BoundReport:
    """Conditional multivariate covering bound.

    ``f`` is a boolean tensor over Z x V_1 x ... x V_k (default: the whole
    space). The truncation set intersects F with the density constraints for
    every nonempty subset of coordinates.
    """
    k = p.k
    if k > 4:
        raise ValidationError(f"k={k} exceeds the supported arity 4")
    sizes = list(sizes)
    if len(sizes) != k or any(s < 1 for s in sizes):
        raise ValidationError("need one codebook size >= 1 per V coordinate")
    if f is None:
        f = np.ones(p.tensor.shape, dtype=bool)
    f = np.asarray(f, dtype=bool)
    if f.shape != p.tensor.shape:
        raise ValidationError(f"F shape {f.shape} does not match {p.tensor.shape}")
    log_sizes = [math.log(s) for s in sizes]
    scale = k * 2**k * math.exp(-gamma)
    pz = p.p_z
    total = 0.0
    cond_masses = []
    for z in range(p.tensor.shape[0]):
        if pz[z] <= 0:
            cond_masses.append(0.0)
            continue
        cond = p.tensor[z] / pz[z]
        g = f[z] & (cond > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_marg = [np.log(cond.sum(axis=tuple(a for a in range(k) if a != i)))
                        for i in range(k)]
            for r in range(1, k + 1):
                for subset in itertools.combinations(range(k), r):
                    dens = _subset_density(cond, log_marg, subset)
                    g &= dens < sum(log_sizes[t] for t in subset) - gamma
        mass = float(cond[g].sum())
        cond_masses.append(mass)
        total += pz[z] * math.exp(-mass / scale)
    return probability_report("multivariate", total,
                              {"sizes": sizes, "gamma": gamma, "k": k,
                               "conditional_masses": cond_masses})


def _subset_density(cond: np.ndarray, log_marg, subset) -> np.ndarray:
    """ln P(v_S | z) - sum_{i in S} ln P(v_i | z), broadcast to the full tensor."""
    k = cond.ndim
    others = tuple(a for a in range(k) if a not in subset)
    joint_s = cond.sum(axis=others, keepdims=True)
    out = np.log(joint_s)
    for i in subset:
        shape = [1] * k
        shape[i] = -1
        out = out - log_marg[i].reshape(shape)
    return np.broadcast_to(out, cond.shape)
