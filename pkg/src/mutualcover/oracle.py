"""Ground-truth covering failure: exact by type enumeration, or Monte Carlo."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import gammaln

from . import caps
from .bounds.types import CoveringSet
from .errors import ValidationError
from .probcore import JointPmf, compositions
from .rng import inverse_cdf, make_cdf, run_blocks

MASK_CHUNK = 1 << 15
GAP_TOL = 1e-15
# keep per-batch index tensors around this many cells
_CELL_BUDGET = 1 << 22


@dataclass(frozen=True)
class CodebookSpec:
    m: int
    l: int
    seed: int = 0
    n_samples: int = 10_000

    def __post_init__(self):
        if int(self.m) != self.m or int(self.l) != self.l or self.m < 1 or self.l < 1:
            raise ValidationError(f"m, l must be positive integers, got {self.m}, {self.l}")
        if self.n_samples < 1:
            raise ValidationError("n_samples must be positive")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n_samples: int
    seed: int
    worker_count: int
    bias_bound: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)


def _check_sizes(m, l) -> None:
    if int(m) != m or int(l) != l or m < 1 or l < 1:
        raise ValidationError(f"m, l must be positive integers, got {m}, {l}")


def vset_law(p_v: np.ndarray, l: int) -> dict[int, float]:
    """Law of the set of symbols seen among ``l`` i.i.d. draws from ``p_v``.

    Keys are bitmasks over the full alphabet (bit v set iff v was drawn).
    Computed by enumerating types over the support of ``p_v``.
    """
    _check_sizes(1, l)
    supp = np.flatnonzero(p_v > 0)
    s = supp.size
    caps.check("V-type count", math.comb(l + s - 1, s - 1), caps.TYPE_COUNT)
    types = compositions(l, s)
    logp = (gammaln(l + 1) - gammaln(types + 1).sum(axis=1)
            + types @ np.log(p_v[supp]))
    bits = (types > 0) @ (np.int64(1) << supp.astype(np.int64))
    order = np.argsort(bits, kind="stable")
    bits, logp = bits[order], logp[order]
    keys, starts = np.unique(bits, return_index=True)
    bounds_ = list(starts) + [bits.size]
    probs = np.exp(logp)
    return {int(keys[i]): math.fsum(probs[bounds_[i]:bounds_[i + 1]])
            for i in range(keys.size)}


def _clear_mass(j: JointPmf, mask: np.ndarray, vbits: int) -> float:
    """P_U of the u whose F-row misses every symbol in ``vbits``."""
    cols = np.array([(vbits >> v) & 1 for v in range(j.shape[1])], dtype=bool)
    clear = ~(mask[:, cols].any(axis=1))
    return math.fsum(j.p_u[clear])


def exact_failure(j: JointPmf, f: CoveringSet, m: int, l: int) -> float:
    """P[no pair (U_i, V_k) of independent codebooks falls in F]."""
    _check_sizes(m, l)
    f.check(j)
    law = vset_law(j.p_v, l)
    return min(1.0, math.fsum(w * _clear_mass(j, f.mask, b) ** m for b, w in law.items()))


def worstcase_gap_exact(j: JointPmf, m: int, l: int) -> tuple[float, CoveringSet]:
    """max over every F of P_UV(F) - P[some codeword pair lands in F].

    Returns the gap and the smallest-integer maximizing mask (ties within
    ``GAP_TOL``), where cell (u, v) is bit ``u * |V| + v``.
    """
    _check_sizes(m, l)
    nu, nv = j.shape
    cells = nu * nv
    caps.check("mask cells", cells, caps.MASK_CELLS)
    law = vset_law(j.p_v, l)
    vsets = [(np.array([(b >> v) & 1 for v in range(nv)], dtype=bool), w)
             for b, w in law.items()]
    flat = j.matrix.ravel()
    shifts = np.arange(cells, dtype=np.int64)
    best_gap, best_mask = -math.inf, 0
    for start in range(0, 1 << cells, MASK_CHUNK):
        masks = np.arange(start, min(start + MASK_CHUNK, 1 << cells), dtype=np.int64)
        bits = ((masks[:, None] >> shifts) & 1).astype(bool)
        covered = bits @ flat
        grid = bits.reshape(-1, nu, nv)
        failure = np.zeros(masks.size)
        for cols, w in vsets:
            clear = ~grid[:, :, cols].any(axis=2)
            failure += w * (clear @ j.p_u) ** m
        gaps = covered - (1.0 - failure)
        # first mask within rounding of the chunk maximum
        i = int(np.argmax(gaps >= gaps.max() - GAP_TOL))
        if gaps[i] > best_gap + GAP_TOL:
            best_gap, best_mask = float(gaps[i]), int(masks[i])
    mask = ((best_mask >> shifts) & 1).astype(bool).reshape(nu, nv)
    return max(best_gap, 0.0), CoveringSet.from_mask(mask, j, "worstcase-argmax")


def density_window_set(j: JointPmf, a: float, b: float) -> CoveringSet:
    """Support atoms with a <= density <= b (edges matched to 1e-12 relative)."""
    if not a <= b:
        raise ValidationError(f"window needs a <= b, got {a}, {b}")
    d = j.density
    support = j.matrix > 0
    with np.errstate(invalid="ignore"):
        tol = 1e-12 * np.maximum(1.0, np.abs(np.where(support, d, 0.0)))
        mask = support & (d >= a - tol) & (d <= b + tol)
    return CoveringSet.from_mask(mask, j, f"density-window({a:.12g},{b:.12g})")


@dataclass(frozen=True)
class Window:
    covering: CoveringSet
    a: float
    b: float
    mass: float
    in_target: bool


def window_for_mass(j: JointPmf, eps: float) -> Window:
    """Narrowest window centred at I(U;V) whose P_UV-mass exceeds 1 - eps.

    The mass is a step function of the half-width, so the search runs over
    the finitely many half-widths at which it jumps. ``in_target`` says
    whether the mass also stays at or below 1 - eps/2.
    """
    if not 0 < eps < 1:
        raise ValidationError("eps must lie in (0, 1)")
    spec = j.spectrum
    mi = spec.mean()
    dist = np.abs(spec.values - mi)
    order = np.argsort(dist, kind="stable")
    cum = np.cumsum(spec.probs[order])
    idx = int(np.searchsorted(cum, 1.0 - eps, side="right"))
    idx = min(idx, cum.size - 1)
    w = float(dist[order][idx])
    cov = density_window_set(j, mi - w, mi + w)
    mass = cov.mass(j)
    return Window(cov, mi - w, mi + w, mass, mass <= 1.0 - eps / 2 + 1e-12)


def _draw(gen: np.random.Generator, size: int, m: int, l: int, cdf_u, cdf_v):
    u = gen.random((size, m + l))
    return inverse_cdf(cdf_u, u[:, :m]), inverse_cdf(cdf_v, u[:, m:])


def _batches(size: int, m: int, l: int):
    step = max(1, _CELL_BUDGET // (m * l))
    for lo in range(0, size, step):
        yield slice(lo, min(size, lo + step))


def mc_failure(j: JointPmf, f: CoveringSet, spec: CodebookSpec, workers: int = 1) -> McEstimate:
    """Monte Carlo estimate of :func:`exact_failure`, identical for any worker count."""
    f.check(j)
    m, l = spec.m, spec.l
    cdf_u, cdf_v = make_cdf(j.p_u), make_cdf(j.p_v)
    mask = np.asarray(f.mask)

    def block(gen, size):
        us, vs = _draw(gen, size, m, l, cdf_u, cdf_v)
        fails = 0
        for sl in _batches(size, m, l):
            hit = mask[us[sl, :, None], vs[sl, None, :]].any(axis=(1, 2))
            fails += int((sl.stop - sl.start) - hit.sum())
        return fails

    fails = sum(run_blocks(spec.n_samples, spec.seed, workers, block))
    n = spec.n_samples
    mean = fails / n
    return McEstimate(mean, math.sqrt(mean * (1 - mean) / n), n, spec.seed, workers)


@dataclass(frozen=True)
class WeightedSumStats:
    mean: float
    mean_stderr: float
    p_zero: float
    p_zero_stderr: float
    expected_mean: float
    talagrand_value: float
    n_samples: int
    seed: int

    def to_json(self) -> dict:
        return asdict(self)


def truncated_set(j: JointPmf, f: CoveringSet, m: int, l: int, gamma: float) -> np.ndarray:
    """F intersected with {density <= ln(ML) - gamma} on the support."""
    f.check(j)
    return f.mask & (j.matrix > 0) & (j.density <= math.log(m) + math.log(l) - gamma)


def weighted_sum_stats(j: JointPmf, f: CoveringSet, spec: CodebookSpec, gamma: float,
                       workers: int = 1) -> WeightedSumStats:
    """Empirical law of S = (1/ML) sum_{i,k} exp(density(U_i, V_k)) 1{(U_i, V_k) in G}."""
    from .bounds.covering import talagrand_bound

    m, l = spec.m, spec.l
    g = truncated_set(j, f, m, l, gamma)
    weights = np.where(g, np.exp(np.where(g, j.density, 0.0)), 0.0) / (m * l)
    cdf_u, cdf_v = make_cdf(j.p_u), make_cdf(j.p_v)

    def block(gen, size):
        us, vs = _draw(gen, size, m, l, cdf_u, cdf_v)
        s = np.empty(size)
        zero = 0
        for sl in _batches(size, m, l):
            sub = weights[us[sl, :, None], vs[sl, None, :]]
            s[sl] = sub.sum(axis=(1, 2))
            zero += int((~g[us[sl, :, None], vs[sl, None, :]].any(axis=(1, 2))).sum())
        return math.fsum(s), math.fsum(s * s), zero

    parts = run_blocks(spec.n_samples, spec.seed, workers, block)
    n = spec.n_samples
    mean = math.fsum(p[0] for p in parts) / n
    second = math.fsum(p[1] for p in parts) / n
    p_zero = sum(p[2] for p in parts) / n
    var = max(0.0, second - mean * mean) * n / max(n - 1, 1)
    tal = talagrand_bound(j, f, m, l, gamma).value
    return WeightedSumStats(mean, math.sqrt(var / n), p_zero,
                            math.sqrt(p_zero * (1 - p_zero) / n),
                            float(j.matrix[g].sum()), tal, n, spec.seed)
