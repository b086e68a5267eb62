"""Finite-alphabet probability primitives.

Everything is in nats. Null atoms (``P_UV(u, v) = 0``) carry information
density ``-inf`` and every expectation uses the convention ``0 * -inf = 0``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Hashable, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from . import caps
from .errors import (DegenerateTilt, DuplicateLabel, NegativeEntry,
                     NotNormalized, ShapeMismatch, UnsupportedOrder,
                     ValidationError)

NORMALIZATION_TOL = 1e-9
# Relative tolerance used when grouping equal density values.
TIE_TOL = 1e-12


def _labels(labels, size: int, what: str) -> tuple:
    if labels is None:
        return tuple(range(size))
    labels = tuple(tuple(x) if isinstance(x, list) else x for x in labels)
    if len(labels) != size:
        raise ShapeMismatch(f"{what}: {len(labels)} labels for {size} entries")
    if len(set(labels)) != len(labels):
        raise DuplicateLabel(f"{what}: labels must be distinct")
    return labels


def _normalized(values, what: str) -> np.ndarray:
    try:
        arr = np.array(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{what}: entries must be numbers ({exc})") from None
    if arr.size == 0:
        raise ValidationError(f"{what}: empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what}: entries must be finite")
    if np.any(arr < 0):
        raise NegativeEntry(f"{what}: negative entry {arr.min()!r}")
    total = arr.sum()
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NotNormalized(f"{what}: entries sum to {total!r}")
    arr = arr / total
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Pmf:
    labels: tuple
    probs: np.ndarray

    @classmethod
    def from_probs(cls, probs, labels: Sequence[Hashable] | None = None) -> "Pmf":
        arr = _normalized(probs, "pmf")
        if arr.ndim != 1:
            raise ShapeMismatch("pmf: probabilities must be a vector")
        return cls(_labels(labels, arr.size, "pmf"), arr)

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        return self.labels.index(label)


@dataclass(frozen=True)
class JointPmf:
    """Validated joint distribution on a finite product alphabet."""

    u_labels: tuple
    v_labels: tuple
    matrix: np.ndarray

    @cached_property
    def p_u(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    @cached_property
    def p_v(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    @property
    def marginal_u(self) -> Pmf:
        return Pmf(self.u_labels, self.p_u)

    @property
    def marginal_v(self) -> Pmf:
        return Pmf(self.v_labels, self.p_v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @cached_property
    def product(self) -> np.ndarray:
        """P_U x P_V as a matrix."""
        return np.outer(self.p_u, self.p_v)

    @cached_property
    def density(self) -> np.ndarray:
        return info_density(self).values

    @cached_property
    def spectrum(self) -> "DensitySpectrum":
        return DensitySpectrum.from_joint(self)

    def to_json(self) -> dict:
        return {"u_labels": list(self.u_labels), "v_labels": list(self.v_labels),
                "matrix": self.matrix.tolist()}


def build_joint(matrix, u_labels=None, v_labels=None) -> JointPmf:
    try:
        arr = np.array(matrix, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"joint: matrix must be rectangular numbers ({exc})") from None
    if arr.ndim != 2:
        raise ShapeMismatch("joint: matrix must be two-dimensional")
    arr = _normalized(arr, "joint")
    return JointPmf(_labels(u_labels, arr.shape[0], "joint u"),
                    _labels(v_labels, arr.shape[1], "joint v"), arr)


def joint_from_json(obj: dict) -> JointPmf:
    if not isinstance(obj, dict) or "matrix" not in obj:
        raise ValidationError("joint JSON needs a 'matrix' field")
    return build_joint(obj["matrix"], obj.get("u_labels"), obj.get("v_labels"))


def dsbs(p: float) -> JointPmf:
    """Doubly symmetric binary source with crossover ``p``."""
    return build_joint([[(1 - p) / 2, p / 2], [p / 2, (1 - p) / 2]])


@dataclass(frozen=True)
class CondPmf:
    """Row-stochastic channel matrix ``W[x, y] = P(y | x)``."""

    in_labels: tuple
    out_labels: tuple
    matrix: np.ndarray

    @classmethod
    def from_matrix(cls, rows, in_labels=None, out_labels=None) -> "CondPmf":
        try:
            arr = np.array(rows, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"channel: rows must be numbers ({exc})") from None
        if arr.ndim != 2:
            raise ShapeMismatch("channel: matrix must be two-dimensional")
        arr = np.vstack([_normalized(r, f"channel row {i}") for i, r in enumerate(arr)])
        arr.setflags(write=False)
        return cls(_labels(in_labels, arr.shape[0], "channel in"),
                   _labels(out_labels, arr.shape[1], "channel out"), arr)

    def row(self, i: int) -> Pmf:
        return Pmf(self.out_labels, self.matrix[i])


@dataclass(frozen=True)
class InfoDensityTable:
    values: np.ndarray
    null_value: float = -math.inf

    def __getitem__(self, idx):
        return self.values[idx]


def info_density(j: JointPmf) -> InfoDensityTable:
    p = j.matrix
    q = np.outer(j.p_u, j.p_v)
    out = np.full(p.shape, -np.inf)
    pos = p > 0
    out[pos] = np.log(p[pos]) - np.log(q[pos])
    out.setflags(write=False)
    return InfoDensityTable(out)


def mutual_information(j: JointPmf) -> float:
    pos = j.matrix > 0
    return float(np.sum(j.matrix[pos] * j.density[pos]))


def varentropy(j: JointPmf) -> float:
    """Standard deviation (not variance) of the information density."""
    return j.spectrum.std()


def renyi_divergence(j: JointPmf, alpha: float) -> float:
    """Rényi divergence of order ``alpha`` between P_UV and P_U x P_V."""
    if not alpha > 0:
        raise UnsupportedOrder(f"Rényi order must be positive, got {alpha}")
    if alpha == 1:
        raise UnsupportedOrder("order 1 is the KL divergence; use mutual_information")
    return j.spectrum.log_mgf(alpha - 1) / (alpha - 1)


def tilted_distribution(j: JointPmf, rho: float) -> JointPmf:
    """P^(1+rho) proportional to P_UV^(1+rho) P_U^-rho P_V^-rho."""
    if not rho >= 0:
        raise ValidationError(f"tilt parameter must be nonnegative, got {rho}")
    if rho == 0:
        return j
    pos = j.matrix > 0
    logw = np.full(j.shape, -np.inf)
    logw[pos] = np.log(j.matrix[pos]) + rho * j.density[pos]
    lz = logsumexp(logw[pos])
    if not np.isfinite(lz):
        raise DegenerateTilt(f"normalizer is not finite at rho={rho}")
    w = np.exp(logw - lz)
    w /= w.sum()
    w.setflags(write=False)
    return JointPmf(j.u_labels, j.v_labels, w)


def tilted_rate(j: JointPmf, rho: float) -> float:
    """Mean of the original information density under the tilted law."""
    t = tilted_distribution(j, rho)
    pos = t.matrix > 0
    return float(np.sum(t.matrix[pos] * j.density[pos]))


def smooth_mutual_information(j: JointPmf, eps: float) -> float:
    """Smallest max-density over sets keeping mass at least ``1 - eps``.

    Atoms are removed whole, highest density first, ties in row-major
    (u, v) order, while the removed mass stays within ``eps``.
    """
    if not 0 <= eps < 1:
        raise ValidationError(f"eps must lie in [0, 1), got {eps}")
    flat_d = j.density.ravel()
    flat_p = j.matrix.ravel()
    support = np.flatnonzero(flat_p > 0)
    # stable sort on -density keeps row-major order among ties
    order = support[np.argsort(-flat_d[support], kind="stable")]
    removed = 0.0
    for idx in order:
        if removed + flat_p[idx] > eps + TIE_TOL:
            return float(flat_d[idx])
        removed += flat_p[idx]
    return float(flat_d[order[-1]])


def q_function(x: float) -> float:
    """Gaussian upper tail probability."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def tensor_power(j: JointPmf, n: int, cap: int = caps.TENSOR_ENTRIES) -> JointPmf:
    if n < 1:
        raise ValidationError("tensor power needs n >= 1")
    nu, nv = j.shape
    caps.check("tensor power", (nu * nv) ** n, cap)
    if n == 1:
        return j
    mat = reduce(np.kron, [j.matrix] * n)
    mat = mat / mat.sum()
    mat.setflags(write=False)
    return JointPmf(tuple(itertools.product(j.u_labels, repeat=n)),
                    tuple(itertools.product(j.v_labels, repeat=n)), mat)


@dataclass(frozen=True)
class MultivarPmf:
    """Joint law of (Z, V_1, ..., V_k) as a dense tensor indexed [z, v1, ..., vk]."""

    z_labels: tuple
    v_labels: tuple  # one label tuple per coordinate
    tensor: np.ndarray

    @classmethod
    def from_tensor(cls, tensor, z_labels=None, v_labels=None) -> "MultivarPmf":
        arr = _normalized(tensor, "multivariate pmf")
        if arr.ndim < 2:
            raise ShapeMismatch("multivariate pmf needs a Z axis and at least one V axis")
        k = arr.ndim - 1
        if v_labels is None:
            v_labels = [None] * k
        if len(v_labels) != k:
            raise ShapeMismatch("one label list per V coordinate required")
        vl = tuple(_labels(v_labels[i], arr.shape[i + 1], f"V{i + 1}") for i in range(k))
        return cls(_labels(z_labels, arr.shape[0], "Z"), vl, arr)

    @classmethod
    def from_joint(cls, j: JointPmf) -> "MultivarPmf":
        """Pair (U, V) as (V_1, V_2) with a constant Z."""
        return cls(("z",), (j.u_labels, j.v_labels), j.matrix[None, :, :])

    @property
    def k(self) -> int:
        return self.tensor.ndim - 1

    @property
    def p_z(self) -> np.ndarray:
        return self.tensor.reshape(self.tensor.shape[0], -1).sum(axis=1)


@dataclass(frozen=True)
class DensitySpectrum:
    """Law of the information density on the support of P_UV.

    ``values`` are the distinct density levels (ascending), ``probs`` their
    mass under P_UV and ``ref`` their mass under P_U x P_V. Every functional
    that depends on the pair only through the law of the density (tails,
    cumulants, smooth mutual information) is computed from here, which lets
    tensor powers be handled without materializing them.
    """

    values: np.ndarray
    probs: np.ndarray
    ref: np.ndarray
    blocklength: int = 1
    atoms: int = field(default=0, compare=False)

    @classmethod
    def from_arrays(cls, values, probs, ref, blocklength: int = 1) -> "DensitySpectrum":
        values = np.asarray(values, dtype=float)
        probs = np.asarray(probs, dtype=float)
        ref = np.asarray(ref, dtype=float)
        keep = probs > 0
        values, probs, ref = values[keep], probs[keep], ref[keep]
        order = np.argsort(values, kind="stable")
        values, probs, ref = values[order], probs[order], ref[order]
        # merge levels equal up to TIE_TOL
        if values.size > 1:
            scale = np.maximum(1.0, np.abs(values))
            new_group = np.empty(values.size, dtype=bool)
            new_group[0] = True
            new_group[1:] = np.diff(values) > TIE_TOL * scale[1:]
            starts = np.flatnonzero(new_group)
            values = values[starts]
            probs = np.add.reduceat(probs, starts)
            ref = np.add.reduceat(ref, starts)
        for arr in (values, probs, ref):
            arr.setflags(write=False)
        return cls(values, probs, ref, blocklength, int(keep.sum()))

    @classmethod
    def from_joint(cls, j: JointPmf) -> "DensitySpectrum":
        pos = j.matrix > 0
        return cls.from_arrays(j.density[pos], j.matrix[pos], j.product[pos])

    def power(self, n: int, cap: int = caps.COMPOSITIONS) -> "DensitySpectrum":
        """Spectrum of the n-fold i.i.d. product.

        Enumerates counts of each base level (multinomial law), so a binary
        symmetric pair costs n + 1 terms.
        """
        if n < 1:
            raise ValidationError("power needs n >= 1")
        if n == 1:
            return self
        r = self.values.size
        caps.check("spectrum compositions", math.comb(n + r - 1, r - 1), cap)
        counts = compositions(n, r)
        log_coef = gammaln(n + 1) - gammaln(counts + 1).sum(axis=1)
        with np.errstate(divide="ignore"):
            lp = np.log(self.probs)
            lq = np.log(self.ref)
        values = counts @ self.values
        probs = np.exp(log_coef + _dot_counts(counts, lp))
        ref = np.exp(log_coef + _dot_counts(counts, lq))
        out = DensitySpectrum.from_arrays(values, probs, ref, self.blocklength * n)
        return out

    @property
    def total(self) -> float:
        return float(self.probs.sum())

    def mean(self) -> float:
        return float(np.dot(self.probs, self.values))

    def std(self) -> float:
        mu = self.mean()
        return math.sqrt(max(0.0, float(np.dot(self.probs, (self.values - mu) ** 2))))

    def tail_gt(self, t: float) -> float:
        return float(self.probs[self.values > t].sum())

    def tail_ge(self, t: float) -> float:
        return float(self.probs[self.values >= t].sum())

    def mass_le(self, t: float) -> float:
        return float(self.probs[self.values <= t].sum())

    def log_mgf(self, s: float) -> float:
        """ln E[exp(s * density)] under P_UV."""
        return float(logsumexp(np.log(self.probs) + s * self.values))

    def tilted_mean(self, s: float) -> float:
        """Mean of the density under the law tilted by exp(s * density)."""
        lw = np.log(self.probs) + s * self.values
        w = np.exp(lw - logsumexp(lw))
        return float(np.dot(w, self.values))

    def smooth_levels(self) -> tuple[np.ndarray, np.ndarray]:
        """Pairs (eps_j, I_inf^eps_j) at every achievable truncation mass.

        ``eps_j`` is the mass strictly above level j; for eps in
        [eps_j, eps_{j-1}) the smooth mutual information equals level j.
        Returned in increasing eps order, starting at eps = 0.
        """
        desc_vals = self.values[::-1]
        desc_probs = self.probs[::-1]
        above = np.concatenate(([0.0], np.cumsum(desc_probs)[:-1]))
        return above, desc_vals

    def smooth_mi(self, eps: float) -> float:
        eps_grid, levels = self.smooth_levels()
        idx = np.searchsorted(eps_grid, eps + TIE_TOL, side="right") - 1
        # the next level can only be dropped if its whole mass fits
        return float(levels[max(idx, 0)])


def _dot_counts(counts: np.ndarray, logs: np.ndarray) -> np.ndarray:
    # 0 * -inf must be 0 here
    terms = np.where(counts > 0, counts * np.where(np.isfinite(logs), logs, 0.0), 0.0)
    dead = (counts > 0) & ~np.isfinite(logs)
    out = terms.sum(axis=1)
    out[dead.any(axis=1)] = -np.inf
    return out


def compositions(n: int, parts: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``parts`` summing to ``n``."""
    if parts == 1:
        return np.array([[n]], dtype=np.int64)
    # stars and bars: bar positions among n + parts - 1 slots
    bars = np.array(list(itertools.combinations(range(n + parts - 1), parts - 1)),
                    dtype=np.int64).reshape(-1, parts - 1)
    padded = np.hstack([np.full((bars.shape[0], 1), -1), bars,
                        np.full((bars.shape[0], 1), n + parts - 1)])
    return np.diff(padded, axis=1) - 1


def as_spectrum(x) -> DensitySpectrum:
    if isinstance(x, DensitySpectrum):
        return x
    if isinstance(x, JointPmf):
        return x.spectrum
    raise TypeError(f"expected JointPmf or DensitySpectrum, got {type(x).__name__}")
