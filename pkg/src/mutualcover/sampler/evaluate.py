"""Weighted rule, exact and Monte Carlo total variation, duality check."""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from ..errors import ValidationError
from ..oracle import CodebookSpec, McEstimate, worstcase_gap_exact
from ..probcore import JointPmf
from ..rng import inverse_cdf, make_cdf, run_blocks
from .flow import SelectionResult, _realization_keys, optimal_pair_sampler, pair_realizations, pair_symbols
from .rule import SelectionRule


def weighted_sampler_rule(j: JointPmf, m: int, l: int) -> SelectionRule:
    """Select pair (i, k) with probability proportional to exp(density(u_i, v_k))."""
    us, vs, ui, vi, probs, slots = pair_realizations(j, m, l)
    ratio = _density_ratio(j).ravel()
    w = ratio[slots]
    tot = w.sum(axis=1, keepdims=True)
    dead = tot[:, 0] == 0
    weights = np.where(dead[:, None], 1.0 / slots.shape[1], w / np.where(dead, 1.0, tot[:, 0])[:, None])
    flags = []
    if np.any(dead & (probs > 0)):
        flags.append("uniform fallback on realizations with no positive-density pair")
    return SelectionRule(_realization_keys(j, us, vs, ui, vi), probs, slots, weights,
                         tuple(pair_symbols(j)), (m, l), flags)


def _density_ratio(j: JointPmf) -> np.ndarray:
    """exp(density) = P_UV / (P_U P_V), 0 off the support."""
    prod = j.product
    return np.divide(j.matrix, prod, out=np.zeros_like(j.matrix), where=prod > 0)


def _check_rule(j: JointPmf, rule: SelectionRule, m: int, l: int) -> None:
    if rule.pair_shape != (m, l):
        raise ValidationError(f"rule is for {rule.pair_shape}, not {(m, l)}")
    if len(rule.symbols) != j.matrix.size:
        raise ValidationError("rule symbols do not match the joint alphabet")


def exact_tv_of_rule(j: JointPmf, rule: SelectionRule, m: int, l: int) -> float:
    """Total variation between the selected pair's law and P_UV."""
    _check_rule(j, rule, m, l)
    *_, probs, _ = pair_realizations(j, m, l)
    mass = probs[:, None] * rule.weights
    out = np.bincount(rule.slots.ravel(), weights=mass.ravel(), minlength=j.matrix.size)
    return 0.5 * float(np.abs(out - j.matrix.ravel()).sum())


SlotChooser = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def mc_tv_of_rule(j: JointPmf, rule: SelectionRule | SlotChooser, spec: CodebookSpec,
                  workers: int = 1) -> McEstimate:
    """Plug-in TV estimate from simulated selections.

    ``rule`` is either a :class:`SelectionRule` in pair form or a function
    ``(u_idx, v_idx, uniforms) -> slot`` acting on batches of codebooks.
    """
    m, l = spec.m, spec.l
    nu, nv = j.shape
    if isinstance(rule, SelectionRule):
        _check_rule(j, rule, m, l)
        cdfs = np.cumsum(rule.weights, axis=1)
        cdfs[:, -1] = 1.0
        radix_u = nu ** np.arange(m - 1, -1, -1, dtype=np.int64)
        radix_v = nv ** np.arange(l - 1, -1, -1, dtype=np.int64)
        n_v = nv**l

        def choose(u_idx, v_idx, w):
            row = (u_idx @ radix_u) * n_v + v_idx @ radix_v
            return np.minimum((cdfs[row] <= w[:, None]).sum(axis=1), m * l - 1)
    else:
        choose = rule
    cdf_u, cdf_v = make_cdf(j.p_u), make_cdf(j.p_v)

    def block(gen, size):
        x = gen.random((size, m + l + 1))
        u_idx = inverse_cdf(cdf_u, x[:, :m])
        v_idx = inverse_cdf(cdf_v, x[:, m:m + l])
        slot = np.asarray(choose(u_idx, v_idx, x[:, -1]), dtype=np.int64)
        i, k = np.divmod(slot, l)
        sym = u_idx[np.arange(size), i] * nv + v_idx[np.arange(size), k]
        return np.bincount(sym, minlength=nu * nv)

    counts = np.sum(run_blocks(spec.n_samples, spec.seed, workers, block), axis=0)
    n = spec.n_samples
    q = counts / n
    tv = 0.5 * float(np.abs(q - j.matrix.ravel()).sum())
    stderr = 0.5 * float(np.sqrt(q * (1 - q) / n).sum())
    return McEstimate(tv, stderr, n, spec.seed, workers,
                      bias_bound=math.sqrt(j.matrix.size / (2 * n)))


@dataclass
class DualityReport:
    sup_side: float
    inf_side: float
    slack: float
    le_holds: bool
    within_slack: bool
    k: int
    n_realizations: int
    argmax_mask: list

    @property
    def ok(self) -> bool:
        return self.le_holds and self.within_slack

    def to_json(self) -> dict:
        return asdict(self)


EXACT_CHECK_LIMIT = 20_000


def _exact_sides(j: JointPmf, m: int, l: int, mask: np.ndarray,
                 result: SelectionResult) -> tuple[Fraction, Fraction]:
    """Both sides in rational arithmetic, taking the float inputs as exact
    (renormalized exactly so the total mass is 1).

    The covering gap of ``mask`` never exceeds the TV of any rule, so this
    comparison is free of rounding.
    """
    nu, nv = j.shape
    total = sum((Fraction(x) for x in j.matrix.ravel().tolist()), Fraction(0))
    pm = [[Fraction(x) / total for x in row] for row in j.matrix.tolist()]
    pu = [sum(row, Fraction(0)) for row in pm]
    pv = [sum((pm[u][v] for u in range(nu)), Fraction(0)) for v in range(nv)]
    covered = sum((pm[u][v] for u in range(nu) for v in range(nv) if mask[u, v]), Fraction(0))
    failure = Fraction(0)
    for vt in itertools.product(range(nv), repeat=l):
        pvt = math.prod((pv[v] for v in vt), start=Fraction(1))
        clear = sum((pu[u] for u in range(nu) if not any(mask[u, v] for v in vt)), Fraction(0))
        failure += pvt * clear**m
    sup = covered - 1 + failure

    us, vs, ui, vi, _, slots = pair_realizations(j, m, l)
    pu_t = [math.prod((pu[x] for x in row), start=Fraction(1)) for row in us.tolist()]
    pv_t = [math.prod((pv[x] for x in row), start=Fraction(1)) for row in vs.tolist()]
    out = [Fraction(0)] * (nu * nv)
    n_slots = slots.shape[1]
    for r, (a, b) in enumerate(zip(ui.tolist(), vi.tolist())):
        pr = pu_t[a] * pv_t[b]
        if pr == 0:
            continue
        if result.supply[r] == 0:
            for z in slots[r].tolist():
                out[z] += pr / n_slots
        else:
            for z in np.flatnonzero(result.routed[r]).tolist():
                out[z] += pr * Fraction(int(result.routed[r, z]), int(result.supply[r]))
    inf = sum((abs(out[u * nv + v] - pm[u][v]) for u in range(nu) for v in range(nv)),
              Fraction(0)) / 2
    return sup, inf


def duality_check(j: JointPmf, m: int, l: int, k: int) -> DualityReport:
    """Compare the worst-case covering gap with the best achievable selection TV.

    The one-sided check ``sup <= inf`` is done in exact rational arithmetic
    for small realization spaces and in floating point otherwise.
    """
    sup, mask = worstcase_gap_exact(j, m, l)
    result = optimal_pair_sampler(j, m, l, k)
    inf = exact_tv_of_rule(j, result.rule, m, l)
    n_real = result.rule.slots.shape[0]
    slack = 4.0 * (j.matrix.size + n_real) / k
    if n_real * result.rule.n_slots <= EXACT_CHECK_LIMIT:
        sup_q, inf_q = _exact_sides(j, m, l, mask.mask, result)
        le = sup_q <= inf_q
    else:
        le = sup <= inf
    return DualityReport(sup, inf, slack, bool(le), abs(sup - inf) <= slack, k, n_real,
                         mask.mask.astype(int).tolist())
