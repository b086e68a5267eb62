"""Optimal selection rules from an integer max-flow network.

Realizations are matched to symbols: each realization may send its
(quantized) mass to any symbol it contains, each symbol accepts at most its
quantized target mass, and a shared overflow node absorbs up to ``eps * K``
units. A flow saturating the source yields a rule whose output law is within
``eps`` (plus rounding) of the target.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from .. import caps
from ..errors import InfeasibleFlow, ValidationError
from ..oracle import worstcase_gap_exact
from ..probcore import JointPmf, Pmf
from .rule import SelectionRule, largest_remainder

MIN_K = 1000
MASK_CHUNK = 1 << 12


@dataclass
class FlowNetwork:
    """Source, realization, symbol, overflow and sink nodes with integer capacities."""

    n_real: int
    n_sym: int
    tails: np.ndarray
    heads: np.ndarray
    capacity: np.ndarray
    k: int

    @property
    def source(self) -> int:
        return 0

    @property
    def overflow(self) -> int:
        return 1 + self.n_real + self.n_sym

    @property
    def sink(self) -> int:
        return 2 + self.n_real + self.n_sym

    def real_node(self, r):
        return 1 + r

    def sym_node(self, z):
        return 1 + self.n_real + z

    @classmethod
    def build(cls, supply: np.ndarray, demand: np.ndarray, pairs: np.ndarray,
              overflow_units: int) -> "FlowNetwork":
        """``pairs`` lists (realization, symbol) adjacencies."""
        n_real, n_sym = supply.size, demand.size
        k = int(supply.sum())
        if int(demand.sum()) != k:
            raise ValidationError("supply and demand must carry the same total")
        sym0, ovf, sink = 1 + n_real, 1 + n_real + n_sym, 2 + n_real + n_sym
        live = np.flatnonzero(supply > 0)
        adj = pairs[supply[pairs[:, 0]] > 0]
        tails = np.concatenate([np.zeros(live.size, np.int64), 1 + adj[:, 0],
                                1 + live, sym0 + np.arange(n_sym), [ovf]])
        heads = np.concatenate([1 + live, sym0 + adj[:, 1],
                                np.full(live.size, ovf), np.full(n_sym, sink), [sink]])
        capacity = np.concatenate([supply[live], np.full(adj.shape[0], k),
                                   np.minimum(supply[live], overflow_units),
                                   demand, [overflow_units]]).astype(np.int64)
        if np.any(capacity < 0):
            raise ValidationError("capacities must be nonnegative")
        return cls(n_real, n_sym, tails, heads, capacity, k)

    def solve(self) -> np.ndarray:
        """Integral max flow per edge; raises InfeasibleFlow if the source is not saturated."""
        n = self.sink + 1
        if self.capacity.max(initial=0) >= 2**31:
            raise ValidationError("capacities exceed the 32-bit range of the solver")
        graph = csr_matrix((self.capacity.astype(np.int32), (self.tails, self.heads)),
                           shape=(n, n))
        res = maximum_flow(graph, self.source, self.sink, method="dinic")
        if res.flow_value < self.k:
            raise InfeasibleFlow(f"routed {res.flow_value} of {self.k} units")
        flow = res.flow.tocsr()
        return np.asarray(flow[self.tails, self.heads]).ravel().astype(np.int64)


@dataclass
class SelectionResult:
    rule: SelectionRule
    achieved_tv: float
    eps: float
    overflow_units: int
    k: int
    network: FlowNetwork
    # integer flow per (realization, symbol) and quantized realization mass
    routed: np.ndarray
    supply: np.ndarray


def _adjacency(slots: np.ndarray, n_sym: int) -> np.ndarray:
    rows = np.repeat(np.arange(slots.shape[0]), slots.shape[1])
    keys = np.unique(rows * n_sym + slots.ravel())
    return np.stack([keys // n_sym, keys % n_sym], axis=1)


def _first_slot(slots: np.ndarray, n_sym: int) -> np.ndarray:
    """first[r, z] = first slot of row r holding symbol z, or -1."""
    first = np.full((slots.shape[0], n_sym), -1, dtype=np.int64)
    for n in range(slots.shape[1] - 1, -1, -1):
        first[np.arange(slots.shape[0]), slots[:, n]] = n
    return first


def _route(probs: np.ndarray, slots: np.ndarray, target: np.ndarray, k: int,
           eps: float, realizations, symbols, pair_shape=None) -> SelectionResult:
    if k < MIN_K:
        raise ValidationError(f"k must be at least {MIN_K}")
    n_real, n_sym = slots.shape[0], target.size
    supply = largest_remainder(probs, k)
    demand = largest_remainder(target, k)
    pairs = _adjacency(slots, n_sym)
    units = max(0, math.ceil(eps * k - 1e-9))
    notes = []
    while True:
        net = FlowNetwork.build(supply, demand, pairs, units)
        try:
            edge_flow = net.solve()
            break
        except InfeasibleFlow:
            graph = csr_matrix((net.capacity.astype(np.int32), (net.tails, net.heads)),
                               shape=(net.sink + 1,) * 2)
            routed = maximum_flow(graph, net.source, net.sink).flow_value
            # each extra overflow unit adds at most one unit of flow
            units += max(1, k - routed)
            notes.append(f"overflow allowance raised to {units}/{k}")
            if units > k:
                raise
    n_adj = pairs[supply[pairs[:, 0]] > 0].shape[0]
    live = np.flatnonzero(supply > 0)
    adj = pairs[supply[pairs[:, 0]] > 0]
    routed = np.zeros((n_real, n_sym), dtype=np.int64)
    start = live.size
    routed[adj[:, 0], adj[:, 1]] = edge_flow[start:start + n_adj]
    over = np.zeros(n_real, dtype=np.int64)
    over[live] = edge_flow[start + n_adj:start + n_adj + live.size]

    if over.any():
        unmet = demand - routed.sum(axis=0)
        present = np.zeros((n_real, n_sym), dtype=bool)
        present[pairs[:, 0], pairs[:, 1]] = True
        for r in np.flatnonzero(over):
            cand = np.flatnonzero(present[r])
            z = int(cand[np.argmax(unmet[cand])])
            routed[r, z] += over[r]
            unmet[z] -= over[r]
        notes.append("overflow mass assigned to the adjacent symbol with the largest unmet demand")

    first = _first_slot(slots, n_sym)
    weights = np.zeros(slots.shape)
    zero_rows = 0
    for r in range(n_real):
        if supply[r] == 0:
            weights[r, :] = 1.0 / slots.shape[1]
            zero_rows += probs[r] > 0
            continue
        zs = np.flatnonzero(routed[r])
        weights[r, first[r, zs]] = routed[r, zs] / supply[r]
    if zero_rows:
        notes.append(f"{zero_rows} realization(s) of positive mass quantized to 0; uniform rows")
    rule = SelectionRule(list(realizations), probs, slots, weights, tuple(symbols),
                         pair_shape, notes)
    tv = 0.5 * float(np.abs(rule.output_distribution() - target).sum())
    return SelectionResult(rule, tv, eps, units, k, net, routed, supply)


def sequence_gap(probs: np.ndarray, slots: np.ndarray, target: np.ndarray) -> float:
    """max over symbol sets F of target(F) - P[some slot symbol lies in F]."""
    n_sym = target.size
    caps.check("symbol alphabet (mask enumeration)", n_sym, caps.MASK_CELLS)
    present = np.zeros((slots.shape[0], n_sym), dtype=bool)
    present[np.repeat(np.arange(slots.shape[0]), slots.shape[1]), slots.ravel()] = True
    sets = present @ (np.int64(1) << np.arange(n_sym, dtype=np.int64))
    keys, inv = np.unique(sets, return_inverse=True)
    w = np.bincount(inv.ravel(), weights=probs)
    shifts = np.arange(n_sym, dtype=np.int64)
    best = 0.0
    for lo in range(0, 1 << n_sym, MASK_CHUNK):
        masks = np.arange(lo, min(lo + MASK_CHUNK, 1 << n_sym), dtype=np.int64)
        bits = ((masks[:, None] >> shifts) & 1).astype(float)
        hit = (masks[:, None] & keys[None, :]) != 0
        gaps = bits @ target - hit @ w
        best = max(best, float(gaps.max()))
    return best


def select_from_sequence(pz_n: Pmf, target: Pmf, k: int) -> SelectionResult:
    """Pick one of N observed symbols so the output law approximates ``target``.

    ``pz_n`` is a law on length-N tuples of symbols.
    """
    seqs = [tuple(s) if isinstance(s, (tuple, list)) else (s,) for s in pz_n.labels]
    lengths = {len(s) for s in seqs}
    if len(lengths) != 1:
        raise ValidationError("all realizations must have the same length")
    n = lengths.pop()
    caps.check("realizations x N", len(seqs) * n, caps.SEQUENCE_CELLS)
    symbols = list(target.labels)
    extra = sorted({z for s in seqs for z in s} - set(symbols), key=repr)
    symbols += extra
    tgt = np.concatenate([target.probs, np.zeros(len(extra))])
    index = {z: i for i, z in enumerate(symbols)}
    slots = np.array([[index[z] for z in s] for s in seqs], dtype=np.int64)
    probs = np.asarray(pz_n.probs, dtype=float)
    eps = sequence_gap(probs, slots, tgt)
    return _route(probs, slots, tgt, k, eps, seqs, symbols)


def pair_realizations(j: JointPmf, m: int, l: int):
    """Every codebook draw (u^m, v^l) in lexicographic order with its slot table.

    Row index = (mixed-radix u index) * |V|^l + (mixed-radix v index); slot
    ``i * l + k`` holds pair symbol ``u_i * |V| + v_k``.
    """
    nu, nv = j.shape
    caps.check("codebook realizations", nu**m * nv**l, caps.REALIZATIONS)
    us = np.array(list(itertools.product(range(nu), repeat=m)), dtype=np.int64)
    vs = np.array(list(itertools.product(range(nv), repeat=l)), dtype=np.int64)
    pu = np.prod(j.p_u[us], axis=1)
    pv = np.prod(j.p_v[vs], axis=1)
    probs = np.outer(pu, pv).ravel()
    ui = np.repeat(np.arange(us.shape[0]), vs.shape[0])
    vi = np.tile(np.arange(vs.shape[0]), us.shape[0])
    slots = (us[ui][:, :, None] * nv + vs[vi][:, None, :]).reshape(ui.size, m * l)
    return us, vs, ui, vi, probs, slots


def pair_symbols(j: JointPmf) -> list:
    return [(u, v) for u in j.u_labels for v in j.v_labels]


def optimal_pair_sampler(j: JointPmf, m: int, l: int, k: int) -> SelectionResult:
    """Index-pair selection minimizing TV to P_UV, up to K-type rounding."""
    caps.check("mask cells", j.shape[0] * j.shape[1], caps.MASK_CELLS)
    us, vs, ui, vi, probs, slots = pair_realizations(j, m, l)
    eps, _ = worstcase_gap_exact(j, m, l)
    keys = _realization_keys(j, us, vs, ui, vi)
    return _route(probs, slots, j.matrix.ravel(), k, eps, keys, pair_symbols(j), (m, l))


def _realization_keys(j, us, vs, ui, vi):
    ul = [tuple(j.u_labels[x] for x in row) for row in us]
    vl = [tuple(j.v_labels[x] for x in row) for row in vs]
    return [(ul[a], vl[b]) for a, b in zip(ui, vi)]
