"""Exact solver for the Benders master problem.

minimize eta over binary b subject to
    eta >= a_j^T b + c_j   (optimality cuts)
    0   >= a_j^T b + c_j   (feasibility cuts)

Best-bound branch and bound; node bounds come from the LP relaxation with
b in [0, 1]^M (HiGHS via scipy).  Nodes with few free bits are finished by
vectorized enumeration, which is far cheaper than further LP calls.
"""

from __future__ import annotations

import enum
import heapq
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

TOL = 1e-9
ETA_FLOOR = -1e12
ENUM_FREE = 10


class CutKind(enum.Enum):
    OPTIMALITY = "optimality"
    FEASIBILITY = "feasibility"


class MasterInfeasible(Exception):
    """The feasibility cuts exclude every binary point (or node)."""


@dataclass(frozen=True)
class LinearCut:
    coeffs: np.ndarray
    constant: float
    kind: CutKind = CutKind.OPTIMALITY

    def __call__(self, b) -> float:
        return float(np.dot(self.coeffs, b) + self.constant)


@dataclass(frozen=True)
class MasterSolution:
    pins: np.ndarray
    eta: float
    nodes: int = 0


def _split(cuts, m):
    opt = [c for c in cuts if c.kind is CutKind.OPTIMALITY]
    feas = [c for c in cuts if c.kind is CutKind.FEASIBILITY]
    a_opt = np.array([c.coeffs for c in opt], dtype=float).reshape(len(opt), m)
    c_opt = np.array([c.constant for c in opt], dtype=float)
    a_feas = np.array([c.coeffs for c in feas], dtype=float).reshape(len(feas), m)
    c_feas = np.array([c.constant for c in feas], dtype=float)
    return a_opt, c_opt, a_feas, c_feas


def _evaluate(b, a_opt, c_opt, a_feas, c_feas, eta_floor):
    """Exact master objective at a binary point (inf when infeasible)."""
    if len(c_feas) and np.any(a_feas @ b + c_feas > TOL):
        return np.inf
    if len(c_opt) == 0:
        return eta_floor
    return max(float(np.max(a_opt @ b + c_opt)), eta_floor)


def _lp(m, a_opt, c_opt, a_feas, c_feas, eta_floor, lo, hi):
    n_opt, n_feas = len(c_opt), len(c_feas)
    if n_opt + n_feas == 0:
        return eta_floor, lo.astype(float)
    # variables: b_1..b_M, eta
    cost = np.zeros(m + 1)
    cost[-1] = 1.0
    a_ub = np.zeros((n_opt + n_feas, m + 1))
    b_ub = np.empty(n_opt + n_feas)
    a_ub[:n_opt, :m] = a_opt
    a_ub[:n_opt, m] = -1.0
    b_ub[:n_opt] = -c_opt
    a_ub[n_opt:, :m] = a_feas
    b_ub[n_opt:] = -c_feas
    bounds = [(float(l), float(h)) for l, h in zip(lo, hi)] + [(eta_floor, None)]
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status == 2:
        raise MasterInfeasible("LP relaxation infeasible")
    if res.status != 0:
        raise RuntimeError(f"LP relaxation failed: {res.message}")
    return float(res.fun), np.clip(res.x[:m], 0.0, 1.0)


def lp_relax(cuts, m: int, eta_floor: float = ETA_FLOOR, fixed_bits=None):
    """Lower bound and relaxed b for the master with some bits pinned.

    ``fixed_bits`` maps index -> 0/1.  Raises MasterInfeasible when the node
    has no feasible relaxed point.
    """
    lo = np.zeros(m)
    hi = np.ones(m)
    for i, v in (fixed_bits or {}).items():
        lo[i] = hi[i] = float(v)
    a_opt, c_opt, a_feas, c_feas = _split(cuts, m)
    if np.all(lo == hi):
        val = _evaluate(lo, a_opt, c_opt, a_feas, c_feas, eta_floor)
        if np.isinf(val):
            raise MasterInfeasible("fixed point violates a feasibility cut")
        return val, lo
    return _lp(m, a_opt, c_opt, a_feas, c_feas, eta_floor, lo, hi)


_COMBOS: dict[int, np.ndarray] = {}


def _combos(k):
    if k not in _COMBOS:
        _COMBOS[k] = np.array(list(itertools.product((0.0, 1.0), repeat=k))).reshape(-1, k)
    return _COMBOS[k]


def _enumerate_node(lo, free, a_opt, c_opt, a_feas, c_feas, eta_floor):
    """Best completion of a node, lexicographically smallest among ties."""
    pts = np.tile(lo, (2 ** int(free.sum()), 1))
    pts[:, free] = _combos(int(free.sum()))
    vals = np.full(len(pts), eta_floor)
    if len(c_opt):
        vals = np.maximum(vals, np.max(pts @ a_opt.T + c_opt, axis=1))
    if len(c_feas):
        vals[np.any(pts @ a_feas.T + c_feas > TOL, axis=1)] = np.inf
    best = vals.min()
    if not np.isfinite(best):
        return np.inf, None
    # rows are in lexicographic order, so the first row inside the tie band wins
    j = int(np.flatnonzero(vals <= best + TOL)[0])
    return float(vals[j]), pts[j]


def _better(val, b, inc_val, inc_b):
    if val < inc_val - TOL:
        return True
    return abs(val - inc_val) <= TOL and inc_b is not None and tuple(b) < tuple(inc_b)


def solve_master(cuts, m: int, eta_floor: float = ETA_FLOOR, incumbent=None,
                 enum_free: int = ENUM_FREE) -> MasterSolution:
    """Globally optimal binary b for the cut set.

    Ties within 1e-9 are broken towards the lexicographically smallest b.
    ``incumbent`` is an optional binary hint used only to seed pruning.
    Nodes with at most ``enum_free`` free bits are solved by enumeration
    (0 disables this and branches down to the leaves).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    a_opt, c_opt, a_feas, c_feas = _split(cuts, m)
    inc_val, inc_b = np.inf, None
    if incumbent is not None:
        hint = np.asarray(incumbent, dtype=float)
        val = _evaluate(hint, a_opt, c_opt, a_feas, c_feas, eta_floor)
        if np.isfinite(val):
            inc_val, inc_b = val, hint.astype(np.int64)

    lo0, hi0 = np.zeros(m), np.ones(m)
    if m <= enum_free:
        bound, x = eta_floor, lo0
    else:
        try:
            bound, x = _lp(m, a_opt, c_opt, a_feas, c_feas, eta_floor, lo0, hi0)
        except MasterInfeasible:
            raise MasterInfeasible("master problem has no feasible binary point") from None
    heap = [(bound, 0, lo0, hi0, x)]
    counter = 1
    nodes = 0
    while heap:
        bound, _, lo, hi, x = heapq.heappop(heap)
        if bound > inc_val + TOL:
            break
        if inc_b is not None and bound >= inc_val - TOL and not _may_hold_smaller(lo, inc_b):
            continue
        nodes += 1
        free = lo != hi
        if 0 < free.sum() <= enum_free:
            val, cand = _enumerate_node(lo, free, a_opt, c_opt, a_feas, c_feas, eta_floor)
            if cand is not None and (inc_b is None or _better(val, cand, inc_val, inc_b)):
                inc_val, inc_b = val, cand.astype(np.int64)
            continue
        frac = np.where(free, np.minimum(x, 1.0 - x), -1.0)
        if frac.max() <= TOL:
            # integral relaxation: the LP value is attained at the rounded point
            cand = np.where(free, np.round(x), lo)
            val = _evaluate(cand, a_opt, c_opt, a_feas, c_feas, eta_floor)
            if np.isfinite(val) and (inc_b is None or _better(val, cand, inc_val, inc_b)):
                inc_val, inc_b = val, cand.astype(np.int64)
            if not free.any() or not _may_hold_smaller(lo, inc_b):
                continue
            j = int(np.flatnonzero(free)[0])
        else:
            j = int(np.argmax(frac))
        for v in (0.0, 1.0):
            clo, chi = lo.copy(), hi.copy()
            clo[j] = chi[j] = v
            try:
                if 0 < np.sum(clo != chi) <= enum_free:
                    cb, cx = bound, x
                elif np.all(clo == chi):
                    cb = _evaluate(clo, a_opt, c_opt, a_feas, c_feas, eta_floor)
                    if not np.isfinite(cb):
                        continue
                    cx = clo
                else:
                    cb, cx = _lp(m, a_opt, c_opt, a_feas, c_feas, eta_floor, clo, chi)
            except MasterInfeasible:
                continue
            if cb > inc_val + TOL:
                continue
            heapq.heappush(heap, (cb, counter, clo, chi, cx))
            counter += 1
    if inc_b is None:
        raise MasterInfeasible("master problem has no feasible binary point")
    return MasterSolution(pins=inc_b, eta=float(inc_val), nodes=nodes)


def _may_hold_smaller(lo, ref) -> bool:
    """Whether the box [lo, hi] contains a binary point lexicographically below ref (lower bounds fix the ones)."""
    for l, r in zip(lo, ref):
        if l < r:
            return True
        if l > r:
            return False
    return False
