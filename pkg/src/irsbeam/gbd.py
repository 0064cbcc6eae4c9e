"""Single-user joint beamforming by generalized Benders decomposition.

The continuous subproblem (precoder f for fixed diode states b) has a closed
form; the master problem over b is the MILP in :mod:`irsbeam.milp`.

Everything internal works on the noise-normalized cascaded channel H_c / sigma,
so the primal value is -sqrt(SNR) and the convergence tolerance is
dimensionless.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization
from .milp import CutKind, LinearCut, solve_master
from .model import Solution, SystemConfig, make_solution, phase_matrix, pin_vector

ITERATION_CAP = 200


class PrimalInfeasible(Exception):
    """The diodes alone exceed the power budget."""


@dataclass
class GbdState:
    upper_bound: float = np.inf
    lower_bound: float = -np.inf
    cut_pool: list = field(default_factory=list)
    iter: int = 0
    best_f: np.ndarray | None = None
    best_b: np.ndarray | None = None
    upper_history: list = field(default_factory=list)
    lower_history: list = field(default_factory=list)
    visited: list = field(default_factory=list)

    @property
    def gap(self) -> float:
        return self.upper_bound - self.lower_bound


def value_function(pins, cascaded, p0, p_pin) -> float:
    """Optimal primal value -sqrt(P_rem)*||H_c^H (2b-1)|| (inf when infeasible)."""
    b = pin_vector(pins)
    p_rem = p0 - p_pin * b.sum()
    if p_rem < 0:
        return np.inf
    return -np.sqrt(p_rem) * np.linalg.norm(cascaded.conj().T @ phase_matrix(b))


def solve_primal(pins, cascaded, p0, p_pin):
    """Closed-form primal solution and multipliers: (f, value, xi, mu)."""
    b = pin_vector(pins, cascaded.shape[0])
    p_rem = p0 - p_pin * b.sum()
    if p_rem < 0:
        raise PrimalInfeasible(f"diodes need {p_pin * b.sum():.6g} W > budget {p0:.6g} W")
    c = cascaded.conj().T @ phase_matrix(b)
    nc = np.linalg.norm(c)
    n = cascaded.shape[1]
    if nc == 0.0 or p_rem == 0.0:
        return np.zeros(n, dtype=complex), 0.0, 0.0, 0.0
    sp = np.sqrt(p_rem)
    return sp * c / nc, -sp * nc, nc / (2.0 * sp), 0.0


def solve_feasibility(pins, p0, p_pin):
    """Budget violation of the zero precoder and the (fixed) multipliers."""
    b = pin_vector(pins)
    return max(0.0, p_pin * b.sum() - p0), 1.0, 0.0


def feasibility_cut(m, p0, p_pin, xi_bar=1.0) -> LinearCut:
    return LinearCut(np.full(m, xi_bar * p_pin), -xi_bar * p0, CutKind.FEASIBILITY)


def optimality_cut(f, xi, mu, cascaded, p0, p_pin) -> LinearCut:
    """Lagrangian at fixed (f, xi, mu), written as an affine function of b."""
    u = cascaded @ np.asarray(f, dtype=complex)
    coeffs = -2.0 * u.real + xi * p_pin - 2.0 * mu * u.imag
    const = u.real.sum() + xi * (np.real(np.vdot(f, f)) - p0) + mu * u.imag.sum()
    return LinearCut(coeffs, float(const))


def hamming_terms(pins):
    """Affine form (coeffs, const) of the Hamming distance to ``pins``."""
    b = pin_vector(pins)
    return 1.0 - 2.0 * b, float(b.sum())


def _quad_weights(gram, s):
    lam = np.linalg.eigvalsh(gram)[-1]
    signed = gram * np.outer(s, s)
    off = np.clip(signed - np.diag(np.diag(signed)), 0.0, None)
    return [np.full(len(s), lam), np.diag(signed) + off.sum(axis=1)]


def proximity_cuts(pins, f, xi, cascaded, p0, p_pin, gram=None):
    """Lagrangian cuts made valid for every binary point.

    The plain linearization is tight at ``pins`` but can overshoot the value
    function at distant points because ||H_c^H s||^2 is convex in s.  Each
    cut subtracts (2/t) * sum_m w_m d_m(b), where d is the Hamming indicator
    and w bounds the curvature of that quadratic; t = ||c|| / sqrt(P_rem).
    """
    b = pin_vector(pins)
    base = optimality_cut(f, xi, 0.0, cascaded, p0, p_pin)
    t = 2.0 * xi
    if gram is None:
        gram = np.real(cascaded @ cascaded.conj().T)
    h_coef, _ = hamming_terms(b)
    cuts = []
    for w in _quad_weights(gram, phase_matrix(b)):
        cuts.append(LinearCut(base.coeffs - (2.0 / t) * w * h_coef,
                              base.constant - (2.0 / t) * float(np.dot(w, b))))
    return cuts


def global_lower_bound(cascaded, p0) -> float:
    gram = np.real(cascaded @ cascaded.conj().T)
    lam = max(float(np.linalg.eigvalsh(gram)[-1]), 0.0)
    return -np.sqrt(p0) * np.sqrt(lam * cascaded.shape[0])


def no_good_cut(pins, value, floor) -> LinearCut:
    """eta >= value at ``pins`` and >= a global floor elsewhere."""
    h_coef, h_const = hamming_terms(pins)
    return LinearCut((floor - value) * h_coef, value + (floor - value) * h_const)


def solve_gbd(cascaded, cfg: SystemConfig, init_pins=None, tol=None,
              max_iter=ITERATION_CAP):
    """Run the decomposition and return (Solution, GbdState)."""
    hc = np.asarray(cascaded, dtype=complex)
    m = hc.shape[0]
    if hc.ndim != 2 or m != cfg.m or hc.shape[1] != cfg.n_bs_antennas:
        raise ValueError("cascaded channel must be M x N")
    tol = cfg.convergence_tol if tol is None else float(tol)
    p0, p_pin = cfg.p0, cfg.p_pin
    hn = hc / np.sqrt(cfg.noise_power)
    gram = np.real(hn @ hn.conj().T)
    floor = global_lower_bound(hn, p0)

    b = np.zeros(m, dtype=np.int64) if init_pins is None else pin_vector(init_pins, m)
    state = GbdState()
    converged = False
    while state.iter < max_iter:
        state.iter += 1
        state.visited.append(b.copy())
        try:
            f, val, xi, mu = solve_primal(b, hn, p0, p_pin)
        except PrimalInfeasible:
            if not any(c.kind is CutKind.FEASIBILITY for c in state.cut_pool):
                state.cut_pool.append(feasibility_cut(m, p0, p_pin))
        else:
            if val < state.upper_bound:
                state.upper_bound, state.best_f, state.best_b = val, f, b.copy()
            if xi > 0.0:
                state.cut_pool.extend(proximity_cuts(b, f, xi, hn, p0, p_pin, gram))
            else:
                state.cut_pool.append(no_good_cut(b, val, floor))
        master = solve_master(state.cut_pool, m, eta_floor=floor, incumbent=state.best_b)
        state.lower_bound = max(state.lower_bound, master.eta)
        state.upper_history.append(state.upper_bound)
        state.lower_history.append(state.lower_bound)
        b = master.pins
        if state.gap <= tol:
            converged = True
            break

    channels = ChannelRealization(hc, np.ones((1, m), dtype=complex))
    sol = make_solution(channels, state.best_f[:, None], state.best_b, cfg,
                        state.iter, converged, history=list(state.upper_history))
    return sol, state


def run_gbd(cascaded, cfg: SystemConfig, init_pins=None, tol=None) -> Solution:
    """Best feasible (f, b); flagged unconverged if the iteration cap is hit."""
    return solve_gbd(cascaded, cfg, init_pins, tol)[0]
