"""Reference methods: alternating optimization and PS-DPC-unaware designs."""

from __future__ import annotations

import enum
from dataclasses import replace

import numpy as np

from .gbd import run_gbd
from .jpabf import Variant, initial_state, run_jpabf, update_f_zeta, update_w_psi
from .model import (Solution, SystemConfig, effective_channels, make_solution, pin_vector,
                    sum_rate)
from .scsi import run_scsi

AO_CAP = 100


class AoInit(enum.Enum):
    RANDOM = "random"
    ZERO = "zero"


class Proposed(enum.Enum):
    GBD = "gbd-bf"
    SCSI = "s-csi-bf"
    FOPT = "jpabf-fopt"
    FSCALE = "jpabf-fscale"


def random_feasible_pins(cfg: SystemConfig, rng) -> np.ndarray:
    """Uniform on-count over the affordable range, then uniform positions."""
    m = cfg.m
    if cfg.p_pin == 0 or cfg.p0 > cfg.p_pin * m:
        return rng.integers(0, 2, m).astype(np.int64)
    n_max = min(m, int(np.floor(cfg.p0 / cfg.p_pin + 1e-9)))
    while n_max > 0 and cfg.p_pin * n_max > cfg.p0:
        n_max -= 1
    count = int(rng.integers(0, n_max + 1))
    b = np.zeros(m, dtype=np.int64)
    b[rng.choice(m, size=count, replace=False)] = 1
    return b


def _mrt(channels, pins, p_rem):
    row = effective_channels(channels, pins)[0]
    norm = np.linalg.norm(row)
    if p_rem <= 0 or norm == 0.0:
        return np.zeros((row.size, 1), dtype=complex)
    return (np.sqrt(p_rem) * row.conj() / norm)[:, None]


def _f_step(channels, pins, f, cfg):
    p_rem = cfg.p0 - cfg.p_pin * float(np.sum(pins))
    if cfg.n_users == 1:
        return _mrt(channels, pins, p_rem)
    h_e = effective_channels(channels, pins)
    norm = np.linalg.norm(f)
    zeta = float(np.sqrt(p_rem) / norm) if p_rem > 0 and norm > 0 else 0.0
    f_hat = f / norm if norm > 0 else f
    w, psi, _ = update_w_psi(h_e, zeta * f_hat, zeta, cfg.noise_power)
    f_hat, zeta = update_f_zeta(pins, h_e, w, psi, cfg)
    return zeta * f_hat


def _b_step(channels, pins, f, cfg):
    """Rate-greedy bit updates that keep Tr(F^H F) + P_PIN 1^T b <= P0."""
    b = pins.copy()
    p_bs = float(np.real(np.vdot(f, f)))
    cur = sum_rate(channels, f, b, cfg)
    for m in range(cfg.m):
        trial = b.copy()
        trial[m] = 1 - b[m]
        if p_bs + cfg.p_pin * trial.sum() > cfg.p0 + 1e-12:
            continue
        alt = sum_rate(channels, f, trial, cfg)
        r0, r1 = (cur, alt) if b[m] == 0 else (alt, cur)
        want = 0 if r0 >= r1 else 1
        if want != b[m]:
            b, cur = trial, alt
    return b


def run_ao(init, channels, cfg: SystemConfig, rng=None, tol=None, max_iter=AO_CAP) -> Solution:
    """Alternate a full-budget precoder update and a budget-respecting bit update."""
    init = AoInit(init)
    tol = cfg.convergence_tol if tol is None else float(tol)
    if init is AoInit.RANDOM:
        if rng is None:
            raise ValueError("random initialization needs an rng")
        b = random_feasible_pins(cfg, rng)
    else:
        b = np.zeros(cfg.m, dtype=np.int64)
    f_hat, zeta = initial_state(channels, cfg, b)
    f = zeta * f_hat
    history = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        f = _f_step(channels, b, f, cfg)
        b = _b_step(channels, b, f, cfg)
        history.append(sum_rate(channels, f, b, cfg))
        if len(history) > 1 and history[-1] - history[-2] <= tol:
            converged = True
            break
    # the last bit update may have freed budget; hand it back to the BS
    f = _f_step(channels, b, f, cfg)
    return make_solution(channels, f, b, cfg, it, converged, history=history)


def run_proposed(method, channels, cfg: SystemConfig, geom=None) -> Solution:
    method = Proposed(method)
    if method is Proposed.GBD:
        if cfg.n_users != 1:
            raise ValueError("GBD beamforming is single-user")
        return run_gbd(channels.cascaded[0], cfg)
    if method is Proposed.SCSI:
        if geom is None:
            raise ValueError("S-CSI beamforming needs the channel geometry")
        return run_scsi(channels, geom, cfg)
    variant = Variant.FOPT if method is Proposed.FOPT else Variant.FSCALE
    return run_jpabf(variant, channels, cfg)[0]


def run_ignore_psdpc(method, channels, cfg: SystemConfig, geom=None) -> Solution:
    """Design as if diodes were free, then charge for them.

    Infeasible when the diodes alone reach the budget; otherwise the precoder
    is scaled down to whatever the diodes leave.
    """
    sol = run_proposed(method, channels, replace(cfg, p_pin=0.0), geom)
    b = pin_vector(sol.pins, cfg.m)
    p_irs = cfg.p_pin * float(b.sum())
    f = sol.precoder
    if p_irs >= cfg.p0 and cfg.p_pin > 0:
        out = make_solution(channels, f, b, cfg, sol.iterations, sol.converged, sol.history)
        out.infeasible = True
        return out
    p_bs = float(np.real(np.vdot(f, f)))
    p_rem = cfg.p0 - p_irs
    if p_bs > p_rem and p_bs > 0:
        f = f * np.sqrt(p_rem / p_bs)
    return make_solution(channels, f, b, cfg, sol.iterations, sol.converged, sol.history)
