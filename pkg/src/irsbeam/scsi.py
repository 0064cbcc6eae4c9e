"""Statistical-CSI beamforming for a single user.

Offline: the IRS/BS power split depends only on (P0, P_PIN, M) through the
angle t*, the root of (2*pi*P0/(P_PIN*M) - pi + 2t) * tan(t) = 1.
Online: diodes follow the sign pattern of the LoS cascade vector h_o and the
BS applies MRT with whatever budget the diodes leave.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelGeometry, ula_response
from .model import SystemConfig, make_solution, phase_matrix, pin_vector

BISECTION_CAP = 200
FLOOR_EPS = 1e-9


@dataclass(frozen=True)
class ScsiDesign:
    t_star: float
    tau: float
    m_on_budget: int
    m_positive: int
    m_on_actual: int
    p_irs_ps: float
    p_bs_t: float
    alpha_g: float
    alpha_h: float


def _residual(t, c):
    return np.tan(t) * (c + 2.0 * t) - 1.0


def solve_t_star(p0: float, p_pin: float, m: int) -> float:
    """Unique root of the stationarity condition of the SNR in t."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if p0 <= 0:
        raise ValueError("p0 must be positive")
    if p_pin == 0:
        return 0.0
    c = 2.0 * np.pi * p0 / (p_pin * m) - np.pi
    lo = max(0.0, -c / 2.0)
    hi = np.pi / 2
    for _ in range(BISECTION_CAP):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _residual(mid, c) < 0:
            lo = mid
        else:
            hi = mid
    # both ends are within an ulp; keep the one with the smaller residual
    return lo if abs(_residual(lo, c)) <= abs(_residual(hi, c)) else hi


def t_star_residual(t, p0, p_pin, m) -> float:
    """|(2*pi*P0/(P_PIN*M) - pi + 2t)^-1 - tan t|."""
    return abs(1.0 / (2.0 * np.pi * p0 / (p_pin * m) - np.pi + 2.0 * t) - np.tan(t))


def build_h_o(aod_user, aoa_irs, m_x: int, m_y: int) -> np.ndarray:
    """LoS cascade vector; every entry has modulus 1/M."""
    elev_u, azim_u = aod_user
    elev_r, azim_r = aoa_irs
    th = -np.sin(elev_u) * np.sin(azim_u) + np.sin(elev_r) * np.sin(azim_r)
    ph = -np.sin(elev_u) * np.cos(azim_u) + np.sin(elev_r) * np.cos(azim_r)
    return np.kron(ula_response(m_x, th), ula_response(m_y, ph)) / np.sqrt(m_x * m_y)


def select_phases(h_o, m_on_budget: int) -> np.ndarray:
    """Turn on the diodes with the largest positive Re(h_o), at most the budget."""
    if m_on_budget < 0:
        raise ValueError("m_on_budget must be >= 0")
    re = np.real(h_o)
    n_on = min(int(np.sum(re > 0)), int(m_on_budget))
    order = np.argsort(-re, kind="stable")
    b = np.zeros(len(re), dtype=np.int64)
    b[order[:n_on]] = 1
    return b


def bs_beamformer(g_mat, h_vec, pins, p_bs_t: float) -> np.ndarray:
    """MRT on the reflected channel h^H Phi G, scaled to power p_bs_t."""
    direction = g_mat.conj().T @ (phase_matrix(pins) * h_vec)
    norm = np.linalg.norm(direction)
    if p_bs_t <= 0 or norm == 0.0:
        return np.zeros(g_mat.shape[1], dtype=complex)
    return np.sqrt(p_bs_t) * direction / norm


def path_gain(kappa, pathloss) -> float:
    if np.isinf(kappa):
        return float(np.sqrt(pathloss))
    return float(np.sqrt(kappa * pathloss / (1.0 + kappa)))


def predicted_snr(t, cfg: SystemConfig, alpha_g, alpha_h, m=None, n=None) -> float:
    """LoS-model SNR as a function of the split angle t."""
    m = cfg.m if m is None else m
    n = cfg.n_bs_antennas if n is None else n
    p_bs = cfg.p0 - cfg.p_pin * m / 2 + cfg.p_pin * m * t / np.pi
    scale = 4.0 * abs(alpha_g * alpha_h) ** 2 * m ** 2 * n / (np.pi ** 2 * cfg.noise_power)
    return float(scale * p_bs * np.cos(t) ** 2)


def irs_power_plan(t, p_pin, m) -> float:
    return p_pin * (m / 2 - m * t / np.pi)


def design(cfg: SystemConfig, geom: ChannelGeometry, k: int = 0) -> tuple[ScsiDesign, np.ndarray]:
    """Power split and diode pattern from statistics only; returns (design, pins)."""
    m = cfg.m
    t = solve_t_star(cfg.p0, cfg.p_pin, m)
    if cfg.p_pin > 0:
        p_plan = max(0.0, irs_power_plan(t, cfg.p_pin, m))
        m_on = int(np.floor(p_plan / cfg.p_pin + FLOOR_EPS))
        while m_on > 0 and cfg.p_pin * m_on > cfg.p0:
            m_on -= 1
    else:
        m_on = m
    h_o = build_h_o((geom.aod_user_elev[k], geom.aod_user_azim[k]),
                    (geom.aoa_irs_elev, geom.aoa_irs_azim), cfg.irs_x, cfg.irs_y)
    pins = select_phases(h_o, m_on)
    m_p = int(np.sum(np.real(h_o) > 0))
    p_irs = cfg.p_pin * int(pins.sum())
    d = ScsiDesign(
        t_star=t,
        tau=np.sin(t) / m,
        m_on_budget=m_on,
        m_positive=m_p,
        m_on_actual=int(pins.sum()),
        p_irs_ps=p_irs,
        p_bs_t=max(0.0, cfg.p0 - p_irs),
        alpha_g=path_gain(geom.rician_g, geom.pathloss_g),
        alpha_h=path_gain(geom.rician_h[k], geom.pathloss_h(k)),
    )
    return d, pins


def run_scsi(channels, geom: ChannelGeometry, cfg: SystemConfig):
    if cfg.n_users != 1:
        raise ValueError("S-CSI beamforming is single-user")
    d, pins = design(cfg, geom)
    f = bs_beamformer(channels.g_mat, channels.h_vecs[0], pin_vector(pins, cfg.m), d.p_bs_t)
    return make_solution(channels, f[:, None], pins, cfg, iterations=1, converged=True)
