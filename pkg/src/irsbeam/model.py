"""Shared system quantities: configuration, 1-bit phase matrix, power accounting and rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


def dbm_to_watts(p_dbm):
    return 1e-3 * 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0)


def watts_to_dbm(p_w):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(p_w, dtype=float) / 1e-3)


@dataclass(frozen=True)
class SystemConfig:
    """System dimensions and power constants.

    ``p0`` is the effective budget shared by BS transmit power and the PIN
    diodes; the static terms only matter when converting from a total budget
    (see :meth:`effective_budget`).
    """

    n_bs_antennas: int = 5
    irs_x: int = 10
    irs_y: int = 10
    n_users: int = 1
    p_pin: float = 12e-3
    noise_power: float = 1e-14
    p0: float = 1.0
    p_bs_circuits: float = 0.0
    p_bs_rf_per_chain: float = 0.0
    p_irs_static: float = 0.0
    wavelength: float = 0.07
    convergence_tol: float = 0.005

    def __post_init__(self):
        for name in ("n_bs_antennas", "irs_x", "irs_y", "n_users"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("p_pin", "noise_power", "p0", "p_bs_circuits",
                     "p_bs_rf_per_chain", "p_irs_static", "wavelength"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be a finite non-negative number")
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be positive")

    @property
    def m(self) -> int:
        return self.irs_x * self.irs_y

    @property
    def p0_dbm(self) -> float:
        return float(watts_to_dbm(self.p0))

    def with_p0_dbm(self, p0_dbm: float) -> "SystemConfig":
        return replace(self, p0=float(dbm_to_watts(p0_dbm)))

    def effective_budget(self, p_total: float) -> float:
        """Total system power minus the beamforming-independent terms."""
        return (p_total - self.p_bs_circuits
                - self.n_bs_antennas * self.p_bs_rf_per_chain - self.p_irs_static)


def pin_vector(bits, m: int | None = None) -> np.ndarray:
    """Validate a PIN diode state vector and return it as an int array."""
    b = np.asarray(bits)
    if b.ndim != 1:
        raise ValueError("pin vector must be one-dimensional")
    if m is not None and b.size != m:
        raise ValueError(f"pin vector has length {b.size}, expected {m}")
    if not np.all((b == 0) | (b == 1)):
        raise ValueError("pin vector entries must be 0 or 1")
    return b.astype(np.int64)


def phase_matrix(pins) -> np.ndarray:
    """Diagonal of the 1-bit reflection matrix: +1 for an on diode, -1 for off."""
    b = pin_vector(pins)
    return 2.0 * b - 1.0


def ps_dpc(pins, p_pin: float) -> float:
    return float(p_pin) * int(np.sum(pins))


@dataclass(frozen=True)
class PowerBreakdown:
    p_bs_transmit: float
    p_irs_ps: float

    @property
    def p_total_effective(self) -> float:
        return self.p_bs_transmit + self.p_irs_ps


@dataclass
class Solution:
    precoder: np.ndarray
    pins: np.ndarray
    rate_per_user: np.ndarray
    sum_rate: float
    power: PowerBreakdown
    iterations: int
    converged: bool
    infeasible: bool = False
    history: list = field(default_factory=list)

    @property
    def n_on(self) -> int:
        return int(np.sum(self.pins))


def _as_precoder(precoder, n_users: int | None = None) -> np.ndarray:
    f = np.asarray(precoder, dtype=complex)
    if f.ndim == 1:
        f = f[:, None]
    if n_users is not None and f.shape[1] != n_users:
        raise ValueError(f"precoder has {f.shape[1]} columns, expected {n_users}")
    return f


def system_power(precoder, pins, cfg: SystemConfig) -> PowerBreakdown:
    f = _as_precoder(precoder)
    if f.shape[0] != cfg.n_bs_antennas:
        raise ValueError("precoder row count does not match n_bs_antennas")
    b = pin_vector(pins, cfg.m)
    return PowerBreakdown(float(np.real(np.vdot(f, f))), ps_dpc(b, cfg.p_pin))


def effective_channels(channels, pins) -> np.ndarray:
    """K x N matrix whose row k is h_k^H (2B - I) G."""
    s = phase_matrix(pins)
    return (np.conj(channels.h_vecs) * s) @ channels.g_mat


def _received(channels, precoder, pins) -> np.ndarray:
    # entry (k, j): signal of stream j seen by user k
    return effective_channels(channels, pins) @ _as_precoder(precoder)


def user_rate(channels, precoder, pins, k: int, cfg: SystemConfig):
    """Rate of user ``k`` in bits/s/Hz and its interference-plus-noise power."""
    if not 0 <= k < cfg.n_users:
        raise IndexError("user index out of range")
    pw = np.abs(_received(channels, precoder, pins)[k]) ** 2
    gamma = float(pw.sum() - pw[k] + cfg.noise_power)
    return float(np.log2(1.0 + pw[k] / gamma)), gamma


def rates(channels, precoder, pins, cfg: SystemConfig) -> np.ndarray:
    """Per-user rates (bits/s/Hz), vectorised over users."""
    pw = np.abs(_received(channels, precoder, pins)) ** 2
    signal = np.diag(pw)
    gamma = pw.sum(axis=1) - signal + cfg.noise_power
    return np.log2(1.0 + signal / gamma)


def sum_rate(channels, precoder, pins, cfg: SystemConfig) -> float:
    return float(np.sum(rates(channels, precoder, pins, cfg)))


def make_solution(channels, precoder, pins, cfg, iterations, converged,
                  history=None) -> Solution:
    f = _as_precoder(precoder, cfg.n_users)
    b = pin_vector(pins, cfg.m)
    r = rates(channels, f, b, cfg)
    return Solution(
        precoder=f,
        pins=b,
        rate_per_user=r,
        sum_rate=float(r.sum()),
        power=system_power(f, b, cfg),
        iterations=int(iterations),
        converged=bool(converged),
        history=list(history or []),
    )
