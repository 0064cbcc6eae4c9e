"""Rician BS-IRS and IRS-user channels with ULA/UPA array responses.

All randomness comes from counter-based Philox streams keyed by
``(seed, realization, stream)`` so that realizations are reproducible and
independent of the order in which they are generated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SystemConfig

PATHLOSS_COEFF = 1e-4
PATHLOSS_EXP = 2.2
D_BS_IRS = 20.0
D_USER_RANGE = (50.0, 70.0)
KAPPA = 8.0


@dataclass(frozen=True)
class ChannelGeometry:
    d_bs_irs: float
    d_irs_user: np.ndarray
    aod_bs: float
    aoa_irs_elev: float
    aoa_irs_azim: float
    aod_user_elev: np.ndarray
    aod_user_azim: np.ndarray
    rician_g: float = KAPPA
    rician_h: np.ndarray | float = KAPPA
    pathloss_coeff: float = PATHLOSS_COEFF
    pathloss_exp: float = PATHLOSS_EXP

    def __post_init__(self):
        k = len(self.d_irs_user)
        object.__setattr__(self, "d_irs_user", np.asarray(self.d_irs_user, dtype=float))
        object.__setattr__(self, "aod_user_elev", np.asarray(self.aod_user_elev, dtype=float))
        object.__setattr__(self, "aod_user_azim", np.asarray(self.aod_user_azim, dtype=float))
        object.__setattr__(self, "rician_h", np.broadcast_to(
            np.asarray(self.rician_h, dtype=float), (k,)).copy())
        if self.d_bs_irs <= 0 or np.any(self.d_irs_user <= 0):
            raise ValueError("distances must be positive")
        if self.rician_g < 0 or np.any(self.rician_h < 0):
            raise ValueError("Rician factors must be non-negative")
        if not (len(self.aod_user_elev) == len(self.aod_user_azim) == k):
            raise ValueError("per-user geometry fields must have equal length")

    @property
    def n_users(self) -> int:
        return len(self.d_irs_user)

    @property
    def pathloss_g(self) -> float:
        return self.pathloss_coeff * self.d_bs_irs ** (-self.pathloss_exp)

    def pathloss_h(self, k: int) -> float:
        return self.pathloss_coeff * self.d_irs_user[k] ** (-self.pathloss_exp)


@dataclass(frozen=True)
class ChannelRealization:
    g_mat: np.ndarray     # M x N
    h_vecs: np.ndarray    # K x M, row k is h_k (the user sees h_k^H)

    @property
    def cascaded(self) -> np.ndarray:
        """K x M x N stack of diag(h_k^H) G."""
        return np.conj(self.h_vecs)[:, :, None] * self.g_mat[None, :, :]

    def user(self, k: int) -> "ChannelRealization":
        return ChannelRealization(self.g_mat, self.h_vecs[k:k + 1])


def ula_response(n: int, x: float) -> np.ndarray:
    if n < 1:
        raise ValueError("array size must be >= 1")
    return np.exp(1j * np.pi * x * np.arange(n)) / np.sqrt(n)


def upa_response(m_x: int, m_y: int, elev: float, azim: float) -> np.ndarray:
    u = -np.sin(elev)
    return np.kron(ula_response(m_x, u * np.sin(azim)), ula_response(m_y, u * np.cos(azim)))


def _cn(rng, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _rician_weights(kappa: float) -> tuple[float, float]:
    if np.isinf(kappa):
        return 1.0, 0.0
    return np.sqrt(kappa / (1.0 + kappa)), np.sqrt(1.0 / (1.0 + kappa))


def gen_bs_irs(geom: ChannelGeometry, cfg: SystemConfig, rng) -> np.ndarray:
    m, n = cfg.m, cfg.n_bs_antennas
    pl = geom.pathloss_g
    a_irs = upa_response(cfg.irs_x, cfg.irs_y, geom.aoa_irs_elev, geom.aoa_irs_azim)
    a_bs = ula_response(n, np.cos(geom.aod_bs))
    los = np.sqrt(pl * m * n) * np.outer(a_irs, np.conj(a_bs))
    w_los, w_nlos = _rician_weights(geom.rician_g)
    nlos = np.sqrt(pl) * _cn(rng, (m, n))
    if w_nlos == 0.0:
        return los
    return w_los * los + w_nlos * nlos


def gen_irs_user(geom: ChannelGeometry, cfg: SystemConfig, k: int, rng) -> np.ndarray:
    """Vector h_k; the user's row channel is its conjugate transpose."""
    m = cfg.m
    pl = geom.pathloss_h(k)
    a = upa_response(cfg.irs_x, cfg.irs_y, geom.aod_user_elev[k], geom.aod_user_azim[k])
    los = np.sqrt(pl * m) * a
    w_los, w_nlos = _rician_weights(geom.rician_h[k])
    nlos = np.sqrt(pl) * _cn(rng, m)
    if w_nlos == 0.0:
        return los
    return w_los * los + w_nlos * nlos


def cascade(h_k: np.ndarray, g_mat: np.ndarray) -> np.ndarray:
    if h_k.shape[0] != g_mat.shape[0]:
        raise ValueError("h and G disagree on the IRS dimension")
    return np.conj(h_k)[:, None] * g_mat


def sample_geometry(cfg: SystemConfig, rng, *, d_bs_irs=D_BS_IRS, d_user_range=D_USER_RANGE,
                    kappa_g=KAPPA, kappa_h=KAPPA) -> ChannelGeometry:
    """Draw user distances and departure angles; the BS sits on the IRS normal."""
    aod_bs = rng.uniform(0.0, np.pi)
    k = cfg.n_users
    d = np.empty(k)
    elev = np.empty(k)
    azim = np.empty(k)
    # one user at a time so that adding users leaves earlier draws untouched
    for i in range(k):
        d[i] = rng.uniform(*d_user_range)
        elev[i] = rng.uniform(0.0, np.pi / 4)
        azim[i] = rng.uniform(0.0, 2 * np.pi)
    return ChannelGeometry(
        d_bs_irs=d_bs_irs,
        d_irs_user=d,
        aod_bs=aod_bs,
        aoa_irs_elev=0.0,
        aoa_irs_azim=0.0,
        aod_user_elev=elev,
        aod_user_azim=azim,
        rician_g=kappa_g,
        rician_h=kappa_h,
    )


def stream(seed: int, realization: int, tag: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(realization), int(tag)))
    return np.random.Generator(np.random.Philox(ss))


def draw(cfg: SystemConfig, seed: int, realization: int = 0, **geometry_kw):
    """Geometry and channel realization for one Monte-Carlo trial.

    Stream 0 feeds the geometry, stream 1 the BS-IRS matrix and stream 2+k
    user k's channel.
    """
    geom = sample_geometry(cfg, stream(seed, realization, 0), **geometry_kw)
    g = gen_bs_irs(geom, cfg, stream(seed, realization, 1))
    h = np.stack([gen_irs_user(geom, cfg, k, stream(seed, realization, 2 + k))
                  for k in range(cfg.n_users)])
    return geom, ChannelRealization(g, h)
