"""Multi-user sum-rate maximization through the WMMSE equivalence.

The precoder is written F = zeta * F_hat with zeta fixed by the full-budget
rule zeta^2 Tr(F_hat^H F_hat) = P0 - P_PIN 1^T b, so the BS always spends
whatever the diodes leave.  Two block coordinate descent schemes share the
(w, psi) and (F_hat, zeta) updates and differ in the diode step:

* ``FOpt``: each bit is chosen by the closed-form g-tilde, i.e. with F_hat
  re-optimized for every candidate b.
* ``FScale``: the previous precoder is kept and only rescaled by rho, which
  turns the per-bit score into a scalar quadratic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .model import SystemConfig, effective_channels, make_solution, phase_matrix, pin_vector

OUTER_CAP = 100
SWEEP_CAP = 10


class Variant(enum.Enum):
    FOPT = "fopt"
    FSCALE = "fscale"


@dataclass
class WmmseState:
    w: np.ndarray
    psi: np.ndarray
    zeta: float
    f_hat: np.ndarray
    mse: np.ndarray
    g_value: float


@dataclass(frozen=True)
class ScaleQuadratic:
    xi_mat: np.ndarray
    rho_vec: np.ndarray
    q: float
    r: float
    rho_max: float


@dataclass
class RunTrace:
    g: list = field(default_factory=list)
    sweeps: list = field(default_factory=list)


def remaining_power(pins, cfg: SystemConfig) -> float:
    return cfg.p0 - cfg.p_pin * float(np.sum(pins))


def update_w_psi(h_e, f, zeta, sigma2):
    """MMSE receive scalars, MSEs and weights for the actual precoder f = zeta*F_hat.

    The receiver estimates s_k as zeta^-1 w_k^* y_k.
    """
    rx = h_e @ np.asarray(f, dtype=complex)
    a = np.diag(rx).copy()
    total = np.sum(np.abs(rx) ** 2, axis=1) + sigma2
    w = zeta * a / total
    e = 1.0 - np.abs(a) ** 2 / total
    # guard the noise-free cancellation
    e = np.maximum(e, np.finfo(float).tiny)
    return w, 1.0 / e, e


def wmmse_objective(e, psi) -> float:
    """g = sum_k psi_k e_k - ln psi_k."""
    return float(np.sum(psi * e - np.log(psi)))


def _v_matrix(h_e, w, psi, p_rem, sigma2):
    x = h_e.conj().T * w           # H_e^H W
    tr = float(np.sum(psi * np.abs(w) ** 2))
    return (sigma2 / p_rem) * tr * np.eye(h_e.shape[1]) + (x * psi) @ x.conj().T, x


def update_f_zeta(pins, h_e, w, psi, cfg: SystemConfig):
    """KKT-optimal (F_hat, zeta) for fixed (b, w, psi); F = 0 when no power is left."""
    p_rem = remaining_power(pins, cfg)
    n, k = h_e.shape[1], h_e.shape[0]
    if p_rem <= 0:
        return np.zeros((n, k), dtype=complex), 0.0
    if not np.any(np.abs(w) > 0):
        # degenerate receivers (e.g. after a zero precoder): restart from MRT
        f_hat = h_e.conj().T.copy()
    else:
        v, x = _v_matrix(h_e, w, psi, p_rem, cfg.noise_power)
        f_hat = np.linalg.solve(v, x * psi)
    norm = np.linalg.norm(f_hat)
    if norm == 0.0:
        return f_hat, 0.0
    return f_hat, float(np.sqrt(p_rem) / norm)


def _g_tilde(h_e, w, psi, p_rem, sigma2) -> float:
    if p_rem < 0:
        return np.inf
    tr = float(np.sum(psi * np.abs(w) ** 2))
    if p_rem == 0 or tr == 0.0:
        return float(np.sum(psi))
    u = h_e.conj().T * w           # H_e^H W
    mat = np.diag(1.0 / psi) + (p_rem / (sigma2 * tr)) * (u.conj().T @ u)
    return float(np.real(np.trace(np.linalg.inv(mat))))


def g_tilde(pins, w, psi, channels, cfg: SystemConfig) -> float:
    """sum_k psi_k e_k after optimizing (zeta, F_hat) for this b, in closed form.

    Infeasible b (diodes alone over budget) score +inf.
    """
    h_e = effective_channels(channels, pins)
    return _g_tilde(h_e, w, psi, remaining_power(pins, cfg), cfg.noise_power)


def g_bar(f_hat, pins, w, psi, channels, cfg: SystemConfig) -> float:
    """sum_k psi_k e_k with zeta from the full-budget rule (the -ln psi terms omitted)."""
    h_e = effective_channels(channels, pins)
    p_rem = remaining_power(pins, cfg)
    rx = h_e @ f_hat
    noise = cfg.noise_power * np.real(np.vdot(f_hat, f_hat)) / p_rem
    e = (np.abs(w) ** 2 * (np.sum(np.abs(rx) ** 2, axis=1) + noise)
         - 2.0 * np.real(np.conj(w) * np.diag(rx)) + 1.0)
    return float(np.sum(psi * e))


def _flip_delta(channels, m, s_m):
    # change of H_e when s_m -> -s_m
    return -2.0 * s_m * np.conj(channels.h_vecs[:, m])[:, None] * channels.g_mat[m][None, :]


def cd_b_fopt(pins, w, psi, channels, cfg: SystemConfig, max_sweeps=SWEEP_CAP):
    """Coordinate descent on g-tilde; returns (pins, sweeps)."""
    b = pin_vector(pins, cfg.m).copy()
    s = phase_matrix(b)
    h_e = effective_channels(channels, b)
    n_on = int(b.sum())
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        changed = False
        for m in range(cfg.m):
            cur = _g_tilde(h_e, w, psi, cfg.p0 - cfg.p_pin * n_on, cfg.noise_power)
            h_flip = h_e + _flip_delta(channels, m, s[m])
            n_flip = n_on + (1 if b[m] == 0 else -1)
            alt = _g_tilde(h_flip, w, psi, cfg.p0 - cfg.p_pin * n_flip, cfg.noise_power)
            g0, g1 = (cur, alt) if b[m] == 0 else (alt, cur)
            want = 0 if g0 <= g1 else 1
            if want != b[m]:
                b[m], s[m], h_e, n_on = want, -s[m], h_flip, n_flip
                changed = True
        if not changed:
            break
    return b, sweeps


def build_scale_quadratic(pins, w, psi, f_hat_prev, zeta_prev, channels,
                          cfg: SystemConfig) -> ScaleQuadratic:
    """Quadratic model g-hat(rho, b) = rho^2 s^T Xi s - 2 rho Re(rho_vec^H s)."""
    h = channels.h_vecs                       # K x M
    gf = channels.g_mat @ f_hat_prev          # M x K, column k is G f_hat_k
    x = (np.conj(h).T * (psi * np.abs(w) ** 2)) @ h   # sum_k psi|w|^2 conj(h_k) h_k^T
    y = gf @ gf.conj().T
    xi = x * y
    rho_vec = np.sum((psi * w)[None, :] * h.T * np.conj(gf), axis=1)
    s = phase_matrix(pins)
    q = float(np.real(s @ xi @ s))
    r = float(np.real(np.vdot(rho_vec, s)))
    return ScaleQuadratic(xi, rho_vec, q, r, _rho_max(remaining_power(pins, cfg), zeta_prev, f_hat_prev))


def _rho_max(p_rem, zeta_prev, f_hat_prev) -> float:
    used = zeta_prev ** 2 * float(np.real(np.vdot(f_hat_prev, f_hat_prev)))
    if used <= 0.0:
        return 0.0
    return float(np.sqrt(max(0.0, p_rem) / used))


def optimal_rho(q, r, rho_max) -> float:
    """argmin of q rho^2 - 2 r rho over [0, rho_max]."""
    if q > 0:
        return float(min(max(r / q, 0.0), rho_max))
    return float(rho_max) if r > 0 else 0.0


def scale_objective(q, r, rho) -> float:
    return q * rho * rho - 2.0 * r * rho


def _best_scaled(q, r, p_rem, zeta_prev, f_hat_prev):
    if p_rem < 0:
        return np.inf, 0.0
    rho = optimal_rho(q, r, _rho_max(p_rem, zeta_prev, f_hat_prev))
    return scale_objective(q, r, rho), rho


def cd_b_fscale(pins, w, psi, f_hat_prev, zeta_prev, channels, cfg: SystemConfig,
                max_sweeps=SWEEP_CAP):
    """Coordinate descent on g-hat with rho re-optimized per candidate.

    Returns (pins, rho, sweeps).
    """
    b = pin_vector(pins, cfg.m).copy()
    quad = build_scale_quadratic(b, w, psi, f_hat_prev, zeta_prev, channels, cfg)
    xi, rv = quad.xi_mat, quad.rho_vec
    s = phase_matrix(b)
    xs = xi @ s
    q, r = quad.q, quad.r
    n_on = int(b.sum())
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        changed = False
        for m in range(cfg.m):
            q_f = q - 4.0 * s[m] * np.real(xs[m]) + 4.0 * np.real(xi[m, m])
            r_f = r - 2.0 * s[m] * np.real(rv[m])
            n_f = n_on + (1 if b[m] == 0 else -1)
            cur, _ = _best_scaled(q, r, cfg.p0 - cfg.p_pin * n_on, zeta_prev, f_hat_prev)
            alt, _ = _best_scaled(q_f, r_f, cfg.p0 - cfg.p_pin * n_f, zeta_prev, f_hat_prev)
            g0, g1 = (cur, alt) if b[m] == 0 else (alt, cur)
            want = 0 if g0 <= g1 else 1
            if want != b[m]:
                xs = xs - 2.0 * s[m] * xi[:, m]
                b[m], s[m], q, r, n_on = want, -s[m], q_f, r_f, n_f
                changed = True
        if not changed:
            break
    _, rho = _best_scaled(q, r, cfg.p0 - cfg.p_pin * n_on, zeta_prev, f_hat_prev)
    return b, rho, sweeps


def initial_state(channels, cfg: SystemConfig, pins):
    """Matched filter on the effective channel with the full-budget zeta."""
    h_e = effective_channels(channels, pins)
    f_hat = h_e.conj().T.copy()
    p_rem = remaining_power(pins, cfg)
    norm = np.linalg.norm(f_hat)
    zeta = float(np.sqrt(p_rem) / norm) if p_rem > 0 and norm > 0 else 0.0
    return f_hat, zeta


def run_jpabf(variant, channels, cfg: SystemConfig, init_pins=None, tol=None,
              max_iter=OUTER_CAP):
    """Alternate (w, psi) -> b -> (F_hat, zeta) until g stalls within tol."""
    variant = Variant(variant)
    tol = cfg.convergence_tol if tol is None else float(tol)
    b = np.zeros(cfg.m, dtype=np.int64) if init_pins is None else pin_vector(init_pins, cfg.m)
    if remaining_power(b, cfg) < 0:
        raise ValueError("initial diode pattern exceeds the power budget")
    f_hat, zeta = initial_state(channels, cfg, b)
    trace = RunTrace()
    g_prev = np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        h_e = effective_channels(channels, b)
        w, psi, e = update_w_psi(h_e, zeta * f_hat, zeta, cfg.noise_power)
        g = wmmse_objective(e, psi)
        trace.g.append(g)
        if variant is Variant.FOPT:
            b, sweeps = cd_b_fopt(b, w, psi, channels, cfg)
        else:
            b, _, sweeps = cd_b_fscale(b, w, psi, f_hat, zeta, channels, cfg)
        trace.sweeps.append(sweeps)
        f_hat, zeta = update_f_zeta(b, effective_channels(channels, b), w, psi, cfg)
        if g_prev - g <= tol:
            converged = True
            break
        g_prev = g
    sol = make_solution(channels, zeta * f_hat, b, cfg, it, converged, history=trace.g)
    return sol, trace


def jpabf_solution(variant, channels, cfg: SystemConfig, init_pins=None):
    return run_jpabf(variant, channels, cfg, init_pins)[0]
