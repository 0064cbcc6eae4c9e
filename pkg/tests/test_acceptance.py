"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (also collected into the terminal
summary) and then asserts, so a failing criterion fails the run.
"""

import time

import numpy as np
import pytest

import conftest
from irsbeam.channel import draw
from irsbeam.gbd import solve_gbd, value_function
from irsbeam.harness import ExperimentSpec, rows_to_csv, run_experiment, summarize
from irsbeam.jpabf import g_bar, g_tilde, run_jpabf, update_f_zeta, update_w_psi
from irsbeam.milp import CutKind
from irsbeam.model import SystemConfig, effective_channels
from irsbeam.scsi import build_h_o, irs_power_plan, select_phases, solve_t_star, t_star_residual

from scipy import stats

P_PIN = 12e-3
SIZES = [(2, 2), (2, 3), (3, 3), (2, 5), (3, 4), (2, 6), (4, 3)]


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    conftest.ACCEPTANCE[n] = line
    print(line)
    return ok


def _brute(hc, p0, p_pin):
    pins = conftest.all_pins(hc.shape[0])
    p_rem = p0 - p_pin * pins.sum(axis=1)
    gains = np.linalg.norm((2 * pins - 1) @ hc.conj(), axis=1) ** 2
    return float(np.max(np.where(p_rem >= 0, p_rem * gains, -np.inf)))


def _instance(i, seed):
    rng = np.random.default_rng(seed + i)
    mx, my = SIZES[i % len(SIZES)]
    cfg = SystemConfig(n_bs_antennas=int(rng.integers(1, 5)), irs_x=mx, irs_y=my,
                       p0=(2, 6, 14)[i % 3] * P_PIN)
    _, ch = draw(cfg, seed, i)
    return cfg, ch


def test_gbd_optimality():
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(50):
        cfg, ch = _instance(i, 1234)
        hc = ch.cascaded[0]
        sol, _ = solve_gbd(hc, cfg)
        got = abs((2 * sol.pins - 1) @ hc @ sol.precoder[:, 0]) ** 2
        best = _brute(hc, cfg.p0, cfg.p_pin)
        worst = max(worst, abs(got - best) / best)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 120
    assert report(1, ok, f"worst relative error {worst:.2e} over 50 instances, {elapsed:.1f} s")


def test_benders_soundness():
    bad_cuts = bad_bounds = 0
    worst_gap = 0.0
    for i in range(20):
        cfg, ch = _instance(i, 777)
        if cfg.m > 10:
            cfg = SystemConfig(n_bs_antennas=cfg.n_bs_antennas, irs_x=2, irs_y=5, p0=cfg.p0)
            _, ch = draw(cfg, 777, i)
        hc = ch.cascaded[0]
        sol, state = solve_gbd(hc, cfg)
        hn = hc / np.sqrt(cfg.noise_power)
        pins = conftest.all_pins(cfg.m)
        values = np.array([value_function(p, hn, cfg.p0, cfg.p_pin) for p in pins])
        feasible = np.isfinite(values)
        for cut in state.cut_pool:
            if cut.kind is not CutKind.OPTIMALITY:
                continue
            cv = pins @ cut.coeffs + cut.constant
            scale = max(1.0, np.max(np.abs(values[feasible])))
            bad_cuts += int(np.any(cv[feasible] > values[feasible] + 1e-9 * scale))
        ub, lb = np.array(state.upper_history), np.array(state.lower_history)
        bad_bounds += int(np.any(np.diff(ub) > 1e-12) or np.any(np.diff(lb) < -1e-12)
                          or np.any(lb > ub + 1e-9) or not sol.converged)
        worst_gap = max(worst_gap, state.gap)
    ok = bad_cuts == 0 and bad_bounds == 0 and worst_gap <= 0.005
    assert report(2, ok, f"{bad_cuts} overestimating cuts, {bad_bounds} bound violations, "
                         f"worst final gap {worst_gap:.2e} (20 instances, M <= 10)")


GEOMS = [((0.61, 2.3), (0.37, 0.9)), ((0.2, 4.1), (0.8, 5.5)), ((0.75, 0.4), (1.1, 3.0))]


def test_scsi_analysis_chain():
    t0 = time.perf_counter()
    residual = max(t_star_residual(solve_t_star(1e-3 * 10 ** (d / 10), P_PIN, m),
                                   1e-3 * 10 ** (d / 10), P_PIN, m)
                   for m in (64, 100, 144) for d in np.arange(0, 40.5, 0.5))
    m = 1600
    re_err = im_mean = ks = 0.0
    for angles in GEOMS:
        h_o = build_h_o(*angles, 40, 40)
        ks = max(ks, stats.kstest(np.mod(np.angle(m * h_o), 2 * np.pi) / (2 * np.pi),
                                  "uniform").statistic)
        for mult in (400, 800, 1600):
            p0 = mult * P_PIN
            t = solve_t_star(p0, P_PIN, m)
            residual = max(residual, t_star_residual(t, p0, P_PIN, m))
            m_on = int(np.floor(irs_power_plan(t, P_PIN, m) / P_PIN + 1e-9))
            phi = 2 * select_phases(h_o, m_on) - 1
            proj = h_o * phi
            re_err = max(re_err, abs(np.mean(proj.real) / (2 / (m * np.pi) * np.cos(t)) - 1))
            im_mean = max(im_mean, abs(np.mean(proj.imag)))
    band = 1e-3 / m * np.sqrt(m)
    elapsed = time.perf_counter() - t0
    ok = residual <= 1e-9 and re_err <= 0.05 and im_mean < band and ks < 0.05 and elapsed < 60
    assert report(3, ok, f"t* residual {residual:.1e}, mean-Re error {re_err:.2%}, "
                         f"|mean Im| {im_mean:.1e} (band {band:.1e}), KS {ks:.4f}, {elapsed:.1f} s")


def test_woodbury_algebra():
    rng = np.random.default_rng(4)
    worst = 0.0
    cfg = SystemConfig(n_bs_antennas=5, irs_x=4, irs_y=4, n_users=3).with_p0_dbm(25)
    for i in range(100):
        _, ch = draw(cfg, 99, i)
        b = rng.integers(0, 2, cfg.m)
        f = (rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))) * np.sqrt(cfg.p0 / 30)
        h_e = effective_channels(ch, b)
        w, psi, _ = update_w_psi(h_e, f, 1.0, cfg.noise_power)
        f_hat, _ = update_f_zeta(b, h_e, w, psi, cfg)
        direct = g_bar(f_hat, b, w, psi, ch, cfg)
        worst = max(worst, abs(g_tilde(b, w, psi, ch, cfg) - direct) / abs(direct))
    assert report(4, worst <= 1e-8, f"worst relative mismatch {worst:.1e} over 100 instances")


def test_wmmse_monotone():
    cfg0 = SystemConfig(irs_x=8, irs_y=8, n_users=3)
    violations = over_cap = 0
    max_iter = 0
    for i in range(100):
        cfg = cfg0.with_p0_dbm((15, 25, 30, 36)[i % 4])
        _, ch = draw(cfg, 2024, i)
        for variant in ("fopt", "fscale"):
            sol, trace = run_jpabf(variant, ch, cfg)
            g = np.array(trace.g)
            violations += int(np.any(np.diff(g) > 1e-10 * np.maximum(1.0, np.abs(g[1:]))))
            over_cap += int(not sol.converged)
            max_iter = max(max_iter, sol.iterations)
    ok = violations == 0 and over_cap == 0
    assert report(5, ok, f"{violations} runs with an increase in g, {over_cap} unconverged, "
                         f"max {max_iter} iterations (200 runs)")


FIG_METHODS = ("jpabf-fopt", "jpabf-fscale", "ao-rand", "ao-zero", "ignore-jpabf-fopt",
               "ignore-jpabf-fscale")


@pytest.fixture(scope="module")
def desk_summary():
    spec = ExperimentSpec(sweep="power", methods=FIG_METHODS, p0_grid_dbm=(10.0, 25.0, 30.0, 36.0),
                          m_grid=((8, 8),), k=3, n_realizations=100, seed=42)
    rows = run_experiment(spec, threads=4)
    return {(s["method"], s["p0_dbm"]): s for s in summarize(rows)}


@pytest.mark.slow
def test_figure_orderings(desk_summary):
    s = desk_summary
    notes, ok = [], True
    for p0 in (25.0, 30.0, 36.0):
        fo, fs = s["jpabf-fopt", p0]["mean_rate"], s["jpabf-fscale", p0]["mean_rate"]
        ao = max(s["ao-rand", p0]["mean_rate"], s["ao-zero", p0]["mean_rate"])
        good = fo >= fs >= ao
        ok &= good
        notes.append(f"{p0:g} dBm {fo:.3f}/{fs:.3f}/{ao:.3f} {'ok' if good else 'VIOLATED'}")
    # half-on threshold P_PIN*M/2 = 25.84 dBm at M = 64
    inf = {m: s[m, 25.0]["n_infeasible"] / s[m, 25.0]["n"]
           for m in ("ignore-jpabf-fopt", "ignore-jpabf-fscale")}
    ok &= all(v == 1.0 for v in inf.values())
    notes.append("infeasible below threshold (25 dBm): "
                 + ", ".join(f"{m} {v:.0%}" for m, v in inf.items()))
    # below P_PIN: compare methods that produced a rate for every realization
    low = [s[m, 10.0] for m in FIG_METHODS if s[m, 10.0]["n_infeasible"] == 0]
    means = [r["mean_rate"] for r in low]
    err = max(r["stderr_rate"] for r in low)
    agree = max(means) - min(means) <= 2 * err
    ok &= agree
    notes.append(f"10 dBm spread {max(means) - min(means):.3f} vs 2*stderr {2 * err:.3f} "
                 f"({len(low)} methods)")
    assert report(6, ok, "; ".join(notes))


@pytest.mark.slow
def test_power_saturation():
    grid = (25.0, 28.0, 30.0, 32.0, 34.0, 36.0, 38.0)
    spec = ExperimentSpec(sweep="power", methods=("jpabf-fopt",), p0_grid_dbm=grid,
                          m_grid=((8, 8),), k=3, n_realizations=100, seed=7)
    summ = {s["p0_dbm"]: s["mean_p_irs_ps_w"] for s in summarize(run_experiment(spec, threads=4))}
    p = np.array([summ[d] for d in grid])
    monotone = bool(np.all(np.diff(p) >= 0))
    top = p[grid.index(34.0):]
    spread = np.max(np.abs(top / top.mean() - 1))
    ok = monotone and spread <= 0.10
    trend = ", ".join(f"{d:g}:{v * 1e3:.0f}" for d, v in zip(grid, p))
    assert report(7, ok, f"mean P_IRS,PS mW by dBm {trend}; 34-38 dBm deviation {spread:.1%}")


def test_single_user_cross_validation():
    hits = 0
    worst = 1.0
    for i in range(50):
        cfg, ch = _instance(i, 555)
        best = np.log2(1 + _brute(ch.cascaded[0], cfg.p0, cfg.p_pin) / cfg.noise_power)
        sol, _ = run_jpabf("fopt", ch, cfg)
        ratio = sol.sum_rate / best
        worst = min(worst, ratio)
        hits += ratio >= 0.99
    assert report(8, hits >= 45, f"{hits}/50 instances reach 99% of the optimum; "
                                 f"worst ratio {worst:.3f}")


def test_determinism():
    base = dict(sweep="power", p0_grid_dbm=(12.0, 25.0, 33.0), n_realizations=4, seed=2 ** 63 + 5)
    multi = ExperimentSpec(methods=FIG_METHODS, m_grid=((4, 4),), k=3, **base)
    single = ExperimentSpec(methods=("gbd-bf", "s-csi-bf", "jpabf-fopt", "ao-rand",
                                     "ignore-s-csi-bf"), m_grid=((3, 3),), k=1, **base)
    same = True
    for spec in (multi, single):
        outs = {rows_to_csv(run_experiment(spec, threads=t)) for t in (1, 3, 8)}
        outs.add(rows_to_csv(run_experiment(spec, threads=8)))
        same &= len(outs) == 1
    assert report(9, same, "CSV bytes identical across 1/3/8 threads and reruns")
