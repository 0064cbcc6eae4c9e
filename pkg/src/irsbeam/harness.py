"""Seeded Monte-Carlo sweeps over budget, IRS size and method; CSV output."""

from __future__ import annotations

import csv
import io
import math
import re
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .baselines import AoInit, Proposed, run_ao, run_ignore_psdpc, run_proposed
from .channel import D_BS_IRS, D_USER_RANGE, KAPPA, draw
from .model import SystemConfig, dbm_to_watts, watts_to_dbm

HEADER = ("method,seed,realization,p0_dbm,m,k,sum_rate_bps_hz,p_bs_w,p_irs_ps_w,"
          "n_diodes_on,iterations,converged,wall_ms,infeasible").split(",")
SUMMARY_HEADER = ["method", "p0_dbm", "m", "k", "n", "n_infeasible", "mean_rate",
                  "stderr_rate", "mean_p_bs_w", "mean_p_irs_ps_w", "mean_n_on",
                  "mean_iterations", "mean_wall_ms"]
HISTORY_HEADER = ["method", "seed", "realization", "p0_dbm", "m", "k", "iteration", "objective"]

SWEEPS = ("power", "size", "convergence", "single")
METHODS = ("gbd-bf", "s-csi-bf", "jpabf-fopt", "jpabf-fscale", "ao-rand", "ao-zero",
           "ignore-gbd-bf", "ignore-s-csi-bf", "ignore-jpabf-fopt", "ignore-jpabf-fscale")
SINGLE_USER = ("gbd-bf", "s-csi-bf", "ignore-gbd-bf", "ignore-s-csi-bf")
GBD_MAX_M = 20


class ConfigError(ValueError):
    pass


class MethodIntractable(ValueError):
    pass


_POWER_RE = re.compile(r"^\s*([-+]?\d*\.?\d+(?:[eE][-+]?\d+)?)\s*(dBm|mW|uW|W)\s*$")
_SCALE = {"W": 1.0, "mW": 1e-3, "uW": 1e-6}


def parse_power(value) -> float:
    """'12 mW', '-110 dBm', '0.5 W' -> watts."""
    if not isinstance(value, str):
        raise ConfigError(f"power {value!r} needs an explicit unit (dBm, W, mW, uW)")
    mt = _POWER_RE.match(value)
    if mt is None:
        raise ConfigError(f"cannot parse power {value!r}")
    num, unit = float(mt.group(1)), mt.group(2)
    if unit == "dBm":
        return float(dbm_to_watts(num))
    return num * _SCALE[unit]


@dataclass(frozen=True)
class ExperimentSpec:
    sweep: str
    methods: tuple
    p0_grid_dbm: tuple
    m_grid: tuple
    k: int = 1
    n_realizations: int = 100
    seed: int = 0
    output_path: str = "results.csv"
    base: SystemConfig = field(default_factory=SystemConfig)
    d_bs_irs: float = D_BS_IRS
    d_user_range: tuple = D_USER_RANGE
    kappa_g: float = KAPPA
    kappa_h: float = KAPPA
    gbd_max_m: int = GBD_MAX_M
    record_timing: bool = False

    def __post_init__(self):
        if self.sweep not in SWEEPS:
            raise ConfigError(f"unknown sweep {self.sweep!r}; expected one of {SWEEPS}")
        if not self.methods:
            raise ConfigError("methods must be non-empty")
        for name in self.methods:
            if name not in METHODS:
                raise ConfigError(f"unknown method {name!r}")
        if not self.p0_grid_dbm or not self.m_grid:
            raise ConfigError("p0 and IRS grids must be non-empty")
        if self.sweep in ("convergence", "single") and (len(self.p0_grid_dbm) != 1
                                                       or len(self.m_grid) != 1):
            raise ConfigError(f"a {self.sweep} run takes exactly one p0 and one IRS size")
        if self.n_realizations < 1:
            raise ConfigError("n_realizations must be >= 1")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        for mx, my in self.m_grid:
            if mx < 1 or my < 1:
                raise ConfigError("IRS dimensions must be >= 1")
        if self.k > 1 and any(mth in SINGLE_USER for mth in self.methods):
            raise ConfigError("GBD and S-CSI methods are single-user (k = 1)")
        for mth in self.methods:
            if "gbd" in mth:
                for mx, my in self.m_grid:
                    if mx * my > self.gbd_max_m:
                        raise MethodIntractable(
                            f"{mth} refuses M = {mx * my} > {self.gbd_max_m} "
                            "(exhaustive master problem); raise gbd_max_m to force it")

    def config_for(self, p0_dbm, m_xy) -> SystemConfig:
        return replace(self.base, irs_x=int(m_xy[0]), irs_y=int(m_xy[1]), n_users=self.k,
                       p0=float(dbm_to_watts(p0_dbm)))


def _as_grid_dbm(raw) -> tuple:
    if "p0_dbm" in raw and "p0" in raw:
        raise ConfigError("give either p0_dbm or p0, not both")
    if "p0_dbm" in raw:
        vals = raw["p0_dbm"]
        vals = vals if isinstance(vals, list) else [vals]
        return tuple(float(v) for v in vals)
    if "p0" in raw:
        vals = raw["p0"]
        vals = vals if isinstance(vals, list) else [vals]
        return tuple(float(watts_to_dbm(parse_power(v))) for v in vals)
    raise ConfigError("missing p0 grid (p0_dbm or p0)")


def _as_m_grid(raw) -> tuple:
    vals = raw.get("irs")
    if vals is None:
        raise ConfigError("missing irs grid")
    if not isinstance(vals, list):
        raise ConfigError("irs must be a list of [m_x, m_y] pairs")
    if len(vals) == 2 and all(isinstance(v, int) for v in vals):
        vals = [vals]
    out = []
    for v in vals:
        if not (isinstance(v, list) and len(v) == 2 and all(isinstance(x, int) for x in v)):
            raise ConfigError(f"bad IRS size {v!r}; expected [m_x, m_y]")
        out.append((v[0], v[1]))
    return tuple(out)


_POWER_KEYS = ("p_pin", "noise_power", "p_bs_circuits", "p_bs_rf_per_chain", "p_irs_static")
_TOP_KEYS = {"sweep", "methods", "p0_dbm", "p0", "irs", "k", "n_realizations", "seed",
             "output", "constants", "geometry", "gbd_max_m", "record_timing", "n_bs_antennas"}


def spec_from_dict(raw: dict, sweep: str | None = None) -> ExperimentSpec:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    consts = dict(raw.get("constants") or {})
    kw = {}
    for key in _POWER_KEYS:
        if key in consts:
            kw[key] = parse_power(consts.pop(key))
    for key in ("convergence_tol", "wavelength"):
        if key in consts:
            kw[key] = float(consts.pop(key))
    if consts:
        raise ConfigError(f"unknown constants: {sorted(consts)}")
    if "n_bs_antennas" in raw:
        kw["n_bs_antennas"] = int(raw["n_bs_antennas"])
    geo = dict(raw.get("geometry") or {})
    gkw = {}
    if "d_bs_irs" in geo:
        gkw["d_bs_irs"] = float(geo.pop("d_bs_irs"))
    if "d_user_range" in geo:
        lo, hi = geo.pop("d_user_range")
        gkw["d_user_range"] = (float(lo), float(hi))
    for key in ("kappa_g", "kappa_h"):
        if key in geo:
            gkw[key] = float(geo.pop(key))
    if geo:
        raise ConfigError(f"unknown geometry keys: {sorted(geo)}")
    sweep = sweep or raw.get("sweep")
    if sweep is None:
        raise ConfigError("sweep type missing")
    methods = raw.get("methods")
    if not isinstance(methods, list):
        raise ConfigError("methods must be a list")
    try:
        base = SystemConfig(**kw)
        return ExperimentSpec(
            sweep=sweep,
            methods=tuple(methods),
            p0_grid_dbm=_as_grid_dbm(raw),
            m_grid=_as_m_grid(raw),
            k=int(raw.get("k", 1)),
            n_realizations=int(raw.get("n_realizations", 100)),
            seed=int(raw.get("seed", 0)),
            output_path=str(raw.get("output", "results.csv")),
            base=base,
            gbd_max_m=int(raw.get("gbd_max_m", GBD_MAX_M)),
            record_timing=bool(raw.get("record_timing", False)),
            **gkw,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (ConfigError, MethodIntractable)):
            raise
        raise ConfigError(str(exc)) from exc


def load_spec(path, sweep: str | None = None) -> ExperimentSpec:
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML: {exc}") from exc
    return spec_from_dict(raw, sweep)


def row_seed(master_seed: int, realization: int, method: str) -> int:
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(realization),
                                 zlib.crc32(method.encode())])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ResultRow:
    method: str
    seed: int
    realization: int
    p0_dbm: float
    m: int
    k: int
    sum_rate_bps_hz: float
    p_bs_w: float
    p_irs_ps_w: float
    n_diodes_on: int
    iterations: int
    converged: bool
    wall_ms: float | None
    infeasible: bool
    history: tuple = ()

    def fields(self) -> list[str]:
        return [self.method, str(self.seed), str(self.realization), _fmt(self.p0_dbm),
                str(self.m), str(self.k),
                "" if self.infeasible else _fmt(self.sum_rate_bps_hz),
                _fmt(self.p_bs_w), _fmt(self.p_irs_ps_w), str(self.n_diodes_on),
                str(self.iterations), str(int(self.converged)),
                "" if self.wall_ms is None else f"{self.wall_ms:.3f}",
                str(int(self.infeasible))]


def _fmt(x) -> str:
    return repr(float(x))


def run_method(name, channels, geom, cfg, rng):
    if name == "ao-rand":
        return run_ao(AoInit.RANDOM, channels, cfg, rng)
    if name == "ao-zero":
        return run_ao(AoInit.ZERO, channels, cfg, rng)
    if name.startswith("ignore-"):
        return run_ignore_psdpc(Proposed(name[len("ignore-"):]), channels, cfg, geom)
    return run_proposed(Proposed(name), channels, cfg, geom)


def _run_point(spec: ExperimentSpec, p0_dbm, m_xy, realization):
    cfg = spec.config_for(p0_dbm, m_xy)
    geom, channels = draw(cfg, spec.seed, realization, d_bs_irs=spec.d_bs_irs,
                          d_user_range=spec.d_user_range, kappa_g=spec.kappa_g,
                          kappa_h=spec.kappa_h)
    rows = []
    for name in spec.methods:
        rng = np.random.default_rng(row_seed(spec.seed, realization, name))
        t0 = time.perf_counter()
        sol = run_method(name, channels, geom, cfg, rng)
        wall = (time.perf_counter() - t0) * 1e3 if spec.record_timing else None
        rows.append(ResultRow(
            method=name, seed=spec.seed, realization=realization, p0_dbm=p0_dbm,
            m=cfg.m, k=cfg.n_users, sum_rate_bps_hz=sol.sum_rate,
            p_bs_w=sol.power.p_bs_transmit, p_irs_ps_w=sol.power.p_irs_ps,
            n_diodes_on=sol.n_on, iterations=sol.iterations, converged=sol.converged,
            wall_ms=wall, infeasible=sol.infeasible, history=tuple(sol.history)))
    return rows


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> list[ResultRow]:
    """All rows, ordered by (grid point, realization, method) whatever the thread count."""
    tasks = [(p0, mxy, r) for mxy in spec.m_grid for p0 in spec.p0_grid_dbm
             for r in range(spec.n_realizations)]
    if threads <= 1:
        chunks = [_run_point(spec, *t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda t: _run_point(spec, *t), tasks))
    return [row for chunk in chunks for row in chunk]


def summarize(rows) -> list[dict]:
    """Mean and standard error of the sum rate per (method, grid point)."""
    groups: dict = {}
    for row in rows:
        groups.setdefault((row.method, row.p0_dbm, row.m, row.k), []).append(row)
    out = []
    for (method, p0_dbm, m, k), grp in groups.items():
        ok = [r for r in grp if not r.infeasible]
        rates = np.array([r.sum_rate_bps_hz for r in ok])
        n = len(rates)
        stderr = float(np.std(rates, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        walls = [r.wall_ms for r in grp if r.wall_ms is not None]
        out.append({
            "method": method, "p0_dbm": p0_dbm, "m": m, "k": k, "n": len(grp),
            "n_infeasible": len(grp) - n,
            "mean_rate": float(rates.mean()) if n else math.nan,
            "stderr_rate": stderr if n else math.nan,
            "mean_p_bs_w": float(np.mean([r.p_bs_w for r in ok])) if n else math.nan,
            "mean_p_irs_ps_w": float(np.mean([r.p_irs_ps_w for r in ok])) if n else math.nan,
            "mean_n_on": float(np.mean([r.n_diodes_on for r in ok])) if n else math.nan,
            "mean_iterations": float(np.mean([r.iterations for r in grp])),
            "mean_wall_ms": float(np.mean(walls)) if walls else math.nan,
        })
    return out


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(HEADER)
    for row in rows:
        wr.writerow(row.fields())
    return buf.getvalue()


def summary_to_csv(summary) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(SUMMARY_HEADER)
    for rec in summary:
        wr.writerow([rec[h] if isinstance(rec[h], str) else
                     (_fmt(rec[h]) if isinstance(rec[h], float) else str(rec[h]))
                     for h in SUMMARY_HEADER])
    return buf.getvalue()


def history_to_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(HISTORY_HEADER)
    for row in rows:
        for i, val in enumerate(row.history, start=1):
            wr.writerow([row.method, row.seed, row.realization, _fmt(row.p0_dbm), row.m,
                         row.k, i, _fmt(val)])
    return buf.getvalue()


def sibling(path, suffix) -> Path:
    p = Path(path)
    return p.with_name(f"{p.stem}_{suffix}{p.suffix or '.csv'}")


def write_outputs(spec: ExperimentSpec, rows, out_path=None) -> list[Path]:
    out = Path(out_path or spec.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(rows_to_csv(rows))
    written = [out]
    summ = sibling(out, "summary")
    summ.write_text(summary_to_csv(summarize(rows)))
    written.append(summ)
    if spec.sweep == "convergence":
        hist = sibling(out, "history")
        hist.write_text(history_to_csv(rows))
        written.append(hist)
    return written
