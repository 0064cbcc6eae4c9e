import csv
import io
import math

import numpy as np
import pytest
import yaml

from irsbeam import cli
from irsbeam.harness import (HEADER, ConfigError, ExperimentSpec, MethodIntractable, ResultRow,
                             load_spec, parse_power, row_seed, rows_to_csv, run_experiment,
                             spec_from_dict, summarize, write_outputs)


@pytest.mark.parametrize("text,watts", [("12 mW", 12e-3), ("-110 dBm", 1e-14), ("0.5 W", 0.5),
                                        ("30dBm", 1.0), ("250 uW", 2.5e-4), ("1e-3 W", 1e-3)])
def test_parse_power(text, watts):
    assert parse_power(text) == pytest.approx(watts, rel=1e-12)


@pytest.mark.parametrize("bad", [12, "12", "12 kW", "dBm", "1.2.3 W"])
def test_parse_power_rejects(bad):
    with pytest.raises(ConfigError):
        parse_power(bad)


BASE = {"sweep": "power", "methods": ["jpabf-fopt"], "p0_dbm": [20], "irs": [[2, 2]], "k": 2,
        "n_realizations": 2, "seed": 5}


def _spec(**over):
    raw = dict(BASE)
    raw.update(over)
    return spec_from_dict(raw)


@pytest.mark.parametrize("over", [
    {"methods": []}, {"methods": ["magic"]}, {"p0_dbm": []}, {"n_realizations": 0},
    {"irs": [[0, 3]]}, {"irs": "big"}, {"bogus": 1}, {"constants": {"p_pin": 0.012}},
    {"constants": {"warp": "1 W"}}, {"geometry": {"height": 3}}, {"methods": ["gbd-bf"]},
    {"sweep": "nope"}, {"p0": ["1 W"]},
])
def test_config_errors(over):
    with pytest.raises(ConfigError):
        _spec(**over)


def test_config_units_and_geometry():
    raw = {k: v for k, v in BASE.items() if k != "p0_dbm"}
    consts = {"p_pin": "10 mW", "noise_power": "-100 dBm", "convergence_tol": 0.01}
    geo = {"d_bs_irs": 30, "d_user_range": [50, 60], "kappa_h": 4}
    spec = spec_from_dict(dict(raw, p0=["1 W", "20 dBm"], k=1, constants=consts, geometry=geo))
    assert spec.p0_grid_dbm == pytest.approx((30.0, 20.0))
    assert spec.base.p_pin == pytest.approx(0.01)
    assert spec.base.noise_power == pytest.approx(1e-13)
    assert spec.d_user_range == (50.0, 60.0) and spec.kappa_h == 4.0


def test_gbd_size_cap():
    with pytest.raises(MethodIntractable):
        _spec(methods=["gbd-bf"], k=1, irs=[[5, 5]])
    spec = _spec(methods=["gbd-bf"], k=1, irs=[[5, 5]], gbd_max_m=25)
    assert spec.m_grid == ((5, 5),)


def _row(rate, method="a", infeasible=False, p0=10.0):
    return ResultRow(method, 0, 0, p0, 4, 1, rate, 0.1, 0.0, 0, 1, True, None, infeasible)


def test_summarize_arithmetic():
    assert summarize([_row(2.5)])[0]["stderr_rate"] == 0.0
    assert summarize([_row(2.5)])[0]["mean_rate"] == 2.5
    assert summarize([_row(1.0), _row(1.0)])[0]["stderr_rate"] == 0.0
    vals = [1.0, 2.0, 4.0, 7.0]
    rec = summarize([_row(v) for v in vals] + [_row(99.0, infeasible=True)])[0]
    mean = sum(vals) / 4
    var = sum((v - mean) ** 2 for v in vals) / 3
    assert rec["mean_rate"] == pytest.approx(3.5)
    assert rec["stderr_rate"] == pytest.approx(math.sqrt(var / 4))
    assert rec["n"] == 5 and rec["n_infeasible"] == 1
    groups = summarize([_row(1.0, "a"), _row(3.0, "b"), _row(5.0, "a", p0=20.0)])
    assert [(g["method"], g["p0_dbm"], g["mean_rate"]) for g in groups] == [
        ("a", 10.0, 1.0), ("b", 10.0, 3.0), ("a", 20.0, 5.0)]


def test_row_seed_stable_and_distinct():
    assert row_seed(1, 2, "ao-rand") == row_seed(1, 2, "ao-rand")
    assert len({row_seed(1, r, m) for r in range(5) for m in ("ao-rand", "ao-zero")}) == 10
    assert row_seed(2 ** 64 - 1, 0, "x") >= 0


def test_csv_header_and_infeasible_row():
    text = rows_to_csv([_row(1.5), _row(2.0, infeasible=True)])
    lines = text.splitlines()
    assert lines[0] == ("method,seed,realization,p0_dbm,m,k,sum_rate_bps_hz,p_bs_w,p_irs_ps_w,"
                        "n_diodes_on,iterations,converged,wall_ms,infeasible")
    rec = list(csv.DictReader(io.StringIO(text)))
    assert rec[0]["sum_rate_bps_hz"] == "1.5" and rec[1]["sum_rate_bps_hz"] == ""
    assert rec[1]["infeasible"] == "1"


def test_parallel_runs_are_byte_identical():
    spec = _spec(methods=["jpabf-fopt", "jpabf-fscale", "ao-rand", "ao-zero",
                          "ignore-jpabf-fopt"], p0_dbm=[15, 25], n_realizations=3)
    one = rows_to_csv(run_experiment(spec, threads=1))
    eight = rows_to_csv(run_experiment(spec, threads=8))
    assert one == eight
    assert len(one.splitlines()) == 1 + 2 * 3 * 5


def test_rows_respect_budget():
    spec = _spec(methods=["jpabf-fopt", "ao-rand", "ignore-jpabf-fscale"], p0_dbm=[12, 20],
                 irs=[[3, 3]], n_realizations=3)
    for row in run_experiment(spec):
        p0 = 1e-3 * 10 ** (row.p0_dbm / 10)
        assert row.infeasible or row.p_bs_w + row.p_irs_ps_w <= p0 + 1e-9


def test_single_user_methods_and_outputs(tmp_path):
    spec = _spec(sweep="convergence", k=1, methods=["gbd-bf", "s-csi-bf", "ao-zero"],
                 irs=[[3, 3]], n_realizations=2)
    rows = run_experiment(spec)
    paths = write_outputs(spec, rows, tmp_path / "run.csv")
    assert [p.name for p in paths] == ["run.csv", "run_summary.csv", "run_history.csv"]
    hist = list(csv.DictReader(open(paths[2])))
    assert {h["method"] for h in hist} >= {"gbd-bf", "ao-zero"}


def test_cli_end_to_end(tmp_path, capsys):
    cfg = dict(BASE, output=str(tmp_path / "x.csv"))
    path = tmp_path / "exp.yaml"
    path.write_text(yaml.safe_dump(cfg))
    out = tmp_path / "o.csv"
    assert cli.main(["sweep-power", "--config", str(path), "--out", str(out), "--seed", "9"]) == 0
    rows = list(csv.DictReader(open(out)))
    assert list(rows[0]) == HEADER
    assert {r["seed"] for r in rows} == {"9"}
    assert len(rows) == 2
    assert (tmp_path / "o_summary.csv").exists()
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump(dict(BASE, methods=["nope"])))
    assert cli.main(["single", "--config", str(bad)]) == 2
    assert "unknown method" in capsys.readouterr().err
    assert cli.main(["single", "--config", str(tmp_path / "missing.yaml")]) == 2


def test_load_spec_sweep_override(tmp_path):
    path = tmp_path / "e.yaml"
    path.write_text(yaml.safe_dump(BASE))
    assert load_spec(path, "size").sweep == "size"
    path.write_text("methods: [\n")
    with pytest.raises(ConfigError):
        load_spec(path)


def test_size_sweep_grid_order():
    spec = _spec(sweep="size", irs=[[2, 2], [3, 3]], n_realizations=2, methods=["ao-zero"])
    rows = run_experiment(spec, threads=3)
    assert [(r.m, r.realization) for r in rows] == [(4, 0), (4, 1), (9, 0), (9, 1)]
    assert isinstance(spec, ExperimentSpec) and np.isfinite(rows[0].sum_rate_bps_hz)
