from __future__ import annotations

import csv
import functools
import io
import json

import pytest

from fptwalk import cli
from fptwalk.exact import reflection_table
from fptwalk.verify import run_suites

import oracles


def _write(tmp_path, spec, name="spec.json"):
    path = tmp_path / name
    path.write_text(json.dumps(spec))
    return str(path)


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def _ssrw_spec(tmp_path, **extra):
    spec = {
        "scenarios": [{"name": "ssrw", "kind": "scaled_iid"}],
        "n_grid": [100, 400, 1600],
        "engine": "exact",
        "output": {"csv": str(tmp_path / "out.csv"), "json": str(tmp_path / "out.json"),
                   "plot_csv": str(tmp_path / "plot.csv")},
    }
    spec.update(extra)
    return spec


def test_ssrw_sweep_rows(tmp_path):
    assert cli.main(["run", _write(tmp_path, _ssrw_spec(tmp_path))]) == 0
    rows = _rows((tmp_path / "out.csv").read_text())
    assert [r["n"] for r in rows] == ["100", "400", "1600"]
    ratios = [float(r["ratio"]) for r in rows]
    assert ratios == sorted(ratios) and all(r < 1 for r in ratios)
    for r in rows:
        n = int(r["n"])
        assert float(r["P"]) == pytest.approx(oracles.SSRW_SURVIVAL[n], rel=1e-12)
        assert r["P_se"] == "" and r["runtime_ms"] == ""
    payload = json.loads((tmp_path / "out.json").read_text())
    assert payload["columns"] == cli.COLUMNS and len(payload["rows"]) == 3


def test_i33_flag_recomputable_from_row(tmp_path):
    cli.main(["run", _write(tmp_path, _ssrw_spec(tmp_path))])
    for r in _rows((tmp_path / "out.csv").read_text()):
        B = dict(item.split(":") for item in r["B_checkpoints"].split(";"))
        B_n = float(B[r["n"]])
        assert (r["i33_applicable"] == "true") == (B_n >= 24 * float(r["rho"]))
        assert float(r["i33_bound"]) == pytest.approx(4 * float(r["E_n"]) / B_n, rel=1e-15)


def test_plot_csv_is_tidy(tmp_path):
    cli.main(["run", _write(tmp_path, _ssrw_spec(tmp_path, checkpoints=[0.5, 1.0]))])
    rows = _rows((tmp_path / "plot.csv").read_text())
    assert list(rows[0]) == cli.PLOT_COLUMNS
    assert [(r["n"], r["m"]) for r in rows] == [("100", "50"), ("100", "100"), ("400", "200"),
                                                 ("400", "400"), ("1600", "800"), ("1600", "1600")]


def test_reruns_are_byte_identical(tmp_path):
    spec = _ssrw_spec(tmp_path, engine="both", mc={"paths": 20_000, "seed": 4})
    spec["scenarios"].append({"name": "l2", "kind": "lind2", "params": {"N": {"sqrt": 1.0}}})
    path = _write(tmp_path, spec)
    cli.main(["run", path])
    first = (tmp_path / "out.csv").read_bytes()
    cli.main(["run", path])
    assert (tmp_path / "out.csv").read_bytes() == first
    rows = _rows(first.decode())
    assert [(r["scenario"], r["n"], r["engine"]) for r in rows][:4] == [
        ("ssrw", "100", "exact"), ("ssrw", "100", "mc"), ("ssrw", "400", "exact"), ("ssrw", "400", "mc")]


def test_worker_pool_keeps_order(tmp_path, monkeypatch):
    spec = cli.RunSpec.from_dict(_ssrw_spec(tmp_path, engine="mc", mc={"paths": 5000}))
    serial, _ = cli.run(spec, workers=1)
    pooled, _ = cli.run(spec, workers=3)
    assert cli.to_csv(serial, cli.COLUMNS) == cli.to_csv(pooled, cli.COLUMNS)


def test_lind2_ratio_column(tmp_path, capsys):
    assert cli.main(["sweep", "lind2", "--n", "10000", "--param", 'N={"sqrt": 1}']) == 0
    row = _rows(capsys.readouterr().out)[0]
    # the column is normalized by sqrt(2/pi); P / E_n itself approaches Psi(1)
    p_over_e = float(row["P"]) / float(row["E_n"])
    assert p_over_e == pytest.approx(oracles.PSI_1, rel=2e-4)
    assert float(row["predicted_limit"]) == pytest.approx(float(row["P"]), rel=2e-4)


def test_timing_column_opt_in(tmp_path):
    cli.main(["run", _write(tmp_path, _ssrw_spec(tmp_path, record_timing=True))])
    assert all(float(r["runtime_ms"]) >= 0 for r in _rows((tmp_path / "out.csv").read_text()))


@pytest.mark.parametrize("mutate", [
    lambda s: s.update(scenarios=[]),
    lambda s: s.update(n_grid=[400, 100]),
    lambda s: s.update(n_grid=[100, 100]),
    lambda s: s.update(colour="red"),
    lambda s: s["scenarios"][0].update(kind="levy"),
    lambda s: s["scenarios"][0].update(params={"bogus": 1}),
    lambda s: s.update(engine="quantum"),
    lambda s: s.update(mc={"paths": 10}),
    lambda s: s.update(checkpoints=[1.5]),
])
def test_invalid_config_exit_2(tmp_path, capsys, mutate):
    spec = _ssrw_spec(tmp_path)
    mutate(spec)
    assert cli.main(["run", _write(tmp_path, spec)]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_file_exit_2(tmp_path):
    assert cli.main(["run", str(tmp_path / "absent.json")]) == 2


def test_engine_mismatch_exit_3(tmp_path):
    spec = {"scenarios": [{"kind": "ar1"}], "n_grid": [100], "engine": "exact"}
    assert cli.main(["run", _write(tmp_path, spec)]) == 3
    spec["engine"] = "both"
    assert cli.main(["run", _write(tmp_path, spec)]) == 3


def test_resource_guard_exit_4(tmp_path):
    spec = {"scenarios": [{"kind": "scaled_iid"}], "n_grid": [2000], "exact": {"guard": 1000}}
    assert cli.main(["run", _write(tmp_path, spec)]) == 4


def test_mc_on_continuous_with_overshoot(tmp_path, capsys):
    spec = {"scenarios": [{"kind": "ar1"}], "n_grid": [200], "engine": "mc",
            "mc": {"paths": 20_000, "seed": 3}, "overshoot": {"horizon": 10_000, "paths": 20_000}}
    assert cli.main(["run", _write(tmp_path, spec)]) == 0
    row = _rows(capsys.readouterr().out)[0]
    assert float(row["P"]) > 0 and float(row["predicted_limit"]) > 0
    assert float(row["predicted_limit"]) == pytest.approx(float(row["P"]), rel=0.2)


def test_verify_clean(capsys):
    assert cli.main(["verify"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert [line.split()[1].rstrip(":") for line in out] == list(cli.SUITES)
    assert all(line.startswith("PASS") for line in out)


def test_verify_filter(capsys):
    assert cli.main(["verify", "--suite", "reflection"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 1 and out[0].startswith("PASS reflection")


def _shifted_reflection(N, m):
    # boundary off by one: the survival side starts one level too high
    return reflection_table(N + 1, m)[0], reflection_table(N, m)[1]


def test_verify_catches_off_by_one(capsys, monkeypatch):
    monkeypatch.setattr(cli, "run_suites", functools.partial(run_suites, reflection=_shifted_reflection))
    assert cli.main(["verify", "--suite", "reflection"]) == 1
    assert capsys.readouterr().out.startswith("FAIL reflection")


def test_sweep_writes_files(tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["sweep", "scaled_iid", "--n", "10", "20", "--csv", str(out)]) == 0
    assert len(_rows(out.read_text())) == 2
