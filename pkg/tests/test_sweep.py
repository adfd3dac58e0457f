import csv
import hashlib
import io
import json
import math

import pytest

from dickelab import cli
from dickelab.projected import DOMAIN_REASON
from dickelab.sweep import (
    COLUMNS,
    ConfigError,
    OutputExistsError,
    SweepConfig,
    compare_report,
    compute_records,
    config_to_dict,
    figure_analytic_value,
    load_config,
    record_rows,
    reproduce_figure,
    run_sweep,
)


def write_config(tmp_path, **overrides):
    data = {
        "schema": 1,
        "omega_a": 1.0,
        "n_atoms_list": [4],
        "gamma_grid": [0.0, 0.5, 0.8],
        "methods": ["mean_field", "projected_even", "projected_odd", "exact"],
        "output": {"path": "out.csv", "format": "csv"},
    }
    data.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_config_parsing(tmp_path):
    cfg = load_config(write_config(tmp_path, gamma_grid={"start": 0, "stop": 1, "count": 11}))
    assert len(cfg.gammas) == 11 and cfg.gammas[-1] == 1.0
    assert cfg.nu_max is None and cfg.k_states == 2
    assert cfg.output == str(tmp_path / "out.csv")
    assert SweepConfig.from_dict(config_to_dict(cfg)) == cfg


@pytest.mark.parametrize("bad", [
    {"schema": 2},
    {"gamma_grid": [0.5, 0.4]},
    {"gamma_grid": [-0.1, 0.2]},
    {"gamma_grid": {"start": 0, "stop": 1, "count": 0}},
    {"methods": []},
    {"methods": ["dmrg"]},
    {"n_atoms_list": []},
    {"nu_max": "big"},
    {"output": {"path": "x", "format": "xml"}},
])
def test_config_rejects(tmp_path, bad):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, **bad))


def test_config_not_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(path)


def test_single_mean_field_record():
    cfg = SweepConfig(omega_a=1.0, n_atoms_list=(10,), gammas=(0.1,), methods=("mean_field",))
    (rec,) = compute_records(cfg, threads=1)
    (row,) = record_rows(rec)
    assert row["n_photons"] == 0 and row["energy_per_atom"] == -0.5
    assert row["reason"] == "exact_only"


def test_domain_rows_at_critical_coupling(tmp_path):
    path = write_config(tmp_path)
    run_sweep(load_config(path), threads=1)
    rows = read_csv(tmp_path / "out.csv")
    assert list(rows[0].keys()) == list(COLUMNS)
    assert len(rows) == 3 * 4
    at_gc = [r for r in rows if r["gamma"] == "0.5" and r["method"] == "projected"]
    assert len(at_gc) == 2
    for r in at_gc:
        assert r["energy"] == "" and r["reason"].startswith(DOMAIN_REASON)
    above = [r for r in rows if r["gamma"] == "0.8" and r["method"] == "projected"]
    assert all(r["energy"] != "" for r in above)
    exact = [r for r in rows if r["method"] == "exact"]
    assert all(r["converged"] == "true" and r["reason"] == "" for r in exact)
    # every empty cell is explained
    for r in rows:
        if any(v == "" for k, v in r.items() if k != "reason"):
            assert r["reason"]


def test_output_is_deterministic_and_nan_free(tmp_path):
    path = write_config(tmp_path, n_atoms_list=[2, 6], gamma_grid={"start": 0, "stop": 1, "count": 6})
    cfg = load_config(path)
    run_sweep(cfg, threads=1)
    first = (tmp_path / "out.csv").read_bytes()
    run_sweep(cfg, threads=2, overwrite=True)
    assert (tmp_path / "out.csv").read_bytes() == first
    text = first.decode("utf-8")
    assert "nan" not in text.lower() and "inf" not in text.lower()
    assert "\r" not in text
    rows = read_csv(tmp_path / "out.csv")
    assert [int(r["n_atoms"]) for r in rows[::4]] == [2] * 6 + [6] * 6


def test_refuses_to_overwrite(tmp_path):
    path = write_config(tmp_path)
    (tmp_path / "out.csv").write_text("keep me")
    with pytest.raises(OutputExistsError):
        run_sweep(load_config(path), threads=1)
    assert (tmp_path / "out.csv").read_text() == "keep me"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["config.json", "out.csv"]


def test_json_output(tmp_path):
    path = write_config(tmp_path, output={"path": "out.json", "format": "json"})
    run_sweep(load_config(path), threads=1)
    doc = json.loads((tmp_path / "out.json").read_text())
    assert doc["schema"] == 1 and doc["columns"] == list(COLUMNS)
    assert len(doc["rows"]) == 12
    gc_rows = [r for r in doc["rows"] if r["gamma"] == 0.5 and r["method"] == "projected"]
    assert all(r["energy"] is None for r in gc_rows)


def test_fixed_cutoff_flags_unconverged():
    cfg = SweepConfig(omega_a=1.0, n_atoms_list=(10,), gammas=(1.0,), methods=("exact",), nu_max=5)
    (row,) = record_rows(compute_records(cfg, 1)[0])
    assert row["converged"] is False
    assert row["reason"] == "numerical: cutoff_unconverged"
    assert math.isfinite(row["energy"])


def test_compare_report(tmp_path):
    cfg = SweepConfig(omega_a=1.0, n_atoms_list=(10, 20, 30, 50), gammas=(0.0, 1.0),
                      methods=("mean_field", "projected_even", "exact"), output=str(tmp_path / "s.csv"))
    rows, summary = compare_report(cfg, threads=1)
    zero = [r for r in rows if r["gamma"] == 0.0 and r["field"] in ("energy", "n_photons", "n_excited")]
    assert all(r["abs_delta"] == 0.0 for r in zero if r["method"] == "mean_field")
    assert all(r["reason"] == DOMAIN_REASON for r in zero if r["method"] == "projected")
    (nph,) = [r for r in rows if r["n_atoms"] == 50 and r["gamma"] == 1.0
              and r["method"] == "mean_field" and r["field"] == "n_photons"]
    assert nph["analytic"] == pytest.approx(46.875)
    assert nph["abs_delta_per_atom"] < 0.05
    var_q = [s["max_abs_delta_per_atom"] for s in summary
             if s["method"] == "projected" and s["field"] == "var_q"]
    assert len(var_q) == 4 and all(b < a for a, b in zip(var_q, var_q[1:]))
    assert (tmp_path / "s.compare.csv").exists() and (tmp_path / "s.compare.summary.csv").exists()


def test_compare_requires_exact():
    cfg = SweepConfig(omega_a=1.0, n_atoms_list=(4,), gammas=(0.7,), methods=("mean_field",))
    with pytest.raises(ConfigError):
        compare_report(cfg)


def test_figure_analytic_convention():
    assert figure_analytic_value("fig1", 1.0, 0.3) == 0.0
    assert figure_analytic_value("fig1", 1.0, 0.3, analytic_n=10) == 1 / 20
    assert figure_analytic_value("fig1", 1.0, 1.0) == pytest.approx(2 * (1 - 1 / 16))
    assert figure_analytic_value("fig2", 1.0, 1.0) == pytest.approx((1 - 1 / 16) / 4)


def test_reproduce_figure_manifest(tmp_path):
    out = tmp_path / "fig"
    manifest = reproduce_figure("fig1", out, n_list=(4, 6), gammas=[0.0, 0.3, 0.7])
    names = sorted(p.name for p in out.iterdir())
    assert names == ["fig1_analytic.csv", "fig1_exact_N4.csv", "fig1_exact_N6.csv", "manifest.json"]
    on_disk = json.loads((out / "manifest.json").read_text())
    assert on_disk == manifest
    for name, info in manifest["files"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == info["sha256"]
    rows = list(csv.DictReader(io.StringIO((out / "fig1_analytic.csv").read_text())))
    assert rows[1]["value"] == "0.0"
    with pytest.raises(OutputExistsError):
        reproduce_figure("fig1", out, n_list=(4,), gammas=[0.0])


def test_cli_critical(capsys):
    assert cli.main(["critical", "--omega-a", "1"]) == 0
    assert capsys.readouterr().out.strip() == "gamma_c = 0.5"
    assert cli.main(["critical", "--omega-a", "1", "--gamma", "1", "--n", "4"]) == 0
    out = capsys.readouterr().out
    assert "energy_per_atom = -1.0625" in out and "superradiant" in out.lower()


def test_cli_converge(capsys):
    assert cli.main(["converge", "--n", "10", "--omega-a", "1", "--gamma", "0"]) == 0
    assert capsys.readouterr().out.strip() == "30"


def test_cli_sweep_and_exit_codes(tmp_path, capsys):
    path = write_config(tmp_path)
    assert cli.main(["sweep", str(path), "--threads", "1"]) == 0
    assert cli.main(["sweep", str(path)]) == 3
    assert cli.main(["sweep", str(path), "--overwrite", "--format", "json",
                     "--out", str(tmp_path / "o.json")]) == 0
    assert json.loads((tmp_path / "o.json").read_text())["schema"] == 1
    bad = write_config(tmp_path, schema=9)
    assert cli.main(["sweep", str(bad)]) == 1
    assert cli.main(["sweep", str(tmp_path / "missing.json")]) == 1
    assert cli.main(["converge", "--n", "4", "--omega-a", "-1", "--gamma", "1"]) == 1


def test_cli_compare_and_figure(tmp_path):
    path = write_config(tmp_path, gamma_grid=[0.0, 0.8])
    assert cli.main(["compare", str(path)]) == 0
    assert (tmp_path / "out.compare.csv").exists()
    out = tmp_path / "f2"
    assert cli.main(["figure", "fig2", "--out", str(out), "--n", "4", "--points", "3"]) == 0
    assert (out / "manifest.json").exists()
    assert cli.main(["figure", "fig2", "--out", str(out), "--n", "4", "--points", "3"]) == 3


def test_threads_env(monkeypatch):
    from dickelab.sweep import default_threads

    monkeypatch.setenv("DICKELAB_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.delenv("DICKELAB_THREADS")
    assert default_threads() == 1
