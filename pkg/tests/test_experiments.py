import io
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from irs_ee.bcd import BcdSettings, OptimizerMode, optimize
from irs_ee.channel_gen import ChannelParams, generate_realization, load_channels, trial_rng
from irs_ee.cli import main
from irs_ee.experiments import (
    CSV_COLUMNS,
    ExperimentSpec,
    ResultTable,
    Scenario,
    emit_csv,
    load_spec,
    read_csv,
    run_experiment,
    spec_from_dict,
    spec_to_dict,
)

ROOT = Path(__file__).resolve().parents[1]
QUICK = BcdSettings(max_outer_iters=2, randomizations=10)


def small_spec(**kw):
    base = dict(scenario=Scenario(num_irs_elements=2, num_bs_antennas=2), sweep_var="pmax",
                sweep_values=(10.0, 20.0), trials=2, seed=3, bcd=QUICK,
                modes=("proposed", "fix_all"))
    base.update(kw)
    return ExperimentSpec(**base)


def csv_text(table):
    buf = io.StringIO()
    emit_csv(table, buf)
    return buf.getvalue()


def test_single_trial_fix_all_matches_optimize():
    spec = small_spec(trials=1, modes=("fix_all",), sweep_values=(20.0,))
    table = run_experiment(spec)
    config = spec.scenario.config()
    rng = trial_rng(spec.seed, 0)
    channels = generate_realization(config, spec.channel, rng, max_dims=spec.max_dims())
    ref = optimize(config, channels, OptimizerMode.FIX_ALL, settings=QUICK, rng=rng)
    assert table.rows[0].mean_ee == ref.ee
    assert table.rows[0].std_ee == 0.0
    assert table.rows[0].n_feasible == 1


def test_rerun_is_byte_identical():
    spec = small_spec()
    assert csv_text(run_experiment(spec)) == csv_text(run_experiment(spec))


def test_workers_do_not_change_output():
    spec = small_spec(sweep_var="n", sweep_values=(1, 2), modes=("fix_bs",))
    serial = run_experiment(spec)
    pooled = run_experiment(small_spec(sweep_var="n", sweep_values=(1, 2), modes=("fix_bs",),
                                       workers=2))
    assert csv_text(serial) == csv_text(pooled)
    np.testing.assert_array_equal(serial.ee, pooled.ee)


def test_paired_channels_across_sizes():
    spec = small_spec(sweep_var="n", sweep_values=(1, 2, 3))
    _, small, _ = _channels(spec, 1)
    _, large, _ = _channels(spec, 3)
    np.testing.assert_array_equal(small.G, large.G[:, :1])
    np.testing.assert_array_equal(small.h, large.h[:1])


def _channels(spec, value):
    from irs_ee.experiments import _load_channels
    return _load_channels(spec, value, 0)


def test_row_layout():
    spec = small_spec(modes=("fix_all", "fix_pa", "proposed"), sweep_values=(0.0, 10.0, 20.0),
                      trials=1)
    table = run_experiment(spec)
    assert len(table.rows) == 3 * 3
    assert table.ee.shape == (3, 3, 1)
    assert [r.mode for r in table.rows[:3]] == ["fix_all", "fix_pa", "proposed"]
    assert len(table.column("proposed")) == 3


def test_csv_round_trip(tmp_path):
    spec = small_spec()
    table = run_experiment(spec)
    path = tmp_path / "out.csv"
    emit_csv(table, path)
    assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    back = read_csv(path)
    assert len(back) == len(table.rows)
    for a, b in zip(table.rows, back):
        assert (a.sweep_var, a.mode, a.n_feasible, a.n_trials, a.seed) == \
            (b.sweep_var, b.mode, b.n_feasible, b.n_trials, b.seed)
        for x, y in ((a.sweep_value, b.sweep_value), (a.mean_ee, b.mean_ee), (a.std_ee, b.std_ee)):
            if np.isnan(x):
                assert np.isnan(y)
                continue
            assert y == pytest.approx(x, rel=5e-6)
            assert float(f"{x:.6g}") == y


def test_empty_table_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit_csv(ResultTable(), path)
    assert path.read_text() == ",".join(CSV_COLUMNS) + "\n"
    assert read_csv(path) == []


def test_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        emit_csv(ResultTable(), tmp_path / "missing" / "out.csv")


def test_infeasible_trials_excluded():
    spec = small_spec(scenario=Scenario(num_irs_elements=2, num_bs_antennas=2, min_rate=4.0),
                      sweep_values=(0.0,), modes=("fix_all",))
    row = run_experiment(spec).rows[0]
    assert row.n_feasible == 0 and row.n_trials == 2
    assert np.isnan(row.mean_ee)
    assert "nan" in csv_text([row])


@pytest.mark.parametrize("bad", [
    dict(sweep_values=()),
    dict(trials=0),
    dict(sweep_var="k"),
    dict(sweep_var="n", sweep_values=(2.5,)),
    dict(modes=()),
    dict(modes=("best",)),
    dict(workers=0),
])
def test_spec_validation(bad):
    with pytest.raises(ValueError):
        small_spec(**bad)


def test_spec_dict_round_trip():
    spec = small_spec(sweep_var="m", sweep_values=(2, 4), out="x.csv")
    again = spec_from_dict(spec_to_dict(spec))
    assert spec_to_dict(again) == spec_to_dict(spec)
    assert again.scenario == spec.scenario and again.channel == spec.channel


def test_defaults_and_bundled_config():
    spec = spec_from_dict({})
    assert (spec.scenario.num_users, spec.scenario.num_bs_antennas,
            spec.scenario.num_irs_elements) == (3, 4, 4)
    assert spec.scenario.circuit_power == 0.05 and spec.scenario.amp_inefficiency == 0.35
    assert spec.scenario.noise_psd_dbm_hz == -174.0 and spec.channel.rician_k_factor == 5.0
    assert spec.sweep_values == (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    bundled = load_spec(ROOT / "configs" / "pmax_sweep.yaml")
    assert spec_to_dict(bundled) == spec_to_dict(spec)


@pytest.mark.parametrize("doc", [
    {"scenario": {"users": 3}},
    {"sweep": {"var": "k"}},
    {"sweep": {"var": "n", "step": 2}},
    {"bcd": {"tolerance": 1}},
    {"trials": 0},
    {"extra": 1},
])
def test_spec_errors(doc):
    with pytest.raises(ValueError):
        spec_from_dict(doc)


def write_yaml(tmp_path, doc, name="spec.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return path


QUICK_DOC = {
    "scenario": {"num_irs_elements": 2, "num_bs_antennas": 2},
    "sweep": {"var": "pmax", "values": [10, 20]},
    "trials": 1,
    "modes": ["fix_all", "fix_irs"],
    "bcd": {"max_outer_iters": 2, "randomizations": 10},
}


def test_cli_run_writes_csv(tmp_path, capsys):
    spec = write_yaml(tmp_path, QUICK_DOC)
    out = tmp_path / "res.csv"
    assert main(["run", str(spec), "--out", str(out), "--seed", "5"]) == 0
    rows = read_csv(out)
    assert len(rows) == 4 and all(r.seed == 5 for r in rows)
    assert main(["run", str(spec), "--modes", "fix_all"]) == 0
    text = capsys.readouterr().out
    assert text.startswith(",".join(CSV_COLUMNS)) and len(text.splitlines()) == 3


def test_cli_sweep(capsys):
    assert main(["sweep", "--var", "n", "--values", "1", "--trials", "1",
                 "--modes", "fix_all"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].startswith("n,1,fix_all,")


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.yaml")]) == 1
    assert main(["run", str(write_yaml(tmp_path, {"trials": -1}))]) == 2
    bad = tmp_path / "broken.yaml"
    bad.write_text("scenario: [unclosed")
    assert main(["run", str(bad)]) == 2
    assert main(["sweep", "--var", "m", "--values", "0"]) == 2
    spec = write_yaml(tmp_path, QUICK_DOC)
    assert main(["run", str(spec), "--out", str(tmp_path / "no" / "dir.csv")]) == 1
    with pytest.raises(SystemExit):
        main(["sweep", "--var", "q"])
    with pytest.raises(SystemExit):
        main(["sweep", "--var", "n", "--modes", "best"])


def test_cli_show_spec(tmp_path, capsys):
    assert main(["show-spec", str(write_yaml(tmp_path, QUICK_DOC))]) == 0
    doc = yaml.safe_load(capsys.readouterr().out)
    assert doc["sweep"] == {"var": "pmax", "values": [10, 20]}
    assert doc["scenario"]["num_users"] == 3


def test_cli_export_channels(tmp_path):
    out = tmp_path / "ch.json"
    spec = write_yaml(tmp_path, QUICK_DOC)
    assert main(["export-channels", str(spec), "--trial", "1", "--out", str(out)]) == 0
    loaded = load_channels(out)
    assert json.loads(out.read_text())["format"] == "irs_ee.ChannelSet"
    ref_spec = load_spec(spec)
    config = ref_spec.scenario.at("pmax", 10).config()
    ref = generate_realization(config, ChannelParams(), trial_rng(0, 1),
                               max_dims=ref_spec.max_dims())
    np.testing.assert_array_equal(loaded.G, ref.G)
    np.testing.assert_array_equal(loaded.h, ref.h)
