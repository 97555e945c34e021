import csv
import subprocess
import sys

import pytest
from hypothesis import given, strategies as hs

from dfrelay import cli
from dfrelay.config import (BoxConfig, ConfigError, ExperimentConfig, OutputConfig,
                            PsmFixed, RelayBox, RunConfig, ScenarioConfig,
                            dumps_config, load_config, parse_config, write_config)
from dfrelay.model import default_scenario

HEADER = ("strategy,rho_target,rho_empirical,rho_ci95,mean_total_power_w,"
          "power_ci95_w,mean_source_power_w,mean_relay_power_w,fallback_rate,"
          "trials,master_seed")


def write(tmp_path, text, name="exp.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_config_is_default_scenario(tmp_path):
    c = load_config(write(tmp_path, "[run]\ntrials = 1000\n"))
    assert c.run.trials == 1000
    assert c.scenario.build() == default_scenario()
    assert c.run.strategies == ("ocpa", "odpa", "psm", "srm", "rrs", "direct")


def test_empty_run_block_lists_required(tmp_path):
    with pytest.raises(ConfigError, match="trials") as info:
        load_config(write(tmp_path, "[scenario]\nalpha = 3\n\n[run]\n"))
    assert info.value.line == 4


def test_bad_rho_names_line(tmp_path):
    text = "[run]\ntrials = 10\nrho_targets = [0.1, 1.5]\n"
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, text))
    assert info.value.line == 3


@pytest.mark.parametrize("text", [
    "[run]\ntrials = 0\n",
    "[run]\ntrials = 10\nstrategies = [\"odpa\", \"magic\"]\n",
    "[run]\ntrials = 10\nunknown = 1\n",
    "[run]\ntrials = 10\n[scenario]\nnoise_power = -1.0\n",
    "[run]\ntrials = 10\n[scenario]\nrelays = [[100.0, 0.0]]\n",
    "[run]\ntrials = \"many\"\n",
    "[run\ntrials = 1\n",
    "[bogus]\n[run]\ntrials = 1\n",
])
def test_invalid_configs(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, text))


def test_override_applies_dot_paths(tmp_path):
    p = write(tmp_path, "[run]\ntrials = 10\n")
    c = load_config(p, ["run.rho_targets=[0.3]", "scenario.relay_box.count=4",
                        "output.csv=out.csv"])
    assert c.run.rho_targets == (0.3,)
    assert c.scenario.build().n_relays == 4
    assert c.output.csv == "out.csv"


configs = hs.builds(
    ExperimentConfig,
    run=hs.builds(
        RunConfig, trials=hs.integers(1, 10 ** 6),
        strategies=hs.lists(hs.sampled_from(["ocpa", "odpa", "psm", "srm", "rrs",
                                             "direct"]), min_size=1, unique=True),
        rho_targets=hs.lists(hs.floats(1e-6, 0.999), min_size=1, max_size=5, unique=True),
        master_seed=hs.integers(0, 2 ** 40), workers=hs.integers(1, 8),
        ocpa_p_max=hs.none() | hs.floats(1e-6, 1e6),
        psm=hs.none() | hs.builds(PsmFixed, hs.floats(1e-3, 10), hs.floats(1e-12, 1e-6)),
        destination_box=hs.none() | hs.just(BoxConfig())),
    scenario=hs.builds(
        ScenarioConfig,
        relays=hs.none() | hs.lists(hs.tuples(hs.floats(30, 70), hs.floats(-20, 20)),
                                    max_size=4),
        relay_box=hs.builds(RelayBox, count=hs.integers(0, 20),
                            placement_seed=hs.integers(0, 2 ** 32)),
        alpha=hs.floats(2.0, 4.0), noise_power=hs.floats(1e-14, 1e-6),
        snr_target=hs.floats(0.5, 100.0)),
    output=hs.builds(OutputConfig, per_trial_csv=hs.none() | hs.just("t.csv")))


@given(configs)
def test_config_round_trip(c):
    assert parse_config(dumps_config(c)) == c


def test_write_config_file_round_trip(tmp_path):
    c = ExperimentConfig(run=RunConfig(trials=5, psm=PsmFixed(0.15, 1e-8)))
    write_config(c, tmp_path / "c.toml")
    assert load_config(tmp_path / "c.toml") == c


def small_config(tmp_path, **run):
    kw = dict(trials=3000, strategies=("odpa", "srm", "rrs", "direct"),
              rho_targets=(0.05, 0.2), master_seed=4)
    kw.update(run)
    return ExperimentConfig(
        run=RunConfig(**kw),
        scenario=ScenarioConfig(relay_box=RelayBox(count=5)),
        output=OutputConfig(csv=str(tmp_path / "r.csv"),
                            curve_csv=str(tmp_path / "curve.csv"),
                            per_trial_csv=str(tmp_path / "trials.csv")))


def read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_experiment_outputs(tmp_path):
    lines = []
    c = small_config(tmp_path)
    results = cli.run_experiment(c, log=lines.append)
    rows = read(tmp_path / "r.csv")
    assert ",".join(rows[0]) == HEADER
    assert len(rows) == 1 + 4 * 2
    direct = [r for r in rows[1:] if r[0] == "direct"]
    assert all(float(r[2]) == 0.0 and float(r[8]) == 0.0 for r in direct)
    assert any("savings vs rrs" in s and "odpa" in s for s in lines)
    assert len(results) == 8
    trials = read(tmp_path / "trials.csv")
    assert len(trials) == 1 + 8 * 3000


def test_curve_data_matches_primary(tmp_path):
    cli.run_experiment(small_config(tmp_path), log=lambda s: None)
    primary = {(r[0], r[1]): r for r in read(tmp_path / "r.csv")[1:]}
    curve = read(tmp_path / "curve.csv")
    assert tuple(curve[0]) == cli.CURVE_HEADER
    body = curve[1:]
    assert [(r[0], float(r[1])) for r in body] == sorted((r[0], float(r[1])) for r in body)
    for r in body:
        assert r == primary[(r[0], r[1])][:len(r)]


def test_curve_row_count(tmp_path):
    c = small_config(tmp_path, strategies=("odpa", "srm", "direct"),
                     rho_targets=(0.01, 0.02, 0.05, 0.1, 0.2), trials=200)
    cli.run_experiment(c, log=lambda s: None)
    assert len(read(tmp_path / "curve.csv")) == 16
    with pytest.raises(ValueError):
        cli.emit_curve_data([], tmp_path / "x.csv")


def test_full_precision_floats(tmp_path):
    cli.run_experiment(small_config(tmp_path, trials=500), log=lambda s: None)
    for row in read(tmp_path / "r.csv")[1:]:
        assert float(repr(float(row[4]))) == float(row[4])
        assert row[4] == repr(float(row[4]))


def test_rerun_byte_identical_any_workers(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    cli.run_experiment(small_config(a, trials=9000, workers=1), log=lambda s: None)
    cli.run_experiment(small_config(b, trials=9000, workers=3), log=lambda s: None)
    assert (a / "r.csv").read_bytes() == (b / "r.csv").read_bytes()
    assert (a / "trials.csv").read_bytes() == (b / "trials.csv").read_bytes()


def test_main_exit_codes(tmp_path, capsys):
    good = write(tmp_path, "[run]\ntrials = 50\nstrategies = [\"odpa\"]\n"
                           "rho_targets = [0.1]\n")
    out = tmp_path / "o.csv"
    assert cli.main(["--config", str(good), "--out", str(out)]) == 0
    assert read(out)[1][0] == "odpa"
    assert cli.main(["--config", str(good), "--override", "run.trials=0"]) == 1
    assert cli.main(["--config", str(tmp_path / "missing.toml")]) == 2
    assert cli.main(["--config", str(good), "--out",
                     str(tmp_path / "no" / "dir" / "o.csv")]) == 2
    assert cli.main(["--trials", "40", "--seed", "3", "--override",
                     "run.strategies=[\"srm\"]", "--override", "run.rho_targets=[0.1]",
                     "--out", str(out)]) == 0
    assert read(out)[1][-1] == "3"


def test_module_entry_point(tmp_path):
    out = tmp_path / "m.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "dfrelay", "--trials", "100", "--override",
         "run.strategies=[\"odpa\",\"rrs\"]", "--override", "run.rho_targets=[0.05]",
         "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "savings vs rrs at rho_target=0.05: odpa" in proc.stdout
    assert len(read(out)) == 3


def test_shipped_configs_load():
    from pathlib import Path
    files = sorted((Path(__file__).parent.parent / "configs").glob("*.toml"))
    assert files
    for f in files:
        assert load_config(f).run.trials == 100_000
