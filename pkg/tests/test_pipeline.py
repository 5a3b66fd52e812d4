"""Pipeline configuration, stage runner, manifest, and the CLI contract."""
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from tmsclean import pipeline as pl, sim
from tmsclean.core import load_dataset, load_epochs, save_dataset
from tmsclean.errors import ConfigError

CLI = [sys.executable, "-m", "tmsclean.cli"]


def run_cli(*args, cwd=None):
    return subprocess.run(CLI + [str(a) for a in args], cwd=cwd,
                          capture_output=True, text=True)


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    work = tmp_path_factory.mktemp("smallds")
    rec, truth = sim.simulate(sim.SimConfig(seed=5, n_trials=6, n_channels=16))
    save_dataset(rec, work / "ds")
    sim.save_truth(truth, work / "ds")
    return work / "ds"


def test_config_rejects_unknown_stage_kind():
    with pytest.raises(ConfigError):
        pl.PipelineConfig(input_path="x", out_dir="y",
                          stages=[("a", "nonsense", {})])


def test_config_rejects_duplicate_names():
    with pytest.raises(ConfigError):
        pl.PipelineConfig(input_path="x", out_dir="y",
                          stages=[("a", "sound", {}), ("a", "ssp", {})])


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        pl.PipelineConfig(input_path="x", out_dir="y",
                          stages=[("a", "sound", {"typo_key": "1"})])


def test_config_hash_ignores_paths():
    a = pl.PipelineConfig(input_path="x", out_dir="y", seed=1)
    b = pl.PipelineConfig(input_path="other", out_dir="z", seed=1)
    c = pl.PipelineConfig(input_path="x", out_dir="y", seed=2)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()


def test_ini_roundtrip(tmp_path):
    ini = tmp_path / "p.ini"
    ini.write_text(
        "[pipeline]\nstages = preprocess, sound\nseed = 9\n\n"
        "[stage:preprocess]\nlp_hz = 35\n\n[stage:sound]\nlambda = 0.2\n")
    cfg = pl.load_config(ini, input_path="in", out_dir="out")
    assert cfg.seed == 9
    assert cfg.stages[0] == ("preprocess", "preprocess", {"lp_hz": "35"})
    assert cfg.stages[1][2] == {"lambda": "0.2"}


def test_ini_unknown_key_rejected(tmp_path):
    ini = tmp_path / "p.ini"
    ini.write_text("[pipeline]\nbogus = 1\n")
    with pytest.raises(ConfigError):
        pl.load_config(ini)


def test_ini_missing_stage_section(tmp_path):
    ini = tmp_path / "p.ini"
    ini.write_text("[pipeline]\nstages = sound\n")
    with pytest.raises(ConfigError):
        pl.load_config(ini)


def test_run_preprocess_stage(small_dataset):
    rec = load_dataset(small_dataset)
    ep, info = pl.run_preprocess(rec, {}, seed=0)
    assert ep.fs == 250.0
    assert ep.n_trials == 6
    good = [i for i, c in enumerate(ep.channels) if c.kind == "eeg" and not c.bad]
    assert abs(ep.data[:, good, :].mean(axis=1)).max() < 1e-9  # average referenced
    assert "bad-channels" in info and "rejected-trials" in info


def test_pipeline_writes_stage_outputs_and_manifest(small_dataset, tmp_path):
    out = tmp_path / "run"
    cfg = pl.PipelineConfig(
        input_path=str(small_dataset), out_dir=str(out), seed=5,
        stages=[("preprocess", "preprocess", {}),
                ("sound", "sound", {})],
        emit_reports=False)
    manifest = pl.run_pipeline(cfg)
    m = json.loads((out / "manifest.json").read_text())
    assert [s["name"] for s in m["stages"]] == ["preprocess", "sound"]
    assert all("output-hash" in s for s in m["stages"])
    ep = load_epochs(out / "01_sound")
    assert ep.n_trials == 6
    assert manifest.input_hash == m["input-hash"]


def test_pipeline_failure_leaves_manifest(small_dataset, tmp_path):
    out = tmp_path / "runfail"
    cfg = pl.PipelineConfig(
        input_path=str(small_dataset), out_dir=str(out), seed=5,
        stages=[("sound", "sound", {})],  # sound on a raw recording: no epochs
        emit_reports=False)
    with pytest.raises(Exception):
        pl.run_pipeline(cfg)
    m = json.loads((out / "manifest.json").read_text())
    assert "error" in m["stages"][-1]


def test_cli_missing_input_exits_3(tmp_path):
    r = run_cli("preprocess", "--in", tmp_path / "missing", "--out", tmp_path / "x")
    assert r.returncode == 3


def test_cli_bad_config_exits_2(tmp_path):
    ini = tmp_path / "bad.ini"
    ini.write_text("[pipeline]\nbogus = 1\n")
    r = run_cli("pipeline", "--config", ini, "--out", tmp_path / "o")
    assert r.returncode == 2


def test_cli_simulate_then_preprocess(tmp_path):
    r = run_cli("simulate", "--seed", 3, "--trials", 4, "--channels", 16,
                "--out", tmp_path / "ds")
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "ds.json").exists() and (tmp_path / "ds.f32").exists()
    r = run_cli("preprocess", "--in", tmp_path / "ds", "--out", tmp_path / "pp")
    assert r.returncode == 0, r.stderr
    ep = load_epochs(tmp_path / "pp")
    assert ep.fs == 250.0 and ep.n_trials == 4


def test_cli_stage_chain_matches_library(tmp_path):
    """preprocess then sound via the CLI equals the library calls bit-for-bit."""
    run_cli("simulate", "--seed", 11, "--trials", 4, "--channels", 16,
            "--out", tmp_path / "ds")
    r = run_cli("preprocess", "--in", tmp_path / "ds", "--out", tmp_path / "pp")
    assert r.returncode == 0, r.stderr
    r = run_cli("sound", "--in", tmp_path / "pp", "--out", tmp_path / "snd")
    assert r.returncode == 0, r.stderr
    ep = load_epochs(tmp_path / "pp")  # same float32 input the CLI stage read
    cleaned, _ = pl.run_sound(ep, {})
    got = load_epochs(tmp_path / "snd")
    np.testing.assert_array_equal(got.data, cleaned.data.astype(np.float32))


def test_cli_classify_reports_labels(tmp_path):
    run_cli("simulate", "--seed", 12, "--trials", 4, "--channels", 16,
            "--out", tmp_path / "ds")
    run_cli("preprocess", "--in", tmp_path / "ds", "--out", tmp_path / "pp")
    r = run_cli("classify", "--in", tmp_path / "pp", "--n-components", 8)
    assert r.returncode == 0, r.stderr
    out = json.loads(r.stdout)
    assert len(out["labels"]) == 8
    assert set(out["labels"]) <= {"Brain", "Eye", "Muscle", "Heart",
                                  "LineNoise", "ChannelNoise", "Other"}
    assert all(isinstance(i, int) for i in out["suggested-reject"])
