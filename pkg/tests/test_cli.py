import hashlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from wavespec.cli import main
from wavespec.io import read_json, read_paths, read_pyramid, read_spectrum_csv
from wavespec.rng import derive
from wavespec.specmat import log_spectrum, wavelet_matrix
from wavespec.synth import EnsembleSpec, HurstLaw, MixingSpec, synth_ensemble
from wavespec.wavelet import mallat_pyramid

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
LAW = "0.2:1/3,0.5:1/3,0.8:1/3"


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def test_synth_happy_path(workdir):
    assert run("synth", "--n", 1024, "--p", 3, "--hurst", "0.5:1", "--seed", 7, "--out", "x.bin") == 0
    assert (workdir / "x.bin").stat().st_size == 3 * 1024 * 8
    meta = json.loads((workdir / "x.bin.json").read_text())
    assert (meta["n"], meta["p"], meta["format_version"], meta["seed"]) == (1024, 3, 1, 7)
    assert meta["hurst_assignment"] == [0.5, 0.5, 0.5]
    manifest = read_json("x.bin.manifest.json")
    assert manifest["argv"][0] == "synth" and set(manifest["outputs"]) == {"x.bin", "x.bin.json"}


def test_synth_matches_library(workdir):
    run("synth", "--n", 500, "--p", 4, "--hurst", LAW, "--mixing", "cond:2", "--seed", 3,
        "--out", "y.bin", "--latent-out", "x.bin")
    ens = synth_ensemble(EnsembleSpec(500, 4, HurstLaw.parse(LAW), MixingSpec.parse("cond:2"), seed=3))
    y, meta = read_paths("y.bin")
    x, _ = read_paths("x.bin")
    assert y.data.tobytes() == ens.observed.data.tobytes()
    assert x.data.tobytes() == ens.latent.data.tobytes()
    assert np.array_equal(meta["mixing_matrix"], ens.mixing)


@pytest.mark.parametrize("argv,needle", [
    (["synth", "--n", 1024, "--p", 3, "--hurst", "0.5:0.7", "--out", "x.bin"], "A1"),
    (["synth", "--n", 1024, "--p", 3, "--hurst", "1.5:1", "--out", "x.bin"], "A1"),
    (["synth", "--n", 1024, "--p", 3, "--hurst", "0.5:1", "--mixing", "cond:0.3", "--out", "x.bin"], "A5"),
    (["synth", "--n", 1024, "--out", "x.bin"], "required"),
    (["esd", "--pyramid", "p.bin", "--scale", "12", "--out", "s.csv"], "power of two"),
    (["mc", "--threads", "2"], "required"),
])
def test_validation_errors_exit_1(workdir, capsys, argv, needle):
    assert run(*argv) == 1
    assert needle in capsys.readouterr().err


def test_a4_violation_exits_1(workdir, capsys):
    (workdir / "bad.toml").write_text(f'hurst = "{LAW}"\n[[regime]]\nn = 1024\na = 16\np = 64\n')
    assert run("mc", "--config", "bad.toml", "--out", "out") == 1
    err = capsys.readouterr().err
    assert "A4" in err and "p < n/(a 2^j)" in err
    assert not (workdir / "out").exists()


def test_esd_regime_violation_exits_1(workdir, capsys):
    run("synth", "--n", 512, "--p", 40, "--hurst", "0.5:1", "--out", "x.bin")
    run("wavelet", "--in", "x.bin", "--max-octave", 4, "--out", "p.bin")
    assert run("esd", "--pyramid", "p.bin", "--scale", "2^4", "--out", "s.csv") == 1
    assert "A4" in capsys.readouterr().err


def test_runtime_errors_exit_2(workdir, capsys):
    assert run("wavelet", "--in", "missing.bin", "--max-octave", 3, "--out", "p.bin") == 2
    run("synth", "--n", 64, "--p", 1, "--hurst", "0.5:1", "--out", "x.bin")
    assert run("wavelet", "--in", "x.bin", "--max-octave", 6, "--out", "p.bin") == 2
    assert "octave" in capsys.readouterr().err


def test_round_trip_is_bit_exact(workdir):
    seed, n, p, m = 41, 4096, 6, 5
    run("synth", "--n", n, "--p", p, "--hurst", LAW, "--seed", seed, "--out", "y.bin")
    run("wavelet", "--in", "y.bin", "--family", "db3", "--max-octave", m + 1, "--out", "pyr.bin")
    assert run("esd", "--pyramid", "pyr.bin", "--scale", f"2^{m}", "--octave", 1, "--out", "spec.csv") == 0

    ens = synth_ensemble(EnsembleSpec(n, p, HurstLaw.parse(LAW), seed=seed), derive(seed))
    pyramid = mallat_pyramid(ens.observed, "db3", m + 1)
    expected = log_spectrum(wavelet_matrix(pyramid, m + 1, 1))
    got = read_spectrum_csv("spec.csv")
    assert got["rescaled_log"].tobytes() == expected.values.tobytes()
    assert got["lambda"].tobytes() == expected.eigenvalues.tobytes()

    stored, meta = read_pyramid("pyr.bin")
    for j in pyramid.octaves:
        assert stored.detail(j).tobytes() == pyramid.detail(j).tobytes()
    assert meta["family"] == "db3"


def test_replay_reproduces_outputs(workdir):
    run("synth", "--n", 2048, "--p", 3, "--hurst", LAW, "--seed", 5, "--out", "y.bin")
    run("wavelet", "--in", "y.bin", "--max-octave", 4, "--out", "pyr.bin")
    run("esd", "--pyramid", "pyr.bin", "--scale", "2^4", "--out", "spec.csv")
    before = {name: (workdir / name).read_bytes() for name in ("y.bin", "y.bin.json", "pyr.bin", "spec.csv")}
    for name in before:
        (workdir / name).unlink()
    for manifest in ("y.bin.manifest.json", "pyr.bin.manifest.json", "spec.csv.manifest.json"):
        recorded = read_json(manifest)["outputs"]
        assert run("replay", "--manifest", manifest) == 0
        for out, digest in recorded.items():
            assert hashlib.sha256((workdir / out).read_bytes()).hexdigest() == digest
    for name, data in before.items():
        assert (workdir / name).read_bytes() == data


def test_mc_small_config_and_report(workdir, capsys):
    config = CONFIGS / "fig1_small.toml"
    assert run("mc", "--config", config, "--out", "out") == 0
    out = workdir / "out"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["seed"] == 20240601
    assert (out / "histogram.svg").read_text().lstrip().startswith("<svg")
    assert (out / "manifest.json").exists() and (out / "timing.json").exists()
    capsys.readouterr()
    assert run("report", "--summary", "out") == 0
    text = capsys.readouterr().out
    assert "(n, a, p) = (1024, 16, 8)" in text and "median KS" in text

    first = (out / "summary.json").read_bytes()
    assert run("replay", "--manifest", out / "manifest.json") == 0
    assert (out / "summary.json").read_bytes() == first


def test_replay_refuses_empty_manifest(workdir):
    (workdir / "m.json").write_text(json.dumps({"argv": []}))
    assert run("replay", "--manifest", "m.json") == 1


def test_console_script_entry_point(workdir):
    proc = subprocess.run([sys.executable, "-m", "wavespec.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("wavespec ")
