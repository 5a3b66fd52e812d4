"""Acceptance suite: one test per release criterion, tolerances as stated.

Each test name is one criterion; the conftest reporter prints a PASS/FAIL
line per criterion at the end of the run.
"""
import json
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest
from scipy import signal

from tmsclean import ica, montage, preprocess as pp, sim, sound, ssp, tfr
from tmsclean import pipeline as pl
from tmsclean.core import epoch, load_epochs, save_dataset

from conftest import make_epochs, make_recording

CLI = [sys.executable, "-m", "tmsclean.cli"]


def _cli(*args):
    r = subprocess.run(CLI + [str(a) for a in args], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    return r


def test_filter_band_mask():
    """1-40 Hz FIR: 10/20/35 Hz gain 1 +/- 0.02; DC and >= 50 Hz <= 0.01; < 1 s."""
    t0 = time.perf_counter()
    fs = 1000.0
    filt = pp.design_fir(fs, 1.0, 40.0)
    n = 8000
    tt = np.arange(n) / fs
    for freq, lo, hi in [(10.0, 0.98, 1.02), (20.0, 0.98, 1.02), (35.0, 0.98, 1.02),
                         (0.0, 0.0, 0.01), (50.0, 0.0, 0.01), (60.0, 0.0, 0.01)]:
        x = np.cos(2 * np.pi * freq * tt) if freq else np.ones(n)
        rec = make_recording(np.tile(x, (3, 1)), fs=fs,
                             channels=montage.standard_montage(3))
        y = pp.filter_zero_phase(rec, filt).data[0]
        mid = slice(n // 4, 3 * n // 4)
        gain = float(np.sqrt(np.mean(y[mid] ** 2) / np.mean(x[mid] ** 2)))
        assert lo <= gain <= hi, f"{freq} Hz tone gain {gain:.4f}"
    assert time.perf_counter() - t0 < 1.0


def test_bad_channel_rule_vs_oracle():
    """+/- 2 SD rule flags exactly what independent arithmetic flags, 100 profiles; < 1 s."""
    t0 = time.perf_counter()
    r = np.random.default_rng(0)
    chs = montage.standard_montage(30)
    for _ in range(100):
        sds = np.exp(r.normal(1.0, r.uniform(0.2, 0.8), size=30))
        if r.random() < 0.5:  # sometimes plant gross outliers
            sds[r.integers(0, 30)] *= r.uniform(5, 20)
        data = sds[:, None] * r.standard_normal((30, 300))
        rec = make_recording(data, channels=chs)
        got = pp.detect_bad_channels(rec)
        measured = data.std(axis=1)
        mu, disp = measured.mean(), measured.std()
        want = {i for i in range(30) if abs(measured[i] - mu) > 2.0 * disp}
        assert got == want
    assert time.perf_counter() - t0 < 1.0


def test_ica_recovery_amari():
    """Amari distance < 0.05 on >= 18/20 seeded 3-source mixtures; < 30 s."""
    t0 = time.perf_counter()
    hits = 0
    for seed in range(20):
        r = np.random.default_rng(seed)
        n = 10_000
        s = np.vstack([
            r.laplace(size=n),
            r.uniform(-np.sqrt(3), np.sqrt(3), size=n),
            np.sign(np.sin(2 * np.pi * 5 * np.arange(n) / 1000.0 + r.uniform(0, np.pi))),
        ])
        a = r.normal(size=(3, 3)) + 3 * np.eye(3)
        ep = make_epochs((a @ s)[None], fs=1000.0, t0=0.0,
                         channels=montage.standard_montage(3))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            d = ica.fit_infomax(ep, n_components=3, seed=seed)
        if ica.amari_distance(a, d.mixing) < 0.05:
            hits += 1
    assert hits >= 18, f"only {hits}/20 mixtures recovered"
    assert time.perf_counter() - t0 < 30.0


def test_component_classifier_injected_classes():
    """Injected eye / line 50 & 60 Hz / channel-noise / muscle-band components
    all labeled correctly across 10 seeds; < 10 s."""
    t0 = time.perf_counter()
    fs = 1000.0
    n_ch = 30
    chs = montage.standard_montage(n_ch)
    frontal = montage.frontal_mask(chs)

    def component_from(cfg, cls):
        """Dominant spatial pattern + time course of one simulated artifact."""
        _, truth = sim.simulate(cfg)
        c = truth.contributions[cls]
        flat = c.transpose(1, 0, 2).reshape(n_ch, -1)
        u, s, vt = np.linalg.svd(flat, full_matrices=False)
        return s[0] * vt[0], u[:, 0]

    correct = 0
    total = 0
    for seed in range(10):
        cases = []
        base = {k: 0.0 for k in sim.DEFAULT_AMPLITUDES}
        for cls, label, extra in [
            ("ocular", "Eye", {}),
            ("line", "LineNoise", {"line_hz": 50.0}),
            ("line", "LineNoise", {"line_hz": 60.0}),
            ("channel_noise", "ChannelNoise",
             {"channel_noise_factors": tuple([1.0] * (n_ch - 1) + [12.0])}),
            ("muscle", "Muscle", {}),
        ]:
            amps = dict(base)
            amps[cls] = sim.DEFAULT_AMPLITUDES[cls]
            cfg = sim.SimConfig(seed=seed, n_trials=4, n_channels=n_ch,
                                amplitudes=amps, **extra)
            cases.append((cfg, cls, label))
        for cfg, cls, label in cases:
            act, topo = component_from(cfg, cls)
            feat = ica.features_from_component(act, topo, fs, frontal)
            got = ica.classify(feat).label
            total += 1
            correct += got == label
    assert correct == total, f"{correct}/{total} component labels correct"
    assert time.perf_counter() - t0 < 10.0


def test_ssp_burst_suppression_and_idempotency():
    """Fixed-topography 5-10 ms muscle burst: window RMS error reduced >= 90%,
    projector idempotent to 1e-10; < 5 s."""
    t0 = time.perf_counter()
    r = np.random.default_rng(1)
    fs = 1000.0
    n_ch, n_trials = 30, 30
    chs = montage.standard_montage(n_ch)
    pos = montage.positions(chs)
    topo = np.exp(-np.linalg.norm(pos - pos[10], axis=1) ** 2 / 0.3)
    tgrid = np.arange(-1.0, 2.0, 1 / fs)
    clean = np.zeros((n_trials, n_ch, len(tgrid)))
    for k in range(n_trials):
        for _ in range(6):
            f = r.uniform(4, 25)
            clean[k] += np.outer(r.normal(size=n_ch),
                                 5 * np.sin(2 * np.pi * f * tgrid + r.uniform(0, np.pi)))
    noisy = clean.copy()
    for k in range(n_trials):
        onset = r.uniform(0.005, 0.008)
        dur = int(round(r.uniform(0.005, 0.010) * fs))
        s0 = int(round((onset - tgrid[0]) * fs))
        carrier = np.sin(2 * np.pi * 280.0 * np.arange(dur) / fs)
        noisy[k, :, s0:s0 + dur] += 100.0 * np.outer(topo, carrier * np.hanning(dur))
    ep = make_epochs(noisy, fs=fs, t0=-1.0, channels=chs)
    ep_clean = make_epochs(clean, fs=fs, t0=-1.0, channels=chs)
    sub = ssp.estimate_artifact_subspace(ep, window=(0.005, 0.050), k=1)
    p = ssp.make_projector(sub, n_ch)
    np.testing.assert_allclose(p.matrix @ p.matrix, p.matrix, atol=1e-10)
    out = ssp.apply_ssp(ep, p)
    win = (ep.times >= 0.005) & (ep.times <= 0.020)
    # by linearity the burst remaining after projection is P @ (noisy - clean)
    burst = ep.data - ep_clean.data
    burst_left = np.einsum("ij,tjk->tik", p.matrix, burst)
    rms_in = np.sqrt(np.mean(burst[..., win] ** 2))
    rms_out = np.sqrt(np.mean(burst_left[..., win] ** 2))
    assert rms_out <= 0.10 * rms_in, f"burst RMS only reduced to {rms_out/rms_in:.3f}x"
    assert time.perf_counter() - t0 < 5.0


def sound_fixture():
    """30-channel, 50-trial simulation with one channel carrying 10x noise."""
    noisy_ch = 7
    factors = tuple(10.0 if i == noisy_ch else 1.0 for i in range(30))
    amps = {k: 0.0 for k in sim.DEFAULT_AMPLITUDES}
    amps["channel_noise"] = sim.DEFAULT_AMPLITUDES["channel_noise"]
    cfg = sim.SimConfig(seed=21, n_trials=50, n_channels=30,
                        amplitudes=amps, channel_noise_factors=factors)
    rec, truth = sim.simulate(cfg)
    ep = epoch(rec, cfg.epoch_window, 1)
    ep, _ = pp.average_reference(ep)
    clean = epoch(truth.clean_recording, cfg.epoch_window, 1)
    clean, _ = pp.average_reference(clean)
    return ep, clean, noisy_ch


def test_sound_noise_estimation_and_correction():
    """lambda=0.3, 5 iterations: 10x channel has max sigma and > 5x median;
    RMS error vs clean reduced >= 50%; noiseless transparency < 15%;
    compressed == full sigma to 1e-6; < 2 min."""
    t0 = time.perf_counter()
    ep, clean, noisy_ch = sound_fixture()
    lf = sound.build_spherical_leadfield(ep.channels)
    out, res = sound.sound_clean(ep, lf)
    sigma = res.noise.sigma
    assert int(np.argmax(sigma)) == noisy_ch
    assert sigma[noisy_ch] > 5.0 * np.median(sigma)
    err_in = np.sqrt(np.mean((ep.data - clean.data) ** 2))
    err_out = np.sqrt(np.mean((out.data - clean.data) ** 2))
    assert err_out <= 0.5 * err_in, f"RMS error ratio {err_out/err_in:.3f}"
    # transparency on noiseless input: forward-simulate through the same
    # head model, so any change is the operator's doing, not model mismatch
    rng = np.random.default_rng(0)
    b, a = signal.butter(2, 0.2)
    j = signal.filtfilt(b, a, rng.standard_normal((lf.gain.shape[1], 2000)), axis=1)
    y = lf.gain @ j
    y = 7.0 * y / y.std()
    y -= y.mean(axis=0)
    passed, _ = sound.sound_clean(y, lf)
    rel = np.linalg.norm(passed - y) / np.linalg.norm(y)
    assert rel < 0.15, f"noiseless relative change {rel:.3f}"
    # compressed vs full estimation
    good = np.arange(30)
    pooled = ep.data[:, good, :].transpose(1, 0, 2).reshape(30, -1)
    full = sound.sound_estimate_noise(pooled, lf).sigma
    comp = sound.sound_estimate_noise(sound.compress_for_estimation(pooled, 30), lf).sigma
    np.testing.assert_allclose(comp, full, rtol=1e-6)
    assert time.perf_counter() - t0 < 120.0


def test_scale_invariance():
    """x10 input: SOUND output x10, normalized sigma / ICA labels / SSP
    projector unchanged to < 1e-8 relative."""
    ep, _, _ = sound_fixture()
    scaled = ep.with_data(10.0 * ep.data)
    lf = sound.build_spherical_leadfield(ep.channels)
    out1, res1 = sound.sound_clean(ep, lf)
    out10, res10 = sound.sound_clean(scaled, lf)
    np.testing.assert_allclose(out10.data, 10.0 * out1.data, rtol=1e-8)
    np.testing.assert_allclose(res10.noise.sigma, res1.noise.sigma, rtol=1e-8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d1 = ica.fit_infomax(ep, n_components=10, seed=0)
        d10 = ica.fit_infomax(scaled, n_components=10, seed=0)
        l1, _ = ica.classify_all(d1, ep)
        l10, _ = ica.classify_all(d10, scaled)
    assert [x.label for x in l1] == [x.label for x in l10]
    p1 = ssp.make_projector(ssp.estimate_artifact_subspace(ep, k=2), 30).matrix
    p10 = ssp.make_projector(ssp.estimate_artifact_subspace(scaled, k=2), 30).matrix
    np.testing.assert_allclose(np.abs(p10), np.abs(p1), atol=1e-8)


def test_beta_rebound_detection():
    """Injected 15-30 Hz rebound at +0.3 s: score >= 2 dB above the rebound-free
    control; localization within +/- 0.1 s and +/- 5 Hz; < 1 min."""
    t0 = time.perf_counter()
    maps = {}
    for rebound in (True, False):
        amps = {k: 0.0 for k in sim.DEFAULT_AMPLITUDES}
        cfg = sim.SimConfig(seed=33, n_trials=40, beta_rebound=rebound, amplitudes=amps)
        _, truth = sim.simulate(cfg)
        ep = epoch(truth.clean_recording, cfg.epoch_window, 1)
        ep, _ = pp.average_reference(ep)
        maps[rebound] = tfr.morlet_tfr(ep)
    s_on = tfr.beta_rebound_score(maps[True])
    s_off = tfr.beta_rebound_score(maps[False])
    assert s_on >= s_off + 2.0, f"rebound {s_on:.2f} dB vs control {s_off:.2f} dB"
    diff = np.where(maps[True].valid & maps[False].valid,
                    maps[True].power - maps[False].power, -np.inf)
    fi, ti = np.unravel_index(np.argmax(diff), diff.shape)
    assert abs(maps[True].freqs[fi] - 21.0) <= 5.0
    assert abs(maps[True].times[ti] - 0.3) <= 0.1
    assert time.perf_counter() - t0 < 60.0


def test_end_to_end_pipeline_snr_and_reproducibility(tmp_path):
    """Default pipeline on the default simulation: >= 6 dB SNR improvement
    (oracle-scored), identical stage hashes across two runs; < 5 min."""
    t0 = time.perf_counter()
    _cli("simulate", "--seed", 7, "--out", tmp_path / "ds")
    for run in (1, 2):
        _cli("pipeline", "--in", tmp_path / "ds",
             "--out", tmp_path / f"run{run}", "--seed", 7)
    h = []
    for run in (1, 2):
        m = json.loads((tmp_path / f"run{run}" / "manifest.json").read_text())
        h.append([s.get("output-hash") for s in m["stages"]])
    assert h[0] == h[1], "stage hashes differ between identical runs"
    r = _cli("score", "--in", tmp_path / "run1" / "04_sound", "--truth", tmp_path / "ds")
    score = json.loads(r.stdout)
    assert score["snr_improvement_db"] >= 6.0, \
        f"SNR improvement {score['snr_improvement_db']:.2f} dB"
    assert time.perf_counter() - t0 < 300.0
