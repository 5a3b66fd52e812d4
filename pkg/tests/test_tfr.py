"""Morlet time-frequency maps and the beta-rebound metric."""
import numpy as np
import pytest

from tmsclean import montage, tfr
from tmsclean.errors import ConfigError

from conftest import make_epochs


def test_wavelet_is_l2_normalized():
    for f0, nc in [(5.0, 3.0), (21.0, 10.5), (40.0, 20.0)]:
        w = tfr._morlet(250.0, f0, nc)
        assert np.linalg.norm(w) == pytest.approx(1.0, rel=1e-9)
        assert len(w) % 2 == 1


def test_wavelet_center_frequency():
    fs = 250.0
    w = tfr._morlet(fs, 21.0, 10.5)
    spec = np.abs(np.fft.fft(w, n=8192))
    f = np.fft.fftfreq(8192, 1 / fs)
    spec, f = spec[: 4096], f[: 4096]
    assert f[int(np.argmax(spec))] == pytest.approx(21.0, abs=0.2)


def tone_epochs(f0=21.0, fs=250.0, t_on=0.3, t_off=0.9, amp=4.0, seed=0, n_trials=12):
    r = np.random.default_rng(seed)
    chs = montage.standard_montage(8)
    t = np.arange(-1.0, 2.0, 1 / fs)
    data = r.standard_normal((n_trials, 8, len(t)))
    burst = np.where((t >= t_on) & (t <= t_off),
                     np.sin(2 * np.pi * f0 * t), 0.0)
    for k in range(n_trials):
        data[k] += amp * burst[None, :]
    return make_epochs(data, fs=fs, t0=-1.0, channels=chs)


def test_tone_localized_in_frequency_and_time():
    ep = tone_epochs()
    m = tfr.morlet_tfr(ep, channel_names=[c.name for c in ep.channels])
    masked = np.where(m.valid, m.power, -np.inf)
    fi, ti = np.unravel_index(np.argmax(masked), masked.shape)
    assert abs(m.freqs[fi] - 21.0) <= 2.0
    assert 0.3 <= m.times[ti] <= 0.9


def test_baseline_db_is_zero_mean():
    ep = tone_epochs(amp=0.0)
    m = tfr.morlet_tfr(ep, channel_names=[c.name for c in ep.channels])
    bsel = (m.times >= -0.9) & (m.times <= -0.1)
    base = np.where(m.valid[:, bsel], m.power[:, bsel], np.nan)
    # dB of the mean baseline power: per-frequency mean near 0 dB
    assert np.nanmax(np.abs(10 * np.log10(np.nanmean(10 ** (base / 10), axis=1)))) < 0.3


def test_edge_mask_excludes_wavelet_tails():
    ep = tone_epochs()
    m = tfr.morlet_tfr(ep, channel_names=[c.name for c in ep.channels])
    assert not m.valid[0, 0] and not m.valid[0, -1]  # lowest freq, widest wavelet
    assert m.valid[:, m.power.shape[1] // 2].all()
    # lower frequencies have wider invalid zones
    assert m.valid[0].sum() <= m.valid[-1].sum()


def test_rebound_score_detects_burst():
    with_burst = tfr.morlet_tfr(tone_epochs(amp=4.0),
                                channel_names=["Fz", "F3"])
    without = tfr.morlet_tfr(tone_epochs(amp=0.0),
                             channel_names=["Fz", "F3"])
    s1 = tfr.beta_rebound_score(with_burst)
    s0 = tfr.beta_rebound_score(without)
    assert s1 > s0 + 2.0


def test_rejects_out_of_range_frequencies():
    ep = tone_epochs()
    with pytest.raises(ConfigError):
        tfr.morlet_tfr(ep, freqs=np.array([10.0, 200.0]))
    with pytest.raises(ConfigError):
        tfr.morlet_tfr(ep, freqs=np.array([0.0, 10.0]))


def test_rebound_window_validation():
    ep = tone_epochs()
    m = tfr.morlet_tfr(ep, channel_names=["Fz"])
    with pytest.raises(ConfigError):
        tfr.beta_rebound_score(m, band=(200.0, 300.0))
