"""Morlet-wavelet time-frequency maps and beta-rebound quantification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .core import EpochSet, good_eeg_mask
from .errors import ConfigError, DataError

DEFAULT_FREQS = np.arange(4.0, 41.0, 1.0)
DEFAULT_BASELINE = (-0.9, -0.1)
BETA_BAND = (15.0, 30.0)
REBOUND_WINDOW = (0.2, 0.8)


def default_n_cycles(freqs: np.ndarray) -> np.ndarray:
    return np.maximum(3.0, np.asarray(freqs, dtype=float) / 2.0)


@dataclass(frozen=True)
class TimeFrequencyMap:
    power: np.ndarray  # freqs x times, dB vs baseline
    freqs: np.ndarray
    times: np.ndarray
    valid: np.ndarray  # freqs x times, False inside the wavelet edge zone
    baseline_window: tuple[float, float]
    channel_names: list[str]

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        if np.any(np.diff(f) <= 0):
            raise ConfigError("bad-freqs", "frequencies must be strictly increasing")
        if not np.all(np.isfinite(np.asarray(self.power)[np.asarray(self.valid)])):
            raise DataError("non-finite-samples", "non-finite power inside the valid zone")


def _morlet(fs: float, f0: float, n_cycles: float) -> np.ndarray:
    """L2-normalized complex Morlet wavelet."""
    sigma_t = n_cycles / (2 * np.pi * f0)
    half = int(np.ceil(3.5 * sigma_t * fs))
    t = np.arange(-half, half + 1) / fs
    w = np.exp(2j * np.pi * f0 * t) * np.exp(-(t**2) / (2 * sigma_t**2))
    return w / np.linalg.norm(w)


def morlet_tfr(
    epochs: EpochSet,
    freqs: np.ndarray = DEFAULT_FREQS,
    n_cycles: np.ndarray | None = None,
    baseline_window: tuple[float, float] = DEFAULT_BASELINE,
    channel_names: list[str] | None = None,
) -> TimeFrequencyMap:
    """Trial-averaged wavelet power of the selected channels, in dB
    relative to the mean baseline power per frequency.

    Channel default: C3 and its neighbors (the stimulated motor patch),
    falling back to all good channels when none of those labels exist.
    """
    freqs = np.asarray(freqs, dtype=float)
    n_cycles = default_n_cycles(freqs) if n_cycles is None else np.broadcast_to(
        np.asarray(n_cycles, dtype=float), freqs.shape
    )
    if np.any(freqs <= 0) or np.any(freqs >= epochs.fs / 2):
        raise ConfigError("bad-freqs", "frequencies must lie in (0, fs/2)")
    good = good_eeg_mask(epochs.channels)
    if channel_names is None:
        motor = {"C3", "FC5", "FC1", "CP5", "CP1", "Cz"}
        sel = [i for i, c in enumerate(epochs.channels) if good[i] and c.name in motor]
        if not sel:
            sel = list(np.flatnonzero(good))
    else:
        by_name = {c.name: i for i, c in enumerate(epochs.channels)}
        sel = [by_name[n] for n in channel_names]
    keep = ~np.asarray(epochs.rejected)
    data = epochs.data[keep][:, sel, :]
    n_trials, n_ch, n_samp = data.shape
    times = epochs.times

    power = np.zeros((len(freqs), n_samp))
    valid = np.ones((len(freqs), n_samp), dtype=bool)
    flat = data.reshape(n_trials * n_ch, n_samp)
    for j, (f0, nc) in enumerate(zip(freqs, n_cycles)):
        w = _morlet(epochs.fs, f0, nc)
        if len(w) > n_samp:
            raise DataError("too-short", f"wavelet at {f0} Hz longer than the epoch")
        resp = signal.fftconvolve(flat, w[None, :], mode="same", axes=1)
        power[j] = np.mean(np.abs(resp) ** 2, axis=0)
        edge = len(w) // 2
        valid[j, :edge] = False
        if edge:
            valid[j, -edge:] = False

    b_lo, b_hi = baseline_window
    bsel = (times >= b_lo) & (times <= b_hi)
    db = np.empty_like(power)
    for j in range(len(freqs)):
        base_sel = bsel & valid[j]
        if not base_sel.any():
            base_sel = valid[j]
        base = power[j, base_sel].mean()
        db[j] = 10 * np.log10(np.maximum(power[j], 1e-300) / max(base, 1e-300))
    return TimeFrequencyMap(
        power=db,
        freqs=freqs,
        times=times,
        valid=valid,
        baseline_window=baseline_window,
        channel_names=[epochs.channels[i].name for i in sel],
    )


def beta_rebound_score(
    tfr: TimeFrequencyMap,
    band: tuple[float, float] = BETA_BAND,
    window: tuple[float, float] = REBOUND_WINDOW,
) -> float:
    """Mean dB in band x window minus mean dB in the same band pre-stimulus."""
    fsel = (tfr.freqs >= band[0]) & (tfr.freqs <= band[1])
    tsel = (tfr.times >= window[0]) & (tfr.times <= window[1])
    pre = tfr.times < 0
    if not fsel.any() or not tsel.any():
        raise ConfigError("bad-window", "band/window outside the map")
    cell = tfr.valid[np.ix_(fsel, tsel)]
    pre_cell = tfr.valid[np.ix_(fsel, pre)]
    if not cell.any() or not pre_cell.any():
        raise DataError("empty-cell", "edge exclusion removed the whole cell")
    post = tfr.power[np.ix_(fsel, tsel)][cell].mean()
    base = tfr.power[np.ix_(fsel, pre)][pre_cell].mean()
    return float(post - base)
