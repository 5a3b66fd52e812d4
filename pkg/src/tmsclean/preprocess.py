"""Sample-level preprocessing: pulse excision, bad-channel detection,
band-pass FIR filtering, downsampling, amplitude rejection, pseudo-epoching
and common-average referencing.

The recipe order used by the pipeline: excise pulse -> bad channels ->
filter -> downsample -> reject -> epoch -> average reference.  Excision
runs before filtering so the pulse/step transients cannot ring through the
band-pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .core import ChannelOperator, EpochSet, Recording, good_eeg_mask
from .errors import ConfigError, DataError

DEFAULT_EXCISE_WINDOW = (-0.002, 0.010)  # s around the pulse


@dataclass(frozen=True)
class FirFilter:
    """Linear-phase windowed-sinc band-pass."""

    taps: np.ndarray
    fs: float
    band: tuple[float, float]

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=float)
        if taps.size % 2 == 0:
            raise ConfigError("even-taps", "FIR tap count must be odd")
        object.__setattr__(self, "taps", taps)

    def gain_at(self, freqs_hz) -> np.ndarray:
        """Single-pass magnitude response at the given frequencies."""
        w = 2 * np.pi * np.atleast_1d(np.asarray(freqs_hz, dtype=float)) / self.fs
        _, h = signal.freqz(self.taps, worN=w)
        return np.abs(h)


@dataclass(frozen=True)
class RejectionReport:
    bad_channels: list[tuple[int, float]]  # (index, sample SD)
    rejected_trials: list[tuple[int, float]]  # (index, peak |µV|)
    threshold_uv: float
    bad_channel_sd: float | None = None


def design_fir(
    fs: float,
    hp: float,
    lp: float,
    transition: float | tuple[float, float] = (1.0, 5.0),
    max_taps: int = 60001,
) -> FirFilter:
    """Hamming-windowed sinc band-pass with per-edge transition half-widths.

    The magnitude is >= 0.99 inside [hp + t_lo, lp - t_hi] and <= 0.01
    outside [hp - t_lo, lp + t_hi].  Built as a cascade of a spectrally
    inverted low-pass (exact DC null) and a low-pass.
    """
    if not (0 < hp < lp < fs / 2):
        raise ConfigError("bad-band", f"need 0 < hp < lp < fs/2, got {hp}, {lp}, fs {fs}")
    t_lo, t_hi = (transition, transition) if np.isscalar(transition) else transition
    if t_lo <= 0 or t_hi <= 0 or hp - t_lo < 0 or lp + t_hi >= fs / 2:
        raise ConfigError("bad-transition", "transition widths infeasible for this band")

    def _numtaps(width_hz: float) -> int:
        n = int(np.ceil(3.3 * fs / width_hz))
        return n + 1 if n % 2 == 0 else n

    n_hp = _numtaps(2 * t_lo)
    n_lp = _numtaps(2 * t_hi)
    if n_hp + n_lp - 1 > max_taps:
        raise ConfigError("tap-budget", f"{n_hp + n_lp - 1} taps exceed budget {max_taps}")
    lp_at_hp = signal.firwin(n_hp, hp, fs=fs, window="hamming")
    hp_taps = -lp_at_hp
    hp_taps[n_hp // 2] += 1.0  # spectral inversion: H(0) = 0 exactly
    lp_taps = signal.firwin(n_lp, lp, fs=fs, window="hamming")
    taps = np.convolve(hp_taps, lp_taps)
    f = FirFilter(taps=taps, fs=fs, band=(hp, lp))
    mid_gain = float(f.gain_at((hp + lp) / 2)[0])
    if not 0.99 <= mid_gain <= 1.01:
        raise ConfigError("bad-design", f"mid-band gain {mid_gain:.4f} out of tolerance")
    return f


def filter_zero_phase(rec: Recording, f: FirFilter) -> Recording:
    """Forward-backward FIR application with reflection padding."""
    if abs(f.fs - rec.fs) > 1e-9:
        raise ConfigError("fs-mismatch", f"filter designed at {f.fs} Hz, data at {rec.fs} Hz")
    n = rec.n_samples
    ntaps = len(f.taps)
    if n < 3 * ntaps:
        raise DataError("too-short", f"recording ({n} samples) shorter than 3x taps ({ntaps})")
    out = signal.filtfilt(f.taps, [1.0], rec.data, axis=1, padtype="even", padlen=ntaps)
    return rec.with_data(out, lowpass_hz=f.band[1])


def downsample(rec: Recording, target_fs: float) -> Recording:
    """Integer-ratio decimation with event index remapping."""
    ratio = rec.fs / target_fs
    if abs(ratio - round(ratio)) > 1e-9:
        raise ConfigError("non-integer-ratio", f"fs {rec.fs} not a multiple of {target_fs}")
    k = int(round(ratio))
    if k == 1:
        return rec
    data = rec.data
    lowpass = rec.lowpass_hz
    if lowpass is None or lowpass > target_fs / 2:
        # metadata says not yet band-limited: apply an internal anti-alias LP
        aa_cut = 0.4 * target_fs
        n = int(np.ceil(3.3 * rec.fs / (0.2 * target_fs)))
        n += 1 - n % 2
        aa = signal.firwin(n, aa_cut, fs=rec.fs, window="hamming")
        data = signal.filtfilt(aa, [1.0], data, axis=1, padtype="even", padlen=min(n, rec.n_samples - 1))
        lowpass = aa_cut
    data = data[:, ::k]
    events = []
    for s, c in rec.events:
        s2 = int(round(s / k))
        events.append((min(s2, data.shape[1] - 1), c))
    return Recording(
        data=data, fs=target_fs, channels=list(rec.channels), events=events, lowpass_hz=lowpass
    )


def detect_bad_channels(rec: Recording, n_sd: float = 2.0) -> set[int]:
    """Channels whose sample SD falls outside mean(SD) +/- n_sd * SD(SD)."""
    eeg = [i for i, c in enumerate(rec.channels) if c.kind == "eeg"]
    if len(eeg) < 3:
        raise DataError("too-few-channels", "need >= 3 eeg channels")
    sds = rec.data[eeg].std(axis=1, ddof=0)
    mu, disp = sds.mean(), sds.std(ddof=0)
    bad = {eeg[j] for j in range(len(eeg)) if abs(sds[j] - mu) > n_sd * disp}
    return bad


def mark_bad(rec: Recording, bad: set[int]) -> Recording:
    from dataclasses import replace as _replace

    channels = [
        _replace(c, bad=True) if i in bad else c for i, c in enumerate(rec.channels)
    ]
    return rec.with_channels(channels)


def excise_pulse(epochs: EpochSet, window: tuple[float, float] = DEFAULT_EXCISE_WINDOW) -> EpochSet:
    """Replace the pulse window by cubic interpolation per trial and channel.

    The interpolant is a cubic Hermite through two boundary samples on each
    side, so constants and ramps pass through unchanged.
    """
    t_a, t_b = window
    if not t_a < 0 < t_b:
        raise ConfigError("bad-window", "excision window must straddle 0")
    times = epochs.times
    if t_a < times[0] + 2 / epochs.fs or t_b > times[-1] - 2 / epochs.fs:
        raise ConfigError("bad-window", "excision window wider than epoch")
    data = epochs.data.copy()
    _excise_inplace(data, times, epochs.fs, t_a, t_b)
    return epochs.with_data(data)


def excise_pulse_recording(
    rec: Recording, window: tuple[float, float] = DEFAULT_EXCISE_WINDOW, code: int | None = None
) -> Recording:
    """Same excision applied around every event on the continuous recording."""
    t_a, t_b = window
    if not t_a < 0 < t_b:
        raise ConfigError("bad-window", "excision window must straddle 0")
    data = rec.data.copy()
    times = np.arange(rec.n_samples) / rec.fs
    for s, c in rec.events:
        if code is not None and c != code:
            continue
        t_ev = s / rec.fs
        lo, hi = t_ev + t_a, t_ev + t_b
        if lo < 2 / rec.fs or hi > times[-1] - 2 / rec.fs:
            continue
        _excise_inplace(data[None, ...], times, rec.fs, lo, hi)
    return rec.with_data(data)


def _excise_inplace(data: np.ndarray, times: np.ndarray, fs: float, t_a: float, t_b: float):
    """Cubic interpolation across [t_a, t_b]; data is (trials, ch, samples)."""
    inside = (times >= t_a) & (times <= t_b)
    idx = np.flatnonzero(inside)
    if idx.size == 0:
        return
    i0, i1 = idx[0], idx[-1]
    # anchor on two samples each side; slopes from one-sided differences
    xl, xr = times[i0 - 1], times[i1 + 1]
    yl = data[..., i0 - 1]
    yr = data[..., i1 + 1]
    sl = (data[..., i0 - 1] - data[..., i0 - 2]) * fs
    sr = (data[..., i1 + 2] - data[..., i1 + 1]) * fs
    h = xr - xl
    t = (times[idx] - xl) / h  # in (0, 1)
    h00 = 2 * t**3 - 3 * t**2 + 1
    h10 = t**3 - 2 * t**2 + t
    h01 = -2 * t**3 + 3 * t**2
    h11 = t**3 - t**2
    data[..., idx] = (
        yl[..., None] * h00
        + (h * sl)[..., None] * h10
        + yr[..., None] * h01
        + (h * sr)[..., None] * h11
    )


def reject_amplitude(epochs: EpochSet, limit_uv: float) -> tuple[EpochSet, RejectionReport]:
    """Flag trials with any |sample| above limit on a good channel."""
    if limit_uv <= 0:
        raise ConfigError("bad-limit", "amplitude limit must be positive")
    good = good_eeg_mask(epochs.channels)
    peaks = np.abs(epochs.data[:, good, :]).max(axis=(1, 2)) if good.any() else np.zeros(
        epochs.n_trials
    )
    flags = peaks > limit_uv
    rejected = np.asarray(epochs.rejected) | flags
    report = RejectionReport(
        bad_channels=[(i, float(epochs.data[:, i, :].std())) for i, c in enumerate(epochs.channels) if c.bad],
        rejected_trials=[(int(i), float(peaks[i])) for i in np.flatnonzero(flags)],
        threshold_uv=float(limit_uv),
    )
    return epochs.with_data(epochs.data, rejected=rejected), report


def pseudo_epoch(rec: Recording, length_s: float) -> EpochSet:
    """Tile the recording into consecutive fixed-length windows."""
    n_win = length_s * rec.fs
    if abs(n_win - round(n_win)) > 1e-9:
        raise ConfigError("bad-length", f"{length_s}s is not an integer sample count at {rec.fs} Hz")
    n_win = int(round(n_win))
    n_ep = rec.n_samples // n_win
    if n_ep == 0:
        raise DataError("too-short", "recording shorter than one pseudo-epoch")
    data = rec.data[:, : n_ep * n_win].reshape(rec.n_channels, n_ep, n_win)
    return EpochSet(
        data=np.transpose(data, (1, 0, 2)),
        fs=rec.fs,
        t0=0.0,
        channels=list(rec.channels),
    )


def average_reference(x):
    """Subtract the per-sample mean over good channels from every channel.

    Returns (re-referenced data of the same type, the averaging operator).
    """
    channels = x.channels
    good = good_eeg_mask(channels)
    if good.sum() < 2:
        raise DataError("too-few-channels", "average reference needs >= 2 good channels")
    n = len(channels)
    op = np.eye(n) - np.outer(np.ones(n), good / good.sum())
    operator = ChannelOperator(matrix=op, kind="average-reference")
    return operator.apply(x), operator
