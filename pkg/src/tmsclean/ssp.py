"""Signal-space projection of TMS-evoked muscle artifacts, with optional
source-informed reconstruction (SIR) through a lead field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as _signal

from .core import ChannelOperator, EpochSet, good_eeg_mask
from .errors import ConfigError, DataError

DEFAULT_WINDOW = (0.005, 0.050)  # s, muscle-burst estimation window
DEFAULT_HIGHPASS = 30.0  # Hz


@dataclass(frozen=True)
class ArtifactSubspace:
    basis: np.ndarray  # good-channels x k, orthonormal
    k: int
    source_window: tuple[float, float]
    highpass_hz: float
    good_idx: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if self.k:
            err = np.max(np.abs(b.T @ b - np.eye(self.k)))
            if err >= 1e-10:
                raise DataError("not-orthonormal", f"subspace basis not orthonormal ({err:.2e})")
        object.__setattr__(self, "basis", b)


def estimate_artifact_subspace(
    epochs: EpochSet,
    window: tuple[float, float] = DEFAULT_WINDOW,
    highpass: float = DEFAULT_HIGHPASS,
    k: int = 3,
) -> ArtifactSubspace:
    """Top-k spatial directions of the high-passed post-pulse window."""
    good_idx = np.flatnonzero(good_eeg_mask(epochs.channels))
    if k >= len(good_idx):
        raise ConfigError("bad-k", f"k = {k} must be below the good-channel count")
    times = epochs.times
    if window[0] < times[0] or window[1] > times[-1]:
        raise ConfigError("bad-window", "estimation window outside the epoch")
    if k == 0:
        return ArtifactSubspace(
            basis=np.zeros((len(good_idx), 0)), k=0, source_window=window,
            highpass_hz=highpass, good_idx=good_idx,
        )
    keep = ~np.asarray(epochs.rejected)
    x = epochs.data[keep][:, good_idx, :]
    if highpass > 0:
        ntaps = min(int(np.ceil(3.3 * epochs.fs / 10.0)) | 1, (epochs.n_samples - 1) // 3 | 1)
        hp = _signal.firwin(ntaps, highpass, fs=epochs.fs, pass_zero=False, window="hamming")
        x = _signal.filtfilt(hp, [1.0], x, axis=2, padtype="even", padlen=ntaps)
    sel = (times >= window[0]) & (times <= window[1])
    pooled = x[:, :, sel].transpose(1, 0, 2).reshape(len(good_idx), -1)
    u, s, _ = np.linalg.svd(pooled, full_matrices=False)
    if np.sum(s > s[0] * 1e-12) < k:
        raise DataError("rank-deficient", f"window matrix rank below k = {k}")
    return ArtifactSubspace(
        basis=u[:, :k], k=k, source_window=window, highpass_hz=highpass, good_idx=good_idx
    )


def make_projector(s: ArtifactSubspace, n_channels: int | None = None) -> ChannelOperator:
    """P = I - B B^T on good channels, identity elsewhere."""
    n = int(n_channels) if n_channels is not None else int(s.good_idx.max()) + 1
    p = np.eye(n)
    if s.k:
        sub = np.eye(len(s.good_idx)) - s.basis @ s.basis.T
        p[np.ix_(s.good_idx, s.good_idx)] = sub
    return ChannelOperator(matrix=p, kind="ssp-projector")


def apply_ssp(epochs: EpochSet, p: ChannelOperator, k: int | None = None) -> EpochSet:
    """Left-multiply every trial by the projector; record the rank loss."""
    if p.matrix.shape[0] != epochs.n_channels:
        raise DataError("dimension-mismatch", "projector does not match the montage")
    deficit = k if k is not None else epochs.n_channels - int(round(np.trace(p.matrix)))
    out = p.apply(epochs)
    return out.with_data(out.data, rank_deficit=epochs.rank_deficit + deficit)


def apply_sir(epochs: EpochSet, p: ChannelOperator, leadfield, lam: float) -> EpochSet:
    """Minimum-norm reconstruction through the unprojected lead field.

    Sources are estimated from the SSP-projected data with the projected
    lead field and Tikhonov scaling lam * tr(PL (PL)^T) / n, then mapped
    back to sensors with the original gains, restoring full rank.
    """
    if lam <= 0:
        raise ConfigError("bad-lambda", "SIR lambda must be positive")
    good_idx = np.flatnonzero(good_eeg_mask(epochs.channels))
    gain = leadfield.gain
    if gain.shape[0] != len(good_idx):
        raise DataError("dimension-mismatch", "lead field rows must match good channels")
    pg = p.matrix[np.ix_(good_idx, good_idx)]
    pl = pg @ gain
    gram = pl @ pl.T
    n = gram.shape[0]
    reg = lam * np.trace(gram) / n
    inv = np.linalg.inv(gram + reg * np.eye(n))
    # sensor-space form: out = L (PL)^T (PL(PL)^T + reg I)^(-1) P x
    t = gain @ pl.T @ inv @ pg
    data = epochs.data.copy()
    data[:, good_idx, :] = np.einsum("ij,tjs->tis", t, epochs.data[:, good_idx, :])
    return epochs.with_data(data, rank_deficit=0)
