"""Extended-Infomax ICA, component removal, and the heuristic
seven-class component classifier (Brain / Eye / Muscle / Heart /
LineNoise / ChannelNoise / Other).

The classifier replaces a trained network with transparent spectral and
topographic rules; thresholds and precedence are module constants so the
CLI report can show exactly why a component was labeled.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from . import montage as _montage
from .core import EpochSet, good_eeg_mask
from .errors import DataError, NumericalError

CLASSES = ("Brain", "Eye", "Muscle", "Heart", "LineNoise", "ChannelNoise", "Other")

# rule precedence when several classes are fully satisfied
PRECEDENCE = ("ChannelNoise", "LineNoise", "Eye", "Heart", "Muscle", "Brain")

# rule thresholds; precedence: ChannelNoise > LineNoise > Eye > Heart >
# Muscle > Brain > Other
THRESHOLDS = {
    "channel_noise_focality": 0.9,
    "line_peak_db": 10.0,
    "eye_frontal_loading": 2.0,
    "eye_low_freq_ratio": 0.6,
    "heart_qrs_periodicity": 0.5,
    "muscle_high_freq_ratio": 0.5,
    "brain_alpha_peak_db": 3.0,
    "brain_slope_db_oct": -3.0,
    "brain_focality": 0.6,
}


@dataclass(frozen=True)
class Decomposition:
    """ICA result on the good channels of a montage."""

    unmixing: np.ndarray  # components x good-channels
    mixing: np.ndarray  # good-channels x components
    pca_whitener: np.ndarray  # components x good-channels
    mean: np.ndarray  # per-good-channel mean removed before fitting
    good_idx: np.ndarray  # indices of good channels in the full montage
    n_components: int
    converged: bool = True
    final_delta: float = 0.0

    def activations(self, epochs: EpochSet) -> np.ndarray:
        """(components, trials*samples) activations of the good trials."""
        x = _concat_good(epochs, self.good_idx)
        return self.unmixing @ (x - self.mean[:, None])

    def activations_3d(self, epochs: EpochSet) -> np.ndarray:
        """(trials, components, samples) on all trials."""
        x = epochs.data[:, self.good_idx, :] - self.mean[None, :, None]
        return np.einsum("kc,tcs->tks", self.unmixing, x)


@dataclass(frozen=True)
class ComponentFeatures:
    spectral_slope: float  # dB/octave over 2-40 Hz
    alpha_peak_db: float
    low_freq_ratio: float
    high_freq_ratio: float
    line_peak_db: float
    focality: float
    frontal_loading: float
    qrs_periodicity: float


@dataclass(frozen=True)
class ComponentLabel:
    label: str
    scores: dict[str, float]
    features: ComponentFeatures

    def __post_init__(self):
        best = max(self.scores.values())
        winners = [c for c in CLASSES if self.scores.get(c, 0.0) == best]
        want = "Other" if ("Other" in winners and len(winners) > 1) else winners[0]
        if want != self.label:
            raise ValueError("label must be the argmax of scores (ties -> Other)")


def _concat_good(epochs: EpochSet, good_idx: np.ndarray) -> np.ndarray:
    keep = ~np.asarray(epochs.rejected)
    x = epochs.data[keep][:, good_idx, :]
    return x.transpose(1, 0, 2).reshape(len(good_idx), -1)


def fit_infomax(epochs: EpochSet, n_components: int = 15, seed: int = 0,
                max_iter: int = 500, tol: float = 1e-7) -> Decomposition:
    """PCA-reduced extended-Infomax ICA, deterministic for a given seed.

    Sub/super-Gaussian source signs are re-estimated from the data every
    iteration, so line-noise (sub-Gaussian) components stay separable.
    """
    good_idx = np.flatnonzero(good_eeg_mask(epochs.channels))
    if n_components > len(good_idx):
        raise DataError("rank-deficient", f"{n_components} components > {len(good_idx)} good channels")
    x = _concat_good(epochs, good_idx)
    n_ch, n_samp = x.shape
    if n_samp < 20 * n_ch**2:
        warnings.warn(
            f"infomax: only {n_samp} samples for {n_ch} channels "
            f"(< 20*ch^2 = {20 * n_ch**2}); decomposition may be unstable"
        )
    mean = x.mean(axis=1)
    xc = x - mean[:, None]

    # PCA whitening to n_components
    cov = (xc @ xc.T) / n_samp
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:n_components]
    evals, evecs = evals[order], evecs[:, order]
    if evals[-1] <= 1e-12 * max(evals[0], 1e-300):
        raise DataError("rank-deficient", "data rank below requested component count")
    whitener = (evecs / np.sqrt(evals)).T  # components x channels
    xw = whitener @ xc

    rng = np.random.default_rng(seed)
    k = n_components
    w = np.eye(k)
    lrate = 0.01 / np.sqrt(n_ch)
    batch = 256
    delta_prev = None
    delta = np.inf
    converged = False
    for _ in range(max_iter):
        w_old = w.copy()
        # sub/super-Gaussian switching from whole-data statistics
        u_all = w @ xw
        kurt_sign = np.sign(
            np.mean(1.0 / np.cosh(u_all) ** 2, axis=1) * np.mean(u_all**2, axis=1)
            - np.mean(u_all * np.tanh(u_all), axis=1)
        )
        kurt_sign[kurt_sign == 0] = 1.0
        perm = rng.permutation(n_samp)
        for start in range(0, n_samp - batch + 1, batch):
            sel = perm[start : start + batch]
            u = w @ xw[:, sel]
            y = np.tanh(u)
            grad = (
                np.eye(k)
                - (kurt_sign[:, None] * y) @ u.T / batch
                - u @ u.T / batch
            ) @ w
            w = w + lrate * grad
            if not np.all(np.isfinite(w)):
                raise NumericalError("ica-diverged", "infomax weights diverged; lower the rate")
        dw = w - w_old
        delta = np.linalg.norm(dw) / max(np.linalg.norm(w_old), 1e-300)
        if delta_prev is not None:
            cosang = np.sum(dw * delta_prev) / max(
                np.linalg.norm(dw) * np.linalg.norm(delta_prev), 1e-300
            )
            if cosang < 0.5:  # angle > 60 deg: anneal
                lrate *= 0.9
        delta_prev = dw
        if delta < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"infomax did not converge (final delta {delta:.2e})")

    unmixing = w @ whitener
    mixing = np.linalg.pinv(unmixing)
    # order components by explained sensor variance, largest first
    act_var = (unmixing @ xc).var(axis=1)
    power = act_var * (mixing**2).sum(axis=0)
    order = np.argsort(power)[::-1]
    unmixing = unmixing[order]
    mixing = mixing[:, order]
    return Decomposition(
        unmixing=unmixing,
        mixing=mixing,
        pca_whitener=whitener,
        mean=mean,
        good_idx=good_idx,
        n_components=n_components,
        converged=converged,
        final_delta=float(delta),
    )


def project_out(epochs: EpochSet, d: Decomposition, remove) -> EpochSet:
    """Subtract the chosen components' sensor-space contribution."""
    remove = sorted(set(int(i) for i in remove))
    if any(i < 0 or i >= d.n_components for i in remove):
        raise DataError("bad-component", f"component index out of range: {remove}")
    if not remove:
        return epochs
    acts = d.activations_3d(epochs)[:, remove, :]
    contrib = np.einsum("ck,tks->tcs", d.mixing[:, remove], acts)
    data = epochs.data.copy()
    data[:, d.good_idx, :] -= contrib
    return epochs.with_data(data)


# ---------------------------------------------------------------------------
# features and classification


def _welch(act: np.ndarray, fs: float) -> tuple[np.ndarray, np.ndarray]:
    nper = int(round(2.0 * fs))
    if act.size < nper:
        raise DataError("too-short", "need at least one 2 s Welch window")
    return signal.welch(act, fs=fs, nperseg=nper, noverlap=nper // 2)


def _db(p: np.ndarray) -> np.ndarray:
    return 10.0 * np.log10(np.maximum(p, 1e-300))


def features_from_component(act: np.ndarray, topo: np.ndarray, fs: float,
                            frontal: np.ndarray) -> ComponentFeatures:
    """Feature vector from one activation time course and scalp pattern."""
    f, p = _welch(act, fs)
    db = _db(p)
    total = p[1:].sum()  # exclude DC
    total = max(total, 1e-300)

    fit_band = (f >= 2) & (f <= min(40.0, fs / 2 - 1e-9)) & (f > 0)
    logf = np.log2(f[fit_band])
    slope, intercept = np.polyfit(logf, db[fit_band], 1)

    alpha = (f >= 8) & (f <= 13)
    if alpha.any():
        fitted = slope * np.log2(f[alpha]) + intercept
        alpha_peak_db = float(max(0.0, np.max(db[alpha] - fitted)))
    else:
        alpha_peak_db = 0.0

    low_freq_ratio = float(p[(f > 0) & (f < 5)].sum() / total)
    high_freq_ratio = float(p[f > 20].sum() / total)

    line_peak_db = 0.0
    for f0 in (50.0, 60.0):
        if f0 >= fs / 2:
            continue
        at = (f >= f0 - 1) & (f <= f0 + 1)
        around = ((f >= f0 - 8) & (f <= f0 - 2)) | ((f >= f0 + 2) & (f <= f0 + 8))
        if at.any() and around.any():
            prom = float(np.max(db[at]) - np.median(db[around]))
            line_peak_db = max(line_peak_db, prom)
    line_peak_db = max(0.0, line_peak_db)

    atopo = np.abs(topo)
    norm = np.linalg.norm(atopo)
    focality = float(atopo.max() / norm) if norm > 0 else 0.0
    overall = atopo.mean()
    frontal_loading = float(atopo[frontal].mean() / overall) if frontal.any() and overall > 0 else 0.0

    # QRS-style periodicity: autocorrelation of the squared activation
    env = act.astype(float) ** 2
    env = env - env.mean()
    nlag = int(1.5 * fs)
    qrs = 0.0
    if env.size > 2 * nlag and env.std() > 0:
        ac = signal.fftconvolve(env, env[::-1])[env.size - 1 :][: nlag + 1]
        ac = ac / ac[0]
        lo, hi = int(0.7 * fs), nlag
        qrs = float(max(0.0, ac[lo : hi + 1].max()))

    return ComponentFeatures(
        spectral_slope=float(slope),
        alpha_peak_db=alpha_peak_db,
        low_freq_ratio=low_freq_ratio,
        high_freq_ratio=high_freq_ratio,
        line_peak_db=line_peak_db,
        focality=focality,
        frontal_loading=frontal_loading,
        qrs_periodicity=qrs,
    )


def compute_features(d: Decomposition, epochs: EpochSet) -> list[ComponentFeatures]:
    acts = d.activations(epochs)
    channels = [epochs.channels[i] for i in d.good_idx]
    frontal = _montage.frontal_mask(channels)
    return [
        features_from_component(acts[k], d.mixing[:, k], epochs.fs, frontal)
        for k in range(d.n_components)
    ]


def _sat(value: float, threshold: float) -> float:
    """Evidence in [0, 1]: 1 once the threshold is reached."""
    if threshold == 0:
        return 1.0 if value >= 0 else 0.0
    return float(np.clip(value / threshold, 0.0, 1.0))


def classify(feat: ComponentFeatures) -> ComponentLabel:
    """Rule-scored label; first fully satisfied rule in precedence wins."""
    t = THRESHOLDS
    evidence = {
        "ChannelNoise": _sat(feat.focality, t["channel_noise_focality"]),
        "LineNoise": _sat(feat.line_peak_db, t["line_peak_db"]),
        "Eye": min(
            _sat(feat.frontal_loading, t["eye_frontal_loading"]),
            _sat(feat.low_freq_ratio, t["eye_low_freq_ratio"]),
        ),
        "Heart": _sat(feat.qrs_periodicity, t["heart_qrs_periodicity"]),
        "Muscle": _sat(feat.high_freq_ratio, t["muscle_high_freq_ratio"]),
        "Brain": min(
            _sat(feat.alpha_peak_db, t["brain_alpha_peak_db"]),
            _sat(-feat.spectral_slope, -t["brain_slope_db_oct"]),
            1.0 if feat.focality < t["brain_focality"] else 0.0,
        ),
        "Other": 0.5,
    }
    scores = {c: 0.9 * evidence[c] for c in CLASSES}
    winner = next((c for c in PRECEDENCE if evidence[c] >= 1.0), "Other")
    scores[winner] = 1.0
    return ComponentLabel(label=winner, scores=scores, features=feat)


def classify_all(
    d: Decomposition, epochs: EpochSet, override: list[int] | None = None
) -> tuple[list[ComponentLabel], list[int]]:
    """Label every component; suggest rejecting clear artifact classes.

    An explicit override list (the offline stand-in for visual inspection)
    replaces the suggestion verbatim.
    """
    labels = [classify(f) for f in compute_features(d, epochs)]
    if override is not None:
        return labels, sorted(set(int(i) for i in override))
    suggest = [k for k, lab in enumerate(labels) if lab.label not in ("Brain", "Other")]
    return labels, suggest


def amari_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Permutation/scale-invariant discrepancy between mixing matrices."""
    p = np.abs(np.linalg.pinv(a) @ b)
    m = p.shape[0]
    rows = (p / p.max(axis=1, keepdims=True)).sum(axis=1) - 1
    cols = (p / p.max(axis=0, keepdims=True)).sum(axis=0) - 1
    return float((rows.sum() + cols.sum()) / (2 * m * (m - 1)))
