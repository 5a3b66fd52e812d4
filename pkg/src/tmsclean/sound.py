"""Spherical-head lead field and the iterative SOUND cleaning algorithm.

SOUND estimates a per-channel noise level by leave-one-out cross-validated
minimum-norm prediction, then builds a Wiener-style channel operator that
shrinks each channel toward what the other channels (through the forward
model) say it should be.  Noise estimation runs on an SVD-compressed copy
of the data (the estimates depend only on the channel Gram matrix); the
operator is applied to the full data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import montage as _montage
from ._sound_kernels import loo_sweep
from .core import ChannelOperator, EpochSet, Recording, good_eeg_mask
from .errors import ConfigError, DataError, NumericalError

DEFAULT_LAMBDA = 0.3
DEFAULT_ITERATIONS = 5
DEFAULT_N_SOURCES = 200
DEFAULT_RADII_RATIO = 0.8
DEFAULT_COMPRESS_RANK = 15000
_LEGENDRE_TERMS = 200


@dataclass(frozen=True)
class LeadField:
    """Sensor gains for 3 orthogonal unit dipoles per source."""

    gain: np.ndarray  # channels x (3 * n_sources)
    source_positions: np.ndarray  # n_sources x 3, inside unit sphere
    referenced: bool

    def __post_init__(self):
        g = np.asarray(self.gain, dtype=float)
        if not np.all(np.isfinite(g)):
            raise DataError("non-finite-gain", "lead field has non-finite entries")
        if np.any(np.linalg.norm(g, axis=1) == 0):
            raise DataError("zero-row", "lead field has an all-zero sensor row")
        object.__setattr__(self, "gain", g)

    @property
    def n_channels(self) -> int:
        return self.gain.shape[0]


@dataclass(frozen=True)
class NoiseEstimate:
    sigma: np.ndarray  # per-channel noise SD, min-normalized to 1
    iterations_run: int
    convergence_trace: np.ndarray  # max relative sigma change per sweep
    # per-channel noise SD relative to the overall data RMS, from a
    # structured-plus-diagonal covariance fit; this is what the correction
    # operator regularizes with, so noiseless forward data passes through
    # almost unchanged while genuinely noisy channels are suppressed.
    # Invariant to input scaling and covariance-preserving compression.
    sigma_rel: np.ndarray | None = None

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=float)
        if np.any(s <= 0):
            raise DataError("bad-sigma", "noise SDs must be positive")
        object.__setattr__(self, "sigma", s)
        if self.sigma_rel is not None:
            object.__setattr__(self, "sigma_rel", np.asarray(self.sigma_rel, dtype=float))


@dataclass(frozen=True)
class SoundResult:
    operator: ChannelOperator
    noise: NoiseEstimate
    lam: float
    compressed_rank: int
    good_idx: np.ndarray


def _sphere_dipole_potential(elec: np.ndarray, srcs: np.ndarray, n_terms: int = _LEGENDRE_TERMS) -> np.ndarray:
    """Surface potential of unit dipoles in a homogeneous unit sphere.

    Legendre expansion of the interior Neumann solution; returns
    (n_elec, n_src, 3) with one entry per Cartesian dipole component.
    Conductivity and radius are 1 (the scale is arbitrary but consistent).
    """
    n_e = elec.shape[0]
    n_s = srcs.shape[0]
    v = elec / np.linalg.norm(elec, axis=1, keepdims=True)  # field directions
    b = np.linalg.norm(srcs, axis=1)
    if np.any(b >= 1.0) or np.any(b <= 0.0):
        raise ConfigError("bad-sources", "sources must be strictly inside the sphere (and off-center)")
    u = srcs / b[:, None]
    cosg = np.clip(v @ u.T, -1.0, 1.0)  # n_e x n_s

    # recurrences for P_n and P_n' over all electrode/source pairs
    p_nm1 = np.ones_like(cosg)
    p_n = cosg.copy()
    dp_nm1 = np.zeros_like(cosg)
    dp_n = np.ones_like(cosg)
    f = b[None, :]  # (b / R)^(n-1) factors accumulate below

    pu = np.zeros((n_e, n_s))  # coefficient of (p . u)
    pv = np.zeros((n_e, n_s))  # coefficient of (p . v)
    fpow = np.ones_like(cosg)  # f^(n-1)
    for n in range(1, n_terms + 1):
        if n > 1:
            p_np1 = ((2 * n - 1) * cosg * p_n - (n - 1) * p_nm1) / n
            dp_np1 = dp_nm1 + (2 * n - 1) * p_n
            p_nm1, p_n = p_n, p_np1
            dp_nm1, dp_n = dp_n, dp_np1
            fpow = fpow * f
        c = (2 * n + 1) / n * fpow
        pu += c * (n * p_n - cosg * dp_n)
        pv += c * dp_n
    scale = 1.0 / (4.0 * np.pi)
    out = np.empty((n_e, n_s, 3))
    for a in range(3):
        out[:, :, a] = scale * (pu * u[None, :, a] + pv * v[:, a, None])
    return out


def fibonacci_shell(n: int, radius: float) -> np.ndarray:
    """Quasi-uniform points on a sphere of the given radius."""
    i = np.arange(n, dtype=float)
    golden = (1 + 5**0.5) / 2
    z = 1 - (2 * i + 1) / n
    theta = 2 * np.pi * i / golden
    r_xy = np.sqrt(np.maximum(0.0, 1 - z**2))
    pts = np.stack([r_xy * np.cos(theta), r_xy * np.sin(theta), z], axis=1)
    return radius * pts


def build_spherical_leadfield(
    channels,
    n_sources: int = DEFAULT_N_SOURCES,
    radii_ratio: float = DEFAULT_RADII_RATIO,
) -> LeadField:
    """Homogeneous-sphere gains for the good eeg channels of a montage."""
    if not 0 < radii_ratio < 1:
        raise ConfigError("bad-radius", "radii_ratio must be in (0, 1)")
    good = [c for c in channels if c.kind == "eeg" and not c.bad]
    if any(c.position is None for c in good):
        raise DataError("missing-positions", "lead field needs electrode positions")
    elec = _montage.positions(good)
    srcs = fibonacci_shell(n_sources, radii_ratio)
    pot = _sphere_dipole_potential(elec, srcs)
    gain = pot.reshape(elec.shape[0], 3 * n_sources)
    gain = gain - gain.mean(axis=0, keepdims=True)  # common-average reference
    return LeadField(gain=gain, source_positions=srcs, referenced=True)


def compress_for_estimation(y: np.ndarray, rank: int = DEFAULT_COMPRESS_RANK) -> np.ndarray:
    """Channel-covariance-preserving SVD compression of the time axis."""
    y = np.asarray(y, dtype=float)
    n, t = y.shape
    if t <= rank:
        return y.copy()
    u, s, _ = np.linalg.svd(y, full_matrices=False)
    r = min(rank, int(np.sum(s > 0)))
    return u[:, :r] * s[:r]


_OPERATOR_NOISE_GAIN = 2.0


def _operator_noise_levels(y: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Per-channel noise SD from a structured-plus-diagonal covariance fit.

    The empirical channel covariance is modeled as s*G + diag(d): the
    forward-model Gram G explains the source-driven part, the diagonal d
    the channel-specific noise.  s is fitted on the off-diagonal entries
    only, which channel noise cannot reach, so noiseless forward data
    yields d ~ 0 and the correction operator stays close to identity.
    The fixed gain compensates for diagonal source power that the
    single-scale Gram fit absorbs.
    """
    c = y @ y.T / y.shape[1]
    off = ~np.eye(g.shape[0], dtype=bool)
    denom = float(np.sum(g[off] ** 2))
    s = float(np.sum(c[off] * g[off]) / denom) if denom > 0 else 0.0
    d = np.clip(np.diag(c) - s * np.diag(g), 0.0, None)
    return _OPERATOR_NOISE_GAIN * np.sqrt(d)


def sound_estimate_noise(
    y: np.ndarray,
    leadfield: LeadField,
    lam: float = DEFAULT_LAMBDA,
    iterations: int = DEFAULT_ITERATIONS,
) -> NoiseEstimate:
    """Iterative leave-one-out noise-SD estimation (min-normalized)."""
    if lam <= 0:
        raise ConfigError("bad-lambda", "lambda must be positive")
    if iterations < 1:
        raise ConfigError("bad-iterations", "need at least one iteration")
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise DataError("non-finite-samples", "SOUND input has non-finite samples")
    if y.shape[0] != leadfield.n_channels:
        raise DataError("dimension-mismatch", "data rows must match lead field rows")
    g = leadfield.gain @ leadfield.gain.T
    sigma = np.ones(y.shape[0])
    trace = []
    raw = sigma
    for _ in range(iterations):
        raw = loo_sweep(np.ascontiguousarray(g), np.ascontiguousarray(y), sigma, float(lam))
        if not np.all(np.isfinite(raw)) or np.any(raw <= 0):
            raise NumericalError("sound-singular", "degenerate leave-one-out solve")
        new = raw / raw.min()
        trace.append(float(np.max(np.abs(new - sigma) / sigma)))
        sigma = new
    data_rms = float(np.sqrt(np.mean(y**2)))
    return NoiseEstimate(
        sigma=sigma, iterations_run=iterations, convergence_trace=np.asarray(trace),
        sigma_rel=_operator_noise_levels(y, g) / data_rms if data_rms > 0 else sigma,
    )


def sound_operator(leadfield: LeadField, noise: NoiseEstimate, lam: float = DEFAULT_LAMBDA) -> ChannelOperator:
    """W = G (G + lam * tr(G)/n * diag(sigma^2))^(-1) with G = L L^T."""
    g = leadfield.gain @ leadfield.gain.T
    n = g.shape[0]
    if noise.sigma.shape != (n,):
        raise DataError("dimension-mismatch", "sigma length must match channels")
    sig = noise.sigma_rel if noise.sigma_rel is not None else noise.sigma
    reg = lam * np.trace(g) / n
    w = g @ np.linalg.inv(g + reg * np.diag(sig**2))
    return ChannelOperator(matrix=w, kind="sound-correction")


def _check_avg_referenced(y: np.ndarray):
    rms = np.sqrt(np.mean(y**2))
    if rms > 0 and np.abs(y.mean(axis=0)).max() > 1e-6 * max(rms, 1.0):
        raise DataError("not-referenced", "SOUND input must be average-referenced")


def sound_clean(
    x,
    leadfield: LeadField,
    lam: float = DEFAULT_LAMBDA,
    iterations: int = DEFAULT_ITERATIONS,
    compress_rank: int = DEFAULT_COMPRESS_RANK,
):
    """Estimate noise on compressed data, build W once, apply to all data.

    Accepts a Recording, an EpochSet (good trials pooled for estimation,
    W applied per trial), or a bare channels x samples array.  Returns
    (cleaned same-type, SoundResult).
    """
    if isinstance(x, EpochSet):
        good_idx = np.flatnonzero(good_eeg_mask(x.channels))
        keep = ~np.asarray(x.rejected)
        pooled = x.data[keep][:, good_idx, :].transpose(1, 0, 2).reshape(len(good_idx), -1)
    elif isinstance(x, Recording):
        good_idx = np.flatnonzero(good_eeg_mask(x.channels))
        pooled = x.data[good_idx]
    else:
        pooled = np.asarray(x, dtype=float)
        good_idx = np.arange(pooled.shape[0])
    _check_avg_referenced(pooled)

    z = compress_for_estimation(pooled, compress_rank)
    noise = sound_estimate_noise(z, leadfield, lam, iterations)
    op = sound_operator(leadfield, noise, lam)
    result = SoundResult(
        operator=op, noise=noise, lam=float(lam),
        compressed_rank=z.shape[1], good_idx=good_idx,
    )
    w = op.matrix
    if isinstance(x, EpochSet):
        data = x.data.copy()
        data[:, good_idx, :] = np.einsum("ij,tjs->tis", w, x.data[:, good_idx, :])
        return x.with_data(data), result
    if isinstance(x, Recording):
        data = x.data.copy()
        data[good_idx] = w @ x.data[good_idx]
        return x.with_data(data), result
    return w @ pooled, result
