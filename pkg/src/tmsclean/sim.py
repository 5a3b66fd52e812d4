"""Ground-truth synthetic TMS-EEG generator and oracle scoring.

Every artifact class is generated as its own additive sensor-space stream,
so the emitted recording minus the stored contributions is exactly the
clean brain signal.  Trial-level randomness comes from per-trial RNG
streams derived from (seed, trial index), so results are deterministic
under any parallel generation order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as _signal

from . import montage as _montage
from .core import ChannelInfo, EpochSet, Recording, save_dataset
from .errors import ConfigError, DataError
from .sound import _sphere_dipole_potential

ARTIFACT_CLASSES = (
    "pulse", "step", "muscle", "decay", "recharge",
    "channel_noise", "ocular", "line", "peripheral",
)

DEFAULT_AMPLITUDES = {
    "pulse": 3000.0,  # µV, biphasic 1 ms spike
    "step": 300.0,  # settles within 5-7 ms
    "muscle": 120.0,  # 110-140 Hz burst, 5-10 ms latency
    "decay": 200.0,  # exp decay, onset 10-20 ms, tau 10-100 ms
    "recharge": 50.0,  # stimulator recharge blip
    "channel_noise": 5.0,  # per-channel white noise SD
    "ocular": 150.0,  # blink lobes, frontal
    "line": 20.0,  # 50/60 Hz mains
    "peripheral": 0.0,  # delayed low-amplitude evoked dipole, off by default
}


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    n_trials: int = 50
    fs: float = 1000.0
    epoch_window: tuple[float, float] = (-1.0, 2.0)
    isi_s: float = 3.0
    n_channels: int = 30
    event_code: int = 1
    brain_amplitude_uv: float = 7.0  # TEP scale
    ongoing_amplitude_uv: float = 5.0  # background cortical activity
    beta_rebound: bool = True
    rebound_amplitude_uv: float = 4.0
    rebound_time_s: float = 0.3
    rebound_freq_hz: float = 21.0
    line_hz: float = 50.0
    amplitudes: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_AMPLITUDES))
    channel_noise_factors: tuple[float, ...] | None = None  # per-channel SD multipliers

    def __post_init__(self):
        unknown = set(self.amplitudes) - set(ARTIFACT_CLASSES)
        if unknown:
            raise ConfigError("bad-artifact", f"unknown artifact class(es): {sorted(unknown)}")
        if any(v < 0 for v in self.amplitudes.values()):
            raise ConfigError("bad-amplitude", "artifact amplitudes must be >= 0")
        if self.line_hz >= self.fs / 2:
            raise ConfigError("bad-amplitude", "line frequency above Nyquist")

    def amplitude(self, name: str) -> float:
        return float(self.amplitudes.get(name, 0.0))


@dataclass(frozen=True)
class GroundTruth:
    clean: np.ndarray  # trials x channels x samples
    contributions: dict[str, np.ndarray]  # per enabled artifact class
    source_timecourses: dict[str, np.ndarray]
    clean_recording: Recording
    epoch_window: tuple[float, float]


def _rng(cfg: SimConfig, stream: int) -> np.random.Generator:
    return np.random.default_rng((cfg.seed, stream))


def _trial_rng(cfg: SimConfig, stream: int, trial: int) -> np.random.Generator:
    return np.random.default_rng((cfg.seed, stream, trial))


def _topo_from_point(pos: np.ndarray, center: np.ndarray, width: float) -> np.ndarray:
    d = np.linalg.norm(pos - center[None, :], axis=1)
    t = np.exp(-((d / width) ** 2))
    return t / np.abs(t).max()


def _dipole_topo(pos: np.ndarray, src: np.ndarray, ori: np.ndarray) -> np.ndarray:
    pot = _sphere_dipole_potential(pos, src[None, :])[:, 0, :] @ ori
    pot = pot - pot.mean()
    return pot / np.abs(pot).max()


def simulate(cfg: SimConfig) -> tuple[Recording, GroundTruth]:
    """Build a continuous recording plus exact per-class ground truth."""
    channels = _montage.standard_montage(cfg.n_channels)
    pos = _montage.positions(channels)
    n_ch = len(channels)
    fs = cfg.fs
    pre_s = max(1.5, -cfg.epoch_window[0] + 0.2)
    n_samples = int(round((pre_s + cfg.n_trials * cfg.isi_s + cfg.epoch_window[1]) * fs))
    event_samples = [int(round((pre_s + k * cfg.isi_s) * fs)) for k in range(cfg.n_trials)]
    t_abs = np.arange(n_samples) / fs

    streams: dict[str, np.ndarray] = {}
    sources: dict[str, np.ndarray] = {}

    # --- clean brain signal -------------------------------------------------
    clean = np.zeros((n_ch, n_samples))
    c3 = pos[_names(channels).index("C3")] if "C3" in _names(channels) else pos[0]
    tep_topo = _dipole_topo(pos, 0.8 * c3, _tangent(c3))
    tep_tc = np.zeros(n_samples)
    for k, ev in enumerate(event_samples):
        rng = _trial_rng(cfg, 1, k)
        jitter = 1.0 + 0.1 * rng.standard_normal()
        tep_tc[ev:] += jitter * _tep_waveform(t_abs[ev:] - t_abs[ev], cfg.brain_amplitude_uv)
    clean += tep_topo[:, None] * tep_tc
    sources["tep"] = tep_tc

    # ongoing cortical background: a handful of dipoles with 1/f-ish noise
    rng_bg = _rng(cfg, 2)
    bg_tc = np.zeros((6, n_samples))
    for d in range(6):
        src = 0.75 * _unit(rng_bg.standard_normal(3))
        topo = _dipole_topo(pos, src, _unit(rng_bg.standard_normal(3)))
        wn = rng_bg.standard_normal(n_samples)
        b, a = _signal.butter(2, [2.0, 30.0], btype="band", fs=fs)
        tc = _signal.lfilter(b, a, wn)
        tc += 0.6 * np.sin(2 * np.pi * (9 + d * 0.4) * t_abs + rng_bg.uniform(0, 2 * np.pi))
        tc *= cfg.ongoing_amplitude_uv / max(tc.std(), 1e-12) / np.sqrt(6)
        bg_tc[d] = tc
        clean += topo[:, None] * tc
    sources["background"] = bg_tc

    if cfg.beta_rebound:
        reb_tc = np.zeros(n_samples)
        for k, ev in enumerate(event_samples):
            rng = _trial_rng(cfg, 3, k)
            center = ev + int(round(cfg.rebound_time_s * fs))
            phase = rng.uniform(0, 2 * np.pi)
            tt = (np.arange(n_samples) - center) / fs
            reb_tc += (
                cfg.rebound_amplitude_uv
                * np.exp(-(tt**2) / (2 * 0.12**2))
                * np.cos(2 * np.pi * cfg.rebound_freq_hz * tt + phase)
            )
        clean += tep_topo[:, None] * reb_tc
        sources["rebound"] = reb_tc

    # --- artifact streams ---------------------------------------------------
    def per_event(fn, stream_id: int) -> np.ndarray:
        out = np.zeros((n_ch, n_samples))
        for k, ev in enumerate(event_samples):
            fn(out, ev, _trial_rng(cfg, stream_id, k))
        return out

    if cfg.amplitude("pulse") > 0:
        a = cfg.amplitude("pulse")
        topo = _topo_from_point(pos, c3, 1.2)

        def gen_pulse(out, ev, rng):
            n = int(round(0.001 * fs))
            tt = np.arange(n) / fs
            wave = a * np.sin(2 * np.pi * tt / 0.001) * rng.uniform(0.9, 1.1)
            out[:, ev : ev + n] += topo[:, None] * wave

        streams["pulse"] = per_event(gen_pulse, 10)

    if cfg.amplitude("step") > 0:
        a = cfg.amplitude("step")
        topo = _topo_from_point(pos, c3, 1.5)

        def gen_step(out, ev, rng):
            dur = rng.uniform(0.005, 0.007)
            n = int(round(dur * fs))
            tt = np.arange(n) / fs
            wave = a * np.exp(-tt / (dur / 3.0)) * (1 - tt / dur)  # taper to 0
            out[:, ev : ev + n] += topo[:, None] * wave

        streams["step"] = per_event(gen_step, 11)

    if cfg.amplitude("muscle") > 0:
        a = cfg.amplitude("muscle")
        lateral = pos[_nearest(pos, np.array([0.95, 0.2, 0.1]))]
        topo = _topo_from_point(pos, lateral, 0.7)
        b_m, a_m = _signal.butter(4, [110.0, 140.0], btype="band", fs=fs)

        def gen_muscle(out, ev, rng):
            latency = rng.uniform(0.005, 0.010)
            sigma = 0.015
            n = int(round(0.12 * fs))
            seg = _signal.lfilter(b_m, a_m, rng.standard_normal(n + 200))[200:]
            tt = np.arange(n) / fs  # relative to burst start
            env = np.exp(-((tt - 0.02) ** 2) / (2 * sigma**2))
            wave = seg * env
            wave *= a / max(np.abs(wave).max(), 1e-12)
            start = ev + int(round(latency * fs))
            out[:, start : start + n] += topo[:, None] * wave

        streams["muscle"] = per_event(gen_muscle, 12)

    if cfg.amplitude("decay") > 0:
        a = cfg.amplitude("decay")
        # polarized electrodes sit near the coil and stay fixed for the
        # whole session; amplitude and time constant vary per pulse
        rng_d = _rng(cfg, 13)
        near_coil = np.argsort(np.linalg.norm(pos - c3[None, :], axis=1))[:6]
        decay_idx = rng_d.choice(near_coil, size=3, replace=False)
        decay_sign = rng_d.choice([-1.0, 1.0], size=3)

        def gen_decay(out, ev, rng):
            for idx, sgn in zip(decay_idx, decay_sign):
                onset = rng.uniform(0.010, 0.020)
                tau = rng.uniform(0.010, 0.100)
                amp = a * sgn * rng.uniform(0.5, 1.0)
                start = ev + int(round(onset * fs))
                n = int(round(6 * tau * fs))
                tt = np.arange(n) / fs
                topo = _topo_from_point(pos, pos[idx], 0.35)
                ramp = np.minimum(tt / 0.002, 1.0)
                out[:, start : start + n] += topo[:, None] * (amp * ramp * np.exp(-tt / tau))

        streams["decay"] = per_event(gen_decay, 13)

    if cfg.amplitude("recharge") > 0:
        a = cfg.amplitude("recharge")
        topo = _topo_from_point(pos, np.array([0.0, 0.0, 1.0]), 1.8)

        def gen_recharge(out, ev, rng):
            start = ev + int(round(0.7 * fs))
            n = int(round(0.02 * fs))
            tt = np.arange(n) / fs
            wave = a * np.sin(2 * np.pi * tt / 0.02) * np.exp(-tt / 0.008)
            out[:, start : start + n] += topo[:, None] * wave

        streams["recharge"] = per_event(gen_recharge, 14)

    if cfg.amplitude("channel_noise") > 0:
        base = cfg.amplitude("channel_noise")
        rng = _rng(cfg, 15)
        if cfg.channel_noise_factors is not None:
            if len(cfg.channel_noise_factors) != n_ch:
                raise ConfigError("bad-factors", "channel_noise_factors length mismatch")
            factors = np.asarray(cfg.channel_noise_factors, dtype=float)
        else:
            factors = np.exp(0.6 * rng.standard_normal(n_ch))
        streams["channel_noise"] = (base * factors)[:, None] * rng.standard_normal(
            (n_ch, n_samples)
        )

    if cfg.amplitude("ocular") > 0:
        a = cfg.amplitude("ocular")
        eye_center = np.array([0.0, 1.0, -0.1])
        topo = _topo_from_point(pos, eye_center, 0.8)
        rng = _rng(cfg, 16)
        tc = np.zeros(n_samples)
        t_blink = pre_s / 2
        while t_blink < n_samples / fs - 0.5:
            dur = rng.uniform(0.25, 0.40)
            n = int(round(dur * fs))
            s0 = int(round(t_blink * fs))
            lobe = a * rng.uniform(0.7, 1.0) * np.sin(np.pi * np.arange(n) / n) ** 2
            tc[s0 : s0 + n] += lobe
            t_blink += rng.uniform(2.0, 6.0)
        streams["ocular"] = topo[:, None] * tc
        sources["ocular"] = tc

    if cfg.amplitude("line") > 0:
        a = cfg.amplitude("line")
        rng = _rng(cfg, 17)
        topo = 1.0 + 0.15 * rng.standard_normal(n_ch)
        phase = rng.uniform(0, 2 * np.pi)
        tc = a * np.sin(2 * np.pi * cfg.line_hz * t_abs + phase)
        streams["line"] = topo[:, None] * tc
        sources["line"] = tc

    if cfg.amplitude("peripheral") > 0:
        a = cfg.amplitude("peripheral")
        src = 0.8 * _unit(np.array([0.6, -0.6, 0.4]))
        topo = _dipole_topo(pos, src, _tangent(_unit(src)))

        def gen_periph(out, ev, rng):
            start = ev + int(round(0.02 * fs))
            n = int(round(0.08 * fs))
            tt = np.arange(n) / fs
            wave = a * np.sin(2 * np.pi * 12 * tt) * np.exp(-tt / 0.03)
            out[:, start : start + n] += topo[:, None] * wave

        streams["peripheral"] = per_event(gen_periph, 18)

    noisy = clean + sum(streams.values()) if streams else clean.copy()
    events = [(s, cfg.event_code) for s in event_samples]
    rec = Recording(data=noisy, fs=fs, channels=channels, events=events)
    clean_rec = Recording(data=clean, fs=fs, channels=channels, events=events)

    pre = int(round(-cfg.epoch_window[0] * fs))
    post = int(round(cfg.epoch_window[1] * fs))

    def _cut(x: np.ndarray) -> np.ndarray:
        return np.stack([x[:, s - pre : s + post] for s in event_samples])

    truth = GroundTruth(
        clean=_cut(clean),
        contributions={name: _cut(s) for name, s in streams.items()},
        source_timecourses=sources,
        clean_recording=clean_rec,
        epoch_window=cfg.epoch_window,
    )
    return rec, truth


def _names(channels: list[ChannelInfo]) -> list[str]:
    return [c.name for c in channels]


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _tangent(u: np.ndarray) -> np.ndarray:
    ref = np.array([0.0, 0.0, 1.0]) if abs(u[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    t = np.cross(u, ref)
    return _unit(t)


def _nearest(pos: np.ndarray, target: np.ndarray) -> int:
    return int(np.argmin(np.linalg.norm(pos - target[None, :], axis=1)))


def _tep_waveform(t: np.ndarray, amp: float) -> np.ndarray:
    """TEP-like deflection series, ~amp µV peak, decayed by 400 ms."""
    comps = [(0.015, 0.006, -0.6), (0.030, 0.010, 1.0), (0.045, 0.012, -0.8),
             (0.060, 0.015, 0.7), (0.100, 0.030, -0.9), (0.180, 0.050, 0.4)]
    w = np.zeros_like(t)
    for mu, sig, rel in comps:
        w += rel * np.exp(-((t - mu) ** 2) / (2 * sig**2))
    return amp * w


# ---------------------------------------------------------------------------
# oracle scoring


@dataclass(frozen=True)
class SimScore:
    rms_error_per_channel: np.ndarray
    rms_error: float
    input_rms_error: float
    snr_improvement_db: float
    artifact_residual_energy: dict[str, float]
    artifact_residual_fraction: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "rms_error_per_channel": [float(v) for v in self.rms_error_per_channel],
            "rms_error": self.rms_error,
            "input_rms_error": self.input_rms_error,
            "snr_improvement_db": self.snr_improvement_db,
            "artifact_residual_energy": self.artifact_residual_energy,
            "artifact_residual_fraction": self.artifact_residual_fraction,
        }


def score(cleaned, truth_clean: np.ndarray, contributions: dict[str, np.ndarray] | None = None) -> SimScore:
    """Oracle metrics of cleaned epochs against the known clean signal."""
    data = cleaned.data if isinstance(cleaned, EpochSet) else np.asarray(cleaned, dtype=float)
    if data.shape != truth_clean.shape:
        raise DataError(
            "dimension-mismatch",
            f"cleaned shape {data.shape} != truth shape {truth_clean.shape}",
        )
    contributions = contributions or {}
    noisy = truth_clean + sum(contributions.values()) if contributions else None
    resid = data - truth_clean
    mse_out = float(np.mean(resid**2))
    per_ch = np.sqrt(np.mean(resid**2, axis=(0, 2)))
    if noisy is not None:
        mse_in = float(np.mean((noisy - truth_clean) ** 2))
    else:
        mse_in = mse_out
    if mse_out == 0.0:
        improvement = float("inf") if mse_in > 0 else 0.0
    else:
        improvement = 10.0 * np.log10(max(mse_in, 1e-300) / mse_out)
    energy = {}
    fraction = {}
    for name, c in contributions.items():
        cn = float(np.sqrt(np.sum(c**2)))
        if cn == 0:
            continue
        proj = float(np.sum(resid * c) / cn)
        energy[name] = proj**2
        fraction[name] = proj / cn
    return SimScore(
        rms_error_per_channel=per_ch,
        rms_error=float(np.sqrt(mse_out)),
        input_rms_error=float(np.sqrt(mse_in)),
        snr_improvement_db=float(improvement),
        artifact_residual_energy=energy,
        artifact_residual_fraction=fraction,
    )


# ---------------------------------------------------------------------------
# persistence of ground truth next to the emitted dataset


def save_truth(truth: GroundTruth, prefix) -> None:
    prefix = Path(prefix)
    if prefix.suffix in (".json", ".f32"):
        prefix = prefix.with_suffix("")
    save_dataset(truth.clean_recording, prefix.parent / (prefix.name + ".clean"))
    meta = {
        "epoch-window": list(truth.epoch_window),
        "shape": list(truth.clean.shape),
        "classes": sorted(truth.contributions.keys()),
    }
    (prefix.parent / (prefix.name + ".truth.json")).write_text(json.dumps(meta, indent=1))
    truth.clean.astype("<f4").tofile(prefix.parent / (prefix.name + ".truth.clean.f32"))
    for name, c in truth.contributions.items():
        c.astype("<f4").tofile(prefix.parent / (prefix.name + f".truth.{name}.f32"))


def load_truth_arrays(prefix) -> tuple[np.ndarray, dict[str, np.ndarray], tuple[float, float]]:
    prefix = Path(prefix)
    if prefix.suffix in (".json", ".f32"):
        prefix = prefix.with_suffix("")
    meta_p = prefix.parent / (prefix.name + ".truth.json")
    if not meta_p.exists():
        raise DataError("missing-file", f"no ground truth at {meta_p}")
    meta = json.loads(meta_p.read_text())
    shape = tuple(meta["shape"])
    clean = np.fromfile(prefix.parent / (prefix.name + ".truth.clean.f32"), dtype="<f4")
    clean = clean.reshape(shape).astype(float)
    contribs = {}
    for name in meta["classes"]:
        c = np.fromfile(prefix.parent / (prefix.name + f".truth.{name}.f32"), dtype="<f4")
        contribs[name] = c.reshape(shape).astype(float)
    return clean, contribs, tuple(meta["epoch-window"])
