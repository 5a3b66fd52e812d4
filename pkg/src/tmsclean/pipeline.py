"""Pipeline orchestration: stage graph, config parsing, run manifest,
and report emission.

Config files are INI-style: a [pipeline] section naming the ordered
stages, plus one [stage:NAME] section per stage with a `kind` key and the
stage's parameters.  Unknown keys are rejected so a typo cannot silently
fall back to a default.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ica as _ica
from . import preprocess as _pp
from . import sim as _sim
from . import sound as _sound
from . import ssp as _ssp
from . import tfr as _tfr
from .core import (
    EpochSet,
    Recording,
    dataset_hash,
    epoch,
    load_any,
    save_epochs,
)
from .errors import ConfigError, DataError

STAGE_KINDS = ("preprocess", "ica", "ssp", "sound", "tfr")

ALLOWED_KEYS = {
    "preprocess": {
        "kind", "hp_hz", "lp_hz", "target_fs", "reject_uv", "pseudo_epoch_s",
        "excise_window_ms", "bad_channel_sd", "epoch_window_s", "event_code",
    },
    "ica": {"kind", "n_components", "seed", "override"},
    "ssp": {"kind", "k", "window_ms", "highpass_hz", "sir", "sir_lambda", "n_sources"},
    "sound": {"kind", "lambda", "iterations", "n_sources", "compress_rank"},
    "tfr": {"kind", "f_lo", "f_hi", "f_step", "baseline_lo", "baseline_hi", "channels"},
}

DEFAULT_STAGES = [
    ("preprocess", "preprocess", {}),
    ("ica1", "ica", {}),
    ("ica2", "ica", {}),
    ("ssp", "ssp", {}),
    ("sound", "sound", {}),
    ("tfr", "tfr", {}),
]


@dataclass(frozen=True)
class PipelineConfig:
    input_path: str
    out_dir: str
    seed: int = 0
    stages: list = field(default_factory=lambda: list(DEFAULT_STAGES))
    emit_reports: bool = True

    def __post_init__(self):
        names = [s[0] for s in self.stages]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate-stage", "stage names must be unique")
        for name, kind, params in self.stages:
            if kind not in STAGE_KINDS:
                raise ConfigError("bad-stage", f"unknown stage kind {kind!r} ({name})")
            unknown = set(params) - ALLOWED_KEYS[kind]
            if unknown:
                raise ConfigError("unknown-key", f"stage {name}: unknown key(s) {sorted(unknown)}")

    def canonical(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "stages": [[n, k, dict(sorted(p.items()))] for n, k, p in self.stages],
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def load_config(path, input_path: str | None = None, out_dir: str | None = None,
                seed: int | None = None) -> PipelineConfig:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError("missing-config", f"cannot read config {path}")
    if "pipeline" not in cp:
        raise ConfigError("bad-config", "config needs a [pipeline] section")
    pl = cp["pipeline"]
    allowed_pl = {"input", "out", "seed", "stages", "reports"}
    unknown = set(pl) - allowed_pl
    if unknown:
        raise ConfigError("unknown-key", f"[pipeline]: unknown key(s) {sorted(unknown)}")
    stage_names = [s.strip() for s in pl.get("stages", "").split(",") if s.strip()]
    stages = []
    for name in stage_names:
        sect = f"stage:{name}"
        if sect not in cp:
            raise ConfigError("bad-config", f"missing section [{sect}]")
        params = dict(cp[sect])
        kind = params.pop("kind", name)
        stages.append((name, kind, params))
    for sect in cp.sections():
        if sect.startswith("stage:") and sect.split(":", 1)[1] not in stage_names:
            raise ConfigError("bad-config", f"section [{sect}] not listed in stages")
    return PipelineConfig(
        input_path=input_path or pl.get("input", ""),
        out_dir=out_dir or pl.get("out", "out"),
        seed=seed if seed is not None else pl.getint("seed", 0),
        stages=stages or list(DEFAULT_STAGES),
        emit_reports=pl.getboolean("reports", True),
    )


@dataclass
class RunManifest:
    config_hash: str
    input_hash: str
    stages: list = field(default_factory=list)  # per-stage dicts
    reports: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config-hash": self.config_hash,
            "input-hash": self.input_hash,
            "stages": self.stages,
            "reports": self.reports,
        }


# ---------------------------------------------------------------------------
# stage runners


def _f(params, key, default):
    return float(params.get(key, default))


def _i(params, key, default):
    return int(params.get(key, default))


def run_preprocess(rec: Recording, params: dict, seed: int) -> tuple[EpochSet, dict]:
    """The full sample-level recipe on a continuous recording."""
    hp = _f(params, "hp_hz", 1.0)
    lp = _f(params, "lp_hz", 40.0)
    target_fs = _f(params, "target_fs", 250.0)
    reject_uv = _f(params, "reject_uv", 500.0)
    bad_sd = _f(params, "bad_channel_sd", 2.0)
    ex_lo, ex_hi = (
        [1e-3 * float(v) for v in str(params["excise_window_ms"]).split(",")]
        if "excise_window_ms" in params
        else _pp.DEFAULT_EXCISE_WINDOW
    )
    win = (
        tuple(float(v) for v in str(params["epoch_window_s"]).split(","))
        if "epoch_window_s" in params
        else (-1.0, 2.0)
    )
    code = _i(params, "event_code", 1)

    rec = _pp.excise_pulse_recording(rec, (ex_lo, ex_hi), code=code)
    bad = _pp.detect_bad_channels(rec, n_sd=bad_sd)
    rec = _pp.mark_bad(rec, bad)
    f = _pp.design_fir(rec.fs, hp, lp)
    rec = _pp.filter_zero_phase(rec, f)
    rec = _pp.downsample(rec, target_fs)
    ep = epoch(rec, win, code)
    ep, report = _pp.reject_amplitude(ep, reject_uv)
    ep, _ = _pp.average_reference(ep)
    info = {
        "bad-channels": sorted(int(i) for i in bad),
        "rejected-trials": [list(t) for t in report.rejected_trials],
        "dropped-trials": ep.dropped,
    }
    return ep, info


def run_linear_chain(rec: Recording, params: dict, bad: set[int],
                     rejected: np.ndarray | None = None) -> EpochSet:
    """The deterministic linear part of the recipe, for oracle scoring.

    Applies the same excision/filter/downsample/epoch/reference steps to a
    ground-truth recording, reusing the bad-channel set and rejection flags
    found on the real data path.
    """
    hp = _f(params, "hp_hz", 1.0)
    lp = _f(params, "lp_hz", 40.0)
    target_fs = _f(params, "target_fs", 250.0)
    code = _i(params, "event_code", 1)
    win = (
        tuple(float(v) for v in str(params["epoch_window_s"]).split(","))
        if "epoch_window_s" in params
        else (-1.0, 2.0)
    )
    ex = (
        tuple(1e-3 * float(v) for v in str(params["excise_window_ms"]).split(","))
        if "excise_window_ms" in params
        else _pp.DEFAULT_EXCISE_WINDOW
    )
    rec = _pp.excise_pulse_recording(rec, ex, code=code)
    rec = _pp.mark_bad(rec, bad)
    f = _pp.design_fir(rec.fs, hp, lp)
    rec = _pp.filter_zero_phase(rec, f)
    rec = _pp.downsample(rec, target_fs)
    ep = epoch(rec, win, code)
    if rejected is not None:
        ep = ep.with_data(ep.data, rejected=rejected)
    ep, _ = _pp.average_reference(ep)
    return ep


def run_ica(ep: EpochSet, params: dict, seed: int) -> tuple[EpochSet, dict]:
    n_comp = _i(params, "n_components", 15)
    seed = _i(params, "seed", seed)
    override = None
    if "override" in params and str(params["override"]).strip() != "":
        override = [int(v) for v in str(params["override"]).split(",")]
    d = _ica.fit_infomax(ep, n_components=n_comp, seed=seed)
    labels, suggest = _ica.classify_all(d, ep, override=override)
    out = _ica.project_out(ep, d, suggest)
    info = {
        "labels": [lab.label for lab in labels],
        "removed": suggest,
        "converged": d.converged,
        "final-delta": d.final_delta,
    }
    return out, info, d, labels


def run_ssp(ep: EpochSet, params: dict) -> tuple[EpochSet, dict]:
    k = _i(params, "k", 3)
    hp = _f(params, "highpass_hz", _ssp.DEFAULT_HIGHPASS)
    win = (
        tuple(1e-3 * float(v) for v in str(params["window_ms"]).split(","))
        if "window_ms" in params
        else _ssp.DEFAULT_WINDOW
    )
    sub = _ssp.estimate_artifact_subspace(ep, window=win, highpass=hp, k=k)
    proj = _ssp.make_projector(sub, n_channels=ep.n_channels)
    out = _ssp.apply_ssp(ep, proj, k=k)
    info = {"k": k, "window-s": list(win), "highpass-hz": hp}
    if str(params.get("sir", "off")).lower() in ("on", "true", "1"):
        lf = _sound.build_spherical_leadfield(
            ep.channels, n_sources=_i(params, "n_sources", _sound.DEFAULT_N_SOURCES)
        )
        out = _ssp.apply_sir(out, proj, lf, _f(params, "sir_lambda", 0.1))
        info["sir"] = "on"
    return out, info


def run_sound(ep: EpochSet, params: dict) -> tuple[EpochSet, dict]:
    lam = _f(params, "lambda", _sound.DEFAULT_LAMBDA)
    iters = _i(params, "iterations", _sound.DEFAULT_ITERATIONS)
    lf = _sound.build_spherical_leadfield(
        ep.channels, n_sources=_i(params, "n_sources", _sound.DEFAULT_N_SOURCES)
    )
    out, result = _sound.sound_clean(
        ep, lf, lam=lam, iterations=iters,
        compress_rank=_i(params, "compress_rank", _sound.DEFAULT_COMPRESS_RANK),
    )
    info = {
        "lambda": lam,
        "iterations": iters,
        "sigma": [float(s) for s in result.noise.sigma],
        "convergence-trace": [float(v) for v in result.noise.convergence_trace],
        "compressed-rank": result.compressed_rank,
    }
    return out, info


def run_tfr(ep: EpochSet, params: dict, out_dir: Path, name: str) -> dict:
    f_lo = _f(params, "f_lo", 4.0)
    f_hi = _f(params, "f_hi", 40.0)
    f_step = _f(params, "f_step", 1.0)
    baseline = (_f(params, "baseline_lo", -0.9), _f(params, "baseline_hi", -0.1))
    names = (
        [v.strip() for v in str(params["channels"]).split(",")]
        if "channels" in params
        else None
    )
    freqs = np.arange(f_lo, f_hi + f_step / 2, f_step)
    m = _tfr.morlet_tfr(ep, freqs=freqs, baseline_window=baseline, channel_names=names)
    grid_p = out_dir / f"{name}_grid.csv"
    with open(grid_p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz"] + [f"{t:.6f}" for t in m.times])
        for j, fq in enumerate(m.freqs):
            w.writerow([fq] + [f"{v:.6f}" for v in m.power[j]])
    meta_p = out_dir / f"{name}_axes.json"
    meta_p.write_text(
        json.dumps(
            {
                "freqs-hz": [float(v) for v in m.freqs],
                "times-s": [float(v) for v in m.times],
                "baseline-s": list(m.baseline_window),
                "channels": m.channel_names,
                "beta-rebound-db": _tfr.beta_rebound_score(m),
            },
            indent=1,
        )
    )
    return {"grid": str(grid_p), "axes": str(meta_p)}


# ---------------------------------------------------------------------------
# orchestration


def run_pipeline(cfg: PipelineConfig) -> RunManifest:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not cfg.input_path:
        raise ConfigError("bad-config", "no input dataset configured")
    current = load_any(cfg.input_path)
    manifest = RunManifest(
        config_hash=cfg.config_hash(), input_hash=dataset_hash(cfg.input_path)
    )
    for idx, (name, kind, params) in enumerate(cfg.stages):
        t0 = time.perf_counter()
        try:
            extra = {}
            if kind == "preprocess":
                if not isinstance(current, Recording):
                    raise DataError("bad-stage-input", "preprocess needs a recording")
                current, info = run_preprocess(current, params, cfg.seed)
            elif kind == "ica":
                current, info, d, labels = run_ica(current, params, cfg.seed)
                if cfg.emit_reports:
                    extra["report-dir"] = str(
                        emit_component_reports(d, labels, current, out_dir / f"{idx:02d}_{name}_components")
                    )
            elif kind == "ssp":
                current, info = run_ssp(current, params)
            elif kind == "sound":
                current, info = run_sound(current, params)
            elif kind == "tfr":
                info = run_tfr(current, params, out_dir, f"{idx:02d}_{name}")
            else:  # unreachable; PipelineConfig validates kinds
                raise ConfigError("bad-stage", kind)
        except Exception as e:
            # keep partial outputs and a manifest naming the failed stage
            manifest.stages.append({"name": name, "kind": kind, "error": str(e)})
            _write_manifest(manifest, out_dir)
            raise
        entry = {
            "name": name,
            "kind": kind,
            "seconds": round(time.perf_counter() - t0, 3),
            "info": info,
            **extra,
        }
        if kind != "tfr":
            stage_path = out_dir / f"{idx:02d}_{name}"
            save_epochs(current, stage_path)
            entry["output"] = str(stage_path) + ".json"
            entry["output-hash"] = dataset_hash(stage_path)
            if cfg.emit_reports:
                entry["butterfly"] = str(_butterfly_csv(current, out_dir / f"{idx:02d}_{name}_butterfly.csv"))
        manifest.stages.append(entry)
    _write_manifest(manifest, out_dir)
    return manifest


def _write_manifest(manifest: RunManifest, out_dir: Path):
    (out_dir / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=1))


def _butterfly_csv(ep: EpochSet, path: Path) -> Path:
    """Trial-averaged trace per channel (the Fig 5/6/7-style overlay data)."""
    keep = ~np.asarray(ep.rejected)
    mean = ep.data[keep].mean(axis=0) if keep.any() else ep.data.mean(axis=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s"] + [c.name for c in ep.channels])
        for j, t in enumerate(ep.times):
            w.writerow([f"{t:.6f}"] + [f"{v:.6f}" for v in mean[:, j]])
    return path


def emit_component_reports(d, labels, ep: EpochSet, out_dir: Path) -> Path:
    """Per-component numeric artifacts: topography CSV, spectrum CSV, label JSON."""
    from scipy import signal as _sig

    out_dir.mkdir(parents=True, exist_ok=True)
    acts = d.activations(ep)
    ch_names = [ep.channels[i].name for i in d.good_idx]
    for k in range(d.n_components):
        comp_dir = out_dir / f"component_{k:02d}"
        comp_dir.mkdir(exist_ok=True)
        with open(comp_dir / "topography.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["channel", "weight"])
            for name, v in zip(ch_names, d.mixing[:, k]):
                w.writerow([name, f"{v:.8g}"])
        nper = int(round(2.0 * ep.fs))
        f, p = _sig.welch(acts[k], fs=ep.fs, nperseg=min(nper, acts.shape[1]))
        with open(comp_dir / "spectrum.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["freq_hz", "power"])
            for fv, pv in zip(f, p):
                w.writerow([f"{fv:.4f}", f"{pv:.8g}"])
        lab = labels[k]
        (comp_dir / "label.json").write_text(
            json.dumps(
                {
                    "label": lab.label,
                    "scores": lab.scores,
                    "features": {k2: float(v) for k2, v in vars(lab.features).items()},
                },
                indent=1,
            )
        )
    return out_dir


def score_pipeline_output(cleaned: EpochSet, dataset_prefix, pp_params: dict,
                          bad: set[int]) -> _sim.SimScore:
    """Oracle score of a pipeline output against the stored ground truth.

    The clean and noisy truth recordings are pushed through the same
    linear preprocessing chain so the comparison is stage-for-stage fair.
    """
    from .core import load_dataset

    prefix = Path(dataset_prefix)
    if prefix.suffix in (".json", ".f32"):
        prefix = prefix.with_suffix("")
    clean_rec = load_dataset(prefix.parent / (prefix.name + ".clean"))
    noisy_rec = load_dataset(prefix)
    rej = np.asarray(cleaned.rejected)
    clean_ep = run_linear_chain(clean_rec, pp_params, bad, rejected=rej)
    noisy_ep = run_linear_chain(noisy_rec, pp_params, bad, rejected=rej)
    keep = ~rej
    # channels flagged bad carry no signal estimate, so they are excluded
    # from both the input and output error
    good = np.array([i for i in range(len(cleaned.channels)) if i not in bad])
    out = cleaned.data[keep][:, good]
    ref = clean_ep.data[keep][:, good]
    resid_in = noisy_ep.data[keep][:, good] - ref
    return _sim.score(out, ref, {"all": resid_in})
