"""Batch command-line interface.

Subcommands: simulate, preprocess, ica, classify, ssp, sound, tfr,
pipeline, score, report.  Exit codes: 0 success, 2 config error, 3 data
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import ica as _ica
from . import pipeline as _pl
from . import sim as _sim
from . import sound as _sound
from .core import load_any, load_epochs, save_epochs
from .errors import TmscleanError


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", default=None, help="INI config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None, help="numba thread cap")
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tmsclean", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset with ground truth")
    _add_common(p)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--channels", type=int, default=30)
    p.add_argument("--no-rebound", action="store_true")
    p.add_argument("--only", default=None, help="enable only these artifact classes (comma list)")

    for name in ("preprocess", "ica", "ssp", "sound"):
        p = sub.add_parser(name, help=f"run the {name} stage on one dataset")
        _add_common(p)
        p.add_argument("--in", dest="inp", required=True)
        if name == "ica":
            p.add_argument("--override", default=None, help="components to remove (comma list)")
            p.add_argument("--n-components", type=int, default=15)
        if name == "ssp":
            p.add_argument("--ssp-k", type=int, default=3)
            p.add_argument("--ssp-window-ms", default=None)
            p.add_argument("--ssp-highpass-hz", type=float, default=None)
            p.add_argument("--sir", choices=("on", "off"), default="off")
            p.add_argument("--sir-lambda", type=float, default=0.1)
        if name == "sound":
            p.add_argument("--sound-lambda", type=float, default=_sound.DEFAULT_LAMBDA)
            p.add_argument("--sound-iterations", type=int, default=_sound.DEFAULT_ITERATIONS)
            p.add_argument("--sound-sources", type=int, default=_sound.DEFAULT_N_SOURCES)
            p.add_argument("--sound-compress-rank", type=int, default=_sound.DEFAULT_COMPRESS_RANK)

    p = sub.add_parser("classify", help="label ICA components without removing them")
    _add_common(p)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--n-components", type=int, default=15)

    p = sub.add_parser("tfr", help="time-frequency map of an epochs dataset")
    _add_common(p)
    p.add_argument("--in", dest="inp", required=True)

    p = sub.add_parser("pipeline", help="run a configured multi-stage pipeline")
    _add_common(p)
    p.add_argument("--in", dest="inp", default=None)

    p = sub.add_parser("score", help="oracle-score cleaned epochs against ground truth")
    _add_common(p)
    p.add_argument("--in", dest="inp", required=True, help="cleaned epochs dataset")
    p.add_argument("--truth", required=True, help="simulator dataset prefix")

    p = sub.add_parser("report", help="emit reports for a finished pipeline run")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    return ap


def _out_path(args, default: str) -> Path:
    out = Path(args.out) if args.out else Path(default)
    if out.suffix in (".json", ".f32"):
        out = out.with_suffix("")
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _stage_params_from_config(args, kind: str) -> dict:
    if not args.config:
        return {}
    cfg = _pl.load_config(args.config, input_path="-", out_dir="-")
    for _, k, params in cfg.stages:
        if k == kind:
            return params
    return {}


def cmd_simulate(args) -> int:
    seed = args.seed if args.seed is not None else 0
    amplitudes = dict(_sim.DEFAULT_AMPLITUDES)
    if args.only is not None:
        enabled = {v.strip() for v in args.only.split(",") if v.strip()}
        amplitudes = {k: (v if k in enabled else 0.0) for k, v in amplitudes.items()}
    cfg = _sim.SimConfig(
        seed=seed,
        n_trials=args.trials,
        n_channels=args.channels,
        beta_rebound=not args.no_rebound,
        amplitudes=amplitudes,
    )
    rec, truth = _sim.simulate(cfg)
    out = _out_path(args, "simulated")
    from .core import save_dataset

    save_dataset(rec, out)
    _sim.save_truth(truth, out)
    print(f"wrote {out}.json / .f32 (+ ground truth)")
    return 0


def cmd_preprocess(args) -> int:
    rec = load_any(args.inp)
    params = _stage_params_from_config(args, "preprocess")
    ep, info = _pl.run_preprocess(rec, params, args.seed or 0)
    out = _out_path(args, "preprocessed")
    save_epochs(ep, out)
    (out.parent / (out.name + ".report.json")).write_text(json.dumps(info, indent=1))
    print(f"wrote {out}.json / .f32")
    return 0


def cmd_ica(args) -> int:
    ep = load_epochs(args.inp)
    params = _stage_params_from_config(args, "ica")
    params.setdefault("n_components", args.n_components)
    if args.override is not None:
        params["override"] = args.override
    if args.seed is not None:
        params["seed"] = args.seed
    out = _out_path(args, "ica_cleaned")
    cleaned, info, d, labels = _pl.run_ica(ep, params, args.seed or 0)
    save_epochs(cleaned, out)
    _pl.emit_component_reports(d, labels, ep, out.parent / (out.name + "_components"))
    (out.parent / (out.name + ".report.json")).write_text(json.dumps(info, indent=1))
    print(f"wrote {out}.json / .f32; removed components {info['removed']}")
    return 0


def cmd_classify(args) -> int:
    ep = load_epochs(args.inp)
    d = _ica.fit_infomax(ep, n_components=args.n_components, seed=args.seed or 0)
    labels, suggest = _ica.classify_all(d, ep)
    out = _out_path(args, "components")
    _pl.emit_component_reports(d, labels, ep, out)
    print(json.dumps({"labels": [l.label for l in labels], "suggested-reject": suggest}))
    return 0


def cmd_ssp(args) -> int:
    ep = load_epochs(args.inp)
    params = {"k": args.ssp_k, "sir": args.sir, "sir_lambda": args.sir_lambda}
    if args.ssp_window_ms:
        params["window_ms"] = args.ssp_window_ms
    if args.ssp_highpass_hz is not None:
        params["highpass_hz"] = args.ssp_highpass_hz
    cleaned, info = _pl.run_ssp(ep, params)
    out = _out_path(args, "ssp_cleaned")
    save_epochs(cleaned, out)
    (out.parent / (out.name + ".report.json")).write_text(json.dumps(info, indent=1))
    print(f"wrote {out}.json / .f32")
    return 0


def cmd_sound(args) -> int:
    ep = load_epochs(args.inp)
    params = {
        "lambda": args.sound_lambda,
        "iterations": args.sound_iterations,
        "n_sources": args.sound_sources,
        "compress_rank": args.sound_compress_rank,
    }
    cleaned, info = _pl.run_sound(ep, params)
    out = _out_path(args, "sound_cleaned")
    save_epochs(cleaned, out)
    (out.parent / (out.name + ".sound.json")).write_text(json.dumps(info, indent=1))
    np.asarray(info["sigma"], dtype="<f4").tofile(out.parent / (out.name + ".sigma.f32"))
    print(f"wrote {out}.json / .f32")
    return 0


def cmd_tfr(args) -> int:
    ep = load_epochs(args.inp)
    out = _out_path(args, "tfr")
    out.mkdir(parents=True, exist_ok=True)
    files = _pl.run_tfr(ep, {}, out, "tfr")
    print(json.dumps(files))
    return 0


def cmd_pipeline(args) -> int:
    if args.config:
        cfg = _pl.load_config(args.config, input_path=args.inp, out_dir=args.out, seed=args.seed)
    else:
        cfg = _pl.PipelineConfig(
            input_path=args.inp or "", out_dir=args.out or "out",
            seed=args.seed if args.seed is not None else 0,
        )
    manifest = _pl.run_pipeline(cfg)
    print(json.dumps({"config-hash": manifest.config_hash,
                      "stages": [s["name"] for s in manifest.stages]}))
    return 0


def cmd_score(args) -> int:
    ep = load_epochs(args.inp)
    bad = {i for i, c in enumerate(ep.channels) if c.bad}
    result = _pl.score_pipeline_output(ep, args.truth, {}, bad)
    text = json.dumps(result.to_dict(), indent=1)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def cmd_report(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    print(json.dumps({"stages": [s.get("name") for s in manifest.get("stages", [])]}))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None):
        try:
            import numba

            numba.set_num_threads(args.threads)
        except ImportError:
            pass
    handlers = {
        "simulate": cmd_simulate,
        "preprocess": cmd_preprocess,
        "ica": cmd_ica,
        "classify": cmd_classify,
        "ssp": cmd_ssp,
        "sound": cmd_sound,
        "tfr": cmd_tfr,
        "pipeline": cmd_pipeline,
        "score": cmd_score,
        "report": cmd_report,
    }
    try:
        return handlers[args.command](args)
    except TmscleanError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
