"""Benchmark the leave-one-out noise-estimation sweep: numba vs pure numpy.

The kernel path is chosen at import time from TMSCLEAN_NUMBA, so each
variant runs in its own subprocess.  Usage:

    python3 benchmarks/bench_sound.py [--channels 30 64] [--samples 5000]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json, sys, time
import numpy as np
from tmsclean import montage, sound
from tmsclean._accel import HAS_NUMBA
from tmsclean._sound_kernels import loo_sweep

n_ch, n_t, repeats = json.loads(sys.argv[1])
chs = montage.standard_montage(n_ch)
lf = sound.build_spherical_leadfield(chs)
g = np.ascontiguousarray(lf.gain @ lf.gain.T)
r = np.random.default_rng(0)
y = np.ascontiguousarray(lf.gain @ r.standard_normal((lf.gain.shape[1], n_t)))
sigma = np.ones(n_ch)

loo_sweep(g, y, sigma, 0.3)  # warm-up (jit compile on the numba path)
t0 = time.perf_counter()
for _ in range(repeats):
    out = loo_sweep(g, y, sigma, 0.3)
dt = (time.perf_counter() - t0) / repeats
print(json.dumps({"numba": HAS_NUMBA, "seconds": dt, "checksum": float(out.sum())}))
"""


def run(numba: bool, n_ch: int, n_t: int, repeats: int) -> dict:
    env = dict(os.environ, TMSCLEAN_NUMBA="1" if numba else "0")
    r = subprocess.run(
        [sys.executable, "-c", _WORKER, json.dumps([n_ch, n_t, repeats])],
        capture_output=True, text=True, env=env, check=True,
    )
    return json.loads(r.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--channels", type=int, nargs="+", default=[16, 30, 64])
    ap.add_argument("--samples", type=int, default=5000)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    print(f"{'channels':>8} {'samples':>8} {'numpy (s)':>10} {'numba (s)':>10} {'speedup':>8}")
    for n_ch in args.channels:
        plain = run(False, n_ch, args.samples, args.repeats)
        jit = run(True, n_ch, args.samples, args.repeats)
        if jit["numba"] is not True:
            raise SystemExit("numba path unavailable; install numba to compare")
        if abs(plain["checksum"] - jit["checksum"]) > 1e-9 * abs(plain["checksum"]):
            raise SystemExit("kernel outputs disagree between paths")
        speed = plain["seconds"] / jit["seconds"]
        print(f"{n_ch:>8} {args.samples:>8} {plain['seconds']:>10.4f} "
              f"{jit['seconds']:>10.4f} {speed:>7.1f}x")


if __name__ == "__main__":
    main()
