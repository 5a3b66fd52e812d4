"""One-off: run the full default pipeline on the default simulation and score it."""
import shutil
import sys
import time
from pathlib import Path

from tmsclean import core, pipeline as pl, sim

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 7
work = Path(f"/tmp/score_run_{seed}")
if work.exists():
    shutil.rmtree(work)
work.mkdir(parents=True)

cfg = sim.SimConfig(seed=seed)
rec, truth = sim.simulate(cfg)
prefix = work / "ds"
core.save_dataset(rec, prefix)
sim.save_truth(truth, prefix)

out = work / "out"
t0 = time.time()
pcfg = pl.PipelineConfig(input_path=str(prefix), out_dir=str(out), seed=seed)
manifest = pl.run_pipeline(pcfg)
wall = time.time() - t0

bad = set(manifest.stages[0]["info"]["bad-channels"])
for idx, st in enumerate(manifest.stages):
    name = st["name"]
    if st["kind"] == "tfr":
        continue
    ep = core.load_epochs(out / f"{idx:02d}_{name}")
    sc = pl.score_pipeline_output(ep, prefix, {}, bad)
    print(f"{name:14s} snr_improvement_db={sc.snr_improvement_db:6.2f} "
          f"rms_err={sc.rms_error:6.3f}")
print(f"wall={wall:.1f}s")
