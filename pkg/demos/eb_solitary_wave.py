"""Solitary wave over a flat bottom and over a submerged bar with the EB model.

Measures the crest speed on the flat bottom against the traveling-wave
celerity, then runs the bar case through the offline/online pipeline with
both reduced variants.

    python demos/eb_solitary_wave.py
"""
import numpy as np

from dwrom.eb import EbModel, eb_benchmark, simulate_eb, solitary_celerity
from dwrom.harness import pipeline
from dwrom.harness.config import RunConfig

c = solitary_celerity(0.2, 1.0, 9.81)
cfg, s0 = eb_benchmark("solitary_bar", {"bar": None, "x_center": -5.0, "t_end": 10.0 / c})
tr = simulate_eb(EbModel(cfg), s0, n_out=11)
n = cfg.grid.nh
crest = cfg.grid.x[np.argmax(tr.states[:n], axis=0)]
speed = np.polyfit(tr.times, crest, 1)[0]
print(f"celerity {c:.4f} m/s, measured crest speed {speed:.4f} m/s")
print(f"amplitude {tr.states[:n, 0].max():.4f} -> {tr.states[:n, -1].max():.4f}")

for variant in ("psi", "fused"):
    run = RunConfig(model="eb", benchmark="solitary_bar", overrides={"nh": 1000},
                    reduction="pdrom", variant=variant, n_rb=40,
                    snapshots={"n_snapshots": 200}, n_out=7)
    rep, _ = pipeline.run(run)
    print(f"{variant:5s} pdROM: error {rep.errors['l2_final']:.2e}, "
          f"time ratio {rep.ratios['time_ratio']:.2f}")
