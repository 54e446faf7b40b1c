"""POD singular values and pdROM error versus basis size on the monochromatic wave.

Runs the full-order BBM-KdV model once, builds energy-weighted POD bases from
its trajectory and replays the same step schedule with reduced models of
growing size.  Takes a few minutes at the default resolution.

    python demos/pod_error_decay.py [nh]
"""
import sys
import time

import numpy as np

from dwrom import numcore as nc
from dwrom import rom
from dwrom.bbm import bbm_benchmark, build_bbm_problem, simulate_bbm
from dwrom.harness.pipeline import warm_up
from dwrom.timing import CategoryTimer

nh = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
warm_up()
cfg, eta0 = bbm_benchmark("monochromatic", {"nh": nh})
pb = build_bbm_problem(cfg)

timer = CategoryTimer()
fom = simulate_bbm(pb, eta0, n_out=1000, timer=timer)
t_fom = timer.as_dict()["total"]
print(f"full order: {fom.dts.size} steps in {t_fom:.1f} s")

_, sigma = nc.thin_svd(fom.states)
for k in (10, 30, 50, 70):
    print(f"sigma_{k} / sigma_1 = {sigma[k - 1] / sigma[0]:.2e}")

print(" N    error     time ratio")
for n in (10, 20, 30, 40, 50):
    basis = rom.pod_basis(fom.states, n_rb=n, mode="energy", theta=pb.theta)
    ops = rom.build_bbm_reduced(pb, basis)
    t0 = time.perf_counter()
    tr = rom.simulate_pdrom_bbm(ops, pb, eta0, replay=fom)
    elapsed = time.perf_counter() - t0
    err = rom.rom_error(ops.reconstruct(tr.states), fom.states)
    print(f"{n:3d}  {err:.2e}  {elapsed / t_fom:.2f}")
