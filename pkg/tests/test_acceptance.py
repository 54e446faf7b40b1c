"""Acceptance checks at full benchmark scale.

Each test prints one ``PASS`` / ``FAIL`` line and then asserts the criterion.
The monochromatic full-order run (Nh = 2000, 1000 snapshots) is shared by
module-scoped fixtures.
"""
import time

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from dwrom import eim, rom
from dwrom import numcore as nc
from dwrom.bbm import (BbmState, bbm_benchmark, bbm_energy, bbm_step, build_bbm_problem,
                       simulate_bbm)
from dwrom.eb import (EbConfig, EbModel, assemble_eb_matrices, eb_benchmark, eb_dt, eb_step,
                      simulate_eb, solitary_celerity)
from dwrom.harness import pipeline
from dwrom.harness.config import RunConfig
from dwrom.timing import CategoryTimer


@pytest.fixture
def verdict(capsys):
    def report(n, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {detail}")
        return ok
    return report


@pytest.fixture(scope="module")
def mono():
    pipeline.warm_up()
    cfg, eta0 = bbm_benchmark("monochromatic")
    pb = build_bbm_problem(cfg)
    timer = CategoryTimer()
    t0 = time.perf_counter()
    fom = simulate_bbm(pb, eta0, n_out=1000, timer=timer)
    wall = time.perf_counter() - t0
    return {"pb": pb, "eta0": eta0, "fom": fom, "timer": timer.as_dict(), "wall": wall}


@pytest.fixture(scope="module")
def mono_svd(mono):
    u, s = nc.thin_svd(mono["fom"].states)
    return u, s


# ---------------------------------------------------------------------------------------
def test_c01_tridiagonal_solvers_match_dense_elimination(verdict):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(1000):
        n = int(np.exp(rng.uniform(np.log(5), np.log(4000))))
        periodic = k % 2 == 1
        lower, upper = rng.uniform(-1, 1, n - 1), rng.uniform(-1, 1, n - 1)
        diag = (2.5 + rng.uniform(0, 1, n)) * rng.choice([-1.0, 1.0], n)
        rhs = rng.standard_normal(n)
        if periodic:
            alpha, beta = rng.uniform(-1, 1, 2)
            m = nc.CyclicTriDiagMatrix(nc.TriDiagMatrix(lower, diag, upper), beta, alpha)
            x = nc.cyclic_solve(m, rhs)
            a = sp.diags([lower, diag, upper], [-1, 0, 1], format="lil")
            a[0, n - 1] += alpha
            a[n - 1, 0] += beta
            ref = spla.spsolve(a.tocsc(), rhs)
        else:
            m = nc.TriDiagMatrix(lower, diag, upper)
            x = nc.thomas_solve(m, rhs)
            ab = np.zeros((3, n))
            ab[0, 1:], ab[1], ab[2, :-1] = upper, diag, lower
            ref = sla.solve_banded((1, 1), ab, rhs)
        worst = max(worst, np.linalg.norm(x - ref) / np.linalg.norm(ref))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 30.0
    verdict(1, ok, f"max relative error {worst:.2e} over 1000 systems in {elapsed:.1f} s")
    assert ok


def test_c02_pod_projection_error_identity(verdict, mono, mono_svd):
    s = mono["fom"].states
    assert s.shape == (2000, 1000)
    sigma = mono_svd[1]
    rel = []
    for n in (10, 30, 50):
        v = rom.pod_basis(s, n_rb=n).v
        lhs = np.linalg.norm(s - v @ (v.T @ s), "fro") ** 2
        rhs = np.sum(sigma[n:] ** 2)
        rel.append(abs(lhs - rhs) / rhs)
    ok = max(rel) <= 1e-8 and mono["wall"] < 120.0
    verdict(2, ok, f"relative mismatch {max(rel):.2e} for N in (10, 30, 50); "
                   f"full-order run {mono['wall']:.1f} s")
    assert ok


def test_c03_singular_value_decay(verdict, mono_svd):
    sigma = mono_svd[1]
    ratio = sigma[49] / sigma[0]
    ok = ratio <= 1e-3
    verdict(3, ok, f"sigma_50 / sigma_1 = {ratio:.3e}")
    assert ok


def test_c04_fom_self_convergence(verdict, mono):
    t0 = time.perf_counter()
    finals = {2000: mono["fom"].states[:, -1]}
    for nh in (4000, 1000, 500):
        cfg, eta0 = bbm_benchmark("monochromatic", {"nh": nh})
        finals[nh] = simulate_bbm(build_bbm_problem(cfg), eta0).states[:, -1]
    ref = finals[4000]
    sizes = (500, 1000, 2000)
    errs = [np.linalg.norm(finals[n] - ref[::4000 // n]) / np.linalg.norm(ref[::4000 // n])
            for n in sizes]
    order = -np.polyfit(np.log(sizes), np.log(errs), 1)[0]
    elapsed = time.perf_counter() - t0 + mono["wall"]
    ok = order >= 1.8 and elapsed < 600.0
    verdict(4, ok, f"observed order {order:.2f} (errors {', '.join(f'{e:.2e}' for e in errs)}) "
                   f"in {elapsed:.0f} s")
    assert ok


def test_c05_energy_drift(verdict, mono):
    pb, states = mono["pb"], mono["fom"].states
    e0, e1 = bbm_energy(pb, states[:, 0]), bbm_energy(pb, states[:, -1])
    drift = abs(e1 - e0) / e0
    ok = drift <= 1e-3
    verdict(5, ok, f"relative energy drift {drift:.3e} over t in [0, 200]")
    assert ok


def test_c06_full_basis_exactness(verdict):
    worst = {}
    cfg, eta0 = bbm_benchmark("monochromatic", {"nh": 200})
    pb = build_bbm_problem(cfg)
    eye = rom.identity_basis(200, "energy", pb.theta)
    ops, phi = rom.build_bbm_reduced(pb, eye), rom.build_phi_only(pb, eye)
    a, u, eta = ops.project_state(eta0), eta0.copy(), eta0.copy()
    dt = 0.02
    w_pd = w_phi = 0.0
    for _ in range(100):
        eta = bbm_step(pb, BbmState(eta), dt).eta
        a = rom.pdrom_bbm_step(ops, pb, eye, a, dt)
        u = rom.phi_only_step(pb, eye, u, dt, ops=phi)
        scale = np.linalg.norm(eta)
        w_pd = max(w_pd, np.linalg.norm(ops.reconstruct(a) - eta) / scale)
        w_phi = max(w_phi, np.linalg.norm(u - eta) / scale)
    worst["bbm pdrom"], worst["bbm phi_only"] = w_pd, w_phi

    ecfg, s0 = eb_benchmark("solitary_bar", {"nh": 600})
    model = EbModel(ecfg)
    eye = rom.identity_basis(600)
    eops = rom.build_eb_reduced(model, eye, eye)
    dt = eb_dt(ecfg, s0)
    s_hat, s = s0, s0
    w_eb = 0.0
    for _ in range(100):
        s = eb_step(ecfg, model.matrices, s, dt, model=model)
        s_hat = rom.pdrom_eb_step(eops, ecfg, None, s_hat, dt, "psi", model)
        ref = np.concatenate((s.eta, s.q))
        w_eb = max(w_eb, np.linalg.norm(np.concatenate((s_hat.eta, s_hat.q)) - ref)
                   / np.linalg.norm(ref))
    worst["eb pdrom"] = w_eb
    ok = max(worst.values()) <= 1e-12
    verdict(6, ok, "worst per-step relative deviation over 100 steps: "
                   + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


def test_c07_pdrom_error_decay(verdict, mono):
    pb, eta0, fom = mono["pb"], mono["eta0"], mono["fom"]
    t0 = time.perf_counter()
    errs = []
    for n in range(10, 101, 10):
        basis = rom.pod_basis(fom.states, n_rb=n, mode="energy", theta=pb.theta)
        ops = rom.build_bbm_reduced(pb, basis)
        tr = rom.simulate_pdrom_bbm(ops, pb, eta0, replay=fom)
        errs.append(rom.rom_error(ops.reconstruct(tr.states), fom.states))
    elapsed = time.perf_counter() - t0 + mono["wall"]
    trend = all(b <= 2.0 * a for a, b in zip(errs, errs[1:]))
    ok = trend and errs[-1] <= 1e-3 and elapsed < 900.0
    verdict(7, ok, "errors at N = 10..100: " + " ".join(f"{e:.1e}" for e in errs)
                   + f" ({elapsed:.0f} s)")
    assert ok


def test_c08_eimrom_consistency(verdict):
    cfg, eta0 = bbm_benchmark("monochromatic", {"nh": 400, "t_end": 40.0})
    pb = build_bbm_problem(cfg)
    fom = simulate_bbm(pb, eta0, n_out=201)
    basis = rom.pod_basis(fom.states, n_rb=20, mode="energy", theta=pb.theta)
    ops = rom.build_bbm_reduced(pb, basis)
    log = []
    ref = rom.simulate_pdrom_bbm(ops, pb, eta0, replay=fom, flux_log=log)
    fl = np.column_stack(log)
    rank = np.linalg.matrix_rank(fl)
    space = eim.eim_greedy(fl, n_max=rank, grid=pb.grid)
    tr = eim.simulate_eimrom_bbm(eim.build_eim_bbm(pb, ops, space), pb, eta0, replay=fom)
    dev = np.linalg.norm(tr.states - ref.states) / np.linalg.norm(ref.states)

    run_cfg = RunConfig(model="bbm", benchmark="monochromatic", reduction="eimrom",
                        overrides={"nh": 500, "t_end": 50.0}, tol_pod=1e-4, tol_eim=1e-3,
                        snapshots={"n_snapshots": 101, "n_draws": 10}, seed=1)
    rep, traj = pipeline.run(run_cfg)
    if rep.status == "ok":
        flagged = np.isfinite(rep.errors["l2_final"]) and np.all(np.isfinite(traj.states))
        outcome = f"completed, error {rep.errors['l2_final']:.2e}"
    else:
        flagged = rep.failure["reason"] == "EIM instability"
        outcome = f"aborted: {rep.failure['reason']}"
    ok = dev <= 1e-8 and flagged
    verdict(8, ok, f"n_eim = rank = {rank}: deviation from pdROM {dev:.1e}; "
                   f"tol_eim = 10 tol_pod run {outcome}")
    assert ok


def test_c09_eb_solitary_celerity(verdict):
    c = solitary_celerity(0.2, 1.0, 9.81)
    cfg, s0 = eb_benchmark("solitary_bar", {"bar": None, "x_center": -5.0, "t_end": 10.0 / c})
    t0 = time.perf_counter()
    tr = simulate_eb(EbModel(cfg), s0, n_out=21)
    elapsed = time.perf_counter() - t0
    x, dx, n = cfg.grid.x, cfg.grid.dx, cfg.grid.nh
    pos, amp = [], []
    for k in range(tr.states.shape[1]):
        e = tr.states[:n, k]
        j = int(np.argmax(e))
        a, b, d = e[j - 1], e[j], e[j + 1]
        shift = 0.5 * (a - d) / (a - 2 * b + d)
        pos.append(x[j] + shift * dx)
        amp.append(b - 0.25 * (a - d) * shift)
    speed = np.polyfit(tr.times, pos, 1)[0]
    speed_err = abs(speed / c - 1.0)
    decay = 1.0 - amp[-1] / amp[0]
    ok = abs(c - 3.4407) < 5e-5 and speed_err <= 0.01 and decay <= 0.02 and elapsed < 300.0
    verdict(9, ok, f"crest speed {speed:.5f} vs C = {c:.5f} (rel {speed_err:.1e}); "
                   f"amplitude change {-decay:+.1e}; travel {pos[-1] - pos[0]:.3f} m")
    assert ok


def test_c10_constant_depth_degeneracy_and_lake_at_rest(verdict):
    zeros = True
    for bathy in (0.0, 0.25):
        grid = nc.Grid1D(0.0, 10.0, 200, nc.EXTRAPOLATED)
        cfg = EbConfig(h0=1.0, g=9.81, a0=0.1, grid=grid, bathy=np.full(grid.nh, bathy))
        m = assemble_eb_matrices(cfg)
        zeros &= bool(np.all(m.tx2.to_dense() == 0.0) and np.all(m.tt_grad.to_dense() == 0.0))
    cfg, s = eb_benchmark("solitary_bar", {"nh": 800, "x_center": None})
    model = EbModel(cfg)
    dt = eb_dt(cfg, s)
    for _ in range(1000):
        s = eb_step(cfg, model.matrices, s, dt, model=model)
    dev = max(np.abs(s.eta).max(), np.abs(s.q).max())
    ok = zeros and dev <= 1e-14
    verdict(10, ok, f"tx2 and gradient part exactly zero: {zeros}; "
                    f"max |state| after 1000 steps over the bar {dev:.1e}")
    assert ok


def test_c11_cost_reduction(verdict, mono):
    pb, eta0, fom = mono["pb"], mono["eta0"], mono["fom"]
    basis = rom.pod_basis(fom.states, n_rb=50, mode="energy", theta=pb.theta)
    ops, phi = rom.build_bbm_reduced(pb, basis), rom.build_phi_only(pb, basis)
    _, t_pd = pipeline.timed(lambda tm: rom.simulate_pdrom_bbm(ops, pb, eta0, replay=fom,
                                                               timer=tm), 1)
    _, t_phi = pipeline.timed(lambda tm: rom.simulate_phi_only(phi, pb, eta0, replay=fom,
                                                               timer=tm), 1)
    t_fom = mono["timer"]
    covered = t_fom["total"] / mono["wall"]
    r_pd = t_pd["total"] / t_fom["total"]
    r_phi = t_phi["total"] / t_pd["total"]
    ok = r_pd <= 0.5 and r_phi <= 1.25 and covered >= 0.95
    verdict(11, ok, f"N = 50: pdROM / FOM = {r_pd:.2f}, phi_only / pdROM = {r_phi:.2f}, "
                    f"FOM {t_fom['total']:.1f} s, timer coverage {covered:.3f}")
    assert ok


def test_c12_sweep_map_structure(verdict):
    cfg = RunConfig(model="bbm", benchmark="monochromatic", reduction="eimrom",
                    overrides={"nh": 500, "t_end": 50.0}, n_rb=30, n_eim=80,
                    snapshots={"n_snapshots": 101, "n_draws": 10}, seed=1)
    off = pipeline.offline(cfg, save=False)
    recs = pipeline.sweep_map(cfg, off, np.linspace(0.02, 0.06, 5), np.linspace(0.7, 1.3, 5))
    ok_cells = [r for r in recs if np.isfinite(r["error_pdrom"]) and np.isfinite(r["error_eimrom"])]
    worst = max(recs, key=lambda r: r["error_pdrom"] if np.isfinite(r["error_pdrom"]) else -1)
    largest_eps = max(recs, key=lambda r: r["eps"])
    share = np.mean([r["error_pdrom"] <= r["error_eimrom"] for r in ok_cells])
    ok = worst is largest_eps and share >= 0.6
    verdict(12, ok, f"max pdROM error {worst['error_pdrom']:.2e} at eps {worst['eps']:.3f} "
                    f"(largest eps {largest_eps['eps']:.3f}); pdROM <= EIMROM in "
                    f"{share:.0%} of {len(ok_cells)} cells")
    assert ok
