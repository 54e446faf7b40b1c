"""Offline/online pipelines, parameter sweeps and basis-size studies."""

import csv
import json
import os
import platform
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import eim as eim_mod
from .. import numcore as nc
from .. import rom as rom_mod
from ..bbm import bbm_benchmark, bbm_flux, build_bbm_problem, simulate_bbm
from ..eb import EbModel, EbState, eb_benchmark, eb_fluxes, simulate_eb
from ..errors import ConfigurationError, SimulationAbort
from ..timing import CategoryTimer
from . import persist
from .catalog import catalog_entry, preset_overrides

__all__ = [
    "ModelSetup", "OfflineResult", "RunReport", "make_setup", "offline", "run", "online",
    "sweep_map", "compare", "draw_parameters", "write_profiles_csv", "write_sweep_csv",
    "write_study_csv", "load_offline",
]


# ---------------------------------------------------------------------------
# Model abstraction
# ---------------------------------------------------------------------------
@dataclass
class ModelSetup:
    """A configured full-order model with its initial state.

    ``fields`` lists the state blocks reduced separately (``eta`` for BBM,
    ``eta`` and ``q`` for EB); ``lift`` is subtracted from BBM snapshots.
    """

    model: str
    benchmark: str
    params: dict
    config: object
    solver: object
    u0: np.ndarray

    @property
    def nh(self):
        return self.config.grid.nh

    @property
    def fields(self):
        return ("eta",) if self.model == "bbm" else ("eta", "q")

    @property
    def flux_names(self):
        return ("flux",) if self.model == "bbm" else ("eta", "nq", "jq")

    def simulate(self, n_out=2, t_end=None, replay=None, timer=None):
        kw = dict(n_out=n_out, t_end=t_end, replay=replay)
        if timer is not None:
            kw["timer"] = timer
        if self.model == "bbm":
            return simulate_bbm(self.solver, self.u0, **kw)
        n = self.nh
        return simulate_eb(self.solver, EbState(self.u0[:n], self.u0[n:]), **kw)

    def split(self, states):
        """Per-field snapshot blocks (BBM: ``eta - lift``)."""
        states = np.asarray(states)
        if self.model == "bbm":
            return {"eta": states - self.solver.lift[:, None]}
        return {"eta": states[:self.nh], "q": states[self.nh:]}

    def fluxes(self, states):
        states = np.asarray(states)
        if self.model == "bbm":
            out = np.empty_like(states)
            for k in range(states.shape[1]):
                bbm_flux(self.solver, np.ascontiguousarray(states[:, k]), out[:, k])
            return {"flux": out}
        n = self.nh
        ne, nq, jq = (np.empty((n, states.shape[1])) for _ in range(3))
        for k in range(states.shape[1]):
            a, b, c, d = eb_fluxes(self.config, np.ascontiguousarray(states[:n, k]),
                                   np.ascontiguousarray(states[n:, k]), self.solver.ip,
                                   self.solver.im)
            ne[:, k], nq[:, k], jq[:, k] = a + c, b, d
        return {"eta": ne, "nq": nq, "jq": jq}

    @property
    def theta(self):
        return self.solver.theta if self.model == "bbm" else None

    @property
    def epsilon(self):
        return self.config.a0 / self.config.h0

    @property
    def mu(self):
        return self.config.h0 / catalog_entry(self.model, self.benchmark)["length_scale"]


def make_setup(model, benchmark, overrides=None):
    overrides = dict(overrides or {})
    if model == "bbm":
        config, eta0 = bbm_benchmark(benchmark, overrides)
        # Dirichlet data is carried by the initial profile; reduced states live in eta - eta0
        lift = eta0 if config.grid.bc == "dirichlet-left-lifted" else None
        problem = build_bbm_problem(config, lift=lift)
        return ModelSetup(model, benchmark, overrides, config, problem, np.asarray(eta0, float))
    if model == "eb":
        config, state = eb_benchmark(benchmark, overrides)
        return ModelSetup(model, benchmark, overrides, config, EbModel(config),
                          np.concatenate((state.eta, state.q)))
    raise ConfigurationError(f"unknown model {model!r}")


# ---------------------------------------------------------------------------
# Offline stage
# ---------------------------------------------------------------------------
def draw_parameters(ranges, n_draws, seed):
    """``n_draws`` uniform draws over the box ``ranges`` (name -> (lo, hi))."""
    if n_draws == 0 or not ranges:
        return [{}]
    rng = np.random.default_rng(seed)
    names = sorted(ranges)
    draws = []
    for _ in range(int(n_draws)):
        draws.append({k: float(rng.uniform(*ranges[k])) for k in names})
    return draws


@dataclass
class OfflineResult:
    snapshots: dict
    bases: dict
    eim: dict
    draws: list
    seed: int
    failures: list = field(default_factory=list)
    manifest: dict = field(default_factory=dict)


def _snapshot_driver(cfg, schedule_t_end):
    def driver(params, n_snap):
        setup = make_setup(cfg.model, cfg.benchmark, dict(cfg.overrides, **params))
        traj = setup.simulate(n_out=n_snap, t_end=schedule_t_end)
        blocks = setup.split(traj.states)
        fluxes = setup.fluxes(traj.states)
        stacked = np.vstack([blocks[f] for f in setup.fields])
        return traj.times, stacked, fluxes

    return driver


def offline(cfg, save=True):
    """Collect snapshots, build the POD bases and the EIM spaces.

    FOM failures for individual draws are recorded and skipped; the run
    aborts only when no draw succeeds.
    """
    if cfg.snapshots is None:
        raise ConfigurationError("offline stage needs a snapshots section")
    draws = draw_parameters(cfg.training_ranges(), cfg.snapshots.n_draws, cfg.seed)
    driver = _snapshot_driver(cfg, cfg.snapshots.t_end)
    sets, failures = [], []
    for i, p in enumerate(draws):
        try:
            s = rom_mod.collect_snapshots(driver, {"n_snapshots": cfg.snapshots.n_snapshots,
                                                   "parameters": [p]})
        except SimulationAbort as exc:
            failures.append({"draw": i, "params": p, "reason": exc.reason, "message": str(exc)})
            continue
        for m in s.meta:
            m["run"] = i
        sets.append(s)
    if not sets:
        raise SimulationAbort(f"every training run failed: {failures}")
    snaps = rom_mod.SnapshotSet.concatenate(sets)
    nominal = make_setup(cfg.model, cfg.benchmark, cfg.overrides)
    n = nominal.nh
    blocks = {f: snaps.states[i * n:(i + 1) * n] for i, f in enumerate(nominal.fields)}

    # keep enough modes and magic points for every size a study asks for
    study = cfg.study or {}
    bases = {}
    for f, block in blocks.items():
        mode = cfg.mode if cfg.model == "bbm" else "galerkin"
        sizes = [int(k) for k in study.get("n_rb", [])]
        if cfg.n_rb is not None:
            sizes.append(int(cfg.n_rb))
        if cfg.tol_pod is not None:
            _, sigma = nc.thin_svd(block)
            sizes.append(rom_mod.pod_rank(sigma, cfg.tol_pod))
        keep = min(max(sizes), min(block.shape))
        bases[f] = rom_mod.pod_basis(block, n_rb=keep, mode=mode, theta=nominal.theta)
        bases[f].tol = cfg.tol_pod
    spaces = {}
    n_eim_max = max([int(k) for k in study.get("n_eim", [])] + [int(cfg.n_eim or 0)]) or None
    if cfg.tol_eim is not None or n_eim_max is not None:
        for name, fl in snaps.fluxes.items():
            spaces[name] = eim_mod.eim_greedy(fl, tol_eim=cfg.tol_eim, n_max=n_eim_max,
                                              grid=nominal.config.grid)
    manifest = {
        "model": cfg.model, "benchmark": cfg.benchmark, "seed": cfg.seed, "draws": draws,
        "failures": failures, "fields": list(nominal.fields), "flux_names": sorted(spaces),
        "n_rb": {f: b.n_rb for f, b in bases.items()},
        "n_eim": {k: s.n_eim for k, s in spaces.items()},
        "eim_converged": {k: bool(s.converged) for k, s in spaces.items()},
        "config": cfg.to_dict(),
    }
    res = OfflineResult({"all": snaps}, bases, spaces, draws, cfg.seed, failures, manifest)
    if save and cfg.out:
        save_offline(res, os.path.join(cfg.out, "offline"))
    return res


def save_offline(res, directory):
    os.makedirs(directory, exist_ok=True)
    extra = {"seed": res.seed, "draws": res.draws}
    persist.save_snapshots(directory, res.snapshots["all"], extra)
    for f, b in res.bases.items():
        persist.save_basis(os.path.join(directory, f"basis_{f}.dwrom"), b, extra)
    for name, s in res.eim.items():
        persist.save_eim(os.path.join(directory, f"eim_{name}.dwrom"), s, extra)
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(res.manifest, fh, indent=2, default=float)


def load_offline(directory):
    try:
        with open(os.path.join(directory, "manifest.json"), encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"no offline artifacts in {directory}: {exc}") from exc
    snaps, _ = persist.load_snapshots(directory)
    bases = {f: persist.load_basis(os.path.join(directory, f"basis_{f}.dwrom"))[0]
             for f in manifest["fields"]}
    spaces = {k: persist.load_eim(os.path.join(directory, f"eim_{k}.dwrom"))[0]
              for k in manifest["flux_names"]}
    return OfflineResult({"all": snaps}, bases, spaces, manifest["draws"], manifest["seed"],
                         manifest.get("failures", []), manifest)


# ---------------------------------------------------------------------------
# Reduced models
# ---------------------------------------------------------------------------
class ReducedRunner:
    """Builds a reduced model for one setup and runs it on a replayed step schedule."""

    def __init__(self, setup, off, reduction, n_rb=None, n_eim=None, variant="psi",
                 blowup_factor=10.0):
        self.setup = setup
        self.reduction = reduction
        self.variant = variant
        self.dims = {}
        solver = setup.solver
        bases = {}
        for f, b in off.bases.items():
            if n_rb is not None:
                k = min(int(n_rb), b.n_rb)
            elif b.tol is not None:
                k = min(rom_mod.pod_rank(b.sigma, b.tol), b.n_rb)
            else:
                k = b.n_rb
            bases[f] = b.truncate(k, setup.theta) if b.mode == "energy" else b.truncate(k)
            self.dims[f"n_rb_{f}"] = k
        self.bases = bases
        spaces = {}
        if reduction == "eimrom":
            if not off.eim:
                raise ConfigurationError("EIM spaces missing from the offline artifacts")
            for name, s in off.eim.items():
                if n_eim is not None:
                    k = min(int(n_eim), s.n_eim)
                elif s.tol is not None:
                    k = eim_mod.eim_size_for(s, s.tol)
                else:
                    k = s.n_eim
                spaces[name] = s.truncate(k).with_stencils(setup.config.grid)
                self.dims[f"n_eim_{name}"] = k
        bound = None
        if blowup_factor:
            ref = off.snapshots["all"].states
            bound = blowup_factor * float(np.linalg.norm(ref, axis=0).max())
        self.bound = bound
        if setup.model == "bbm":
            if reduction == "phi_only":
                self.ops = rom_mod.build_phi_only(solver, bases["eta"])
            else:
                self.ops = rom_mod.build_bbm_reduced(solver, bases["eta"])
                if reduction == "eimrom":
                    self.ops = eim_mod.build_eim_bbm(solver, self.ops, spaces["flux"])
        else:
            ops = rom_mod.build_eb_reduced(solver, bases["eta"], bases["q"])
            if reduction == "eimrom":
                ops = eim_mod.build_eim_eb(solver, ops, spaces["eta"], spaces["nq"], spaces["jq"])
            self.ops = ops

    def simulate(self, replay, timer=None):
        """Return the trajectory with reconstructed full states."""
        setup, ops = self.setup, self.ops
        kw = {} if timer is None else {"timer": timer}
        if setup.model == "bbm":
            p = setup.solver
            if self.reduction == "phi_only":
                return rom_mod.simulate_phi_only(ops, p, setup.u0, replay=replay, **kw)
            if self.reduction == "eimrom":
                tr = eim_mod.simulate_eimrom_bbm(ops, p, setup.u0, replay=replay,
                                                 state_bound=self.bound, **kw)
                tr.states = ops.rom.reconstruct(tr.states)
                return tr
            tr = rom_mod.simulate_pdrom_bbm(ops, p, setup.u0, replay=replay, **kw)
            tr.states = ops.reconstruct(tr.states)
            return tr
        n = setup.nh
        st0 = EbState(setup.u0[:n], setup.u0[n:])
        if self.reduction == "eimrom":
            tr = eim_mod.simulate_eimrom_eb(ops, setup.solver, st0, replay=replay,
                                            variant=self.variant, state_bound=self.bound, **kw)
            rom = ops.rom
        else:
            tr = rom_mod.simulate_pdrom_eb(ops, setup.solver, st0, replay=replay,
                                           variant=self.variant, **kw)
            rom = ops
        ne = rom.n_eta
        tr.states = np.vstack((rom.v_eta @ tr.states[:ne], rom.v_q @ tr.states[ne:]))
        return tr


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------
@dataclass
class RunReport:
    model: str
    benchmark: str
    reduction: str
    status: str = "ok"
    failure: dict = None
    dims: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    ratios: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def write(self, path):
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def _host_info():
    return {"cores": os.cpu_count(), "machine": platform.machine(),
            "python": platform.python_version(), "numpy": np.__version__,
            "linear_solver": "thomas/cyclic-thomas (full), LU (reduced)"}


def _failure(exc):
    return {"reason": exc.reason, "message": str(exc), "step": exc.step, "stage": exc.stage,
            "t": exc.t}


_WARM = []


def warm_up():
    """Load or compile every numba kernel once so timings exclude JIT work."""
    if _WARM:
        return
    from ..bbm import bbm_flux_stencil_kernel
    from ..eb import eb_flux_stencil_kernel

    make_setup("bbm", "monochromatic", {"nh": 16, "t_end": 0.05}).simulate()
    make_setup("bbm", "undular_bore", {"nh": 16, "t_end": 0.05}).simulate()
    make_setup("eb", "monochromatic_bar", {"nh": 40, "t_end": 0.05}).simulate()
    v = np.ones((1, 7))
    bbm_flux_stencil_kernel(v, np.ones((1, 3)), np.ones((1, 3)), 1.0, 1.0, np.empty(1))
    eb_flux_stencil_kernel(0 * v, 0 * v, v, 1.0, 9.81, 1.0, np.empty(1), np.empty(1), np.empty(1))
    _WARM.append(True)


def timed(fn, repeats):
    """Run ``fn(timer)`` ``repeats`` times; keep the result and the fastest timing."""
    warm_up()
    best, result = None, None
    for _ in range(repeats):
        timer = CategoryTimer()
        result = fn(timer)
        d = timer.as_dict()
        if best is None or d["total"] < best["total"]:
            best = d
    return result, best


def _online_setup(cfg):
    over = dict(cfg.overrides)
    over.update(preset_overrides(cfg.model, cfg.benchmark, cfg.online.preset))
    over.update(cfg.online.overrides or {})
    if cfg.online.t_end is not None:
        over["t_end"] = cfg.online.t_end
    return make_setup(cfg.model, cfg.benchmark, over)


def _errors(rom_states, fom_states):
    return {"l2_final": rom_mod.rom_error(rom_states, fom_states, "l2_final"),
            "l2_time_avg": rom_mod.rom_error(rom_states, fom_states, "l2_time_avg")}


def online(cfg, off, setup=None, fom=None, fom_timing=None, n_rb=None, n_eim=None,
           reduction=None):
    """Run one reduced model against a full-order reference on the same schedule."""
    setup = setup or _online_setup(cfg)
    reduction = reduction or cfg.reduction
    n_rb = cfg.n_rb if n_rb is None else n_rb
    n_eim = cfg.n_eim if n_eim is None else n_eim
    rep = RunReport(cfg.model, cfg.benchmark, reduction,
                    metadata={"params": setup.params, "seed": off.seed, "draws": off.draws,
                              "host": _host_info(), "repeats": cfg.repeats,
                              "note": catalog_entry(cfg.model, cfg.benchmark)["note"]})
    if fom is None:
        fom, fom_timing = timed(lambda tm: setup.simulate(n_out=cfg.n_out, timer=tm), cfg.repeats)
    rep.timings["fom"] = fom_timing
    rep.dims["nh"] = setup.nh
    try:
        runner = ReducedRunner(setup, off, reduction, n_rb, n_eim, cfg.variant, cfg.blowup_factor)
        rep.dims.update(runner.dims)
        tr, rt = timed(lambda tm: runner.simulate(fom, tm), cfg.repeats)
    except SimulationAbort as exc:
        rep.status = "aborted"
        rep.failure = _failure(exc)
        return rep, None, fom
    rep.timings[reduction] = rt
    rep.errors = _errors(tr.states, fom.states)
    if fom_timing and fom_timing["total"] > 0:
        rep.ratios["time_ratio"] = rt["total"] / fom_timing["total"]
    return rep, tr, fom


def _resolve_offline(cfg):
    if cfg.artifacts:
        return load_offline(cfg.artifacts)
    return offline(cfg)


def run(cfg):
    """Execute a configured run; returns ``(report, trajectory)``."""
    if cfg.reduction == "fom":
        setup = _online_setup(cfg)
        rep = RunReport(cfg.model, cfg.benchmark, "fom",
                        metadata={"params": setup.params, "host": _host_info()})
        rep.dims["nh"] = setup.nh
        try:
            traj, t = timed(lambda tm: setup.simulate(n_out=cfg.n_out, timer=tm), cfg.repeats)
        except SimulationAbort as exc:
            rep.status = "aborted"
            rep.failure = _failure(exc)
            _write_outputs(cfg, rep, None, setup)
            return rep, None
        rep.timings["fom"] = t
        rep.metadata["t_final"] = float(traj.times[-1])
        rep.metadata["n_steps"] = traj.n_steps
        _write_outputs(cfg, rep, traj, setup)
        return rep, traj
    off = _resolve_offline(cfg)
    setup = _online_setup(cfg)
    rep, tr, fom = online(cfg, off, setup)
    _write_outputs(cfg, rep, tr, setup, fom)
    return rep, tr


def _write_outputs(cfg, rep, traj, setup, fom=None):
    if not cfg.out:
        return
    os.makedirs(cfg.out, exist_ok=True)
    rep.write(os.path.join(cfg.out, "report.json"))
    if traj is not None:
        write_profiles_csv(os.path.join(cfg.out, f"profiles_{rep.reduction}.csv"), setup, traj)
    if fom is not None:
        write_profiles_csv(os.path.join(cfg.out, "profiles_fom.csv"), setup, fom)


def write_profiles_csv(path, setup, traj):
    """Rows ``(t, x, value)``; EB writes eta only."""
    x = setup.config.grid.x
    n = setup.nh
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "value"])
        for k, t in enumerate(traj.times):
            col = traj.states[:n, k]
            for xi, v in zip(x, col):
                w.writerow([repr(float(t)), repr(float(xi)), repr(float(v))])


# ---------------------------------------------------------------------------
# Sweeps and studies
# ---------------------------------------------------------------------------
SWEEP_FIELDS = ("a0", "h0", "eps", "mu", "error_pdrom", "error_eimrom")
STUDY_FIELDS = ("method", "n_rb", "n_eim", "error", "time_ratio")
FAILED = float("inf")


def sweep_map(cfg, off, a0_values, h0_values, t_end=None, methods=("pdrom", "eimrom")):
    """Relative final-time errors of the reduced models over an ``(a0, h0)`` grid.

    Failed runs are recorded as ``inf``.
    """
    records = []
    for a0 in a0_values:
        for h0 in h0_values:
            over = dict(cfg.overrides, a0=float(a0), h0=float(h0))
            if t_end is not None:
                over["t_end"] = float(t_end)
            setup = make_setup(cfg.model, cfg.benchmark, over)
            rec = {"a0": float(a0), "h0": float(h0), "eps": setup.epsilon, "mu": setup.mu}
            try:
                fom = setup.simulate(n_out=cfg.n_out)
            except SimulationAbort:
                fom = None
            for m in ("pdrom", "eimrom"):
                key = f"error_{m}"
                if m not in methods or fom is None:
                    rec[key] = FAILED if fom is None else float("nan")
                    continue
                rep, _, _ = online(cfg, off, setup=setup, fom=fom, fom_timing=None, reduction=m)
                rec[key] = rep.errors["l2_final"] if rep.status == "ok" else FAILED
            records.append(rec)
    return records


def compare(cfg, off, n_rb_values, n_eim_values=None, methods=("pdrom", "eimrom")):
    """Error and time ratio against the FOM for several reduced dimensions."""
    setup = _online_setup(cfg)
    fom, fom_t = timed(lambda tm: setup.simulate(n_out=cfg.n_out, timer=tm), cfg.repeats)
    rows = []
    for n_rb in n_rb_values:
        for m in methods:
            eims = (n_eim_values or [None]) if m == "eimrom" else [None]
            for n_eim in eims:
                rep, _, _ = online(cfg, off, setup=setup, fom=fom, fom_timing=fom_t, n_rb=n_rb,
                                   n_eim=n_eim, reduction=m)
                ok = rep.status == "ok"
                rows.append({
                    "method": m, "n_rb": int(n_rb),
                    "n_eim": "" if m != "eimrom" else int(max(
                        [v for k, v in rep.dims.items() if k.startswith("n_eim")], default=0)),
                    "error": rep.errors["l2_final"] if ok else FAILED,
                    "time_ratio": rep.ratios.get("time_ratio", float("nan")) if ok else float("nan"),
                })
    return rows


def _write_rows(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(header))
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in header})


def write_sweep_csv(path, records):
    _write_rows(path, SWEEP_FIELDS, records)


def write_study_csv(path, rows):
    _write_rows(path, STUDY_FIELDS, rows)
