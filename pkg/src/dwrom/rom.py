"""POD bases, test spaces and the partially discrete reduced models (pdROM).

The pdROM keeps the nonlinear fluxes on the full grid (reconstruct, evaluate,
project) while every linear operator, including the inverse of the elliptic
dispersive operator, is projected once and stored as a small dense matrix.
"""

from dataclasses import dataclass, field

import numpy as np

from . import numcore as nc
from .bbm import bbm_dispersion_source_kernel, bbm_dt, bbm_flux, shu_osher_step
from .eb import EbState, eb_dt, eb_fluxes, wave_generator_value
from .errors import ConfigurationError, SimulationAbort, SingularMatrixError
from .timeloop import march
from .timing import NULL_TIMER

__all__ = [
    "SnapshotSet", "ReducedBasis", "ReducedBbmOps", "ReducedEbOps", "PhiOnlyOps",
    "collect_snapshots", "pod_basis", "pod_rank", "build_bbm_reduced", "pdrom_bbm_step",
    "build_phi_only", "phi_only_step", "build_eb_reduced", "pdrom_eb_step", "rom_error",
    "simulate_pdrom_bbm", "simulate_phi_only", "simulate_pdrom_eb",
]


# ---------------------------------------------------------------------------
# Snapshots and POD
# ---------------------------------------------------------------------------
@dataclass
class SnapshotSet:
    """Snapshot columns, optional named flux snapshot matrices and per-column metadata."""

    states: np.ndarray
    fluxes: dict = field(default_factory=dict)
    meta: list = field(default_factory=list)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2:
            raise ValueError("states must be a (dof, n_snap) matrix")
        n = self.states.shape[1]
        for name, f in self.fluxes.items():
            if f.shape[1] != n:
                raise ValueError(f"flux snapshots {name!r} have {f.shape[1]} columns, expected {n}")
        if self.meta and len(self.meta) != n:
            raise ValueError("metadata must have one record per column")

    @property
    def n_snapshots(self):
        return self.states.shape[1]

    @staticmethod
    def concatenate(sets):
        sets = list(sets)
        if not sets:
            raise ValueError("no snapshot sets to concatenate")
        names = set(sets[0].fluxes)
        fluxes = {k: np.hstack([s.fluxes[k] for s in sets]) for k in names}
        meta = [m for s in sets for m in s.meta]
        return SnapshotSet(np.hstack([s.states for s in sets]), fluxes, meta)


def collect_snapshots(driver, schedule):
    """Run ``driver(params, n_snapshots)`` for every parameter record and stack the results.

    ``schedule`` holds ``n_snapshots`` and ``parameters`` (a list of dicts).
    The driver returns ``(times, states, fluxes)`` with ``fluxes`` a dict of
    matrices evaluated at the same instants.
    """
    params = list(schedule.get("parameters", [{}]))
    n_snap = int(schedule["n_snapshots"])
    if not params or n_snap < 1:
        raise ValueError("the snapshot schedule is empty")
    sets = []
    for run_id, p in enumerate(params):
        try:
            times, states, fluxes = driver(p, n_snap)
        except SimulationAbort as exc:
            raise SimulationAbort(f"full-order run failed for parameters {p}: {exc}",
                                  step=exc.step, t=exc.t) from exc
        meta = [{"params": dict(p), "t": float(t), "run": run_id} for t in times]
        sets.append(SnapshotSet(states, dict(fluxes or {}), meta))
    return SnapshotSet.concatenate(sets)


def pod_rank(sigma, tol_pod):
    """Smallest ``N`` whose retained singular-value fraction reaches ``1 - tol_pod``."""
    sigma = np.asarray(sigma, dtype=float)
    if not 0.0 < tol_pod < 1.0:
        raise ConfigurationError("tol_pod must lie in (0, 1)")
    total = sigma.sum()
    if total == 0:
        return 1
    frac = np.cumsum(sigma) / total
    return int(min(np.searchsorted(frac, 1.0 - tol_pod - 1e-15) + 1, len(sigma)))


@dataclass
class ReducedBasis:
    """Trial basis ``v`` (orthonormal columns) and test basis ``w``.

    For ``mode == "energy"`` ``w = theta @ v``; model builders recompute it
    from the current problem's energy matrix.
    """

    v: np.ndarray
    w: np.ndarray
    sigma: np.ndarray
    mode: str = "galerkin"
    tol: float = None

    @property
    def n_rb(self):
        return self.v.shape[1]

    @property
    def dof(self):
        return self.v.shape[0]

    def truncate(self, n_rb, theta=None):
        v = self.v[:, :n_rb]
        return ReducedBasis(v, projection_space(v, self.mode, theta), self.sigma, self.mode, None)


def projection_space(v, mode, theta=None):
    if mode == "galerkin":
        return v
    if mode == "energy":
        if theta is None:
            raise ConfigurationError("energy test space needs the energy matrix")
        return np.asarray(theta @ v)
    raise ConfigurationError(f"unknown projection mode {mode!r}")


def pod_basis(s, tol_pod=None, n_rb=None, mode="galerkin", theta=None):
    """POD of the snapshot states truncated by tolerance or by size."""
    states = s.states if isinstance(s, SnapshotSet) else np.asarray(s, dtype=float)
    if states.size == 0 or states.shape[1] == 0:
        raise ValueError("empty snapshot set")
    if (tol_pod is None) == (n_rb is None):
        raise ConfigurationError("give exactly one of tol_pod and n_rb")
    u, sigma = nc.thin_svd(states)
    if n_rb is None:
        n_rb = pod_rank(sigma, tol_pod)
    if not 1 <= n_rb <= len(sigma):
        raise ConfigurationError(f"n_rb must lie in [1, {len(sigma)}]")
    v = np.ascontiguousarray(u[:, :n_rb])
    return ReducedBasis(v, projection_space(v, mode, theta), sigma, mode, tol_pod)


def identity_basis(n, mode="galerkin", theta=None):
    v = np.eye(n)
    return ReducedBasis(v, projection_space(v, mode, theta), np.ones(n), mode, None)


def rom_error(rom, fom, norm="l2_final"):
    """Relative L2 error between reconstructed ROM and FOM trajectories (columns = samples)."""
    rom = np.asarray(rom, dtype=float)
    fom = np.asarray(fom, dtype=float)
    if rom.shape != fom.shape:
        raise ValueError(f"trajectory shapes differ: {rom.shape} vs {fom.shape}")
    if rom.ndim == 1:
        rom, fom = rom[:, None], fom[:, None]
    if norm == "l2_final":
        num, den = np.linalg.norm(rom[:, -1] - fom[:, -1]), np.linalg.norm(fom[:, -1])
    elif norm == "l2_time_avg":
        num, den = np.linalg.norm(rom - fom), np.linalg.norm(fom)
    else:
        raise ValueError(f"unknown norm {norm!r}")
    if den == 0:
        return 0.0 if num == 0 else np.inf
    return float(num / den)


# ---------------------------------------------------------------------------
# BBM pdROM
# ---------------------------------------------------------------------------
@dataclass
class ReducedBbmOps:
    """Precomputed reduced BBM operators.

    Each stage evaluates ``m_rb^{-1} W^T L(lift + V a)`` as
    ``-proj @ F(lift + V a) + lin @ a + const``.
    """

    v: np.ndarray
    w: np.ndarray
    lift: np.ndarray
    m_rb: np.ndarray
    a_rb: np.ndarray
    proj: np.ndarray
    lin: np.ndarray
    const: np.ndarray

    @property
    def n_rb(self):
        return self.v.shape[1]

    def reconstruct(self, coeffs):
        return self.lift[:, None] + self.v @ coeffs if np.ndim(coeffs) == 2 else self.lift + self.v @ coeffs

    def project_state(self, eta):
        """Coefficients of ``eta - lift`` in the test-space sense (``m_rb^{-1} W^T``)."""
        return nc.dense_solve(self.m_rb, self.w.T @ (np.asarray(eta) - self.lift))


def _phi_columns(problem, cols):
    """``Phi`` for every column of ``cols`` (elliptic solve with many right-hand sides)."""
    grid = problem.grid
    cols = np.asarray(cols, dtype=float)
    src = np.empty_like(cols)
    for k in range(cols.shape[1]):
        bbm_dispersion_source_kernel(np.ascontiguousarray(cols[:, k]), problem.omega, problem.ip,
                                     problem.im, problem.ipp, problem.imm, grid.dx, src[:, k])
    if problem.alpha == 0.0:
        return src
    return nc.tridiag_solve(problem.elliptic, src)


def _resolve_w(problem, basis):
    if basis.mode == "energy":
        return np.asarray(problem.theta @ basis.v)
    return basis.w


def build_bbm_reduced(problem, basis):
    """Project the BBM operators onto ``basis`` (``n_rb`` elliptic solves offline)."""
    v = np.ascontiguousarray(basis.v)
    if v.shape[0] != problem.grid.nh:
        raise ConfigurationError("basis size does not match the grid")
    w = _resolve_w(problem, basis)
    wm = w * problem.mask[:, None]
    m_rb = w.T @ v
    try:
        lu = nc.DenseLU(m_rb)
    except SingularMatrixError as exc:
        raise SingularMatrixError("reduced mass matrix W^T V is singular") from exc
    phi_v = _phi_columns(problem, v)
    a_rb = -(wm.T @ phi_v)
    phi_lift = _phi_columns(problem, problem.lift[:, None])[:, 0]
    proj = np.ascontiguousarray(lu.solve(wm.T))
    lin = -lu.solve(wm.T @ (problem.nu[:, None] * v) + a_rb)
    const = lu.solve(wm.T @ (phi_lift - problem.nu * problem.lift))
    return ReducedBbmOps(v, w, problem.lift.copy(), m_rb, a_rb, proj, np.ascontiguousarray(lin),
                         const)


def _pdrom_bbm_rhs(ops, problem, a, timer, flux_log=None):
    timer.lap("other")
    eta = ops.lift + ops.v @ a
    f = bbm_flux(problem, eta)
    timer.lap("flux_assembly")
    if flux_log is not None:
        flux_log.append(f)
    out = ops.lin @ a - ops.proj @ f + ops.const
    timer.lap("other")
    return out


def pdrom_bbm_step(ops, problem, basis, eta_hat, dt, timer=NULL_TIMER):
    """Advance the reduced coefficients by one SSPRK(2,2) step."""
    del basis  # the projected operators already carry the basis
    return shu_osher_step(np.asarray(eta_hat, dtype=float), dt,
                          lambda a, s: _pdrom_bbm_rhs(ops, problem, a, timer))


def simulate_pdrom_bbm(ops, problem, eta0, n_out=2, t_end=None, replay=None, timer=NULL_TIMER,
                       check=None, flux_log=None):
    """Run the BBM pdROM; trajectory columns are reduced coefficients.

    ``flux_log`` (a list) receives the full-grid flux of every stage.
    """
    t_end = problem.config.t_end if t_end is None else t_end
    a0 = ops.project_state(eta0)

    def advance(a, t, dt):
        return shu_osher_step(a, dt, lambda b, s: _pdrom_bbm_rhs(ops, problem, b, timer, flux_log))

    return march(a0, advance, t_end, n_out=n_out, replay=replay, timer=timer, check=check,
                 dt_fn=lambda a: bbm_dt(problem, ops.reconstruct(a)))


# ---------------------------------------------------------------------------
# Reduced dispersive closure only
# ---------------------------------------------------------------------------
@dataclass
class PhiOnlyOps:
    """``Phi = -V B^{-1} W^T (omega D3 eta)`` with ``B = W^T (I - alpha D2) V``."""

    v: np.ndarray
    closure: np.ndarray


def build_phi_only(problem, basis):
    v = np.ascontiguousarray(basis.v)
    w = _resolve_w(problem, basis)
    ell = problem.elliptic.to_sparse() if problem.alpha != 0.0 else None
    av = v if ell is None else np.asarray(ell @ v)
    b = w.T @ av
    closure = nc.DenseLU(b).solve(w.T)
    return PhiOnlyOps(v, np.ascontiguousarray(closure))


def _phi_only_rhs(ops, problem, eta, timer):
    timer.lap("other")
    f = bbm_flux(problem, eta)
    src = bbm_dispersion_source_kernel(eta, problem.omega, problem.ip, problem.im, problem.ipp,
                                       problem.imm, problem.grid.dx, np.empty(problem.grid.nh))
    timer.lap("flux_assembly")
    phi = ops.v @ (ops.closure @ src)
    timer.lap("linear_solves")
    return problem.mask * (phi - f - problem.nu * eta)


def phi_only_step(problem, basis, eta_full, dt, ops=None, timer=NULL_TIMER):
    """Full-space hyperbolic update with the reduced dispersive closure."""
    ops = build_phi_only(problem, basis) if ops is None else ops
    return shu_osher_step(np.ascontiguousarray(eta_full, dtype=float), dt,
                          lambda u, s: _phi_only_rhs(ops, problem, u, timer))


def simulate_phi_only(ops, problem, eta0, n_out=2, t_end=None, replay=None, timer=NULL_TIMER):
    t_end = problem.config.t_end if t_end is None else t_end

    def advance(u, t, dt):
        return shu_osher_step(u, dt, lambda v, s: _phi_only_rhs(ops, problem, v, timer))

    return march(np.ascontiguousarray(eta0, dtype=float), advance, t_end, n_out=n_out, replay=replay,
                 timer=timer, dt_fn=lambda u: bbm_dt(problem, u))


# ---------------------------------------------------------------------------
# EB pdROM
# ---------------------------------------------------------------------------
@dataclass
class ReducedEbOps:
    v_eta: np.ndarray
    v_q: np.ndarray
    w_eta: np.ndarray
    w_q: np.ndarray
    m_eta: np.ndarray
    m_q: np.ndarray
    tt: np.ndarray
    tx: np.ndarray
    s_eta: np.ndarray
    s_q: np.ndarray
    f_iwg: np.ndarray
    m_minus_tt: np.ndarray
    psi_flux: np.ndarray
    psi_eta: np.ndarray
    mq_inv_tt_corr: np.ndarray
    _lu: dict = field(default_factory=dict, repr=False)

    @property
    def n_eta(self):
        return self.v_eta.shape[1]

    @property
    def n_q(self):
        return self.v_q.shape[1]

    def _cached(self, key, builder):
        if key not in self._lu:
            if len(self._lu) > 16:
                self._lu.clear()
            self._lu[key] = nc.DenseLU(builder())
        return self._lu[key]

    def lhs_eta(self, dt):
        return self._cached(("eta", float(dt)), lambda: self.m_eta + dt * self.s_eta)

    def lhs_q(self, dt):
        return self._cached(("q", float(dt)), lambda: self.m_q + dt * self.s_q)

    def lhs_fused(self, dt):
        return self._cached(("fused", float(dt)), lambda: self.m_minus_tt + dt * self.s_q)

    def reconstruct(self, eta_hat, q_hat):
        return self.v_eta @ eta_hat, self.v_q @ q_hat


def build_eb_reduced(model, basis_eta, basis_q):
    """Project the FEM matrices; ``W = V`` unless the bases carry another test space."""
    mats = model.matrices
    ve, vq = np.ascontiguousarray(basis_eta.v), np.ascontiguousarray(basis_q.v)
    we, wq = basis_eta.w, basis_q.w
    if ve.shape[0] != model.nh or vq.shape[0] != model.nh:
        raise ConfigurationError("basis size does not match the grid")
    m_eta = we.T @ mats.mass.matvec(ve)
    m_q = wq.T @ mats.mass.matvec(vq)
    tt = wq.T @ mats.tt.matvec(vq)
    tx = wq.T @ mats.tx_apply(ve)
    s_eta = we.T @ mats.sponge.matvec(ve)
    s_q = wq.T @ mats.sponge.matvec(vq)
    f_iwg = we.T @ mats.mass.matvec(model.f_iwg) if model.f_iwg is not None else np.zeros(ve.shape[1])
    m_minus_tt = m_q - tt
    try:
        lu_psi = nc.DenseLU(m_minus_tt)
        lu_mq = nc.DenseLU(m_q)
    except SingularMatrixError as exc:
        raise SingularMatrixError("reduced dispersive matrix is singular") from exc
    tt_mq_inv = tt @ lu_mq.solve(np.eye(m_q.shape[0]))
    psi_flux = lu_psi.solve(tt_mq_inv)
    psi_eta = lu_psi.solve(tx)
    return ReducedEbOps(ve, vq, we, wq, m_eta, m_q, tt, tx, s_eta, s_q, f_iwg, m_minus_tt,
                        psi_flux, psi_eta, tt_mq_inv)


def _eb_reduced_fluxes(ops, model, eta_hat, q_hat, timer):
    timer.lap("other")
    eta, q = ops.reconstruct(eta_hat, q_hat)
    ne, nq, je, jq = eb_fluxes(model.config, eta, q, model.ip, model.im)
    timer.lap("flux_assembly")
    out = ops.w_eta.T @ (ne + je), ops.w_q.T @ nq, ops.w_q.T @ jq
    timer.lap("other")
    return out


def _amplitude(model, t):
    if model.f_iwg is None:
        return 0.0
    return wave_generator_value(model.config, t)[0]


def eb_reduced_advance(ops, model, eta_hat, q_hat, t, dt, flux_fn, variant="psi", timer=NULL_TIMER,
                       scheme=nc.SSPRK22):
    """One SSPRK(2,2) step of a reduced EB model.

    ``flux_fn(eta_hat, q_hat)`` returns the projected ``(F^eta, N^q, J(q))``.
    """
    if variant not in ("psi", "fused"):
        raise ConfigurationError(f"unknown EB reduced variant {variant!r}")
    amps = [_amplitude(model, t + c * dt) for c in scheme.stage_times]
    etas, qs, terms = [eta_hat], [q_hat], []
    lhs_eta = ops.lhs_eta(dt)
    lhs_q = ops.lhs_q(dt) if variant == "psi" else ops.lhs_fused(dt)
    timer.lap("other")
    for s in range(scheme.n_stages):
        timer.lap("other")
        terms.append(flux_fn(etas[s], qs[s]))
        timer.lap("flux_assembly")
        comb_eta = 0.0
        comb_q = 0.0
        amp = -amps[s + 1]
        f_eta = 0.0
        f_q = 0.0
        for r in range(s + 1):
            rho, theta = scheme.rho[s][r], scheme.theta[s][r]
            if rho != 0.0:
                comb_eta = comb_eta + rho * etas[r]
                comb_q = comb_q + rho * qs[r]
                amp += rho * amps[r]
            if theta != 0.0:
                fe, nq, jq = terms[r]
                f_eta = f_eta + theta * fe
                if variant == "psi":
                    psi = -(ops.psi_flux @ nq + ops.psi_eta @ etas[r])
                    f_q = f_q + theta * (ops.m_q @ psi - nq - jq)
                else:
                    f_q = f_q + theta * (ops.mq_inv_tt_corr @ jq - nq - jq - ops.tx @ etas[r])
        rhs_eta = ops.m_eta @ comb_eta + amp * ops.f_iwg - dt * f_eta
        mq = ops.m_q if variant == "psi" else ops.m_minus_tt
        rhs_q = mq @ comb_q + dt * f_q
        timer.lap("other")
        etas.append(lhs_eta.solve(rhs_eta))
        qs.append(lhs_q.solve(rhs_q))
        timer.lap("linear_solves")
    return etas[-1], qs[-1]


def pdrom_eb_step(ops, config, bases, state_hat, dt, variant="psi", model=None, timer=NULL_TIMER):
    """Advance a reduced EB state (``EbState`` holding coefficients) by one step."""
    from .eb import EbModel

    del bases  # the projected operators already carry the bases
    model = EbModel(config) if model is None else model
    eta_hat, q_hat = eb_reduced_advance(
        ops, model, np.asarray(state_hat.eta, float), np.asarray(state_hat.q, float), state_hat.t, dt,
        lambda e, q: _eb_reduced_fluxes(ops, model, e, q, timer), variant, timer)
    return EbState(eta_hat, q_hat, state_hat.t + dt)


def simulate_pdrom_eb(ops, model, state0, n_out=2, t_end=None, replay=None, variant="psi",
                      timer=NULL_TIMER, flux_fn=None, check=None):
    """Run a reduced EB model; trajectory columns stack ``[eta_hat; q_hat]``."""
    t_end = model.config.t_end if t_end is None else t_end
    ne = ops.n_eta
    flux_fn = flux_fn or (lambda e, q: _eb_reduced_fluxes(ops, model, e, q, timer))
    e0 = nc.dense_solve(ops.w_eta.T @ ops.v_eta, ops.w_eta.T @ np.asarray(state0.eta, float))
    q0 = nc.dense_solve(ops.w_q.T @ ops.v_q, ops.w_q.T @ np.asarray(state0.q, float))

    def advance(u, t, dt):
        e, q = eb_reduced_advance(ops, model, u[:ne], u[ne:], t, dt, flux_fn, variant, timer)
        return np.concatenate((e, q))

    def dt_fn(u):
        eta, q = ops.reconstruct(u[:ne], u[ne:])
        return eb_dt(model.config, EbState(eta, q))

    return march(np.concatenate((e0, q0)), advance, t_end, n_out=n_out, dt_fn=dt_fn, replay=replay,
                 timer=timer, check=check)
