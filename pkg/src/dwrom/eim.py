"""Empirical interpolation of nonlinear fluxes and the hyper-reduced steppers (EIMROM).

The greedy stores, for every magic point, the residual vector it was built
from; this basis is lower triangular at the magic points and is turned into
the cardinal (Lagrange) basis once, so interpolation is a single product.
"""

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from . import numcore as nc
from .bbm import bbm_dt, bbm_flux_stencil_kernel, shu_osher_step
from .eb import EbState, eb_flux_stencil_kernel
from .errors import ConfigurationError, DryStateError, EimInstability, SimulationAbort
from .rom import eb_reduced_advance, simulate_pdrom_eb
from .timeloop import march
from .timing import NULL_TIMER

__all__ = [
    "EimSpace", "EimBbmOps", "EimEbOps", "eim_greedy", "eim_size_for", "eim_interpolate", "eim_reduced_flux",
    "stencil_indices", "build_eim_bbm", "build_eim_eb", "eimrom_step", "simulate_eimrom_bbm",
    "simulate_eimrom_eb", "STENCIL_WIDTH",
]

STENCIL_WIDTH = 7


def stencil_indices(grid, points):
    """Nodes ``[j, j+, j-, (j+)+, (j+)-, (j-)+, (j-)-]`` for every magic point ``j``.

    Neighbour maps follow the grid closure, so the rows agree with what the
    full-grid flux kernels read (half-width 2).
    """
    ip, im = grid.ip, grid.im
    j = np.asarray(points, dtype=np.int64)
    return np.column_stack([j, ip[j], im[j], ip[ip[j]], im[ip[j]], ip[im[j]], im[im[j]]])


@dataclass(frozen=True)
class EimSpace:
    """Magic points ``z``, cardinal basis ``psi`` (``psi[z] = I``) and the greedy record.

    ``q`` keeps the nested residual basis so prefixes can be re-extracted.
    ``errors[k]`` is the largest training residual with ``k`` points.
    """

    z: np.ndarray
    psi: np.ndarray
    q: np.ndarray
    errors: np.ndarray
    tol: float
    converged: bool
    stencils: np.ndarray = None

    @property
    def n_eim(self):
        return len(self.z)

    def truncate(self, n_eim):
        """Space spanned by the first ``n_eim`` magic points (nested prefix)."""
        if not 1 <= n_eim <= self.n_eim:
            raise ConfigurationError(f"n_eim must lie in [1, {self.n_eim}]")
        q = self.q[:, :n_eim]
        z = self.z[:n_eim]
        st = None if self.stencils is None else self.stencils[:n_eim]
        return EimSpace(z, _cardinal(q, z), q, self.errors[:n_eim + 1], self.tol,
                        self.converged and n_eim == self.n_eim, st)

    def with_stencils(self, grid):
        return replace(self, stencils=stencil_indices(grid, self.z))

    def project(self, w, row_weights=None):
        """Projected interpolation matrix ``W^T psi`` (``n_rb x n_eim``)."""
        psi = self.psi if row_weights is None else self.psi * row_weights[:, None]
        return np.asarray(w).T @ psi


def _cardinal(q, z):
    # q[z] is unit lower triangular; psi = q q[z]^{-1}
    return sla.solve_triangular(q[z, :].T, q.T, lower=False, unit_diagonal=True).T


def eim_greedy(flux_snapshots, tol_eim=None, n_max=None, grid=None, rank_tol=1e-13):
    """Greedy EIM on flux snapshot columns.

    Each pass picks the column with the largest max-norm residual, adds the
    node where that residual peaks and removes the new direction from all
    residuals.  Stops once the training residual is at most ``tol_eim``
    (absolute), after ``n_max`` points, or when the residual hits round-off
    level; in the last two cases ``converged`` reports whether ``tol_eim``
    was met and a warning is issued if not.
    """
    s = np.array(flux_snapshots, dtype=float, order="F")
    if s.ndim != 2 or s.shape[1] == 0:
        raise ValueError("need at least one flux snapshot column")
    if tol_eim is None and n_max is None:
        raise ConfigurationError("give tol_eim, n_max or both")
    if tol_eim is not None and not tol_eim > 0:
        raise ConfigurationError("tol_eim must be positive")
    nh, ns = s.shape
    limit = min(nh, ns) if n_max is None else min(int(n_max), nh, ns)
    colmax = np.abs(s).max(axis=0)
    scale = colmax.max()
    errors = [scale]
    points, basis = [], []
    converged = False
    while len(points) < limit:
        jc = int(np.argmax(colmax))
        if colmax[jc] <= rank_tol * scale and points:
            break
        r = s[:, jc]
        i_star = int(np.argmax(np.abs(r)))
        if r[i_star] == 0.0:
            break
        xi = r / r[i_star]
        points.append(i_star)
        basis.append(xi.copy())
        s -= np.outer(xi, s[i_star, :])
        s[i_star, :] = 0.0
        colmax = np.abs(s).max(axis=0)
        errors.append(colmax.max())
        if tol_eim is not None and errors[-1] <= tol_eim:
            converged = True
            break
    if not points:
        # all-zero snapshots: any node interpolates them exactly
        points, basis = [0], [np.eye(nh, 1)[:, 0]]
        errors.append(0.0)
        converged = True
    if tol_eim is None:
        converged = True
    elif not converged:
        warnings.warn(f"EIM stopped at {len(points)} points with residual {errors[-1]:.3e} "
                      f"> tol_eim = {tol_eim:.3e}", RuntimeWarning, stacklevel=2)
    q = np.column_stack(basis)
    z = np.asarray(points, dtype=np.int64)
    space = EimSpace(z, _cardinal(q, z), q, np.asarray(errors), tol_eim, converged)
    return space.with_stencils(grid) if grid is not None else space


def eim_size_for(space, tol):
    """Smallest prefix size whose training residual is at most ``tol`` (all points if none)."""
    ok = np.nonzero(space.errors[1:] <= tol)[0]
    return int(ok[0]) + 1 if ok.size else space.n_eim


def eim_interpolate(space, values_at_points):
    """Full-grid interpolant ``psi phi(z)``."""
    return space.psi @ np.asarray(values_at_points, dtype=float)


def eim_reduced_flux(b, evaluator, stencil_values):
    """Reduced flux ``b @ evaluator(stencil_values)``.

    ``stencil_values`` must carry one row per magic point (``b`` has one
    column per magic point).
    """
    stencil_values = np.asarray(stencil_values, dtype=float)
    b = np.asarray(b)
    if stencil_values.ndim == 0 or stencil_values.shape[0] != b.shape[1]:
        raise ValueError(f"need stencil values for all {b.shape[1]} magic points")
    return b @ evaluator(stencil_values)


# ---------------------------------------------------------------------------
# BBM
# ---------------------------------------------------------------------------
@dataclass
class EimBbmOps:
    """pdROM operators plus the magic-point reconstruction and projected EIM matrix."""

    rom: object
    space: EimSpace
    v_st: np.ndarray
    lift_st: np.ndarray
    gam3: np.ndarray
    dlt3: np.ndarray
    proj: np.ndarray
    dx: float
    d: float

    def flux_at_points(self, a):
        vals = (self.lift_st + self.v_st @ a).reshape(-1, STENCIL_WIDTH)
        return bbm_flux_stencil_kernel(vals, self.gam3, self.dlt3, self.dx, self.d,
                                       np.empty(vals.shape[0]))


def build_eim_bbm(problem, rom_ops, space):
    """Attach an EIM space to reduced BBM operators."""
    space = space if space.stencils is not None else space.with_stencils(problem.grid)
    st = space.stencils
    lu = nc.DenseLU(rom_ops.m_rb)
    wm = rom_ops.w * problem.mask[:, None]
    proj = lu.solve(space.project(wm))
    flat = st.ravel()
    return EimBbmOps(rom_ops, space, np.ascontiguousarray(rom_ops.v[flat]), rom_ops.lift[flat],
                     np.ascontiguousarray(problem.gamma[st[:, :3]]),
                     np.ascontiguousarray(problem.delta[st[:, :3]]), np.ascontiguousarray(proj),
                     problem.grid.dx, problem.config.d_cip)


def _eim_bbm_rhs(ops, a, timer):
    timer.lap("other")
    f = ops.flux_at_points(a)
    timer.lap("flux_assembly")
    out = ops.rom.lin @ a - ops.proj @ f + ops.rom.const
    timer.lap("other")
    return out


# ---------------------------------------------------------------------------
# EB
# ---------------------------------------------------------------------------
@dataclass
class EimEbOps:
    """Three interpolated fluxes: ``N^eta + J(eta)``, ``N^q`` and ``J(q)``."""

    rom: object
    spaces: tuple
    ve_st: tuple
    vq_st: tuple
    hb_st: tuple
    proj: tuple
    dx: float
    g: float
    d: float
    _kinds: tuple = field(default=(0, 1, 2), repr=False)

    def reduced_fluxes(self, eta_hat, q_hat):
        out = []
        for kind, ve, vq, hb, b in zip(self._kinds, self.ve_st, self.vq_st, self.hb_st, self.proj):
            e = (ve @ eta_hat).reshape(-1, STENCIL_WIDTH)
            q = (vq @ q_hat).reshape(-1, STENCIL_WIDTH)
            m = e.shape[0]
            res = (np.empty(m), np.empty(m), np.empty(m))
            bad = eb_flux_stencil_kernel(e, q, hb, self.dx, self.g, self.d, *res)
            if bad >= 0:
                raise DryStateError("dry state at a magic-point stencil")
            out.append(b @ res[kind])
        return tuple(out)


def build_eim_eb(model, rom_ops, space_eta, space_nq, space_jq):
    """Attach the three EIM spaces to reduced EB operators."""
    grid = model.config.grid
    spaces = tuple(s if s.stencils is not None else s.with_stencils(grid)
                   for s in (space_eta, space_nq, space_jq))
    tests = (rom_ops.w_eta, rom_ops.w_q, rom_ops.w_q)
    ve, vq, hb, proj = [], [], [], []
    for s, w in zip(spaces, tests):
        flat = s.stencils.ravel()
        ve.append(np.ascontiguousarray(rom_ops.v_eta[flat]))
        vq.append(np.ascontiguousarray(rom_ops.v_q[flat]))
        hb.append(np.ascontiguousarray(model.config.hbar[s.stencils]))
        proj.append(np.ascontiguousarray(s.project(w)))
    cfg = model.config
    return EimEbOps(rom_ops, spaces, tuple(ve), tuple(vq), tuple(hb), tuple(proj), grid.dx, cfg.g,
                    cfg.d_cip)


# ---------------------------------------------------------------------------
# Steppers
# ---------------------------------------------------------------------------
def _guard(fn):
    try:
        return fn()
    except EimInstability:
        raise
    except (SimulationAbort, FloatingPointError) as exc:
        raise EimInstability(f"EIM instability: {exc}", step=getattr(exc, "step", None),
                             t=getattr(exc, "t", None)) from exc


def eimrom_step(model, ops, state_hat, dt, problem=None, eb_model=None, variant="psi",
                timer=NULL_TIMER):
    """One SSPRK(2,2) step of the hyper-reduced model.

    ``model`` is ``"bbm"`` (``state_hat`` a coefficient vector) or ``"eb"``
    (``state_hat`` an :class:`EbState` of coefficients; ``eb_model`` needed).
    """
    del problem  # the BBM operators are fully precomputed

    def bbm():
        a = np.asarray(state_hat, dtype=float)
        out = shu_osher_step(a, dt, lambda b, s: _eim_bbm_rhs(ops, b, timer))
        if not np.all(np.isfinite(out)):
            raise EimInstability("EIM instability: non-finite reduced state")
        return out

    def eb():
        e, q = eb_reduced_advance(ops.rom, eb_model, np.asarray(state_hat.eta, float),
                                  np.asarray(state_hat.q, float), state_hat.t, dt,
                                  ops.reduced_fluxes, variant, timer)
        if not (np.all(np.isfinite(e)) and np.all(np.isfinite(q))):
            raise EimInstability("EIM instability: non-finite reduced state")
        return EbState(e, q, state_hat.t + dt)

    if model == "bbm":
        return _guard(bbm)
    if model == "eb":
        return _guard(eb)
    raise ConfigurationError(f"unknown model {model!r}")


def blowup_check(bound):
    """Step check raising :class:`EimInstability` once ``|u|_2`` exceeds ``bound``."""
    if bound is None:
        return None

    def check(u, step, t):
        nrm = np.linalg.norm(u)
        if not nrm <= bound:
            raise EimInstability(f"EIM instability: reduced state norm {nrm:.3e} exceeds "
                                 f"{bound:.3e}", step=step, t=t)

    return check


def simulate_eimrom_bbm(ops, problem, eta0, n_out=2, t_end=None, replay=None, timer=NULL_TIMER,
                        state_bound=None):
    """Run the BBM EIMROM; blow-ups and non-finite states raise :class:`EimInstability`."""
    t_end = problem.config.t_end if t_end is None else t_end
    rom = ops.rom
    a0 = rom.project_state(eta0)

    def advance(a, t, dt):
        return shu_osher_step(a, dt, lambda b, s: _eim_bbm_rhs(ops, b, timer))

    return _guard(lambda: march(a0, advance, t_end, n_out=n_out, replay=replay, timer=timer,
                                check=blowup_check(state_bound),
                                dt_fn=lambda a: bbm_dt(problem, rom.reconstruct(a))))


def simulate_eimrom_eb(ops, model, state0, n_out=2, t_end=None, replay=None, variant="psi",
                       timer=NULL_TIMER, state_bound=None):
    """Run the EB EIMROM; trajectory columns stack ``[eta_hat; q_hat]``."""
    return _guard(lambda: simulate_pdrom_eb(ops.rom, model, state0, n_out=n_out, t_end=t_end,
                                            replay=replay, variant=variant, timer=timer,
                                            flux_fn=ops.reduced_fluxes,
                                            check=blowup_check(state_bound)))

