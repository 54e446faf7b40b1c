"""Full-order finite-difference solver for the modified BBM-KdV equation with
variable bathymetry.

The equation is solved in dimensional form,

    (1 - alpha d_xx)(eta_t + (gamma + delta eta) eta_x + nu eta) + omega eta_xxx = 0,

by splitting off the dispersive part: each stage solves the elliptic problem
``(I - alpha D2) Phi = -omega D3 eta`` and then advances
``eta_t = -(gamma + delta eta) D eta - nu eta - J(eta) + Phi`` explicitly.
"""

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from numba import njit

from . import numcore as nc
from .errors import ConfigurationError, SimulationAbort
from .timeloop import march
from .timing import NULL_TIMER

__all__ = [
    "BbmConfig", "BbmProblem", "BbmState", "build_bbm_problem", "bbm_explicit_rhs",
    "bbm_phi_solve", "bbm_dt", "bbm_step", "bbm_energy", "bbm_benchmark",
    "bbm_rhs", "simulate_bbm", "BBM_BENCHMARKS",
]


@dataclass
class BbmConfig:
    """Physical and numerical parameters of a BBM-KdV run.

    ``bathy`` holds the dimensionless product of bottom amplitude and shape, so
    the depth at rest is ``h0 * (1 - bathy)``.
    """

    h0: float
    g: float
    a0: float
    grid: nc.Grid1D
    p: float = 0.0
    cfl: float = 0.2
    t_end: float = 1.0
    bathy: np.ndarray = None
    d_cip: float = 1.0
    name: str = "custom"

    def __post_init__(self):
        if self.bathy is None:
            self.bathy = np.zeros(self.grid.nh)
        self.bathy = np.asarray(self.bathy, dtype=float)
        if self.bathy.shape != (self.grid.nh,):
            raise ConfigurationError("bathy must hold one value per grid node")
        if self.p > 1.0 / 6.0:
            raise ConfigurationError("the dispersion parameter p must not exceed 1/6")
        if not 0.0 < self.cfl < 1.0:
            raise ConfigurationError("cfl must lie in (0, 1)")
        if self.h0 <= 0 or self.g <= 0:
            raise ConfigurationError("h0 and g must be positive")
        if self.t_end < 0:
            raise ConfigurationError("t_end must be non-negative")
        if np.any(1.0 - self.bathy <= 0):
            raise ConfigurationError("dry node: the bathymetry reaches the free surface")


@dataclass
class BbmProblem:
    config: BbmConfig
    c: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    alpha: float
    omega: np.ndarray
    nu: np.ndarray
    elliptic: object
    theta: object
    mask: np.ndarray
    lift: np.ndarray
    ip: np.ndarray = field(repr=False, default=None)
    im: np.ndarray = field(repr=False, default=None)
    ipp: np.ndarray = field(repr=False, default=None)
    imm: np.ndarray = field(repr=False, default=None)

    @property
    def grid(self):
        return self.config.grid


@dataclass
class BbmState:
    eta: np.ndarray
    t: float = 0.0
    step_index: int = 0


def build_bbm_problem(config, lift=None):
    """Evaluate the per-node dimensional coefficients and assemble the operators.

    ``lift`` is the boundary profile kept fixed at the left node of a
    ``dirichlet-left-lifted`` grid (defaults to zero).
    """
    grid = config.grid
    hbar = config.h0 * (1.0 - config.bathy)
    c0 = np.sqrt(config.g * config.h0)
    c = np.sqrt(config.g * hbar)
    alpha = (1.0 / 6.0 - config.p) * config.h0**2
    omega = config.h0**2 / 6.0 * c**5 / c0**4
    nu = 1.5 * nc.fd_apply("D", c, grid)
    delta = np.full(grid.nh, 1.5 * c0 / config.h0)
    off = -alpha / grid.dx**2
    elliptic = nc.stencil_matrix(grid, off, 1.0 - 2.0 * off, off)
    d = nc.fd_matrix("D", grid)
    theta = grid.dx * (sp.identity(grid.nh, format="csr") + alpha * (d.T @ d))
    mask = np.ones(grid.nh)
    if grid.bc == nc.DIRICHLET_LEFT:
        mask[0] = 0.0
    lift = np.zeros(grid.nh) if lift is None else np.asarray(lift, dtype=float).copy()
    return BbmProblem(config, c, c.copy(), delta, alpha, omega, nu, elliptic, theta.tocsr(),
                      mask, lift, grid.ip, grid.im, grid.shift(2), grid.shift(-2))


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------
@njit(cache=True)
def bbm_flux_kernel(eta, gam, dlt, ip, im, dx, d, out):
    """``(gamma + delta eta) D eta + J(eta, gamma + delta |eta|)``."""
    n = eta.shape[0]
    g = np.empty(n)
    for j in range(n):
        lam = gam[j] + dlt[j] * abs(eta[j])
        g[j] = lam * (eta[ip[j]] - 2.0 * eta[j] + eta[im[j]]) / (dx * dx)
    c = d * dx * dx * dx
    for j in range(n):
        out[j] = ((gam[j] + dlt[j] * eta[j]) * (eta[ip[j]] - eta[im[j]]) / (2.0 * dx)
                  + c * (g[ip[j]] - 2.0 * g[j] + g[im[j]]))
    return out


@njit(cache=True)
def bbm_flux_stencil_kernel(vals, gam3, dlt3, dx, d, out):
    """Flux at isolated nodes from their stencil values.

    Row ``i`` of ``vals`` holds eta at ``[j, j+, j-, (j+)+, (j+)-, (j-)+, (j-)-]``
    (neighbour maps applied in that order, closure included); ``gam3`` and
    ``dlt3`` hold the coefficients at ``[j, j+, j-]``.  Same arithmetic as
    :func:`bbm_flux_kernel`.
    """
    c = d * dx * dx * dx
    for i in range(vals.shape[0]):
        e0, ep, em = vals[i, 0], vals[i, 1], vals[i, 2]
        g0 = (gam3[i, 0] + dlt3[i, 0] * abs(e0)) * (ep - 2.0 * e0 + em) / (dx * dx)
        gp = (gam3[i, 1] + dlt3[i, 1] * abs(ep)) * (vals[i, 3] - 2.0 * ep + vals[i, 4]) / (dx * dx)
        gm = (gam3[i, 2] + dlt3[i, 2] * abs(em)) * (vals[i, 5] - 2.0 * em + vals[i, 6]) / (dx * dx)
        out[i] = (gam3[i, 0] + dlt3[i, 0] * e0) * (ep - em) / (2.0 * dx) + c * (gp - 2.0 * g0 + gm)
    return out


@njit(cache=True)
def bbm_dispersion_source_kernel(eta, omega, ip, im, ipp, imm, dx, out):
    """``-omega * D3 eta``, the right-hand side of the elliptic problem."""
    for j in range(eta.shape[0]):
        out[j] = -omega[j] * (eta[ipp[j]] - 2.0 * eta[ip[j]] + 2.0 * eta[im[j]] - eta[imm[j]]) / (
            2.0 * dx * dx * dx)
    return out


def bbm_flux(problem, eta, out=None):
    """Nonlinear flux ``(gamma + delta eta) D eta + J`` (no source term)."""
    out = np.empty(problem.grid.nh) if out is None else out
    return bbm_flux_kernel(eta, problem.gamma, problem.delta, problem.ip, problem.im,
                           problem.grid.dx, problem.config.d_cip, out)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------
def bbm_explicit_rhs(problem, eta):
    """Hyperbolic residual ``(gamma + delta eta) D eta + nu eta + J(eta, lambda)``."""
    eta = np.ascontiguousarray(eta, dtype=float)
    return bbm_flux(problem, eta) + problem.nu * eta


def bbm_phi_solve(problem, eta):
    """Solve ``(I - alpha D2) Phi = -omega D3 eta``."""
    eta = np.ascontiguousarray(eta, dtype=float)
    src = bbm_dispersion_source_kernel(eta, problem.omega, problem.ip, problem.im, problem.ipp,
                                       problem.imm, problem.grid.dx, np.empty(problem.grid.nh))
    if problem.alpha == 0.0:
        return src
    return nc.tridiag_solve(problem.elliptic, src)


def bbm_rhs(problem, eta, timer=NULL_TIMER):
    """Time derivative ``L(eta)`` used by every Runge-Kutta stage."""
    timer.lap("other")
    f = bbm_flux(problem, eta)
    src = bbm_dispersion_source_kernel(eta, problem.omega, problem.ip, problem.im, problem.ipp,
                                       problem.imm, problem.grid.dx, np.empty(problem.grid.nh))
    timer.lap("flux_assembly")
    phi = nc.tridiag_solve(problem.elliptic, src) if problem.alpha != 0.0 else src
    timer.lap("linear_solves")
    return problem.mask * (phi - f - problem.nu * eta)


def bbm_dt(problem, eta, t=None):
    """CFL time step ``cfl dx / max(gamma + delta |eta|)``.

    With ``t`` given the step is shortened to land on ``t_end``.
    """
    lam = np.max(problem.gamma + problem.delta * np.abs(eta))
    if not np.isfinite(lam) or lam <= 0:
        raise SimulationAbort("non-finite or vanishing wave speed in the CFL bound")
    dt = problem.config.cfl * problem.grid.dx / lam
    if t is not None:
        dt = min(dt, problem.config.t_end - t)
    return dt


def shu_osher_step(u, dt, rhs, scheme=nc.SSPRK22):
    """One explicit Runge-Kutta step in Shu-Osher form; ``rhs(u, stage)``."""
    stages = [u]
    derivs = []
    for s in range(scheme.n_stages):
        derivs.append(rhs(stages[s], s))
        nxt = 0.0
        for r in range(s + 1):
            if scheme.rho[s][r] != 0.0:
                nxt = nxt + scheme.rho[s][r] * stages[r]
            if scheme.theta[s][r] != 0.0:
                nxt = nxt + (dt * scheme.theta[s][r]) * derivs[r]
        stages.append(nxt)
    return stages[-1]


def bbm_step(problem, state, dt, timer=NULL_TIMER):
    """Advance one SSPRK(2,2) IMEX step."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    eta = shu_osher_step(np.ascontiguousarray(state.eta, dtype=float), dt,
                         lambda u, s: bbm_rhs(problem, u, timer))
    if not np.all(np.isfinite(eta)):
        raise SimulationAbort("non-finite values in the BBM state",
                              step=state.step_index + 1, t=state.t + dt)
    return BbmState(eta, state.t + dt, state.step_index + 1)


def bbm_energy(problem, eta):
    """Discrete energy ``eta^T Theta eta`` with ``Theta = dx (I + alpha D^T D)``."""
    eta = np.asarray(eta, dtype=float)
    return float(eta @ (problem.theta @ eta))


def simulate_bbm(problem, eta0, n_out=2, t_end=None, replay=None, timer=NULL_TIMER):
    """Run the full-order model and return a :class:`~dwrom.timeloop.Trajectory`."""
    t_end = problem.config.t_end if t_end is None else t_end

    def advance(u, t, dt):
        return shu_osher_step(u, dt, lambda v, s: bbm_rhs(problem, v, timer))

    return march(np.ascontiguousarray(eta0, dtype=float), advance, t_end, n_out=n_out,
                 dt_fn=lambda u: bbm_dt(problem, u), replay=replay, timer=timer)


# ---------------------------------------------------------------------------
# Benchmarks
# ---------------------------------------------------------------------------
def _monochromatic_profile(x, a0):
    return a0 * np.cos(x / 10.0)


def _two_cosine_profile(x, a0):
    return -1.2 * a0 * np.cos(0.4 * np.pi * (x - 2.0)) + a0 / 10.0 * np.cos(0.8 * np.pi * x)


def _bore_profile(x, a0):
    return a0 * (1.0 - 1.0 / (1.0 + np.exp(-4.0 * (x - 5.0))))


def _sech_profile(x, a0):
    return a0 / np.cosh((x - 22.0) / 5.0)


def solitary_bar_bathymetry(x):
    """Trapezoidal bar: ramp up on (45, 55], plateau to 75, ramp down to 80."""
    x = np.asarray(x, dtype=float)
    b = np.zeros_like(x)
    up = (x > 45) & (x <= 55)
    b[up] = (x[up] - 45.0) / 10.0
    b[(x > 55) & (x <= 75)] = 1.0
    down = (x > 75) & (x <= 80)
    b[down] = -(x[down] - 80.0) / 5.0
    return 0.07 * b


INITIAL_PROFILES = {
    "cosine": _monochromatic_profile,
    "two_cosine": _two_cosine_profile,
    "bore": _bore_profile,
    "sech": _sech_profile,
}

BBM_BENCHMARKS = {
    "monochromatic": dict(x0=0.0, x1=20 * np.pi, nh=2000, bc=nc.PERIODIC, h0=1.0, g=9.81,
                          a0=0.04, cfl=0.2, t_end=200.0, initial="cosine", bathymetry="flat"),
    "undular_bore": dict(x0=0.0, x1=20 * np.pi, nh=2000, bc=nc.DIRICHLET_LEFT, h0=1.0, g=9.81,
                         a0=0.04, cfl=0.1, t_end=20.0, initial="bore", bathymetry="flat"),
    "solitary_bar": dict(x0=0.0, x1=100.0, nh=2000, bc=nc.PERIODIC, h0=1.0, g=9.81,
                         a0=0.1, cfl=0.1, t_end=60.0, initial="sech", bathymetry="bar"),
}


def bbm_benchmark(name, overrides=None):
    """Return ``(BbmConfig, eta0)`` for a named test case.

    ``overrides`` may replace any of ``x0, x1, nh, bc, h0, g, a0, p, cfl,
    t_end, d_cip`` and ``initial`` (one of :data:`INITIAL_PROFILES`).
    """
    if name not in BBM_BENCHMARKS:
        raise ConfigurationError(f"unknown BBM benchmark {name!r}; choose from {sorted(BBM_BENCHMARKS)}")
    case = dict(BBM_BENCHMARKS[name], p=0.0, d_cip=1.0)
    unknown = set(overrides or {}) - set(case)
    if unknown:
        raise ConfigurationError(f"unknown override(s) for {name}: {sorted(unknown)}")
    case.update(overrides or {})
    if case["initial"] not in INITIAL_PROFILES:
        raise ConfigurationError(f"unknown initial profile {case['initial']!r}")
    grid = nc.Grid1D(float(case["x0"]), float(case["x1"]), int(case["nh"]), case["bc"])
    bathy = solitary_bar_bathymetry(grid.x) if case["bathymetry"] == "bar" else np.zeros(grid.nh)
    config = BbmConfig(h0=float(case["h0"]), g=float(case["g"]), a0=float(case["a0"]), grid=grid,
                       p=float(case["p"]), cfl=float(case["cfl"]), t_end=float(case["t_end"]),
                       bathy=bathy, d_cip=float(case["d_cip"]), name=name)
    eta0 = INITIAL_PROFILES[case["initial"]](grid.x, config.a0)
    return config, eta0


def with_overrides(config, **changes):
    """Copy of a config with some fields replaced (validation re-run)."""
    return replace(config, **changes)
