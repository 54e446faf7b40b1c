"""Full-order P1 finite-element solver for the enhanced Boussinesq system
(Madsen-Sorensen dispersion constants) in conservative variables ``(eta, q)``.

Each SSPRK(2,2) stage performs three tridiagonal solves: the mass equation
with the sponge damping, the elliptic dispersive correction ``psi`` and the
momentum equation.  An optional internal wave generator forces the mass
equation and sponge layers absorb outgoing waves.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import numcore as nc
from .errors import ConfigurationError, DryStateError, SimulationAbort
from .timeloop import march
from .timing import NULL_TIMER

__all__ = [
    "WaveGenerator", "Sponge", "EbConfig", "EbState", "FemMatrices", "assemble_eb_matrices",
    "eb_nonlinear_ops", "wave_generator_value", "solitary_wave_init", "solitary_celerity",
    "eb_step", "eb_dt", "eb_benchmark", "simulate_eb", "EbModel", "EB_BENCHMARKS",
]

B2_DEFAULT = 1.0 / 15.0
B1_DEFAULT = B2_DEFAULT + 1.0 / 3.0


@dataclass
class WaveGenerator:
    """Internal generator ``h_iwg = A sin(2 pi t / period) Gamma exp(-(x - x_iwg)^2 / d^2)``."""

    x_iwg: float
    amplitude: float
    period: float = 2.525
    alpha_iwg: float = 4.0


@dataclass
class Sponge:
    """Absorbing layer between ``x_s1`` (inner edge) and ``x_s2`` (boundary side)."""

    x_s1: float
    x_s2: float
    n1: float = 1e-3
    n2: float = 10.0


@dataclass
class EbConfig:
    h0: float
    g: float
    a0: float
    grid: nc.Grid1D
    bathy: np.ndarray = None
    b1: float = B1_DEFAULT
    b2: float = B2_DEFAULT
    cfl: float = 0.5
    t_end: float = 1.0
    d_cip: float = 1.0
    generator: WaveGenerator = None
    sponges: list = field(default_factory=list)
    name: str = "custom"

    def __post_init__(self):
        if self.bathy is None:
            self.bathy = np.zeros(self.grid.nh)
        self.bathy = np.asarray(self.bathy, dtype=float)
        if self.bathy.shape != (self.grid.nh,):
            raise ConfigurationError("bathy must hold one value per grid node")
        if self.h0 <= 0 or self.g <= 0:
            raise ConfigurationError("h0 and g must be positive")
        if np.any(self.hbar <= 0):
            raise ConfigurationError("dry rest state: the bathymetry reaches the free surface")
        if not self.b1 > self.b2 > 0:
            raise ConfigurationError("dispersion constants must satisfy b1 > b2 > 0")
        if not 0.0 < self.cfl < 1.0:
            raise ConfigurationError("cfl must lie in (0, 1)")
        lo, hi = self.grid.x0, self.grid.x1
        if self.generator is not None and not lo <= self.generator.x_iwg <= hi:
            raise ConfigurationError("the wave generator lies outside the domain")
        for s in self.sponges:
            if not (lo - 1e-12 <= min(s.x_s1, s.x_s2) and max(s.x_s1, s.x_s2) <= hi + 1e-12):
                raise ConfigurationError("a sponge layer lies outside the domain")
            if s.x_s1 == s.x_s2:
                raise ConfigurationError("a sponge layer has zero width")

    @property
    def hbar(self):
        return self.h0 - self.bathy


@dataclass
class EbState:
    eta: np.ndarray
    q: np.ndarray
    t: float = 0.0


@dataclass
class FemMatrices:
    """Tridiagonal FEM operators.  ``tt = tt_main + tt_grad``; ``T^x eta = (tx1 + tx2) w``
    with ``w = wop eta`` the nodal second difference."""

    mass: object
    tt: object
    tt_main: object
    tt_grad: object
    tx1: object
    tx2: object
    wop: object
    sponge: object
    m_minus_tt: object
    nu: np.ndarray
    _lhs_cache: dict = field(default_factory=dict, repr=False)

    def lhs_eta(self, dt):
        """``M + dt S`` (the same matrix serves the mass and momentum stages)."""
        key = float(dt)
        for cached_dt, mat in self._lhs_cache.items():
            if abs(cached_dt - key) <= 1e-12 * abs(key):
                return mat
        if len(self._lhs_cache) > 8:
            self._lhs_cache.clear()
        mat = self.mass.scaled_add(self.sponge, key)
        self._lhs_cache[key] = mat
        return mat

    def tx_apply(self, eta):
        w = self.wop.matvec(eta)
        return self.tx1.matvec(w) + self.tx2.matvec(w)

    def tx_dense(self):
        return (self.tx1.to_dense() + self.tx2.to_dense()) @ self.wop.to_dense()


def sponge_profile(x, sponges):
    nu = np.zeros_like(np.asarray(x, dtype=float))
    for s in sponges:
        lo, hi = min(s.x_s1, s.x_s2), max(s.x_s1, s.x_s2)
        inside = (x >= lo) & (x <= hi)
        r = (x[inside] - s.x_s1) / (s.x_s2 - s.x_s1)
        nu[inside] += s.n1 * (1.0 - np.exp(s.n2 * r)) / (1.0 - np.e)
    return nu


def assemble_eb_matrices(config):
    """Assemble mass, dispersion, sponge and auxiliary second-difference matrices.

    Neighbour depths beyond a non-periodic boundary are the boundary depth
    itself, and the resulting ghost coefficients are folded into the diagonal.
    """
    grid = config.grid
    if np.any(config.hbar <= 0):
        raise ConfigurationError("dry rest state")
    dx = grid.dx
    h = config.hbar
    hm, hp = h[grid.im], h[grid.ip]

    mass = nc.stencil_matrix(grid, dx / 6.0, 4.0 * dx / 6.0, dx / 6.0)

    # B1 h^2 d_xx with the depth frozen at the row node
    tt_main = nc.stencil_matrix(grid, config.b1 * h**2 / dx, -2.0 * config.b1 * h**2 / dx,
                                config.b1 * h**2 / dx)
    # (1/3) h h_x d_x, exact P1 Galerkin form
    a = (h - hm) * (2.0 * h + hm)
    b = (hp - h) * (2.0 * h + hp)
    tt_grad = nc.stencil_matrix(grid, -a / (18.0 * dx), (a - b) / (18.0 * dx), b / (18.0 * dx))
    tt = tt_main.scaled_add(tt_grad)

    # -(g B2) Galerkin of h^3 w_x and of 2 h^2 h_x w, Simpson rule per element
    s_left = (h + hm) ** 3 / 4.0 + h**3
    s_right = (h + hp) ** 3 / 4.0 + h**3
    c1 = -config.g * config.b2 / 6.0
    tx1 = nc.stencil_matrix(grid, -c1 * s_left, c1 * (s_left - s_right), c1 * s_right)
    q_left = (h + hm) ** 2 / 4.0
    q_right = (h + hp) ** 2 / 4.0
    c2 = -config.g * config.b2 / 3.0
    tx2 = nc.stencil_matrix(grid, c2 * (h - hm) * q_left,
                            c2 * ((h - hm) * (q_left + h**2) + (hp - h) * (q_right + h**2)),
                            c2 * (hp - h) * q_right)
    wop = nc.stencil_matrix(grid, 1.0 / dx**2, -2.0 / dx**2, 1.0 / dx**2)

    nu = sponge_profile(grid.x, config.sponges)
    num, nup = nu[grid.im], nu[grid.ip]
    sponge = nc.stencil_matrix(grid, -(nu + num) / (8.0 * dx), (num + 2.0 * nu + nup) / (8.0 * dx),
                               -(nu + nup) / (8.0 * dx))
    m_minus_tt = mass.scaled_add(tt, -1.0)
    return FemMatrices(mass, tt, tt_main, tt_grad, tx1, tx2, wop, sponge, m_minus_tt, nu)


# ---------------------------------------------------------------------------
# Nonlinear operators
# ---------------------------------------------------------------------------
@njit(cache=True)
def eb_flux_kernel(eta, q, hbar, ip, im, dx, g, d, n_eta, n_q, j_eta, j_q):
    """Fill ``N^eta, N^q`` and the CIP terms ``J(eta), J(q)``; returns the first dry node or -1."""
    n = eta.shape[0]
    h = np.empty(n)
    lam = np.empty(n)
    qu = np.empty(n)
    for j in range(n):
        h[j] = hbar[j] + eta[j]
        if not h[j] > 0.0:
            return j
        u = q[j] / h[j]
        qu[j] = q[j] * u
        lam[j] = abs(u) + np.sqrt(g * h[j])
    ge = np.empty(n)
    gq = np.empty(n)
    for j in range(n):
        ge[j] = lam[j] * (eta[ip[j]] - 2.0 * eta[j] + eta[im[j]]) / (dx * dx)
        gq[j] = lam[j] * (q[ip[j]] - 2.0 * q[j] + q[im[j]]) / (dx * dx)
    c = d * dx * dx * dx
    for j in range(n):
        jp, jm = ip[j], im[j]
        n_eta[j] = 0.5 * (q[jp] - q[jm])
        n_q[j] = (0.5 * (qu[jp] - qu[jm])
                  + g / 6.0 * ((2.0 * h[j] + h[jp]) * (eta[jp] - eta[j])
                               + (2.0 * h[j] + h[jm]) * (eta[j] - eta[jm])))
        j_eta[j] = c * (ge[jp] - 2.0 * ge[j] + ge[jm])
        j_q[j] = c * (gq[jp] - 2.0 * gq[j] + gq[jm])
    return -1


@njit(cache=True)
def eb_flux_stencil_kernel(ve, vq, hb, dx, g, d, n_eta, n_q, j_q):
    """Point-wise version of :func:`eb_flux_kernel`.

    ``ve``/``vq`` rows hold eta/q on the 7-node stencil ``[j, j+, j-, (j+)+,
    (j+)-, (j-)+, (j-)-]`` and ``hb`` the rest depth on the same nodes.
    ``n_eta`` receives ``N^eta + J(eta)``.  Returns the first dry row or -1.
    """
    c = d * dx * dx * dx
    for i in range(ve.shape[0]):
        lam = np.empty(3)
        hh = np.empty(7)
        for k in range(7):
            hh[k] = hb[i, k] + ve[i, k]
            if not hh[k] > 0.0:
                return i
        for k in range(3):
            lam[k] = abs(vq[i, k] / hh[k]) + np.sqrt(g * hh[k])
        ge0 = lam[0] * (ve[i, 1] - 2.0 * ve[i, 0] + ve[i, 2]) / (dx * dx)
        gep = lam[1] * (ve[i, 3] - 2.0 * ve[i, 1] + ve[i, 4]) / (dx * dx)
        gem = lam[2] * (ve[i, 5] - 2.0 * ve[i, 2] + ve[i, 6]) / (dx * dx)
        gq0 = lam[0] * (vq[i, 1] - 2.0 * vq[i, 0] + vq[i, 2]) / (dx * dx)
        gqp = lam[1] * (vq[i, 3] - 2.0 * vq[i, 1] + vq[i, 4]) / (dx * dx)
        gqm = lam[2] * (vq[i, 5] - 2.0 * vq[i, 2] + vq[i, 6]) / (dx * dx)
        qup = vq[i, 1] * (vq[i, 1] / hh[1])
        qum = vq[i, 2] * (vq[i, 2] / hh[2])
        n_eta[i] = 0.5 * (vq[i, 1] - vq[i, 2]) + c * (gep - 2.0 * ge0 + gem)
        n_q[i] = (0.5 * (qup - qum)
                  + g / 6.0 * ((2.0 * hh[0] + hh[1]) * (ve[i, 1] - ve[i, 0])
                               + (2.0 * hh[0] + hh[2]) * (ve[i, 0] - ve[i, 2])))
        j_q[i] = c * (gqp - 2.0 * gq0 + gqm)
    return -1


def eb_fluxes(config, eta, q, ip=None, im=None):
    """Return ``(N^eta, N^q, J(eta), J(q))``; raises :class:`DryStateError`."""
    grid = config.grid
    n = grid.nh
    ip = grid.ip if ip is None else ip
    im = grid.im if im is None else im
    out = [np.empty(n) for _ in range(4)]
    bad = eb_flux_kernel(np.ascontiguousarray(eta, dtype=float), np.ascontiguousarray(q, dtype=float),
                         config.hbar, ip, im, grid.dx, config.g, config.d_cip, *out)
    if bad >= 0:
        raise DryStateError(f"dry state: total depth is non-positive at node {bad} "
                            f"(x = {grid.x[bad]:.4g})")
    return tuple(out)


def eb_nonlinear_ops(config, eta, q):
    """``(N^eta + J(eta), N^q + J(q))`` with ``lambda = |u| + sqrt(g h)``."""
    ne, nq, je, jq = eb_fluxes(config, eta, q)
    return ne + je, nq + jq


# ---------------------------------------------------------------------------
# Forcing and initial data
# ---------------------------------------------------------------------------
def generator_profile(config):
    gen = config.generator
    gamma = 0.185 * np.sqrt(config.g / config.h0) * gen.period
    d2 = config.g * gen.alpha_iwg**2 * config.h0 * gen.period**2 / 80.0
    return gamma * np.exp(-((config.grid.x - gen.x_iwg) ** 2) / d2)


def wave_generator_value(config, t):
    """Return ``(A sin(2 pi t / T), f_iwg)`` so that ``h_iwg = amplitude * profile``."""
    if config.generator is None:
        return 0.0, np.zeros(config.grid.nh)
    gen = config.generator
    return gen.amplitude * np.sin(2.0 * np.pi * t / gen.period), generator_profile(config)


def solitary_celerity(a0, h0, g):
    """Celerity from the consistency condition of the travelling-wave ODE."""
    if a0 <= 0 or h0 <= 0:
        raise ConfigurationError("solitary waves need a0 > 0 and h0 > 0")
    eps = a0 / h0
    ratio = eps**2 / 2.0 * (1.0 + eps / 3.0) / (eps - np.log1p(eps))
    return np.sqrt(ratio * g * h0)


def solitary_wave_init(a0, h0, g, grid, x_center, b1=B1_DEFAULT, b2=B2_DEFAULT):
    """Solitary-wave profile on a flat bottom.

    Integrates the first integral of the travelling-wave equation
    ``D h0^2 eta'' = C^2 eta - C^2 eta^2 / (h0 + eta) - g h0 eta - g eta^2 / 2``
    (``D = b1 C^2 - g b2 h0``) with RK4 at ``dx / 10`` from the crest outwards
    and interpolates the symmetric profile onto the grid.

    Returns ``(eta0, q0, C)`` with ``q0 = C eta0``.
    """
    c = solitary_celerity(a0, h0, g)
    c2 = c * c
    disp = (b1 * c2 - g * b2 * h0) * h0**2
    if disp <= 0:
        raise ConfigurationError("travelling-wave equation has a non-positive dispersion coefficient")

    def force(e):
        return c2 * e - c2 * e * e / (h0 + e) - g * h0 * e - 0.5 * g * e * e

    def potential(e):
        # integral of force from 0 to e
        return (c2 * e * e / 2.0 - c2 * (e * e / 2.0 - h0 * e + h0 * h0 * np.log1p(e / h0))
                - g * h0 * e * e / 2.0 - g * e**3 / 6.0)

    def slope(e):
        return -np.sqrt(max(2.0 * potential(e), 0.0) / disp)

    step = grid.dx / 10.0
    curv = force(a0) / disp
    if not curv < 0:
        raise ConfigurationError("solitary-wave profile does not decay from the crest")
    half_length = grid.length if grid.periodic else max(x_center - grid.x0, grid.x1 - x_center)
    n_fine = int(np.ceil(half_length / step)) + 2
    r = step * np.arange(n_fine)
    prof = np.zeros(n_fine)
    prof[0] = a0
    prof[1] = a0 + 0.5 * curv * step**2
    floor = 1e-10 * a0
    for k in range(1, n_fine - 1):
        e = prof[k]
        if e < floor:
            break
        k1 = slope(e)
        k2 = slope(e + 0.5 * step * k1)
        k3 = slope(e + 0.5 * step * k2)
        k4 = slope(e + step * k3)
        prof[k + 1] = max(e + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), 0.0)
    prof[prof < floor] = 0.0
    dist = np.abs(grid.x - x_center)
    if grid.periodic:
        dist = np.minimum(dist, grid.length - dist)
    eta0 = np.interp(dist, r, prof, right=0.0)
    return eta0, c * eta0, c


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------
class EbModel:
    """Config, assembled matrices and cached neighbour maps of one EB problem."""

    def __init__(self, config, matrices=None):
        self.config = config
        self.matrices = assemble_eb_matrices(config) if matrices is None else matrices
        self.ip = config.grid.ip
        self.im = config.grid.im
        self.f_iwg = generator_profile(config) if config.generator is not None else None

    @property
    def nh(self):
        return self.config.grid.nh

    def h_iwg(self, t):
        if self.f_iwg is None:
            return None
        amp, _ = wave_generator_value(self.config, t)
        return amp * self.f_iwg


def _eb_stage_terms(model, eta, q, timer):
    mats = model.matrices
    timer.lap("other")
    ne, nq, je, jq = eb_fluxes(model.config, eta, q, model.ip, model.im)
    timer.lap("flux_assembly")
    minv_nq = nc.tridiag_solve(mats.mass, nq)
    rhs_psi = -(mats.tt.matvec(minv_nq) + mats.tx_apply(eta))
    psi = nc.tridiag_solve(mats.m_minus_tt, rhs_psi)
    timer.lap("linear_solves")
    return ne + je, nq + jq, psi


def eb_advance(model, eta, q, t, dt, timer=NULL_TIMER, scheme=nc.SSPRK22):
    """One SSPRK(2,2) step of the FEM system; returns ``(eta, q)``."""
    mats = model.matrices
    lhs = mats.lhs_eta(dt)
    etas, qs, terms, gens = [eta], [q], [], []
    for s in range(scheme.n_stages + 1):
        gens.append(model.h_iwg(t + scheme.stage_times[s] * dt))
    for s in range(scheme.n_stages):
        terms.append(_eb_stage_terms(model, etas[s], qs[s], timer))
        comb_eta = 0.0
        comb_q = 0.0
        flux_eta = 0.0
        flux_q = 0.0
        for r in range(s + 1):
            rho, theta = scheme.rho[s][r], scheme.theta[s][r]
            if rho != 0.0:
                comb_eta = comb_eta + rho * (etas[r] if gens[r] is None else etas[r] + gens[r])
                comb_q = comb_q + rho * qs[r]
            if theta != 0.0:
                e_r, q_r, psi_r = terms[r]
                flux_eta = flux_eta + theta * e_r
                flux_q = flux_q + theta * (mats.mass.matvec(psi_r) - q_r)
        if gens[s + 1] is not None:
            comb_eta = comb_eta - gens[s + 1]
        rhs_eta = mats.mass.matvec(comb_eta) - dt * flux_eta
        rhs_q = mats.mass.matvec(comb_q) + dt * flux_q
        timer.lap("other")
        sol = nc.tridiag_solve(lhs, np.column_stack((rhs_eta, rhs_q)))
        timer.lap("linear_solves")
        etas.append(np.ascontiguousarray(sol[:, 0]))
        qs.append(np.ascontiguousarray(sol[:, 1]))
    return etas[-1], qs[-1]


def eb_step(config, matrices, state, dt, model=None, timer=NULL_TIMER):
    """Advance an :class:`EbState` by one SSPRK(2,2) step."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    model = EbModel(config, matrices) if model is None else model
    eta, q = eb_advance(model, np.asarray(state.eta, float), np.asarray(state.q, float), state.t, dt,
                        timer)
    if not (np.all(np.isfinite(eta)) and np.all(np.isfinite(q))):
        raise SimulationAbort("non-finite values in the Boussinesq state", t=state.t + dt)
    if np.any(config.hbar + eta <= 0):
        raise DryStateError("dry state after the step", t=state.t + dt)
    return EbState(eta, q, state.t + dt)


def eb_dt(config, state):
    """CFL step ``cfl dx / max(|q/h| + sqrt(g h))``."""
    h = config.hbar + np.asarray(state.eta, float)
    if np.any(h <= 0):
        raise DryStateError("dry state in the CFL evaluation")
    lam = np.max(np.abs(np.asarray(state.q, float) / h) + np.sqrt(config.g * h))
    if not np.isfinite(lam):
        raise SimulationAbort("non-finite wave speed in the CFL bound")
    return config.cfl * config.grid.dx / lam


def simulate_eb(model, state0, n_out=2, t_end=None, replay=None, timer=NULL_TIMER):
    """Run the FEM model; trajectory columns stack ``[eta; q]``."""
    config = model.config
    t_end = config.t_end if t_end is None else t_end
    n = model.nh

    def advance(u, t, dt):
        eta, q = eb_advance(model, u[:n], u[n:], t, dt, timer)
        return np.concatenate((eta, q))

    def dt_fn(u):
        return eb_dt(config, EbState(u[:n], u[n:]))

    u0 = np.concatenate((np.asarray(state0.eta, float), np.asarray(state0.q, float)))
    return march(u0, advance, t_end, n_out=n_out, dt_fn=dt_fn, replay=replay, timer=timer)


# ---------------------------------------------------------------------------
# Benchmarks
# ---------------------------------------------------------------------------
def trapezoid(x, height, x_a, x_b, x_c, x_d):
    """Bar rising linearly on [x_a, x_b], flat on [x_b, x_c], falling on [x_c, x_d]."""
    x = np.asarray(x, dtype=float)
    b = np.zeros_like(x)
    up = (x > x_a) & (x <= x_b)
    b[up] = (x[up] - x_a) / (x_b - x_a)
    b[(x > x_b) & (x <= x_c)] = 1.0
    down = (x > x_c) & (x < x_d)
    b[down] = (x_d - x[down]) / (x_d - x_c)
    return height * b


EB_BENCHMARKS = {
    "solitary_bar": dict(x0=-20.0, x1=30.0, nh=2000, bc=nc.PERIODIC, h0=1.0, g=9.81, a0=0.2,
                         cfl=0.5, t_end=18.0, bar=(0.2, 11.0, 17.0, 19.0, 22.0), x_center=5.0,
                         x_iwg=None, sponges=()),
    "monochromatic_bar": dict(x0=0.0, x1=35.0, nh=1400, bc=nc.EXTRAPOLATED, h0=0.5, g=9.81,
                              a0=0.027, cfl=0.5, t_end=40.0, bar=(0.3, 15.0, 21.0, 23.0, 26.0),
                              x_center=None, x_iwg=10.0, sponges=((5.0, 0.0), (30.0, 35.0))),
}


def eb_benchmark(name, overrides=None):
    """Return ``(EbConfig, EbState)`` for a named test case.

    ``overrides`` may replace ``x0, x1, nh, bc, h0, g, a0, cfl, t_end, d_cip,
    b1, b2``, the bar geometry ``bar = (height, xa, xb, xc, xd)`` (``None``
    for a flat bottom), ``x_center``, ``x_iwg``, ``amplitude`` and
    ``sponges`` (pairs ``(x_s1, x_s2)``).
    """
    if name not in EB_BENCHMARKS:
        raise ConfigurationError(f"unknown EB benchmark {name!r}; choose from {sorted(EB_BENCHMARKS)}")
    case = dict(EB_BENCHMARKS[name], d_cip=1.0, b1=B1_DEFAULT, b2=B2_DEFAULT, amplitude=None)
    unknown = set(overrides or {}) - set(case)
    if unknown:
        raise ConfigurationError(f"unknown override(s) for {name}: {sorted(unknown)}")
    case.update(overrides or {})
    grid = nc.Grid1D(float(case["x0"]), float(case["x1"]), int(case["nh"]), case["bc"])
    bathy = np.zeros(grid.nh) if case["bar"] is None else trapezoid(grid.x, *case["bar"])
    generator = None
    if case["x_iwg"] is not None:
        amp = case["a0"] if case["amplitude"] is None else case["amplitude"]
        generator = WaveGenerator(x_iwg=float(case["x_iwg"]), amplitude=float(amp))
    sponges = [Sponge(float(a), float(b)) for a, b in case["sponges"]]
    config = EbConfig(h0=float(case["h0"]), g=float(case["g"]), a0=float(case["a0"]), grid=grid,
                      bathy=bathy, b1=float(case["b1"]), b2=float(case["b2"]), cfl=float(case["cfl"]),
                      t_end=float(case["t_end"]), d_cip=float(case["d_cip"]), generator=generator,
                      sponges=sponges, name=name)
    if case["x_center"] is not None:
        eta0, q0, _ = solitary_wave_init(config.a0, config.h0, config.g, grid, float(case["x_center"]),
                                         config.b1, config.b2)
    else:
        eta0, q0 = np.zeros(grid.nh), np.zeros(grid.nh)
    return config, EbState(eta0, q0, 0.0)
