"""Numerical substrate: uniform grids, centred stencils, CIP stabilisation,
(cyclic) tridiagonal and dense solvers, thin SVD and Shu-Osher RK tables.

Non-periodic grids close every stencil by constant extrapolation: the ghost
value beyond a boundary node is the boundary value itself.  Composite
operators (CIP, the elliptic matrices) apply that rule at each level, so
``D2`` on node ``-1`` is evaluated as ``D2`` on node ``0``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from numba import njit

from .errors import ConfigurationError, SingularMatrixError

PERIODIC = "periodic"
DIRICHLET_LEFT = "dirichlet-left-lifted"
EXTRAPOLATED = "extrapolated"
BOUNDARY_CONDITIONS = (PERIODIC, DIRICHLET_LEFT, EXTRAPOLATED)

#: pivot magnitude below which a system is declared singular
PIVOT_TOL = 1e-14


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D mesh.

    Periodic grids hold ``nh`` nodes on ``[x0, x1)``; other grids include
    both end points.
    """

    x0: float
    x1: float
    nh: int
    bc: str = PERIODIC

    def __post_init__(self):
        if self.bc not in BOUNDARY_CONDITIONS:
            raise ConfigurationError(f"unknown boundary condition {self.bc!r}")
        if int(self.nh) != self.nh or self.nh < 5:
            raise ConfigurationError("a grid needs at least 5 nodes")
        if not self.x1 > self.x0:
            raise ConfigurationError("x1 must be larger than x0")

    @property
    def periodic(self):
        return self.bc == PERIODIC

    @property
    def length(self):
        return self.x1 - self.x0

    @property
    def dx(self):
        if self.periodic:
            return (self.x1 - self.x0) / self.nh
        return (self.x1 - self.x0) / (self.nh - 1)

    @property
    def x(self):
        return self.x0 + self.dx * np.arange(self.nh)

    def shift(self, k):
        """Index array of the neighbour at offset ``k`` for every node."""
        idx = np.arange(self.nh) + k
        if self.periodic:
            return idx % self.nh
        return np.clip(idx, 0, self.nh - 1)

    @property
    def ip(self):
        return self.shift(1)

    @property
    def im(self):
        return self.shift(-1)

    def with_nodes(self, nh):
        return Grid1D(self.x0, self.x1, nh, self.bc)


def _check_len(v, grid, name="v"):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != grid.nh:
        raise ValueError(f"{name} must be a vector of length {grid.nh}, got shape {v.shape}")
    return v


# ---------------------------------------------------------------------------
# Stencils
# ---------------------------------------------------------------------------
def fd_apply(which, v, grid):
    """Apply the centred difference ``D``, ``D2`` or ``D3`` to a node vector."""
    v = _check_len(v, grid)
    dx = grid.dx
    if which == "D":
        return (v[grid.ip] - v[grid.im]) / (2 * dx)
    if which == "D2":
        return (v[grid.ip] - 2 * v + v[grid.im]) / dx**2
    if which == "D3":
        return (v[grid.shift(2)] - 2 * v[grid.ip] + 2 * v[grid.im] - v[grid.shift(-2)]) / (2 * dx**3)
    raise ValueError(f"unknown operator {which!r}; expected 'D', 'D2' or 'D3'")


def cip_apply(v, lam, d, grid):
    """Continuous-interior-penalty dissipation

    ``J_j = d dx^3 (lam_{j+1} D2v_{j+1} - 2 lam_j D2v_j + lam_{j-1} D2v_{j-1})``.
    """
    v = _check_len(v, grid)
    lam = _check_len(lam, grid, "lam")
    if d < 0:
        raise ValueError("the CIP coefficient must be non-negative")
    g = lam * fd_apply("D2", v, grid)
    return d * grid.dx**3 * (g[grid.ip] - 2 * g + g[grid.im])


def fd_matrix(which, grid):
    """Sparse matrix of ``fd_apply(which, ., grid)``."""
    n = grid.nh
    rows = np.arange(n)
    dx = grid.dx
    weights = {
        "D": {1: 1 / (2 * dx), -1: -1 / (2 * dx)},
        "D2": {1: 1 / dx**2, 0: -2 / dx**2, -1: 1 / dx**2},
        "D3": {2: 1 / (2 * dx**3), 1: -1 / dx**3, -1: 1 / dx**3, -2: -1 / (2 * dx**3)},
    }[which]
    mat = sp.csr_matrix((n, n))
    for k, w in weights.items():
        mat = mat + sp.csr_matrix((np.full(n, w), (rows, grid.shift(k))), shape=(n, n))
    return mat.tocsr()


# ---------------------------------------------------------------------------
# Tridiagonal matrices
# ---------------------------------------------------------------------------
@dataclass
class TriDiagMatrix:
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.ascontiguousarray(self.lower, dtype=float)
        self.diag = np.ascontiguousarray(self.diag, dtype=float)
        self.upper = np.ascontiguousarray(self.upper, dtype=float)
        n = self.diag.shape[0]
        if self.lower.shape != (n - 1,) or self.upper.shape != (n - 1,):
            raise ValueError("off-diagonals must have length n - 1")

    @property
    def n(self):
        return self.diag.shape[0]

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        y = self.diag * x if x.ndim == 1 else self.diag[:, None] * x
        if x.ndim == 1:
            y[1:] += self.lower * x[:-1]
            y[:-1] += self.upper * x[1:]
        else:
            y[1:] += self.lower[:, None] * x[:-1]
            y[:-1] += self.upper[:, None] * x[1:]
        return y

    def to_dense(self):
        return np.diag(self.diag) + np.diag(self.lower, -1) + np.diag(self.upper, 1)

    def to_sparse(self):
        return sp.diags([self.lower, self.diag, self.upper], [-1, 0, 1], format="csr")

    def scaled_add(self, other, alpha=1.0):
        """Return ``self + alpha * other`` (same structure)."""
        return TriDiagMatrix(self.lower + alpha * other.lower,
                             self.diag + alpha * other.diag,
                             self.upper + alpha * other.upper)


@dataclass
class CyclicTriDiagMatrix:
    """Tridiagonal core plus the two wrap-around entries of a periodic stencil.

    ``corner_lowleft`` sits at ``[n-1, 0]`` and ``corner_upright`` at ``[0, n-1]``.
    """

    core: TriDiagMatrix
    corner_lowleft: float = 0.0
    corner_upright: float = 0.0

    @property
    def n(self):
        return self.core.n

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        y = self.core.matvec(x)
        y[0] += self.corner_upright * x[-1]
        y[-1] += self.corner_lowleft * x[0]
        return y

    def to_dense(self):
        a = self.core.to_dense()
        a[0, -1] += self.corner_upright
        a[-1, 0] += self.corner_lowleft
        return a

    def to_sparse(self):
        n = self.n
        corners = sp.csr_matrix(([self.corner_upright, self.corner_lowleft], ([0, n - 1], [n - 1, 0])),
                                shape=(n, n))
        return (self.core.to_sparse() + corners).tocsr()

    def scaled_add(self, other, alpha=1.0):
        return CyclicTriDiagMatrix(self.core.scaled_add(other.core, alpha),
                                   self.corner_lowleft + alpha * other.corner_lowleft,
                                   self.corner_upright + alpha * other.corner_upright)


def stencil_matrix(grid, w_minus, w_center, w_plus):
    """Assemble the 3-point operator ``w_minus v_{j-1} + w_center v_j + w_plus v_{j+1}``
    with the grid's closure: wrap-around corners on periodic grids, ghost
    folding (constant extrapolation) otherwise.
    """
    n = grid.nh
    w_minus = np.broadcast_to(np.asarray(w_minus, dtype=float), (n,)).copy()
    w_center = np.broadcast_to(np.asarray(w_center, dtype=float), (n,)).copy()
    w_plus = np.broadcast_to(np.asarray(w_plus, dtype=float), (n,)).copy()
    if grid.periodic:
        core = TriDiagMatrix(w_minus[1:], w_center, w_plus[:-1])
        return CyclicTriDiagMatrix(core, corner_lowleft=w_plus[-1], corner_upright=w_minus[0])
    w_center[0] += w_minus[0]
    w_center[-1] += w_plus[-1]
    return TriDiagMatrix(w_minus[1:], w_center, w_plus[:-1])


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------
@njit(cache=True)
def _thomas_kernel(a, b, c, d, out, tol):
    n = b.shape[0]
    k = d.shape[1]
    cp = np.empty(n)
    piv = b[0]
    if abs(piv) <= tol:
        return 0
    if n > 1:
        cp[0] = c[0] / piv
    for col in range(k):
        out[0, col] = d[0, col] / piv
    for i in range(1, n):
        piv = b[i] - a[i - 1] * cp[i - 1]
        if abs(piv) <= tol:
            return i
        if i < n - 1:
            cp[i] = c[i] / piv
        for col in range(k):
            out[i, col] = (d[i, col] - a[i - 1] * out[i - 1, col]) / piv
    for i in range(n - 2, -1, -1):
        for col in range(k):
            out[i, col] -= cp[i] * out[i + 1, col]
    return -1


def _as_columns(rhs, n):
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != n or rhs.ndim not in (1, 2):
        raise ValueError(f"right-hand side has shape {rhs.shape}, expected ({n},) or ({n}, k)")
    return rhs.reshape(n, -1), rhs.ndim == 1


def thomas_solve(m, rhs):
    """Solve ``m x = rhs`` for a :class:`TriDiagMatrix` (one or several RHS columns)."""
    d, vector = _as_columns(rhs, m.n)
    out = np.empty_like(d)
    bad = _thomas_kernel(m.lower, m.diag, m.upper, np.ascontiguousarray(d), out, PIVOT_TOL)
    if bad >= 0:
        raise SingularMatrixError(f"Thomas elimination hit a vanishing pivot at row {bad}")
    return out[:, 0] if vector else out


@njit(cache=True)
def _cyclic_kernel(a, b, c, alpha, beta, d, out, tol):
    n = b.shape[0]
    k = d.shape[1]
    gamma = -b[0] if b[0] != 0.0 else -1.0
    diag = b.copy()
    diag[0] -= gamma
    diag[n - 1] -= alpha * beta / gamma
    cols = np.empty((n, k + 1))
    for i in range(n):
        for col in range(k):
            cols[i, col] = d[i, col]
        cols[i, k] = 0.0
    cols[0, k] = gamma
    cols[n - 1, k] = alpha
    sol = np.empty((n, k + 1))
    bad = _thomas_kernel(a, diag, c, cols, sol, tol)
    if bad >= 0:
        return bad
    ratio = beta / gamma
    denom = 1.0 + sol[0, k] + ratio * sol[n - 1, k]
    if abs(denom) < tol:
        return n
    for col in range(k):
        fac = (sol[0, col] + ratio * sol[n - 1, col]) / denom
        for i in range(n):
            out[i, col] = sol[i, col] - fac * sol[i, k]
    return -1


def cyclic_solve(m, rhs):
    """Solve a periodic tridiagonal system with a Sherman-Morrison rank-one correction.

    Both auxiliary solves share a single Thomas sweep (two RHS columns).
    """
    if m.corner_lowleft == 0.0 and m.corner_upright == 0.0:
        return thomas_solve(m.core, rhs)
    d, vector = _as_columns(rhs, m.n)
    out = np.empty_like(d)
    bad = _cyclic_kernel(m.core.lower, m.core.diag, m.core.upper, float(m.corner_lowleft),
                         float(m.corner_upright), np.ascontiguousarray(d), out, PIVOT_TOL)
    if bad >= 0:
        raise SingularMatrixError("periodic tridiagonal system is singular"
                                  + (" (degenerate rank-one correction)" if bad == m.n else
                                     f" (vanishing pivot at row {bad})"))
    return out[:, 0] if vector else out


def tridiag_solve(m, rhs):
    """Dispatch to :func:`thomas_solve` or :func:`cyclic_solve`."""
    if isinstance(m, CyclicTriDiagMatrix):
        return cyclic_solve(m, rhs)
    return thomas_solve(m, rhs)


class DenseLU:
    """LU factorisation (partial pivoting) of a small dense matrix, reused across solves."""

    def __init__(self, a):
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("dense_solve needs a square matrix")
        self.n = a.shape[0]
        scale = max(np.abs(a).max(), 1.0) if a.size else 1.0
        with warnings.catch_warnings():
            # singularity is reported below through the pivot test
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(a, check_finite=True) if self.n else (a, np.zeros(0, int))
        if self.n and np.abs(np.diag(lu)).min() <= PIVOT_TOL * scale:
            raise SingularMatrixError("zero pivot after partial pivoting")
        self._factor = (lu, piv)

    def solve(self, rhs):
        return sla.lu_solve(self._factor, rhs, check_finite=False)


def dense_solve(a, rhs):
    """Solve a dense (reduced) system by LU with partial pivoting."""
    return DenseLU(a).solve(np.asarray(rhs, dtype=float))


def thin_svd(s, return_vt=False):
    """Economy SVD ``s = U diag(sigma) Vt``; returns ``(U, sigma)`` (and ``Vt``)."""
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or min(s.shape) < 1:
        raise ValueError("thin_svd expects a non-empty 2D array")
    try:
        u, sigma, vt = sla.svd(s, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        u, sigma, vt = sla.svd(s, full_matrices=False, lapack_driver="gesvd")
    return (u, sigma, vt) if return_vt else (u, sigma)


# ---------------------------------------------------------------------------
# Shu-Osher Runge-Kutta tables
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class TimeScheme:
    """Explicit RK scheme in Shu-Osher form.

    Stage ``s`` (1-based) is ``u(s) = sum_r rho[s-1][r] u(r) + dt sum_r theta[s-1][r] L(u(r))``
    with ``r`` running over ``0..s-1``; ``u(0)`` is the step input.
    """

    rho: tuple
    theta: tuple
    name: str = ""
    stage_times: tuple = field(init=False)

    def __post_init__(self):
        if len(self.rho) != len(self.theta):
            raise ConfigurationError("rho and theta need the same number of stages")
        times = [0.0]
        for s, (rho_s, theta_s) in enumerate(zip(self.rho, self.theta)):
            if len(rho_s) != s + 1 or len(theta_s) != s + 1:
                raise ConfigurationError(f"stage {s + 1} must have {s + 1} coefficients")
            if abs(sum(rho_s) - 1.0) > 1e-14:
                raise ConfigurationError(f"rho row {s + 1} does not sum to one")
            times.append(sum(r * c for r, c in zip(rho_s, times)) + sum(theta_s))
        object.__setattr__(self, "stage_times", tuple(times))

    @property
    def n_stages(self):
        return len(self.rho)


SSPRK22 = TimeScheme(rho=((1.0,), (0.5, 0.5)), theta=((1.0,), (0.0, 0.5)), name="SSPRK(2,2)")
