"""Leapfrog solvers for the mode-wise Darboux equation.

For each angular order m the unknown U(s, r) satisfies

    U_rr + (n-1) coth(r) U_r = U_ss + (n-1) coth(s) U_s - m(m+n-2)/sinh(s)^2 U

(cot/sin on the sphere). The scheme is the centred leapfrog in r with two
terms taken implicitly, both of which only touch the new and old time levels
at the same grid point: the drift (n-1) coth(r) U_r, which is large near
r = 0, and the potential m(m+n-2)/sinh^2(s) U, which is large near s = 0.
Each update therefore stays a pointwise division.

All routines work on a block of modes at once: arrays of shape (M, Ns) with
one row per mode and the orders in `ms`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .radial import HYPERBOLIC, radial_geometry

CFL_LIMIT = 0.9


@dataclass(frozen=True)
class DarbouxGrid:
    ds: float
    dr: float
    s_grid: np.ndarray
    r_grid: np.ndarray
    i_R: int  # index of s = R

    @property
    def cfl(self) -> float:
        return self.dr / self.ds


def make_grid(R, n_s, n_r, r_max, s_max=None) -> DarbouxGrid:
    """Uniform grids: n_r samples on [0, r_max]; about n_s samples on [0, s_max].

    The s spacing is shrunk so that R falls exactly on a grid point.
    """
    if s_max is None:
        s_max = R + r_max
    if n_s < 8 or n_r < 8:
        raise ValueError("need at least 8 samples in s and r")
    dr = r_max / (n_r - 1)
    ds = s_max / (n_s - 1)
    k = int(math.ceil(R / ds - 1e-9))
    ds = R / k
    ns = int(math.ceil(s_max / ds - 1e-9)) + 1
    return DarbouxGrid(ds, dr, ds * np.arange(ns), dr * np.arange(n_r), k)


def check_cfl(ds, dr):
    if dr > CFL_LIMIT * ds * (1 + 1e-12):
        raise ValueError(
            f"CFL violation: dr={dr:.6g} exceeds {CFL_LIMIT} * ds = {CFL_LIMIT * ds:.6g}; "
            "refine the r grid or coarsen the s grid"
        )


class _Operator:
    """Centred D_{m,s} without the potential, plus the potential itself."""

    def __init__(self, geometry, n, ms, s):
        g = radial_geometry(geometry)
        self.n = n
        self.ms = np.asarray(ms, dtype=int)
        self.ds = s[1] - s[0]
        safe = np.where(s > 0, s, 1.0)
        if g == HYPERBOLIC:
            cot, inv = 1.0 / np.tanh(safe), 1.0 / np.sinh(safe) ** 2
        else:
            cot, inv = 1.0 / np.tan(safe), 1.0 / np.sin(safe) ** 2
        cot[s == 0] = 0.0
        inv[s == 0] = 0.0
        self.drift = (n - 1) * cot
        M = self.ms * (self.ms + n - 2)
        self.V = M[:, None] * inv[None, :]
        self.centre_free = self.ms == 0  # rows whose value at s = 0 evolves

    def apply0(self, U):
        """Second-order D_{0,s} U on interior points and the s = 0 limit."""
        ds = self.ds
        out = np.zeros_like(U)
        c = self.drift[1:-1]
        out[:, 1:-1] = (U[:, 2:] - 2 * U[:, 1:-1] + U[:, :-2]) / ds**2 + c * (U[:, 2:] - U[:, :-2]) / (2 * ds)
        # U_s(0) = 0: the operator tends to n U_ss, with U(-ds) = U(ds)
        out[:, 0] = self.n * 2.0 * (U[:, 1] - U[:, 0]) / ds**2
        return out

    def apply(self, U):
        return self.apply0(U) - self.V * U

    def banded_identity_plus(self, coef, row):
        """Banded form of I + coef * D_{m,s} for one mode, Dirichlet at both ends
        except the free centre row of m = 0."""
        ds = self.ds
        N = self.V.shape[1]
        ab = np.zeros((3, N))
        c = self.drift
        lower = coef * (1.0 / ds**2 - c / (2 * ds))
        diag = 1.0 + coef * (-2.0 / ds**2 - self.V[row])
        upper = coef * (1.0 / ds**2 + c / (2 * ds))
        ab[0, 1:] = upper[:-1]
        ab[1] = diag
        ab[2, :-1] = lower[1:]
        if self.centre_free[row]:
            ab[1, 0] = 1.0 - coef * 2.0 * self.n / ds**2
            ab[0, 1] = coef * 2.0 * self.n / ds**2
        else:
            ab[1, 0] = 1.0
            ab[0, 1] = 0.0
        ab[1, -1] = 1.0
        ab[2, -2] = 0.0
        return ab


def _r_drift(geometry, n, r):
    if radial_geometry(geometry) == HYPERBOLIC:
        return (n - 1) / math.tanh(r)
    return (n - 1) / math.tan(r)


def _pin(U, op, outer):
    U[~op.centre_free, 0] = 0.0
    U[:, -1] = outer


def forward_modes(F, ms, geometry, grid: DarbouxGrid, n=2, keep_field=False):
    """Forward Darboux evolution from U(s, 0) = F, U_r(s, 0) = 0.

    F has shape (M, Ns) on grid.s_grid; U = 0 is imposed at s = s_max, which
    is exact while r <= s_max - R for data supported in [0, R]. Returns the
    trace U(R, r) with shape (M, Nr), and the full field (M, Nr, Ns) when
    keep_field is set.
    """
    check_cfl(grid.ds, grid.dr)
    F = np.atleast_2d(np.asarray(F, dtype=float))
    op = _Operator(geometry, n, ms, grid.s_grid)
    dr = grid.dr
    Nr = grid.r_grid.size
    trace = np.empty((F.shape[0], Nr))
    field = np.empty((F.shape[0], Nr, F.shape[1])) if keep_field else None
    prev = F.copy()
    _pin(prev, op, 0.0)
    # first step from the limit n U_rr = D_m U at r = 0
    cur = prev + dr**2 / (2 * n) * op.apply(prev)
    _pin(cur, op, 0.0)
    trace[:, 0] = prev[:, grid.i_R]
    trace[:, 1] = cur[:, grid.i_R]
    if keep_field:
        field[:, 0], field[:, 1] = prev, cur
    a = 1.0 / dr**2
    halfV = 0.5 * op.V
    for j in range(1, Nr - 1):
        b = _r_drift(geometry, n, grid.r_grid[j]) / (2 * dr)
        nxt = (2 * a * cur + op.apply0(cur) + (b - a - halfV) * prev) / (a + b + halfV)
        _pin(nxt, op, 0.0)
        prev, cur = cur, nxt
        trace[:, j + 1] = cur[:, grid.i_R]
        if keep_field:
            field[:, j + 1] = cur
    return trace, field


@dataclass
class BackwardResult:
    U: np.ndarray  # (M, Nr, Ns) on [0, R] x r_grid
    start_index: int


def backward_modes(G, ms, geometry, ds, dr, R, r_grid, n=2, terminal=None) -> BackwardResult:
    """Time-reversed Darboux problem on [0, R] x [0, 2R] with lateral data G.

    G has shape (M, Nr): the boundary values U(R, r_k). The march starts at
    the first grid radius >= 2R with zero data there and one step above, and
    ends with the limit relation U(s, dr) = (I + dr^2/(2n) D_m) U(s, 0).
    terminal = (U_J, U_J+1), each (M, Ns), replaces the zero data; it serves
    manufactured-solution checks.
    """
    check_cfl(ds, dr)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    K = int(round(R / ds))
    if abs(K * ds - R) > 1e-9 * R:
        raise ValueError("R must be a multiple of ds")
    s = ds * np.arange(K + 1)
    op = _Operator(geometry, n, ms, s)
    Nr = r_grid.size
    J = int(np.searchsorted(r_grid, 2 * R - 1e-9 * R))
    if J >= Nr:
        raise ValueError(f"r grid ends at {r_grid[-1]:.6g}, before 2R = {2 * R:.6g}")
    M = G.shape[0]
    U = np.zeros((M, Nr, K + 1))
    U[:, :, -1] = G
    a = 1.0 / dr**2
    halfV = 0.5 * op.V
    if terminal is not None:
        U[:, J] = terminal[0]
        if J + 1 < Nr:
            U[:, J + 1] = terminal[1]
    cur = U[:, J].copy()
    if J + 1 < Nr:
        nxt = U[:, J + 1].copy()
    else:
        nxt = np.array(terminal[1], dtype=float) if terminal is not None else np.zeros((M, K + 1))
    for j in range(J, 1, -1):
        b = _r_drift(geometry, n, r_grid[j]) / (2 * dr)
        prev = (op.apply0(cur) + 2 * a * cur - (a + b + halfV) * nxt) / (a - b + halfV)
        _pin(prev, op, G[:, j - 1])
        U[:, j - 1] = prev
        nxt, cur = cur, prev
    # final level from the r = 0 limit, a tridiagonal solve per mode
    coef = dr**2 / (2 * n)
    U1 = U[:, 1]
    for row in range(M):
        rhs = U1[row].copy()
        if not op.centre_free[row]:
            rhs[0] = 0.0
        rhs[-1] = G[row, 0]
        U[row, 0] = solve_banded((1, 1), op.banded_identity_plus(coef, row), rhs)
    return BackwardResult(U, J)
