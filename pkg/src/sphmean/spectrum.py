"""Dirichlet eigenpairs of the Laplace-Beltrami operator on a geodesic disc.

Separation in geodesic polar coordinates gives phi = c h_{m,lam}(s) Theta(theta)
with Dirichlet condition h_{m,lam}(R) = 0, so each angular order contributes
the zeros in lam of the shooting function lam -> h_{m,lam}(R).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import eigh_tridiagonal

from .geometry import H2, S2
from .radial import (
    HYPERBOLIC,
    RadialSolution,
    SpectralParameter,
    radial_geometry,
    shoot,
    spectral_energy,
)

BASIS_VERSION = 1
SCAN_STEP = 0.05
ROOT_TOL = 1e-10
DEFAULT_GRID = 2001


class SpectrumRangeError(ValueError):
    """Fewer eigenvalues than requested below the scan limit."""


def _check_ball(geometry, R):
    g = radial_geometry(geometry)
    if not R > 0:
        raise ValueError(f"ball radius must be positive, got {R}")
    if g != HYPERBOLIC and not R < np.pi / 2:
        raise ValueError(f"spherical caps need 0 < R < pi/2, got R={R}")
    return g


def _boundary_values(geometry, m, lams, R, N):
    # same grid as the stored profiles, so h(R) of the refined root is
    # reproduced exactly when the profile is shot again
    vals, _ = shoot(geometry, 2, m, lams, np.linspace(0.0, R, N))
    return vals[:, -1]


def _refine(geometry, m, R, N, lo, hi, flo, fhi, tol=ROOT_TOL, max_iter=100):
    """Vectorized Illinois (modified regula falsi) on sign-change brackets.

    Illinois converges superlinearly from one side, so an iterate that moves
    by less than tol/10 is accepted even if the far bracket end is stale.
    """
    lo, hi, flo, fhi = (np.array(v, dtype=float) for v in (lo, hi, flo, fhi))
    side = np.zeros(lo.size, dtype=int)
    active = np.ones(lo.size, dtype=bool)
    x = np.full(lo.size, np.inf)
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        a, b, fa, fb = lo[idx], hi[idx], flo[idx], fhi[idx]
        xi = (a * fb - b * fa) / (fb - fa)
        bad = ~((xi > a) & (xi < b))
        xi[bad] = 0.5 * (a[bad] + b[bad])
        fx = _boundary_values(geometry, m, xi, R, N)
        step = np.abs(xi - x[idx])
        x[idx] = xi
        left = np.sign(fx) == np.sign(fa)
        # the endpoint that survives twice in a row gets its value halved
        for j, t in enumerate(idx):
            if fx[j] == 0.0:
                lo[t] = hi[t] = xi[j]
                active[t] = False
                continue
            if left[j]:
                lo[t], flo[t] = xi[j], fx[j]
                if side[t] == -1:
                    fhi[t] *= 0.5
                side[t] = -1
            else:
                hi[t], fhi[t] = xi[j], fx[j]
                if side[t] == 1:
                    flo[t] *= 0.5
                side[t] = 1
            if hi[t] - lo[t] < tol or step[j] < 0.1 * tol:
                active[t] = False
    else:
        raise ArithmeticError("root refinement did not converge")
    return np.where(hi - lo < tol, 0.5 * (lo + hi), x)



def mode_spectrum(geometry, R, m, count, lambda_max, scan_step=SCAN_STEP, N=DEFAULT_GRID) -> np.ndarray:
    """First `count` positive roots lam of h_{m,lam}(R) = 0, in increasing order.

    The scan runs in windows of increasing lam and stops once `count` sign
    changes are bracketed, so low windows are not integrated at the step size
    the highest frequency would need.
    """
    g = _check_ball(geometry, R)
    if count < 1:
        raise ValueError("count must be at least 1")
    if m < 0:
        raise ValueError("angular order must be non-negative")
    lams = np.arange(0.0, lambda_max + 0.5 * scan_step, scan_step)
    lams[0] = 1e-6 if g == HYPERBOLIC else 0.0
    f = np.empty_like(lams)
    window = 200
    found = 0
    done = 0
    while done < lams.size and found < count:
        stop = min(done + window, lams.size)
        start = max(done - 1, 0)
        f[start:stop] = _boundary_values(g, m, lams[start:stop], R, N)
        seg = f[: stop]
        found = int(np.sum(np.sign(seg[:-1]) * np.sign(seg[1:]) < 0) + np.sum(seg == 0.0))
        done = stop
    f = f[:done]
    lams = lams[:done]
    change = np.flatnonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)
    exact = np.flatnonzero(f == 0.0)
    if change.size + exact.size < count:
        raise SpectrumRangeError(
            f"only {change.size + exact.size} eigenvalues below lambda_max={lambda_max} "
            f"for m={m}, R={R}; {count} requested, increase lambda_max"
        )
    change = change[:count]
    roots = list(lams[exact])
    if change.size:
        roots += list(_refine(g, m, R, N, lams[change], lams[change + 1], f[change], f[change + 1]))
    roots = np.sort(np.asarray(roots))
    return roots[:count]


def dense_sl_eigenvalues(geometry, R, m, count, N=4000) -> np.ndarray:
    """Reference spectrum from a second-order finite-volume Sturm-Liouville matrix.

    -(p u')' + q u = E w u on (0, R), p = w = sinh s (sin s), q = m^2 / sinh s,
    cell-centred points, zero flux at s = 0 (p vanishes there), Dirichlet at R
    through the ghost value u_N = -u_{N-1}. Returns lam for the lowest E's.
    """
    g = _check_ball(geometry, R)
    h = R / N
    s = (np.arange(N) + 0.5) * h
    faces = np.arange(N + 1) * h
    sin = np.sinh if g == HYPERBOLIC else np.sin
    p = sin(faces)
    w = sin(s)
    diag = (p[:-1] + p[1:]) / h**2 + m * m / w
    diag[-1] += p[-1] / h**2  # ghost point
    off = -p[1:-1] / h**2
    # symmetric form W^{-1/2} K W^{-1/2}
    sw = np.sqrt(w)
    E = eigh_tridiagonal(diag / w, off / (sw[:-1] * sw[1:]), select="i", select_range=(0, count - 1))[0]
    if g == HYPERBOLIC:
        return np.sqrt(np.maximum(E - 0.25, 0.0))
    return 0.5 * (-1.0 + np.sqrt(1.0 + 4.0 * E))


def angular_factor(m, parity, theta):
    theta = np.asarray(theta, dtype=float)
    if m == 0:
        return np.full(theta.shape, 1.0 / math.sqrt(2.0 * np.pi))
    trig = np.cos if parity == "cos" else np.sin
    return trig(m * theta) / math.sqrt(np.pi)


@dataclass(frozen=True, eq=False)
class BasisEntry:
    m: int
    parity: str
    k: int
    lambda_k: float
    eigenvalue: float
    radial_profile: RadialSolution
    normal_derivative_at_R: float
    l2_norm_check: float

    @property
    def key(self):
        return (self.m, self.parity, self.k)

    def angular(self, theta):
        return angular_factor(self.m, self.parity, theta)

    def normal_derivative(self, theta):
        """d phi / d nu on the boundary circle at angles theta."""
        return self.normal_derivative_at_R * self.angular(theta)

    def interior_zeros(self) -> int:
        v = self.radial_profile.values[1:-1]
        scale = np.abs(v).max()
        v = v[np.abs(v) > 1e-9 * scale]
        return int(np.sum(np.sign(v[:-1]) != np.sign(v[1:])))


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    geometry: str
    R: float
    m_max: int
    k_max: int
    grid: np.ndarray
    entries: tuple

    def __len__(self):
        return len(self.entries)

    @property
    def n(self) -> int:
        return 2

    def cache_key(self) -> dict:
        return {
            "geometry": self.geometry,
            "R": self.R,
            "m_max": self.m_max,
            "k_max": self.k_max,
            "grid_size": int(self.grid.size),
        }

    def to_json(self) -> str:
        doc = {
            "version": BASIS_VERSION,
            **self.cache_key(),
            "grid": self.grid.tolist(),
            "entries": [
                {
                    "m": e.m,
                    "parity": e.parity,
                    "k": e.k,
                    "lambda_k": e.lambda_k,
                    "eigenvalue": e.eigenvalue,
                    "profile": e.radial_profile.values.tolist(),
                    "derivative": e.radial_profile.derivs.tolist(),
                    "normal_derivative_at_R": e.normal_derivative_at_R,
                    "l2_norm_check": e.l2_norm_check,
                }
                for e in self.entries
            ],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "SpectralBasis":
        doc = json.loads(text)
        if doc.get("version") != BASIS_VERSION:
            raise ValueError(
                f"spectral basis version {doc.get('version')!r} does not match {BASIS_VERSION}"
            )
        grid = np.asarray(doc["grid"], dtype=float)
        g = radial_geometry(doc["geometry"])
        entries = []
        for e in doc["entries"]:
            prof = RadialSolution(
                geometry=g,
                n=2,
                m=e["m"],
                param=SpectralParameter(e["lambda_k"], 2, g),
                grid=grid,
                values=np.asarray(e["profile"], dtype=float),
                derivs=np.asarray(e["derivative"], dtype=float),
                normalization="unit_l2_ball",
            )
            entries.append(
                BasisEntry(
                    e["m"], e["parity"], e["k"], e["lambda_k"], e["eigenvalue"], prof,
                    e["normal_derivative_at_R"], e["l2_norm_check"],
                )
            )
        return cls(doc["geometry"], float(doc["R"]), int(doc["m_max"]), int(doc["k_max"]), grid, tuple(entries))


def _hermite_integral(grid, y, dy):
    return float(CubicHermiteSpline(grid, y, dy).integrate(grid[0], grid[-1]))


def assemble_basis(geometry, R, m_max, k_max, N=DEFAULT_GRID, lambda_max=None) -> SpectralBasis:
    """Orthonormal Dirichlet eigenfunctions for m <= m_max, k <= k_max.

    Entries are ordered by eigenvalue (cos before sin at equal lam). The
    radial profile stored on each entry carries the normalization constant,
    so phi = profile(s) * angular(theta) has unit L2 norm on the ball.
    """
    tag = geometry if geometry in (H2, S2) else {"H": H2, "S": S2}.get(geometry, geometry)
    g = _check_ball(tag, R)
    if m_max < 0 or k_max < 1:
        raise ValueError("need m_max >= 0 and k_max >= 1")
    grid = np.linspace(0.0, R, N)
    sin = np.sinh if g == HYPERBOLIC else np.sin
    cos = np.cosh if g == HYPERBOLIC else np.cos
    weight = sin(grid)
    entries = []
    for m in range(m_max + 1):
        # Dirichlet zeros of Bessel-like profiles sit near (k + m/2 - 1/4) pi / R
        lmax = lambda_max or (k_max + 0.5 * m + 1.0) * np.pi / R + 2.0
        while True:
            try:
                lams = mode_spectrum(g, R, m, k_max, lmax, N=N)
                break
            except SpectrumRangeError:
                if lambda_max is not None:
                    raise
                lmax *= 1.5
        vals, ders = shoot(g, 2, m, lams, grid)
        for k, (lam, v, d) in enumerate(zip(lams, vals, ders), start=1):
            c = 1.0 / math.sqrt(simpson(v * v * weight, x=grid))
            v, d = c * v, c * d
            check = _hermite_integral(grid, v * v * weight, 2 * v * d * weight + v * v * cos(grid))
            prof = RadialSolution(
                geometry=g,
                n=2,
                m=m,
                param=SpectralParameter(float(lam), 2, g),
                grid=grid,
                values=v,
                derivs=d,
                normalization="unit_l2_ball",
            )
            eig = -float(spectral_energy(g, 2, lam))
            for parity in ("cos", "sin") if m else ("cos",):
                entries.append(BasisEntry(m, parity, k, float(lam), eig, prof, float(d[-1]), check))
    order = sorted(range(len(entries)), key=lambda i: (entries[i].lambda_k, entries[i].parity != "cos"))
    return SpectralBasis(tag, float(R), m_max, k_max, grid, tuple(entries[i] for i in order))


def gram_residual(basis: SpectralBasis, subset: int, n_theta: int | None = None) -> float:
    """max |G_ij - delta_ij| for the first `subset` entries by 2-D quadrature."""
    if subset > len(basis):
        raise ValueError(f"subset {subset} exceeds basis size {len(basis)}")
    ents = basis.entries[:subset]
    if n_theta is None:
        n_theta = 4 * (max(e.m for e in ents) + 1) + 8
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    ang = np.array([e.angular(theta) for e in ents]) * math.sqrt(2.0 * np.pi / n_theta)
    g = radial_geometry(basis.geometry)
    w = np.sinh(basis.grid) if g == HYPERBOLIC else np.sin(basis.grid)
    prof = np.array([e.radial_profile.values for e in ents])
    radial = simpson(prof[:, None, :] * prof[None, :, :] * w, x=basis.grid, axis=-1)
    G = (ang @ ang.T) * radial
    return float(np.max(np.abs(G - np.eye(subset))))
