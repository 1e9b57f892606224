"""Forward spherical-mean operators and the Fourier-Legendre transform layer.

Angular modes use the real orthonormal system of the theta-average inner
product: e_0 = 1, e_{m,cos} = sqrt(2) cos(m theta), e_{m,sin} = sqrt(2)
sin(m theta), and, on an even grid, the Nyquist cosine without the sqrt(2).
With this choice mean_theta |f|^2 = sum of squared mode values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .darboux import CFL_LIMIT, DarbouxGrid, check_cfl, forward_modes
from .geometry import H2, S2, check_geometry, circle_nodes, coords_to_polar, polar_to_coords
from .radial import HYPERBOLIC, legendre_profiles, radial_geometry, shoot, spectral_energy

SUPPORT_TOL = 1e-12
DEFAULT_NODES = 256
DEFAULT_PHI = 128


# ---------------------------------------------------------------- angular modes


def _sqrt2(m, N):
    """Normalization of the cos/sin mode m on an N-point grid."""
    if m == 0 or (N % 2 == 0 and 2 * m == N):
        return 1.0
    return math.sqrt(2.0)


def angular_basis(m, parity, theta):
    """The orthonormal (theta-average) angular function e_{m,parity}."""
    theta = np.asarray(theta, dtype=float)
    if m == 0:
        return np.ones_like(theta)
    trig = np.cos if parity == "cos" else np.sin
    return math.sqrt(2.0) * trig(m * theta)


def mode_decompose_array(values, m_max=None) -> dict:
    """Real Fourier analysis along axis 0 of samples on an equispaced theta grid.

    Returns {(m, parity): array} for the trailing axes. Sine coefficients of
    m = 0 and of the Nyquist order are identically zero and are omitted.
    """
    values = np.asarray(values, dtype=float)
    N = values.shape[0]
    X = np.fft.rfft(values, axis=0) / N
    top = X.shape[0] - 1 if m_max is None else min(m_max, X.shape[0] - 1)
    out = {}
    for m in range(top + 1):
        c = _sqrt2(m, N)
        if m == 0:
            out[(0, "cos")] = X[0].real.copy()
            continue
        nyquist = N % 2 == 0 and 2 * m == N
        scale = 1.0 if nyquist else 2.0 / c  # 2 Re X / c = sqrt(2) Re X
        out[(m, "cos")] = scale * X[m].real
        if not nyquist:
            out[(m, "sin")] = -scale * X[m].imag
    return out


def mode_synthesize(modes: dict, theta, N=None):
    """Inverse of mode_decompose_array at the angles theta (axis 0 of the result).

    N is the analysis grid size, needed only to recognize a Nyquist cosine.
    """
    theta = np.asarray(theta, dtype=float)
    out = None
    for (m, parity), prof in sorted(modes.items()):
        prof = np.asarray(prof, dtype=float)
        if N is not None and N % 2 == 0 and 2 * m == N:
            ang = np.cos(m * theta)
        else:
            ang = angular_basis(m, parity, theta)
        term = ang.reshape(ang.shape + (1,) * prof.ndim) * prof
        out = term if out is None else out + term
    if out is None:
        raise ValueError("no modes to synthesize")
    return out


def mode_norms(modes: dict) -> dict:
    return {k: float(np.sqrt(np.mean(np.asarray(v) ** 2))) for k, v in modes.items()}


# ---------------------------------------------------------------- data types


@dataclass(frozen=True, eq=False)
class ModeField:
    """Interior field f(s, theta) = sum_m F_m(s) e_m(theta) on a radial grid."""

    geometry: str
    R: float
    s_grid: np.ndarray
    modes: dict
    metadata: dict = field(default_factory=dict)
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "geometry", check_geometry(self.geometry))
        s = np.asarray(self.s_grid, dtype=float)
        object.__setattr__(self, "s_grid", s)
        if s[0] != 0.0 or np.any(np.diff(s) <= 0):
            raise ValueError("ModeField s_grid must start at 0 and increase")
        modes = {}
        for key, prof in self.modes.items():
            m, parity = int(key[0]), str(key[1])
            if parity not in ("cos", "sin") or m < 0 or (m == 0 and parity == "sin"):
                raise ValueError(f"invalid mode key {key!r}")
            prof = np.asarray(prof, dtype=float)
            if prof.shape != s.shape:
                raise ValueError(f"mode {key} has {prof.shape} samples for a grid of {s.shape}")
            modes[(m, parity)] = prof
        object.__setattr__(self, "modes", modes)
        if self.strict:
            leak = self.support_leak()
            if leak > SUPPORT_TOL * max(1.0, self.scale()):
                raise ValueError(
                    f"field is not supported in the closed ball of radius {self.R}: "
                    f"max |F_m(s)| for s > R is {leak:.3g}"
                )

    def scale(self) -> float:
        return max((float(np.max(np.abs(p))) for p in self.modes.values()), default=0.0)

    def support_leak(self) -> float:
        outside = self.s_grid > self.R * (1 + 1e-12)
        return max((float(np.max(np.abs(p[outside]), initial=0.0)) for p in self.modes.values()), default=0.0)

    def center_proxy(self) -> dict:
        """|F_m(s_1)| / s_1^min(m, 4) per mode: bounded for fields smooth at the centre."""
        s1 = self.s_grid[1]
        return {k: float(abs(p[1]) / s1 ** min(k[0], 4)) for k, p in self.modes.items()}

    @property
    def m_max(self) -> int:
        return max((k[0] for k in self.modes), default=0)

    def profile(self, m, parity="cos", s=None):
        prof = self.modes.get((m, parity))
        if prof is None:
            prof = np.zeros_like(self.s_grid)
        if s is None:
            return prof
        return self._spline(m, parity)(np.asarray(s, dtype=float))

    def _spline(self, m, parity):
        cache = self.__dict__.setdefault("_splines", {})
        key = (m, parity)
        if key not in cache:
            cache[key] = CubicSpline(self.s_grid, self.profile(m, parity), extrapolate=False)
        return cache[key]

    def evaluate_polar(self, s, theta):
        """f at polar points (broadcast s and theta); zero outside the s grid and the ball."""
        s = np.asarray(s, dtype=float)
        theta = np.asarray(theta, dtype=float)
        s, theta = np.broadcast_arrays(s, theta)
        out = np.zeros(s.shape)
        inside = s <= min(self.R, self.s_grid[-1])
        if not np.any(inside):
            return out
        ss, tt = s[inside], theta[inside]
        acc = np.zeros(ss.shape)
        for (m, parity) in self.modes:
            acc += np.nan_to_num(self._spline(m, parity)(ss)) * angular_basis(m, parity, tt)
        out[inside] = acc
        return out

    def __call__(self, coords):
        s, theta = coords_to_polar(self.geometry, coords)
        return self.evaluate_polar(s, theta)

    @property
    def support_radius(self) -> float:
        return self.R

    @classmethod
    def from_phantom(cls, phantom, R, s_grid, n_phi=DEFAULT_PHI, strict=True, drop_below=0.0):
        """Mode profiles of a phantom sampled on the polar grid s_grid x n_phi angles."""
        s_grid = np.asarray(s_grid, dtype=float)
        phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
        vals = phantom.polar(s_grid, phi)
        modes = mode_decompose_array(vals)
        if drop_below > 0:
            total = math.sqrt(sum(float(np.sum(p**2)) for p in modes.values()))
            modes = {k: p for k, p in modes.items() if math.sqrt(float(np.sum(p**2))) > drop_below * total}
        meta = {"phantom": phantom.describe(), "n_phi": n_phi} if hasattr(phantom, "describe") else {}
        return cls(phantom.geometry, float(R), s_grid, modes, meta, strict)

    def to_dict(self) -> dict:
        return {
            "geometry": self.geometry,
            "R": self.R,
            "s_grid": self.s_grid.tolist(),
            "modes": [{"m": k[0], "parity": k[1], "values": v.tolist()} for k, v in sorted(self.modes.items())],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d, strict=True):
        modes = {(e["m"], e["parity"]): np.array(e["values"]) for e in d["modes"]}
        return cls(d["geometry"], float(d["R"]), np.array(d["s_grid"]), modes, d.get("metadata", {}), strict)


def _uniform(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError(f"{name} must be a 1-D grid with at least 2 points")
    d = np.diff(x)
    if np.any(d <= 0) or np.max(np.abs(d - d[0])) > 1e-9 * max(1.0, abs(x[-1])):
        raise ValueError(f"{name} must be uniform and increasing")
    return x


@dataclass(frozen=True, eq=False)
class Sinogram:
    """Boundary data g(theta_j, r_k); values has shape (n_theta, n_r)."""

    geometry: str
    R: float
    theta_grid: np.ndarray
    r_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "geometry", check_geometry(self.geometry))
        th = _uniform(self.theta_grid, "theta_grid")
        r = _uniform(self.r_grid, "r_grid")
        if r[0] != 0.0:
            raise ValueError("r_grid must start at 0")
        if abs(th[0]) > 1e-12 or abs(th[1] - th[0] - 2 * np.pi / th.size) > 1e-9:
            raise ValueError("theta_grid must be 2 pi j / n_theta")
        v = np.asarray(self.values, dtype=float)
        if v.shape != (th.size, r.size):
            raise ValueError(f"values shape {v.shape} does not match grid ({th.size}, {r.size})")
        if not np.all(np.isfinite(v)):
            raise ValueError("sinogram values must be finite")
        if not self.R > 0:
            raise ValueError("detector radius must be positive")
        object.__setattr__(self, "theta_grid", th)
        object.__setattr__(self, "r_grid", r)
        object.__setattr__(self, "values", v)

    @classmethod
    def on_grid(cls, geometry, R, n_theta, n_r, r_max, values=None):
        theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
        r = np.linspace(0.0, r_max, n_r)
        if values is None:
            values = np.zeros((n_theta, n_r))
        return cls(geometry, float(R), theta, r, values)

    @property
    def n_theta(self) -> int:
        return self.theta_grid.size

    @property
    def n_r(self) -> int:
        return self.r_grid.size

    @property
    def r_max(self) -> float:
        return float(self.r_grid[-1])

    @property
    def dr(self) -> float:
        return float(self.r_grid[1] - self.r_grid[0])

    def with_values(self, values) -> "Sinogram":
        return Sinogram(self.geometry, self.R, self.theta_grid, self.r_grid, values)

    def l2(self) -> float:
        """Discrete L2 norm with the theta-average and trapezoid-in-r weights."""
        w = np.full(self.n_r, self.dr)
        w[[0, -1]] *= 0.5
        return float(np.sqrt(np.mean(self.values**2, axis=0) @ w))


def relative_l2(a, b) -> float:
    """||a - b|| / ||b|| for arrays or sinograms on the same grid."""
    if isinstance(a, Sinogram):
        return a.with_values(a.values - b.values).l2() / b.l2()
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


# ---------------------------------------------------------------- forward operators


def _detector(geometry, R, theta):
    return polar_to_coords(geometry, R, theta)


def spherical_mean(f, x, r, N=DEFAULT_NODES) -> float:
    """Mean of f over the geodesic circle of radius r about the point x.

    f is a vectorized evaluator on coordinates (a Phantom or ModeField); x is a
    Point. Both return 0 outside their declared support.
    """
    if r == 0:
        return float(f(x.coords))
    if not r > 0:
        raise ValueError(f"radius must be non-negative, got {r}")
    if x.geometry == S2 and not r < np.pi:
        raise ValueError(f"S2 circle radius must satisfy 0 < r < pi, got {r}")
    if N < 8:
        raise ValueError(f"need at least 8 quadrature nodes, got {N}")
    nodes = circle_nodes(x.geometry, x.coords, r, N)
    return float(np.mean(f(nodes)))


def _check_sinogram_grid(geometry, R, n_theta, n_r, r_max):
    if n_theta < 1 or n_r < 3:
        raise ValueError("need n_theta >= 1 and n_r >= 3")
    if r_max < 2 * R * (1 - 1e-12):
        raise ValueError(f"r_max = {r_max} must be at least 2R = {2 * R}")
    if geometry == S2 and not r_max < np.pi:
        raise ValueError(f"S2 r_max must be below pi, got {r_max}")


def _check_source(f, R, check_support):
    if check_support and f.support_radius > R * (1 + 1e-12):
        raise ValueError(
            f"source support radius {f.support_radius:.6g} exceeds the ball radius {R}; "
            "pass check_support=False to simulate non-range data"
        )


def forward_sinogram(f, R, n_theta, n_r, r_max, N=DEFAULT_NODES, check_support=True) -> Sinogram:
    """Quadrature sinogram g(theta_j, r_k) = mean of f over S_{r_k}(x(theta_j))."""
    geometry = check_geometry(f.geometry)
    _check_sinogram_grid(geometry, R, n_theta, n_r, r_max)
    _check_source(f, R, check_support)
    sino = Sinogram.on_grid(geometry, R, n_theta, n_r, r_max)
    r = sino.r_grid[1:]
    out = np.empty((n_theta, n_r))
    for j, th in enumerate(sino.theta_grid):
        x = _detector(geometry, R, th)
        out[j, 0] = float(f(x))
        out[j, 1:] = f(circle_nodes(geometry, x, r, N)).mean(axis=-1)
    return sino.with_values(out)


def darboux_forward_mode(F_m, m, geometry, R, ds, dr, s_max, r_max, n=2, keep_field=False):
    """Mode Darboux evolution of samples F_m on [0, s_max] with step ds.

    Returns (trace, field): the trace U(R, r_k) on r_k = k dr up to r_max and,
    if requested, U itself with shape (n_r, n_s).
    """
    check_cfl(ds, dr)
    if s_max < (R + r_max) * (1 - 1e-12):
        raise ValueError(f"s_max = {s_max} must be at least R + r_max = {R + r_max}")
    F_m = np.asarray(F_m, dtype=float)
    s_grid = ds * np.arange(F_m.size)
    if abs(s_grid[-1] - s_max) > 1e-9 * s_max:
        raise ValueError("F_m must be sampled on 0, ds, ..., s_max")
    i_R = int(round(R / ds))
    if abs(i_R * ds - R) > 1e-9 * R:
        raise ValueError("R must be a multiple of ds")
    n_r = int(round(r_max / dr)) + 1
    grid = DarbouxGrid(ds, dr, s_grid, dr * np.arange(n_r), i_R)
    trace, fld = forward_modes(F_m[None, :], [m], geometry, grid, n=n, keep_field=keep_field)
    return trace[0], (fld[0] if keep_field else None)


def pde_grids(R, n_r, r_max, n_s):
    """Grids for the PDE forward sinogram.

    s covers [0, R + r_max] with about n_s samples and R on a node; the
    internal r step is the sinogram step divided by the smallest integer that
    satisfies the CFL bound. Returns (DarbouxGrid, substeps).
    """
    s_max = R + r_max
    k = int(math.ceil(R / (s_max / (n_s - 1)) - 1e-9))
    ds = R / k
    s_grid = ds * np.arange(int(math.ceil(s_max / ds - 1e-9)) + 1)
    dr = r_max / (n_r - 1)
    sub = max(1, int(math.ceil(dr / (CFL_LIMIT * ds) - 1e-12)))
    r_fine = (dr / sub) * np.arange((n_r - 1) * sub + 1)
    return DarbouxGrid(ds, dr / sub, s_grid, r_fine, k), sub


def forward_sinogram_pde(f, R, n_theta, n_r, r_max, n_s, n_phi=DEFAULT_PHI, check_support=True, n=2) -> Sinogram:
    """Sinogram from the mode-wise Darboux evolution of a Phantom or ModeField."""
    geometry = check_geometry(f.geometry)
    _check_sinogram_grid(geometry, R, n_theta, n_r, r_max)
    _check_source(f, R, check_support)
    grid, sub = pde_grids(R, n_r, r_max, n_s)
    if isinstance(f, ModeField):
        modes = {k: f.profile(k[0], k[1], grid.s_grid) for k in f.modes}
        modes = {k: np.nan_to_num(v) for k, v in modes.items()}
        N_an = None
    else:
        field_ = ModeField.from_phantom(f, grid.s_grid[-1], grid.s_grid, n_phi=n_phi, strict=False, drop_below=1e-14)
        modes, N_an = field_.modes, n_phi
    keys = sorted(modes)
    F = np.array([modes[k] for k in keys])
    ms = [k[0] for k in keys]
    trace, _ = forward_modes(F, ms, geometry, grid, n=n)
    traces = {k: trace[i, ::sub] for i, k in enumerate(keys)}
    sino = Sinogram.on_grid(geometry, R, n_theta, n_r, r_max)
    return sino.with_values(mode_synthesize(traces, sino.theta_grid, N=N_an))


# ---------------------------------------------------------------- Fourier-Legendre layer


def _weight(geometry, n, r):
    if radial_geometry(geometry) == HYPERBOLIC:
        return np.sinh(r) ** (n - 1)
    return 0.5 * np.sin(r) ** (n - 1)


@lru_cache(maxsize=32)
def _simpson_weights_cached(N, dx):
    if N < 2:
        raise ValueError("Simpson weights need at least 2 samples")
    if N == 2:
        return np.array([0.5, 0.5]) * dx
    odd = N if N % 2 else N - 1
    w = np.zeros(N)
    w[:odd:2] = 2.0
    w[1:odd:2] = 4.0
    w[0] = w[odd - 1] = 1.0
    w *= dx / 3.0
    if N % 2 == 0:
        # scipy's even-count rule: Simpson on the first N - 1 samples, then a
        # quadratic through the last three for the final interval
        w[-3] -= dx / 12.0
        w[-2] += 2.0 * dx / 3.0
        w[-1] += 5.0 * dx / 12.0
    return w


def simpson_weights(N, dx) -> np.ndarray:
    """Weights w with w @ y = simpson(y, dx=dx) for N uniform samples."""
    return _simpson_weights_cached(int(N), float(dx)).copy()


def _window(v, r_grid):
    """Trim trailing zeros of v (last axis) so the kernel never reaches r = pi."""
    v = np.asarray(v, dtype=float)
    nz = np.nonzero(np.any(np.atleast_2d(v) != 0.0, axis=0))[0]
    last = int(nz[-1]) + 2 if nz.size else 2
    last = min(max(last, 3), r_grid.size)
    return v[..., :last], r_grid[:last]


def fl_kernel(geometry, n, lams, r_grid, integer_orders=False) -> np.ndarray:
    """Matrix K with (K @ v)[i] = Fourier-Legendre transform of v at lams[i]."""
    geometry = radial_geometry(geometry)
    r_grid = np.asarray(r_grid, dtype=float)
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if geometry != HYPERBOLIC and not integer_orders and r_grid[-1] >= np.pi:
        raise ValueError("sphere kernel needs r < pi on the sample window")
    if integer_orders:
        if geometry == HYPERBOLIC or n != 2:
            raise ValueError("integer Legendre orders are only defined on S2")
        if np.any(lams != np.round(lams)) or np.any(lams < 0):
            raise ValueError("integer orders must be non-negative integers")
        h, _ = legendre_profiles(lams.astype(int), r_grid)
    else:
        h, _ = shoot(geometry, n, 0, lams, r_grid)
    w = simpson_weights(r_grid.size, r_grid[1] - r_grid[0]) * _weight(geometry, n, r_grid)
    return h * w


def fl_transform(v, r_grid, geometry, n, lams, integer_orders=False):
    """Fourier-Legendre transform of radial samples v at the parameters lams.

    H: int v h_lam sinh^{n-1} dr; S: (1/2) int v h_lam sin dr. On S integer
    orders use Legendre polynomials, real ones the shooting solution.
    """
    r_grid = np.asarray(r_grid, dtype=float)
    v, r = _window(v, r_grid)
    out = fl_kernel(geometry, n, lams, r, integer_orders) @ v.T
    return out.T if np.ndim(v) > 1 else out


def legendre_series(coeffs, r_grid):
    """sum_m (2m+1) c_m P_m(cos r): the inverse of the integer-order transform."""
    coeffs = np.asarray(coeffs, dtype=float)
    P, _ = legendre_profiles(np.arange(coeffs.size), np.asarray(r_grid, dtype=float))
    return ((2 * np.arange(coeffs.size) + 1) * coeffs) @ P


def radial_operator(v, r_grid, geometry, n):
    """B_r v for an even function sampled on [0, r_max], fourth-order centred.

    Values beyond the grid are taken as zero (compact support); values at
    negative r come from even reflection, and r = 0 uses the limit n v''(0).
    """
    v = np.asarray(v, dtype=float)
    dr = r_grid[1] - r_grid[0]
    pad = np.concatenate([v[2:0:-1], v, [0.0, 0.0]])
    c = slice(2, 2 + v.size)
    d2 = (-pad[4:] + 16 * pad[3:-1] - 30 * pad[c] + 16 * pad[1:-3] - pad[:-4]) / (12 * dr**2)
    d1 = (-pad[4:] + 8 * pad[3:-1] - 8 * pad[1:-3] + pad[:-4]) / (12 * dr)
    out = np.empty_like(v)
    r = r_grid[1:]
    trig = np.tanh(r) if radial_geometry(geometry) == HYPERBOLIC else np.tan(r)
    out[1:] = d2[1:] + (n - 1) * d1[1:] / trig
    out[0] = n * d2[0]
    return out


def intertwine_residual(v, r_grid, geometry, n, lams, integer_orders=False) -> float:
    """max |T(B_r v) + E T(v)| / max |T(v)| over lams, E the spectral energy."""
    r_grid = np.asarray(r_grid, dtype=float)
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        return 0.0
    Bv = radial_operator(v, r_grid, geometry, n)
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    # the transforms are taken on the full window so both share one kernel
    K = fl_kernel(geometry, n, lams, r_grid, integer_orders)
    vh, bh = K @ v, K @ Bv
    E = spectral_energy(geometry, n, lams)
    return float(np.max(np.abs(bh + E * vh)) / np.max(np.abs(vh)))


class TailError(ArithmeticError):
    """The transform has not decayed by the end of the lambda window."""


def _shift(geometry):
    return 0.0 if radial_geometry(geometry) == HYPERBOLIC else 0.5


def support_end(v, r_grid, rel=0.0) -> float:
    v = np.atleast_2d(np.asarray(v, dtype=float))
    mag = np.max(np.abs(v), axis=0)
    nz = np.nonzero(mag > rel * mag.max())[0] if mag.max() > 0 else np.array([], dtype=int)
    return float(r_grid[nz[-1]]) if nz.size else float(r_grid[1])


def t_inverse_operator(r_grid, geometry, n, t_grid, lambda_max=None, n_lambda=2048, support=None):
    """(C, K, lams) so that u = C @ (K @ g) is T^{-1} g for samples g on r_grid.

    K evaluates the (shifted) Fourier-Legendre transform on the lambda nodes,
    C the cosine integral (1/pi) int_0^lambda_max ... cos(lambda t) d lambda
    by composite Simpson.
    """
    geometry = radial_geometry(geometry)
    r_grid = np.asarray(r_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    a = support if support is not None else r_grid[-1]
    if lambda_max is None:
        lambda_max = 60.0 / a
    lams = np.linspace(0.0, lambda_max, n_lambda + 1)
    K = fl_kernel(geometry, n, lams - _shift(geometry), r_grid)
    w = simpson_weights(lams.size, lams[1] - lams[0])
    C = np.cos(np.outer(t_grid, lams)) * w / np.pi
    return C, K, lams


def check_tail(ghat, lams, tol=1e-10):
    """Raise TailError unless the transform is below tol (relative) on the last 5% of lams."""
    ghat = np.atleast_2d(ghat)
    scale = np.max(np.abs(ghat))
    if scale == 0:
        return 0.0
    k = max(1, lams.size // 20)
    tail = float(np.max(np.abs(ghat[:, -k:])) / scale)
    if tail > tol:
        raise TailError(
            f"|g^(lambda)| = {tail:.3g} (relative) near lambda_max = {lams[-1]:.4g}; "
            "increase lambda_max or sample g more smoothly"
        )
    return tail


def _shifted_transform(g, r_grid, geometry, n, lams, chunk=1024):
    """Fourier-Legendre transform at lams - shift, evaluated in lambda chunks."""
    shift = _shift(geometry)
    out = np.empty(g.shape[:-1] + (lams.size,))
    for i in range(0, lams.size, chunk):
        out[..., i : i + chunk] = g @ fl_kernel(geometry, n, lams[i : i + chunk] - shift, r_grid).T
    return out


def t_inverse(g, r_grid, geometry, n, t_grid, lambda_max=None, n_lambda=2048, tail_tol=1e-10, support=None,
              max_growth=6, chunk=1024):
    """T^{-1} g: u(t) = (1/pi) int_0^lambda_max g^(lambda - shift) cos(lambda t) d lambda.

    g may be one profile or a stack (rows); shift is 0 on H and 1/2 on S.
    Without an explicit lambda_max the window starts at 60/a (a the support
    end) and is extended by half its length, at fixed lambda spacing, until
    the tail check passes.
    """
    r_grid = np.asarray(r_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    g = np.asarray(g, dtype=float)
    if not np.any(g):
        return np.zeros(g.shape[:-1] + (t_grid.size,))
    gw, rw = _window(g, r_grid)
    if support is None:
        support = support_end(gw, rw)
    adaptive = lambda_max is None
    lam_max = 60.0 / support if adaptive else float(lambda_max)
    dlam = lam_max / n_lambda
    lams = dlam * np.arange(n_lambda + 1)
    ghat = _shifted_transform(gw, rw, geometry, n, lams, chunk)
    for attempt in range(max_growth + 1):
        try:
            check_tail(ghat, lams, tail_tol)
            break
        except TailError:
            if not adaptive or attempt == max_growth:
                raise
        extra = dlam * np.arange(lams.size, lams.size + (lams.size - 1) // 2 + (lams.size - 1) % 2 + 1)
        extra = extra[: 2 * ((lams.size - 1 + extra.size) // 2) - (lams.size - 1)]
        ghat = np.concatenate([ghat, _shifted_transform(gw, rw, geometry, n, extra, chunk)], axis=-1)
        lams = np.concatenate([lams, extra])
    w = simpson_weights(lams.size, dlam) / np.pi
    u = np.zeros(g.shape[:-1] + (t_grid.size,))
    for i in range(0, lams.size, chunk):
        sl = slice(i, i + chunk)
        u += (ghat[..., sl] * w[sl]) @ np.cos(np.outer(lams[sl], t_grid))
    return u


def t_forward_sphere(u, t_grid, r_grid, orders=None, tail_tol=1e-12, max_orders=4096):
    """T u on S2: sum_m (2m+1) u~(m + 1/2) P_m(cos r), u~(lam) = 2 int_0 u cos(lam t) dt.

    Without `orders` the series is extended until the last 10% of the
    coefficients fall below tail_tol relative to the largest.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] != 0.0:
        raise ValueError("t_grid must start at 0")
    u = np.asarray(u, dtype=float)
    uw = 2.0 * u * simpson_weights(t_grid.size, t_grid[1] - t_grid[0])

    def coeffs(count):
        return uw @ np.cos(np.outer(t_grid, np.arange(count) + 0.5))

    if orders is None:
        orders = 64
        while True:
            c = coeffs(orders)
            scale = np.max(np.abs(c))
            if scale == 0 or np.max(np.abs(c[-max(1, orders // 10):])) <= tail_tol * scale:
                break
            if orders >= max_orders:
                raise TailError(f"Legendre series not converged at {orders} orders")
            orders *= 2
    else:
        c = coeffs(orders)
    return legendre_series(c, r_grid)
