"""Radial eigenfunctions and the operator calculus on geodesic polar coordinates.

The radial equation for angular order m on the hyperbolic space H^n is

    h'' + (n-1) coth(r) h' - m(m+n-2)/sinh(r)^2 h = -E h,   E = ((n-1)^2 + 4 lam^2) / 4,

and on the sphere the same with cot/sin in place of coth/sinh and E = lam (lam + n - 1).
Solutions regular at r = 0 behave like r^m; for m = 0 they are normalized by
h(0) = 1, for m >= 1 by a unit leading Frobenius coefficient.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre, zeta

from .jets import Jet, jet_apply_elementary, jet_monomial, jet_variable

HYPERBOLIC = "H"
SPHERICAL = "S"

_SERIES_TERMS = 40  # even powers kept in the coth/cot expansions


def radial_geometry(geometry: str) -> str:
    """Accept 'H'/'S' as well as the 2-D tags 'H2'/'S2'."""
    g = {"H": HYPERBOLIC, "H2": HYPERBOLIC, "S": SPHERICAL, "S2": SPHERICAL}.get(geometry)
    if g is None:
        raise ValueError(f"unknown geometry {geometry!r}")
    return g


def spectral_energy(geometry: str, n: int, lam):
    """E such that the Laplace-Beltrami eigenvalue is -E."""
    lam = np.asarray(lam, dtype=float)
    if radial_geometry(geometry) == HYPERBOLIC:
        return ((n - 1) ** 2 + 4.0 * lam**2) / 4.0
    return lam * (lam + n - 1)


@dataclass(frozen=True)
class SpectralParameter:
    lam: float
    n: int = 2
    geometry: str = HYPERBOLIC

    @property
    def mu(self) -> complex:
        return (2j * self.lam + (self.n - 1)) / 2.0

    @property
    def eigenvalue(self) -> float:
        return -float(spectral_energy(self.geometry, self.n, self.lam))


# -- Frobenius start ---------------------------------------------------------


def _even_series(geometry):
    """Coefficients of r*coth(r) (resp. r*cot(r)) in powers r^(2k)."""
    k = np.arange(1, _SERIES_TERMS)
    z = zeta(2 * k) / np.pi ** (2 * k)
    if geometry == HYPERBOLIC:
        tail = 2.0 * (-1.0) ** (k + 1) * z
    else:
        tail = -2.0 * z
    return np.concatenate([[1.0], tail])


def frobenius_coefficients(geometry, n, m, energy, terms):
    """Coefficients a_j (j = 0..terms-1, odd ones zero) of h = sum a_j r^(j+m).

    `energy` may be an array; coefficients then carry its shape.
    """
    geometry = radial_geometry(geometry)
    energy = np.asarray(energy, dtype=float)
    c = _even_series(geometry)
    M = m * (m + n - 2)
    # r^2 h'' + r P(r) h' + Q(r) h = 0 with P, Q even power series.
    P = np.zeros(2 * c.size)
    Q = np.zeros(2 * c.size)
    P[0::2] = (n - 1) * c
    Q[0::2] = -M * (1.0 - 2.0 * np.arange(c.size)) * c
    a = np.zeros((terms,) + energy.shape)
    a[0] = 1.0

    def indicial(x):
        return x * (x - 1) + P[0] * x + Q[0]

    for j in range(2, terms, 2):
        acc = np.zeros(energy.shape)
        for i in range(2, min(j, P.size - 1) + 1, 2):
            acc = acc + (P[i] * (j - i + m) + Q[i]) * a[j - i]
        acc = acc + energy * a[j - 2]
        a[j] = -acc / indicial(j + m)
    return a


def _frobenius_values(a, m, r):
    """Evaluate the Frobenius series at scalar r for coefficient array a (terms, L)."""
    j = np.arange(a.shape[0])[:, None]
    pw = r ** j
    terms = a * pw
    h = terms.sum(axis=0) * r**m
    e = j + m
    dpw = np.where(e > 0, r ** np.maximum(e - 1.0, 0.0), 0.0)
    dh = (a * e * dpw).sum(axis=0)
    scale = np.abs(terms).sum(axis=0)
    tail = np.abs(terms[-2:]).max(axis=0) / np.where(scale > 0, scale, 1.0)
    return h, dh, tail


# -- shooting ----------------------------------------------------------------


class RadialSeriesError(ArithmeticError):
    """The Frobenius start failed to converge at the handoff radius."""


def _ode_coefficients(geometry, n, r):
    r = np.asarray(r, dtype=float)
    if geometry == HYPERBOLIC:
        return (n - 1) / np.tanh(r), 1.0 / np.sinh(r) ** 2
    return (n - 1) / np.tan(r), 1.0 / np.sin(r) ** 2


def shoot(geometry, n, m, lams, r_grid, accuracy=0.02, handoff=None):
    """Regular solutions for several spectral parameters on a uniform grid.

    Returns (values, derivs), each of shape (len(lams), len(r_grid)). The
    solution is taken from the Frobenius series up to the handoff radius and
    continued by classical RK4 with sub-steps sized so that
    step * frequency <= accuracy and step <= accuracy / 4 times the distance
    to the nearest singular point (r = 0, and r = pi on the sphere).
    """
    geometry = radial_geometry(geometry)
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    r_grid = np.asarray(r_grid, dtype=float)
    N = r_grid.size
    if r_grid[0] != 0.0:
        raise ValueError("radial grid must start at r = 0")
    dr = r_grid[1] - r_grid[0]
    energy = spectral_energy(geometry, n, lams)
    omega = math.sqrt(max(float(np.max(np.abs(energy))), 1.0))
    if handoff is None:
        handoff = max(5 * dr, 0.01)
        # keep the series in its well-conditioned range for high frequencies
        handoff = min(handoff, max(1.0 / omega, 2 * dr, 1e-4))
    handoff = min(handoff, r_grid[-1])

    a = frobenius_coefficients(geometry, n, m, energy, 2 * _SERIES_TERMS)
    L = lams.size
    values = np.empty((L, N))
    derivs = np.empty((L, N))
    n_series = int(np.searchsorted(r_grid, handoff, side="right"))
    for i in range(n_series):
        if r_grid[i] == 0.0:
            values[:, i] = 1.0 if m == 0 else 0.0
            derivs[:, i] = 0.0 if m != 1 else 1.0
            continue
        h, dh, _ = _frobenius_values(a, m, r_grid[i])
        values[:, i] = h
        derivs[:, i] = dh
    h, dh, tail = _frobenius_values(a, m, handoff)
    if np.any(tail > 1e-15):
        raise RadialSeriesError(
            f"Frobenius series not converged at handoff r={handoff:.4g} "
            f"(max tail ratio {float(tail.max()):.3g}, max frequency {omega:.4g})"
        )
    if n_series >= N:
        return values, derivs

    M = m * (m + n - 2)
    y0, y1 = h.copy(), dh.copy()
    r = handoff
    trig = math.tanh if geometry == HYPERBOLIC else math.tan
    sine = math.sinh if geometry == HYPERBOLIC else math.sin

    def coef(rr):
        sn = sine(rr)
        return (n - 1) / trig(rr), M / (sn * sn) - energy

    for i in range(n_series, N):
        target = r_grid[i]
        span = target - r
        # RK4 error near a regular singular point scales like (step / distance)^4
        gap = r if geometry == HYPERBOLIC else min(r, math.pi - target)
        step_cap = min(accuracy / omega, 0.25 * accuracy * gap)
        nsub = max(1, int(math.ceil(span / step_cap - 1e-12)))
        hs = span / nsub
        c1, g1 = coef(r)
        for _ in range(nsub):
            c2, g2 = coef(r + hs / 2)
            c4, g4 = coef(r + hs)
            k1u, k1v = y1, -c1 * y1 + g1 * y0
            u, v = y0 + hs / 2 * k1u, y1 + hs / 2 * k1v
            k2u, k2v = v, -c2 * v + g2 * u
            u, v = y0 + hs / 2 * k2u, y1 + hs / 2 * k2v
            k3u, k3v = v, -c2 * v + g2 * u
            u, v = y0 + hs * k3u, y1 + hs * k3v
            k4u, k4v = v, -c4 * v + g4 * u
            y0 = y0 + hs / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
            y1 = y1 + hs / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
            r += hs
            c1, g1 = c4, g4
        r = target
        values[:, i] = y0
        derivs[:, i] = y1
    return values, derivs


def legendre_profiles(orders, r_grid):
    """P_k(cos r) and its r-derivative for k = 0..max(orders) by recurrence."""
    orders = np.atleast_1d(np.asarray(orders, dtype=int))
    x = np.cos(np.asarray(r_grid, dtype=float))
    sx = np.sin(np.asarray(r_grid, dtype=float))
    K = int(orders.max())
    P = np.zeros((K + 1, x.size))
    dP = np.zeros((K + 1, x.size))  # d/dx P_k
    P[0] = 1.0
    if K >= 1:
        P[1] = x
        dP[1] = 1.0
    for k in range(1, K):
        P[k + 1] = ((2 * k + 1) * x * P[k] - k * P[k - 1]) / (k + 1)
        dP[k + 1] = dP[k - 1] + (2 * k + 1) * P[k]
    return P[orders], -sx * dP[orders]


@dataclass(frozen=True, eq=False)
class RadialSolution:
    geometry: str
    n: int
    m: int
    param: SpectralParameter
    grid: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    normalization: str

    @property
    def energy(self) -> float:
        return -self.param.eigenvalue

    def __call__(self, r):
        """Cubic Hermite interpolation of the samples."""
        from scipy.interpolate import CubicHermiteSpline

        return CubicHermiteSpline(self.grid, self.values, self.derivs)(r)


def solve_radial(geometry, n, m, lam, r_max, N=2001, accuracy=0.02) -> RadialSolution:
    geometry = radial_geometry(geometry)
    if N < 64:
        raise ValueError(f"radial grid needs at least 64 points, got {N}")
    if not r_max > 0:
        raise ValueError(f"r_max must be positive, got {r_max}")
    if geometry == SPHERICAL and not r_max < np.pi:
        raise ValueError(f"spherical radial solutions need r_max < pi, got {r_max}")
    if m < 0 or int(m) != m:
        raise ValueError(f"angular order must be a non-negative integer, got {m}")
    grid = np.linspace(0.0, r_max, N)
    vals, ders = shoot(geometry, n, int(m), [lam], grid, accuracy=accuracy)
    return RadialSolution(
        geometry=geometry,
        n=n,
        m=int(m),
        param=SpectralParameter(float(lam), n, geometry),
        grid=grid,
        values=vals[0],
        derivs=ders[0],
        normalization="unit_at_zero" if m == 0 else "frobenius_leading_one",
    )


def ode_residual(sol: RadialSolution) -> np.ndarray:
    """Residual of the radial equation at interior grid points, relative to max|h|.

    h'' is taken from a fourth-order centred difference of the stored h'
    samples, so the check is independent of the integrator's internal stages.
    """
    r = sol.grid
    dr = r[1] - r[0]
    d = sol.derivs
    i = np.arange(2, r.size - 2)
    h2 = (-d[i + 2] + 8 * d[i + 1] - 8 * d[i - 1] + d[i - 2]) / (12 * dr)
    c, w = _ode_coefficients(sol.geometry, sol.n, r[i])
    M = sol.m * (sol.m + sol.n - 2)
    res = h2 + c * d[i] - M * w * sol.values[i] + sol.energy * sol.values[i]
    return np.abs(res) / np.max(np.abs(sol.values))


def horospherical_oracle(n, lam, r, N=256) -> float:
    """m = 0 eigenfunction at radius r as the boundary average of exp(mu <x, eta>)."""
    if n not in (2, 3):
        raise ValueError(f"horospherical oracle implemented for n in (2, 3), got {n}")
    if r < 0:
        raise ValueError("radius must be non-negative")
    mu = (2j * lam + (n - 1)) / 2.0
    rho = math.tanh(r / 2.0)
    if n == 2:
        phi = 2.0 * np.pi * np.arange(N) / N
        weights = np.full(N, 1.0 / N)
        cos_t = np.cos(phi)
    else:
        # average over S^2 of a function of the polar angle: (1/2) int f(cos) dcos
        cos_t, gw = roots_legendre(N)
        weights = gw / 2.0
    bracket = np.log((1.0 - rho**2) / (1.0 - 2.0 * rho * cos_t + rho**2))
    value = np.dot(weights, np.exp(mu * bracket))
    if abs(value.imag) > 1e-8:
        raise ArithmeticError(f"horospherical average has imaginary part {value.imag:.3g}")
    return float(value.real)


def radial_jet(sol: RadialSolution, index: int, order: int) -> Jet:
    """Jet of the radial solution at a grid point, continued from (h, h') by the ODE."""
    s0 = float(sol.grid[index])
    if s0 <= 0:
        raise ValueError("radial jets need a base point r > 0")
    coeffs = np.zeros(order + 1)
    coeffs[0] = sol.values[index]
    if order >= 1:
        coeffs[1] = sol.derivs[index]
    x = jet_variable(s0, order)
    trig = "coth" if sol.geometry == HYPERBOLIC else "cot"
    sin_name = "sinh" if sol.geometry == HYPERBOLIC else "sin"
    c = (sol.n - 1) * jet_apply_elementary(trig, x)
    w = 1.0 / jet_apply_elementary(sin_name, x) ** 2
    M = sol.m * (sol.m + sol.n - 2)
    for k in range(2, order + 1):
        h = Jet(s0, coeffs)
        second = -(c * h.derivative()) + M * (w * h) - sol.energy * h
        # second = h'' so coefficient of (s-s0)^(k-2) fixes a_k
        coeffs[k] = second.coeffs[k - 2] / (k * (k - 1))
    return Jet(s0, coeffs)


# -- operators on jets ---------------------------------------------------------


@dataclass(frozen=True)
class OperatorSpec:
    """One of d_s, B_r, Gamma(k), D(m), Q(m), poly_in_D(m, coeffs), power_of_d_s(l)."""

    kind: str
    n: int = 2
    k: int = 0
    m: int = 0
    l: int = 0
    coeffs: tuple = field(default_factory=tuple)
    geometry: str = HYPERBOLIC

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind == "Gamma" and self.k < 1:
            raise ValueError("Gamma(k) needs k >= 1")
        if self.kind in ("D", "Q", "poly_in_D") and self.m < 0:
            raise ValueError("angular order must be >= 0")
        object.__setattr__(self, "geometry", radial_geometry(self.geometry))

    @property
    def differential_order(self) -> int:
        return {
            "d_s": 1,
            "B_r": 2,
            "Gamma": 1,
            "D": 2,
            "Q": self.m,
            "poly_in_D": 2 * max(len(self.coeffs) - 1, 0),
            "power_of_d_s": self.l,
        }[self.kind]


_KINDS = ("d_s", "B_r", "Gamma", "D", "Q", "poly_in_D", "power_of_d_s")


@lru_cache(maxsize=512)
def _trig_cached(geometry, s0, order):
    x = jet_variable(s0, order)
    if geometry == HYPERBOLIC:
        return jet_apply_elementary("coth", x), jet_apply_elementary("sinh", x) ** -2
    return jet_apply_elementary("cot", x), jet_apply_elementary("sin", x) ** -2


def _trig(geometry, f):
    """coth (cot) and 1/sinh^2 (1/sin^2) jets matching f's base point and order."""
    return _trig_cached(geometry, f.base_point, f.order)


def _D_terms(f, n, m, geometry):
    ct, w = _trig(geometry, f)
    d1 = f.derivative()
    terms = [d1.derivative(), (n - 1) * (ct * d1)]
    if m:
        terms.append(-(m * (m + n - 2)) * (w * f))
    return terms


def _Gamma_terms(f, n, k, geometry):
    ct, _ = _trig(geometry, f)
    return [f.derivative(), (n + k - 2) * (ct * f)]


def _total(terms):
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return out


def _D(f, n, m, geometry):
    return _total(_D_terms(f, n, m, geometry))


def _Gamma(f, n, k, geometry):
    return _total(_Gamma_terms(f, n, k, geometry))


def apply_operator(spec: OperatorSpec, f: Jet) -> Jet:
    if f.base_point <= 0:
        raise ValueError(f"operators are singular at s <= 0 (base point {f.base_point})")
    need = spec.differential_order
    if f.order < need:
        raise ValueError(
            f"{spec.kind} has differential order {need}; jet order {f.order} is insufficient "
            f"(required order >= {need})"
        )
    n, g = spec.n, spec.geometry
    if spec.kind == "d_s":
        return f.derivative()
    if spec.kind == "power_of_d_s":
        for _ in range(spec.l):
            f = f.derivative()
        return f
    if spec.kind == "B_r":
        return _D(f, n, 0, g)
    if spec.kind == "D":
        return _D(f, n, spec.m, g)
    if spec.kind == "Gamma":
        return _Gamma(f, n, spec.k, g)
    if spec.kind == "Q":
        for k in range(spec.m, 0, -1):
            f = _Gamma(f, n, k, g)
        return f
    # poly_in_D: sum_j coeffs[j] D_m^j f
    total = None
    power = f
    for j, cj in enumerate(spec.coeffs):
        if j:
            power = _D(power, n, spec.m, g)
        term = cj * power
        total = term if total is None else total + term
    return total


def apply_chain(specs, f: Jet) -> Jet:
    """Apply operators right-to-left as written: chain [A, B] gives A(B f)."""
    for spec in reversed(list(specs)):
        f = apply_operator(spec, f)
    return f


def operator_row(specs, s0, n_derivs, order=None):
    """Coefficients c_j with [chain f](s0) = sum_j c_j f^(j)(s0), j < n_derivs."""
    return _operator_row(tuple(specs), float(s0), int(n_derivs), order).copy()


@lru_cache(maxsize=4096)
def _operator_row(specs, s0, n_derivs, order):
    if order is None:
        order = sum(s.differential_order for s in specs) + 2
    order = max(order, n_derivs - 1)
    row = np.zeros(n_derivs)
    for j in range(n_derivs):
        row[j] = apply_chain(specs, jet_monomial(s0, order, j)).coeffs[0]
    return row


# -- identities ---------------------------------------------------------------


def kappa(m, n, i):
    return (m - i - 1) * (m + n - 2 - i)


@lru_cache(maxsize=4096)
def u_jet(i, m, n, s0, order, geometry=HYPERBOLIC):
    """Jet of u_i(s) = cosh(s)^i sinh(s)^(2-n-m)."""
    x = jet_variable(s0, order)
    if radial_geometry(geometry) == HYPERBOLIC:
        c, s = jet_apply_elementary("cosh", x), jet_apply_elementary("sinh", x)
    else:
        c, s = jet_apply_elementary("cos", x), jet_apply_elementary("sin", x)
    return c ** i * s ** (2 - n - m)


@lru_cache(maxsize=4096)
def test_function_jet(a, b, s0, order):
    """Jet of sinh(s)^a cosh(s)^b."""
    x = jet_variable(s0, order)
    return jet_apply_elementary("sinh", x) ** a * jet_apply_elementary("cosh", x) ** b


@dataclass
class IdentityReport:
    identity: str
    params: dict
    sample_points: list
    residuals: list
    max_residual: float
    tolerance: float
    passed: bool

    def to_dict(self):
        return {
            "identity": self.identity,
            "params": self.params,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def _side(specs, f, order=None):
    """Value of the chain applied to f and a rounding scale for it.

    The scale adds up the magnitudes of the individual terms formed at every
    stage, so exact cancellations inside an operator do not hide round-off,
    plus sum_j |c_j f^(j)| with c_j the operator row, which accounts for
    rounding already present in the coefficients of f.
    """
    scale = 0.0
    f0 = f
    for spec in reversed(list(specs)):
        if spec.kind == "D":
            stages = [("D", spec.m)]
        elif spec.kind == "Gamma":
            stages = [("Gamma", spec.k)]
        elif spec.kind == "Q":
            stages = [("Gamma", k) for k in range(spec.m, 0, -1)]
        else:
            raise ValueError(f"no term split for {spec.kind}")
        for kind, p in stages:
            if kind == "D":
                terms = _D_terms(f, spec.n, p, spec.geometry)
            else:
                terms = _Gamma_terms(f, spec.n, p, spec.geometry)
            scale += sum(abs(t.coeffs[0]) for t in terms)
            f = _total(terms)
    # sensitivity to rounding in the input jet itself
    nd = sum(sp.differential_order for sp in specs) + 1
    row = _operator_row(tuple(specs), f0.base_point, nd, f0.order)
    derivs = np.array([math.factorial(j) * f0.coeffs[j] for j in range(nd)])
    return f.coeffs[0], scale + float(np.sum(np.abs(row * derivs)))


def verify_identity(identity, n, sample_points, tolerance=1e-9, **params) -> IdentityReport:
    """Check one operator identity at each sample point through jets.

    identity: 'commutation' (k), 'prop_Dm' (m, i), 'prop_Qm' (m, i) or
    'gamma_ladder' (k, i). The residual at each point is |lhs - rhs| divided by
    the sum of the magnitudes of the terms that make up both sides.
    """
    pts = [float(s) for s in sample_points]
    residuals = []
    if identity == "commutation":
        k = params["k"]
        order = 6
        for s0 in pts:
            worst = 0.0
            for a in range(4):
                for b in range(4 - a):
                    f = test_function_jet(a, b, s0, order)
                    lv, ls = _side([OperatorSpec("Gamma", n, k=k), OperatorSpec("D", n, m=k)], f, order)
                    rv, rs = _side([OperatorSpec("D", n, m=k - 1), OperatorSpec("Gamma", n, k=k)], f, order)
                    worst = max(worst, abs(lv - rv) / max(ls + rs, 1e-300))
            residuals.append(worst)
    elif identity == "prop_Dm":
        m, i = params["m"], params["i"]
        if not 0 <= i < m:
            raise ValueError("prop_Dm needs 0 <= i < m")
        kap = kappa(m, n, i)
        for s0 in pts:
            u = u_jet(i, m, n, s0, 4)
            dv, ds = _side([OperatorSpec("D", n, m=m)], u, 4)
            lhs = dv - kap * u.coeffs[0]
            rhs = 0.0
            scale = ds + abs(kap * u.coeffs[0])
            if i >= 2:
                rhs = -i * (i - 1) * u_jet(i - 2, m, n, s0, 0).coeffs[0]
                scale += abs(rhs)
            residuals.append(abs(lhs - rhs) / scale)
    elif identity == "prop_Qm":
        m, i = params["m"], params["i"]
        if not 0 <= i < m:
            raise ValueError("prop_Qm needs 0 <= i < m")
        for s0 in pts:
            u = u_jet(i, m, n, s0, m + 2)
            qv, qs = _side([OperatorSpec("Q", n, m=m)], u, m + 2)
            residuals.append(abs(qv) / qs)
    elif identity == "gamma_ladder":
        k, i = params["k"], params["i"]
        for s0 in pts:
            x = jet_variable(s0, 3)
            ch, sh = jet_apply_elementary("cosh", x), jet_apply_elementary("sinh", x)
            f = ch**i * sh ** (2 - n - k)
            lv, ls = _side([OperatorSpec("Gamma", n, k=k)], f, 3)
            rv = i * (ch ** (i - 1) * sh ** (3 - n - k)).coeffs[0] if i else 0.0
            residuals.append(abs(lv - rv) / max(ls + abs(rv), 1e-300))
    else:
        raise ValueError(f"unknown identity {identity!r}")
    worst = float(max(residuals)) if residuals else 0.0
    return IdentityReport(
        identity=identity,
        params={"n": n, **params},
        sample_points=pts,
        residuals=[float(r) for r in residuals],
        max_residual=worst,
        tolerance=tolerance,
        passed=worst <= tolerance,
    )


@dataclass
class LemmaMatrices:
    m: int
    n: int
    R: float
    A: np.ndarray
    B: np.ndarray
    stacked_rank: int
    min_singular_value: float
    singular_values: np.ndarray
    equilibrated_rank: int
    equilibrated_min_singular_value: float


def lemma_matrices(m, n, R, rank_threshold=1e-8, order=None) -> LemmaMatrices:
    """Rows A_l of [d^l Q_m F](R) and B_l of [D_m^l F](R) in terms of F^(i)(R), i < 2m."""
    if m < 1:
        raise ValueError("lemma matrices need m >= 1")
    if not R > 0:
        raise ValueError("R must be positive")
    if order is None:
        order = 2 * m + 4
    if order < 2 * m - 1:
        raise ValueError(f"jet order {order} too small; need at least {2 * m - 1}")
    size = 2 * m
    A = np.zeros((m, size))
    B = np.zeros((m, size))
    Q = OperatorSpec("Q", n, m=m)
    D = OperatorSpec("D", n, m=m)
    for j in range(size):
        e = jet_monomial(R, order, j)
        q = apply_operator(Q, e)
        for l in range(m):
            A[l, j] = q.coeffs[l] * math.factorial(l)  # l-th derivative of Q_m e at R
        d = e
        for l in range(m):
            if l:
                d = apply_operator(D, d)
            B[l, j] = d.coeffs[0]
    stacked = np.vstack([A, B])
    normed = stacked / np.linalg.norm(stacked, axis=1, keepdims=True)
    sv = np.linalg.svd(normed, compute_uv=False)
    esv = np.linalg.svd(_equilibrate(stacked), compute_uv=False)
    return LemmaMatrices(
        m=m,
        n=n,
        R=float(R),
        A=A,
        B=B,
        stacked_rank=int(np.sum(sv > rank_threshold)),
        min_singular_value=float(sv.min()),
        singular_values=sv,
        equilibrated_rank=int(np.sum(esv > rank_threshold)),
        equilibrated_min_singular_value=float(esv.min()),
    )


def _equilibrate(M, sweeps=50):
    """Alternate row and column normalization; ends on rows.

    Diagonal scalings leave the rank unchanged, while columns (derivative
    orders) differ in scale by factorial-like factors that row normalization
    alone cannot remove.
    """
    M = np.array(M, dtype=float)
    for _ in range(sweeps):
        M /= np.linalg.norm(M, axis=1, keepdims=True)
        M /= np.linalg.norm(M, axis=0, keepdims=True)
    return M / np.linalg.norm(M, axis=1, keepdims=True)
