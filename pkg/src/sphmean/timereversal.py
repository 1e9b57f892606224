"""Reconstruction by time reversal of the mode Darboux equation, with diagnostics."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .darboux import CFL_LIMIT, backward_modes, check_cfl
from .geometry import H2, check_geometry
from .radial import HYPERBOLIC, radial_geometry
from .rangecheck import _fd_weights
from .transform import ModeField, Sinogram, mode_decompose_array, mode_synthesize, t_inverse

DEFAULT_MODE_CAP = 32
MODE_REL_CUTOFF = 1e-8
EVENNESS_WARN = 1.0
SUPPORT_WARN = 1e-6


class DarbouxWarning(UserWarning):
    """Data incompatible with the assumptions of the backward solve."""


@dataclass(eq=False)
class ModeSolution:
    m: int
    parity: str
    s_grid: np.ndarray  # [0, R]
    r_grid: np.ndarray
    U: np.ndarray  # (n_r, n_s)
    ds: float
    dr: float
    evenness: float  # max |U_r(s, 0)| R / max over modes of |U(s, 0)|, one-sided
    boundary: np.ndarray  # g_m(r)

    @property
    def cfl(self) -> float:
        return self.dr / self.ds

    @property
    def F(self) -> np.ndarray:
        return self.U[0]


@dataclass
class ReconReport:
    rel_l2_error: float | None
    boundary_derivatives: dict  # k -> max_m |F_m^(k)(R)| / interior scale of F^(k)
    boundary_derivatives_per_mode: dict
    dod_sup: float
    dod_per_mode: dict
    wave_residual: float | None
    symmetry_residual: dict
    energy_trace: list | None
    evenness: float
    modes_used: int
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- modes


def mode_decompose(g: Sinogram, m_max=None) -> dict:
    """g_{m,parity}(r) with e_0 = 1, e_m = sqrt(2) cos / sin (theta-average Parseval)."""
    return mode_decompose_array(g.values, m_max)


def truncate_modes(modes: dict, rel=MODE_REL_CUTOFF, cap=DEFAULT_MODE_CAP) -> dict:
    """Keep all modes up to the largest order whose norm is at least rel * ||g||, capped."""
    norms = {k: float(np.linalg.norm(v)) for k, v in modes.items()}
    total = math.sqrt(sum(x * x for x in norms.values()))
    if total == 0:
        return {(0, "cos"): modes.get((0, "cos"), next(iter(modes.values())))}
    top = max((k[0] for k, x in norms.items() if x >= rel * total), default=0)
    top = min(top, cap)
    return {k: v for k, v in modes.items() if k[0] <= top}


def backward_step(R, dr, n_s=None) -> float:
    """s step for the backward solve: R / (n_s - 1), or the finest the CFL bound allows."""
    K = n_s - 1 if n_s is not None else int(math.floor(CFL_LIMIT * R / dr * (1 + 1e-12)))
    if K < 4:
        raise ValueError(f"radial step dr = {dr:.4g} too coarse for a ball of radius {R}")
    ds = R / K
    check_cfl(ds, dr)
    return ds


def backward_solve_modes(modes: dict, geometry, R, r_grid, ds=None, n=2) -> list:
    """Time-reversed solves for all modes at once; returns ModeSolution objects."""
    r_grid = np.asarray(r_grid, dtype=float)
    dr = float(r_grid[1] - r_grid[0])
    ds = backward_step(R, dr) if ds is None else ds
    keys = sorted(modes)
    G = np.array([np.asarray(modes[k], dtype=float) for k in keys])
    ms = [k[0] for k in keys]
    res = backward_modes(G, ms, radial_geometry(geometry), ds, dr, R, r_grid, n=n)
    K = res.U.shape[2] - 1
    s = ds * np.arange(K + 1)
    out = []
    # one-sided U_r(s, 0) in units of max |F| / R over all modes: zero for even data
    w = _fd_weights(1, [0, 1, 2, 3, 4]) / dr
    slope = np.max(np.abs(np.einsum("k,mks->ms", w, res.U[:, :5])), axis=1) * R
    den = float(np.max(np.abs(res.U[:, 0]), initial=0.0))
    for i, (m, parity) in enumerate(keys):
        even = float(slope[i] / den) if den > 0 else 0.0
        out.append(ModeSolution(m, parity, s, r_grid, res.U[i], ds, dr, even, G[i]))
    return out


def backward_solve_mode(g_m, m, geometry, R, r_grid, ds=None, parity="cos", n=2) -> ModeSolution:
    """Single-mode time reversal with lateral data g_m(r) on r_grid."""
    g_m = np.asarray(g_m, dtype=float)
    r_grid = np.asarray(r_grid, dtype=float)
    tail = r_grid >= 2 * R * (1 - 1e-12)
    scale = float(np.max(np.abs(g_m)))
    if scale > 0 and np.max(np.abs(g_m[tail]), initial=0.0) > SUPPORT_WARN * scale:
        warnings.warn("g_m does not vanish for r >= 2R; the zero terminal data are inconsistent", DarbouxWarning)
    return backward_solve_modes({(m, parity): g_m}, geometry, R, r_grid, ds, n)[0]


def assemble_reconstruction(solutions, geometry, R, metadata=None) -> ModeField:
    """ModeField with F_m(s) = U_m(s, 0) on [0, R]; zero outside by construction."""
    if not solutions:
        raise ValueError("no mode solutions")
    s = solutions[0].s_grid
    for sol in solutions:
        if sol.s_grid.shape != s.shape or np.max(np.abs(sol.s_grid - s)) > 0:
            raise ValueError("mode solutions live on different s grids")
    modes = {(sol.m, sol.parity): sol.F.copy() for sol in solutions}
    return ModeField(geometry, float(R), s, modes, dict(metadata or {}))


# ---------------------------------------------------------------- diagnostics


def field_rel_l2(field_: ModeField, truth, n_phi=128) -> float:
    """Relative L2(B_R) error of a ModeField against a phantom or another ModeField."""
    s = field_.s_grid
    theta = 2.0 * np.pi * np.arange(n_phi) / n_phi
    rec = mode_synthesize(field_.modes, theta)
    if isinstance(truth, ModeField):
        ref = truth.evaluate_polar(s[None, :], theta[:, None])
    else:
        ref = truth.polar(s, theta)
    vol = np.sinh(s) if field_.geometry == H2 else np.sin(s)
    w = np.full(s.size, s[1] - s[0]) * vol
    w[[0, -1]] *= 0.5
    num = float(np.mean((rec - ref) ** 2, axis=0) @ w)
    den = float(np.mean(ref**2, axis=0) @ w)
    return math.sqrt(num / den) if den > 0 else math.sqrt(num)


def _derivative_profiles(F, ds, kmax):
    """Centred-difference derivatives 0..kmax of F (last axis), edges one-sided."""
    out = [F]
    for _ in range(kmax):
        out.append(np.gradient(out[-1], ds, axis=-1, edge_order=2))
    return out


def boundary_derivatives(solutions, kmax=4) -> tuple:
    """|F_m^(k)(R)| from 5-point one-sided stencils, normalized by the interior scale.

    The scale for order k is max over modes and over s in [0, R] of |F_m^(k)|
    from centred differences; returns (per order, per mode).
    """
    if not solutions:
        return {}, {}
    ds = solutions[0].ds
    F = np.array([sol.F for sol in solutions])
    derivs = _derivative_profiles(F, ds, kmax)
    scales = [float(np.max(np.abs(d[:, 2:-2]), initial=0.0)) for d in derivs]
    pts = [0, -1, -2, -3, -4]
    per_mode = {}
    worst = {}
    for k in range(kmax + 1):
        w = _fd_weights(k, pts)
        vals = np.abs(F[:, ::-1][:, :5] @ w) / ds**k
        norm = vals / scales[k] if scales[k] > 0 else np.zeros_like(vals)
        worst[k] = float(np.max(norm))
        for sol, v in zip(solutions, norm):
            per_mode.setdefault(f"{sol.m},{sol.parity}", []).append(float(v))
    return worst, per_mode


def dod_sup(solutions, R, rel_floor=1e-6) -> tuple:
    """sup |U_m(s, r)| over r - s >= R, r <= 2R, relative to sup |g_m|.

    Modes whose data are below rel_floor of the largest mode are skipped.
    """
    gmax = max((float(np.max(np.abs(sol.boundary))) for sol in solutions), default=0.0)
    per = {}
    for sol in solutions:
        gm = float(np.max(np.abs(sol.boundary)))
        if gm == 0 or gm < rel_floor * gmax:
            continue
        S, Rr = np.meshgrid(sol.s_grid, sol.r_grid)
        cone = (Rr - S >= R * (1 + 1e-12)) & (Rr <= 2 * R * (1 + 1e-12))
        per[f"{sol.m},{sol.parity}"] = float(np.max(np.abs(sol.U[cone]), initial=0.0) / gm)
    return max(per.values(), default=0.0), per


def _q_leading(m, n):
    return float(np.prod([2 * k + n - 2 for k in range(1, m + 1)])) if m else 1.0


def _apply_Q(F, s, m, n, geometry):
    """Q_m = Gamma_1 ... Gamma_m (Gamma_m first) by centred differences, s > 0 only."""
    ds = s[1] - s[0]
    safe = np.where(s > 0, s, 1.0)
    cot = 1.0 / (np.tanh(safe) if geometry == HYPERBOLIC else np.tan(safe))
    cot[s == 0] = 0.0  # the s = 0 value is never used
    out = F
    for k in range(m, 0, -1):
        out = np.gradient(out, ds, edge_order=2) + (n + k - 2) * cot * out
    return out


def symmetry_residual(sol: ModeSolution, geometry, n=2, trim=0.15, fit=0.02) -> float:
    """Compare [Q_m U](0, t) with [Q_m F](t) on t in the trimmed interior of (0, R).

    At s = 0, Q_m U reduces to c_m lim U(s, t) / s^m with c_m = prod (2k + n - 2);
    the limit is the leading coefficient of a least-squares fit of U by
    s^m (a_0 + a_1 s^2) on s <= max(6 ds, fit * R). U is O(s^m) there, so
    the estimate degrades with m at a fixed grid.
    """
    g = radial_geometry(geometry)
    m = sol.m
    s = sol.s_grid
    R = s[-1]
    rows = sol.r_grid <= R
    t = sol.r_grid[rows]
    near = (s > 0) & (s <= max(6.5 * sol.ds, fit * R))
    S = s[near] / R
    A = np.stack([S**m, S ** (m + 2)], axis=1)
    coef = np.linalg.lstsq(A, sol.U[rows][:, near].T, rcond=None)[0][0] / R**m
    left = _q_leading(m, n) * coef
    if m == 0:
        left = sol.U[rows][:, 0]
    qf = _apply_Q(sol.F, s, m, n, g)
    inner = (s > trim * R) & (s < (1 - trim) * R)
    right = CubicSpline(s[inner], qf[inner])(t[(t > trim * R) & (t < (1 - trim) * R)])
    left = left[(t > trim * R) & (t < (1 - trim) * R)]
    scale = float(np.max(np.abs(qf[inner]), initial=0.0))
    return float(np.max(np.abs(left - right)) / scale) if scale > 0 else 0.0


def energy_trace(solutions, geometry) -> list:
    """E(r) = 1/2 sum_m int (U_r^2 + U_s^2 + m^2 U^2 / sin^2 s) sin s ds on the sphere."""
    if not solutions:
        return []
    s = solutions[0].s_grid
    ds, dr = solutions[0].ds, solutions[0].dr
    sin = np.sinh(s) if check_geometry(geometry) == H2 else np.sin(s)
    w = np.full(s.size, ds) * sin
    w[[0, -1]] *= 0.5
    inv = np.zeros_like(s)
    inv[1:] = 1.0 / sin[1:] ** 2
    E = np.zeros(solutions[0].r_grid.size)
    for sol in solutions:
        Ur = np.gradient(sol.U, dr, axis=0, edge_order=2)
        Us = np.gradient(sol.U, ds, axis=1, edge_order=2)
        dens = Ur**2 + Us**2 + sol.m**2 * inv * sol.U**2
        E += 0.5 * dens @ w
    return E.tolist()


def wave_equivalence_residual(sol: ModeSolution, geometry, n=2, trim=0.1, lambda_max=None, n_lambda=2048,
                              tail_tol=1e-2) -> float:
    """Residual of the wave form satisfied by V(s, .) = T^{-1} U(s, .).

    H: V_tt - (n-1)^2/4 V - D_m V;  S: V_tt + V/4 - D_m V. Centred differences
    on a trimmed interior; normalized by the largest of the three terms.
    """
    g = radial_geometry(geometry)
    if not np.any(sol.U):
        return 0.0
    R = sol.s_grid[-1]
    r = sol.r_grid
    keep = r <= 2 * R * (1 + 1e-12) + 2 * sol.dr
    t = r[keep]
    U = sol.U[keep]  # (n_t, n_s)
    lam_max = lambda_max if lambda_max is not None else 60.0 / (2 * R)
    V = t_inverse(U.T, t, g, n, t, lambda_max=lam_max, n_lambda=n_lambda, tail_tol=tail_tol, support=2 * R)
    V = V.T  # (n_t, n_s)
    ds, dt = sol.ds, t[1] - t[0]
    s = sol.s_grid
    Vtt = (V[2:, 1:-1] - 2 * V[1:-1, 1:-1] + V[:-2, 1:-1]) / dt**2
    Vss = (V[1:-1, 2:] - 2 * V[1:-1, 1:-1] + V[1:-1, :-2]) / ds**2
    Vs = (V[1:-1, 2:] - V[1:-1, :-2]) / (2 * ds)
    si = s[1:-1]
    trig_c = np.tanh(si) if g == HYPERBOLIC else np.tan(si)
    trig_s = np.sinh(si) if g == HYPERBOLIC else np.sin(si)
    DV = Vss + (n - 1) * Vs / trig_c - sol.m * (sol.m + n - 2) * V[1:-1, 1:-1] / trig_s**2
    shiftV = (-(n - 1) ** 2 / 4.0 if g == HYPERBOLIC else 0.25) * V[1:-1, 1:-1]
    res = Vtt + shiftV - DV
    ti = t[1:-1]
    mask = ((si > trim * R) & (si < (1 - trim) * R))[None, :] & ((ti > trim * R) & (ti < (2 - trim) * R))[:, None]
    scale = max(float(np.max(np.abs(a[mask]))) for a in (Vtt, shiftV, DV))
    return float(np.max(np.abs(res[mask])) / scale) if scale > 0 else 0.0


def solution_diagnostics(solutions, geometry, R, n=2, truth_field=None, reconstruction=None, wave=True,
                         wave_modes=4, symmetry_max_m=3) -> ReconReport:
    """Boundary-vanishing, domain-of-dependence, symmetry, wave and energy diagnostics."""
    worst, per_mode = boundary_derivatives(solutions)
    dsup, dper = dod_sup(solutions, R)
    notes = []
    # symmetry and wave residuals on the dominant modes
    ranked = sorted(solutions, key=lambda sl: -float(np.max(np.abs(sl.boundary))))
    gmax = float(np.max(np.abs(ranked[0].boundary))) if ranked else 0.0
    sym = {}
    for sol in ranked:
        if sol.m <= symmetry_max_m and float(np.max(np.abs(sol.boundary))) > 1e-3 * gmax:
            sym[f"{sol.m},{sol.parity}"] = symmetry_residual(sol, geometry, n)
    wres = None
    if wave and gmax > 0:
        wres = 0.0
        for sol in ranked[:wave_modes]:
            if float(np.max(np.abs(sol.boundary))) > 1e-3 * gmax:
                wres = max(wres, wave_equivalence_residual(sol, geometry, n))
    energy = energy_trace(solutions, geometry) if check_geometry(geometry) != H2 else None
    even = max((sol.evenness for sol in solutions), default=0.0)
    if even > EVENNESS_WARN:
        notes.append(f"U_r(s, 0) reaches {even:.3g} max|F| / R: data not compatible with an even extension")
    for sol in solutions:
        tail = sol.r_grid >= 2 * R * (1 - 1e-12)
        gm = float(np.max(np.abs(sol.boundary)))
        if gm > 0 and gmax > 0 and np.max(np.abs(sol.boundary[tail]), initial=0.0) > SUPPORT_WARN * gmax:
            notes.append(f"mode {sol.m},{sol.parity}: data do not vanish for r >= 2R")
    rel = field_rel_l2(reconstruction, truth_field) if (truth_field is not None and reconstruction is not None) else None
    return ReconReport(
        rel_l2_error=rel,
        boundary_derivatives={str(k): v for k, v in worst.items()},
        boundary_derivatives_per_mode=per_mode,
        dod_sup=dsup,
        dod_per_mode=dper,
        wave_residual=wres,
        symmetry_residual=sym,
        energy_trace=energy,
        evenness=even,
        modes_used=len(solutions),
        warnings=notes,
    )


def reconstruct(g: Sinogram, ds=None, m_cap=DEFAULT_MODE_CAP, rel=MODE_REL_CUTOFF, truth=None, diagnostics=True,
                wave=True):
    """Full pipeline: modes of g, backward solves, assembled field and report."""
    if g.r_max < 2 * g.R * (1 - 1e-12):
        raise ValueError(f"sinogram covers r <= {g.r_max}, the backward solve starts at 2R = {2 * g.R}")
    modes = truncate_modes(mode_decompose(g), rel, m_cap)
    sols = backward_solve_modes(modes, g.geometry, g.R, g.r_grid, ds)
    field_ = assemble_reconstruction(sols, g.geometry, g.R, {"source": "time_reversal", "modes": len(sols)})
    report = None
    if diagnostics:
        report = solution_diagnostics(sols, g.geometry, g.R, truth_field=truth, reconstruction=field_, wave=wave)
    return field_, report, sols
