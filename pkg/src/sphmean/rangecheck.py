"""Range certification of sinograms: support, smoothness and orthogonality."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import H2, S2
from .phantoms import smooth_cutoff
from .radial import HYPERBOLIC, radial_geometry, shoot
from .spectrum import SpectralBasis
from .transform import Sinogram, fl_kernel, mode_decompose_array

IN_RANGE = "in_range"
OUT_OF_RANGE = "out_of_range"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Thresholds:
    pass_residual: float = 5e-3
    fail_residual: float = 5e-2
    support: float = 1e-6  # sup |g| on r >= 2R relative to sup |g|
    vanish: float = 1e-6  # scaled Taylor coefficient at r = 0 counted as zero
    smoothness: float = 1.0  # minimal spectral decay exponent
    orders: int = 4  # vanishing orders checked at r = 0


@dataclass
class RangeReport:
    support_pass: bool
    support_sup: float
    support_sup_relative: float
    origin_vanishing_orders: list
    min_vanishing_order: int
    smoothness_proxy: dict
    smoothness_pass: bool
    orthogonality: list = field(default_factory=list)
    max_normalized_residual: float = 0.0
    verdict: str = INCONCLUSIVE
    thresholds: dict = field(default_factory=dict)
    reasons: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- support and smoothness


def _fd_weights(p, points):
    """Weights for the p-th derivative at 0 from samples at the integer offsets `points`."""
    k = np.arange(len(points))
    V = np.array(points, dtype=float)[None, :] ** k[:, None]
    rhs = np.zeros(len(points))
    rhs[p] = math.factorial(p)
    return np.linalg.solve(V, rhs)


def origin_derivatives(g: Sinogram, orders: int) -> np.ndarray:
    """One-sided second-order estimates of d^p g / dr^p at r = 0, shape (n_theta, orders+1)."""
    dr = g.dr
    out = np.empty((g.n_theta, orders + 1))
    for p in range(orders + 1):
        pts = list(range(p + 2))
        w = _fd_weights(p, pts)
        out[:, p] = g.values[:, : len(pts)] @ w / dr**p
    return out


def sobolev_exponent(spectrum) -> float:
    """Exponent s with sqrt(sum_{j >= k} |c_j|^2) ~ k^{-s}, fitted above the noise floor.

    A jump gives s near 1/2, a kink near 3/2, smooth data a large value;
    an all-zero spectrum reports infinity.
    """
    c = np.abs(np.asarray(spectrum, dtype=float))
    if c.size < 4 or not np.any(c):
        return math.inf
    tail = np.sqrt(np.cumsum((c**2)[::-1])[::-1])
    k = np.arange(1, c.size)
    t = tail[1:]
    keep = t > 1e-12 * tail[0]
    if keep.sum() < 3:
        return math.inf
    slope = np.polyfit(np.log(k[keep]), np.log(t[keep]), 1)[0]
    return float(-slope)


def support_smoothness_report(g: Sinogram, R=None, orders=4, thresholds: Thresholds | None = None,
                              pw_lambda_max=30.0, pw_count=61) -> dict:
    """Support, vanishing-at-origin and spectral-decay diagnostics."""
    th = thresholds or Thresholds(orders=orders)
    R = g.R if R is None else R
    if g.r_max < 2 * R * (1 - 1e-12):
        raise ValueError(f"sinogram covers r <= {g.r_max}, the diagnostics need r >= 2R = {2 * R}")
    if g.n_r < orders + 3:
        raise ValueError(f"need at least {orders + 3} radial samples")
    v = g.values
    gmax = float(np.max(np.abs(v)))
    outside = g.r_grid >= 2 * R * (1 - 1e-12)
    sup = float(np.max(np.abs(v[:, outside]), initial=0.0))
    sup_rel = sup / gmax if gmax > 0 else 0.0
    support_pass = sup_rel <= th.support

    # r = 0: scaled Taylor coefficients |g^(p)(0)| (2R)^p / p! against sup |g|
    d = origin_derivatives(g, orders)
    scaled = np.abs(d) * (2 * R) ** np.arange(orders + 1) / np.array([math.factorial(p) for p in range(orders + 1)])
    scaled = scaled / gmax if gmax > 0 else np.zeros_like(scaled)
    vanish = []
    for row in scaled:
        bad = np.nonzero(row > th.vanish)[0]
        vanish.append(int(bad[0]) if bad.size else orders + 1)
    min_vanish = min(vanish) if vanish else orders + 1

    # spectral decay in theta (mode norms) and in r (theta-averaged FFT magnitudes)
    modes = mode_decompose_array(v)
    ang = np.zeros(g.n_theta // 2 + 1)
    for (m, _), prof in modes.items():
        ang[m] = math.hypot(ang[m], float(np.sqrt(np.mean(prof**2))))
    rad = np.sqrt(np.mean(np.abs(np.fft.rfft(v, axis=1)) ** 2, axis=0))
    s_theta = sobolev_exponent(ang)
    s_r = sobolev_exponent(rad)

    # real-axis decay of the Fourier-Legendre transform of each angular slice
    window = g.r_grid <= 2 * R * (1 + 1e-12)
    r = g.r_grid[window]
    lams = np.linspace(0.0, pw_lambda_max, pw_count)
    ghat = v[:, window] @ fl_kernel(radial_geometry(g.geometry), 2, lams, r).T
    env = np.max(np.abs(ghat), axis=0)
    pw_ratio = float(env[-1] / env.max()) if env.max() > 0 else 0.0

    smooth = {
        "theta_exponent": s_theta,
        "r_exponent": s_r,
        "paley_wiener_tail_ratio": pw_ratio,
        "paley_wiener_lambda_max": pw_lambda_max,
    }
    smoothness_pass = s_theta >= th.smoothness and s_r >= th.smoothness
    return {
        "support_pass": bool(support_pass),
        "support_sup": sup,
        "support_sup_relative": sup_rel,
        "origin_vanishing_orders": vanish,
        "min_vanishing_order": int(min_vanish),
        "smoothness_proxy": smooth,
        "smoothness_pass": bool(smoothness_pass),
    }


# ---------------------------------------------------------------- orthogonality


def _check_match(g: Sinogram, basis: SpectralBasis):
    if g.geometry != basis.geometry:
        raise ValueError(f"sinogram geometry {g.geometry} does not match basis geometry {basis.geometry}")
    if abs(g.R - basis.R) > 1e-12 * max(1.0, basis.R):
        raise ValueError(f"sinogram R = {g.R} does not match basis R = {basis.R}")


def _radial_window(g: Sinogram):
    keep = g.r_grid <= 2 * g.R * (1 + 1e-12)
    r = g.r_grid[keep]
    w = np.full(r.size, g.dr)
    w[[0, -1]] *= 0.5
    return keep, r, w


def _boundary_measure(geometry, R):
    return math.sinh(R) if geometry == H2 else math.sin(R)


def orthogonality_residuals(g: Sinogram, basis: SpectralBasis, count=30) -> list:
    """Pairings of g with d_nu phi_k(theta) h_{lambda_k}(r) sinh(r) (sin on S2).

    Trapezoid weights in theta and r, the boundary measure sinh(R) d theta
    (sin(R) on S2) included. The normalized residual divides by
    ||g|| ||d_nu phi_k||_{L2(S)} ||h_{lambda_k} sinh||_{L2[0,2R]}, so it
    lies in [0, 1] by Cauchy-Schwarz.
    """
    _check_match(g, basis)
    if count > len(basis):
        raise ValueError(f"count {count} exceeds the basis size {len(basis)}")
    ents = basis.entries[:count]
    keep, r, wr = _radial_window(g)
    geo = radial_geometry(g.geometry)
    vol = np.sinh(r) if geo == HYPERBOLIC else np.sin(r)
    lams = np.array([e.lambda_k for e in ents])
    h, _ = shoot(geo, 2, 0, lams, r)
    hv = h * vol  # (count, n_r')
    dsig = _boundary_measure(g.geometry, g.R) * 2 * np.pi / g.n_theta
    gv = g.values[:, keep]
    g_norm = math.sqrt(float(np.sum(gv**2 * wr) * dsig))
    out = []
    proj_cache = {}
    for e, row in zip(ents, hv):
        key = (e.m, e.parity)
        if key not in proj_cache:
            ang = e.angular(g.theta_grid)
            proj_cache[key] = (dsig * ang @ gv, math.sqrt(float(np.sum(ang**2) * dsig)))
        proj, ang_norm = proj_cache[key]
        res = e.normal_derivative_at_R * float(proj @ (wr * row))
        dn_norm = abs(e.normal_derivative_at_R) * ang_norm
        h_norm = math.sqrt(float(np.sum(wr * row**2)))
        denom = g_norm * dn_norm * h_norm
        out.append(
            {
                "m": e.m,
                "parity": e.parity,
                "k": e.k,
                "lambda_k": e.lambda_k,
                "residual": res,
                "normalized": abs(res) / denom if denom > 0 else 0.0,
            }
        )
    return out


# ---------------------------------------------------------------- verdict


def certify(g: Sinogram, basis: SpectralBasis, thresholds: Thresholds | None = None, count=30) -> RangeReport:
    """Combine the support/smoothness and orthogonality diagnostics into a verdict."""
    th = thresholds or Thresholds()
    part = support_smoothness_report(g, g.R, th.orders, th)
    orth = orthogonality_residuals(g, basis, count)
    worst = max((o["normalized"] for o in orth), default=0.0)
    reasons = []
    if not part["support_pass"]:
        reasons.append(f"sup |g| on r >= 2R is {part['support_sup_relative']:.3g} of sup |g|")
    if part["min_vanishing_order"] <= th.orders:
        reasons.append(f"g vanishes only to order {part['min_vanishing_order']} at r = 0")
    if not part["smoothness_pass"]:
        sp = part["smoothness_proxy"]
        reasons.append(f"spectral decay exponents theta={sp['theta_exponent']:.3g}, r={sp['r_exponent']:.3g}")
    if worst >= th.fail_residual:
        reasons.append(f"normalized orthogonality residual {worst:.3g} >= {th.fail_residual}")
    if reasons:
        verdict = OUT_OF_RANGE
    elif worst <= th.pass_residual:
        verdict = IN_RANGE
    else:
        verdict = INCONCLUSIVE
        reasons.append(f"normalized orthogonality residual {worst:.3g} between the thresholds")
    return RangeReport(
        orthogonality=orth,
        max_normalized_residual=float(worst),
        verdict=verdict,
        thresholds=asdict(th),
        reasons=reasons,
        **part,
    )


def adversarial_sinogram(basis: SpectralBasis, n_theta, n_r, r_max, entry=0) -> Sinogram:
    """g = d_nu phi(theta) h_lambda(r) sinh(r) chi(r) for one basis entry, chi a cutoff ending at 2R.

    Smooth, supported in r <= 2R, and maximally correlated with one
    orthogonality pairing: the simplest non-range data.
    """
    e = basis.entries[entry]
    R = basis.R
    sino = Sinogram.on_grid(basis.geometry, R, n_theta, n_r, r_max)
    r = sino.r_grid
    geo = radial_geometry(basis.geometry)
    inside = r <= 2 * R
    h = np.zeros_like(r)
    h[inside] = shoot(geo, 2, 0, [e.lambda_k], r[inside])[0][0]
    vol = np.sinh(r) if geo == HYPERBOLIC else np.sin(r)
    chi = smooth_cutoff(r / (2 * R))
    return sino.with_values(np.outer(e.normal_derivative(sino.theta_grid), h * vol * chi))
