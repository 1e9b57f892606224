"""Smooth compactly supported test sources built from geodesic bumps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Point, distance, distance_array, origin, polar_to_coords

KINDS = ("gaussian_bump", "polynomial_bump")


def smooth_cutoff(rho):
    """C-infinity step: 1 for rho <= 2/3, 0 for rho >= 1."""
    rho = np.asarray(rho, dtype=float)
    t = np.clip(3.0 * (1.0 - rho), 0.0, 1.0)  # 0 at rho=1, 1 at rho=2/3

    def psi(x):
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(-1.0 / x[pos])
        return out

    a, b = psi(t), psi(1.0 - t)
    return a / (a + b)


def bump_profile(kind, rho):
    """Profile of a bump of unit width as a function of rho = distance / (3 width)."""
    rho = np.asarray(rho, dtype=float)
    if kind == "gaussian_bump":
        return np.exp(-4.5 * rho**2) * smooth_cutoff(rho)
    if kind == "polynomial_bump":
        return np.where(rho < 1.0, np.clip(1.0 - rho**2, 0.0, None) ** 8, 0.0)
    raise ValueError(f"unknown phantom kind {kind!r}; expected one of {KINDS}")


@dataclass(frozen=True)
class Bump:
    kind: str
    center: Point
    width: float
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown phantom kind {self.kind!r}; expected one of {KINDS}")
        if not self.width > 0:
            raise ValueError(f"bump width must be positive, got {self.width}")

    @property
    def support_radius(self) -> float:
        return 3.0 * self.width

    def __call__(self, coords):
        d = distance_array(self.center.geometry, coords, self.center.coords)
        return self.amplitude * bump_profile(self.kind, d / self.support_radius)


@dataclass(frozen=True)
class Phantom:
    geometry: str
    bumps: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "bumps", tuple(self.bumps))
        for b in self.bumps:
            if b.center.geometry != self.geometry:
                raise ValueError(f"bump center on {b.center.geometry}, phantom on {self.geometry}")

    @property
    def support_radius(self) -> float:
        """Radius of the smallest centred ball containing the support."""
        o = origin(self.geometry)
        return max((distance(o, b.center) + b.support_radius for b in self.bumps), default=0.0)

    def evaluate(self, coords):
        coords = np.asarray(coords, dtype=float)
        out = np.zeros(coords.shape[:-1])
        for b in self.bumps:
            out = out + b(coords)
        return out

    __call__ = evaluate

    def polar(self, s, theta):
        """Values on the tensor grid s x theta, shape (len(theta), len(s))."""
        s = np.asarray(s, dtype=float)
        theta = np.asarray(theta, dtype=float)
        coords = polar_to_coords(self.geometry, s[None, :], theta[:, None])
        return self.evaluate(coords)

    def describe(self) -> list:
        return [
            {
                "kind": b.kind,
                "center": b.center.coords.tolist(),
                "width": b.width,
                "amplitude": b.amplitude,
            }
            for b in self.bumps
        ]


def bump_at(geometry, kind, s, theta, width, amplitude=1.0) -> Bump:
    """Bump centred at geodesic polar position (s, theta)."""
    return Bump(kind, Point(geometry, polar_to_coords(geometry, s, theta)), width, amplitude)


def standard_phantoms(geometry, R) -> dict:
    """Five compliant test sources, each supported well inside B_R."""
    g = geometry
    return {
        "centered_gaussian": Phantom(g, [bump_at(g, "gaussian_bump", 0.0, 0.0, 0.2 * R)]),
        "offset_gaussian": Phantom(g, [bump_at(g, "gaussian_bump", 0.3 * R, 0.7, 0.2 * R)]),
        "two_gaussians": Phantom(
            g,
            [
                bump_at(g, "gaussian_bump", 0.35 * R, 2.0, 0.18 * R, 1.0),
                bump_at(g, "gaussian_bump", 0.35 * R, 4.5, 0.18 * R, -0.6),
            ],
        ),
        "offset_polynomial": Phantom(g, [bump_at(g, "polynomial_bump", 0.25 * R, 3.5, 0.22 * R)]),
        "mixed": Phantom(
            g,
            [
                bump_at(g, "polynomial_bump", 0.1 * R, 1.0, 0.25 * R, 0.8),
                bump_at(g, "gaussian_bump", 0.4 * R, 5.5, 0.18 * R, 0.5),
            ],
        ),
    }
def support_violating_phantom(geometry, R) -> Phantom:
    """A gaussian bump whose support crosses the boundary circle of B_R."""
    return Phantom(geometry, [bump_at(geometry, "gaussian_bump", 0.8 * R, 1.0, 0.2 * R)])
