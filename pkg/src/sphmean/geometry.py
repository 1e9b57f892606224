"""Poincare-disc (H2) and unit-sphere (S2) primitives.

Points are stored as plain coordinates: H2 as a Euclidean pair inside the unit
disc, S2 as a unit 3-vector. The ball of the tomography problem is centred at
the origin of the disc, respectively at the north pole (0, 0, 1) of the sphere,
and geodesic polar coordinates (s, theta) are measured from that centre.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

H2 = "H2"
S2 = "S2"
GEOMETRIES = (H2, S2)

# |x| < 1 - BOUNDARY_MARGIN keeps the disc metric finite in binary64.
BOUNDARY_MARGIN = 1e-12


def check_geometry(geometry: str) -> str:
    if geometry not in GEOMETRIES:
        raise ValueError(f"geometry must be one of {GEOMETRIES}, got {geometry!r}")
    return geometry


@dataclass(frozen=True, eq=False)
class Point:
    geometry: str
    coords: np.ndarray

    def __post_init__(self):
        check_geometry(self.geometry)
        c = np.asarray(self.coords, dtype=float)
        if self.geometry == H2:
            if c.shape != (2,):
                raise ValueError(f"H2 point needs 2 coordinates, got shape {c.shape}")
            if np.hypot(c[0], c[1]) >= 1.0 - BOUNDARY_MARGIN:
                raise ValueError(f"H2 point {c.tolist()} is not inside the unit disc")
        else:
            if c.shape != (3,):
                raise ValueError(f"S2 point needs 3 coordinates, got shape {c.shape}")
            norm = np.linalg.norm(c)
            if norm == 0.0:
                raise ValueError("S2 point cannot be the zero vector")
            c = c / norm
        object.__setattr__(self, "coords", c)

    def __eq__(self, other):
        return (
            isinstance(other, Point)
            and other.geometry == self.geometry
            and np.array_equal(other.coords, self.coords)
        )

    def __hash__(self):
        return hash((self.geometry, tuple(self.coords)))

    def __repr__(self):
        return f"Point({self.geometry!r}, {self.coords.tolist()!r})"


def origin(geometry: str) -> Point:
    if check_geometry(geometry) == H2:
        return Point(H2, [0.0, 0.0])
    return Point(S2, [0.0, 0.0, 1.0])


def polar_point(geometry: str, s: float, theta: float) -> Point:
    """Point at geodesic distance s from the centre in direction theta."""
    return Point(geometry, polar_to_coords(geometry, s, theta))


def polar_to_coords(geometry: str, s, theta) -> np.ndarray:
    """Vectorized (s, theta) -> coordinates; trailing axis holds the components."""
    s = np.asarray(s, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if check_geometry(geometry) == H2:
        rho = np.tanh(s / 2.0)
        return np.stack(np.broadcast_arrays(rho * np.cos(theta), rho * np.sin(theta)), axis=-1)
    sn = np.sin(s)
    return np.stack(
        np.broadcast_arrays(sn * np.cos(theta), sn * np.sin(theta), np.cos(s)), axis=-1
    )


def coords_to_polar(geometry: str, coords) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized inverse of polar_to_coords; theta in [0, 2 pi)."""
    c = np.asarray(coords, dtype=float)
    if check_geometry(geometry) == H2:
        rho = np.hypot(c[..., 0], c[..., 1])
        s = 2.0 * np.arctanh(rho)
    else:
        s = np.arctan2(np.hypot(c[..., 0], c[..., 1]), c[..., 2])
    theta = np.mod(np.arctan2(c[..., 1], c[..., 0]), 2.0 * np.pi)
    return s, theta


def _h2_distance(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xx = np.sum(x * x, axis=-1)
    yy = np.sum(y * y, axis=-1)
    xy = np.sum(x * y, axis=-1)
    diff = np.sqrt(np.sum((x - y) ** 2, axis=-1))
    root = np.sqrt(np.maximum(1.0 - 2.0 * xy + xx * yy, 0.0))
    # log((root + diff) / (root - diff)) == 2 artanh(diff / root), stabler near 0.
    return 2.0 * np.arctanh(diff / root)


def _s2_distance(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    cross = np.linalg.norm(np.cross(x, y), axis=-1)
    return np.arctan2(cross, np.sum(x * y, axis=-1))


def distance(x: Point, y: Point) -> float:
    if x.geometry != y.geometry:
        raise ValueError(f"cannot measure distance between {x.geometry} and {y.geometry} points")
    if x.geometry == H2:
        return float(_h2_distance(x.coords, y.coords))
    return float(_s2_distance(x.coords, y.coords))


def distance_array(geometry: str, x, y) -> np.ndarray:
    """Vectorized distance between coordinate arrays (broadcast on leading axes)."""
    if check_geometry(geometry) == H2:
        return _h2_distance(x, y)
    return _s2_distance(x, y)


def _as_complex(c):
    c = np.asarray(c, dtype=float)
    return c[..., 0] + 1j * c[..., 1]


def mobius_translate_coords(a, z) -> np.ndarray:
    """Disc automorphism z -> (z + a) / (1 + conj(a) z), vectorized over z."""
    ac = complex(*np.asarray(a, dtype=float))
    zc = _as_complex(z)
    w = (zc + ac) / (1.0 + np.conj(ac) * zc)
    return np.stack([w.real, w.imag], axis=-1)


def mobius_translate(a: Point, z: Point) -> Point:
    """Isometry of H2 sending 0 to a, applied to z."""
    if a.geometry != H2 or z.geometry != H2:
        raise ValueError("mobius_translate acts on H2 points")
    return Point(H2, mobius_translate_coords(a.coords, z.coords))


def rotation_from_pole(center) -> np.ndarray:
    """Rotation matrix taking the north pole (0, 0, 1) to the unit vector `center`."""
    c = np.asarray(center, dtype=float)
    c = c / np.linalg.norm(c)
    pole = np.array([0.0, 0.0, 1.0])
    axis = np.cross(pole, c)
    sin_a = np.linalg.norm(axis)
    cos_a = float(np.dot(pole, c))
    if sin_a < 1e-15:
        if cos_a > 0:
            return np.eye(3)
        return np.diag([1.0, -1.0, -1.0])
    k = axis / sin_a
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + sin_a * kx + (1.0 - cos_a) * (kx @ kx)


@dataclass(frozen=True, eq=False)
class CircleQuadrature:
    center: Point
    radius: float
    nodes: np.ndarray  # (N, 2) or (N, 3) coordinates
    weights: np.ndarray

    @property
    def node_count(self) -> int:
        return self.weights.size

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def mean(self, f) -> float:
        """Mean of a vectorized evaluator f(coords) over the circle."""
        vals = np.asarray(f(self.nodes), dtype=float)
        return float(np.dot(self.weights, vals) / self.weights.sum())


def circle_measure(geometry: str, r):
    if check_geometry(geometry) == H2:
        return 2.0 * np.pi * np.sinh(r)
    return 2.0 * np.pi * np.sin(r)


def circle_nodes(geometry: str, center, r, N: int) -> np.ndarray:
    """Coordinates of N equally spaced (in pre-image angle) nodes of S_r(center).

    `r` may be an array; the node axis is appended last-but-one, i.e. the
    result has shape r.shape + (N, dim).
    """
    r = np.asarray(r, dtype=float)[..., None]
    phi = 2.0 * np.pi * np.arange(N) / N
    if geometry == H2:
        pre = polar_to_coords(H2, r, phi)
        return mobius_translate_coords(center, pre)
    pre = polar_to_coords(S2, r, phi)
    return pre @ rotation_from_pole(center).T


def geodesic_circle_quadrature(center: Point, r: float, N: int) -> CircleQuadrature:
    geometry = center.geometry
    if N < 8:
        raise ValueError(f"need at least 8 quadrature nodes, got {N}")
    if not r > 0:
        raise ValueError(f"circle radius must be positive, got {r}")
    if geometry == H2 and np.tanh(r / 2.0) >= 1.0 - BOUNDARY_MARGIN:
        raise ValueError(f"geodesic radius {r} too large for the disc model in binary64")
    if geometry == S2 and not r < np.pi:
        raise ValueError(f"S2 circle radius must satisfy 0 < r < pi, got {r}")
    nodes = circle_nodes(geometry, center.coords, r, N)
    weights = np.full(N, circle_measure(geometry, r) / N)
    return CircleQuadrature(center, float(r), nodes, weights)


def horospherical_bracket(x: Point, eta) -> float:
    """Signed distance from 0 to the horocycle through x tangent to the boundary at eta."""
    if x.geometry != H2:
        raise ValueError("horospherical bracket is defined on H2")
    eta = np.asarray(eta, dtype=float)
    if abs(np.linalg.norm(eta) - 1.0) > 1e-12:
        raise ValueError(f"eta must be a unit vector, |eta| = {np.linalg.norm(eta)}")
    return float(horospherical_bracket_array(x.coords, eta))


def horospherical_bracket_array(x, eta) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    eta = np.asarray(eta, dtype=float)
    xx = np.sum(x * x, axis=-1)
    if np.any(xx >= 1.0):
        raise ValueError("horospherical bracket needs |x| < 1")
    return np.log((1.0 - xx) / np.sum((x - eta) ** 2, axis=-1))
