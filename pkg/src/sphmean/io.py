"""Run configuration, sinogram CSV files, JSON artifacts and the spectral-basis cache."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .geometry import GEOMETRIES, H2, S2, Point, distance, origin, polar_to_coords
from .phantoms import KINDS, Bump, Phantom
from .rangecheck import Thresholds
from .spectrum import BASIS_VERSION, DEFAULT_GRID, SpectralBasis, assemble_basis
from .transform import Sinogram

VERSION = "0.1.0"
TOOL = "sphmean"


class ConfigError(ValueError):
    """Invalid or unreadable run configuration."""


class SinogramFormatError(ValueError):
    """Malformed sinogram file or a file that disagrees with the configuration."""


class CacheError(ValueError):
    """Spectral-basis cache written by another version or for another key."""


# ---------------------------------------------------------------- configuration


@dataclass
class Grids:
    n_theta: int = 128
    n_r: int = 512
    n_s: int = 512
    r_max: float | None = None  # filled with the geometry default on validation


@dataclass
class PhantomSpec:
    kind: str
    center: list  # Poincare coordinates (H2) or a unit 3-vector (S2)
    width: float
    amplitude: float = 1.0


@dataclass
class BasisConfig:
    m_max: int = 8
    k_max: int = 6
    count: int = 30
    grid: int = DEFAULT_GRID
    cache_path: str | None = None


@dataclass
class RunConfig:
    geometry: str = H2
    R: float = 1.0
    grids: Grids = field(default_factory=Grids)
    phantom: list = field(default_factory=list)
    tolerances: Thresholds = field(default_factory=Thresholds)
    basis: BasisConfig = field(default_factory=BasisConfig)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "geometry": self.geometry,
            "R": self.R,
            "grids": asdict(self.grids),
            "phantom": [asdict(p) for p in self.phantom],
            "tolerances": asdict(self.tolerances),
            "basis": asdict(self.basis),
            "seed": self.seed,
        }

    def config_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def build_phantom(self) -> Phantom:
        bumps = [Bump(p.kind, Point(self.geometry, p.center), p.width, p.amplitude) for p in self.phantom]
        return Phantom(self.geometry, bumps)


def default_r_max(geometry, R) -> float:
    """2.2 R, kept below pi on the sphere."""
    if geometry == S2:
        return min(2.2 * R, 2 * R + 0.5 * (math.pi - 2 * R))
    return 2.2 * R


def default_phantom(geometry, R) -> list:
    c = polar_to_coords(geometry, 0.3 * R, 0.7).tolist()
    return [PhantomSpec("gaussian_bump", c, 0.2 * R, 1.0)]


def _sub(cls, data, name):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected an object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    extra = sorted(set(data) - known)
    if extra:
        raise ConfigError(f"{name}: unknown field(s) {extra}; expected {sorted(known)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _phantom_spec(geometry, item, i):
    name = f"phantom[{i}]"
    if not isinstance(item, dict):
        raise ConfigError(f"{name}: expected an object")
    item = dict(item)
    if "center_polar" in item:
        if "center" in item:
            raise ConfigError(f"{name}: give either center or center_polar, not both")
        sp = item.pop("center_polar")
        if not (isinstance(sp, (list, tuple)) and len(sp) == 2):
            raise ConfigError(f"{name}.center_polar: expected [s, theta]")
        item["center"] = polar_to_coords(geometry, float(sp[0]), float(sp[1])).tolist()
    spec = _sub(PhantomSpec, item, name)
    spec.center = [float(c) for c in spec.center]
    spec.width = float(spec.width)
    spec.amplitude = float(spec.amplitude)
    return spec


def config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    extra = sorted(set(doc) - known)
    if extra:
        raise ConfigError(f"unknown top-level field(s) {extra}; expected {sorted(known)}")
    geometry = doc.get("geometry", H2)
    if geometry not in GEOMETRIES:
        raise ConfigError(f"geometry: must be one of {list(GEOMETRIES)}, got {geometry!r}")
    try:
        R = float(doc.get("R", 1.0))
    except (TypeError, ValueError):
        raise ConfigError(f"R: not a number: {doc.get('R')!r}") from None
    phantom = doc.get("phantom")
    if phantom is None:
        specs = default_phantom(geometry, R) if R > 0 and (geometry == H2 or R < math.pi / 2) else []
    else:
        if not isinstance(phantom, list):
            raise ConfigError("phantom: expected a list of bumps")
        specs = [_phantom_spec(geometry, p, i) for i, p in enumerate(phantom)]
    cfg = RunConfig(
        geometry=geometry,
        R=R,
        grids=_sub(Grids, doc.get("grids"), "grids"),
        phantom=specs,
        tolerances=_sub(Thresholds, doc.get("tolerances"), "tolerances"),
        basis=_sub(BasisConfig, doc.get("basis"), "basis"),
        seed=doc.get("seed", 0),
    )
    return validate_config(cfg)


def validate_config(cfg: RunConfig) -> RunConfig:
    """Check every invariant; fills the default r_max. Raises ConfigError naming the field."""
    if cfg.geometry not in GEOMETRIES:
        raise ConfigError(f"geometry: must be one of {list(GEOMETRIES)}, got {cfg.geometry!r}")
    if not (isinstance(cfg.R, (int, float)) and math.isfinite(cfg.R) and cfg.R > 0):
        raise ConfigError(f"R: must be a positive number, got {cfg.R!r}")
    if cfg.geometry == S2 and cfg.R >= math.pi / 2:
        raise ConfigError(f"R: the S2 cap needs R < pi/2 = {math.pi / 2:.6f}, got {cfg.R}")
    g = cfg.grids
    for name, lo in (("n_theta", 8), ("n_r", 16), ("n_s", 16)):
        v = getattr(g, name)
        if not isinstance(v, int) or isinstance(v, bool) or v < lo:
            raise ConfigError(f"grids.{name}: must be an integer >= {lo}, got {v!r}")
    if g.r_max is None:
        g.r_max = default_r_max(cfg.geometry, cfg.R)
    g.r_max = float(g.r_max)
    if g.r_max < 2 * cfg.R:
        raise ConfigError(f"grids.r_max: must be at least 2R = {2 * cfg.R}, got {g.r_max}")
    if cfg.geometry == S2 and g.r_max >= math.pi:
        raise ConfigError(f"grids.r_max: circles on S2 need r_max < pi, got {g.r_max}")
    o = origin(cfg.geometry)
    for i, p in enumerate(cfg.phantom):
        name = f"phantom[{i}]"
        if p.kind not in KINDS:
            raise ConfigError(f"{name}.kind: must be one of {list(KINDS)}, got {p.kind!r}")
        if not (math.isfinite(p.width) and p.width > 0):
            raise ConfigError(f"{name}.width: must be positive, got {p.width}")
        if not math.isfinite(p.amplitude):
            raise ConfigError(f"{name}.amplitude: must be finite")
        try:
            c = Point(cfg.geometry, p.center)
        except ValueError as exc:
            raise ConfigError(f"{name}.center: {exc}") from None
        reach = distance(o, c) + 3 * p.width
        if not reach < cfg.R:
            raise ConfigError(
                f"{name}: support reaches distance {reach:.6g} from the centre; it must stay inside R = {cfg.R}"
            )
    t = cfg.tolerances
    for f_ in fields(Thresholds):
        v = getattr(t, f_.name)
        if f_.name == "orders":
            if not isinstance(v, int) or v < 0:
                raise ConfigError(f"tolerances.orders: must be a non-negative integer, got {v!r}")
        elif not (isinstance(v, (int, float)) and v > 0):
            raise ConfigError(f"tolerances.{f_.name}: must be positive, got {v!r}")
    if t.pass_residual > t.fail_residual:
        raise ConfigError("tolerances: pass_residual must not exceed fail_residual")
    b = cfg.basis
    if not isinstance(b.m_max, int) or b.m_max < 0:
        raise ConfigError(f"basis.m_max: must be a non-negative integer, got {b.m_max!r}")
    if not isinstance(b.k_max, int) or b.k_max < 1:
        raise ConfigError(f"basis.k_max: must be a positive integer, got {b.k_max!r}")
    size = (2 * b.m_max + 1) * b.k_max
    if not isinstance(b.count, int) or not 1 <= b.count <= size:
        raise ConfigError(f"basis.count: must be in 1..{size} for m_max={b.m_max}, k_max={b.k_max}")
    if not isinstance(b.grid, int) or b.grid < 64:
        raise ConfigError(f"basis.grid: must be an integer >= 64, got {b.grid!r}")
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool):
        raise ConfigError(f"seed: must be an integer, got {cfg.seed!r}")
    return cfg


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(doc)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- sinogram CSV

_HEADER = ("geometry", "R", "n_theta", "n_r", "r_max")


def format_sinogram(sino: Sinogram) -> str:
    """CSV text: five header comments, then theta_index,r_index,value rows."""
    if not np.all(np.isfinite(sino.values)):
        raise SinogramFormatError("sinogram contains NaN or Inf values")
    lines = [
        f"# geometry={sino.geometry}",
        f"# R={float(sino.R)!r}",
        f"# n_theta={sino.n_theta}",
        f"# n_r={sino.n_r}",
        f"# r_max={float(sino.r_max)!r}",
    ]
    for j, row in enumerate(sino.values):
        lines.extend(f"{j},{k},{float(v)!r}" for k, v in enumerate(row))
    return "\n".join(lines) + "\n"


def write_sinogram(path, sino: Sinogram) -> None:
    Path(path).write_text(format_sinogram(sino))


def _header_value(key, raw, lineno):
    try:
        if key == "geometry":
            if raw not in GEOMETRIES:
                raise ValueError
            return raw
        if key in ("n_theta", "n_r"):
            return int(raw)
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError
        return v
    except ValueError:
        raise SinogramFormatError(f"line {lineno}: bad value {raw!r} for header {key}") from None


def parse_sinogram(text: str, config: RunConfig | None = None, source="<sinogram>") -> Sinogram:
    header = {}
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" not in body:
                raise SinogramFormatError(f"{source}: line {lineno}: header must read '# key=value'")
            key, raw = (x.strip() for x in body.split("=", 1))
            if key not in _HEADER:
                raise SinogramFormatError(f"{source}: line {lineno}: unknown header {key!r}")
            if key in header:
                raise SinogramFormatError(f"{source}: line {lineno}: duplicate header {key!r}")
            if rows:
                raise SinogramFormatError(f"{source}: line {lineno}: header after data rows")
            header[key] = _header_value(key, raw, lineno)
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise SinogramFormatError(f"{source}: line {lineno}: expected theta_index,r_index,value")
        try:
            j, k, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise SinogramFormatError(f"{source}: line {lineno}: cannot parse {line!r}") from None
        if not math.isfinite(v):
            raise SinogramFormatError(f"{source}: line {lineno}: non-finite value {parts[2].strip()!r}")
        rows.append((j, k, v, lineno))
    missing = [k for k in _HEADER if k not in header]
    if missing:
        raise SinogramFormatError(f"{source}: missing header line(s) {missing}")
    nt, nr = header["n_theta"], header["n_r"]
    if len(rows) != nt * nr:
        raise SinogramFormatError(
            f"{source}: {len(rows)} data rows, expected n_theta * n_r = {nt} * {nr} = {nt * nr}"
        )
    if config is not None:
        expect = {
            "geometry": config.geometry,
            "R": float(config.R),
            "n_theta": config.grids.n_theta,
            "n_r": config.grids.n_r,
            "r_max": float(config.grids.r_max),
        }
        for key in _HEADER:
            if header[key] != expect[key]:
                raise SinogramFormatError(
                    f"{source}: header {key}={header[key]!r} does not match the configuration ({expect[key]!r})"
                )
    values = np.full((nt, nr), np.nan)
    for j, k, v, lineno in rows:
        if not (0 <= j < nt and 0 <= k < nr):
            raise SinogramFormatError(f"{source}: line {lineno}: index ({j}, {k}) outside {nt} x {nr}")
        if not np.isnan(values[j, k]):
            raise SinogramFormatError(f"{source}: line {lineno}: duplicate entry ({j}, {k})")
        values[j, k] = v
    try:
        return Sinogram.on_grid(header["geometry"], header["R"], nt, nr, header["r_max"], values)
    except ValueError as exc:
        raise SinogramFormatError(f"{source}: {exc}") from None


def read_sinogram(path, config: RunConfig | None = None) -> Sinogram:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SinogramFormatError(f"cannot read sinogram {path}: {exc.strerror}") from None
    return parse_sinogram(text, config, str(path))


# ---------------------------------------------------------------- JSON artifacts


def _plain(obj):
    """JSON-ready copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def artifact(kind: str, payload: dict, cfg: RunConfig | None) -> dict:
    return {
        "artifact": kind,
        "tool": TOOL,
        "version": VERSION,
        "config_hash": cfg.config_hash() if cfg is not None else None,
        "payload": _plain(payload),
    }


def dump_json(doc) -> str:
    return json.dumps(_plain(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_artifact(path, kind: str, payload: dict, cfg: RunConfig | None) -> dict:
    doc = artifact(kind, payload, cfg)
    Path(path).write_text(dump_json(doc))
    return doc


def write_field_csv(path, field_, n_theta=64) -> None:
    """Plot-ready dump of a ModeField: rows s,theta,f on the field's s grid."""
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    vals = field_.evaluate_polar(field_.s_grid[None, :], theta[:, None])
    lines = ["s,theta,f"]
    for j, t in enumerate(theta):
        lines.extend(f"{float(s)!r},{float(t)!r},{float(v)!r}" for s, v in zip(field_.s_grid, vals[j]))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- spectral-basis cache


def basis_key(cfg: RunConfig) -> dict:
    return {
        "geometry": cfg.geometry,
        "R": float(cfg.R),
        "m_max": cfg.basis.m_max,
        "k_max": cfg.basis.k_max,
        "grid_size": cfg.basis.grid,
    }


def basis_cache_file(cfg: RunConfig, directory) -> Path:
    text = json.dumps(basis_key(cfg), sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(text.encode()).hexdigest()[:16]
    return Path(directory) / f"basis-{digest}.json"


def load_or_build_basis(cfg: RunConfig, directory=None) -> SpectralBasis:
    """Basis from the cache when present, built and cached otherwise.

    A cache file from another version or for another key is an error; it is
    never silently replaced.
    """
    directory = cfg.basis.cache_path if directory is None else directory
    path = basis_cache_file(cfg, directory) if directory is not None else None
    if path is not None and path.exists():
        text = path.read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CacheError(f"{path}: unreadable basis cache ({exc.msg})") from None
        if doc.get("version") != BASIS_VERSION:
            raise CacheError(
                f"{path}: basis cache version {doc.get('version')!r}, this tool writes {BASIS_VERSION}; "
                "delete the file to rebuild"
            )
        key = {k: doc.get(k) for k in basis_key(cfg)}
        if key != basis_key(cfg):
            raise CacheError(f"{path}: cache key {key} does not match {basis_key(cfg)}")
        return SpectralBasis.from_json(text)
    basis = assemble_basis(cfg.geometry, cfg.R, cfg.basis.m_max, cfg.basis.k_max, N=cfg.basis.grid)
    if path is not None:
        os.makedirs(path.parent, exist_ok=True)
        path.write_text(basis.to_json())
    return basis
