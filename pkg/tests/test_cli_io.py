import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphmean import cli, pipeline
from sphmean.geometry import H2, S2
from sphmean.io import (
    VERSION,
    CacheError,
    ConfigError,
    SinogramFormatError,
    basis_cache_file,
    config_from_dict,
    default_r_max,
    format_sinogram,
    load_config,
    load_or_build_basis,
    parse_sinogram,
    read_sinogram,
    save_config,
    write_sinogram,
)
from sphmean.rangecheck import adversarial_sinogram
from sphmean.transform import Sinogram

SMALL = {
    "geometry": "H2",
    "R": 1.0,
    "grids": {"n_theta": 32, "n_r": 257},
    "basis": {"m_max": 3, "k_max": 4, "count": 20},
}


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("basis-cache")


@pytest.fixture
def small_config(tmp_path, cache_dir):
    doc = json.loads(json.dumps(SMALL))
    doc["basis"]["cache_path"] = str(cache_dir)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(doc))
    return path


# ---------------------------------------------------------------- configuration


def test_config_defaults():
    cfg = config_from_dict({})
    assert cfg.geometry == H2 and cfg.R == 1.0
    assert cfg.grids.r_max == pytest.approx(2.2)
    assert len(cfg.phantom) == 1
    s = config_from_dict({"geometry": "S2", "R": 0.7})
    assert s.grids.r_max == pytest.approx(default_r_max(S2, 0.7))
    assert s.grids.r_max < math.pi


@pytest.mark.parametrize(
    "doc, field",
    [
        ({"geometry": "S2", "R": 1.6}, "R"),
        ({"R": -1.0}, "R"),
        ({"geometry": "E2"}, "geometry"),
        ({"grids": {"n_r": 4}}, "grids.n_r"),
        ({"grids": {"r_max": 1.0}}, "grids.r_max"),
        ({"basis": {"count": 10_000}}, "basis.count"),
        ({"tolerances": {"pass_residual": 0.1}}, "tolerances"),
        ({"colour": 3}, "unknown"),
        ({"grids": {"n_s": 64, "dt": 0.1}}, "grids"),
    ],
)
def test_config_rejects(doc, field):
    with pytest.raises(ConfigError, match=field):
        config_from_dict(doc)


def test_config_phantom_support_violation():
    doc = {"phantom": [{"kind": "gaussian_bump", "center_polar": [0.8, 0.0], "width": 0.2}]}
    with pytest.raises(ConfigError, match=r"phantom\[0\]"):
        config_from_dict(doc)


def test_config_save_load(tmp_path):
    cfg = config_from_dict({"geometry": "S2", "R": 0.6, "seed": 7, "basis": {"m_max": 2, "k_max": 3, "count": 10}})
    path = tmp_path / "c.json"
    save_config(cfg, path)
    back = load_config(path)
    assert back.to_dict() == cfg.to_dict()
    assert back.config_hash() == cfg.config_hash()


def test_config_parse_error_names_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "R": 1.0,\n  "geometry" "H2"\n}\n')
    with pytest.raises(ConfigError, match="line 3"):
        load_config(path)


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.json")


# ---------------------------------------------------------------- sinogram CSV


def _random_sinogram(rng, geometry=H2, R=1.0, nt=8, nr=33):
    vals = rng.normal(size=(nt, nr)) * 10.0 ** rng.integers(-8, 8, size=(nt, nr))
    return Sinogram.on_grid(geometry, R, nt, nr, default_r_max(geometry, R), vals)


def test_sinogram_round_trip_exact(tmp_path, rng):
    g = _random_sinogram(rng)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_sinogram(p1, g)
    back = read_sinogram(p1)
    assert np.array_equal(back.values, g.values)
    assert back.r_max == g.r_max and back.R == g.R
    write_sinogram(p2, back)
    assert p1.read_bytes() == p2.read_bytes()


@settings(max_examples=25, deadline=None)
@given(
    st.sampled_from([H2, S2]),
    st.integers(2, 6),
    st.integers(2, 9),
    st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=54, max_size=54),
)
def test_sinogram_round_trip_random(geometry, nt, nr, pool):
    R = 0.9 if geometry == H2 else 0.5
    vals = np.array(pool[: nt * nr]).reshape(nt, nr)
    g = Sinogram.on_grid(geometry, R, nt, nr, default_r_max(geometry, R), vals)
    text = format_sinogram(g)
    back = parse_sinogram(text)
    assert np.array_equal(back.values, g.values)
    assert format_sinogram(back) == text


def test_sinogram_geometry_mismatch(tmp_path, rng):
    g = _random_sinogram(rng, nt=32, nr=257)
    cfg = config_from_dict({"geometry": "S2", "R": 0.7, "grids": {"n_theta": 32, "n_r": 257}})
    with pytest.raises(SinogramFormatError, match="geometry"):
        parse_sinogram(format_sinogram(g), cfg)
    cfg = config_from_dict({"grids": {"n_theta": 32, "n_r": 256}})
    with pytest.raises(SinogramFormatError, match="n_r"):
        parse_sinogram(format_sinogram(g), cfg)


def test_sinogram_row_count(rng):
    text = format_sinogram(_random_sinogram(rng))
    short = "\n".join(text.splitlines()[:-1]) + "\n"
    with pytest.raises(SinogramFormatError, match="data rows"):
        parse_sinogram(short)


@pytest.mark.parametrize("bad", ["nan", "inf", "-inf"])
def test_sinogram_non_finite(rng, bad):
    lines = format_sinogram(_random_sinogram(rng)).splitlines()
    j, k, _ = lines[7].split(",")
    lines[7] = f"{j},{k},{bad}"
    with pytest.raises(SinogramFormatError, match="line 8"):
        parse_sinogram("\n".join(lines))
    g = _random_sinogram(rng)
    g.values[0, 0] = float(bad)
    with pytest.raises(SinogramFormatError):
        format_sinogram(g)


def test_sinogram_bad_header(rng):
    text = format_sinogram(_random_sinogram(rng)).replace("# R=", "# radius=")
    with pytest.raises(SinogramFormatError, match="unknown header"):
        parse_sinogram(text)


# ---------------------------------------------------------------- artifacts and basis cache


def test_cache_reuse_and_version(tmp_path):
    cfg = config_from_dict({"basis": {"m_max": 1, "k_max": 2, "count": 4}})
    b1 = load_or_build_basis(cfg, tmp_path)
    path = basis_cache_file(cfg, tmp_path)
    assert path.exists()
    stamp = path.read_bytes()
    b2 = load_or_build_basis(cfg, tmp_path)
    assert path.read_bytes() == stamp
    assert [e.lambda_k for e in b2.entries] == [e.lambda_k for e in b1.entries]
    doc = json.loads(stamp)
    doc["version"] = -1
    path.write_text(json.dumps(doc))
    with pytest.raises(CacheError, match="version"):
        load_or_build_basis(cfg, tmp_path)


def test_artifacts_carry_hash_and_version(tmp_path, small_config):
    cfg = load_config(small_config)
    doc = pipeline.cmd_forward(cfg, tmp_path)
    on_disk = json.loads((tmp_path / "forward.json").read_text())
    assert on_disk == doc
    assert doc["version"] == VERSION
    assert doc["config_hash"] == cfg.config_hash()
    assert (tmp_path / "sinogram.csv").exists()


# ---------------------------------------------------------------- CLI exit codes


def test_cli_forward_then_certify(tmp_path, small_config, capsys):
    assert cli.main(["forward", "--config", str(small_config), "--out", str(tmp_path), "--quiet"]) == 0
    code = cli.main(["certify", "--config", str(small_config), "--in", str(tmp_path / "sinogram.csv"), "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    assert "in_range" in capsys.readouterr().out
    rep = json.loads((tmp_path / "range_report.json").read_text())
    assert rep["payload"]["verdict"] == "in_range"


def test_cli_certify_adversarial(tmp_path, small_config):
    cfg = load_config(small_config)
    b = load_or_build_basis(cfg)
    g = adversarial_sinogram(b, cfg.grids.n_theta, cfg.grids.n_r, cfg.grids.r_max)
    write_sinogram(tmp_path / "adv.csv", g)
    code = cli.main(["certify", "--config", str(small_config), "--in", str(tmp_path / "adv.csv"), "--out", str(tmp_path), "--quiet"])
    assert code == cli.EXIT_OUT_OF_RANGE


def test_cli_inconclusive_tolerance(tmp_path, small_config):
    assert cli.main(["forward", "--config", str(small_config), "--out", str(tmp_path), "--quiet"]) == 0
    argv = ["certify", "--config", str(small_config), "--in", str(tmp_path / "sinogram.csv")]
    code = cli.main(argv + ["--out", str(tmp_path), "--tolerance", "1e-12", "--quiet"])
    assert code == cli.EXIT_INCONCLUSIVE


def test_cli_verify_identities(tmp_path, small_config):
    code = cli.main(["verify-identities", "--config", str(small_config), "--out", str(tmp_path), "--quiet"])
    assert code == cli.EXIT_OK
    doc = json.loads((tmp_path / "identities.json").read_text())
    assert doc["payload"]["all_pass"]


def test_cli_usage_errors(tmp_path, small_config, capsys):
    assert cli.main(["certify", "--config", str(small_config), "--out", str(tmp_path)]) == cli.EXIT_USAGE
    assert "--in" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text('{"geometry": "S2", "R": 1.6}')
    assert cli.main(["forward", "--config", str(bad), "--out", str(tmp_path)]) == cli.EXIT_USAGE
    assert "R" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        cli.main(["explode", "--config", str(small_config)])
    assert exc.value.code == cli.EXIT_USAGE


def test_cli_numeric_failure(tmp_path, small_config, monkeypatch):
    def boom(*args, **kwargs):
        raise ArithmeticError("overflow in solver")

    monkeypatch.setattr(pipeline, "cmd_forward", boom)
    assert cli.main(["forward", "--config", str(small_config), "--out", str(tmp_path)]) == cli.EXIT_NUMERIC
