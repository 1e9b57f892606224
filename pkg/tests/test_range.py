import json

import numpy as np
import pytest

from sphmean.geometry import H2, S2
from sphmean.io import default_r_max
from sphmean.phantoms import standard_phantoms, support_violating_phantom
from sphmean.rangecheck import (
    IN_RANGE,
    INCONCLUSIVE,
    OUT_OF_RANGE,
    Thresholds,
    adversarial_sinogram,
    certify,
    orthogonality_residuals,
    support_smoothness_report,
)
from sphmean.transform import Sinogram, forward_sinogram

BALL = {H2: 1.0, S2: 0.7}


def test_zero_sinogram(basis):
    g = Sinogram.on_grid(H2, 1.0, 32, 129, 2.2)
    rep = certify(g, basis(H2))
    assert rep.verdict == IN_RANGE
    assert all(o["residual"] == 0.0 for o in rep.orthogonality)
    assert rep.support_pass


@pytest.mark.parametrize("geometry", [H2, S2])
def test_forward_data_support_and_vanishing(geometry, sinogram):
    g = sinogram(geometry, "offset_gaussian")
    rep = support_smoothness_report(g)
    assert rep["support_sup_relative"] <= 1e-9
    assert rep["min_vanishing_order"] >= 5
    assert rep["smoothness_pass"]


def test_jump_flagged_by_smoothness_proxy():
    R = 1.0
    g = Sinogram.on_grid(H2, R, 32, 257, 2.2)
    r = g.r_grid
    prof = np.where((r > 0.3) & (r < R), 1.0, 0.0)
    rep = support_smoothness_report(g.with_values(np.tile(prof, (32, 1))))
    assert rep["smoothness_proxy"]["r_exponent"] < 1.0
    assert not rep["smoothness_pass"]


def test_short_grid_and_mismatch_rejected(basis):
    g = Sinogram.on_grid(H2, 1.0, 16, 65, 1.5)
    with pytest.raises(ValueError):
        support_smoothness_report(g)
    other = Sinogram.on_grid(S2, 0.7, 16, 65, 1.54)
    with pytest.raises(ValueError, match="geometry"):
        orthogonality_residuals(other, basis(H2))
    wrong_R = Sinogram.on_grid(H2, 0.9, 16, 65, 2.0)
    with pytest.raises(ValueError):
        orthogonality_residuals(wrong_R, basis(H2))


def test_residual_linearity(basis, sinogram):
    a = sinogram(H2, "offset_gaussian")
    b = sinogram(H2, "mixed")
    ra = orthogonality_residuals(a, basis(H2))
    rb = orthogonality_residuals(b, basis(H2))
    rab = orthogonality_residuals(a.with_values(2.0 * a.values - 0.5 * b.values), basis(H2))
    for x, y, z in zip(ra, rb, rab):
        scale = abs(x["residual"]) + abs(y["residual"]) + 1e-300
        assert abs(z["residual"] - (2.0 * x["residual"] - 0.5 * y["residual"])) <= 1e-12 * max(scale, 1.0)


@pytest.mark.parametrize("geometry", [H2, S2])
def test_forward_data_in_range(geometry, basis, sinogram):
    for name in ("centered_gaussian", "two_gaussians"):
        rep = certify(sinogram(geometry, name), basis(geometry))
        assert rep.verdict == IN_RANGE
        assert rep.max_normalized_residual <= 1e-3


@pytest.mark.parametrize("geometry", [H2, S2])
def test_adversarial_out_of_range(geometry, basis):
    b = basis(geometry)
    R = BALL[geometry]
    g = adversarial_sinogram(b, 128, 512, default_r_max(geometry, R))
    res = orthogonality_residuals(g, b, 30)
    assert res[0]["normalized"] >= 0.1
    assert certify(g, b).verdict == OUT_OF_RANGE


def test_support_violation_out_of_range(basis):
    R = 1.0
    ph = support_violating_phantom(H2, R)
    g = forward_sinogram(ph, R, 64, 257, 2.2, check_support=False)
    rep = certify(g, basis(H2))
    assert rep.verdict == OUT_OF_RANGE
    assert rep.reasons


def test_verdict_stable_in_count(basis, sinogram):
    b = basis(S2)
    g = sinogram(S2, "mixed")
    assert certify(g, b, count=30).verdict == certify(g, b, count=60).verdict == IN_RANGE


def test_inconclusive_band(basis, sinogram):
    g = sinogram(H2, "offset_polynomial")
    rep = certify(g, basis(H2), Thresholds(pass_residual=1e-14))
    assert rep.verdict == INCONCLUSIVE


def test_refinement_consistency(basis):
    R = 1.0
    ph = standard_phantoms(H2, R)["offset_gaussian"]
    worst = []
    for n_r in (128, 256, 512):
        g = forward_sinogram(ph, R, 128, n_r, 2.2)
        worst.append(certify(g, basis(H2)).max_normalized_residual)
    assert worst[1] <= 1.1 * worst[0]
    assert worst[2] <= 1.1 * worst[1]


def test_report_serializes(basis, sinogram):
    rep = certify(sinogram(H2, "centered_gaussian"), basis(H2))
    doc = json.loads(json.dumps(rep.to_dict()))
    assert doc["verdict"] == IN_RANGE
    assert {"support_pass", "origin_vanishing_orders", "smoothness_proxy", "orthogonality"} <= set(doc)
