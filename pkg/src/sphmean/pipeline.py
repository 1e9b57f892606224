"""Command implementations shared by the CLI, the demos and the acceptance suite."""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from .io import (
    RunConfig,
    load_or_build_basis,
    read_sinogram,
    write_artifact,
    write_field_csv,
    write_sinogram,
)
from .radial import lemma_matrices, verify_identity
from .rangecheck import certify
from .spectrum import gram_residual
from .timereversal import reconstruct
from .transform import forward_sinogram

IDENTITY_TOL = 1e-9
SAMPLE_POINTS = tuple(np.linspace(0.06, 3.0, 10))


def identity_suite(tolerance=IDENTITY_TOL, points=SAMPLE_POINTS) -> list:
    """Every operator identity at every parameter of the verification matrix."""
    out = []
    for n in (2, 3, 4, 5):
        for k in range(1, 9):
            out.append(verify_identity("commutation", n, points, tolerance, k=k).to_dict())
        for m in range(1, 9):
            for i in range(m):
                out.append(verify_identity("prop_Dm", n, points, tolerance, m=m, i=i).to_dict())
                out.append(verify_identity("prop_Qm", n, points, tolerance, m=m, i=i).to_dict())
    for n in (2, 3):
        for k in range(1, 9):
            for i in range(5):
                out.append(verify_identity("gamma_ladder", n, points, tolerance, k=k, i=i).to_dict())
    return out


def lemma_suite(Rs=(0.7, 1.0), ns=(2, 3), m_max=6) -> list:
    """Rank and structure of the stacked A/B matrices.

    pass requires the structural zeros/ones and full rank 2m of the
    equilibrated matrix; the row-normalized minimum singular value is reported
    alongside.
    """
    out = []
    for R in Rs:
        for n in ns:
            for m in range(1, m_max + 1):
                L = lemma_matrices(m, n, R)
                A = L.A
                ones = all(abs(A[l, m + l] - 1.0) <= 1e-12 for l in range(m))
                zeros = all(np.all(A[l, m + l + 1 :] == 0.0) for l in range(m))
                b0 = bool(np.array_equal(L.B[0], np.eye(2 * m)[0]))
                structure = ones and zeros and b0
                out.append(
                    {
                        "identity": "lemma_rank",
                        "params": {"m": m, "n": n, "R": R},
                        "stacked_rank": L.stacked_rank,
                        "min_singular_value": L.min_singular_value,
                        "equilibrated_rank": L.equilibrated_rank,
                        "equilibrated_min_singular_value": L.equilibrated_min_singular_value,
                        "structure": structure,
                        "pass": structure and L.equilibrated_rank == 2 * m,
                    }
                )
    return out


def run_identities(tolerance=IDENTITY_TOL) -> dict:
    ids = identity_suite(tolerance)
    lem = lemma_suite()
    groups = {}
    for r in ids + lem:
        g = groups.setdefault(r["identity"], {"count": 0, "passed": 0, "max_residual": 0.0})
        g["count"] += 1
        g["passed"] += int(r["pass"])
        if "max_residual" in r:
            g["max_residual"] = max(g["max_residual"], r["max_residual"])
    return {
        "tolerance": tolerance,
        "all_pass": all(r["pass"] for r in ids + lem),
        "summary": groups,
        "identities": ids,
        "lemma_rank": lem,
    }


def forward(cfg: RunConfig):
    """Quadrature sinogram of the configured phantom."""
    g = cfg.grids
    return forward_sinogram(cfg.build_phantom(), cfg.R, g.n_theta, g.n_r, g.r_max)


def _thresholds(cfg: RunConfig, tolerance):
    th = cfg.tolerances
    if tolerance is not None:
        th = replace(th, pass_residual=float(tolerance))
        if th.pass_residual > th.fail_residual:
            raise ValueError(f"tolerance {tolerance} exceeds the fail threshold {th.fail_residual}")
    return th


def certify_sinogram(cfg: RunConfig, sino, cache_dir=None, tolerance=None):
    basis = load_or_build_basis(cfg, cache_dir)
    return certify(sino, basis, _thresholds(cfg, tolerance), cfg.basis.count)


def reconstruct_sinogram(cfg: RunConfig, sino, truth=True):
    phantom = cfg.build_phantom() if (truth and cfg.phantom) else None
    return reconstruct(sino, truth=phantom)


# ---------------------------------------------------------------- commands writing artifacts


def cmd_forward(cfg, out: Path) -> dict:
    sino = forward(cfg)
    write_sinogram(out / "sinogram.csv", sino)
    payload = {"sinogram": "sinogram.csv", "phantom": cfg.build_phantom().describe(), "l2": sino.l2()}
    return write_artifact(out / "forward.json", "forward", payload, cfg)


def cmd_certify(cfg, out: Path, sinogram_path, tolerance=None) -> dict:
    sino = read_sinogram(sinogram_path, cfg)
    report = certify_sinogram(cfg, sino, cfg.basis.cache_path or out, tolerance)
    return write_artifact(out / "range_report.json", "range_report", report.to_dict(), cfg)


def cmd_reconstruct(cfg, out: Path, sinogram_path) -> dict:
    sino = read_sinogram(sinogram_path, cfg)
    field_, report, _ = reconstruct_sinogram(cfg, sino)
    write_artifact(out / "field.json", "mode_field", field_.to_dict(), cfg)
    write_field_csv(out / "field.csv", field_)
    return write_artifact(out / "recon_report.json", "recon_report", report.to_dict(), cfg)


def cmd_spectrum(cfg, out: Path) -> dict:
    cache = Path(cfg.basis.cache_path or out)
    basis = load_or_build_basis(cfg, cache)
    payload = {
        "cache_dir": str(cache),
        "entries": [
            {
                "m": e.m,
                "parity": e.parity,
                "k": e.k,
                "lambda_k": e.lambda_k,
                "eigenvalue": e.eigenvalue,
                "normal_derivative_at_R": e.normal_derivative_at_R,
            }
            for e in basis.entries
        ],
        "gram_residual": gram_residual(basis, min(cfg.basis.count, len(basis))),
    }
    return write_artifact(out / "spectrum.json", "spectrum", payload, cfg)


def cmd_identities(cfg, out: Path, tolerance=None) -> dict:
    payload = run_identities(IDENTITY_TOL if tolerance is None else float(tolerance))
    return write_artifact(out / "identities.json", "identities", payload, cfg)


def cmd_roundtrip(cfg, out: Path, tolerance=None) -> dict:
    """forward -> certify -> time reversal, with every intermediate artifact written."""
    sino = forward(cfg)
    write_sinogram(out / "sinogram.csv", sino)
    sino = read_sinogram(out / "sinogram.csv", cfg)  # the reconstruction sees exactly the file contents
    rr = certify_sinogram(cfg, sino, cfg.basis.cache_path or out, tolerance)
    field_, report, _ = reconstruct_sinogram(cfg, sino)
    write_artifact(out / "field.json", "mode_field", field_.to_dict(), cfg)
    write_field_csv(out / "field.csv", field_)
    payload = {
        "sinogram": "sinogram.csv",
        "verdict": rr.verdict,
        "max_normalized_residual": rr.max_normalized_residual,
        "range_report": rr.to_dict(),
        "rel_l2_error": report.rel_l2_error,
        "recon_report": report.to_dict(),
    }
    return write_artifact(out / "roundtrip.json", "roundtrip", payload, cfg)
