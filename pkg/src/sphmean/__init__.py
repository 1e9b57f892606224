"""Restricted spherical mean transform on the hyperbolic disc and the sphere.

Forward simulation, range certification and time-reversal reconstruction,
with jet-based verification of the underlying operator identities.
"""

from .geometry import H2, S2, Point, distance, geodesic_circle_quadrature, horospherical_bracket, mobius_translate
from .io import VERSION as __version__
from .io import RunConfig, load_config, read_sinogram, save_config, write_sinogram
from .jets import Jet, jet_apply_elementary, jet_extract_derivative, jet_variable
from .phantoms import Bump, Phantom, bump_at, standard_phantoms, support_violating_phantom
from .radial import OperatorSpec, apply_operator, horospherical_oracle, lemma_matrices, solve_radial, verify_identity
from .rangecheck import RangeReport, Thresholds, adversarial_sinogram, certify, orthogonality_residuals
from .rangecheck import support_smoothness_report
from .spectrum import SpectralBasis, assemble_basis, gram_residual, mode_spectrum
from .timereversal import (
    ModeSolution,
    ReconReport,
    assemble_reconstruction,
    backward_solve_mode,
    mode_decompose,
    reconstruct,
    solution_diagnostics,
    wave_equivalence_residual,
)
from .transform import (
    ModeField,
    Sinogram,
    darboux_forward_mode,
    fl_transform,
    forward_sinogram,
    forward_sinogram_pde,
    intertwine_residual,
    spherical_mean,
    t_forward_sphere,
    t_inverse,
)

__all__ = [
    "H2", "S2", "Point", "distance", "geodesic_circle_quadrature", "horospherical_bracket", "mobius_translate",
    "RunConfig", "load_config", "save_config", "read_sinogram", "write_sinogram",
    "Jet", "jet_apply_elementary", "jet_extract_derivative", "jet_variable",
    "Bump", "Phantom", "bump_at", "standard_phantoms", "support_violating_phantom",
    "OperatorSpec", "apply_operator", "horospherical_oracle", "lemma_matrices", "solve_radial", "verify_identity",
    "RangeReport", "Thresholds", "adversarial_sinogram", "certify", "orthogonality_residuals",
    "support_smoothness_report",
    "SpectralBasis", "assemble_basis", "gram_residual", "mode_spectrum",
    "ModeSolution", "ReconReport", "assemble_reconstruction", "backward_solve_mode", "mode_decompose",
    "reconstruct", "solution_diagnostics", "wave_equivalence_residual",
    "ModeField", "Sinogram", "darboux_forward_mode", "fl_transform", "forward_sinogram", "forward_sinogram_pde",
    "intertwine_residual", "spherical_mean", "t_forward_sphere", "t_inverse",
    "__version__",
]
