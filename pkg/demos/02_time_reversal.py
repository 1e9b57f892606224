"""Recover a source on the sphere from its circle averages by time reversal.

Each angular mode of the sinogram drives a backward wave solve from r = 2R
down to r = 0, where the solution equals the mode profile of the source.
The report compares the result with the true source and lists the
self-consistency diagnostics. Halving the grid step shows the convergence.

Run: python demos/02_time_reversal.py
"""

from sphmean.geometry import S2, polar_point
from sphmean.io import default_r_max
from sphmean.phantoms import standard_phantoms
from sphmean.timereversal import reconstruct
from sphmean.transform import forward_sinogram

R = 0.7  # geodesic radius of the spherical cap
r_max = default_r_max(S2, R)
source = standard_phantoms(S2, R)["offset_gaussian"]

previous = None
for n_r in (128, 256, 512):
    g = forward_sinogram(source, R, 128, n_r, r_max, N=256)
    field, report, solutions = reconstruct(g, truth=source)
    line = f"n_r {n_r:4d}: {len(solutions)} modes, rel L2 error {report.rel_l2_error:.2e}"
    if previous is not None:
        line += f" (x{previous / report.rel_l2_error:.2f})"
    print(line)
    previous = report.rel_l2_error

print("diagnostics at the finest grid:")
print(f"  boundary derivatives |F^(k)(R)|: {', '.join(f'{v:.1e}' for v in report.boundary_derivatives.values())}")
print(f"  domain of dependence leak: {report.dod_sup:.1e}")
print(f"  wave-form residual: {report.wave_residual:.1e}")
print(f"  warnings: {report.warnings or 'none'}")
# the offset gaussian sits at distance 0.3R in direction 0.7
recovered = float(field.evaluate_polar(0.3 * R, 0.7))
print(f"  value at the bump centre: {recovered:.4f} (true {float(source(polar_point(S2, 0.3 * R, 0.7).coords)):.4f})")
