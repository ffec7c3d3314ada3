"""Convergence studies: manufactured solutions and the refinement ladder.

A band-limited potential profile with matching momentum forcing gives an
exact solution of the forced system; errors against it isolate the spatial
truncation (spectral) and the time stepper (4th/2nd order).  The mode
ladder compares deformation gradients of consecutive resolutions, the
discrete shadow of the Galerkin construction converging to one solution.
"""

import numpy as np

from kvspectral import mms
from kvspectral import stored_energy as se
from kvspectral.harness import _exp_galerkin_cauchy

model = se.quartic_model(alpha=1.0, dim=2)
profile = mms.default_profile(2, amplitude=0.1)
ms = mms.ManufacturedSolution(model, profile, 1.1 * np.eye(2), eps=1.0)

print("spatial truncation error at fixed dt = 5e-4 (T = 0.5):")
for n in (1, 2, 4, 8, 16, 32):
    err = mms.measure_error(ms, n, dt=5e-4, t_end=0.5)
    print(f"   N = {n:2d}: ||v - v*|| + ||F - F*|| = {err['total']:.3e}")
print("the profile occupies modes <= 2, so the error collapses to the")
print("time-integration floor as soon as the band is resolved.")

print("\ntemporal order at N = 8:")
for scheme, dts in (("IF_RK4", (1.6e-2, 8e-3, 4e-3)),
                    ("IMEX_CNAB2", (8e-3, 4e-3, 2e-3))):
    errs = [mms.measure_error(ms, 8, dt=dt, t_end=0.48,
                              scheme=scheme)["total"] for dt in dts]
    order = np.log2(errs[-2] / errs[-1])
    table = ", ".join(f"{e:.2e}" for e in errs)
    print(f"   {scheme:<10} errors [{table}] -> order {order:.2f}")

print("\nmode-refinement ladder (deformation gradients, sup over t):")
checks, rows, _ = _exp_galerkin_cauchy(
    {"ladder": [8, 16, 32, 64], "t_end": 0.25, "dt": 2.5e-3}, seed=0,
    workdir=None)
for n_coarse, n_fine, gap in rows:
    print(f"   ||F^{n_fine} - F^{n_coarse}||: {gap:.3e}")
print("strictly decreasing gaps: consecutive resolutions form a Cauchy")
print("sequence, the discrete fingerprint of a unique limit solution.")
