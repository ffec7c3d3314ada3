"""Exact oscillatory weak solutions whose strain never compactifies.

The two-phase construction glues uniform-strain states a and b through
stationary strain discontinuities; because the stress branches share a
common value, the jump conditions hold identically in time.  Rescaling by
n packs n periods into the unit interval: the velocity converges strongly,
the strain only weakly, and the weak limit of the stress differs from the
stress of the weak limit - oscillations persist.
"""

import numpy as np

from kvspectral import exact_solutions as xs
from kvspectral import stored_energy as se

stress = se.build_nonmonotone_stress(a=1.0, b=3.0, sigma_right=(0.0, 1.0),
                                     theta=0.5)

print("jump conditions across the stationary interfaces")
for n in (1, 4, 16, 64):
    fam = xs.build_oscillation_family(stress, n)
    res = xs.verify_rankine_hugoniot(fam, np.linspace(1.0, 2.0, 400))
    print(f"   n = {n:3d}: max residual {res:.2e} over "
          f"{len(fam.interfaces())} interfaces")

fam = xs.build_oscillation_family(stress, 8)
x = np.linspace(0.0, 1.0, 1500)
x = x[fam.distance_to_interface(x) > 1e-9]
print("\nsigma(u_n) + d_x v_n is spatially constant (the common value):")
for t in (1.0, 1.5, 2.0):
    vals = xs.stress_plus_strainrate(fam, t, x)
    print(f"   t = {t}: value {vals[0]:+.6f}, spread "
          f"{np.max(vals) - np.min(vals):.2e}, "
          f"S(t) = {fam.common_value(t):+.6f}")

print("\nclassical residual off the interfaces:",
      xs.verify_classical_residual(fam, np.full(9, 1.5),
                                   np.linspace(0.03, 0.09, 9)))

out = xs.weak_limits(stress, [4, 8, 16, 32, 64], t=1.0)
print("\nweak limits along the ladder n = 4..64 at t = 1:")
print(f"   strain mean        -> {out['u_limit']:.6f} "
      f"(two-phase average {out['u_reference']:.6f})")
print(f"   velocity L2 gap to the linear profile: "
      + ", ".join(f"{g:.4f}" for g in out["v_gap_ladder"])
      + "  (first-order in 1/n)")
print(f"   weak limit of sigma(u_n)   = {out['stress_limit']:.6f}")
print(f"   sigma(weak limit of u_n)   = {out['stress_of_limit']:.6f}")
print(f"   commutation gap            = {out['gap']:.6f}")
print("\nthe nonzero gap is the failure of compactness: the limit of the")
print("stresses is not the stress of the limit.")
