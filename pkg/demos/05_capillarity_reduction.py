"""Strain-gradient (capillarity) regularization and its parabolic reduction.

Adding a third-order term -delta A grad(lap) of the potential to the
viscous dynamics yields the diffusive-dispersive system.  Choosing kappa
with kappa^2 - eps kappa + delta A = 0 and substituting w = v - kappa div F
removes the third-order term entirely: the pair (w, F) solves a
hyperbolic-parabolic system.  Both routes are integrated independently and
compared on the transformed variable.
"""

import numpy as np

from kvspectral import diffusion_dispersion as dd
from kvspectral import stored_energy as se
from kvspectral.harness import smooth_initial_data

eps, delta, a_const = 0.1, 0.001, 1.0
km = dd.kappa_from(eps, delta, a_const, "minus")
kp = dd.kappa_from(eps, delta, a_const, "plus")
print(f"selection quadratic at (eps, delta, A) = ({eps}, {delta}, {a_const}):")
print(f"   kappa_- = {km:.12f}, kappa_+ = {kp:.12f}")
print(f"   sum = {km + kp} (= eps), product = {km * kp} (= delta A)")

print(f"\nborderline delta = eps^2: kappa exists iff A <= 1/4")
print(f"   A = 1/4      -> kappa = {dd.kappa_from(eps, eps**2, 0.25)} "
      f"(= eps/2, identity viscosity split)")
for a_try in (0.25 - 1e-9, 0.25 + 1e-9):
    try:
        dd.kappa_from(eps, eps ** 2, a_try)
        print(f"   A = 1/4{a_try - 0.25:+.0e} -> admissible")
    except ValueError:
        print(f"   A = 1/4{a_try - 0.25:+.0e} -> rejected "
              f"(negative discriminant)")

model = se.quartic_model(alpha=1.0, dim=2)
v0, y0, fbar = smooth_initial_data(2, 16, amplitude=0.3, seed=5,
                                   fbar=np.eye(2))
print("\ncapillary run vs reduced run, discrepancy in w under dt halving:")
for dt in (4e-3, 2e-3, 1e-3):
    out = dd.equivalence_check(eps, delta, a_const, model, (v0, y0, fbar),
                               t_end=0.4, dt=dt,
                               record_every=int(0.04 / dt), n_modes=16)
    print(f"   dt = {dt:g}: max ||w_capillary - w_reduced||_L2 = "
          f"{out['max_discrepancy']:.3e}")
print("the two semidiscrete systems are algebraically identical, so the")
print("gap is pure time-integration error and refines at the scheme order.")
