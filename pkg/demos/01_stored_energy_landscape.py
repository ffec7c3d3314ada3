"""Tour of the builtin stored-energy models and their hypothesis checks.

Every model packages the energy density W, the stress S = DW, and the
Hessian D2W.  The checks below are the machine-checkable versions of the
constitutive assumptions: gradient consistency, semiconvexity (D2W + K*Id
positive semidefinite), monotonicity of the stress at infinity, and the
polynomial growth envelope.
"""

import numpy as np

from kvspectral import stored_energy as se

models = [se.make_model(name) for name in se.builtin_models()]

def wide_samples(dim, seed=11):
    """Directions scaled over radii reaching |F| = 10^3 (growth regime)."""
    rng = np.random.default_rng(seed)
    radii = np.concatenate([np.linspace(0.1, 5.0, 60),
                            np.geomspace(5.0, 1e3, 60)])
    dirs = rng.standard_normal((len(radii), dim, dim))
    dirs /= np.sqrt(np.sum(dirs ** 2, axis=(-2, -1)))[:, None, None]
    return radii[:, None, None] * dirs


for model in models:
    print(f"== {model.describe()}")
    samples = se.default_matrix_samples(model.dim, count=150, radius=2.5,
                                        seed=11)
    grad = se.check_gradient_consistency(model, samples)
    semi = se.check_semiconvexity(model, samples)
    mono = se.check_ab_monotonicity(
        model, list(zip(samples[:-1], samples[1:])))
    growth = se.fit_growth_constants(model, wide_samples(model.dim))
    print(f"   S = DW (finite differences): worst rel err {grad.value:.2e}")
    print(f"   min eig of D2W + K*Id over samples: {semi.value:+.3e} "
          f"-> {'semiconvex' if semi.passed else 'NOT semiconvex'}")
    print(f"   monotone-at-infinity slack: {mono.value:+.3e}")
    print(f"   growth envelope: c={growth.detail['c']:.3g}, "
          f"offset={growth.detail['c_offset']:.3g}, "
          f"C_w={growth.detail['C_w']:.3g}")

# The strengthened variant holds for the quartic with explicit constants:
# the cubic part obeys (|A|^2 A - |B|^2 B, A - B) >= (|A|^2+|B|^2)|A-B|^2 / 2.
quartic = se.quartic_model(alpha=1.0)
pairs = list(zip(se.default_matrix_samples(2, 200, 3.0, seed=1),
                 se.default_matrix_samples(2, 200, 3.0, seed=2)))
rep = se.check_ab_monotonicity(quartic, pairs, variant="ABprime")
print(f"\nquartic strengthened monotonicity (C=1/2, K=alpha): "
      f"worst slack {rep.value:+.3e} -> {'ok' if rep.passed else 'violated'}")

# A stress law with two rising branches sharing a common value: the right
# branch on [b, 2b] fully determines the left branch on [a, 2a], and the
# assembled law is necessarily non-monotone in between.
stress = se.build_nonmonotone_stress(a=1.0, b=3.0, sigma_right=(0.0, 1.0))
t = np.linspace(1.0, 2.0, 5)
print("\ntwo-branch stress (a=1, b=3, right branch sigma(u) = u):")
print("   sigma on [1,2]:", np.array2string(stress.sigma(t), precision=3),
      " (equals 2 + 3u)")
print("   common value S(t) = a + sigma(t a):",
      np.array2string(stress.common_value(t), precision=3))
print(f"   branch identity residual on [1,2]: "
      f"{np.max(stress.branch_residual(np.linspace(1, 2, 2000))):.2e}")
print(f"   non-monotone: sigma(2) = {stress.sigma(2.0):.1f} > "
      f"sigma(3) = {stress.sigma(3.0):.1f}")
print("\nserialized form:\n" + stress.to_text())
