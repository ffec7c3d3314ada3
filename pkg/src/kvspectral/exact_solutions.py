"""Exact oscillatory solutions of the 1-d system and linear dispersion rates.

The two-phase construction pairs a stress law whose branches share a common
value (PiecewiseStress1D) with stationary strain discontinuities: the
resulting family u_n(t,x) = t F(n x), v_n(t,x) = Vbar(n x)/n is an exact
weak solution on [1,2] x (0,1) whose strain oscillations survive n -> inf.
These solutions are verified pointwise and never fed to the spectral solver
(trigonometric interpolation of a discontinuous strain would Gibbs-pollute
every diagnostic); their role is oracle.  The underlying uniform-shear
solutions v = c x live on the line, not the torus; on the periodic side
they survive only as the stationarity of the mean strain, which the solver
tests separately.

All evaluations are pure; ladders and sweeps can run in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stored_energy import PiecewiseStress1D, quadratic_model


@dataclass(frozen=True)
class OscillationFamily:
    """Rescaled two-phase oscillation member n on (t, x) in [1,2] x [0,1]."""

    stress: PiecewiseStress1D
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("rescaling index n must be >= 1")
        t = np.linspace(1.0, 2.0, 257)
        if float(np.max(self.stress.branch_residual(t))) >= 1e-12:
            raise ValueError("stress violates the common-value identity")

    @property
    def a(self):
        return self.stress.a

    @property
    def b(self):
        return self.stress.b

    @property
    def theta(self):
        return self.stress.theta

    @property
    def vbar_period(self):
        """Vbar(1) = a*theta + b*(1-theta), the mean strain."""
        return self.a * self.theta + self.b * (1.0 - self.theta)

    # -- unrescaled profiles on the line -----------------------------------

    def strain_profile(self, z, side="right"):
        """F(z): a on (k, k+theta), b on (k+theta, k+1); sided at interfaces."""
        z = np.asarray(z, dtype=float)
        r = z - np.floor(z)
        if side == "right":
            return np.where(r < self.theta, self.a, self.b)
        in_a = (r > 0.0) & (r <= self.theta)
        return np.where(in_a, self.a, self.b)

    def vbar(self, z):
        """Vbar(z) = \\int_0^z F, continuous and piecewise linear."""
        z = np.asarray(z, dtype=float)
        k = np.floor(z)
        r = z - k
        base = k * self.vbar_period
        return np.where(r < self.theta,
                        base + self.a * r,
                        base + self.a * self.theta + self.b * (r - self.theta))

    def vbar_sided(self, z, side):
        """Vbar evaluated with the branch formula adjacent from one side.

        At an interface the two formulas agree (continuity); comparing them
        is the s = 0 shock-continuity check for the velocity.
        """
        z = np.asarray(z, dtype=float)
        k = np.floor(z)
        r = z - k
        if side == "above":
            a_branch = r < self.theta
        elif side == "below":
            at_period = r == 0.0
            k = np.where(at_period, k - 1.0, k)
            r = np.where(at_period, 1.0, r)
            a_branch = r <= self.theta
        else:
            raise ValueError(f"side must be 'above' or 'below', got {side!r}")
        base = k * self.vbar_period
        return np.where(a_branch,
                        base + self.a * r,
                        base + self.a * self.theta + self.b * (r - self.theta))

    def u_profile(self, t, z, side="right"):
        return np.asarray(t) * self.strain_profile(z, side)

    # -- rescaled member ----------------------------------------------------

    def u(self, t, x, side="right"):
        return self.u_profile(t, self.n * np.asarray(x), side)

    def v(self, t, x):
        return self.vbar(self.n * np.asarray(x)) / self.n

    def y(self, t, x):
        return np.asarray(t) * self.vbar(self.n * np.asarray(x)) / self.n

    def v_x(self, t, x, side="right"):
        return self.strain_profile(self.n * np.asarray(x), side)

    def interfaces(self):
        """Interface abscissae of member n inside (0, 1]."""
        j = np.arange(self.n)
        pts = np.concatenate([(j + self.theta) / self.n,
                              (j + 1.0) / self.n])
        return np.sort(pts)

    def distance_to_interface(self, x):
        z = self.n * np.asarray(x, dtype=float)
        r = z - np.floor(z)
        d = np.minimum(np.abs(r - self.theta),
                       np.minimum(r, 1.0 - r))
        return d / self.n

    def common_value(self, t):
        return self.stress.common_value(t)


def build_oscillation_family(stress, n):
    return OscillationFamily(stress=stress, n=int(n))


def verify_rankine_hugoniot(family, t_samples):
    """Max over interfaces and times of |[sigma(u) + u_t]| for s = 0 shocks.

    u_t equals the phase strain on each side, so the jump reduces to the
    branch identity (sigma(t b) + b) - (sigma(t a) + a); continuity of v
    across the interfaces is checked alongside.
    """
    t = np.asarray(t_samples, dtype=float)
    if np.any(t < 1.0) or np.any(t > 2.0):
        raise ValueError("t_samples must lie in [1, 2]")
    sig = family.stress.sigma
    a, b = family.a, family.b
    jump = np.abs((sig(t * b) + b) - (sig(t * a) + a))
    xs = family.interfaces()
    v_lo = family.vbar_sided(family.n * xs, "below") / family.n
    v_hi = family.vbar_sided(family.n * xs, "above") / family.n
    v_jump = float(np.max(np.abs(v_hi - v_lo))) if len(xs) else 0.0
    return max(float(np.max(jump)), v_jump)


def verify_classical_residual(family, t_points, x_points, min_dist=1e-9):
    """Residuals of both equations at points off the interfaces.

    Away from interfaces the member solves u_t = v_x and
    v_t = d_x sigma(u) + v_xx classically: u_t and v_x both equal the local
    phase strain, v is stationary and piecewise linear, and sigma(u(t, .))
    is constant on each phase cell.  Points within min_dist of an interface
    are rejected.
    """
    t = np.asarray(t_points, dtype=float)
    x = np.asarray(x_points, dtype=float)
    dist = family.distance_to_interface(x)
    if np.any(dist < min_dist):
        bad = x[np.argmin(dist)]
        raise ValueError(f"point x={bad} is within {min_dist} of an interface")
    u_t = family.strain_profile(family.n * x)       # d/dt of t*F(nx)
    v_x = family.v_x(t, x)                           # slope of Vbar(nx)/n
    r1 = u_t - v_x
    v_t = np.zeros_like(np.broadcast_arrays(t, x)[0])  # Vbar is static
    sigma_x = np.zeros_like(v_t)   # sigma(u) is x-constant per phase cell
    v_xx = np.zeros_like(v_t)      # v is piecewise linear
    r2 = v_t - sigma_x - v_xx
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))


def stress_plus_strainrate(family, t, x_grid):
    """sigma(u_n) + d_x v_n on a grid; constant (= S(t)) in x for exact members."""
    vals = family.stress.sigma(family.u(t, x_grid)) + family.v_x(t, x_grid)
    return vals


# ---------------------------------------------------------------------------
# weak limits of the oscillation ladder

def _cell_breakpoints(family):
    pts = np.concatenate([[0.0], family.interfaces()])
    return pts


def _mean_by_cells(family, t, func):
    """\\int_0^1 func dx by per-cell Gauss-Legendre (functions are smooth
    per phase cell, so low-order cells integrate exactly)."""
    pts = _cell_breakpoints(family)
    nodes, weights = np.polynomial.legendre.leggauss(4)
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        xx = mid + half * nodes
        total += half * float(np.sum(weights * func(xx)))
    return total


def richardson_extrapolate(ns, values):
    """Neville extrapolation to n -> inf of data with 1/n expansions."""
    h = 1.0 / np.asarray(ns, dtype=float)
    tbl = [np.asarray(values, dtype=float)]
    m = len(h)
    for j in range(1, m):
        prev = tbl[-1]
        cur = np.empty(m - j)
        for i in range(m - j):
            cur[i] = (h[i] * prev[i + 1] - h[i + j] * prev[i]) \
                / (h[i] - h[i + j])
        tbl.append(cur)
    return float(tbl[-1][0])


def weak_limits(stress, n_ladder, t):
    """Quadrature means of u_n, sigma(u_n) and the L^2 gap of v_n, with
    Richardson-extrapolated limits and the stress/limit commutation gap."""
    a, b, theta = stress.a, stress.b, stress.theta
    u_means, s_means, v_gaps = [], [], []
    slope = a * theta + b * (1.0 - theta)
    for n in n_ladder:
        fam = build_oscillation_family(stress, n)
        u_means.append(_mean_by_cells(fam, t, lambda x: fam.u(t, x)))
        s_means.append(_mean_by_cells(
            fam, t, lambda x: stress.sigma(fam.u(t, x))))
        v_gaps.append(np.sqrt(_mean_by_cells(
            fam, t, lambda x: (fam.v(t, x) - slope * x) ** 2)))
    u_limit = richardson_extrapolate(n_ladder, u_means)
    stress_limit = richardson_extrapolate(n_ladder, s_means)
    v_gap_limit = richardson_extrapolate(n_ladder, v_gaps)
    stress_of_limit = float(stress.sigma(u_limit))
    return {
        "u_limit": u_limit,
        "u_reference": slope * t,
        "stress_limit": stress_limit,
        "stress_reference": theta * float(stress.sigma(a * t))
        + (1.0 - theta) * float(stress.sigma(b * t)),
        "stress_of_limit": stress_of_limit,
        "gap": abs(stress_of_limit - stress_limit),
        "v_gap_ladder": np.asarray(v_gaps),
        "v_gap_limit": v_gap_limit,
        "u_means": np.asarray(u_means),
        "stress_means": np.asarray(s_means),
    }


# ---------------------------------------------------------------------------
# linear dispersion relation

@dataclass(frozen=True)
class DispersionRoots:
    """Roots of lambda^2 + lambda n^2 + kappa n^2 = 0 for mode n."""

    n: int
    kappa: float
    lambda_plus: complex
    lambda_minus: complex
    asymptotic: float
    is_complex: bool
    is_degenerate: bool

    def vieta_defect(self):
        s = self.lambda_plus + self.lambda_minus
        p = self.lambda_plus * self.lambda_minus
        n2 = float(self.n) ** 2
        return (abs(s + n2) / n2, abs(p - self.kappa * n2) / (self.kappa * n2))


def dispersion_roots(n, kappa):
    """Both roots by the cancellation-free quadratic formula.

    Complex roots (n^2 < 4 kappa) are a flagged, valid result; the slow
    decaying branch lambda_plus drives the persistent-oscillation rate.
    """
    if n < 1 or kappa <= 0.0:
        raise ValueError("need n >= 1 and kappa > 0")
    n2 = float(n) ** 2
    disc = n2 * n2 - 4.0 * kappa * n2
    if disc > 0.0:
        lam_minus = 0.5 * (-n2 - np.sqrt(disc))
        lam_plus = kappa * n2 / lam_minus
        is_complex = degenerate = False
    elif disc == 0.0:
        lam_minus = lam_plus = -0.5 * n2
        is_complex, degenerate = False, True
    else:
        root = 0.5 * np.sqrt(-disc)
        lam_plus = complex(-0.5 * n2, root)
        lam_minus = complex(-0.5 * n2, -root)
        is_complex, degenerate = True, False
    asym = -kappa - 2.0 * kappa ** 2 / n2
    return DispersionRoots(n=int(n), kappa=float(kappa),
                           lambda_plus=lam_plus, lambda_minus=lam_minus,
                           asymptotic=asym, is_complex=is_complex,
                           is_degenerate=degenerate)


def measure_linear_decay(kappa, n_values, dt=1e-5, t_end=1.0,
                         record_every=100, amplitude=1.0,
                         eigvec="slow"):
    """Solver-measured decay rates for the linear law S(F) = kappa F (d = 1).

    Each requested mode starts on the chosen 2x2 eigenvector so its complex
    amplitude decays as a clean exponential |v_n(t)| ~ e^{Re(lambda) t};
    the rate comes from a log-linear fit over the recorded samples.  A fit
    residual above 1e-6 flags mixed-eigenvector data as rejected (for the
    degenerate double root the (a + b t) e^{lambda t} envelope is fitted
    instead).
    """
    from . import solver, spectral

    n_values = [int(n) for n in n_values]
    n_max = max(n_values)
    model = quadratic_model(mu=kappa, dim=1)
    config = solver.SolverConfig(
        dim=1, n_modes=n_max, dt=dt, t_end=t_end, model=model,
        scheme="IF_RK4", viscosity=1.0, record_every=record_every,
        record_diagnostics=False)
    grid = config.make_grid()
    v0 = spectral.zero_field(grid, (1,))
    y0 = spectral.zero_field(grid, (1,))
    roots = {n: dispersion_roots(n, kappa) for n in n_values}
    for n in n_values:
        lam = roots[n].lambda_plus if eigvec == "slow" \
            else roots[n].lambda_minus
        spectral.set_mode(y0, [n], amplitude, comp=(0,))
        spectral.set_mode(v0, [n], lam * amplitude, comp=(0,))
    probes = [(f"v_{n}", [n], (0,)) for n in n_values]
    result = solver.run(config, (v0, y0, np.zeros((1, 1))), probes=probes)
    times = result.record_times
    out = []
    for n in n_values:
        series = result.probes[f"v_{n}"]
        rec = _fit_decay(times, series, roots[n])
        out.append(rec)
    return out


def _fit_decay(times, series, roots):
    mag = np.abs(series)
    if np.any(mag <= 0.0):
        raise ValueError("mode amplitude hit zero; cannot fit a rate")
    logmag = np.log(mag)
    slope, intercept = np.polyfit(times, logmag, 1)
    fit_res = float(np.max(np.abs(logmag - (slope * times + intercept))))
    # the modulus decays at Re(lambda) in the complex case as well
    reference = float(np.real(roots.lambda_plus))
    rec = {
        "n": roots.n, "kappa": roots.kappa,
        "reference": reference,
        "measured_rate": float(slope),
        "rel_error": abs(slope - reference) / abs(reference),
        "fit_residual": fit_res,
        "is_complex": roots.is_complex,
        "is_degenerate": roots.is_degenerate,
        "rejected": False,
    }
    if fit_res > 1e-6:
        if roots.is_degenerate:
            rec.update(_fit_degenerate(times, series, reference))
        else:
            rec["rejected"] = True
            rec["measured_rate"] = float("nan")
            rec["rel_error"] = float("nan")
    return rec


def _fit_degenerate(times, series, lam):
    """Least squares on the Jordan-block envelope (a + b t) e^{lam t}."""
    basis = np.stack([np.exp(lam * times),
                      times * np.exp(lam * times)], axis=1)
    coef, *_ = np.linalg.lstsq(basis, series, rcond=None)
    resid = series - basis @ coef
    scale = float(np.max(np.abs(series)))
    return {
        "envelope_coefficients": coef,
        "envelope_residual": float(np.max(np.abs(resid))) / scale,
        "measured_rate": lam,
        "rel_error": float("nan"),
    }
