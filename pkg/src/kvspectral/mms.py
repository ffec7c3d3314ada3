"""Manufactured solutions with matching momentum forcing.

The homogeneous system has no smooth nonlinear closed-form solutions, so
convergence studies force it: pick a band-limited potential profile Y and a
smooth amplitude s(t), declare

    y*(t) = s(t) Y,   v*(t) = s'(t) Y,   F*(t) = Fbar + s(t) grad(Y),

and add the forcing f = dv*/dt - div S(F*) - eps lap(v*) to the momentum
equation.  For a polynomial stress of degree q, div S(Fbar + s grad Y) is a
polynomial in s with fixed spectral fields as coefficients, recovered
exactly from q+1 interpolation nodes; the forcing is then band-limited and
evaluated without further stress calls during the run.
"""

from __future__ import annotations

import numpy as np

from . import solver, spectral
from .spectral import Grid, SpectralField, zero_field


def _div_stress_of(model, y_field, fbar, s_value):
    f = spectral.gradient(y_field * s_value)
    zero = (Ellipsis,) + (0,) * y_field.grid.dim
    f.coeffs[zero] += fbar
    return spectral.divergence(spectral.nonlinear_stress(model, f)).coeffs


class ManufacturedSolution:
    """Exact forced solution y*(t) = s(t) Y for convergence measurements."""

    def __init__(self, model, y_profile, fbar, eps,
                 s=np.sin, s1=np.cos, s2=lambda t: -np.sin(t)):
        if model.stress_degree is None:
            raise ValueError("manufactured forcing needs a polynomial stress")
        self.model = model
        self.eps = eps
        self.fbar = np.asarray(fbar, dtype=float)
        self.s, self.s1, self.s2 = s, s1, s2
        q = model.stress_degree
        # evaluate div S at q+1 amplitude nodes on a wide enough scratch grid
        band = model.stress_degree * y_profile.grid.n_modes
        scratch = Grid.for_degree(y_profile.grid.dim, band,
                                  degree=model.stress_degree)
        self.y_ref = spectral.regrid(
            spectral.project(y_profile, scratch.n_modes), scratch)
        nodes = np.array([0.0] + [float(j) * (-1) ** j
                                  for j in range(1, q + 1)])
        samples = np.stack([_div_stress_of(model, self.y_ref, self.fbar, sv)
                            for sv in nodes])
        vand = np.vander(nodes, q + 1, increasing=True)
        flat = samples.reshape(q + 1, -1)
        coefs = np.linalg.solve(vand, flat)
        self.div_s_coefs = coefs.reshape((q + 1,) + samples.shape[1:])
        self._cache = {}

    def _at_modes(self, grid):
        key = (grid.dim, grid.n_modes)
        if key not in self._cache:
            y = spectral.project(self.y_ref, grid.n_modes).coeffs
            cj = []
            ref_grid = self.y_ref.grid
            for j in range(self.div_s_coefs.shape[0]):
                fld = SpectralField(ref_grid, (ref_grid.dim,),
                                    self.div_s_coefs[j].copy())
                cj.append(spectral.project(fld, grid.n_modes).coeffs)
            self._cache[key] = (y, np.stack(cj), grid.k_squared())
        return self._cache[key]

    def forcing(self, t, grid):
        """P^N of dv*/dt - div S(F*) - eps lap(v*), as coefficient arrays."""
        y, cj, k2 = self._at_modes(grid)
        s_pows = self.s(t) ** np.arange(cj.shape[0])
        div_s = np.tensordot(s_pows, cj, axes=(0, 0))
        return self.s2(t) * y + self.eps * self.s1(t) * k2 * y - div_s

    def exact_fields(self, t, grid):
        """(v*, y*) projected onto the target mode budget."""
        y, _, _ = self._at_modes(grid)
        v = SpectralField(grid, (grid.dim,), self.s1(t) * y)
        yp = SpectralField(grid, (grid.dim,), self.s(t) * y)
        return v, yp

    def initial(self, n_modes):
        grid = Grid(self.y_ref.grid.dim, n_modes, 2 * n_modes + 1)
        v0, y0 = self.exact_fields(0.0, grid)
        return v0, y0, self.fbar


def default_profile(dim=2, amplitude=0.1):
    """Band-limited vector profile, modes up to 2, leading term sin(x_1) e_1."""
    grid = Grid(dim, 2, 8)
    y = zero_field(grid, (dim,))
    k1 = [1] + [0] * (dim - 1)
    # sin(x1) = (e^{ix1} - e^{-ix1}) / 2i
    spectral.set_mode(y, k1, -0.5j * amplitude, comp=(0,))
    if dim == 1:
        spectral.set_mode(y, [2], 0.1 * amplitude, comp=(0,))
    else:
        spectral.set_mode(y, [1, 1], 0.15 * amplitude, comp=(0,))
        spectral.set_mode(y, [0, 2], -0.2j * amplitude, comp=(1,))
    return y


def measure_error(ms, n_modes, dt, t_end, scheme="IF_RK4", record_every=10):
    """L^2 errors of (v, F) at t_end against the manufactured solution."""
    cfg = solver.SolverConfig(
        dim=ms.y_ref.grid.dim, n_modes=n_modes, dt=dt, t_end=t_end,
        model=ms.model, scheme=scheme, viscosity=ms.eps,
        forcing=ms.forcing, record_every=record_every,
        record_diagnostics=False)
    result = solver.run(cfg, ms.initial(n_modes))
    grid = result.grid
    v_exact, y_exact = ms.exact_fields(t_end, grid)
    v_err = spectral.l2_norm(result.final_state.v - v_exact)
    f_num = result.final_state.deformation()
    f_exact = solver.KVState(t_end, v_exact, y_exact, ms.fbar).deformation()
    f_err = spectral.l2_norm(f_num - f_exact)
    return {"v_error": v_err, "f_error": f_err, "total": v_err + f_err}


def convergence_order(xs, errors):
    """Least-squares slope of log(error) against log(x)."""
    xs = np.asarray(xs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    slope, _ = np.polyfit(np.log(xs), np.log(errors), 1)
    return float(slope)
