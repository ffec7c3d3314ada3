"""Time integration of the Galerkin mode system for Kelvin-Voigt dynamics.

The solver evolves (v, y_pot, Fbar) rather than (v, F): the deformation
gradient is materialized as F = Fbar + grad(y_pot), whose coefficients
i y_k (x) k are curl-free by construction, so the involution is carried by
the representation instead of being propagated numerically.  Per Fourier
mode the evolution splits into an exactly integrable linear 2x2 block plus
the projected nonlinear stress, which the integrating-factor RK4 scheme
treats explicitly; the semi-implicit alternative is Crank-Nicolson on the
viscous term with Adams-Bashforth-2 on the stress.

A single run is sequential and deterministic; distinct runs are
embarrassingly parallel and share no mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from . import spectral
from .spectral import (BlowUpError, Grid, SpectralField, divergence,
                       gradient, hermitianize)
from .stored_energy import StoredEnergyModel
from . import diagnostics as diag


@dataclass
class KVState:
    """Solver state: velocity, periodic deformation potential, mean strain."""

    t: float
    v: SpectralField          # d-vector
    y_pot: SpectralField      # d-vector, zero mean
    fbar: np.ndarray          # constant d x d mean deformation gradient

    def copy(self):
        return KVState(self.t, self.v.copy(), self.y_pot.copy(),
                       self.fbar.copy())

    def deformation(self):
        """F = Fbar + grad(y_pot); coefficients are i y_k (x) k exactly."""
        f = gradient(self.y_pot)
        zero = (0,) * self.v.grid.dim
        f.coeffs[(Ellipsis,) + zero] += self.fbar
        return f

    def mean_velocity(self):
        zero = (0,) * self.v.grid.dim
        return np.real(self.v.coeffs[(Ellipsis,) + zero]).copy()


@dataclass
class SolverConfig:
    dim: int
    n_modes: int
    dt: float
    t_end: float
    model: StoredEnergyModel
    scheme: str = "IF_RK4"
    viscosity: float = 1.0
    forcing: Optional[Callable] = None   # f(t, grid) -> coeffs of a d-vector
    record_every: int = 10
    blowup_threshold: Optional[float] = None  # default: 1e3 * E(0) + 1
    t0: float = 0.0
    record_diagnostics: bool = True
    record_level: str = "full"  # "full" | "energy" (skip the modulated pair)

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_end <= self.t0:
            raise ValueError(f"t_end={self.t_end} must exceed t0={self.t0}")
        if self.viscosity <= 0.0:
            raise ValueError(f"viscosity must be positive, got {self.viscosity}")
        if self.scheme not in ("IF_RK4", "IMEX_CNAB2"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    def make_grid(self):
        return Grid.for_degree(self.dim, self.n_modes,
                               degree=self.model.stress_degree)


# ---------------------------------------------------------------------------
# exact per-mode propagators for the linear blocks
#
# The systems integrated here have a mode-wise linear part of one of the
# forms below, acting on the stacked pair (v_k, y_k):
#   heat coupling   [[-a, 0], [1, 0]]      (Kelvin-Voigt: a = eps|k|^2)
#   companion       [[-a, -b], [1, 0]]     (capillarity: b = delta*A*|k|^4)
#   diagonal        [[-c, 0], [0, -g]]     (reduced parabolic system; the
#                                           grad-w coupling stays explicit)
# Exponentials are computed in closed form with divided differences, which
# stay well-conditioned through confluent roots.

def _dd_exp(lam1, lam2, tau):
    """Divided difference (e^{lam1 tau} - e^{lam2 tau})/(lam1 - lam2)."""
    lam1 = np.asarray(lam1, dtype=complex)
    lam2 = np.asarray(lam2, dtype=complex)
    mu = 0.5 * (lam1 + lam2)
    dlt = 0.5 * (lam1 - lam2)
    z = dlt * tau
    small = np.abs(z) < 1e-6
    sinhc = np.where(small, 1.0 + z * z / 6.0 * (1.0 + z * z / 20.0),
                     np.sinh(np.where(small, 1.0, z))
                     / np.where(small, 1.0, z))
    return tau * np.exp(mu * tau) * sinhc


@dataclass
class ModePropagator:
    """Dense action of exp(tau * L) per mode: (v, y) -> (evv v + evy y, ...)."""

    evv: np.ndarray
    evy: np.ndarray
    eyv: np.ndarray
    eyy: np.ndarray

    def apply(self, v, y):
        return self.evv * v + self.evy * y, self.eyv * v + self.eyy * y

    def apply_v(self, v):
        """Action on a vector with zero y component."""
        return self.evv * v, self.eyv * v

    @classmethod
    def heat(cls, a, tau):
        a = np.asarray(a, dtype=float)
        evv = np.exp(-a * tau)
        # (1 - e^{-a tau})/a, = tau at a = 0
        with np.errstate(divide="ignore", invalid="ignore"):
            eyv = np.where(a == 0.0, tau, -np.expm1(-a * tau)
                           / np.where(a == 0.0, 1.0, a))
        return cls(evv, np.zeros_like(evv), eyv, np.ones_like(evv))

    @classmethod
    def companion(cls, a, b, tau):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        plain = cls.heat(a, tau)
        if np.all(b == 0.0):
            return plain
        # lam^2 + a lam + b = 0, stable split: the large root first
        disc = np.sqrt(np.asarray(a * a - 4.0 * b, dtype=complex))
        lam_slow = 0.5 * (-a + disc)
        lam_fast = 0.5 * (-a - disc)
        e_slow = np.exp(lam_slow * tau)
        e_fast = np.exp(lam_fast * tau)
        dd = _dd_exp(lam_slow, lam_fast, tau)
        half_sum = 0.5 * (e_slow + e_fast)
        mu = -0.5 * a
        evv = half_sum + mu * dd
        evy = -b * dd
        eyv = dd
        eyy = half_sum - mu * dd
        use_plain = b == 0.0
        return cls(np.where(use_plain, plain.evv, evv.real),
                   np.where(use_plain, plain.evy, evy.real),
                   np.where(use_plain, plain.eyv, eyv.real),
                   np.where(use_plain, plain.eyy, eyy.real))



# ---------------------------------------------------------------------------
# right-hand sides

def stress_divergence(model, state_or_f, grid=None):
    """Coefficients of div P^N S(F) as a d-vector field."""
    f = state_or_f.deformation() if isinstance(state_or_f, KVState) \
        else state_or_f
    s = spectral.nonlinear_stress(model, f)
    return divergence(s)


def rhs(state, model, eps=1.0, forcing=None):
    """Galerkin mode derivatives (dv_k/dt, dy_k/dt).

    dv_k/dt = i S_k . k - eps |k|^2 v_k + f_k, dy_k/dt = v_k for k != 0 and
    dy_0/dt = 0; the mean strain Fbar is constant because periodic
    velocities have mean-free gradients.
    """
    grid = state.v.grid
    div_s = stress_divergence(model, state)
    dv = div_s.coeffs - eps * grid.k_squared() * state.v.coeffs
    if forcing is not None:
        dv = dv + forcing(state.t, grid)
    if not np.all(np.isfinite(dv)):
        raise BlowUpError("non-finite right-hand side", t=state.t)
    dy = state.v.coeffs.copy()
    zero = (Ellipsis,) + (0,) * grid.dim
    dy[zero] = 0.0
    return dv, dy


def _nonlinear_term(model, eps, forcing, grid, fbar, couple_y=False):
    """The explicitly treated part as a function of (t, v, y).

    Velocity slot: i S_k.k + f_k.  Potential slot: zero when the linear
    propagator carries the dy/dt = v coupling, or v itself (mean mode
    pinned) when the coupling is stepped explicitly.
    """
    zero = (Ellipsis,) + (0,) * grid.dim
    k2 = grid.k_squared()
    mu = model.linear_factor

    def n_of(t, v_coeffs, y_coeffs):
        if mu is not None:
            # div(mu F) = -mu |k|^2 y on the potential representation
            nv = (-mu) * k2 * y_coeffs
        else:
            y_field = SpectralField(grid, (grid.dim,), y_coeffs)
            f = gradient(y_field)
            f.coeffs[zero] += fbar
            s = spectral.nonlinear_stress(model, f)
            nv = divergence(s).coeffs
        if forcing is not None:
            nv = nv + forcing(t, grid)
        if couple_y:
            ny = v_coeffs.copy()
            ny[zero] = 0.0
        else:
            ny = None
        return nv, ny

    return n_of


# ---------------------------------------------------------------------------
# steppers

class IFRK4Stepper:
    """Classical RK4 on the integrating-factor transformed mode system.

    The linear block (the propagator) is integrated exactly; with zero
    stress and forcing a single step reproduces e^{tau L} to rounding.
    """

    def __init__(self, grid, half, full, n_of):
        self.grid = grid
        self.half = half
        self.full = full
        self.n_of = n_of

    def step(self, t, v, y, dt):
        nv1, ny1 = self.n_of(t, v, y)
        if ny1 is None:
            return self._step_v_only(t, v, y, dt, nv1)
        h = 0.5 * dt
        v2, y2 = self.half.apply(v + h * nv1, y + h * ny1)
        nv2, ny2 = self.n_of(t + h, v2, y2)
        vh, yh = self.half.apply(v, y)
        nv3, ny3 = self.n_of(t + h, vh + h * nv2, yh + h * ny2)
        vf, yf = self.full.apply(v, y)
        pv, py = self.half.apply(nv3, ny3)
        nv4, ny4 = self.n_of(t + dt, vf + dt * pv, yf + dt * py)
        av, ay = self.full.apply(nv1, ny1)
        bv, by = self.half.apply(nv2 + nv3, ny2 + ny3)
        v_new = vf + dt / 6.0 * (av + 2.0 * bv + nv4)
        y_new = yf + dt / 6.0 * (ay + 2.0 * by + ny4)
        return v_new, y_new

    def _step_v_only(self, t, v, y, dt, nv1):
        # explicit term confined to the velocity slot
        h = 0.5 * dt
        v2, y2 = self.half.apply(v + h * nv1, y)
        nv2, _ = self.n_of(t + h, v2, y2)
        vh, yh = self.half.apply(v, y)
        nv3, _ = self.n_of(t + h, vh + h * nv2, yh)
        vf, yf = self.full.apply(v, y)
        pv, py = self.half.apply_v(nv3)
        nv4, _ = self.n_of(t + dt, vf + dt * pv, yf + dt * py)
        av, ay = self.full.apply_v(nv1)
        bv, by = self.half.apply_v(nv2 + nv3)
        v_new = vf + dt / 6.0 * (av + 2.0 * bv + nv4)
        y_new = yf + dt / 6.0 * (ay + 2.0 * by)
        return v_new, y_new


class CNAB2Stepper:
    """Crank-Nicolson viscosity + Adams-Bashforth-2 stress (IMEX Euler start).

    The potential is advanced with the trapezoid rule on dy/dt = v, which
    keeps the pair second-order.  Restarts are exact given the stored stress
    history (see checkpointing).
    """

    def __init__(self, grid, eps, dt, n_of):
        self.grid = grid
        self.n_of = n_of
        k2 = grid.k_squared()
        self.num_half = 1.0 - 0.5 * eps * dt * k2
        self.den_half = 1.0 + 0.5 * eps * dt * k2
        self.den_full = 1.0 + eps * dt * k2
        self.prev = None
        zero_idx = (Ellipsis,) + (0,) * grid.dim
        self._zero_idx = zero_idx

    def step(self, t, v, y, dt):
        n_now, _ = self.n_of(t, v, y)
        if self.prev is None:
            v_new = (v + dt * n_now) / self.den_full
        else:
            v_new = (self.num_half * v
                     + dt * (1.5 * n_now - 0.5 * self.prev)) / self.den_half
        self.prev = n_now
        y_new = y + 0.5 * dt * (v_new + v)
        y_new[self._zero_idx] = 0.0
        return v_new, y_new


# ---------------------------------------------------------------------------
# trajectory driver

@dataclass
class RunResult:
    config: SolverConfig
    series: "diag.DiagnosticSeries"
    final_state: KVState
    probes: dict = dc_field(default_factory=dict)
    initial_energy: float = 0.0
    record_times: np.ndarray = None
    stepper_state: np.ndarray = None  # CNAB2 stress history, for exact restart

    @property
    def grid(self):
        return self.final_state.v.grid


def project_initial(grid, v0, y0, fbar):
    """P^N projection of initial fields onto the solver's mode budget."""
    v = spectral.regrid(spectral.project(v0, grid.n_modes), grid)
    y = spectral.regrid(spectral.project(y0, grid.n_modes), grid)
    zero = (Ellipsis,) + (0,) * grid.dim
    y.coeffs[zero] = 0.0
    return KVState(0.0, hermitianize(v), hermitianize(y),
                   np.asarray(fbar, dtype=float).copy())


def make_stepper(config, grid, fbar, linear_family=None):
    if linear_family is None:
        linear_family = ("heat", config.viscosity)
    n_of = _nonlinear_term(config.model, config.viscosity, config.forcing,
                           grid, fbar,
                           couple_y=linear_family[0] == "diagonal")
    k2 = grid.k_squared()
    if config.scheme == "IF_RK4":
        half, full = _propagators(linear_family, k2, config.dt)
        return IFRK4Stepper(grid, half, full, n_of)
    if linear_family[0] != "heat":
        raise ValueError("IMEX_CNAB2 is only wired for the viscous system")
    return CNAB2Stepper(grid, config.viscosity, config.dt, n_of)


def _propagators(linear_family, k2, dt):
    kind = linear_family[0]
    if kind == "heat":
        eps = linear_family[1]
        pair = (ModePropagator.heat(eps * k2, 0.5 * dt),
                ModePropagator.heat(eps * k2, dt))
    elif kind == "companion":
        eps, delta_a = linear_family[1], linear_family[2]
        a = eps * k2
        b = delta_a * k2 ** 2
        pair = (ModePropagator.companion(a, b, 0.5 * dt),
                ModePropagator.companion(a, b, dt))
    elif kind == "diagonal":
        # decoupled heat blocks; any inter-slot coupling is explicit
        c, g = linear_family[1], linear_family[2]
        pair = []
        for tau in (0.5 * dt, dt):
            evv = np.exp(-c * k2 * tau)
            eyy = np.exp(-g * k2 * tau)
            pair.append(ModePropagator(evv, np.zeros_like(evv),
                                       np.zeros_like(evv), eyy))
        pair = tuple(pair)
    else:
        raise ValueError(f"unknown linear family {kind!r}")
    # the potential's zero mode is pinned (dy_0/dt = 0)
    zero = (0,) * k2.ndim
    for prop in pair:
        prop.eyv = prop.eyv.copy()
        prop.eyv[zero] = 0.0
    return pair


def run(config, initial, probes=None, state_callback=None,
        linear_family=None, stepper_state=None):
    """Integrate to t_end, recording diagnostics every record_every steps.

    initial: (v0, y0, fbar) as SpectralFields (projected onto the budget) or
    a KVState.  probes: list of (name, k, comp) mode probes recorded at
    every record step.  state_callback(state) is invoked at record times.
    Deterministic for a fixed config.
    """
    grid = config.make_grid()
    if isinstance(initial, KVState):
        state = KVState(config.t0,
                        spectral.regrid(initial.v, grid),
                        spectral.regrid(initial.y_pot, grid),
                        initial.fbar.copy())
    else:
        v0, y0, fbar = initial
        state = project_initial(grid, v0, y0, fbar)
        state.t = config.t0
    model, eps = config.model, config.viscosity

    n_steps = int(round((config.t_end - config.t0) / config.dt))
    if abs(config.t0 + n_steps * config.dt - config.t_end) > 1e-9 * max(
            1.0, abs(config.t_end)):
        raise ValueError("t_end - t0 must be an integral number of steps")

    stepper = make_stepper(config, grid, state.fbar, linear_family)
    if stepper_state is not None and isinstance(stepper, CNAB2Stepper):
        stepper.prev = stepper_state

    series = diag.DiagnosticSeries()
    probe_log = {name: [] for name, _, _ in (probes or [])}
    record_times = []

    e0 = diag.energy(state.v, state.deformation(), model)
    guard = config.blowup_threshold
    if guard is None:
        guard = 1e3 * abs(e0) + 1.0

    def record(state):
        record_times.append(state.t)
        if config.record_diagnostics:
            series.record(state, model, eps, level=config.record_level)
        for name, k, comp in probes or []:
            probe_log[name].append(spectral.get_mode(state.v, k, comp))
        if state_callback is not None:
            state_callback(state)

    record(state)
    v, y = state.v.coeffs, state.y_pot.coeffs
    for j in range(1, n_steps + 1):
        t = config.t0 + (j - 1) * config.dt
        v, y = stepper.step(t, v, y, config.dt)
        state.t = config.t0 + j * config.dt
        state.v.coeffs, state.y_pot.coeffs = v, y
        if j % config.record_every == 0 or j == n_steps:
            hermitianize(state.v)
            hermitianize(state.y_pot)
            v, y = state.v.coeffs, state.y_pot.coeffs
            e_now = diag.energy(state.v, state.deformation(), model)
            if not np.isfinite(e_now) or e_now > guard:
                raise BlowUpError(
                    f"energy {e_now:g} exceeded guard {guard:g} "
                    f"(config: N={config.n_modes}, dt={config.dt}, "
                    f"model={model.name})", t=state.t)
            record(state)

    probes_out = {name: np.asarray(vals) for name, vals in probe_log.items()}
    if config.record_diagnostics:
        series.finalize()
    hist = stepper.prev if isinstance(stepper, CNAB2Stepper) else None
    return RunResult(config=config, series=series, final_state=state,
                     probes=probes_out, initial_energy=e0,
                     record_times=np.asarray(record_times),
                     stepper_state=hist)


# ---------------------------------------------------------------------------
# checkpointing (formats shared with spectral.write_field)

def write_checkpoint(directory, state, config, stepper_state=None):
    """Write v/y fields, optional stress history, and a text manifest."""
    import os
    os.makedirs(directory, exist_ok=True)
    spectral.write_field(os.path.join(directory, "v.kvsf"), state.v, state.t)
    spectral.write_field(os.path.join(directory, "y_pot.kvsf"), state.y_pot,
                         state.t)
    lines = ["kvspectral checkpoint v1",
             f"t = {state.t:.17g}",
             f"dim = {config.dim}",
             f"n_modes = {config.n_modes}",
             f"dt = {config.dt:.17g}",
             f"viscosity = {config.viscosity:.17g}",
             f"scheme = {config.scheme}",
             f"model = {config.model.name}"]
    for i in range(config.dim):
        for j in range(config.dim):
            lines.append(f"fbar_{i}{j} = {state.fbar[i, j]:.17g}")
    if stepper_state is not None:
        grid = state.v.grid
        aux = SpectralField(grid, (grid.dim,), stepper_state.copy())
        spectral.write_field(os.path.join(directory, "stress_hist.kvsf"),
                             aux, state.t)
        lines.append("stress_hist = stress_hist.kvsf")
    with open(os.path.join(directory, "manifest.txt"), "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_checkpoint(directory, n_points=None):
    import os
    manifest = {}
    with open(os.path.join(directory, "manifest.txt")) as fh:
        for ln in fh.read().splitlines()[1:]:
            key, _, val = ln.partition("=")
            manifest[key.strip()] = val.strip()
    dim = int(manifest["dim"])
    v, t = spectral.read_field(os.path.join(directory, "v.kvsf"), n_points)
    y, _ = spectral.read_field(os.path.join(directory, "y_pot.kvsf"), n_points)
    fbar = np.array([[float(manifest[f"fbar_{i}{j}"]) for j in range(dim)]
                     for i in range(dim)])
    stepper_state = None
    if "stress_hist" in manifest:
        aux, _ = spectral.read_field(
            os.path.join(directory, manifest["stress_hist"]), n_points)
        stepper_state = aux.coeffs
    return KVState(t, v, y, fbar), manifest, stepper_state
