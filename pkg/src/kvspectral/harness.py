"""Experiment registry, flat-text configuration, and batch execution.

Each experiment id maps to a verification pipeline built from the library
modules; running one produces a CSV table, a manifest echoing the resolved
configuration, and a summary with one check per line.  Outputs carry no
timestamps and all sampling is seeded, so a fixed spec yields byte-identical
CSVs on re-run.  Sweeps parallelize across experiments only; aggregation
order is deterministic (spec id, then config hash).
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import diagnostics as diag
from . import diffusion_dispersion as dd
from . import exact_solutions as xs
from . import mms as mms_mod
from . import solver, spectral, stored_energy

EXPERIMENT_IDS = (
    "energy_identity", "energy_conservation", "h1_propagation",
    "modulated_inequality", "galerkin_cauchy", "regularity_monitor",
    "dispersion", "oscillation_oracle", "weak_limits", "dd_equivalence",
    "mms_convergence",
)


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


@dataclass
class ExperimentSpec:
    label: str
    id: str
    params: dict = dc_field(default_factory=dict)
    seed: int = 0

    def config_hash(self):
        blob = repr(sorted(self.params.items())) + f"|seed={self.seed}"
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class CheckRow:
    name: str
    value: float
    tolerance: float
    passed: bool


@dataclass
class ExperimentReport:
    label: str
    id: str
    passed: bool
    checks: list
    artifacts: list
    error: str = ""

    def summary_lines(self):
        lines = []
        for c in self.checks:
            verdict = "pass" if c.passed else "FAIL"
            lines.append(f"{c.name}, {c.value:.17g}, {c.tolerance:.17g}, "
                         f"{verdict}")
        lines.append(f"result = {'PASS' if self.passed else 'FAIL'}")
        if self.error:
            lines.append(f"error = {self.error}")
        return lines


# ---------------------------------------------------------------------------
# configuration parsing: flat "key = value" sections, one per experiment

_COMMON_KEYS = {"id", "seed", "scheme", "eps", "n_modes", "dt", "t_end",
                "record_every", "model", "alpha", "mu", "amplitude", "ladder"}
KNOWN_KEYS = {
    "dispersion": _COMMON_KEYS | {"kappa", "kappas", "n_max", "rtol",
                                  "vieta_n_max"},
    "oscillation_oracle": _COMMON_KEYS | {"a", "b", "theta", "sigma_right",
                                          "members", "t_points"},
    "weak_limits": _COMMON_KEYS | {"a", "b", "theta", "sigma_right", "t",
                                   "tol"},
    "energy_identity": _COMMON_KEYS | {"fbar_scale"},
    "energy_conservation": _COMMON_KEYS | {"fbar_scale"},
    "h1_propagation": _COMMON_KEYS | {"models"},
    "modulated_inequality": _COMMON_KEYS | {"models"},
    "galerkin_cauchy": _COMMON_KEYS | {"final_gap_tol"},
    "regularity_monitor": _COMMON_KEYS | set(),
    "dd_equivalence": _COMMON_KEYS | {"delta", "A", "root_choice"},
    "mms_convergence": _COMMON_KEYS | {"dt_ladder"},
}


def _parse_value(raw):
    raw = raw.strip()
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        return [_parse_value(tok) for tok in inner.split(",")] if inner else []
    if "," in raw:
        return [_parse_value(tok) for tok in raw.split(",")]
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_config(text):
    """Parse experiment sections; rejects unknown keys and bad constraints."""
    specs = []
    section = None
    lineno_of = {}

    def close(section):
        if section is None:
            return
        label, params, first_line = section
        exp_id = params.pop("id", None)
        if exp_id is None:
            raise ConfigError(f"section [{label}] has no id", first_line)
        if exp_id not in EXPERIMENT_IDS:
            raise ConfigError(f"unknown experiment id {exp_id!r}",
                              lineno_of.get((label, "id"), first_line))
        for key in params:
            if key not in KNOWN_KEYS[exp_id]:
                raise ConfigError(
                    f"unknown key {key!r} for experiment {exp_id!r}",
                    lineno_of.get((label, key)))
        seed = params.pop("seed", 0)
        _validate_constraints(exp_id, params, label, lineno_of)
        specs.append(ExperimentSpec(label=label, id=exp_id, params=params,
                                    seed=int(seed)))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            close(section)
            section = (line[1:-1].strip(), {}, lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, _, val = line.partition("=")
        key = key.strip()
        if section is None:
            section = ("default", {}, lineno)
        if key in section[1]:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        section[1][key] = _parse_value(val)
        lineno_of[(section[0], key)] = lineno
    close(section)
    if not specs:
        raise ConfigError("no experiments defined")
    return specs


def _validate_constraints(exp_id, params, label, lineno_of):
    def bad(key, msg):
        raise ConfigError(f"[{label}] {msg}", lineno_of.get((label, key)))

    if "dt" in params and not params["dt"] > 0:
        bad("dt", f"dt must be positive, got {params['dt']}")
    if "t_end" in params and not params["t_end"] > 0:
        bad("t_end", f"t_end must be positive, got {params['t_end']}")
    if "eps" in params and not params["eps"] > 0:
        bad("eps", f"eps (viscosity) must be positive, got {params['eps']}")
    if "ladder" in params:
        lad = params["ladder"]
        if not isinstance(lad, list) or len(lad) < 2:
            bad("ladder", "ladder needs at least two entries")
        diffs = np.diff(np.asarray(lad, dtype=float))
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            bad("ladder", f"ladder must be monotone, got {lad}")
    if "scheme" in params and params["scheme"] not in ("IF_RK4",
                                                       "IMEX_CNAB2"):
        bad("scheme", f"unknown scheme {params['scheme']!r}")


# ---------------------------------------------------------------------------
# shared pieces

def smooth_initial_data(dim, n_modes, amplitude, seed, fbar=None,
                        data_band=2):
    """Seeded band-limited random initial data with unit-free amplitude."""
    rng = np.random.default_rng(seed)
    grid = spectral.Grid(dim, max(data_band, 1), 4 * data_band + 1)
    v0 = spectral.zero_field(grid, (dim,))
    y0 = spectral.zero_field(grid, (dim,))
    for fld in (v0, y0):
        shape = fld.coeffs.shape
        fld.coeffs[:] = (rng.standard_normal(shape)
                         + 1j * rng.standard_normal(shape))
        spectral.hermitianize(fld)
        zero = (Ellipsis,) + (0,) * dim
        fld.coeffs[zero] = 0.0
        # normalize the pointwise physical magnitude, not the coefficients
        mag = np.sqrt(np.sum(spectral.inverse(fld) ** 2, axis=0))
        fld.coeffs *= amplitude / max(float(np.max(mag)), 1e-30)
    if fbar is None:
        fbar = np.eye(dim) if dim > 1 else np.zeros((1, 1))
    return v0, y0, np.asarray(fbar, dtype=float)


def _model_from_params(params, default="quartic"):
    name = params.get("model", default)
    kwargs = {}
    if name == "quartic":
        kwargs["alpha"] = params.get("alpha", 1.0)
        kwargs["dim"] = 2
    elif name == "quadratic":
        kwargs["mu"] = params.get("mu", 1.0)
        kwargs["dim"] = params.get("dim", 2)
    return stored_energy.make_model(name, **kwargs)


def write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for cell in row:
                if isinstance(cell, str):
                    cells.append(cell)
                else:
                    cells.append(f"{cell:.17g}")
            fh.write(",".join(cells) + "\n")


def measured_order(values, factor=2.0):
    """Order from the last pair of a refinement ladder (halving by default)."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2 or v[-1] <= 0.0:
        return float("nan")
    return float(np.log(v[-2] / v[-1]) / np.log(factor))


# ---------------------------------------------------------------------------
# experiment implementations; each returns (checks, rows, header, extras)

def _default_stress(params):
    return stored_energy.build_nonmonotone_stress(
        a=params.get("a", 1.0), b=params.get("b", 3.0),
        sigma_right=params.get("sigma_right", [0.0, 1.0]),
        theta=params.get("theta", 0.5))


def _exp_dispersion(params, seed, workdir):
    kappas = params.get("kappas", params.get("kappa", [0.25, 1.0, 4.0]))
    if not isinstance(kappas, list):
        kappas = [kappas]
    n_max = params.get("n_max", 8)
    dt = params.get("dt", 1e-5)
    t_end = params.get("t_end", 1.0)
    rtol = params.get("rtol", 1e-6)
    vieta_n_max = params.get("vieta_n_max", 64)

    rows = []
    worst_rel = 0.0
    for kappa in kappas:
        ns = [n for n in range(1, n_max + 1)
              if n * n >= 4.0 * kappa]
        recs = xs.measure_linear_decay(kappa, ns, dt=dt, t_end=t_end)
        for rec in recs:
            roots = xs.dispersion_roots(rec["n"], kappa)
            rows.append((kappa, rec["n"], roots.lambda_plus.real,
                         roots.lambda_minus.real, roots.asymptotic,
                         rec["measured_rate"], rec["rel_error"],
                         rec["fit_residual"]))
            worst_rel = max(worst_rel, rec["rel_error"])
    worst_vieta = 0.0
    for kappa in kappas:
        for n in range(1, vieta_n_max + 1):
            ds, dp = xs.dispersion_roots(n, kappa).vieta_defect()
            worst_vieta = max(worst_vieta, ds, dp)
    checks = [
        CheckRow("decay_rate_rel_error", worst_rel, rtol, worst_rel < rtol),
        CheckRow("vieta_identities", worst_vieta, 1e-13,
                 worst_vieta < 1e-13),
    ]
    header = ("kappa", "n", "lambda_plus", "lambda_minus", "asymptotic",
              "measured_rate", "rel_error", "fit_residual")
    return checks, rows, header


def _exp_oscillation(params, seed, workdir):
    stress = _default_stress(params)
    members = params.get("members", [1, 2, 4])
    if not isinstance(members, list):
        members = [members]
    t_points = params.get("t_points", 10000)
    tol = 1e-12

    t_grid = np.linspace(1.0, 2.0, t_points)
    res_identity = float(np.max(stress.branch_residual(t_grid)))
    rows = [("common_value_identity", 0, res_identity, tol)]
    worst_rh = worst_const = worst_classical = 0.0
    t_rh = np.linspace(1.0, 2.0, 1000)
    rng = np.random.default_rng(seed)
    for n in members:
        fam = xs.build_oscillation_family(stress, n)
        rh = xs.verify_rankine_hugoniot(fam, t_rh)
        rows.append(("rankine_hugoniot", n, rh, tol))
        worst_rh = max(worst_rh, rh)
        xx = np.linspace(0.0, 1.0, 801)
        xx = xx[fam.distance_to_interface(xx) > 1e-6]
        for t in (1.0, 1.5, 2.0):
            vals = xs.stress_plus_strainrate(fam, t, xx)
            spread = float(np.max(vals) - np.min(vals))
            worst_const = max(worst_const, spread)
        rows.append(("stress_plus_strainrate_const", n, worst_const, tol))
        xpts = rng.uniform(0.0, 1.0, 200)
        xpts = xpts[fam.distance_to_interface(xpts) > 1e-6]
        tpts = rng.uniform(1.0, 2.0, xpts.size)
        classical = xs.verify_classical_residual(fam, tpts, xpts)
        rows.append(("classical_residual", n, classical, tol))
        worst_classical = max(worst_classical, classical)
    round_trip = stress == stored_energy.PiecewiseStress1D.from_text(
        stress.to_text())
    checks = [
        CheckRow("common_value_identity", res_identity, tol,
                 res_identity < tol),
        CheckRow("rankine_hugoniot", worst_rh, tol, worst_rh < tol),
        CheckRow("stress_plus_strainrate_const", worst_const, tol,
                 worst_const < tol),
        CheckRow("classical_residual", worst_classical, tol,
                 worst_classical < tol),
        CheckRow("serialization_round_trip", 0.0 if round_trip else 1.0,
                 0.5, round_trip),
    ]
    header = ("check", "member", "residual", "tolerance")
    return checks, rows, header


def _exp_weak_limits(params, seed, workdir):
    stress = _default_stress(params)
    ladder = params.get("ladder", [4, 8, 16, 32, 64])
    t = params.get("t", 1.0)
    tol = params.get("tol", 1e-3)
    out = xs.weak_limits(stress, ladder, t)
    expected_gap = abs(float(stress.sigma(out["u_reference"]))
                       - out["stress_reference"])
    rows = []
    for i, n in enumerate(ladder):
        rows.append((n, out["u_means"][i], out["stress_means"][i],
                     out["v_gap_ladder"][i]))
    checks = [
        CheckRow("u_limit_error", abs(out["u_limit"] - out["u_reference"]),
                 tol, abs(out["u_limit"] - out["u_reference"]) < tol),
        CheckRow("stress_limit_error",
                 abs(out["stress_limit"] - out["stress_reference"]), tol,
                 abs(out["stress_limit"] - out["stress_reference"]) < tol),
        CheckRow("commutation_gap_error", abs(out["gap"] - expected_gap),
                 tol, abs(out["gap"] - expected_gap) < tol),
        CheckRow("v_strong_limit", abs(out["v_gap_limit"]), 1e-8,
                 abs(out["v_gap_limit"]) < 1e-8),
    ]
    header = ("n", "u_mean", "stress_mean", "v_l2_gap")
    return checks, rows, header


_LADDER_DEFAULTS = {"IF_RK4": [8e-3, 4e-3, 2e-3],
                    "IMEX_CNAB2": [1e-3, 5e-4, 2.5e-4]}
_ORDER_FLOOR = {"IF_RK4": 3.5, "IMEX_CNAB2": 1.8}


def energy_ladder_runs(params, seed):
    """Shared dt-refinement ladder for the energy identity/conservation
    experiments: one list of (scheme, dt, residual, E0, series) per scheme.

    The recording grid refines with dt (fixed record_every), so the
    Simpson quadrature of the dissipation integral refines alongside the
    scheme; only E and D are recorded (the modulated pair has its own runs).
    """
    n_modes = params.get("n_modes", 64)
    t_end = params.get("t_end", 1.0)
    eps = params.get("eps", 1.0)
    amplitude = params.get("amplitude", 0.25)
    record_every = params.get("record_every", 2)
    model = _model_from_params(params)
    schemes = [params["scheme"]] if "scheme" in params \
        else ["IF_RK4", "IMEX_CNAB2"]
    fbar = params.get("fbar_scale", 1.0) * np.eye(model.dim)
    v0, y0, fbar = smooth_initial_data(model.dim, n_modes, amplitude, seed,
                                       fbar=fbar)
    out = {}
    for scheme in schemes:
        ladder = params.get("ladder", _LADDER_DEFAULTS[scheme])
        runs = []
        for dt in ladder:
            cfg = solver.SolverConfig(
                dim=model.dim, n_modes=n_modes, dt=dt, t_end=t_end,
                model=model, scheme=scheme, viscosity=eps,
                record_every=record_every, record_level="energy")
            result = solver.run(cfg, (v0, y0, fbar))
            resid = diag.energy_balance_residual(result.series)
            runs.append({"dt": dt, "residual": resid,
                         "E0": result.initial_energy,
                         "series": result.series})
        out[scheme] = runs
    return out


def _exp_energy_identity(params, seed, workdir, ladder_cache=None):
    runs = ladder_cache or energy_ladder_runs(params, seed)
    rows, checks = [], []
    for scheme, ladder in runs.items():
        resids = [r["residual"] for r in ladder]
        order = measured_order(resids,
                               factor=ladder[0]["dt"] / ladder[1]["dt"])
        e0 = abs(ladder[-1]["E0"])
        for i, r in enumerate(ladder):
            o = measured_order([ladder[i - 1]["residual"], r["residual"]],
                               ladder[i - 1]["dt"] / r["dt"]) if i else float("nan")
            rows.append((scheme, r["dt"], r["residual"], r["E0"], o))
        checks.append(CheckRow(
            f"{scheme}_residual_vs_E0", resids[-1], 1e-6 * e0,
            resids[-1] <= 1e-6 * e0))
        checks.append(CheckRow(
            f"{scheme}_order", order, _ORDER_FLOOR[scheme],
            order >= _ORDER_FLOOR[scheme]))
        monotone = diag.energy_monotonic(ladder[-1]["series"],
                                         tol=max(resids[-1], 1e-12))
        checks.append(CheckRow(
            f"{scheme}_energy_monotone", 0.0 if monotone else 1.0, 0.5,
            monotone))
    header = ("scheme", "dt", "balance_residual", "E0", "pair_order")
    return checks, rows, header


def _exp_energy_conservation(params, seed, workdir, ladder_cache=None):
    runs = ladder_cache or energy_ladder_runs(params, seed)
    rows, checks = [], []
    for scheme, ladder in runs.items():
        resids = [r["residual"] for r in ladder]
        order = measured_order(resids,
                               factor=ladder[0]["dt"] / ladder[1]["dt"])
        decreasing = bool(np.all(np.diff(resids) < 0.0))
        for r in ladder:
            rows.append((scheme, r["dt"], r["residual"]))
        checks.append(CheckRow(f"{scheme}_equality_residual_decreases",
                               0.0 if decreasing else 1.0, 0.5, decreasing))
        checks.append(CheckRow(f"{scheme}_measured_order", order, 1.0,
                               order >= 1.0))
    header = ("scheme", "dt", "equality_residual")
    return checks, rows, header


_MODEL_RUN_SETTINGS = {
    # per-model (fbar diag value, amplitude) keeping fields in tame regions
    "quadratic": (0.0, 0.3),
    "quartic": (1.0, 0.2),
    "double_well": (0.0, 0.3),
    "piecewise": (1.5, 0.2),
}


def semiconvex_model_runs(params, seed):
    names = params.get("models",
                       ["quadratic", "quartic", "double_well", "piecewise"])
    n_modes = params.get("n_modes", 64)
    t_end = params.get("t_end", 1.0)
    dt = params.get("dt", 2e-3)
    record_every = params.get("record_every", 2)
    out = []
    for name in names:
        if name == "quartic":
            model = stored_energy.quartic_model(alpha=params.get("alpha", 1.0))
        else:
            model = stored_energy.make_model(name)
        fbar_scale, amplitude = _MODEL_RUN_SETTINGS[name]
        if "amplitude" in params:
            amplitude = params["amplitude"]
        fbar = fbar_scale * np.eye(model.dim)
        v0, y0, fb = smooth_initial_data(model.dim, n_modes, amplitude,
                                         seed, fbar=fbar)
        cfg = solver.SolverConfig(
            dim=model.dim, n_modes=n_modes, dt=dt, t_end=t_end, model=model,
            scheme="IF_RK4", viscosity=params.get("eps", 1.0),
            record_every=record_every)
        result = solver.run(cfg, (v0, y0, fb))
        out.append((name, model, result))
    return out


def _exp_h1_propagation(params, seed, workdir, runs_cache=None):
    runs = runs_cache or semiconvex_model_runs(params, seed)
    rows, checks = [], []
    for name, model, result in runs:
        bound = diag.gronwall_h1_bound(
            result.series, model.K, model.w_floor, result.grid.volume)
        rows.append((name, model.K, result.series["G"][0],
                     bound["max_ratio"]))
        checks.append(CheckRow(f"{name}_gronwall_majorant",
                               bound["max_ratio"], 1.0, bound["passed"]))
    header = ("model", "K", "G0", "h1f_over_majorant")
    return checks, rows, header


def _exp_modulated_inequality(params, seed, workdir, runs_cache=None):
    runs = runs_cache or semiconvex_model_runs(params, seed)
    rows, checks = [], []
    for name, model, result in runs:
        g0 = result.series["G"][0]
        resid = diag.modulated_inequality_residual(result.series, model.K)
        ident = diag.modulated_identity_residual(result.series, model.K)
        tol = 1e-6 * (g0 + 1.0)
        rows.append((name, model.K, g0, resid, ident, tol))
        checks.append(CheckRow(f"{name}_modulated_inequality", resid, tol,
                               resid <= tol))
    header = ("model", "K", "G0", "inequality_residual", "identity_residual",
              "tolerance")
    return checks, rows, header


def _exp_galerkin_cauchy(params, seed, workdir):
    ladder = params.get("ladder", [8, 16, 32, 64, 128])
    t_end = params.get("t_end", 0.25)
    dt = params.get("dt", 2.5e-3)
    record_every = params.get("record_every", 10)
    amplitude = params.get("amplitude", 0.4)
    final_tol = params.get("final_gap_tol", 1e-8)
    model = _model_from_params(params)
    v0, y0, fbar = smooth_initial_data(model.dim, max(ladder), amplitude,
                                       seed, data_band=3)

    def snapshots_for(n_modes):
        frames = []

        def grab(state):
            frames.append(spectral.project(state.deformation(), n_modes))

        cfg = solver.SolverConfig(
            dim=model.dim, n_modes=n_modes, dt=dt, t_end=t_end, model=model,
            scheme="IF_RK4", viscosity=params.get("eps", 1.0),
            record_every=record_every, record_diagnostics=False)
        solver.run(cfg, (v0, y0, fbar), state_callback=grab)
        return frames

    gaps, rows = [], []
    prev = snapshots_for(ladder[0])
    for n_prev, n_next in zip(ladder[:-1], ladder[1:]):
        cur = snapshots_for(n_next)
        sup = 0.0
        for fa, fb in zip(prev, cur):
            d = spectral.project(fb, n_next) - spectral.project(fa, n_next)
            sup = max(sup, spectral.l2_norm(d))
        gaps.append(sup)
        rows.append((n_prev, n_next, sup))
        prev = cur
    decreasing = bool(np.all(np.diff(gaps) < 0.0))
    checks = [
        CheckRow("gaps_strictly_decreasing", 0.0 if decreasing else 1.0,
                 0.5, decreasing),
        CheckRow("final_gap", gaps[-1], final_tol, gaps[-1] < final_tol),
    ]
    header = ("n_coarse", "n_fine", "sup_t_l2_gap")
    return checks, rows, header


def _exp_regularity_monitor(params, seed, workdir):
    n_modes = params.get("n_modes", 64)
    t_end = params.get("t_end", 1.0)
    dt = params.get("dt", 2e-3)
    amplitude = params.get("amplitude", 0.25)
    model = _model_from_params(params)
    v0, y0, fbar = smooth_initial_data(model.dim, n_modes, amplitude, seed,
                                       fbar=np.eye(model.dim))
    cfg = solver.SolverConfig(
        dim=model.dim, n_modes=n_modes, dt=dt, t_end=t_end, model=model,
        scheme="IF_RK4", viscosity=params.get("eps", 1.0),
        record_every=params.get("record_every", 10))
    result = solver.run(cfg, (v0, y0, fbar))
    s = result.series
    total = s["v_H3"] + s["F_H3"]
    ratio = float(np.max(total) / total[0])
    rows = [(t, s["v_H3"][i], s["F_H3"][i])
            for i, t in enumerate(s["t"])]
    checks = [
        CheckRow("h3_bounded_no_guard_trip", ratio, 1e3,
                 np.isfinite(ratio) and ratio < 1e3),
    ]
    if workdir is not None:
        s.to_csv(os.path.join(workdir, "series.csv"))
    header = ("t", "v_H3", "F_H3")
    return checks, rows, header


def _exp_dd_equivalence(params, seed, workdir):
    eps = params.get("eps", 0.1)
    delta = params.get("delta", 0.001)
    a_const = params.get("A", 1.0)
    n_modes = params.get("n_modes", 32)
    t_end = params.get("t_end", 0.5)
    ladder = params.get("ladder", [4e-3, 2e-3, 1e-3])
    amplitude = params.get("amplitude", 0.2)
    model = _model_from_params(params)

    checks, rows = [], []
    # exact double-root reproduction and the admissibility frontier
    kappa_mid = dd.kappa_from(0.1, 0.1 ** 2, 0.25)
    checks.append(CheckRow("kappa_double_root_exact",
                           abs(kappa_mid - 0.05), 0.0, kappa_mid == 0.05))
    eps_f = 0.1
    try:
        dd.kappa_from(eps_f, eps_f ** 2, 0.25 + 1e-9)
        frontier_reject = False
    except ValueError:
        frontier_reject = True
    try:
        kap = dd.kappa_from(eps_f, eps_f ** 2, 0.25 - 1e-9)
        frontier_accept = 0.0 < kap < eps_f
    except ValueError:
        frontier_accept = False
    checks.append(CheckRow("frontier_above_quarter_rejected",
                           0.0 if frontier_reject else 1.0, 0.5,
                           frontier_reject))
    checks.append(CheckRow("frontier_below_quarter_admitted",
                           0.0 if frontier_accept else 1.0, 0.5,
                           frontier_accept))
    worst_vieta = 0.0
    for e in (0.05, 0.1, 0.2):
        for d_, a_ in ((e ** 2, 0.2), (e ** 3, 1.0), (e ** 2.5, 0.3)):
            km = dd.kappa_from(e, d_, a_, "minus")
            kp = dd.kappa_from(e, d_, a_, "plus")
            worst_vieta = max(worst_vieta,
                              abs(km + kp - e) / e,
                              abs(km * kp - d_ * a_) / (d_ * a_))
    checks.append(CheckRow("kappa_root_invariants", worst_vieta, 1e-13,
                           worst_vieta < 1e-13))

    # discrepancy refinement ladder on the nonlinear configuration
    v0, y0, fbar = smooth_initial_data(model.dim, n_modes, amplitude, seed,
                                       fbar=np.eye(model.dim))
    discrepancies = []
    for dt in ladder:
        out = dd.equivalence_check(eps, delta, a_const, model,
                                   (v0, y0, fbar), t_end, dt,
                                   record_every=max(1, int(round(
                                       ladder[-1] / dt * 10))),
                                   n_modes=n_modes)
        discrepancies.append(out["max_discrepancy"])
        rows.append((dt, out["kappa"], out["max_discrepancy"]))
    order = measured_order(discrepancies, factor=ladder[-2] / ladder[-1])
    checks.append(CheckRow("equivalence_order", order, 1.8, order >= 1.8))

    # linear single-mode closed form
    lin = stored_energy.quadratic_model(mu=1.0, dim=1)
    n = 3
    grid1 = spectral.Grid(1, 4, 9)
    v1 = spectral.zero_field(grid1, (1,))
    y1 = spectral.zero_field(grid1, (1,))
    spectral.set_mode(y1, [n], 0.5, comp=(0,))
    spectral.set_mode(v1, [n], 0.1, comp=(0,))
    t_lin = 0.1
    res = dd.solve_difdis(eps, delta, a_const, lin,
                          (v1, y1, np.zeros((1, 1))), t_lin, 1e-5,
                          record_every=1000, record_diagnostics=False,
                          probes=[("v", [n], (0,)), ])
    v_exact, _ = dd.linear_mode_solution(eps, delta, a_const, 1.0, n,
                                         0.1, 0.5, t_lin)
    v_num = res.probes["v"][-1]
    lin_err = abs(v_num - v_exact)
    checks.append(CheckRow("linear_mode_closed_form", float(lin_err), 1e-8,
                           lin_err < 1e-8))
    header = ("dt", "kappa", "max_w_discrepancy")
    return checks, rows, header


def _exp_mms_convergence(params, seed, workdir):
    model = _model_from_params(params)
    eps = params.get("eps", 1.0)
    amplitude = params.get("amplitude", 0.1)
    t_end = params.get("t_end", 0.5)
    scheme = params.get("scheme", "IF_RK4")
    ladder = params.get("ladder", [1, 2, 4, 8, 16, 32])
    dt_ladder = params.get("dt_ladder",
                           [1.6e-2, 8e-3, 4e-3] if scheme == "IF_RK4"
                           else [8e-3, 4e-3, 2e-3])
    fbar = 1.1 * np.eye(model.dim)
    profile = mms_mod.default_profile(model.dim, amplitude)
    ms = mms_mod.ManufacturedSolution(model, profile, fbar, eps)

    rows = []
    spatial = []
    for n in ladder:
        err = mms_mod.measure_error(ms, n, dt=params.get("dt", 5e-4),
                                    t_end=t_end, scheme=scheme)
        spatial.append(err["total"])
        rows.append(("spatial", n, params.get("dt", 5e-4), err["v_error"],
                     err["f_error"]))
    temporal = []
    n_fix = max(8, model.stress_degree * profile.grid.n_modes)
    for dt in dt_ladder:
        err = mms_mod.measure_error(ms, n_fix, dt=dt, t_end=t_end,
                                    scheme=scheme)
        temporal.append(err["total"])
        rows.append(("temporal", n_fix, dt, err["v_error"], err["f_error"]))
    t_order = measured_order(temporal, factor=dt_ladder[-2] / dt_ladder[-1])
    nominal = 4.0 if scheme == "IF_RK4" else 2.0
    checks = [
        CheckRow("spatial_error_at_finest", spatial[-1], 1e-10,
                 spatial[-1] < 1e-10),
        CheckRow("temporal_order_matches_scheme", t_order, nominal,
                 abs(t_order - nominal) < 0.6),
    ]
    header = ("study", "n_modes", "dt", "v_error", "f_error")
    return checks, rows, header


_EXPERIMENTS = {
    "dispersion": _exp_dispersion,
    "oscillation_oracle": _exp_oscillation,
    "weak_limits": _exp_weak_limits,
    "energy_identity": _exp_energy_identity,
    "energy_conservation": _exp_energy_conservation,
    "h1_propagation": _exp_h1_propagation,
    "modulated_inequality": _exp_modulated_inequality,
    "galerkin_cauchy": _exp_galerkin_cauchy,
    "regularity_monitor": _exp_regularity_monitor,
    "dd_equivalence": _exp_dd_equivalence,
    "mms_convergence": _exp_mms_convergence,
}


# ---------------------------------------------------------------------------
# execution, persistence, aggregation

def run_experiment(spec, output_root, plots=False):
    workdir = os.path.join(output_root, spec.label)
    os.makedirs(workdir, exist_ok=True)
    try:
        checks, rows, header = _EXPERIMENTS[spec.id](spec.params, spec.seed,
                                                     workdir)
        passed = all(c.passed for c in checks)
        error = ""
    except Exception as exc:  # noqa: BLE001 - failures become report rows
        checks, rows, header = [], [], ("empty",)
        passed = False
        error = f"{type(exc).__name__}: {exc}"
    csv_path = os.path.join(workdir, f"{spec.id}.csv")
    write_csv(csv_path, header, rows)
    report = ExperimentReport(label=spec.label, id=spec.id, passed=passed,
                              checks=checks, artifacts=[csv_path],
                              error=error)
    _write_manifest(workdir, spec)
    summary_path = os.path.join(workdir, "summary.txt")
    with open(summary_path, "w", newline="\n") as fh:
        fh.write(f"experiment = {spec.label}\nid = {spec.id}\n")
        fh.write("\n".join(report.summary_lines()) + "\n")
    report.artifacts.append(summary_path)
    if plots and rows and not error:
        path = _plot_rows(workdir, spec, header, rows)
        if path:
            report.artifacts.append(path)
    return report


def _write_manifest(workdir, spec):
    lines = [f"label = {spec.label}", f"id = {spec.id}",
             f"seed = {spec.seed}", f"config_hash = {spec.config_hash()}"]
    for key in sorted(spec.params):
        lines.append(f"{key} = {spec.params[key]}")
    with open(os.path.join(workdir, "manifest.txt"), "w",
              newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _plot_rows(workdir, spec, header, rows):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "kvspectral"
    numeric_cols = [j for j in range(1, len(header))
                    if all(not isinstance(r[j], str) for r in rows)]
    if not numeric_cols:
        return None
    fig, ax = plt.subplots(figsize=(5, 3.4))
    x = np.arange(len(rows))
    for j in numeric_cols[:4]:
        ax.plot(x, [abs(r[j]) + 1e-300 for r in rows], label=header[j])
    ax.set_yscale("log")
    ax.set_xlabel("row")
    ax.legend(fontsize=7)
    ax.set_title(spec.label)
    path = os.path.join(workdir, f"{spec.id}.svg")
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    return path


def sweep(specs, output_root, parallelism=2, plots=False):
    """Run independent experiments in parallel, aggregate deterministically."""
    reports = {}
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        futures = {pool.submit(run_experiment, s, output_root, plots): s
                   for s in specs}
        for fut, s in futures.items():
            try:
                reports[(s.id, s.config_hash(), s.label)] = fut.result()
            except Exception as exc:  # noqa: BLE001
                reports[(s.id, s.config_hash(), s.label)] = ExperimentReport(
                    label=s.label, id=s.id, passed=False, checks=[],
                    artifacts=[], error=f"{type(exc).__name__}: {exc}")
    ordered = [reports[key] for key in sorted(reports)]
    _write_aggregate(output_root, ordered)
    return ordered


def _write_aggregate(output_root, reports):
    os.makedirs(output_root, exist_ok=True)
    lines = []
    for rep in reports:
        lines.append(f"{rep.label} ({rep.id}): "
                     f"{'PASS' if rep.passed else 'FAIL'}"
                     + (f" [{rep.error}]" if rep.error else ""))
    with open(os.path.join(output_root, "aggregate.txt"), "w",
              newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def verify_oracles(output_root):
    """Canned oracle battery: construction identities, RH grid, Vieta sweep."""
    os.makedirs(output_root, exist_ok=True)
    rows = []
    stress = stored_energy.build_nonmonotone_stress(1.0, 3.0, (0.0, 1.0))
    t_grid = np.linspace(1.0, 2.0, 1000)
    res = float(np.max(stress.branch_residual(np.linspace(1, 2, 10000))))
    rows.append(("common_value_identity_1e4_grid", res, 1e-12))
    fam = xs.build_oscillation_family(stress, 500)
    rh = xs.verify_rankine_hugoniot(fam, t_grid)
    rows.append(("rankine_hugoniot_1e3x1e3_grid", rh, 1e-12))
    worst = 0.0
    for kappa in (0.25, 1.0, 4.0):
        for n in range(1, 65):
            ds, dp = xs.dispersion_roots(n, kappa).vieta_defect()
            worst = max(worst, ds, dp)
    rows.append(("vieta_sweep_n1_64", worst, 1e-13))
    passed = all(val < tol for _, val, tol in rows)
    write_csv(os.path.join(output_root, "oracle_report.csv"),
              ("check", "residual", "tolerance"), rows)
    with open(os.path.join(output_root, "oracle_summary.txt"), "w",
              newline="\n") as fh:
        for name, val, tol in rows:
            verdict = "pass" if val < tol else "FAIL"
            fh.write(f"{name}, {val:.17g}, {tol:.17g}, {verdict}\n")
        fh.write(f"result = {'PASS' if passed else 'FAIL'}\n")
    return passed


def collect_reports(directory):
    """Aggregate pass/fail verdicts from summary files under a directory."""
    verdicts = []
    for root, _dirs, files in os.walk(directory):
        for name in files:
            if name in ("summary.txt", "oracle_summary.txt"):
                path = os.path.join(root, name)
                with open(path) as fh:
                    text = fh.read()
                ok = "result = PASS" in text
                verdicts.append((path, ok))
    return sorted(verdicts)
