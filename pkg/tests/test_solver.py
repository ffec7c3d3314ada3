import numpy as np
import pytest

from kvspectral import diagnostics as dg
from kvspectral import solver as sv
from kvspectral import spectral as sp
from kvspectral import stored_energy as se
from kvspectral.harness import smooth_initial_data


def stress_free_model():
    return se.StoredEnergyModel(
        name="stress_free", dim=1, p=2.0, K=0.0,
        w=lambda f: np.zeros(f.shape[:-2]),
        s=lambda f: np.zeros_like(f),
        d2w=lambda f: np.zeros(f.shape[:-2] + (1, 1)),
        stress_degree=1, linear_factor=0.0)


def single_mode_initial(grid, n, v_val, y_val):
    v0 = sp.zero_field(grid, (1,))
    y0 = sp.zero_field(grid, (1,))
    sp.set_mode(v0, [n], v_val, comp=(0,))
    sp.set_mode(y0, [n], y_val, comp=(0,))
    return v0, y0, np.zeros((1, 1))


class TestRHS:
    def test_zero_state_is_stationary(self):
        model = se.quartic_model(1.0, dim=2)
        cfg = sv.SolverConfig(dim=2, n_modes=4, dt=0.01, t_end=0.1,
                              model=model)
        grid = cfg.make_grid()
        state = sv.project_initial(grid, sp.zero_field(grid, (2,)),
                                   sp.zero_field(grid, (2,)), np.zeros((2, 2)))
        dv, dy = sv.rhs(state, model)
        assert np.max(np.abs(dv)) < 1e-14 and np.max(np.abs(dy)) == 0.0

    def test_linear_single_mode(self):
        # dv_n/dt = -kappa n^2 y_n - eps n^2 v_n for S(F) = kappa F in 1-d
        kappa, eps, n = 2.0, 0.7, 3
        model = se.quadratic_model(mu=kappa, dim=1)
        cfg = sv.SolverConfig(dim=1, n_modes=5, dt=0.01, t_end=0.1,
                              model=model, viscosity=eps)
        grid = cfg.make_grid()
        v_val, y_val = 0.2 - 0.1j, 0.3 + 0.05j
        v0, y0, fbar = single_mode_initial(grid, n, v_val, y_val)
        state = sv.project_initial(grid, v0, y0, fbar)
        dv, dy = sv.rhs(state, model, eps=eps)
        idx = (0,) + sp.mode_index(5, [n])
        want = -kappa * n ** 2 * y_val - eps * n ** 2 * v_val
        assert dv[idx] == pytest.approx(want, rel=1e-13)
        assert dy[idx] == pytest.approx(v_val)

    def test_uniform_mean_strain_is_stationary(self):
        # zero modes with arbitrary Fbar: constant stress has no gradient
        model = se.quartic_model(1.0, dim=2)
        cfg = sv.SolverConfig(dim=2, n_modes=4, dt=0.002, t_end=0.05,
                              model=model)
        grid = cfg.make_grid()
        fbar = np.array([[1.4, 0.3], [-0.2, 0.9]])
        v0 = sp.zero_field(grid, (2,))
        y0 = sp.zero_field(grid, (2,))
        res = sv.run(cfg, (v0, y0, fbar))
        assert np.max(np.abs(res.final_state.v.coeffs)) < 1e-13
        assert np.max(np.abs(res.final_state.y_pot.coeffs)) < 1e-13
        assert np.array_equal(res.final_state.fbar, fbar)

    def test_mean_velocity_conserved(self):
        model = se.quartic_model(1.0, dim=2)
        v0, y0, fbar = smooth_initial_data(2, 8, 0.2, seed=3)
        v0.coeffs[(Ellipsis,) + (0, 0)] = np.array([0.25, -0.5])
        cfg = sv.SolverConfig(dim=2, n_modes=8, dt=1e-3, t_end=0.05,
                              model=model, record_every=10)
        res = sv.run(cfg, (v0, y0, fbar))
        assert np.allclose(res.final_state.mean_velocity(), [0.25, -0.5],
                           atol=1e-13)


class TestSteppers:
    def test_heat_decay_single_step_exact(self):
        # with S = 0 the integrating factor carries the mode exactly
        model = stress_free_model()
        dt, n, eps = 0.01, 3, 1.0
        cfg = sv.SolverConfig(dim=1, n_modes=4, dt=dt, t_end=dt, model=model,
                              viscosity=eps, record_every=1)
        grid = cfg.make_grid()
        v0, y0, fbar = single_mode_initial(grid, n, 0.2 - 0.1j, 0.0)
        res = sv.run(cfg, (v0, y0, fbar))
        got = sp.get_mode(res.final_state.v, [n], comp=(0,))
        exact = (0.2 - 0.1j) * np.exp(-eps * n ** 2 * dt)
        assert abs(got - exact) <= 1e-15 * abs(exact) * 4

    def test_zero_data_stays_zero(self):
        model = se.double_well_model()
        cfg = sv.SolverConfig(dim=1, n_modes=8, dt=1e-3, t_end=0.05,
                              model=model)
        grid = cfg.make_grid()
        res = sv.run(cfg, (sp.zero_field(grid, (1,)),
                           sp.zero_field(grid, (1,)), np.zeros((1, 1))))
        assert np.max(np.abs(res.final_state.v.coeffs)) == 0.0

    def test_schemes_agree_at_second_order(self):
        # CNAB2 error ~ dt^2 against a near-exact IF_RK4 reference
        model = se.quartic_model(1.0, dim=2)
        v0, y0, fbar = smooth_initial_data(2, 8, 0.2, seed=5)
        t_end = 0.1

        def final_v(scheme, dt):
            cfg = sv.SolverConfig(dim=2, n_modes=8, dt=dt, t_end=t_end,
                                  model=model, scheme=scheme,
                                  record_every=1000)
            return sv.run(cfg, (v0, y0, fbar)).final_state.v

        ref = final_v("IF_RK4", 1e-4)
        errs = [sp.l2_norm(final_v("IMEX_CNAB2", dt) - ref)
                for dt in (2e-3, 1e-3)]
        order = np.log2(errs[0] / errs[1])
        assert 1.7 < order < 2.4

    def test_invalid_scheme_rejected(self):
        with pytest.raises(ValueError, match="unknown scheme"):
            sv.SolverConfig(dim=1, n_modes=4, dt=0.1, t_end=1.0,
                            model=stress_free_model(), scheme="EULER")

    def test_config_validation(self):
        model = stress_free_model()
        with pytest.raises(ValueError, match="dt"):
            sv.SolverConfig(dim=1, n_modes=4, dt=0.0, t_end=1.0, model=model)
        with pytest.raises(ValueError, match="t_end"):
            sv.SolverConfig(dim=1, n_modes=4, dt=0.1, t_end=0.0, model=model)
        with pytest.raises(ValueError, match="viscosity"):
            sv.SolverConfig(dim=1, n_modes=4, dt=0.1, t_end=1.0, model=model,
                            viscosity=0.0)


class TestInvolution:
    def test_curl_stays_at_rounding_level(self):
        model = se.quartic_model(1.0, dim=2)
        v0, y0, fbar = smooth_initial_data(2, 16, 0.3, seed=7)
        cfg = sv.SolverConfig(dim=2, n_modes=16, dt=1e-3, t_end=0.2,
                              model=model, record_every=20,
                              record_diagnostics=False)
        residuals = []

        def cb(state):
            f = state.deformation()
            curl = sp.curl2d(f)
            scale = max(np.max(np.abs(f.coeffs)) * 16, 1e-30)
            residuals.append(np.max(np.abs(curl.coeffs)) / scale)

        sv.run(cfg, (v0, y0, fbar), state_callback=cb)
        # rank-one-in-k coefficients: only operator rounding remains,
        # and it must not grow along the trajectory
        assert max(residuals) < 64 * np.finfo(float).eps
        assert residuals[-1] <= max(residuals[0], 16 * np.finfo(float).eps)

    def test_deformation_coefficients_are_rank_one(self):
        model = se.quartic_model(1.0, dim=2)
        v0, y0, fbar = smooth_initial_data(2, 8, 0.3, seed=9)
        cfg = sv.SolverConfig(dim=2, n_modes=8, dt=1e-3, t_end=0.05,
                              model=model, record_diagnostics=False)
        res = sv.run(cfg, (v0, y0, fbar))
        state = res.final_state
        f = state.deformation()
        rebuilt = sp.gradient(state.y_pot)
        rebuilt.coeffs[(Ellipsis, 0, 0)] += state.fbar
        assert np.array_equal(f.coeffs, rebuilt.coeffs)


class TestGuardsAndRestart:
    def test_blowup_guard_trips(self):
        model = se.quartic_model(1.0, dim=1)

        def pump(t, grid):
            out = np.zeros((1,) + grid.spectral_shape, dtype=complex)
            out[0, sp.mode_index(grid.n_modes, [1])[0]] = 50.0
            out[0, sp.mode_index(grid.n_modes, [-1])[0]] = 50.0
            return out

        model = se.double_well_model()
        cfg = sv.SolverConfig(dim=1, n_modes=4, dt=1e-2, t_end=5.0,
                              model=model, forcing=pump, record_every=5,
                              blowup_threshold=1.0)
        grid = cfg.make_grid()
        with pytest.raises(sp.BlowUpError) as err:
            sv.run(cfg, (sp.zero_field(grid, (1,)),
                         sp.zero_field(grid, (1,)), np.zeros((1, 1))))
        assert err.value.t is not None

    @pytest.mark.parametrize("scheme", ["IF_RK4", "IMEX_CNAB2"])
    def test_checkpoint_restart_matches_uninterrupted(self, tmp_path, scheme):
        model = se.quartic_model(1.0, dim=2)
        v0, y0, fbar = smooth_initial_data(2, 8, 0.2, seed=11)
        dt, t_mid, t_end = 1e-3, 0.05, 0.1
        cfg_full = sv.SolverConfig(dim=2, n_modes=8, dt=dt, t_end=t_end,
                                   model=model, scheme=scheme,
                                   record_diagnostics=False)
        full = sv.run(cfg_full, (v0, y0, fbar))

        cfg_a = sv.SolverConfig(dim=2, n_modes=8, dt=dt, t_end=t_mid,
                                model=model, scheme=scheme,
                                record_diagnostics=False)
        part = sv.run(cfg_a, (v0, y0, fbar))
        sv.write_checkpoint(tmp_path / "ck", part.final_state, cfg_a,
                            stepper_state=part.stepper_state)
        state, manifest, hist = sv.read_checkpoint(tmp_path / "ck")
        assert manifest["scheme"] == scheme
        cfg_b = sv.SolverConfig(dim=2, n_modes=8, dt=dt, t_end=t_end,
                                model=model, scheme=scheme, t0=state.t,
                                record_diagnostics=False)
        cont = sv.run(cfg_b, state, stepper_state=hist)
        dv = np.max(np.abs(cont.final_state.v.coeffs
                           - full.final_state.v.coeffs))
        dy = np.max(np.abs(cont.final_state.y_pot.coeffs
                           - full.final_state.y_pot.coeffs))
        assert dv < 1e-13 and dy < 1e-13

    def test_identical_runs_are_bitwise_equal(self):
        model = se.quartic_model(1.0, dim=2)
        v0, y0, fbar = smooth_initial_data(2, 8, 0.2, seed=13)
        cfg = sv.SolverConfig(dim=2, n_modes=8, dt=1e-3, t_end=0.05,
                              model=model)
        a = sv.run(cfg, (v0, y0, fbar))
        b = sv.run(cfg, (v0, y0, fbar))
        assert np.array_equal(a.final_state.v.coeffs, b.final_state.v.coeffs)
        assert np.array_equal(a.series["E"], b.series["E"])


class TestDiagnosticsRecording:
    def test_series_monotone_time_and_energy_decay(self):
        model = se.quartic_model(1.0, dim=2)
        v0, y0, fbar = smooth_initial_data(2, 8, 0.2, seed=15)
        cfg = sv.SolverConfig(dim=2, n_modes=8, dt=1e-3, t_end=0.1,
                              model=model, record_every=10)
        res = sv.run(cfg, (v0, y0, fbar))
        t = res.series["t"]
        assert np.all(np.diff(t) > 0)
        resid = dg.energy_balance_residual(res.series)
        assert dg.energy_monotonic(res.series, tol=max(resid, 1e-12))

    def test_fractional_step_count_rejected(self):
        model = stress_free_model()
        cfg = sv.SolverConfig(dim=1, n_modes=4, dt=0.3, t_end=1.0,
                              model=model)
        grid = cfg.make_grid()
        with pytest.raises(ValueError, match="integral number"):
            sv.run(cfg, (sp.zero_field(grid, (1,)),
                         sp.zero_field(grid, (1,)), np.zeros((1, 1))))
