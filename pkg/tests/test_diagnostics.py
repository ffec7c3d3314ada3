import numpy as np
import pytest

from kvspectral import diagnostics as dg
from kvspectral import solver as sv
from kvspectral import spectral as sp
from kvspectral import stored_energy as se
from kvspectral.harness import smooth_initial_data


def make_state(grid, v=None, y=None, fbar=None):
    dim = grid.dim
    return sv.KVState(
        0.0,
        v if v is not None else sp.zero_field(grid, (dim,)),
        y if y is not None else sp.zero_field(grid, (dim,)),
        fbar if fbar is not None else np.zeros((dim, dim)))


class TestEnergyFunctionals:
    def test_zero_state_zero_energy(self):
        model = se.quadratic_model(dim=2)
        grid = sp.Grid.for_degree(2, 8, degree=1)
        state = make_state(grid)
        assert dg.energy(state.v, state.deformation(), model) == 0.0

    def test_sin_velocity_energy_is_pi_squared(self):
        model = se.quadratic_model(dim=2)
        grid = sp.Grid.for_degree(2, 8, degree=1)
        x1, _ = grid.meshgrid()
        vvals = np.stack([np.sin(x1), np.zeros_like(x1)])
        v = sp.forward(grid, vvals)
        state = make_state(grid, v=v)
        e = dg.energy(state.v, state.deformation(), model)
        assert e == pytest.approx(np.pi ** 2, rel=1e-13)

    def test_constant_deformation_energy(self):
        model = se.quartic_model(alpha=1.0, dim=2)
        grid = sp.Grid.for_degree(2, 4, degree=3)
        c = np.array([[1.2, 0.1], [0.0, 0.7]])
        state = make_state(grid, fbar=c)
        e = dg.energy(state.v, state.deformation(), model)
        assert e == pytest.approx(float(model.w(c)) * (2 * np.pi) ** 2,
                                  rel=1e-13)

    def test_dissipation_parseval(self):
        grid = sp.Grid(2, 6, 16)
        v = sp.zero_field(grid, (2,))
        sp.set_mode(v, [2, 1], 0.3, comp=(0,))
        # int |grad v|^2 = vol * |k|^2 * (|c|^2 + |c|^2 at -k)
        want = (2 * np.pi) ** 2 * 5.0 * 2 * 0.3 ** 2
        assert dg.dissipation(v, eps=0.5) == pytest.approx(0.5 * want,
                                                           rel=1e-13)


class TestModulatedEnergy:
    def test_constant_state_reduces_to_energy_terms(self):
        model = se.quartic_model(alpha=1.0, dim=2)
        grid = sp.Grid.for_degree(2, 4, degree=3)
        c = np.array([[1.1, 0.0], [0.2, 0.9]])
        state = make_state(grid, fbar=c)
        g, q = dg.modulated_energy(state.v, state.deformation(), model)
        assert g == pytest.approx(2 * float(model.w(c)) * (2 * np.pi) ** 2,
                                  rel=1e-12)
        assert q == pytest.approx(0.0, abs=1e-12)

    def test_identity_hessian_for_linear_model(self):
        model = se.quadratic_model(mu=1.0, dim=2)
        v0, y0, fbar = smooth_initial_data(2, 6, 0.3, seed=1)
        grid = sp.Grid.for_degree(2, 6, degree=1)
        state = sv.project_initial(grid, v0, y0, fbar)
        f = state.deformation()
        _, q = dg.modulated_energy(state.v, f, model)
        expect = dg.h1f(f) + sp.grad_l2_sq(state.v)
        assert q == pytest.approx(expect, rel=1e-12)

    def test_quartic_origin_hessian_vanishes_when_shifted(self):
        # D2W(0) + alpha*I = 0, so tiny deformations contribute only grad v
        model = se.quartic_model(alpha=1.0, dim=2)
        v0, y0, fbar = smooth_initial_data(2, 6, 0.2, seed=2)
        grid = sp.Grid.for_degree(2, 6, degree=3)
        state = sv.project_initial(grid, v0, 1e-7 * y0, np.zeros((2, 2)))
        _, q = dg.modulated_energy(state.v, state.deformation(), model)
        assert q == pytest.approx(sp.grad_l2_sq(state.v), rel=1e-6)

    def test_convex_hessian_term_nonnegative_pointwise(self):
        model = se.quadratic_model(mu=1.0, dim=2)
        v0, y0, fbar = smooth_initial_data(2, 8, 0.4, seed=3)
        grid = sp.Grid.for_degree(2, 8, degree=1)
        state = sv.project_initial(grid, v0, y0, fbar)
        f = state.deformation()
        assert dg.hessian_min_eigenvalue(f, model, shifted=False) >= -1e-10
        _, q = dg.modulated_energy(state.v, f, model)
        assert q >= sp.grad_l2_sq(state.v) - 1e-12


class TestBalanceResiduals:
    def run_linear_mode(self, dt, t_end=0.5, n=2):
        model = se.quadratic_model(mu=1.0, dim=1)
        cfg = sv.SolverConfig(dim=1, n_modes=4, dt=dt, t_end=t_end,
                              model=model, record_every=1)
        grid = cfg.make_grid()
        v0 = sp.zero_field(grid, (1,))
        y0 = sp.zero_field(grid, (1,))
        sp.set_mode(v0, [n], 0.4, comp=(0,))
        sp.set_mode(y0, [n], 0.2, comp=(0,))
        return sv.run(cfg, (v0, y0, np.zeros((1, 1))))

    def test_zero_trajectory_residual_zero(self):
        model = se.double_well_model()
        cfg = sv.SolverConfig(dim=1, n_modes=4, dt=0.01, t_end=0.1,
                              model=model, record_every=2)
        grid = cfg.make_grid()
        res = sv.run(cfg, (sp.zero_field(grid, (1,)),
                           sp.zero_field(grid, (1,)), np.zeros((1, 1))))
        assert dg.energy_balance_residual(res.series) == 0.0
        assert dg.modulated_inequality_residual(res.series, model.K) == 0.0

    def test_trapezoid_residual_is_second_order(self):
        # exact exponential mode decay: the only residual is quadrature,
        # which must quarter under dt halving
        r1 = dg.energy_balance_residual(self.run_linear_mode(2e-3).series,
                                        quadrature="trapezoid")
        r2 = dg.energy_balance_residual(self.run_linear_mode(1e-3).series,
                                        quadrature="trapezoid")
        assert r1 / r2 == pytest.approx(4.0, rel=0.15)

    def test_simpson_residual_is_fourth_order(self):
        r1 = dg.energy_balance_residual(self.run_linear_mode(4e-3).series)
        r2 = dg.energy_balance_residual(self.run_linear_mode(2e-3).series)
        assert r1 / r2 == pytest.approx(16.0, rel=0.3)

    def test_unknown_quadrature_rejected(self):
        res = self.run_linear_mode(1e-2, t_end=0.05)
        with pytest.raises(ValueError):
            dg.energy_balance_residual(res.series, quadrature="midpoint")

    def test_modulated_identity_residual_refines(self):
        # the convex-case inequality is an identity up to discretization
        model = se.quadratic_model(mu=1.0, dim=1)

        def ident(dt):
            cfg = sv.SolverConfig(dim=1, n_modes=8, dt=dt, t_end=0.24,
                                  model=model, record_every=1)
            grid = cfg.make_grid()
            v0 = sp.zero_field(grid, (1,))
            y0 = sp.zero_field(grid, (1,))
            sp.set_mode(v0, [2], 0.4, comp=(0,))
            sp.set_mode(y0, [3], 0.3, comp=(0,))
            res = sv.run(cfg, (v0, y0, np.zeros((1, 1))))
            return dg.modulated_identity_residual(res.series, model.K)

        i1, i2 = ident(4e-3), ident(2e-3)
        assert i2 < i1 / 8.0

    def test_nonlinear_inequality_residual_small(self):
        model = se.double_well_model()
        v0, y0, fbar = smooth_initial_data(1, 16, 0.3, seed=5,
                                           fbar=np.zeros((1, 1)))
        cfg = sv.SolverConfig(dim=1, n_modes=16, dt=1e-3, t_end=0.5,
                              model=model, record_every=2)
        res = sv.run(cfg, (v0, y0, fbar))
        g0 = res.series["G"][0]
        resid = dg.modulated_inequality_residual(res.series, model.K)
        assert resid <= 1e-6 * (g0 + 1.0)


class TestGronwall:
    def test_stationary_state_passes(self):
        model = se.quartic_model(1.0, dim=2)
        cfg = sv.SolverConfig(dim=2, n_modes=4, dt=1e-2, t_end=0.1,
                              model=model, record_every=2)
        grid = cfg.make_grid()
        res = sv.run(cfg, (sp.zero_field(grid, (2,)),
                           sp.zero_field(grid, (2,)), np.eye(2)))
        out = dg.gronwall_h1_bound(res.series, model.K, model.w_floor,
                                   grid.volume)
        assert out["passed"]

    def test_linear_single_mode_below_majorant(self):
        model = se.quadratic_model(mu=1.0, dim=1)
        cfg = sv.SolverConfig(dim=1, n_modes=4, dt=1e-3, t_end=0.5,
                              model=model, record_every=5)
        grid = cfg.make_grid()
        v0 = sp.zero_field(grid, (1,))
        y0 = sp.zero_field(grid, (1,))
        sp.set_mode(v0, [2], 0.5, comp=(0,))
        sp.set_mode(y0, [2], 0.25, comp=(0,))
        res = sv.run(cfg, (v0, y0, np.zeros((1, 1))))
        out = dg.gronwall_h1_bound(res.series, model.K, model.w_floor,
                                   grid.volume)
        assert out["passed"] and out["max_ratio"] < 1.0


class TestSeriesCSV:
    def make_series(self):
        model = se.quartic_model(1.0, dim=2)
        v0, y0, fbar = smooth_initial_data(2, 4, 0.2, seed=7)
        cfg = sv.SolverConfig(dim=2, n_modes=4, dt=1e-2, t_end=0.1,
                              model=model, record_every=2)
        return sv.run(cfg, (v0, y0, fbar)).series

    def test_round_trip(self, tmp_path):
        series = self.make_series()
        path = tmp_path / "series.csv"
        series.to_csv(path)
        back = dg.DiagnosticSeries.from_csv(path)
        for col in dg.CSV_COLUMNS:
            assert np.array_equal(series[col], back[col])

    def test_unix_newlines_and_17_digits(self, tmp_path):
        series = self.make_series()
        path = tmp_path / "series.csv"
        series.to_csv(path)
        raw = path.read_bytes()
        assert b"\r" not in raw
        header, first = raw.decode().splitlines()[:2]
        assert header.split(",")[0] == "t"
        # 17 significant digits survive a float round trip
        val = first.split(",")[1]
        assert float(val) == series["E"][0]
