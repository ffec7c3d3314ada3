import numpy as np
import pytest

from kvspectral import mms
from kvspectral import spectral as sp
from kvspectral import stored_energy as se


@pytest.fixture(scope="module")
def manufactured():
    model = se.quartic_model(1.0, dim=2)
    profile = mms.default_profile(2, amplitude=0.1)
    return mms.ManufacturedSolution(model, profile, 1.1 * np.eye(2), eps=1.0)


class TestForcingConstruction:
    def test_nonpolynomial_stress_rejected(self):
        model = se.piecewise_model()
        profile = mms.default_profile(1, 0.1)
        with pytest.raises(ValueError, match="polynomial"):
            mms.ManufacturedSolution(model, profile, np.zeros((1, 1)), 1.0)

    def test_forcing_matches_direct_evaluation(self, manufactured):
        # the interpolated stress polynomial must reproduce div S(F*(t))
        # evaluated directly at an arbitrary amplitude
        ms = manufactured
        grid = sp.Grid.for_degree(2, 8, degree=3)
        t = 0.37
        got = ms.forcing(t, grid)
        y_t = ms.y_ref * ms.s(t)
        f = sp.gradient(sp.regrid(sp.project(y_t, 8), grid))
        f.coeffs[(Ellipsis, 0, 0)] += ms.fbar
        div_s = sp.divergence(sp.nonlinear_stress(ms.model, f))
        y8 = sp.project(ms.y_ref, 8).coeffs
        k2 = grid.k_squared()
        want = ms.s2(t) * y8 + ms.s1(t) * k2 * y8 - div_s.coeffs
        assert np.max(np.abs(got - want)) < 1e-13

    def test_initial_data_matches_exact_fields(self, manufactured):
        v0, y0, fbar = manufactured.initial(8)
        v_ex, y_ex = manufactured.exact_fields(0.0, v0.grid)
        assert np.array_equal(v0.coeffs, v_ex.coeffs)
        assert np.array_equal(y0.coeffs, y_ex.coeffs)


class TestConvergence:
    def test_spatial_error_floors_by_resolving_band(self, manufactured):
        coarse = mms.measure_error(manufactured, 1, dt=1e-3, t_end=0.2)
        fine = mms.measure_error(manufactured, 4, dt=1e-3, t_end=0.2)
        assert coarse["total"] > 1e-5
        assert fine["total"] < 1e-11

    def test_spatial_error_below_1e10_at_32(self, manufactured):
        err = mms.measure_error(manufactured, 32, dt=1e-3, t_end=0.2)
        assert err["total"] < 1e-10

    def test_temporal_order_ifrk4(self, manufactured):
        errs = [mms.measure_error(manufactured, 8, dt=dt, t_end=0.48)["total"]
                for dt in (1.6e-2, 8e-3)]
        order = np.log2(errs[0] / errs[1])
        assert abs(order - 4.0) < 0.4

    def test_temporal_order_cnab2(self, manufactured):
        errs = [mms.measure_error(manufactured, 8, dt=dt, t_end=0.48,
                                  scheme="IMEX_CNAB2")["total"]
                for dt in (8e-3, 4e-3)]
        order = np.log2(errs[0] / errs[1])
        assert abs(order - 2.0) < 0.4

    def test_sine_amplitude_profile(self):
        # v*(t) = sin(t) sin(x1) e1 via s(t) = 1 - cos(t)
        model = se.quartic_model(1.0, dim=2)
        grid = sp.Grid(2, 2, 8)
        y = sp.zero_field(grid, (2,))
        sp.set_mode(y, [1, 0], -0.05j, comp=(0,))
        ms = mms.ManufacturedSolution(
            model, y, 1.1 * np.eye(2), eps=1.0,
            s=lambda t: 1.0 - np.cos(t), s1=np.sin, s2=np.cos)
        err = mms.measure_error(ms, 8, dt=2e-3, t_end=0.5)
        assert err["total"] < 1e-11
        v_ex, _ = ms.exact_fields(np.pi / 2, sp.Grid(2, 2, 8))
        assert sp.get_mode(v_ex, [1, 0], comp=(0,)) == pytest.approx(
            -0.05j * np.sin(np.pi / 2))

    def test_convergence_order_helper(self):
        xs = [1e-2, 5e-3, 2.5e-3]
        errors = [c * x ** 3 for c, x in zip((1.0, 1.0, 1.0), xs)]
        assert mms.convergence_order(xs, errors) == pytest.approx(3.0)
