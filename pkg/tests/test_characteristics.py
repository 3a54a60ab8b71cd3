import numpy as np
import pytest

from periodic_hyp import characteristics as ch
from periodic_hyp import system_model as sm
from periodic_hyp.errors import DomainError


def scalar_spec(lam_fn=None, radius=0.2):
    """Scalar right-moving system with speed 1 + u by default."""
    if lam_fn is None:
        lam_fn = lambda u: 1.0 + u

    def A(u):
        u = np.asarray(u, dtype=float)
        return lam_fn(u[..., 0]).reshape(u.shape[:-1] + (1, 1))

    return sm.SystemSpec(n=1, m=0, A=A, F=lambda u: np.zeros(np.shape(u)),
                         domain_radius=radius, L=1.0)


class TestInterpolate:
    def test_nodes_reproduced(self):
        rng = np.random.default_rng(0)
        vals = rng.normal(size=(16, 9, 2))
        fld = ch.Field(values=vals, T_star=1.0, L=1.0)
        for j in (0, 3, 15):
            for k in (0, 4, 8):
                got = fld.interpolate(j * fld.dt, k * fld.dx)
                assert np.array_equal(got, vals[j, k])

    def test_constant_field(self):
        fld = ch.Field(values=np.full((8, 9, 1), 0.7), T_star=2.0, L=1.0)
        for t, x in [(0.13, 0.4), (-3.7, 0.0), (11.2, 1.0)]:
            assert fld.interpolate(t, x)[0] == pytest.approx(0.7, abs=1e-15)

    def test_closed_form_accuracy(self):
        fld = ch.Field.from_function(
            lambda t, x: np.sin(2 * np.pi * t) * x, 256, 256, 1.0, 1.0)
        got = fld.interpolate(0.3, 0.5)[0]
        assert got == pytest.approx(np.sin(0.6 * np.pi) * 0.5, abs=1e-3)

    def test_periodic_wrap_exact_on_dyadic_queries(self):
        rng = np.random.default_rng(1)
        fld = ch.Field(values=rng.normal(size=(32, 17, 1)), T_star=1.0, L=1.0)
        t = 5 * fld.dt + 0.25 * fld.dt  # dyadic offset
        for x in (0.0, 0.3125, 1.0):
            a = fld.interpolate(t, x)
            b = fld.interpolate(t + fld.T_star, x)
            c = fld.interpolate(t - 3 * fld.T_star, x)
            assert np.array_equal(a, b)
            assert np.array_equal(a, c)

    def test_out_of_domain_raises(self):
        fld = ch.Field.zeros(8, 8, 1, 1.0, 1.0)
        with pytest.raises(DomainError):
            fld.interpolate(0.0, 1.5)
        with pytest.raises(DomainError):
            fld.interpolate(0.0, -0.1)

    def test_derivative_grids(self):
        fld = ch.Field.from_function(
            lambda t, x: np.sin(2 * np.pi * t) * np.cos(x), 128, 128, 1.0, 1.0)
        t, x = 0.37, 0.41
        dt_val = fld.interpolate_dt(t, x)[0]
        dx_val = fld.interpolate_dx(t, x)[0]
        # truncation of the grid stencil is (dt^2/6) |u_ttt| ~ 2.5e-3 here
        assert dt_val == pytest.approx(2 * np.pi * np.cos(2 * np.pi * t) * np.cos(x), abs=5e-3)
        assert dx_val == pytest.approx(-np.sin(2 * np.pi * t) * np.sin(x), abs=5e-3)


class TestTrace:
    def test_straight_line_unit_speed(self):
        spec = scalar_spec(lam_fn=lambda u: np.ones_like(u))
        fld = ch.Field.zeros(32, 32, 1, 1.0, 1.0)
        tr = ch.trace_characteristic(fld, spec, 0, t0=0.5, x0=0.5)
        t_end, x_end = tr.endpoint
        assert x_end == 0.0
        assert t_end == pytest.approx(0.0, abs=1e-13)
        # dt/dx = 1 along the whole trace
        slopes = np.diff(tr.ts) / np.diff(tr.xs)
        assert np.abs(slopes - 1.0).max() <= 1e-12

    def test_left_moving_family(self):
        spec = sm.SystemSpec(
            n=1, m=1,
            A=lambda u: -np.ones(np.shape(u)[:-1] + (1, 1)),
            F=lambda u: np.zeros(np.shape(u)),
            domain_radius=0.2, L=1.0)
        fld = ch.Field.zeros(32, 32, 1, 1.0, 1.0)
        tr = ch.trace_characteristic(fld, spec, 0, t0=0.5, x0=0.5)
        t_end, x_end = tr.endpoint
        assert x_end == 1.0
        assert t_end == pytest.approx(0.0, abs=1e-13)

    def test_frozen_constant_state(self):
        # constant field 0.01 with speed 1 + u: dt/dx = 1/1.01 exactly
        spec = scalar_spec()
        fld = ch.Field(values=np.full((32, 33, 1), 0.01), T_star=1.0, L=1.0)
        tr = ch.trace_characteristic(fld, spec, 0, t0=0.5, x0=0.5)
        t_end, _ = tr.endpoint
        assert t_end == pytest.approx(0.5 - 0.5 / 1.01, abs=1e-10)

    def test_quadrature_against_closed_form(self):
        # time-independent field u = c x is bilinear-exact; the delay is
        # int dx / (1 + c x) = log(1 + c x0) / c
        c = 0.15
        spec = scalar_spec(radius=0.3)
        fld = ch.Field.from_function(lambda t, x: c * x + 0 * t, 16, 64, 1.0, 1.0)
        tr = ch.trace_characteristic(fld, spec, 0, t0=0.8, x0=1.0)
        expected = 0.8 - np.log(1 + c) / c
        t_end, _ = tr.endpoint
        assert t_end == pytest.approx(expected, abs=1e-9)

    def test_rk4_order(self):
        # halving the step (doubling Nx on a bilinear-exact field) cuts the
        # endpoint error by at least 8x
        c = 0.15
        spec = scalar_spec(radius=0.3)
        expected = 0.8 - np.log(1 + c) / c
        errs = []
        for Nx in (8, 16):
            fld = ch.Field.from_function(lambda t, x: c * x + 0 * t, 8, Nx, 1.0, 1.0)
            tr = ch.trace_characteristic(fld, spec, 0, t0=0.8, x0=1.0)
            errs.append(abs(tr.endpoint[0] - expected))
        assert errs[0] >= 8 * errs[1]

    def test_periodicity_equivariance(self):
        spec = scalar_spec()
        fld = ch.Field.from_function(
            lambda t, x: 0.05 * np.sin(2 * np.pi * t) * (1 + 0 * x), 32, 32, 1.0, 1.0)
        tr0 = ch.trace_characteristic(fld, spec, 0, t0=0.375, x0=0.75)
        tr1 = ch.trace_characteristic(fld, spec, 0, t0=0.375 + 1.0, x0=0.75)
        assert np.array_equal(tr1.ts, tr0.ts + 1.0)
        assert np.array_equal(tr1.xs, tr0.xs)

    def test_semigroup_property(self):
        spec = scalar_spec()
        fld = ch.Field.from_function(
            lambda t, x: 0.05 * np.sin(2 * np.pi * t) * (1 + 0 * x), 64, 64, 1.0, 1.0)
        tr = ch.trace_characteristic(fld, spec, 0, t0=0.6, x0=0.9)
        mid = len(tr.xs) // 2
        tr2 = ch.trace_characteristic(fld, spec, 0, t0=tr.ts[mid], x0=tr.xs[mid])
        assert tr2.endpoint[0] == pytest.approx(tr.endpoint[0], abs=1e-12)

    def test_speed_bound_invariant(self):
        spec = scalar_spec()
        fld = ch.Field.from_function(
            lambda t, x: 0.05 * np.sin(2 * np.pi * t) * (1 + 0 * x), 32, 32, 1.0, 1.0)
        tr = ch.trace_characteristic(fld, spec, 0, t0=0.2, x0=1.0)
        mu_max = 1.0 / 0.95  # speed 1 + u >= 0.95 on the ball
        assert np.all(np.abs(np.diff(tr.ts)) <= mu_max * np.abs(np.diff(tr.xs)) + 1e-12)
