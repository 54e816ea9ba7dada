import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hnlslab.dyadic import DyadicRect, project_annulus, project_rect
from hnlslab.grid import (Field, GridError, l2_norm, make_grid, random_band_limited,
                          synthesize_gaussian)
from hnlslab.propagator import (AliasingError, EvolveConfig, Galilean, Modulation, PseudoConformal,
                                Scaling, Translation, apply_symmetry, evolve_to,
                                galilean_snapshot, linear_propagate, linear_trace, load_trace,
                                nls_evolve, pseudo_conformal, save_trace, self_convergence)


def rel_err(a: Field, b: Field) -> float:
    return l2_norm(a - b) / l2_norm(b)


def gaussian_evolution(grid, t):
    """Free evolution of exp(-(x^2+y^2)).

    In rotated coordinates a=(x+y)/sqrt2, b=(x-y)/sqrt2 the operator d_x d_y
    is (d_a^2 - d_b^2)/2, so the flow factors into two 1-D Schrodinger flows
    of opposite sign, each with the textbook Gaussian solution.
    """
    X, Y = grid.mesh()
    a = (X + Y) / math.sqrt(2)
    b = (X - Y) / math.sqrt(2)
    za, zb = 1 + 2j * t, 1 - 2j * t
    return Field(grid, np.exp(-a ** 2 / za - b ** 2 / zb) / math.sqrt(1 + 4 * t * t))


@pytest.fixture(scope="module")
def g24():
    return make_grid(128, 128, 24.0, 24.0)


class TestLinear:
    def test_zero_time_identity(self, random_field):
        np.testing.assert_array_equal(linear_propagate(random_field, 0.0).data, random_field.data)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10**6), t=st.floats(-20, 20))
    def test_unitary(self, seed, t):
        g = make_grid(32, 32, 8.0, 8.0)
        f = random_band_limited(g, seed, (0.0, 5.0))
        assert abs(l2_norm(linear_propagate(f, t)) - 1.0) <= 1e-12

    def test_unitary_at_1_7(self, random_field):
        assert l2_norm(linear_propagate(random_field, 1.7)) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("s,t", [(0.3, 0.9), (-1.1, 2.5), (4.0, -4.0)])
    def test_group_law(self, random_field, s, t):
        a = linear_propagate(linear_propagate(random_field, s), t)
        b = linear_propagate(random_field, s + t)
        assert rel_err(a, b) <= 1e-12

    @pytest.mark.parametrize("t", [0.25, 0.5, 1.0])
    def test_gaussian_closed_form(self, g24, t):
        f = synthesize_gaussian(g24)
        assert rel_err(linear_propagate(f, t), gaussian_evolution(g24, t)) < 1e-12

    def test_commutes_with_projections(self, random_field):
        r = DyadicRect(0, 0, 1, -1)
        for proj in (lambda h: project_rect(h, r), lambda h: project_rect(h, r, "sharp"),
                     lambda h: project_annulus(h, 2.0, 1.0)):
            a = proj(linear_propagate(random_field, 0.8))
            b = linear_propagate(proj(random_field), 0.8)
            assert l2_norm(a - b) <= 1e-13

    def test_trace_times(self, random_field):
        tr = linear_trace(random_field, np.linspace(0, 1, 5))
        assert len(tr) == 5 and tr.dt == pytest.approx(0.25)
        assert rel_err(tr.snapshots[3], linear_propagate(random_field, 0.75)) < 1e-12


class TestNonlinear:
    def test_p0_matches_linear(self, g24):
        f = synthesize_gaussian(g24, amp=1.3)
        tr = nls_evolve(f, EvolveConfig(p=0, dt=0.01, nsteps=40, record_every=10))
        for t, s in zip(tr.times, tr.snapshots):
            assert rel_err(s, linear_propagate(f, t)) <= 1e-12

    @pytest.mark.parametrize("p", [2, 4])
    def test_mass_conserved_1000_steps(self, g24, p):
        f = synthesize_gaussian(g24, amp=1.5)
        tr = nls_evolve(f, EvolveConfig(p=p, dt=1e-3, nsteps=1000, record_every=100))
        assert len(tr) == 11
        assert tr.info["mass_drift"] <= 1e-10

    def test_second_order(self, g24):
        f = synthesize_gaussian(g24, amp=1.5)
        sc = self_convergence(f, 2, 0.5, 20)
        # with a dt/4 reference a second-order error C dt^2 gives (1 - 1/16) / (1/4 - 1/16) = 5
        assert sc["ratio"] == pytest.approx(5.0, rel=0.05)

    def test_nonlinearity_matters(self, g24):
        f = synthesize_gaussian(g24, amp=1.5)
        assert rel_err(evolve_to(f, 2, 0.5, 50), linear_propagate(f, 0.5)) > 1e-3

    def test_backward_inverts_forward(self):
        # needs a grid that resolves the nonlinear spectrum: conjugation does not
        # reflect the Nyquist row exactly
        f = synthesize_gaussian(make_grid(256, 256, 24.0, 24.0), amp=1.5)
        back = evolve_to(evolve_to(f, 2, 0.3, 30), 2, -0.3, 30)
        # Strang splitting is time-reversible, so this is exact up to roundoff
        assert rel_err(back, f) < 1e-12

    @pytest.mark.parametrize("kw", [dict(p=3), dict(dt=0.0), dict(nsteps=0)])
    def test_bad_config(self, kw):
        with pytest.raises(ValueError):
            EvolveConfig(**kw)

    def test_boundary_mass_rejected(self):
        g = make_grid(32, 32, 4.0, 4.0)
        with pytest.raises(GridError):
            nls_evolve(Field(g, np.ones(g.shape)), EvolveConfig(nsteps=2, record_every=1))

    def test_trace_round_trip(self, tmp_path, g24):
        f = synthesize_gaussian(g24, amp=1.0)
        tr = nls_evolve(f, EvolveConfig(p=2, dt=0.01, nsteps=4, record_every=2))
        back = load_trace(save_trace(tmp_path / "tr", tr, seed=1))
        assert len(back) == 3 and back.dt == pytest.approx(tr.dt)
        assert back.info["mass_drift"] == tr.info["mass_drift"]


class TestSymmetries:
    def test_modulation_pi(self, random_field):
        out = apply_symmetry(random_field, Modulation(math.pi))
        np.testing.assert_allclose(out.data, -random_field.data, atol=1e-15)

    def test_grid_translation_is_roll(self, random_field):
        g = random_field.grid
        out = apply_symmetry(random_field, Translation(7 * g.dx, 0.0))
        np.testing.assert_allclose(out.data, np.roll(random_field.data, 7, axis=0), atol=1e-13)

    @pytest.mark.parametrize("k1,k2,t", [(3, 0, 0.7), (0, -2, 1.3), (4, 5, -0.6)])
    def test_galilean_identity(self, g24, k1, k2, t):
        xi1, xi2 = k1 * g24.dxi, k2 * g24.deta
        f = synthesize_gaussian(g24, lam=0.8)
        lhs = linear_propagate(apply_symmetry(f, Galilean(xi1, xi2)), t)
        rhs = galilean_snapshot(linear_propagate(f, t), xi1, xi2, t)
        assert rel_err(lhs, rhs) <= 1e-10

    @pytest.mark.parametrize("p", [0, 2])
    def test_scaling_covariance(self, p):
        # dilation by 2 (lam = 1/2); a compression would read periodic images.
        # 256 points so the undilated nonlinear spectrum is resolved.
        g = make_grid(256, 256, 32.0, 32.0)
        f = synthesize_gaussian(g, amp=1.2, lam=1.0)
        S = Scaling(0.5, 0.5)
        s = 0.4
        lhs = evolve_to(apply_symmetry(f, S), p, s, 64)
        rhs = apply_symmetry(evolve_to(f, p, s / 4, 64), S)
        # same number of steps on both sides, so the schemes are exact images
        assert rel_err(lhs, rhs) < 1e-9

    def test_scaling_aliasing(self, small_grid):
        f = random_band_limited(small_grid, 0, (0.0, small_grid.xi_max * 0.9))
        with pytest.raises(AliasingError):
            apply_symmetry(f, Scaling(2.0, 2.0))

    def test_supercritical_weight(self):
        assert Scaling(2.0, 8.0, supercritical=True).weight == 2.0
        assert Scaling(2.0, 8.0).weight == 4.0

    def test_pseudo_conformal_at_one(self, g24):
        u = synthesize_gaussian(g24, lam=1.0, center=(0.3, -0.2), mu=0.2)
        X, Y = g24.mesh()
        expected = np.exp(1j * X * Y) * np.conj(u.data) / 1j
        np.testing.assert_allclose(pseudo_conformal(u, 1.0).data, expected, atol=1e-10)

    @pytest.mark.parametrize("t", [0.8, 1.25, -1.0])
    def test_pseudo_conformal_norm(self, t):
        g = make_grid(256, 256, 24.0, 24.0)
        u = synthesize_gaussian(g, lam=1.0)
        assert l2_norm(apply_symmetry(u, PseudoConformal(t))) == pytest.approx(l2_norm(u), rel=1e-8)

    def test_pseudo_conformal_zero_time(self, g24):
        with pytest.raises(ValueError):
            pseudo_conformal(synthesize_gaussian(g24), 0.0)
