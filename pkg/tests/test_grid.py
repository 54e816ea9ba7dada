import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hnlslab.grid import (FREQUENCY, PHYSICAL, Field, GridError, TailError, load_field,
                          lp_norm, l2_norm, make_grid, random_band_limited, save_field,
                          synthesize_gaussian, to_frequency, to_physical, zero_field)

seeds = st.integers(min_value=0, max_value=2**31 - 1)


class TestMakeGrid:
    def test_unit_spacing_modes(self):
        g = make_grid(8, 8, 2 * math.pi, 2 * math.pi)
        assert g.dxi == pytest.approx(1.0) and g.deta == pytest.approx(1.0)
        np.testing.assert_allclose(g.xi, np.arange(-4, 4))
        np.testing.assert_allclose(g.eta, np.arange(-4, 4))

    def test_spacing(self):
        assert make_grid(256, 256, 40, 40).dx == 0.15625

    @pytest.mark.parametrize("args", [(8, 8, -1, 1), (8, 8, 1, 0), (12, 8, 1, 1), (4, 8, 1, 1),
                                      (8, 8, float("nan"), 1)])
    def test_rejects_bad_params(self, args):
        with pytest.raises(GridError):
            make_grid(*args)

    def test_coordinates_centered(self):
        g = make_grid(16, 8, 4.0, 2.0)
        assert g.x[8] == 0.0 and g.y[4] == 0.0
        assert g.x[0] == -2.0


class TestGaussian:
    def test_l2_norm_closed_form(self, grid128):
        f = synthesize_gaussian(grid128)
        assert l2_norm(f) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-12)
        assert lp_norm(f, 2) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-12)

    def test_zero_amplitude(self, grid128):
        f = synthesize_gaussian(grid128, amp=0.0)
        assert not np.any(f.data)

    def test_mu_is_pointwise_chirp(self, grid128):
        X, Y = grid128.mesh()
        a = synthesize_gaussian(grid128, mu=0.7)
        b = synthesize_gaussian(grid128)
        np.testing.assert_allclose(a.data, b.data * np.exp(0.7j * X * Y), atol=1e-15)

    def test_too_wide_raises(self, small_grid):
        with pytest.raises(TailError) as e:
            synthesize_gaussian(small_grid, lam=0.01)
        assert e.value.measured > 1e-10

    @pytest.mark.parametrize("cells", [1, 5, -9])
    def test_translation_covariance(self, grid128, cells):
        s = cells * grid128.dx
        a = synthesize_gaussian(grid128, center=(s, 0.0))
        b = synthesize_gaussian(grid128)
        np.testing.assert_allclose(a.data, np.roll(b.data, cells, axis=0), atol=1e-14)


class TestTransforms:
    def test_constant_concentrates_at_zero_mode(self):
        g = make_grid(16, 16, 8.0, 8.0)
        F = to_frequency(Field(g, np.ones(g.shape)))
        nz = np.argwhere(np.abs(F.data) > 1e-12)
        assert nz.tolist() == [[8, 8]]

    @settings(max_examples=25, deadline=None)
    @given(seed=seeds)
    def test_round_trip(self, seed):
        g = make_grid(32, 16, 7.0, 3.0)
        rng = np.random.default_rng(seed)
        f = Field(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
        back = to_physical(to_frequency(f))
        assert np.linalg.norm(back.data - f.data) <= 1e-12 * np.linalg.norm(f.data)

    @settings(max_examples=25, deadline=None)
    @given(seed=seeds)
    def test_parseval(self, seed):
        g = make_grid(16, 64, 5.0, 11.0)
        rng = np.random.default_rng(seed)
        f = Field(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
        assert abs(l2_norm(to_frequency(f)) - l2_norm(f)) <= 1e-12 * l2_norm(f)

    def test_wrong_representation(self, small_grid):
        with pytest.raises(GridError):
            to_physical(zero_field(small_grid))
        with pytest.raises(GridError):
            to_frequency(zero_field(small_grid, FREQUENCY))


class TestRandomBandLimited:
    def test_deterministic(self, small_grid):
        a = random_band_limited(small_grid, 7, (0.0, 3.0))
        b = random_band_limited(small_grid, 7, (0.0, 3.0))
        assert np.array_equal(a.data, b.data)

    def test_other_seed_differs(self, small_grid):
        a = random_band_limited(small_grid, 7, (0.0, 3.0))
        b = random_band_limited(small_grid, 8, (0.0, 3.0))
        assert not np.allclose(a.data, b.data)

    def test_band_support_exact(self, small_grid):
        hi = small_grid.xi_max / 4
        f = random_band_limited(small_grid, 1, (0.0, hi))
        XI, ETA = small_grid.freq_mesh()
        outside = np.maximum(abs(XI), abs(ETA)) > hi
        F = to_frequency(f).data
        assert np.abs(F[outside]).max() <= 1e-12 * np.abs(F).max()
        assert np.all(F[0, :] == 0) or np.abs(F[0, :]).max() < 1e-14

    @settings(max_examples=20, deadline=None)
    @given(seed=seeds)
    def test_unit_norm(self, seed):
        g = make_grid(32, 32, 10.0, 10.0)
        assert l2_norm(random_band_limited(g, seed, (0.5, 3.0))) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("band", [(2.0, 1.0), (-1.0, 1.0), (0.0, 1e3)])
    def test_bad_band(self, small_grid, band):
        with pytest.raises(GridError):
            random_band_limited(small_grid, 0, band)


class TestNorms:
    def test_zero(self, small_grid):
        assert l2_norm(zero_field(small_grid)) == 0.0
        assert lp_norm(zero_field(small_grid), 3.0) == 0.0

    @pytest.mark.parametrize("p", [1.0, 20 / 11, 2.0, 4.0])
    def test_plateau(self, p):
        g = make_grid(32, 32, 8.0, 8.0)
        a = np.zeros(g.shape)
        a[4:14, 2:7] = 1.0
        area = 50 * g.dx * g.dy
        assert lp_norm(Field(g, a), p) == pytest.approx(area ** (1 / p), rel=1e-12)

    def test_inf_norm(self, random_field):
        assert lp_norm(random_field, math.inf) == np.abs(random_field.data).max()

    @settings(max_examples=20, deadline=None)
    @given(c_re=st.floats(-50, 50), c_im=st.floats(-50, 50),
           p=st.sampled_from([1.0, 1.5, 20 / 11, 2.0, 3.0, 4.0]))
    def test_homogeneous(self, c_re, c_im, p):
        g = make_grid(16, 16, 4.0, 4.0)
        f = random_band_limited(g, 5, (0.0, 4.0))
        c = complex(c_re, c_im)
        assert lp_norm(c * f, p) == pytest.approx(abs(c) * lp_norm(f, p), rel=1e-12, abs=1e-300)

    def test_rejects_small_p(self, random_field):
        with pytest.raises(GridError):
            lp_norm(random_field, 0.5)


class TestField:
    def test_immutable(self, random_field):
        with pytest.raises(ValueError):
            random_field.data[0, 0] = 1.0

    def test_shape_checked(self, small_grid):
        with pytest.raises(GridError):
            Field(small_grid, np.zeros((3, 3)))

    def test_mixing_reps_rejected(self, random_field):
        with pytest.raises(GridError):
            random_field + to_frequency(random_field)

    def test_container_round_trip(self, tmp_path, random_field):
        p = save_field(tmp_path / "f.field", random_field, seed=3)
        back = load_field(p)
        assert back.grid == random_field.grid and back.rep == PHYSICAL
        np.testing.assert_allclose(back.data, random_field.data, atol=1e-6)
