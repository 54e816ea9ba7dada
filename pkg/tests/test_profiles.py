import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erfcinv

from hnlslab.grid import Field, l2_norm, make_grid, synthesize_gaussian
from hnlslab.norms import anisotropic_sobolev
from hnlslab.profiles import (PROFILE_GRID, ExtractConfig, NoBubble, Profile,
                              SupercriticalProfile, apply_group, apply_group_inverse,
                              bubble, extract_one, gaussian_profile_field,
                              load_decomposition, mass_concentration_windows,
                              orthogonal_bubble_specs, orthogonality_score, pairwise_scores,
                              profile_decompose, save_decomposition, synthesize_bubbles)
from hnlslab.propagator import linear_propagate, linear_trace, translate

# a strip small enough to extract in well under a second
STRIP = make_grid(512, 64, 128.0, 24.0)


@pytest.fixture(scope="module")
def phi():
    return gaussian_profile_field()


@pytest.fixture(scope="module")
def strip_profile(phi):
    return Profile(phi, 0.05, 10.0, 2.0, (5.0, 0.5), 4.0, 1.5)


@pytest.fixture(scope="module")
def strip_bubble(strip_profile):
    return bubble(strip_profile, STRIP) * (0.8 + 0.3j)


@pytest.fixture(scope="module")
def strip_extraction(strip_bubble):
    return extract_one(strip_bubble)


@pytest.fixture(scope="module")
def strip_decomposition(strip_bubble):
    return profile_decompose(strip_bubble, 3)


def _profile(phi, **kw):
    base = dict(t=0.0, x0=0.0, y0=0.0, xi=(0.0, 0.0), lam1=1.0, lam2=1.0)
    base.update(kw)
    return Profile(phi, **base)


class TestProfileValidation:
    def test_rejects_non_unit_profile(self, phi):
        with pytest.raises(ValueError, match="unit"):
            _profile(phi * 2.0)

    @pytest.mark.parametrize("lam", [0.0, -1.0])
    def test_rejects_bad_scale(self, phi, lam):
        with pytest.raises(ValueError, match="positive"):
            _profile(phi, lam1=lam)

    def test_params_round_trip(self, phi):
        p = _profile(phi, t=0.3, x0=1.0, y0=-2.0, xi=(1, 2), lam1=2.0, lam2=0.5)
        assert p.params() == {"t": 0.3, "x0": 1.0, "y0": -2.0, "xi": [1.0, 2.0],
                              "lam1": 2.0, "lam2": 0.5}

    def test_gaussian_profile_is_unit(self):
        assert l2_norm(gaussian_profile_field(mu=0.7)) == pytest.approx(1.0, abs=1e-14)


class TestGroupAction:
    def test_identity_leaves_field_unchanged(self, phi):
        out = apply_group(_profile(phi), phi)
        assert np.max(np.abs(out.physical().data - phi.physical().data)) < 1e-12

    def test_matches_closed_form(self, phi):
        p = _profile(phi, x0=1.5, y0=-0.5, xi=(0.75, -0.5), lam1=2.0, lam2=0.5)
        g = make_grid(256, 128, 48.0, 24.0)
        out = apply_group(p, phi, g)
        X, Y = g.mesh()
        s, r = (X - 1.5) / 2.0, (Y + 0.5) / 0.5
        expect = (np.exp(-(s ** 2 + r ** 2) / 2) / math.sqrt(math.pi)
                  * np.exp(1j * (0.75 * X - 0.5 * Y)))
        assert np.max(np.abs(out.physical().data - expect)) < 1e-10

    @settings(max_examples=15, deadline=None)
    @given(x0=st.floats(-4, 4), y0=st.floats(-4, 4), xi1=st.floats(-1.5, 1.5),
           xi2=st.floats(-1.5, 1.5), lam1=st.floats(0.7, 1.6), lam2=st.floats(0.7, 1.6))
    def test_inverse_undoes_action(self, x0, y0, xi1, xi2, lam1, lam2):
        phi = gaussian_profile_field()
        p = Profile(phi, 0.0, x0, y0, (xi1, xi2), lam1, lam2)
        target = make_grid(256, 256, 48.0, 48.0)
        back = apply_group_inverse(p, apply_group(p, phi, target), PROFILE_GRID)
        assert np.max(np.abs(back.data - phi.physical().data)) < 1e-10

    def test_wraps_to_nearest_image(self, phi):
        g = make_grid(128, 128, 24.0, 24.0)
        a = apply_group(_profile(phi, x0=2.0), phi, g)
        b = apply_group(_profile(phi, x0=2.0 + 24.0), phi, g)
        assert np.max(np.abs(a.data - b.data)) < 1e-12

    def test_supercritical_weight_preserves_half_derivative(self, phi):
        # doubling both scales onto a box twice as wide reuses the same samples
        p = SupercriticalProfile(phi, 0.0, 0.0, 0.0, 2.0, 2.0)
        assert p.xi == (0.0, 0.0)
        big = make_grid(128, 128, 48.0, 48.0)
        out = apply_group(p, phi, big)
        assert np.max(np.abs(out.data - phi.physical().data / math.sqrt(2))) < 1e-12
        assert anisotropic_sobolev(out, 0.5) == pytest.approx(anisotropic_sobolev(phi, 0.5),
                                                               rel=1e-12)

    def test_supercritical_inverse(self, phi):
        p = SupercriticalProfile(phi, 0.0, 0.0, 0.0, 2.0, 2.0)
        big = make_grid(128, 128, 48.0, 48.0)
        back = apply_group_inverse(p, apply_group(p, phi, big), PROFILE_GRID)
        assert np.max(np.abs(back.data - phi.physical().data)) < 1e-12


class TestSynthesis:
    def test_single_bubble_is_group_of_evolved_profile(self, phi, strip_profile):
        direct = apply_group(strip_profile, linear_propagate(phi, strip_profile.t), STRIP)
        out = synthesize_bubbles([(2.0 - 1.0j, strip_profile)], STRIP)
        assert np.max(np.abs(out.data - (2.0 - 1.0j) * direct.data)) < 1e-12

    def test_bubble_is_unit_mass(self, strip_profile):
        assert l2_norm(bubble(strip_profile, STRIP)) == pytest.approx(1.0, abs=1e-10)

    def test_separated_bubbles_add_masses(self, phi):
        specs = [(1.0, Profile(phi, 0.0, -30.0, 0.0, (2.0, 0.0), 2.0, 1.0)),
                 (0.5j, Profile(phi, 0.0, 30.0, 0.0, (-2.0, 0.0), 2.0, 1.0))]
        out = synthesize_bubbles(specs, STRIP)
        assert l2_norm(out) ** 2 == pytest.approx(1.25, abs=1e-6)

    def test_empty_list_gives_zero(self):
        out = synthesize_bubbles([], STRIP)
        assert out.grid == STRIP
        assert not np.any(out.data)


class TestOrthogonalityScore:
    def test_self_score_vanishes(self, phi, strip_profile):
        assert orthogonality_score(strip_profile, strip_profile) == 0.0

    def test_scale_ratio_e(self, phi):
        a, b = _profile(phi), _profile(phi, lam1=math.e)
        assert orthogonality_score(a, b) == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("n", [10, 100, 1000])
    def test_diverges_with_scale_separation(self, phi, n):
        s = orthogonality_score(_profile(phi), _profile(phi, lam1=float(n), lam2=float(n)))
        assert s == pytest.approx(2 * math.log(n))

    @pytest.mark.parametrize("kw", [{"t": 0.5}, {"x0": 1.0}, {"y0": -1.0}, {"xi": (0.0, 1.0)},
                                    {"lam2": 1.5}])
    def test_positive_when_a_parameter_differs(self, phi, kw):
        assert orthogonality_score(_profile(phi), _profile(phi, **kw)) > 0

    def test_position_terms_use_first_profile_time(self, phi):
        a = _profile(phi, t=1.0, xi=(1.0, 0.0))
        b = _profile(phi, t=0.0)
        # xi term 1, time term 1, position term |0 - 0 - 2*1*1| = 2
        assert orthogonality_score(a, b) == pytest.approx(4.0)
        assert orthogonality_score(b, a) == pytest.approx(2.0)

    def test_pairwise_keys(self, phi):
        ps = [_profile(phi), _profile(phi, x0=1.0), _profile(phi, y0=2.0)]
        assert set(pairwise_scores(ps)) == {"0,1", "0,2", "1,0", "1,2", "2,0", "2,1"}

    @pytest.mark.parametrize("seed", [0, 1, 7])
    def test_specs_exceed_threshold(self, seed):
        specs = orthogonal_bubble_specs(seed)
        assert len(specs) == 3
        assert min(pairwise_scores([p for _, p in specs]).values()) > 1e3
        assert orthogonal_bubble_specs(seed)[0][1].params() == specs[0][1].params()


class TestExtractOne:
    def test_recovers_scales_and_frequency(self, strip_extraction, strip_profile):
        q = strip_extraction.profile
        assert 0.5 <= q.lam1 / strip_profile.lam1 <= 2
        assert 0.5 <= q.lam2 / strip_profile.lam2 <= 2
        r = strip_extraction.rect
        assert abs(q.xi[0] - strip_profile.xi[0]) <= 2 * r.lx
        assert abs(q.xi[1] - strip_profile.xi[1]) <= 2 * r.ly

    def test_captures_mass(self, strip_extraction, strip_bubble):
        assert l2_norm(strip_extraction.bubble) ** 2 >= 0.9 * l2_norm(strip_bubble) ** 2
        assert l2_norm(strip_extraction.remainder) < 1e-6 * l2_norm(strip_bubble)

    def test_weight_is_projection(self, strip_extraction, strip_bubble):
        # the unit bubble absorbs everything, so |weight| is the input norm
        assert abs(strip_extraction.weight) == pytest.approx(l2_norm(strip_bubble), rel=1e-8)

    def test_zero_input_raises(self):
        with pytest.raises(NoBubble):
            extract_one(Field(STRIP, np.zeros(STRIP.shape, dtype=complex)))

    def test_floor_raises(self, strip_bubble, strip_extraction):
        cfg = ExtractConfig(floor=2 * strip_extraction.sup_value)
        with pytest.raises(NoBubble) as err:
            extract_one(strip_bubble, cfg)
        assert err.value.floor == cfg.floor

    def test_noise_keeps_rect(self, strip_bubble, strip_extraction):
        rng = np.random.default_rng(3)
        nz = Field(STRIP, rng.standard_normal(STRIP.shape) + 1j * rng.standard_normal(STRIP.shape))
        nz = nz * (0.01 * l2_norm(strip_bubble) / l2_norm(nz))
        assert extract_one(strip_bubble + nz).rect == strip_extraction.rect

    def test_witness_follows_translation(self, strip_bubble, strip_extraction):
        dx, dy = 16 * STRIP.dx, 8 * STRIP.dy
        ex = extract_one(translate(strip_bubble, dx, dy))
        w0, w1 = strip_extraction.witness, ex.witness
        assert ex.rect == strip_extraction.rect
        assert w1[0] - w0[0] == pytest.approx(dx, abs=1e-12)
        assert w1[1] - w0[1] == pytest.approx(dy, abs=1e-12)
        assert w1[2] == pytest.approx(w0[2], abs=1e-9)

    def test_modulated_bubble_is_still_absorbed(self, strip_bubble):
        X, Y = STRIP.mesh()
        a, b = 16 * STRIP.dxi, 4 * STRIP.deta
        m = Field(STRIP, strip_bubble.physical().data * np.exp(1j * (a * X + b * Y)))
        assert l2_norm(extract_one(m).remainder) < 1e-6 * l2_norm(m)


class TestDecompose:
    def test_single_bubble_gives_one_profile(self, strip_decomposition):
        d = strip_decomposition.diagnostics
        assert d["count"] == 1
        assert d["stop"] == "floor"

    def test_reconstruct_is_exact(self, strip_decomposition, strip_bubble):
        diff = strip_decomposition.reconstruct() - strip_bubble
        assert l2_norm(diff) < 1e-12 * l2_norm(strip_bubble)

    def test_remainder_norms_decrease(self, strip_decomposition):
        norms = strip_decomposition.diagnostics["remainder_norms"]
        assert all(b <= a for a, b in zip(norms, norms[1:]))

    def test_defect_small(self, strip_decomposition):
        assert strip_decomposition.diagnostics["decoupling_defect_fraction"] < 1e-8

    def test_two_bubbles(self, phi):
        specs = [(1.0, Profile(phi, 0.0, -30.0, 0.0, (4.0, 0.0), 4.0, 1.5)),
                 (0.7j, Profile(phi, 0.0, 30.0, 3.0, (-4.0, 0.5), 4.0, 1.5))]
        f = synthesize_bubbles(specs, STRIP)
        dec = profile_decompose(f, 2)
        d = dec.diagnostics
        assert d["count"] == 2
        assert d["remainder_mass_fraction"] < 0.05
        assert d["decoupling_defect_fraction"] < 0.05
        assert l2_norm(dec.reconstruct() - f) < 1e-12 * l2_norm(f)
        assert sorted(abs(w) for w, _ in dec.profiles) == pytest.approx([0.7, 1.0], rel=0.05)

    def test_rejects_bad_arguments(self, strip_bubble):
        with pytest.raises(ValueError):
            profile_decompose(strip_bubble, 0)
        with pytest.raises(ValueError):
            profile_decompose(strip_bubble, 1, eps=0.0)

    def test_save_load_round_trip(self, strip_decomposition, tmp_path):
        path = save_decomposition(tmp_path, strip_decomposition)
        assert path.name == "decomposition.json"
        back = load_decomposition(tmp_path)
        assert back.grid == strip_decomposition.grid
        assert back.diagnostics["count"] == 1
        (w0, p0), (w1, p1) = strip_decomposition.profiles[0], back.profiles[0]
        assert w1 == pytest.approx(w0)
        assert p1.params() == p0.params()
        # single-precision container
        assert np.max(np.abs(p1.phi.data - p0.phi.physical().data)) < 1e-6
        assert l2_norm(back.reconstruct() - strip_decomposition.reconstruct()) < 1e-5


@pytest.fixture(scope="module")
def gauss():
    return synthesize_gaussian(make_grid(256, 256, 40.0, 40.0), lam=0.5)


class TestConcentrationWindows:
    @pytest.mark.parametrize("eta", [1e-3, 1e-2, 1e-1])
    def test_gaussian_multiplier(self, gauss, eta):
        # |u|^2 marginals are exp(-x^2) in space and frequency alike, so lam = 1
        # and the four tails sum to 4 M erfc(C)
        m = l2_norm(gauss) ** 2
        w = mass_concentration_windows(linear_trace(gauss, np.array([0.0, 0.5])), eta * m)[0]
        assert w.lam1 == pytest.approx(1.0, abs=1e-12)
        assert w.lam2 == pytest.approx(1.0, abs=1e-12)
        g = gauss.grid
        assert abs(w.C - erfcinv(eta / 4)) <= max(g.dx, g.dxi)

    def test_boosted_centre_drifts(self, gauss):
        g = gauss.grid
        f = synthesize_gaussian(g, lam=0.5, lin=(2j, 1j))
        ws = mass_concentration_windows(linear_trace(f, np.array([0.0, 1.0, 2.0])),
                                        0.01 * l2_norm(f) ** 2)
        for w in ws:
            # the (2, 1) mode travels with velocity (1, 2)
            assert (w.x, w.y) == pytest.approx((w.t, 2 * w.t), abs=1e-9)
            assert w.xi == pytest.approx((2.0, 1.0), abs=1e-9)

    def test_multiplier_decreases_with_eta(self, gauss):
        tr = linear_trace(gauss, np.array([0.0, 0.5]))
        m = l2_norm(gauss) ** 2
        cs = [mass_concentration_windows(tr, e * m)[0].C for e in (1e-4, 1e-3, 1e-2, 1e-1)]
        assert all(b <= a for a, b in zip(cs, cs[1:]))

    @pytest.mark.parametrize("frac", [0.0, 1.5, 2.0])
    def test_eta_outside_range(self, gauss, frac):
        tr = linear_trace(gauss, np.array([0.0, 0.5]))
        with pytest.raises(ValueError, match="eta"):
            mass_concentration_windows(tr, frac * l2_norm(gauss) ** 2)
