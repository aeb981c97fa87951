import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from nmchannel import channel as ch
from nmchannel.errors import ConfigurationError, NumericalError, ParameterDomainError

SIGMA_86 = 8.6 / (2 * math.sqrt(2 * math.log(2)))

# oracle: 1 / dense trapezoid (2e6 nodes) of exp(-t^2/2s^2) over [-5, 5]
PEAK_INTENSITY_86 = 0.13176531232231856
# oracle: erf-mass sum over pixel/mask pieces, default grating, a = 0.476
REVIVAL_EPS_0476 = 0.7544784691103047


def test_geometry_derived_quantities(geometry):
    assert geometry.angular_resolution == pytest.approx(0.30303, abs=1e-5)
    assert round(geometry.angular_resolution, 1) == 0.3
    assert geometry.aperture == pytest.approx(10.0)
    assert geometry.mask_period == pytest.approx(4.0)
    assert geometry.phase_slope(0.1) == pytest.approx(330.0)


@pytest.mark.parametrize("field", ["slit_distance_D", "slm_distance_L", "pixel_pitch_h", "slit_width"])
def test_geometry_rejects_nonpositive(field):
    kw = dict(slit_distance_D=500, slm_distance_L=330, pixel_pitch_h=100, slit_width=5)
    kw[field] = 0.0
    with pytest.raises(ParameterDomainError):
        ch.ChannelGeometry(**kw)


def test_spectrum_validation():
    with pytest.raises(ParameterDomainError):
        ch.AngularSpectrum(-1.0, 10.0)
    with pytest.raises(ParameterDomainError):
        ch.AngularSpectrum(8.6, 0.0)
    with pytest.raises(ParameterDomainError):
        ch.AngularSpectrum(8.6, 10.0, fwhm_of="phase")


def test_amplitude_fwhm_is_sqrt2_wider():
    amp = ch.AngularSpectrum(8.6, 10.0, fwhm_of="amplitude")
    assert amp.intensity_fwhm == pytest.approx(8.6 / math.sqrt(2))


def test_intensity_peak_matches_dense_trapezoid():
    spec = ch.AngularSpectrum(8.6, 10.0)
    oracle = oracles.dense_trapezoid_peak(SIGMA_86, 10.0)
    assert oracle == pytest.approx(PEAK_INTENSITY_86, rel=1e-12)
    assert ch.intensity(spec, None, 0.0) == pytest.approx(oracle, rel=1e-9)


def test_intensity_zero_outside_aperture():
    spec = ch.AngularSpectrum(8.6, 10.0)
    assert ch.intensity(spec, None, 5.01) == 0.0
    assert ch.intensity(spec, None, -7.0) == 0.0


def test_intensity_identity_mask():
    spec = ch.AngularSpectrum(8.6, 10.0)
    theta = np.linspace(-5, 5, 41)
    np.testing.assert_array_equal(ch.intensity(spec, ch.GratingMask(4.0, 1.0), theta),
                                  ch.intensity(spec, None, theta))


def test_intensity_blocked_region():
    spec = ch.AngularSpectrum(8.6, 10.0)
    assert ch.intensity(spec, ch.GratingMask(4.0, 0.4), 1.5) == 0.0


@pytest.mark.parametrize("masked", [False, True])
def test_intensity_normalised(spectrum, mask, masked):
    m = mask if masked else None
    t = np.linspace(-5, 5, 400_001)
    assert np.trapezoid(ch.intensity(spectrum, m, t), t) == pytest.approx(1.0, abs=1e-4)


def test_mask_shape():
    m = ch.GratingMask(4.0, 0.4)
    assert m.transmission(0.0) == 1.0
    assert m.transmission(0.79) == 1.0
    assert m.transmission(0.81) == 0.0
    assert m.transmission(4.0) == 1.0
    np.testing.assert_allclose(m.edges(-5, 5), [-4.8, -3.2, -0.8, 0.8, 3.2, 4.8])
    t = np.linspace(-20, 20, 801)
    np.testing.assert_array_equal(m.transmission(t), m.transmission(t + 4.0))


def test_mask_validation():
    with pytest.raises(ParameterDomainError):
        ch.GratingMask(0.0, 0.4)
    with pytest.raises(ParameterDomainError):
        ch.GratingMask(4.0, 0.0)
    with pytest.raises(ParameterDomainError):
        ch.GratingMask(4.0, 1.2)


def test_slm_validity_bound():
    with pytest.raises(ParameterDomainError):
        ch.SlmPhaseProfile(2 * math.pi)
    ch.SlmPhaseProfile(6.0)


def test_zero_slope_gives_unity(spectrum, mask, geometry):
    for m in (None, mask):
        for disc in (True, False):
            eps = ch.decoherence_factor(spectrum, m, geometry, ch.SlmPhaseProfile(0.0, discretized=disc))
            assert eps.value == pytest.approx(1.0, abs=1e-14)


def test_untruncated_gaussian_limit(geometry):
    spec = ch.AngularSpectrum(8.6, 50 * 8.6)
    eps = ch.decoherence_factor(spec, None, geometry, ch.SlmPhaseProfile(0.1, discretized=False))
    alpha = 0.1 * 330.0 / 0.1 * 1e-3   # rad per mrad
    expected = math.exp(-0.5 * (SIGMA_86 * alpha) ** 2)
    assert eps.value.real == pytest.approx(expected, abs=1e-9)
    assert abs(eps.value.imag) < 1e-9


@pytest.mark.parametrize("a", [0.05, 0.1, 0.23, 0.35, 0.476, 0.6])
@pytest.mark.parametrize("masked", [False, True])
def test_quadrature_matches_erf_oracles(spectrum, mask, geometry, a, masked):
    m = mask if masked else None
    kw = dict(mask_period=4.0, open_fraction=0.4) if masked else {}
    disc = ch.decoherence_factor(spectrum, m, geometry, ch.SlmPhaseProfile(a))
    cont = ch.decoherence_factor(spectrum, m, geometry, ch.SlmPhaseProfile(a, discretized=False))
    zeta = geometry.angular_resolution
    assert abs(disc.value - oracles.eps_discretized(spectrum.sigma, 10.0, zeta, a, **kw)) < 1e-9
    assert abs(cont.value - oracles.eps_continuous(spectrum.sigma, 10.0, a / zeta, **kw)) < 1e-8


def test_revival_is_local_maximum(spectrum, mask, geometry):
    vals = [abs(ch.decoherence_factor(spectrum, mask, geometry, ch.SlmPhaseProfile(a)).value)
            for a in (0.466, 0.476, 0.486)]
    assert vals[1] > vals[0] and vals[1] > vals[2]
    assert vals[1] == pytest.approx(REVIVAL_EPS_0476, abs=1e-9)


def test_quadrature_error_carries_residual(spectrum, mask, geometry):
    with pytest.raises(NumericalError) as info:
        ch.decoherence_factor(spectrum, mask, geometry, ch.SlmPhaseProfile(0.5, discretized=False),
                              nodes=16, tolerance=1e-12)
    assert info.value.residual > 1e-12


def test_visibility_examples():
    assert ch.visibility(1.0, 0.881) == pytest.approx(0.881)
    assert ch.visibility(0.0, 0.5) == 0.0
    assert ch.visibility(0.5 + 0j, 1.0) == pytest.approx(0.5)
    assert ch.visibility(-0.2, 1.0) == 0.0
    assert ch.visibility(ch.DecoherenceFactor(0.5 + 0.1j), 1.0) == pytest.approx(0.5)
    with pytest.raises(ParameterDomainError):
        ch.visibility(0.5, 1.5)


def test_sweep_single_zero_point(spectrum, mask, geometry):
    curve = ch.sweep_visibility(spectrum, mask, geometry, [0.0], 1.0)
    assert list(curve) == [(0.0, pytest.approx(1.0))]


def test_sweep_order_and_determinism(spectrum, mask, geometry):
    grid = [0.3, 0.1, 0.5, 0.2]
    c1 = ch.sweep_visibility(spectrum, mask, geometry, grid, 0.881)
    c2 = ch.sweep_visibility(spectrum, mask, geometry, grid, 0.881)
    np.testing.assert_array_equal(c1.a, grid)
    np.testing.assert_array_equal(c1.eps, c2.eps)
    for a, v in c1:
        single = ch.decoherence_factor(spectrum, mask, geometry, ch.SlmPhaseProfile(a))
        assert v == pytest.approx(0.881 * max(0.0, single.real), abs=1e-12)
    assert c1.converged.all()


def test_sweep_rejects_out_of_bound(spectrum, geometry):
    with pytest.raises(ParameterDomainError):
        ch.sweep_visibility(spectrum, None, geometry, [0.1, 7.0])


def test_unmasked_main_lobe_decays(spectrum, geometry):
    grid = np.linspace(0.0, 0.3, 61)
    v = ch.sweep_visibility(spectrum, None, geometry, grid).v_ideal
    assert np.all(np.diff(v) <= 0)


def test_masked_sweep_peak(spectrum, mask, geometry):
    grid = np.round(np.arange(0.105, 0.6001, 0.005), 3)
    v = ch.sweep_visibility(spectrum, mask, geometry, grid).v_ideal
    assert abs(grid[np.argmax(v)] - 0.476) <= 0.005


def test_revival_parameter(geometry):
    assert ch.revival_parameter(geometry) == pytest.approx(0.476, abs=5e-4)
    doubled = ch.ChannelGeometry(500, 330, 100, 5, 4.0, 1.6)
    assert ch.revival_parameter(doubled) == pytest.approx(ch.revival_parameter(geometry) / 2, rel=1e-14)
    assert ch.revival_parameter(doubled) == pytest.approx(0.238, abs=5e-4)


def test_revival_parameter_two_forms_agree(geometry):
    alpha_rev = 2 * math.pi / (geometry.mask_period * 1e-3)
    assert alpha_rev == pytest.approx(1570.8, abs=0.05)
    via_alpha = alpha_rev * geometry.pixel_pitch_h * 1e-6 / (geometry.slm_distance_L * 1e-3)
    assert ch.revival_parameter(geometry) == pytest.approx(via_alpha, rel=1e-12)


def test_revival_parameter_needs_grating():
    with pytest.raises(ConfigurationError):
        ch.revival_parameter(ch.ChannelGeometry(500, 330, 100, 5))


def test_identity_mask_invariance(spectrum, geometry):
    a = np.linspace(-0.5, 0.5, 11)
    plain, _ = ch.decoherence_curve(spectrum, None, geometry, a)
    ident, _ = ch.decoherence_curve(spectrum, ch.GratingMask(4.0, 1.0), geometry, a)
    assert np.max(np.abs(plain - ident)) < 1e-12


def test_symmetric_spectrum_is_real(spectrum, mask, geometry):
    a = np.linspace(-0.6, 0.6, 25)
    for m in (None, mask):
        for disc in (True, False):
            eps, _ = ch.decoherence_curve(spectrum, m, geometry, a, disc)
            assert np.max(np.abs(eps.imag)) < 1e-9


def test_conjugate_symmetry_offset_spectrum(geometry):
    spec = ch.AngularSpectrum(8.6, 10.0, center_offset=1.3)
    a = np.linspace(0.02, 0.5, 9)
    pos, _ = ch.decoherence_curve(spec, None, geometry, a)
    neg, _ = ch.decoherence_curve(spec, None, geometry, -a)
    assert np.max(np.abs(pos.imag)) > 1e-3
    assert np.max(np.abs(neg - pos.conj())) < 1e-12


def test_discretisation_bound_unmasked(spectrum, geometry):
    a = np.linspace(0.0, 0.5, 51)
    d, _ = ch.decoherence_curve(spectrum, None, geometry, a, True)
    c, _ = ch.decoherence_curve(spectrum, None, geometry, a, False)
    assert np.max(np.abs(d - c)) < 1e-3


def test_discretisation_converges_as_pixels_shrink(spectrum, mask, geometry):
    a = np.linspace(0.0, 0.5, 26)
    cont, _ = ch.decoherence_curve(spectrum, mask, geometry, a, False)
    errs = []
    for scale in (1, 10):
        g = ch.ChannelGeometry(500, 330 * scale, 100, 5, 2.0, 0.8)
        d, _ = ch.decoherence_curve(spectrum, mask, g, a / scale, True)
        errs.append(np.max(np.abs(d - cont)))
    assert errs[1] < errs[0] / 50
    assert errs[1] < 1e-4


def test_quadrature_doubling(spectrum, mask, geometry):
    a = np.linspace(0.0, 0.6, 13)
    for m in (None, mask):
        for disc in (True, False):
            _, res = ch.decoherence_curve(spectrum, m, geometry, a, disc)
            assert res.max() < 1e-8


def test_periodic_mask_revival_spacing(geometry):
    # wide flat-ish envelope approximates the infinite periodic grating
    spec = ch.AngularSpectrum(400.0, 80.0)
    m = ch.GratingMask(4.0, 0.4)
    period_a = 2 * math.pi / 4.0 * geometry.angular_resolution
    grid = np.linspace(0.05, 1.5 * period_a, 301)
    eps, _ = ch.decoherence_curve(spec, m, geometry, grid, discretized=False)
    peak = grid[np.argmax(np.abs(eps))]
    assert abs(peak - period_a) <= grid[1] - grid[0]
    e1, _ = ch.decoherence_curve(spec, m, geometry, [0.1, 0.1 + period_a], discretized=False)
    assert abs(abs(e1[0]) - abs(e1[1])) < 0.02


@settings(max_examples=60, deadline=None)
@given(fwhm=st.floats(0.5, 30), aperture=st.floats(1, 40), a=st.floats(-3, 3),
       period=st.floats(0.5, 10), frac=st.floats(0.05, 1.0), offset=st.floats(-2, 2),
       disc=st.booleans())
def test_eps_bounded(fwhm, aperture, a, period, frac, offset, disc):
    g = ch.ChannelGeometry(500, 330, 100, 5)
    spec = ch.AngularSpectrum(fwhm, aperture)
    m = ch.GratingMask(period, frac, offset)
    try:
        eps, _ = ch.decoherence_curve(spec, m, g, [a], disc, nodes=2 ** 12, tolerance=None)
    except ParameterDomainError:
        return  # mask closes the whole aperture
    assert abs(eps[0]) <= 1 + 1e-12
