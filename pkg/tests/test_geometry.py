import numpy as np
import pytest

from xlmimo.geometry import (
    ArrayConfig,
    ScattererParams,
    antenna_position,
    exact_distance,
    fresnel_distance,
    rayleigh_distance,
    steering_exact,
    steering_fresnel,
    steering_fresnel_dir,
)


@pytest.fixture
def paper_array():
    return ArrayConfig(256, 8, 16, 2, 30e9)


def test_invariants_of_config(paper_array):
    cfg = paper_array
    assert cfg.m_x == cfg.k_x * cfg.n_x
    assert cfg.m_z == cfg.k_z * cfg.n_z
    assert cfg.spacing_m == pytest.approx(cfg.wavelength_m / 2)
    assert cfg.aperture_m == pytest.approx(
        np.hypot(cfg.m_x - 1, cfg.m_z - 1) * cfg.spacing_m)


def test_config_rejects_nondividing_subarrays():
    with pytest.raises(ValueError):
        ArrayConfig(10, 4, 3, 2, 30e9)


def test_antenna_position_center_of_odd_array():
    cfg = ArrayConfig(3, 3, 1, 1, 30e9)
    assert np.allclose(antenna_position(cfg, 2, 2), [0.0, 0.0, 0.0])


def test_antenna_position_half_integer_offset():
    cfg = ArrayConfig(2, 2, 1, 1, 30e9)
    assert cfg.spacing_m == pytest.approx(0.005)
    assert np.allclose(antenna_position(cfg, 1, 1), [-0.0025, 0.0, -0.0025])


def test_antenna_position_paper_array_corner(paper_array):
    # delta = (-127.5, -3.5) at d = 5 mm
    assert np.allclose(antenna_position(paper_array, 1, 1),
                       [-0.6375, 0.0, -0.0175])


def test_antenna_position_rejects_out_of_range(paper_array):
    with pytest.raises(ValueError):
        antenna_position(paper_array, 0, 1)
    with pytest.raises(ValueError):
        antenna_position(paper_array, 1, 9)


def test_antenna_position_antisymmetric_about_center(paper_array):
    cfg = paper_array
    for mx, mz in [(1, 1), (40, 3), (100, 8)]:
        p = antenna_position(cfg, mx, mz)
        p_ref = antenna_position(cfg, cfg.m_x + 1 - mx, cfg.m_z + 1 - mz)
        assert np.allclose(p, -p_ref)


def test_exact_distance_broadside_center():
    cfg = ArrayConfig(3, 3, 1, 1, 30e9)
    s = ScattererParams(np.pi / 2, np.pi / 2, 10.0)  # broadside: u_x = u_z = 0
    assert abs(s.dir_cos_x) < 1e-15 and abs(s.dir_cos_z) < 1e-15
    assert exact_distance(cfg, s, 2, 2) == pytest.approx(10.0)


def test_exact_distance_pythagoras_limit():
    # r -> 0 with zero direction cosines leaves sqrt(dx^2 + dz^2)
    cfg = ArrayConfig(2, 2, 1, 1, 30e9)
    d = cfg.spacing_m
    s = ScattererParams(np.pi / 2, np.pi / 2, 1e-12)
    got = exact_distance(cfg, s, 1, 1)
    assert got == pytest.approx(np.hypot(d / 2, d / 2), rel=1e-6)


def test_exact_distance_matches_cartesian_norm():
    # oracle: Euclidean norm between antenna position and scatterer coordinates
    rng = np.random.default_rng(42)
    cfg = ArrayConfig(16, 8, 4, 2, 30e9)
    for _ in range(50):
        az = rng.uniform(0, np.pi)
        el = rng.uniform(0.1, np.pi - 0.1)
        r = rng.uniform(1.0, 100.0)
        s = ScattererParams(az, el, r)
        mx = int(rng.integers(1, cfg.m_x + 1))
        mz = int(rng.integers(1, cfg.m_z + 1))
        direct = np.linalg.norm(s.cartesian() - antenna_position(cfg, mx, mz))
        assert exact_distance(cfg, s, mx, mz) == pytest.approx(direct, abs=1e-12)


def test_steering_exact_unit_norm():
    rng = np.random.default_rng(0)
    cfg = ArrayConfig(8, 4, 2, 2, 30e9)
    for _ in range(10):
        s = ScattererParams(rng.uniform(0, np.pi), rng.uniform(0.2, 2.9),
                            rng.uniform(1, 50))
        assert np.linalg.norm(steering_exact(cfg, s)) == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.norm(steering_fresnel(cfg, s)) == pytest.approx(1.0, abs=1e-12)


def test_steering_exact_far_broadside_tends_to_uniform():
    cfg = ArrayConfig(8, 4, 2, 2, 30e9)
    s = ScattererParams(np.pi / 2, np.pi / 2, 1e9)
    a = steering_exact(cfg, s)
    assert np.allclose(a, 1.0 / np.sqrt(cfg.m_total), atol=1e-6)


def test_steering_exact_matches_hand_composition():
    # oracle: compose exact_distance with the exponential, element by element
    cfg = ArrayConfig(2, 2, 1, 1, 30e9)
    s = ScattererParams(0.7, 1.1, 3.0)
    a = steering_exact(cfg, s)
    lam = cfg.wavelength_m
    for mz in range(1, 3):
        for mx in range(1, 3):
            expect = np.exp(-2j * np.pi / lam
                            * (exact_distance(cfg, s, mx, mz) - s.distance_m)) / 2.0
            flat = (mz - 1) * cfg.m_x + (mx - 1)
            assert a[flat] == pytest.approx(expect, abs=1e-12)


def test_steering_fresnel_far_field_linear_phase():
    cfg = ArrayConfig(8, 1, 1, 1, 30e9)
    s = ScattererParams.from_dir_cosines(0.4, 0.0, 1e12)
    a = steering_fresnel(cfg, s)
    # far field: quadratic term vanishes, adjacent-element phase ratio constant
    ratios = a[1:] / a[:-1]
    assert np.allclose(ratios, ratios[0], atol=1e-9)
    expected = np.exp(2j * np.pi / cfg.wavelength_m * cfg.spacing_m * 0.4)
    assert ratios[0] == pytest.approx(expected, abs=1e-9)


def test_steering_fresnel_single_column_reduces_to_z_axis():
    cfg = ArrayConfig(1, 6, 1, 2, 30e9)
    s = ScattererParams.from_dir_cosines(0.0, 0.3, 8.0)
    a = steering_fresnel(cfg, s)
    d = cfg.spacing_m
    dz = cfg.delta_z() * d
    phase = -2 * np.pi / cfg.wavelength_m * (
        -dz * 0.3 + dz**2 * (1 - 0.09) / (2 * 8.0))
    assert np.allclose(a, np.exp(1j * phase) / np.sqrt(6), atol=1e-12)


def test_fresnel_accuracy_at_rayleigh_distance(paper_array):
    s = ScattererParams.from_dir_cosines(0.3, 0.2,
                                         rayleigh_distance(paper_array))
    corr = abs(np.vdot(steering_fresnel(paper_array, s),
                       steering_exact(paper_array, s)))
    assert corr >= 0.95


def test_fresnel_error_decreases_with_distance(paper_array):
    cfg = paper_array
    corr_at = []
    for r in (fresnel_distance(cfg), 2 * fresnel_distance(cfg),
              rayleigh_distance(cfg)):
        s = ScattererParams.from_dir_cosines(0.25, -0.1, r)
        corr_at.append(abs(np.vdot(steering_fresnel(cfg, s),
                                   steering_exact(cfg, s))))
    assert corr_at[0] < corr_at[1] < corr_at[2]


def test_characteristic_distances_d1_30ghz():
    # a 201x1 line at 30 GHz has aperture exactly 200 d = 1 m
    cfg = ArrayConfig(201, 1, 1, 1, 30e9)
    assert cfg.aperture_m == pytest.approx(1.0)
    assert rayleigh_distance(cfg) == pytest.approx(200.0)
    assert fresnel_distance(cfg) == pytest.approx(5.0)


def test_rayleigh_paper_value(paper_array):
    assert rayleigh_distance(paper_array) == pytest.approx(325.37, abs=0.01)


def test_rayleigh_halves_when_wavelength_doubles():
    a = ArrayConfig(16, 4, 4, 2, 30e9)
    b = ArrayConfig(16, 4, 4, 2, 15e9)
    # doubling the wavelength doubles D (half-wavelength spacing) so the
    # ratio is 2 D_a^2/lam_a over 2 (2 D_a)^2/(2 lam_a) = 1/2
    assert rayleigh_distance(a) / rayleigh_distance(b) == pytest.approx(0.5)


def test_rayleigh_halves_at_fixed_aperture():
    cfg = ArrayConfig(16, 4, 4, 2, 30e9)
    d_ap = cfg.aperture_m
    assert 2 * d_ap**2 / (2 * cfg.wavelength_m) == pytest.approx(
        rayleigh_distance(cfg) / 2)


def test_scatterer_rejects_unrealizable_direction():
    with pytest.raises(ValueError):
        ScattererParams.from_dir_cosines(0.9, 0.9, 5.0)
    with pytest.raises(ValueError):
        ScattererParams(0.0, np.pi / 2, -1.0)


def test_dictionary_batch_matches_single_calls():
    cfg = ArrayConfig(8, 4, 2, 2, 30e9)
    ux = np.array([0.1, -0.4, 0.8])
    uz = np.array([0.0, 0.3, -0.5])
    r = np.array([5.0, 9.0, 14.0])
    batch = steering_fresnel_dir(cfg, ux, uz, r)
    for j in range(3):
        s = ScattererParams.from_dir_cosines(ux[j], uz[j], r[j])
        assert np.allclose(batch[:, j], steering_fresnel(cfg, s), atol=1e-14)
