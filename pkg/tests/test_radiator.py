import numpy as np
import pytest
from scipy.integrate import quad

from lnpair.efficiency import C, EPS0, Beam, CubeGeometry
from lnpair.errors import InvalidNA
from lnpair.radiator import (DipoleGrid, FarFieldMap, collection_fraction, far_field,
                             forward_backward_ratio, forward_fraction, fresnel_t,
                             half_space_indices, internal_field, nonlinear_polarization,
                             polarization_matrix, sfg_map)
from lnpair.tensor import (ContractedDMatrix, PolarizationVector, Rotation, cube_orientation,
                           expand)

LAM = 780e-9
VACUUM = CubeGeometry(2e-6, n_below=1.0, n_above=1.0)


def dipole_pref(n, lam):
    w = 2 * np.pi * C / lam
    return n * w**4 / (32 * np.pi**2 * EPS0 * C**3)


def rhat_grid(m):
    T, P = np.meshgrid(m.theta, m.phi, indexing="ij")
    return np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1)


def x_beam(lam=1.56e-6, power=1.0):
    return Beam(lam, power, 10e-6, PolarizationVector([1.0, 0.0, 0.0]))


def test_fresnel():
    assert fresnel_t(2.2, 2.2) == 1.0
    assert fresnel_t(1.0, 2.2) == pytest.approx(0.625)


def test_internal_field_entry_sides():
    g = CubeGeometry(2e-6)
    air = internal_field(x_beam(), g, "air", n_cube=2.2)
    glass = internal_field(x_beam(), g, "glass", n_cube=2.2)
    assert air.transmission == pytest.approx(0.625)
    assert np.array_equal(air.k, glass.k)
    # E0 in the entry medium scales as n_entry^-1/2 at fixed intensity
    ratio = abs(glass.amplitude[0]) / abs(air.amplitude[0])
    expected = (fresnel_t(1.45, 2.2) / 0.625) * np.sqrt(1.0 / 1.45)
    assert ratio == pytest.approx(expected, rel=1e-14)
    matched = internal_field(x_beam(), CubeGeometry(2e-6, n_above=2.2), "air", n_cube=2.2)
    assert matched.transmission == 1.0


def test_half_space_indices():
    g = CubeGeometry(2e-6, n_below=1.45, n_above=1.0)
    assert half_space_indices(g, "glass") == (1.45, 1.0)
    assert half_space_indices(g, "air") == (1.0, 1.45)
    with pytest.raises(ValueError):
        half_space_indices(g, "water")


def test_nonlinear_polarization_examples(ln_tensor):
    g = CubeGeometry(2e-6)  # identity orientation: optic axis along z
    zb = Beam(1.56e-6, 1.0, 10e-6, PolarizationVector([0.0, 0.0, 1.0]), (1.0, 0.0, 0.0))
    E = internal_field(zb, g, n_cube=2.2)
    grid = nonlinear_polarization(E, E, ln_tensor, g, 8)
    assert np.all(grid.moments[:, :2] == 0)
    h = grid.cell_size
    expected = EPS0 * 34e-12 * abs(E.amplitude[2]) ** 2 * h**3
    assert np.allclose(np.abs(grid.moments[:, 2]), expected, rtol=1e-12)
    zero = expand(ContractedDMatrix(np.zeros((3, 6))))
    assert not np.any(nonlinear_polarization(E, E, zero, g, 8).moments)
    E1 = internal_field(x_beam(), g, n_cube=2.2)
    E2 = internal_field(Beam(1.56e-6, 1.0, 10e-6, PolarizationVector([0.0, 1.0, 0.0])), g,
                        n_cube=2.1)
    a = nonlinear_polarization(E1, E2, ln_tensor, g, 8).moments
    b = nonlinear_polarization(E2, E1, ln_tensor, g, 8).moments
    assert np.allclose(a, b, rtol=1e-14, atol=0)
    with pytest.raises(ValueError):
        nonlinear_polarization(E1, E2, ln_tensor, g, 4)


def test_single_dipole_donut():
    p = np.array([1.0, 0.0, 0.0]) * 1e-30
    m = far_field(DipoleGrid.points([[0, 0, 0]], [p]), LAM, VACUUM, n_theta=60, n_phi=72)
    r = rhat_grid(m)
    analytic = dipole_pref(1.0, LAM) * 1e-60 * (1 - r[..., 0] ** 2)
    assert np.max(np.abs(m.intensity - analytic)) <= 1e-9 * analytic.max()
    assert forward_backward_ratio(m) == pytest.approx(1.0, abs=1e-12)
    assert np.all(m.intensity >= 0)


def test_two_dipoles_half_wave_null_on_axis():
    p = np.array([1.0, 0.0, 0.0])
    pos = [[0, 0, -LAM / 4], [0, 0, LAM / 4]]
    m = far_field(DipoleGrid.points(pos, [p, p]), LAM, VACUUM, n_theta=90, n_phi=36)
    r = rhat_grid(m)
    af = np.abs(2 * np.cos(np.pi / 2 * r[..., 2])) ** 2
    analytic = dipole_pref(1.0, LAM) * af * (1 - r[..., 0] ** 2)
    assert np.max(np.abs(m.intensity - analytic)) <= 1e-9 * analytic.max()
    # the cells nearest +-z carry almost nothing
    assert m.intensity[0].max() < 1e-6 * m.intensity.max()
    assert m.intensity[-1].max() < 1e-6 * m.intensity.max()


def test_phased_array_forward_backward_oracle():
    k = 2 * np.pi / LAM
    d = LAM / 20
    N = 5
    z = (np.arange(N) - 2) * d
    moments = [np.array([1.0, 0, 0]) * np.exp(1j * k * zz) for zz in z]
    pos = [[0, 0, zz] for zz in z]
    m = far_field(DipoleGrid.points(pos, moments), LAM, VACUUM, n_theta=360, n_phi=72)

    def ring(t):
        af = abs(np.sum(np.exp(1j * k * z * (1 - np.cos(t))))) ** 2
        return af * np.pi * (1 + np.cos(t) ** 2) * np.sin(t)

    fwd = quad(ring, 0, np.pi / 2, epsabs=0, epsrel=1e-12)[0]
    back = quad(ring, np.pi / 2, np.pi, epsabs=0, epsrel=1e-12)[0]
    assert forward_backward_ratio(m) == pytest.approx(fwd / back, rel=1e-4)
    assert forward_backward_ratio(m) > 1


def test_collapsed_grid_is_point_dipole(ln_tensor):
    g = CubeGeometry(1e-6, cube_orientation(30.0), 1.0, 1.0)
    lab = g.lab_tensor(ln_tensor)
    E = internal_field(x_beam(), g, n_cube=2.2)
    grid = nonlinear_polarization(E, E, lab, g, 8).collapsed()
    m = far_field(grid, 780e-9, g, n_theta=40, n_phi=48)
    p = grid.moments[0]
    r = rhat_grid(m)
    perp = p[None, None, :] - r * np.sum(r * p, axis=-1)[..., None]
    analytic = dipole_pref(1.0, 780e-9) * np.sum(np.abs(perp) ** 2, axis=-1)
    assert np.max(np.abs(m.intensity - analytic)) <= 1e-9 * analytic.max()


def test_isotropic_cone_fraction():
    th = (np.arange(180) + 0.5) * np.pi / 180
    ph = np.arange(36) * 2 * np.pi / 36
    iso = FarFieldMap(th, ph, np.zeros((180, 36, 3)), np.ones((180, 36)), 1.0, 1.0, LAM)
    assert iso.total_power() == pytest.approx(4 * np.pi, rel=1e-12)
    for na in (0.3, 0.65, 0.9):
        a = np.arcsin(na)
        assert collection_fraction(iso, na) == pytest.approx((1 - np.cos(a)) / 2, abs=1e-12)
    both = collection_fraction(iso, 1.0, "forward") + collection_fraction(iso, 1.0, "backward")
    assert both == pytest.approx(1.0, abs=1e-12)
    for bad in (0.0, -0.1, 1.2):
        with pytest.raises(InvalidNA):
            collection_fraction(iso, bad)


@pytest.fixture(scope="module")
def cube_maps(ln_tensor):
    g = CubeGeometry(2e-6, cube_orientation(0.0))
    lab = g.lab_tensor(ln_tensor)
    pol = PolarizationVector.in_plane(0.0)
    return {side: sfg_map(lab, g, 1.56e-6, 1.56e-6, pol, pol, side) for side in ("air", "glass")}


def test_cube_map_summary(cube_maps):
    for m in cube_maps.values():
        assert np.all(m.intensity >= 0)
        f = collection_fraction(m, 0.65)
        assert 0 < f < 1
        full = collection_fraction(m, 1.0, "forward") + collection_fraction(m, 1.0, "backward")
        # NA 1 covers a full hemisphere only on the n = 1 side
        assert full <= 1 + 1e-12
    assert forward_fraction(cube_maps["air"]) != pytest.approx(forward_fraction(cube_maps["glass"]),
                                                             rel=1e-3)
    assert forward_backward_ratio(cube_maps["air"]) != forward_backward_ratio(cube_maps["glass"])


def test_resolution_convergence(ln_tensor):
    g = CubeGeometry(2e-6, cube_orientation(0.0))
    lab = g.lab_tensor(ln_tensor)
    pol = PolarizationVector.in_plane(0.0)
    p16 = sfg_map(lab, g, 1.56e-6, 1.56e-6, pol, pol, resolution=16, n_theta=90, n_phi=90).total_power()
    p32 = sfg_map(lab, g, 1.56e-6, 1.56e-6, pol, pol, resolution=32, n_theta=90, n_phi=90).total_power()
    assert abs(p32 - p16) / p16 < 0.01


def test_angular_refinement(ln_tensor):
    g = CubeGeometry(2e-6, cube_orientation(0.0))
    lab = g.lab_tensor(ln_tensor)
    pol = PolarizationVector.in_plane(0.0)
    coarse = sfg_map(lab, g, 1.56e-6, 1.56e-6, pol, pol, resolution=8)
    fine = sfg_map(lab, g, 1.56e-6, 1.56e-6, pol, pol, resolution=8, n_theta=360, n_phi=720)
    assert collection_fraction(coarse, 0.65) == pytest.approx(collection_fraction(fine, 0.65),
                                                              abs=1e-3)


def test_coherent_scaling_phi_origin_and_threads(ln_tensor):
    g = CubeGeometry(2e-6, cube_orientation(0.0))
    E = internal_field(x_beam(), g)
    grid = nonlinear_polarization(E, E, g.lab_tensor(ln_tensor), g, 8)
    m = far_field(grid, 780e-9, g, n_theta=60, n_phi=90)
    assert far_field(grid.scaled(2.0), 780e-9, g, n_theta=60, n_phi=90).total_power() == \
        pytest.approx(4 * m.total_power(), rel=1e-13)
    shifted = far_field(grid, 780e-9, g, n_theta=60, n_phi=90, phi_offset=0.37)
    assert shifted.total_power() == pytest.approx(m.total_power(), rel=1e-6)
    threaded = far_field(grid, 780e-9, g, n_theta=60, n_phi=90, threads=4)
    assert np.array_equal(threaded.intensity, m.intensity)
    with pytest.raises(ValueError):
        far_field(grid, 780e-9, g, n_theta=61)


def test_polarization_matrix_dominance_and_covariance(ln_tensor):
    kw = dict(resolution=8, n_theta=60, n_phi=72)
    g0 = CubeGeometry(2e-6, cube_orientation(0.0))
    M0 = polarization_matrix(ln_tensor, g0, 1.56e-6, 1.56e-6, 0.65, **kw)
    assert np.all(M0 >= 0)
    assert M0[0, 0] > max(M0[0, 1], M0[1, 0], M0[1, 1])
    g90 = CubeGeometry(2e-6, Rotation.about_axis([0, 0, 1], 90.0) @ cube_orientation(0.0))
    M90 = polarization_matrix(ln_tensor, g90, 1.56e-6, 1.56e-6, 0.65, **kw)
    assert np.allclose(M90, M0[::-1, ::-1], rtol=1e-9, atol=0)
    zero = expand(ContractedDMatrix(np.zeros((3, 6))))
    assert not np.any(polarization_matrix(zero, g0, 1.56e-6, 1.56e-6, 0.65, **kw))
