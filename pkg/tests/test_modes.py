import math

import numpy as np
import pytest
from scipy.special import genlaguerre as scipy_genlaguerre

from oamtomo import modes
from oamtomo.modes import (
    BeamGeometry,
    ComplexField,
    EquatorialSuperposition,
    GridMismatchError,
    GridSpec,
    GridTooSmallError,
    InvalidGeometryError,
    ModeIndex,
    dark_axis_angle,
    hg_superposition,
    lg_amplitude,
    lg_field,
    overlap,
    reference_grid,
)

GEOM = BeamGeometry(w0=1e-3, wavelength=800e-9, z=0.0)


def test_laguerre_recurrence_matches_reference():
    x = np.linspace(0.0, 30.0, 101)
    for n in range(6):
        for alpha in range(5):
            ours = modes._genlaguerre(n, alpha, x)
            ref = scipy_genlaguerre(n, alpha)(x)
            np.testing.assert_allclose(ours, ref, rtol=1e-10, atol=1e-10)


def test_vortex_amplitude_vanishes_on_axis():
    value = lg_amplitude(ModeIndex(l=1), GEOM, np.array(0.0), np.array(0.0))
    assert value == 0.0


def test_fundamental_gaussian_peaks_at_center_with_unit_norm():
    field = lg_field(ModeIndex(l=0), GEOM)
    intensity = field.intensity()
    peak = np.unravel_index(np.argmax(intensity), intensity.shape)
    center = (field.n // 2, field.n // 2)
    assert all(abs(p - c) <= 1 for p, c in zip(peak, center))
    assert abs(field.norm() - 1.0) < 1e-6


def test_two_ring_mode_against_fine_grid_quadrature():
    # Oracle: the same analytic field sampled on a 4x finer grid.
    mode = ModeIndex(l=2, p=1)
    coarse = lg_field(mode, GEOM, reference_grid(mode, GEOM, n=256))
    fine = lg_field(mode, GEOM, reference_grid(mode, GEOM, n=1024))
    assert abs(coarse.norm() - fine.norm()) < 1e-6
    assert abs(coarse.norm() - 1.0) < 1e-6

    # Radial structure: central null plus one interior zero ring at
    # r = w * sqrt(3/2) where the p = 1 polynomial changes sign.
    w = GEOM.spot_size
    r = np.linspace(0.0, 4.0 * w, 4001)
    profile = np.abs(lg_amplitude(mode, GEOM, r, np.zeros_like(r))) ** 2
    assert profile[0] == 0.0
    window = (r > 0.8 * w) & (r < 2.0 * w)
    interior = profile[window]
    assert interior.min() < 1e-5 * profile.max()
    zero_r = r[window][np.argmin(interior)]
    assert abs(zero_r - w * math.sqrt(1.5)) < 0.01 * w


def test_overlap_normalization_and_azimuthal_orthogonality():
    grid = reference_grid(ModeIndex(l=2), GEOM)
    plus1 = lg_field(ModeIndex(l=1), GEOM, grid)
    minus1 = lg_field(ModeIndex(l=-1), GEOM, grid)
    plus2 = lg_field(ModeIndex(l=2), GEOM, grid)
    assert abs(overlap(plus1, plus1) - 1.0) < 1e-6
    assert abs(overlap(plus1, minus1)) < 1e-8
    assert abs(overlap(plus1, plus2)) < 1e-8


def test_gram_matrix_is_identity():
    indices = [ModeIndex(l, p) for l in range(-3, 4) for p in (0, 1)]
    grid = reference_grid(ModeIndex(3, 1), GEOM)
    fields = [lg_field(m, GEOM, grid) for m in indices]
    gram = np.array([[overlap(f, g) for g in fields] for f in fields])
    off_diagonal = gram - np.diag(np.diag(gram))
    assert np.abs(off_diagonal).max() <= 1e-8
    assert np.abs(np.diag(gram) - 1.0).max() <= 1e-6


def test_overlap_conjugate_symmetry_is_exact():
    rng = np.random.default_rng(7)
    grid = GridSpec(n=32, half_width=1.0)
    f = ComplexField(rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32)), grid.pitch)
    g = ComplexField(rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32)), grid.pitch)
    assert overlap(f, g) == np.conj(overlap(g, f))


def test_overlap_rejects_mismatched_grids():
    f = lg_field(ModeIndex(l=1), GEOM, GridSpec(n=64, half_width=4e-3))
    g = lg_field(ModeIndex(l=1), GEOM, GridSpec(n=64, half_width=5e-3))
    with pytest.raises(GridMismatchError):
        overlap(f, g)


def test_propagation_leaves_rescaled_intensity_invariant():
    mode = ModeIndex(l=1, p=0)
    geom_far = BeamGeometry(w0=GEOM.w0, wavelength=GEOM.wavelength, z=GEOM.rayleigh_length)
    near = lg_field(mode, GEOM, GridSpec(n=128, half_width=4.0 * GEOM.spot_size))
    far = lg_field(mode, geom_far, GridSpec(n=128, half_width=4.0 * geom_far.spot_size))
    scaled_near = near.intensity() * GEOM.spot_size**2
    scaled_far = far.intensity() * geom_far.spot_size**2
    assert np.abs(scaled_near - scaled_far).max() <= 1e-4 * scaled_near.max()


def test_hg_superposition_named_modes():
    grid = reference_grid(ModeIndex(l=1), GEOM)
    # phi = pi (mode V): horizontal dark axis
    v_mode = hg_superposition(EquatorialSuperposition.named("V"), GEOM, grid)
    assert dark_axis_angle(math.pi) == 0.0
    # phi = 0 (mode H): two-lobed with vertical dark axis
    h_mode = hg_superposition(EquatorialSuperposition.named("H"), GEOM, grid)
    assert abs(overlap(v_mode, h_mode)) < 1e-8
    assert abs(v_mode.norm() - 1.0) < 1e-6

    # degenerate superposition reduces to the bare vortex mode
    bare = hg_superposition(
        EquatorialSuperposition(relative_phase=0.3, amplitudes=(1.0, 0.0)), GEOM, grid
    )
    direct = lg_field(ModeIndex(l=1), GEOM, grid)
    np.testing.assert_allclose(bare.samples, direct.samples, atol=1e-12)


@pytest.mark.parametrize(
    "phi,expected",
    [
        (math.pi, 0.0),
        (0.0, math.pi / 2.0),
        (1.5 * math.pi, math.pi / 4.0),
    ],
)
def test_dark_axis_angle_values(phi, expected):
    assert dark_axis_angle(phi) == pytest.approx(expected, abs=1e-12)


def test_dark_axis_angle_is_pi_periodic_in_output():
    for phi in np.linspace(-10.0, 10.0, 41):
        angle = dark_axis_angle(phi)
        assert 0.0 <= angle < math.pi


@pytest.mark.parametrize("phi", [0.0, 0.7, math.pi / 2, 2.3, math.pi, 4.9])
def test_intensity_vanishes_along_dark_axis(phi):
    sup = EquatorialSuperposition(relative_phase=phi)
    grid = reference_grid(ModeIndex(l=1), GEOM)
    field = hg_superposition(sup, GEOM, grid)
    peak = field.intensity().max()

    angle = dark_axis_angle(phi)
    r = np.linspace(-2.0, 2.0, 101) * GEOM.spot_size
    x, y = r * math.cos(angle), r * math.sin(angle)
    along = (
        lg_amplitude(ModeIndex(l=1), GEOM, x, y)
        + np.exp(1j * phi) * lg_amplitude(ModeIndex(l=-1), GEOM, x, y)
    ) / math.sqrt(2.0)
    assert (np.abs(along) ** 2).max() <= 1e-6 * peak


def test_grid_too_small_raises():
    with pytest.raises(GridTooSmallError):
        lg_field(ModeIndex(l=3, p=1), GEOM, GridSpec(n=64, half_width=1.2 * GEOM.w0))


def test_invalid_geometry_raises():
    with pytest.raises(InvalidGeometryError):
        BeamGeometry(w0=-1.0, wavelength=800e-9)
    with pytest.raises(InvalidGeometryError):
        BeamGeometry(w0=1e-3, wavelength=0.0)


def test_mode_index_validation():
    with pytest.raises(ValueError):
        ModeIndex(l=1, p=-1)


def test_superposition_validation():
    with pytest.raises(ValueError):
        EquatorialSuperposition(relative_phase=0.0, amplitudes=(0.9, 0.9))
    sup = EquatorialSuperposition(relative_phase=-1.0)
    assert 0.0 <= sup.relative_phase < 2.0 * math.pi
