"""Laguerre-Gaussian field synthesis and mode algebra.

Transverse fields are sampled on square grids with a physical pixel pitch
and integrated with the midpoint rule.  The module provides

* ``lg_field`` -- a normalized Laguerre-Gaussian mode LG_p^l at an axial
  plane z, including curvature and Gouy phase terms,
* ``overlap`` -- the discretized L2 inner product used to model coupling
  into a single-mode fiber,
* ``hg_superposition`` -- two-lobed TEM01-type superpositions of the
  LG^{+1} and LG^{-1} modes, the carrier of the equatorial qubit states,
* ``dark_axis_angle`` -- the orientation of the nodal line of such a
  superposition as a function of its relative phase.

Conventions
-----------
Mode-plane angles (dark-axis orientations) live in [0, pi); relative
phases live in [0, 2*pi).  The azimuthal factor (sqrt(2) r / w)^|l|
e^{i l theta} is evaluated as a polynomial in (x + i*sign(l)*y), which is
smooth through the axis and exactly zero at r = 0 for |l| > 0.

The generalized Laguerre polynomial takes the dimensionless argument
2 r^2 / w(z)^2 and is evaluated by the three-term recurrence, which is
stable for the low orders used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Relative phases of the four named equal-weight superpositions
# (horizontal, diagonal, vertical, anti-diagonal two-lobed modes).
MODE_PHASES = {
    "H": 0.0,
    "D": 0.5 * math.pi,
    "V": math.pi,
    "A": 1.5 * math.pi,
}

# Minimum fraction of mode energy a grid must capture.
ENERGY_CAPTURE_THRESHOLD = 0.9999


class GridTooSmallError(ValueError):
    """Grid does not capture enough mode energy for trustworthy quadrature."""


class GridMismatchError(ValueError):
    """Two fields do not share the same sampling grid."""


class InvalidGeometryError(ValueError):
    """Beam geometry violates w0 > 0 or wavelength > 0."""


def wrap_phase(phi: float) -> float:
    """Reduce a relative phase to [0, 2*pi)."""
    return float(np.mod(phi, TWO_PI))


def fold_angle(alpha: float) -> float:
    """Reduce a mode-plane angle to [0, pi)."""
    return float(np.mod(alpha, math.pi))


@dataclass(frozen=True)
class ModeIndex:
    """Azimuthal index l (OAM per photon in hbar units) and radial index p >= 0."""

    l: int
    p: int = 0

    def __post_init__(self):
        if self.p < 0:
            raise ValueError(f"radial index p must be >= 0, got {self.p}")

    @property
    def order(self) -> int:
        return abs(self.l) + 2 * self.p


@dataclass(frozen=True)
class BeamGeometry:
    """Waist w0, wavelength and axial position of a paraxial beam.

    Derived quantities follow the usual Gaussian-beam relations:
    Rayleigh length z_R = pi w0^2 / lambda, spot size
    w(z) = w0 sqrt(1 + (z/z_R)^2), Gouy phase arctan(z/z_R) and the
    inverse radius of curvature z / (z^2 + z_R^2), which is finite at
    the waist.
    """

    w0: float
    wavelength: float
    z: float = 0.0

    def __post_init__(self):
        if not (self.w0 > 0.0) or not (self.wavelength > 0.0):
            raise InvalidGeometryError(
                f"need w0 > 0 and wavelength > 0, got w0={self.w0}, "
                f"wavelength={self.wavelength}"
            )

    @property
    def rayleigh_length(self) -> float:
        return math.pi * self.w0**2 / self.wavelength

    @property
    def spot_size(self) -> float:
        return self.w0 * math.sqrt(1.0 + (self.z / self.rayleigh_length) ** 2)

    @property
    def gouy_phase(self) -> float:
        return math.atan2(self.z, self.rayleigh_length)

    @property
    def inverse_curvature(self) -> float:
        return self.z / (self.z**2 + self.rayleigh_length**2)

    @property
    def wavenumber(self) -> float:
        return TWO_PI / self.wavelength


@dataclass(frozen=True)
class GridSpec:
    """Square sampling grid: n x n pixel centers spanning +- half_width."""

    n: int
    half_width: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"grid needs n >= 2, got {self.n}")
        if not (self.half_width > 0.0):
            raise ValueError(f"half_width must be > 0, got {self.half_width}")

    @property
    def pitch(self) -> float:
        return 2.0 * self.half_width / self.n

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """1-D pixel-center coordinates (x along columns, y along rows)."""
        step = self.pitch
        offs = (np.arange(self.n) + 0.5) * step - self.half_width
        return offs + self.center[0], offs + self.center[1]

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        x, y = self.axes()
        return np.meshgrid(x, y)


def reference_grid(mode: ModeIndex, geom: BeamGeometry, n: int = 256) -> GridSpec:
    """Default grid for a mode: 4 w(z) half-width up to order |l|+2p = 5.

    Higher orders scale the half-width as sqrt((|l| + 2p + 1) / 6) so the
    captured energy stays above ``ENERGY_CAPTURE_THRESHOLD``.
    """
    w = geom.spot_size
    scale = max(1.0, math.sqrt((mode.order + 1) / 6.0))
    return GridSpec(n=n, half_width=4.0 * w * scale)


@dataclass(frozen=True)
class ComplexField:
    """Sampled complex transverse field on a square grid.

    ``samples[i, j]`` is the amplitude at x = x_j, y = y_i (pixel
    centers); the midpoint-rule element of area is pitch**2.
    """

    samples: np.ndarray
    pitch: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 2:
            raise ValueError(f"samples must be square with n >= 2, got {arr.shape}")
        if not (self.pitch > 0.0):
            raise ValueError(f"pitch must be > 0, got {self.pitch}")
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.n, 0.5 * self.n * self.pitch, self.center)

    def power(self) -> float:
        """Quadrature L2 norm squared (total power)."""
        return float(np.sum(np.abs(self.samples) ** 2) * self.pitch**2)

    def norm(self) -> float:
        return math.sqrt(self.power())

    def intensity(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def same_grid(self, other: "ComplexField") -> bool:
        return (
            self.n == other.n
            and math.isclose(self.pitch, other.pitch, rel_tol=1e-12, abs_tol=0.0)
            and math.isclose(self.center[0], other.center[0], rel_tol=1e-12, abs_tol=1e-15)
            and math.isclose(self.center[1], other.center[1], rel_tol=1e-12, abs_tol=1e-15)
        )


@dataclass(frozen=True)
class EquatorialSuperposition:
    """Equal-norm pair of LG^{+1}/LG^{-1} weights with a relative phase.

    ``relative_phase`` is stored in [0, 2*pi); the real non-negative
    amplitudes (a, b) must satisfy a**2 + b**2 = 1.
    """

    relative_phase: float
    amplitudes: tuple[float, float] = (math.sqrt(0.5), math.sqrt(0.5))

    def __post_init__(self):
        a, b = self.amplitudes
        if a < 0.0 or b < 0.0:
            raise ValueError("amplitudes must be non-negative")
        if abs(a * a + b * b - 1.0) > 1e-12:
            raise ValueError(f"amplitudes must satisfy a^2 + b^2 = 1, got {a*a + b*b}")
        object.__setattr__(self, "relative_phase", wrap_phase(self.relative_phase))

    @classmethod
    def named(cls, name: str) -> "EquatorialSuperposition":
        """One of the four equal-weight modes H, D, V, A."""
        try:
            phase = MODE_PHASES[name.upper()]
        except KeyError:
            raise KeyError(f"unknown mode name {name!r}; expected one of H, D, V, A")
        return cls(relative_phase=phase)


def _genlaguerre(n: int, alpha: int, x: np.ndarray) -> np.ndarray:
    """Generalized Laguerre polynomial L_n^alpha by the three-term recurrence."""
    if n == 0:
        return np.ones_like(x)
    prev = np.ones_like(x)
    cur = 1.0 + alpha - x
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur


def lg_amplitude(
    mode: ModeIndex, geom: BeamGeometry, x: np.ndarray, y: np.ndarray
) -> np.ndarray:
    """Laguerre-Gaussian amplitude at arbitrary transverse points.

    Returns the unit-power LG_p^l field at geometry ``geom`` evaluated at
    physical coordinates (x, y) relative to the beam axis.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = geom.spot_size
    la = abs(mode.l)
    r2 = x * x + y * y

    norm = math.sqrt(2.0 / math.pi * math.factorial(mode.p) / math.factorial(la + mode.p))
    # (sqrt(2) r / w)^|l| e^{i l theta} as an exact polynomial in x, y
    if mode.l == 0:
        azimuthal = np.ones_like(x, dtype=np.complex128)
    else:
        s = 1.0 if mode.l > 0 else -1.0
        azimuthal = ((x + 1j * s * y) * (math.sqrt(2.0) / w)) ** la

    radial = np.exp(-r2 / w**2) * _genlaguerre(mode.p, la, 2.0 * r2 / w**2)
    phase = np.exp(
        1j * ((mode.order + 1) * geom.gouy_phase - 0.5 * geom.wavenumber * r2 * geom.inverse_curvature)
    )
    return (norm / w) * azimuthal * radial * phase


def lg_field(mode: ModeIndex, geom: BeamGeometry, grid: GridSpec | None = None) -> ComplexField:
    """Sample a normalized LG mode on a grid.

    Raises ``GridTooSmallError`` when the grid captures less than
    ``ENERGY_CAPTURE_THRESHOLD`` of the mode power, i.e. when the
    quadrature can no longer be trusted.
    """
    if grid is None:
        grid = reference_grid(mode, geom)
    xx, yy = grid.meshgrid()
    samples = lg_amplitude(mode, geom, xx, yy)
    out = ComplexField(samples, grid.pitch, grid.center)
    captured = out.power()
    if captured < ENERGY_CAPTURE_THRESHOLD:
        raise GridTooSmallError(
            f"grid captures {captured:.6f} of mode power for l={mode.l}, p={mode.p}; "
            f"need >= {ENERGY_CAPTURE_THRESHOLD}"
        )
    return out


def overlap(f: ComplexField, g: ComplexField) -> complex:
    """Discretized inner product <f|g> = sum conj(f) g * pitch^2.

    This is the quantity that governs coupling of g into a single-mode
    filter matched to f.  Both fields must share the sampling grid.
    """
    if not f.same_grid(g):
        raise GridMismatchError(
            f"grids differ: n={f.n}/{g.n}, pitch={f.pitch}/{g.pitch}, "
            f"center={f.center}/{g.center}"
        )
    return complex(np.vdot(f.samples, g.samples) * f.pitch**2)


def hg_superposition(
    sup: EquatorialSuperposition, geom: BeamGeometry, grid: GridSpec | None = None
) -> ComplexField:
    """Field a*LG^{+1} + b*e^{i phi}*LG^{-1} on a shared grid.

    For a = b the intensity is a two-lobed pattern with a nodal line
    through the center at ``dark_axis_angle(phi)``.
    """
    if grid is None:
        grid = reference_grid(ModeIndex(l=1), geom)
    a, b = sup.amplitudes
    plus = lg_field(ModeIndex(l=+1), geom, grid)
    minus = lg_field(ModeIndex(l=-1), geom, grid)
    samples = a * plus.samples + b * np.exp(1j * sup.relative_phase) * minus.samples
    return ComplexField(samples, grid.pitch, grid.center)


def dark_axis_angle(phi: float) -> float:
    """Orientation of the nodal line of LG^{+1} + e^{i phi} LG^{-1}.

    Returns (phi - pi) / 2 reduced to [0, pi); the two-lobed intensity
    pattern is pi-periodic in this angle.
    """
    return fold_angle((phi - math.pi) / 2.0)
