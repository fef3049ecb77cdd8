"""Phase-reference camera frames and dark-axis analysis.

A reference beam counter-propagating through the interferometer leaves
the input splitter as the superposition LG^{+1} + e^{i phi} LG^{-1}: a
two-lobed pattern whose dark line sits at alpha_d = (phi - pi)/2.  This
module synthesizes such frames (ideal or deformed) and extracts the
interferometer phase from them.

The analysis routine, applied per frame after optional enhancement:

1. split the disk of interest around the fitted center into N angular
   sectors (N divisible by 8) and average the intensity in each;
2. fold opposite sectors (the pattern is an axis, not a direction);
3. subtract from each folded sector the sector at 90 degrees, so the
   dark axis is scored both for low intensity and for a bright
   perpendicular;
4. smooth over a 45-degree window, angles taken modulo 180 degrees;
5. the minimum sector gives alpha_d; the phase follows as
   phi = 2 alpha_d + pi  (mod 2 pi).

Sector membership uses pixel-center coordinates and floor binning; the
reported angle is the sector center, so the quantization error is at
most half a sector (1.5 degrees for N = 120, i.e. 3 degrees in phi).
Ties in the minimum resolve to the lowest sector index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import ndimage, optimize

from .fieldio import read_pgm, write_pgm
from .modes import BeamGeometry, ModeIndex, lg_amplitude, wrap_phase
from .seeding import spawn_rng

TWO_PI = 2.0 * math.pi


class EmptyBinError(ValueError):
    """An angular sector holds no pixels (disk of interest off the image)."""


class RingFitError(RuntimeError):
    """Ring fit failed to converge or the stack carries no signal."""


@dataclass(frozen=True)
class FrameGeometry:
    """Pixel geometry of synthetic frames: image size, beam waist and center."""

    width: int = 330
    height: int = 330
    waist_px: float = 55.0
    center: tuple[float, float] | None = None

    def __post_init__(self):
        if self.width < 64 or self.height < 64:
            raise ValueError("frames must be at least 64 x 64 pixels")
        if not (self.waist_px > 0.0):
            raise ValueError("waist_px must be > 0")

    @property
    def center_xy(self) -> tuple[float, float]:
        if self.center is not None:
            return self.center
        return ((self.width - 1) / 2.0, (self.height - 1) / 2.0)


@dataclass(frozen=True)
class Defects:
    """Misalignment model for the two interfering beams.

    ``offset_waists`` displaces the LG^{-1} beam by that fraction of the
    waist along ``offset_azimuth_deg``; ``tilt`` applies a linear phase
    of that many radians per waist across the LG^{-1} beam;
    ``lobe_imbalance`` multiplies the intensity of one lobe by (1 + m).
    """

    offset_waists: float = 0.0
    offset_azimuth_deg: float = 0.0
    tilt: float = 0.0
    tilt_azimuth_deg: float = 90.0
    lobe_imbalance: float = 0.0

    def __post_init__(self):
        if abs(self.offset_waists) > 0.5:
            raise ValueError("offset beyond 0.5 waists is outside the model's validity")


@dataclass(frozen=True)
class PhaseFrame:
    """Grayscale camera frame, possibly with synthetic ground truth."""

    pixels: np.ndarray
    exposure: float = 1.0
    truth_phi: float | None = None
    truth_center: tuple[float, float] | None = None
    truth_waist: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.dtype not in (np.uint8, np.uint16):
            raise ValueError(f"pixels must be uint8 or uint16, got {arr.dtype}")
        if arr.ndim != 2 or arr.shape[0] < 64 or arr.shape[1] < 64:
            raise ValueError(f"frames must be 2-D and at least 64 x 64, got {arr.shape}")
        object.__setattr__(self, "pixels", arr)

    @property
    def bit_depth(self) -> int:
        return 8 if self.pixels.dtype == np.uint8 else 16

    @property
    def max_value(self) -> int:
        return 255 if self.bit_depth == 8 else 65535

    def as_float(self) -> np.ndarray:
        return self.pixels.astype(float)

    def to_pgm(self, path: str | Path, comment: str | None = None) -> None:
        write_pgm(self.pixels, path, comment=comment)

    @classmethod
    def from_pgm(cls, path: str | Path, **meta) -> "PhaseFrame":
        return cls(read_pgm(path), **meta)


@dataclass(frozen=True)
class RingFit:
    """Center and disk of interest from the doughnut fit of a frame stack."""

    center: tuple[float, float]
    radius_of_interest: float
    waist: float
    residual: float

    def __post_init__(self):
        if not (self.radius_of_interest > 0.0):
            raise ValueError("radius_of_interest must be > 0")

    def to_json_dict(self) -> dict:
        return {
            "center": [float(self.center[0]), float(self.center[1])],
            "radius_of_interest": float(self.radius_of_interest),
            "waist": float(self.waist),
            "residual": float(self.residual),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "RingFit":
        return cls(
            center=(float(doc["center"][0]), float(doc["center"][1])),
            radius_of_interest=float(doc["radius_of_interest"]),
            waist=float(doc["waist"]),
            residual=float(doc["residual"]),
        )


@dataclass(frozen=True)
class BinProfile:
    """Raw sector intensities I(alpha_k) and the folded, processed profile."""

    n_bins: int
    raw: np.ndarray
    processed: np.ndarray

    def __post_init__(self):
        if self.n_bins % 8 != 0:
            raise ValueError(f"bin count must be divisible by 8, got {self.n_bins}")
        raw = np.asarray(self.raw, dtype=float)
        processed = np.asarray(self.processed, dtype=float)
        if raw.size != self.n_bins or processed.size != self.n_bins // 2:
            raise ValueError("profile lengths must be n_bins and n_bins/2")
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "processed", processed)


@dataclass(frozen=True)
class PhaseExtraction:
    """Result of the per-frame dark-axis analysis."""

    alpha_d: float  # [0, pi)
    phi: float  # [0, 2*pi)
    min_bin: int
    profile: BinProfile
    residual: float  # processed-profile value at the minimum


def synthesize_frame(
    phi: float,
    geometry: FrameGeometry | None = None,
    defects: Defects | None = None,
    background: float = 0.0,
    noise_photons: float | None = None,
    bit_depth: int = 8,
    seed: int = 0,
) -> PhaseFrame:
    """Render |LG^{+1} + e^{i phi} LG^{-1}|^2 onto a pixel grid.

    ``background`` adds a uniform floor as a fraction of the peak;
    ``noise_photons`` switches on shot noise with that many photons at
    the (pre-noise) peak pixel.
    """
    geometry = geometry or FrameGeometry()
    defects = defects or Defects()
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    cx, cy = geometry.center_xy
    w = geometry.waist_px
    cols, rows = np.meshgrid(np.arange(geometry.width), np.arange(geometry.height))
    x = cols - cx
    y = rows - cy
    if x.max() < 2.0 * w or y.max() < 2.0 * w:
        raise ValueError("beam (2 waists) does not fit the frame around its center")

    beam = BeamGeometry(w0=w, wavelength=1.0, z=0.0)
    base = lg_amplitude(ModeIndex(+1), beam, x, y)
    az = math.radians(defects.offset_azimuth_deg)
    dx = defects.offset_waists * w * math.cos(az)
    dy = defects.offset_waists * w * math.sin(az)
    partner = lg_amplitude(ModeIndex(-1), beam, x - dx, y - dy)
    if defects.tilt != 0.0:
        taz = math.radians(defects.tilt_azimuth_deg)
        ramp = (x * math.cos(taz) + y * math.sin(taz)) / w
        partner = partner * np.exp(1j * defects.tilt * ramp)

    intensity = np.abs(base + np.exp(1j * phi) * partner) ** 2
    if defects.lobe_imbalance != 0.0:
        alpha_dark = (phi - math.pi) / 2.0
        side = -x * math.sin(alpha_dark) + y * math.cos(alpha_dark)
        intensity = intensity * (1.0 + defects.lobe_imbalance * (side > 0.0))
    if background > 0.0:
        intensity = intensity + background * intensity.max()

    intensity = intensity / intensity.max()
    if noise_photons is not None:
        rng = spawn_rng(seed, "frame-noise")
        intensity = rng.poisson(intensity * noise_photons) / noise_photons

    max_value = 255 if bit_depth == 8 else 65535
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    pixels = np.clip(np.rint(intensity * max_value), 0, max_value).astype(dtype)
    return PhaseFrame(
        pixels,
        truth_phi=wrap_phase(phi),
        truth_center=(cx, cy),
        truth_waist=w,
    )


def enhance(frame: PhaseFrame) -> PhaseFrame:
    """3x3 median filter followed by a midtone stretch.

    The stretch normalizes to the 1st/99th percentiles and applies the
    smoothstep curve 3t^2 - 2t^3, boosting mid-intensity contrast while
    compressing the extremes.  Flat frames pass through unchanged.  The
    output is widened to 16 bits: the stretch compresses the dark end
    quadratically, and re-quantizing to 8 bits there would erase the
    faint sector-to-sector contrast the dark-axis search relies on.
    """
    data = ndimage.median_filter(frame.as_float(), size=3, mode="reflect")
    lo, hi = np.percentile(data, (1.0, 99.0))
    if hi > lo:
        t = np.clip((data - lo) / (hi - lo), 0.0, 1.0)
        data = t * t * (3.0 - 2.0 * t) * 65535.0
    else:
        data = data / max(frame.max_value, 1) * 65535.0
    pixels = np.clip(np.rint(data), 0, 65535).astype(np.uint16)
    return replace(frame, pixels=pixels)


def intensity_moments(image: np.ndarray) -> tuple[float, float, float]:
    """First/second intensity moments: centroid (cx, cy) and a ring-waist
    estimate sqrt(var_x + var_y)."""
    image = np.asarray(image, dtype=float)
    total = image.sum()
    if total <= 0.0:
        raise RingFitError("image carries no intensity")
    cols, rows = np.meshgrid(np.arange(image.shape[1]), np.arange(image.shape[0]))
    cx = float((image * cols).sum() / total)
    cy = float((image * rows).sum() / total)
    var_x = float((image * (cols - cx) ** 2).sum() / total)
    var_y = float((image * (rows - cy) ** 2).sum() / total)
    return cx, cy, math.sqrt(max(var_x + var_y, 1e-12))


def _ring_model(params: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    amp, cx, cy, w, floor = params
    r2 = (x - cx) ** 2 + (y - cy) ** 2
    w2 = w * w
    return amp * (r2 / w2) * np.exp(-2.0 * r2 / w2) + floor


def fit_ring(frames, roi_scale: float = 2.0) -> RingFit:
    """Doughnut fit of a frame stack covering the full phase range.

    ``frames`` is a sequence of PhaseFrame (averaged here), a single
    PhaseFrame, or a 2-D array already averaged.  Initial center and
    width come from the intensity moments; the model
    A (r/w)^2 exp(-2 r^2 / w^2) + B is then refined by least squares.
    The disk of interest gets radius ``roi_scale`` * fitted waist.
    """
    if isinstance(frames, PhaseFrame):
        image = frames.as_float()
    elif isinstance(frames, np.ndarray):
        image = np.asarray(frames, dtype=float)
    else:
        stack = [f.as_float() if isinstance(f, PhaseFrame) else np.asarray(f, float) for f in frames]
        image = np.mean(stack, axis=0)

    cx0, cy0, w0 = intensity_moments(image)
    floor0 = float(image.min())
    amp0 = max(float(image.max()) - floor0, 1e-9) * 2.0 * math.e
    x0 = np.array([amp0, cx0, cy0, w0, floor0])

    cols, rows = np.meshgrid(np.arange(image.shape[1]), np.arange(image.shape[0]))

    def residuals(params):
        return (_ring_model(params, cols, rows) - image).ravel()

    result = optimize.least_squares(residuals, x0, method="lm", max_nfev=400)
    if not result.success:
        raise RingFitError(f"ring fit did not converge: {result.message}")
    amp, cx, cy, w, _ = result.x
    w = abs(float(w))
    if not (0.0 <= cx <= image.shape[1] - 1 and 0.0 <= cy <= image.shape[0] - 1):
        raise RingFitError(f"fitted center ({cx:.1f}, {cy:.1f}) lies outside the image")
    rms = math.sqrt(float(np.mean(result.fun**2)))
    return RingFit(
        center=(float(cx), float(cy)),
        radius_of_interest=roi_scale * w,
        waist=w,
        residual=rms / max(abs(amp), 1e-12),
    )


def sector_profile(frame: PhaseFrame, ring: RingFit, n_bins: int = 120) -> np.ndarray:
    """Mean intensity in each of n_bins angular sectors inside the disk."""
    if n_bins % 8 != 0:
        raise ValueError(f"bin count must be divisible by 8, got {n_bins}")
    image = frame.as_float()
    cx, cy = ring.center
    cols, rows = np.meshgrid(np.arange(image.shape[1]), np.arange(image.shape[0]))
    x = cols - cx
    y = rows - cy
    r2 = x * x + y * y
    mask = (r2 <= ring.radius_of_interest**2) & (r2 > 0.0)
    angles = np.mod(np.arctan2(y[mask], x[mask]), TWO_PI)
    bins = np.minimum((angles * (n_bins / TWO_PI)).astype(int), n_bins - 1)
    counts = np.bincount(bins, minlength=n_bins)
    if np.any(counts == 0):
        raise EmptyBinError(
            "empty angular sector; disk of interest extends outside the image"
        )
    sums = np.bincount(bins, weights=image[mask], minlength=n_bins)
    return sums / counts


def process_profile(raw: np.ndarray) -> np.ndarray:
    """Fold, subtract the 90-degree sector, and smooth over 45 degrees."""
    n_bins = raw.size
    half = n_bins // 2
    folded = raw[:half] + raw[half:]
    subtracted = folded - np.roll(folded, -(n_bins // 4))
    window = n_bins // 8
    if window % 2 == 0:
        window += 1
    return ndimage.uniform_filter1d(subtracted, size=window, mode="wrap")


def extract_phase(frame: PhaseFrame, ring: RingFit, n_bins: int = 120) -> PhaseExtraction:
    """Dark-axis angle and interferometer phase of a single frame."""
    raw = sector_profile(frame, ring, n_bins)
    processed = process_profile(raw)
    min_bin = int(np.argmin(processed))
    alpha_d = (min_bin + 0.5) * (TWO_PI / n_bins)
    phi = wrap_phase(2.0 * alpha_d + math.pi)
    return PhaseExtraction(
        alpha_d=alpha_d,
        phi=phi,
        min_bin=min_bin,
        profile=BinProfile(n_bins=n_bins, raw=raw, processed=processed),
        residual=float(processed[min_bin]),
    )
