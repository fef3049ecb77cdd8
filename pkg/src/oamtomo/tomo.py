"""Calibration and tomography runs against the simulated interferometer.

Phase coordinate
----------------
Scans are driven and binned by the *camera phase*: the phase recovered
from the counter-propagating reference beam, phi_cam = 2 alpha_d + pi.
Because the reference traverses the arms backwards, it accumulates the
conjugate of the signal-path phase, so the device phase entering the
port amplitudes is phi_dev = -phi_cam (plus any residual calibration
offset).  In this coordinate output X projects onto
(|+1> + e^{i phi_cam} |-1>)/sqrt(2): the fringe of an equal-weight
input with relative phase theta peaks at phi_cam = theta and bottoms
out at phi_cam = theta + pi, i.e. at 2 alpha_d = theta.

Projection schedule
-------------------
A tomography run measures six projections: the OAM eigenstates by
blocking one arm (both ports agree there and are averaged), and the
four equal-weight modes H, D, V, A from the camera-phase bins at 0,
pi/2, pi and 3 pi/2 of the output-X fringe.  Probabilities are
normalized per complementary pair, p = n / (n + n_orth); background
subtraction is available but off by default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .apparatus import (
    CountRecord,
    DetectionConfig,
    InterferometerConfig,
    balanced_paths,
    click_probability,
    leakage_from_db,
    simulate_counts,
)
from .modes import MODE_PHASES, fold_angle, wrap_phase
from .qubit import (
    DensityMatrix,
    PureQubit,
    StokesVector,
    density_from_stokes,
    fidelity as state_fidelity,
    project_physical,
    pure_to_stokes,
    stokes_from_probabilities,
)
from .seeding import spawn_rng

DEG = math.pi / 180.0
TWO_PI = 2.0 * math.pi

# Measured wavefront-overlap factors of a phase-only spatial light
# modulator preparing the probe modes.
SLM_PREPARATION_OVERLAP = {"LG": 0.78, "HG": 0.64}


class InsufficientSpanError(ValueError):
    """Fringe samples cover less than half a period."""


class ScheduleError(ValueError):
    """Measurement schedule misses required projections or is malformed."""


# ----------------------------------------------------------------------
# Fringe fitting
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class FringeFit:
    """Sinusoidal fringe parameters versus the dark-axis angle.

    The fitted model is offset * (1 - visibility * cos(2 alpha_d -
    theta)): ``theta`` marks the fringe *minimum* (minimum power at
    2 alpha_d = theta, i.e. at camera phase theta + pi).
    """

    offset: float
    visibility: float
    theta: float
    residual: float

    def __post_init__(self):
        if not (0.0 <= self.visibility <= 1.0):
            raise ValueError(f"visibility must be in [0, 1], got {self.visibility}")
        object.__setattr__(self, "theta", wrap_phase(self.theta))


def fit_fringe(samples: Sequence[tuple[float, float]]) -> FringeFit:
    """Least-squares fringe fit on (alpha_d, mean clicks) samples.

    Needs at least 8 samples spanning at least half a period of
    2 alpha_d.  A fit that comes out with a negative visibility is
    reported with positive visibility and theta shifted by pi.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 8:
        raise InsufficientSpanError(f"need >= 8 (alpha_d, value) samples, got {pts.shape}")
    two_alpha = np.mod(2.0 * pts[:, 0], TWO_PI)
    gaps = np.diff(np.sort(two_alpha))
    wrap_gap = TWO_PI - (np.sort(two_alpha)[-1] - np.sort(two_alpha)[0])
    largest_gap = max(gaps.max(initial=0.0), wrap_gap)
    if TWO_PI - largest_gap < math.pi:
        raise InsufficientSpanError("samples span less than half a fringe period")

    design = np.column_stack(
        [np.ones_like(two_alpha), np.cos(two_alpha), np.sin(two_alpha)]
    )
    coeff, *_ = np.linalg.lstsq(design, pts[:, 1], rcond=None)
    c0, c1, c2 = coeff
    if c0 <= 0.0:
        raise InsufficientSpanError("fringe fit degenerate: non-positive mean level")
    theta = math.atan2(-c2, -c1)
    visibility = min(math.hypot(c1, c2) / c0, 1.0)
    residual = float(np.sqrt(np.mean((design @ coeff - pts[:, 1]) ** 2)))
    return FringeFit(
        offset=float(c0), visibility=float(visibility), theta=theta, residual=residual
    )


# ----------------------------------------------------------------------
# Simulated device
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SimulatedDevice:
    """Interferometer plus the camera-phase bookkeeping of a real run.

    ``reference_offset`` is a residual miscalibration between the
    camera-derived phase and the signal phase (wavelength or
    birefringence mismatch of the reference beam); it shifts every
    fitted fringe by the same angle.
    """

    interferometer: InterferometerConfig
    reference_offset: float = 0.0

    def device_phase(self, camera_phase: float) -> float:
        """Signal-path phase realized when the camera reads ``camera_phase``."""
        return wrap_phase(self.reference_offset - camera_phase)

    def configured(
        self, camera_phase: float = 0.0, blocked: str | None = None
    ) -> InterferometerConfig:
        cfg = self.interferometer.with_phase(self.device_phase(camera_phase))
        return cfg.with_blocked(blocked)


def ideal_device() -> SimulatedDevice:
    return SimulatedDevice(interferometer=InterferometerConfig.ideal_device())


def benchmark_device(
    visibility: float = 0.99,
    leakage: float = leakage_from_db(25.0),
    efficiency: float = 0.65,
) -> SimulatedDevice:
    """Balanced-arm device at the standard operating point."""
    return SimulatedDevice(
        interferometer=InterferometerConfig(
            *balanced_paths(efficiency=efficiency, leakage=leakage),
            reference_tap=0.75,
            visibility=visibility,
        )
    )


def demo_preparation_errors() -> dict[str, float]:
    """Probe-mode preparation phase errors of the shipped demo device
    (mean absolute deviation ~2.2 degrees)."""
    return {"H": -0.1 * DEG, "D": -3.5 * DEG, "V": -3.9 * DEG, "A": -1.4 * DEG}


# ----------------------------------------------------------------------
# Calibration
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationReport:
    """Per-mode fringe fits against the ideal projection angles."""

    fits: Mapping[str, FringeFit]
    theta_theory: Mapping[str, float]
    deviations: Mapping[str, float]  # signed, radians
    mean_abs_deviation: float
    cross_offset: float  # common rotation of the best orthogonal cross
    mean_visibility: float
    misaligned: bool

    def to_json_dict(self) -> dict:
        return {
            "modes": {
                name: {
                    "theta_deg": fit.theta / DEG,
                    "theta_theory_deg": self.theta_theory[name] / DEG,
                    "deviation_deg": self.deviations[name] / DEG,
                    "visibility": fit.visibility,
                    "offset": fit.offset,
                    "residual": fit.residual,
                }
                for name, fit in self.fits.items()
            },
            "mean_abs_deviation_deg": self.mean_abs_deviation / DEG,
            "cross_offset_deg": self.cross_offset / DEG,
            "mean_visibility": self.mean_visibility,
            "misaligned": self.misaligned,
        }


def _equatorial_probe(phase: float) -> PureQubit:
    s = math.sqrt(0.5)
    return PureQubit(s, s * complex(math.cos(phase), math.sin(phase)))


def calibrate(
    device: SimulatedDevice,
    det: DetectionConfig,
    probes: Sequence[str] = ("H", "V", "D", "A"),
    n_points: int = 120,
    trials_per_point: int = 25000,
    seed: int = 0,
    preparation_errors: Mapping[str, float] | None = None,
    exact: bool = False,
    visibility_threshold: float = 0.8,
) -> CalibrationReport:
    """Scan the fringe of each probe mode and fit its phase.

    ``preparation_errors`` adds per-mode phase errors to the probe
    states (imperfect mode preparation).  With ``exact=True`` the mean
    click rates are used directly instead of binomial draws.  A mean
    fitted visibility below ``visibility_threshold`` flags misalignment.
    """
    preparation_errors = preparation_errors or {}
    camera_phases = np.arange(n_points) * (TWO_PI / n_points)
    fits: dict[str, FringeFit] = {}
    deviations: dict[str, float] = {}
    theory = {name: MODE_PHASES[name] for name in probes}

    for name in probes:
        probe = _equatorial_probe(MODE_PHASES[name] + preparation_errors.get(name, 0.0))
        samples = []
        for k, cam in enumerate(camera_phases):
            cfg = device.configured(camera_phase=cam)
            p = click_probability(probe, cfg, det, port="X")
            if exact:
                rate = p
            else:
                rng = spawn_rng(seed, "calibrate", name, k)
                rate = rng.binomial(trials_per_point, p) / trials_per_point
            samples.append((fold_angle((cam - math.pi) / 2.0), rate))
        fit = fit_fringe(samples)
        fits[name] = fit
        deviations[name] = float(
            np.mod(fit.theta - theory[name] + math.pi, TWO_PI) - math.pi
        )

    devs = np.array([deviations[name] for name in probes])
    mean_vis = float(np.mean([fits[name].visibility for name in probes]))
    return CalibrationReport(
        fits=fits,
        theta_theory=theory,
        deviations=deviations,
        mean_abs_deviation=float(np.mean(np.abs(devs))),
        cross_offset=float(np.mean(devs)),
        mean_visibility=mean_vis,
        misaligned=mean_vis < visibility_threshold,
    )


# ----------------------------------------------------------------------
# Measurement schedule and tomography
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleEntry:
    """One device configuration: an arm block or a camera-phase bin."""

    kind: str  # 'blocked_R', 'blocked_L' or 'phase'
    trials: int
    camera_phase: float | None = None

    def __post_init__(self):
        if self.kind not in ("blocked_R", "blocked_L", "phase"):
            raise ScheduleError(f"unknown schedule entry kind {self.kind!r}")
        if self.kind == "phase":
            if self.camera_phase is None:
                raise ScheduleError("phase entries need a camera_phase")
            object.__setattr__(self, "camera_phase", wrap_phase(self.camera_phase))
        if self.trials < 1:
            raise ScheduleError(f"trials must be >= 1, got {self.trials}")

    @property
    def configuration_id(self) -> str:
        if self.kind == "phase":
            return f"phase_{self.camera_phase / DEG:07.2f}"
        return self.kind


_KEY_PHASES = {"H": 0.0, "D": 0.5 * math.pi, "V": math.pi, "A": 1.5 * math.pi}


@dataclass(frozen=True)
class MeasurementSchedule:
    """Ordered configurations covering all six projections at least once."""

    entries: tuple[ScheduleEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        kinds = {e.kind for e in self.entries}
        if not {"blocked_R", "blocked_L"} <= kinds:
            raise ScheduleError("schedule must block each arm at least once")
        for name, phase in _KEY_PHASES.items():
            if self._phase_entries(phase) == ():
                raise ScheduleError(
                    f"schedule misses the camera-phase bin for projection {name}"
                )

    def _phase_entries(self, camera_phase: float) -> tuple[ScheduleEntry, ...]:
        return tuple(
            e
            for e in self.entries
            if e.kind == "phase"
            and math.isclose(e.camera_phase, wrap_phase(camera_phase), abs_tol=1e-9)
        )


def standard_schedule(
    n_bins: int = 120, trials_per_bin: int = 25000, blocked_trials: int = 10**6
) -> MeasurementSchedule:
    """Full fringe scan over n_bins camera phases plus the two arm blocks."""
    if n_bins % 4 != 0:
        raise ScheduleError("n_bins must be divisible by 4 to hit all four projections")
    entries = [
        ScheduleEntry("blocked_L", blocked_trials),
        ScheduleEntry("blocked_R", blocked_trials),
    ]
    entries.extend(
        ScheduleEntry("phase", trials_per_bin, camera_phase=k * TWO_PI / n_bins)
        for k in range(n_bins)
    )
    return MeasurementSchedule(tuple(entries))


def four_point_schedule(
    trials_per_point: int = 500000, blocked_trials: int = 10**6
) -> MeasurementSchedule:
    """Minimal schedule: the four key camera phases plus the arm blocks."""
    entries = [
        ScheduleEntry("blocked_L", blocked_trials),
        ScheduleEntry("blocked_R", blocked_trials),
    ]
    entries.extend(
        ScheduleEntry("phase", trials_per_point, camera_phase=phase)
        for phase in _KEY_PHASES.values()
    )
    return MeasurementSchedule(tuple(entries))


@dataclass(frozen=True)
class TomographyResult:
    records: tuple[CountRecord, ...]
    probabilities: dict[str, float]
    stokes: StokesVector
    stokes_sigma: tuple[float, float, float]
    rho: DensityMatrix
    fidelity: float
    fidelity_sigma: float

    def to_json_dict(self) -> dict:
        return {
            **self.rho.to_json_dict(),
            "probabilities": {k: float(v) for k, v in self.probabilities.items()},
            "stokes_sigma": [float(s) for s in self.stokes_sigma],
            "fidelity": float(self.fidelity),
            "fidelity_sigma": float(self.fidelity_sigma),
        }


def _pair_probability(
    n_plus: float, t_plus: int, n_minus: float, t_minus: int
) -> tuple[float, float]:
    """Normalized probability n+/(n+ + n-) with binomial propagation.

    Counts are rescaled to a common per-trial rate before normalizing,
    so unequal trial numbers in a pair stay unbiased.
    """
    r_plus = n_plus / t_plus
    r_minus = n_minus / t_minus
    total = r_plus + r_minus
    if total <= 0.0:
        raise ZeroDivisionError("no clicks recorded for a complementary pair")
    p = r_plus / total
    var_plus = max(r_plus * (1.0 - r_plus), 0.0) / t_plus
    var_minus = max(r_minus * (1.0 - r_minus), 0.0) / t_minus
    sigma = math.sqrt(r_minus**2 * var_plus + r_plus**2 * var_minus) / total**2
    return p, sigma


def run_tomography(
    state: PureQubit,
    schedule: MeasurementSchedule,
    device: SimulatedDevice,
    det: DetectionConfig,
    seed: int,
    target: PureQubit | None = None,
    physicality_projection: bool = False,
    subtract_background: bool = False,
    pair_tolerance: float = 0.05,
    run_label: str = "",
) -> TomographyResult:
    """Simulate the schedule and reconstruct the density matrix.

    Only output X is used for the fringe bins; blocked-arm entries use
    both ports and average them.  The reconstruction is plain linear
    inversion; ``physicality_projection`` optionally projects onto the
    physical set afterwards (recorded in the output metadata).
    """
    target = target or state
    records: list[CountRecord] = []
    blocked_rates: dict[str, tuple[float, int]] = {}
    phase_rates: dict[float, tuple[float, int]] = {}

    for idx, entry in enumerate(schedule.entries):
        run_det = DetectionConfig(
            mean_photons=det.mean_photons,
            detector_efficiency=det.detector_efficiency,
            background_rate=det.background_rate,
            trials=entry.trials,
            trial_period_s=det.trial_period_s,
        )
        if entry.kind == "phase":
            cfg = device.configured(camera_phase=entry.camera_phase)
            rec = simulate_counts(
                state,
                cfg,
                run_det,
                seed,
                port="X",
                configuration_id=entry.configuration_id,
                rng=spawn_rng(seed, "tomo", run_label, idx, "X"),
            )
            rec = CountRecord(
                rec.configuration_id,
                rec.port,
                entry.camera_phase / DEG,
                rec.trials,
                rec.clicks,
                rec.seed,
            )
            records.append(rec)
            clicks, trials = phase_rates.get(entry.camera_phase, (0.0, 0))
            phase_rates[entry.camera_phase] = (clicks + rec.clicks, trials + rec.trials)
        else:
            blocked_arm = "L" if entry.kind == "blocked_L" else "R"
            cfg = device.configured(blocked=blocked_arm)
            clicks, trials = 0.0, 0
            for port in ("X", "Y"):
                rec = simulate_counts(
                    state,
                    cfg,
                    run_det,
                    seed,
                    port=port,
                    configuration_id=entry.configuration_id,
                    rng=spawn_rng(seed, "tomo", run_label, idx, port),
                )
                records.append(rec)
                clicks += rec.clicks
                trials += rec.trials
            prev = blocked_rates.get(entry.kind, (0.0, 0))
            blocked_rates[entry.kind] = (prev[0] + clicks, prev[1] + trials)

    def counts_at(camera_phase: float) -> tuple[float, int]:
        key = wrap_phase(camera_phase)
        for phase, val in phase_rates.items():
            if math.isclose(phase, key, abs_tol=1e-9):
                return val
        raise ScheduleError(f"no counts recorded at camera phase {key / DEG:.2f} deg")

    def debias(clicks: float, trials: int) -> float:
        if subtract_background:
            clicks = max(clicks - det.background_rate * trials, 0.0)
        return clicks

    n_r, t_r = blocked_rates["blocked_L"]
    n_l, t_l = blocked_rates["blocked_R"]
    p0, s0 = _pair_probability(debias(n_r, t_r), t_r, debias(n_l, t_l), t_l)
    n_h, t_h = counts_at(_KEY_PHASES["H"])
    n_v, t_v = counts_at(_KEY_PHASES["V"])
    p_h, s_h = _pair_probability(debias(n_h, t_h), t_h, debias(n_v, t_v), t_v)
    n_d, t_d = counts_at(_KEY_PHASES["D"])
    n_a, t_a = counts_at(_KEY_PHASES["A"])
    p_d, s_d = _pair_probability(debias(n_d, t_d), t_d, debias(n_a, t_a), t_a)

    probabilities = {
        "R": p0,
        "L": 1.0 - p0,
        "H": p_h,
        "V": 1.0 - p_h,
        "D": p_d,
        "A": 1.0 - p_d,
    }
    stokes = stokes_from_probabilities(
        p0, 1.0 - p0, p_h, 1.0 - p_h, p_d, 1.0 - p_d, pair_tolerance=pair_tolerance
    )
    rho = density_from_stokes(stokes)
    if physicality_projection:
        rho = project_physical(rho)
    stokes_sigma = (2.0 * s0, 2.0 * s_h, 2.0 * s_d)
    t_vec = pure_to_stokes(target).as_array()
    fid_sigma = 0.5 * math.sqrt(
        sum((t * s) ** 2 for t, s in zip(t_vec, stokes_sigma))
    )
    return TomographyResult(
        records=tuple(records),
        probabilities=probabilities,
        stokes=stokes,
        stokes_sigma=stokes_sigma,
        rho=rho,
        fidelity=state_fidelity(rho, target),
        fidelity_sigma=fid_sigma,
    )


# ----------------------------------------------------------------------
# Error budget
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorBudget:
    """Imperfection summary: visibility, arm leakage, calibration offset
    (radians) and fiber-coupling imbalance between orthogonal modes."""

    visibility: float = 1.0
    leakage: float = 0.0
    calibration_offset: float = 0.0
    coupling_imbalance: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.visibility <= 1.0):
            raise ValueError("visibility must be in [0, 1]")
        if not (0.0 <= self.leakage <= 1.0):
            raise ValueError("leakage must be in [0, 1]")
        if not (0.0 <= self.coupling_imbalance <= 1.0):
            raise ValueError("coupling_imbalance must be in [0, 1]")


@dataclass(frozen=True)
class FidelityBounds:
    f_max_equatorial: float
    f_max_poles: float
    visibility_loss_from_imbalance: float

    def to_json_dict(self) -> dict:
        return {
            "f_max_equatorial": self.f_max_equatorial,
            "f_max_poles": self.f_max_poles,
            "visibility_loss_from_imbalance": self.visibility_loss_from_imbalance,
        }


def fidelity_bounds(budget: ErrorBudget) -> FidelityBounds:
    """Upper fidelity limits implied by an error budget.

    Equal-weight (equatorial) inputs are capped at (1 + V)/2 minus the
    squared calibration offset, with the coupling-imbalance visibility
    loss (Delta eta)^2 / 2 applied to V first; eigenstate (pole) inputs
    are capped at 1 - leakage.
    """
    vis_loss = 0.5 * budget.coupling_imbalance**2
    v_eff = max(budget.visibility - vis_loss, 0.0)
    return FidelityBounds(
        f_max_equatorial=0.5 * (1.0 + v_eff) - budget.calibration_offset**2,
        f_max_poles=1.0 - budget.leakage,
        visibility_loss_from_imbalance=vis_loss,
    )


def efficiency_budget(stages: Iterable[float] | Mapping[str, float]) -> float:
    """Product of per-stage efficiencies (empty input gives 1)."""
    values = list(stages.values()) if isinstance(stages, Mapping) else list(stages)
    for v in values:
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"stage efficiencies must be in [0, 1], got {v}")
    return float(math.prod(values))


def standard_efficiency_chain() -> dict[str, float]:
    """Loss stages of the two-path device (detector efficiency excluded)."""
    return {
        "input_split_and_filtering": 0.5,
        "hologram_and_optics": 0.8,
        "fiber_coupling": 0.8,
        "reference_tap": 0.75,
    }
