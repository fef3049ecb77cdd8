"""Two-path projection interferometer with photon counting.

The device splits the input state over two arms, each holding a mode
projector (fork hologram + single-mode fiber) matched to one of the
OAM units l = +1 (arm R) or l = -1 (arm L), then recombines the arms
with a relative phase ``phase`` onto output ports X and Y.

Amplitude model
---------------
For an input alpha|+1> + beta|-1> the arm amplitudes after projection
are

    u_R = sqrt(eta_R / 2) * (alpha + beta * sqrt(eps_R)),
    u_L = sqrt(eta_L / 2) * (beta + alpha * sqrt(eps_L)),

where eta is the arm power transmission and eps the relative power
leakage of the opposite mode into the arm (leaked amplitudes ride the
arm they leak into, so they acquire that arm's phase).  The ports see

    amp_X = sqrt(tap) * (u_R + u_L e^{i phase}) / sqrt(2),
    amp_Y = sqrt(tap) * (u_R - u_L e^{i phase}) / sqrt(2),

with ``tap`` the transmission of the splitter that back-couples the
phase-reference beam.  A leakage eps under one arm produces a residual
fringe of visibility 2*sqrt(eps) for an OAM eigenstate input.

With ``ideal=True`` the arms pass the state coefficients unchanged and
the input-splitter filtering loss is dropped, so an equal-weight input
reaches click probability mu * detector_efficiency at the fringe
maximum.

Counting model
--------------
Each trial is one weak coherent pulse: click probability
1 - exp(-mu_eff) with mu_eff = mu * detector_efficiency * |amp|^2,
OR-ed with an independent background Bernoulli event.  Detectors are
threshold (non-number-resolving).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .modes import wrap_phase
from .qubit import PureQubit
from .seeding import spawn_rng

DEG = math.pi / 180.0

# Wiener phase-drift scale matching "a few degrees in a few seconds".
DEFAULT_DRIFT_RATE = 2.0 * DEG  # rad per sqrt(second)


def leakage_from_db(suppression_db: float) -> float:
    """Relative power leakage for a given suppression in dB (e.g. 25 -> 10^-2.5)."""
    return 10.0 ** (-abs(suppression_db) / 10.0)


@dataclass(frozen=True)
class ProjectorPath:
    """One arm of the interferometer: hologram + fiber mode projector.

    ``efficiency`` is the power transmission for the targeted mode
    (hologram diffraction times fiber coupling); ``leakage`` maps other
    OAM indices to their power coupling relative to the target's.
    """

    target_l: int
    efficiency: float = 0.65
    leakage: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.efficiency <= 1.0):
            raise ValueError(f"efficiency must be in [0, 1], got {self.efficiency}")
        for mode_l, eps in self.leakage.items():
            if not (0.0 <= eps <= 1.0):
                raise ValueError(f"leakage[{mode_l}] must be in [0, 1], got {eps}")
        object.__setattr__(self, "leakage", dict(self.leakage))

    def relative_leakage(self, mode_l: int) -> float:
        if mode_l == self.target_l:
            return 1.0
        return self.leakage.get(mode_l, 0.0)


@dataclass(frozen=True)
class InterferometerConfig:
    """Full device configuration: arms, phase, blocking and splitters."""

    r_path: ProjectorPath = field(default_factory=lambda: ProjectorPath(target_l=+1))
    l_path: ProjectorPath = field(default_factory=lambda: ProjectorPath(target_l=-1))
    phase: float = 0.0
    phase_drift_rate: float = 0.0  # rad / sqrt(s), Wiener scale
    blocked: str | None = None  # None, "R" or "L"
    reference_tap: float = 0.75  # transmission past the reference back-coupling splitter
    visibility: float = 1.0  # residual wavefront-overlap factor on the cross term
    ideal: bool = False

    def __post_init__(self):
        if self.blocked not in (None, "R", "L"):
            raise ValueError(f"blocked must be None, 'R' or 'L', got {self.blocked!r}")
        if self.phase_drift_rate < 0.0:
            raise ValueError("phase_drift_rate must be >= 0")
        if not (0.0 <= self.reference_tap <= 1.0):
            raise ValueError(f"reference_tap must be in [0, 1], got {self.reference_tap}")
        if not (0.0 <= self.visibility <= 1.0):
            raise ValueError(f"visibility must be in [0, 1], got {self.visibility}")
        object.__setattr__(self, "phase", wrap_phase(self.phase))

    def with_phase(self, phase: float) -> "InterferometerConfig":
        return replace(self, phase=phase)

    def with_blocked(self, blocked: str | None) -> "InterferometerConfig":
        return replace(self, blocked=blocked)

    @classmethod
    def ideal_device(cls, phase: float = 0.0) -> "InterferometerConfig":
        return cls(
            r_path=ProjectorPath(target_l=+1, efficiency=1.0),
            l_path=ProjectorPath(target_l=-1, efficiency=1.0),
            phase=phase,
            reference_tap=1.0,
            ideal=True,
        )


@dataclass(frozen=True)
class DetectionConfig:
    """Per-measurement counting parameters."""

    mean_photons: float = 0.6
    detector_efficiency: float = 1.0
    background_rate: float = 1e-3  # background click probability per measurement
    trials: int = 1
    trial_period_s: float = 0.015  # only used when phase drift is enabled

    def __post_init__(self):
        if self.mean_photons < 0.0:
            raise ValueError("mean_photons must be >= 0")
        if not (0.0 <= self.detector_efficiency <= 1.0):
            raise ValueError("detector_efficiency must be in [0, 1]")
        if not (0.0 <= self.background_rate <= 1.0):
            raise ValueError("background_rate must be in [0, 1]")
        if self.trials < 0:
            raise ValueError("trials must be >= 0")


@dataclass(frozen=True)
class CountRecord:
    """Detection statistics for one device configuration."""

    configuration_id: str
    port: str
    phase_bin_deg: float
    trials: int
    clicks: int
    seed: int | None = None

    def __post_init__(self):
        if not (0 <= self.clicks <= self.trials):
            raise ValueError(f"need 0 <= clicks <= trials, got {self.clicks}/{self.trials}")


def _arm_amplitudes(state: PureQubit, cfg: InterferometerConfig) -> tuple[complex, complex]:
    alpha, beta = state.alpha, state.beta
    if cfg.ideal:
        u_r, u_l = complex(alpha), complex(beta)
    else:
        eps_r = cfg.r_path.relative_leakage(cfg.l_path.target_l)
        eps_l = cfg.l_path.relative_leakage(cfg.r_path.target_l)
        u_r = math.sqrt(cfg.r_path.efficiency / 2.0) * (alpha + beta * math.sqrt(eps_r))
        u_l = math.sqrt(cfg.l_path.efficiency / 2.0) * (beta + alpha * math.sqrt(eps_l))
    if cfg.blocked == "R":
        u_r = 0.0
    elif cfg.blocked == "L":
        u_l = 0.0
    return u_r, u_l


def output_amplitudes(state: PureQubit, cfg: InterferometerConfig) -> tuple[complex, complex]:
    """Port amplitudes (amp_X, amp_Y) for a pure input state."""
    u_r, u_l = _arm_amplitudes(state, cfg)
    tap = 1.0 if cfg.ideal else cfg.reference_tap
    rot = u_l * np.exp(1j * cfg.phase)
    scale = math.sqrt(tap / 2.0)
    return scale * (u_r + rot), scale * (u_r - rot)


def port_intensities(
    state: PureQubit, cfg: InterferometerConfig, phase: float | np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """|amp|^2 at ports X and Y, with the cross term scaled by cfg.visibility.

    ``phase`` overrides cfg.phase and may be an array (vectorized scan).
    """
    u_r, u_l = _arm_amplitudes(state, cfg)
    tap = 1.0 if cfg.ideal else cfg.reference_tap
    phi = cfg.phase if phase is None else phase
    cross = np.real(np.conj(u_r) * u_l * np.exp(1j * np.asarray(phi, dtype=float)))
    base = abs(u_r) ** 2 + abs(u_l) ** 2
    i_x = 0.5 * tap * (base + 2.0 * cfg.visibility * cross)
    i_y = 0.5 * tap * (base - 2.0 * cfg.visibility * cross)
    return i_x, i_y


def click_probability(
    state: PureQubit,
    cfg: InterferometerConfig,
    det: DetectionConfig,
    port: str = "X",
    phase: float | np.ndarray | None = None,
):
    """Probability of at least one click in a single measurement."""
    i_x, i_y = port_intensities(state, cfg, phase=phase)
    intensity = {"X": i_x, "Y": i_y}[port]
    mu_eff = det.mean_photons * det.detector_efficiency * intensity
    p_signal = -np.expm1(-mu_eff)
    p = 1.0 - (1.0 - p_signal) * (1.0 - det.background_rate)
    return float(p) if np.ndim(p) == 0 else p


def simulate_counts(
    state: PureQubit,
    cfg: InterferometerConfig,
    det: DetectionConfig,
    seed: int,
    port: str = "X",
    configuration_id: str = "",
    rng: np.random.Generator | None = None,
) -> CountRecord:
    """Draw one CountRecord for a configuration.

    Without drift, clicks ~ Binomial(trials, click_probability).  With
    cfg.phase_drift_rate > 0 the phase performs a Wiener walk across the
    trials (one step per trial period) and each trial is Bernoulli at
    its drifted phase.  The recorded phase bin is the configured phase.
    """
    if rng is None:
        rng = spawn_rng(seed, "counts", configuration_id, port)
    if cfg.phase_drift_rate > 0.0 and det.trials > 0:
        steps = rng.normal(
            0.0, cfg.phase_drift_rate * math.sqrt(det.trial_period_s), size=det.trials
        )
        phases = cfg.phase + np.cumsum(steps)
        probs = click_probability(state, cfg, det, port=port, phase=phases)
        clicks = int(np.count_nonzero(rng.random(det.trials) < probs))
    else:
        p = click_probability(state, cfg, det, port=port)
        clicks = int(rng.binomial(det.trials, p)) if det.trials > 0 else 0
    return CountRecord(
        configuration_id=configuration_id,
        port=port,
        phase_bin_deg=cfg.phase / DEG,
        trials=det.trials,
        clicks=clicks,
        seed=seed,
    )


def phase_sensitivity_geometric(delta_l_cm: float, delta_nu_ghz: float) -> float:
    """Phase change (degrees) from a geometric path difference.

    12 degrees per (cm GHz) of path-length difference times detuning.
    """
    return 12.0 * delta_l_cm * delta_nu_ghz


def phase_sensitivity_dispersion(delta_l_fib_cm: float, delta_nu_ghz: float) -> float:
    """Phase change (degrees) from unbalanced fiber length (material dispersion).

    -0.1 degrees per (cm GHz) of fiber-length difference times detuning.
    """
    return -0.1 * delta_l_fib_cm * delta_nu_ghz


# ----------------------------------------------------------------------
# Presets
# ----------------------------------------------------------------------

HOLOGRAM_DIFFRACTION_EFFICIENCY = 0.8

# Fiber-coupling fractions measured per arm for each input OAM index.
MEASURED_COUPLINGS = {
    "R": {-2: 0.001, -1: 0.005, 0: 0.001, +1: 0.823, +2: 0.057},
    "L": {-2: 0.028, -1: 0.778, 0: 0.017, +1: 0.0003, +2: 0.0004},
}


def _path_from_couplings(target_l: int, couplings: Mapping[int, float]) -> ProjectorPath:
    target = couplings[target_l]
    leakage = {
        mode_l: c / target for mode_l, c in couplings.items() if mode_l != target_l
    }
    return ProjectorPath(
        target_l=target_l,
        efficiency=HOLOGRAM_DIFFRACTION_EFFICIENCY * target,
        leakage=leakage,
    )


def measured_paths() -> tuple[ProjectorPath, ProjectorPath]:
    """Arm presets from the measured coupling table (R and L)."""
    return (
        _path_from_couplings(+1, MEASURED_COUPLINGS["R"]),
        _path_from_couplings(-1, MEASURED_COUPLINGS["L"]),
    )


def balanced_paths(
    efficiency: float = 0.65, leakage: float = leakage_from_db(25.0)
) -> tuple[ProjectorPath, ProjectorPath]:
    """Symmetric arms with a single opposite-mode leakage value."""
    return (
        ProjectorPath(target_l=+1, efficiency=efficiency, leakage={-1: leakage}),
        ProjectorPath(target_l=-1, efficiency=efficiency, leakage={+1: leakage}),
    )


def measured_detection(trials: int = 1) -> DetectionConfig:
    """Operating point: 0.6 photons/pulse, assumed 50% quantum efficiency,
    1e-3 background events per measurement."""
    return DetectionConfig(
        mean_photons=0.6, detector_efficiency=0.5, background_rate=1e-3, trials=trials
    )


# ----------------------------------------------------------------------
# CSV streaming of count records
# ----------------------------------------------------------------------

COUNT_CSV_FIELDS = ("configuration_id", "port", "phase_bin_deg", "trials", "clicks", "seed")


def write_count_csv(
    path: str | Path, records: Iterable[CountRecord], comment: str | None = None
) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        if comment:
            for part in comment.splitlines():
                fh.write(f"# {part}\n")
        writer = csv.writer(fh)
        writer.writerow(COUNT_CSV_FIELDS)
        for rec in records:
            writer.writerow(
                [
                    rec.configuration_id,
                    rec.port,
                    f"{rec.phase_bin_deg:.6f}",
                    rec.trials,
                    rec.clicks,
                    "" if rec.seed is None else rec.seed,
                ]
            )


def read_count_csv(path: str | Path) -> list[CountRecord]:
    records = []
    with Path(path).open(newline="") as fh:
        rows = (row for row in fh if not row.startswith("#"))
        reader = csv.DictReader(rows)
        for row in reader:
            records.append(
                CountRecord(
                    configuration_id=row["configuration_id"],
                    port=row["port"],
                    phase_bin_deg=float(row["phase_bin_deg"]),
                    trials=int(row["trials"]),
                    clicks=int(row["clicks"]),
                    seed=int(row["seed"]) if row["seed"] else None,
                )
            )
    return records
