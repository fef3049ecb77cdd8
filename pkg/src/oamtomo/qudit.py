"""Four-path extension: tomography in the OAM space {-3, -1, +1, +3}.

The input is split over four mode-projector paths (amplitude 1/2 each
after two splitter stages), and the surviving amplitudes are recombined
in a cascade of 50:50 couplers forming nested interferometers:

    stage 1:  (-3, -1) with phase phi1 on the -1 input -> A+/A-
              (+1, +3) with phase phi2 on the +3 input -> B+/B-
    stage 2:  (A+, B+) with phase phi3 on B+          -> X/Y

Detector ports are A (= A-), B (= B-), X and Y.  The combiner tree is
unitary: with open shutters and unit efficiencies the four port
probabilities sum to the power entering the tree.

Keeping only Delta-l = 2 spacings between the projected modes preserves
the strong crosstalk suppression of the two-path device; mode sets with
adjacent l values are rejected by the preset validator because
next-neighbor rejection is an order of magnitude weaker.

Tomography uses 16 configurations read at port X: the four single-path
populations and the six mode pairs, each at two interference phases
(0 and pi/2).  Reconstruction is least-squares linear inversion over
the generalized Bloch decomposition, with measurement operators derived
from the configured network model itself; informational completeness is
checked through the rank and condition number of the measurement
matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .apparatus import CountRecord, DetectionConfig, leakage_from_db
from .qubit import DensityMatrix, density_from_bloch, fidelity as state_fidelity, hermitian_basis
from .seeding import spawn_rng

QUDIT_MODES = (-3, -1, +1, +3)

# Crosstalk suppression presets (dB) by OAM spacing, from the measured
# two-path device: next neighbors ~17 dB, Delta-l = 2 at least 23 dB
# (typical 25), conservative network preset 27 dB.
ADJACENT_SUPPRESSION_DB = 17.0
NETWORK_SUPPRESSION_DB = 27.0


class NetworkConfigError(ValueError):
    """Invalid network layout or preset."""


class AllPathsBlockedError(ValueError):
    """Every shutter is closed; the device transmits nothing."""


class IncompleteProjectorSetError(ValueError):
    """Measurement matrix is rank-deficient; reconstruction is impossible."""


@dataclass(frozen=True)
class QuditState:
    """Pure state over the four OAM basis modes (-3, -1, +1, +3)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.amplitudes, dtype=np.complex128).ravel()
        if vec.size != 4:
            raise ValueError(f"qudit state needs 4 amplitudes, got {vec.size}")
        norm = np.linalg.norm(vec)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state must be normalized, |psi| = {norm}")
        object.__setattr__(self, "amplitudes", vec)

    @classmethod
    def basis(cls, mode_l: int) -> "QuditState":
        vec = np.zeros(4, dtype=np.complex128)
        vec[QUDIT_MODES.index(mode_l)] = 1.0
        return cls(vec)

    @classmethod
    def from_mode_map(cls, coeffs: Mapping[int, complex]) -> "QuditState":
        vec = np.zeros(4, dtype=np.complex128)
        for mode_l, c in coeffs.items():
            vec[QUDIT_MODES.index(mode_l)] = c
        return cls(vec / np.linalg.norm(vec))

    @classmethod
    def demo(cls) -> "QuditState":
        """Example input (|+1> + |-1> - |+3> - i|-3>)/2."""
        return cls.from_mode_map({+1: 1.0, -1: 1.0, +3: -1.0, -3: -1.0j})

    @classmethod
    def random(cls, rng: np.random.Generator) -> "QuditState":
        vec = rng.normal(size=4) + 1j * rng.normal(size=4)
        return cls(vec / np.linalg.norm(vec))

    def density(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class QuditPath:
    """One mode-projector path of the network."""

    mode_l: int
    efficiency: float = 1.0
    leakage: Mapping[int, float] = field(default_factory=dict)  # relative power
    open: bool = True

    def __post_init__(self):
        if not (0.0 <= self.efficiency <= 1.0):
            raise ValueError(f"efficiency must be in [0, 1], got {self.efficiency}")
        object.__setattr__(self, "leakage", dict(self.leakage))


@dataclass(frozen=True)
class NetworkConfig:
    """Phases, shutters and per-path projector models of the 4-mode device."""

    phases: tuple[float, float, float] = (0.0, 0.0, 0.0)
    paths: tuple[QuditPath, ...] = tuple(QuditPath(mode_l=l) for l in QUDIT_MODES)
    include_input_split: bool = True

    def __post_init__(self):
        if len(self.phases) != 3:
            raise NetworkConfigError("network needs exactly three phases")
        object.__setattr__(
            self, "phases", tuple(float(np.mod(p, 2.0 * math.pi)) for p in self.phases)
        )
        modes = tuple(p.mode_l for p in self.paths)
        if modes != QUDIT_MODES:
            raise NetworkConfigError(f"paths must target modes {QUDIT_MODES}, got {modes}")

    def with_phases(self, phases: Sequence[float]) -> "NetworkConfig":
        return replace(self, phases=tuple(phases))

    def with_shutters(self, open_modes: Sequence[int]) -> "NetworkConfig":
        paths = tuple(replace(p, open=p.mode_l in tuple(open_modes)) for p in self.paths)
        return replace(self, paths=paths)

    @classmethod
    def lossless(cls) -> "NetworkConfig":
        """Unit-efficiency, leak-free network without the input-split loss;
        the combiner tree is then exactly unitary."""
        return cls(include_input_split=False)


def standard_network(
    efficiency: float = 0.64,
    suppression_db: float = NETWORK_SUPPRESSION_DB,
    modes: Sequence[int] = QUDIT_MODES,
) -> NetworkConfig:
    """Preset network with Delta-l = 2 crosstalk at ``suppression_db``.

    Mode sets with any spacing below 2 are rejected: next-neighbor
    rejection (~17 dB) is far weaker than the Delta-l = 2 suppression
    this preset assumes.
    """
    modes = tuple(sorted(modes))
    if modes != QUDIT_MODES:
        raise NetworkConfigError(f"preset supports the mode set {QUDIT_MODES} only")
    spacings = [b - a for a, b in zip(modes, modes[1:])]
    if min(spacings) < 2:
        raise NetworkConfigError(
            f"mode spacing {min(spacings)} rejected: adjacent-l suppression is only "
            f"~{ADJACENT_SUPPRESSION_DB:.0f} dB, the preset requires Delta-l >= 2"
        )
    eps = leakage_from_db(suppression_db)
    paths = tuple(
        QuditPath(
            mode_l=l,
            efficiency=efficiency,
            leakage={m: eps for m in modes if abs(m - l) == 2},
        )
        for l in modes
    )
    return NetworkConfig(paths=paths)


def _path_amplitudes(state: QuditState, cfg: NetworkConfig) -> np.ndarray:
    if not any(p.open for p in cfg.paths):
        raise AllPathsBlockedError("all shutters closed")
    split = 0.5 if cfg.include_input_split else 1.0
    amps = np.zeros(4, dtype=np.complex128)
    for i, path in enumerate(cfg.paths):
        if not path.open:
            continue
        amp = state.amplitudes[i]
        for mode_l, eps in path.leakage.items():
            amp = amp + math.sqrt(eps) * state.amplitudes[QUDIT_MODES.index(mode_l)]
        amps[i] = split * math.sqrt(path.efficiency) * amp
    return amps


def network_amplitudes(state: QuditState, cfg: NetworkConfig) -> dict[str, complex]:
    """Port amplitudes of the combiner tree for a pure input state."""
    b = _path_amplitudes(state, cfg)
    phi1, phi2, phi3 = cfg.phases
    s = math.sqrt(0.5)
    a_plus = s * (b[0] + np.exp(1j * phi1) * b[1])
    a_minus = s * (b[0] - np.exp(1j * phi1) * b[1])
    b_plus = s * (b[2] + np.exp(1j * phi2) * b[3])
    b_minus = s * (b[2] - np.exp(1j * phi2) * b[3])
    out_x = s * (a_plus + np.exp(1j * phi3) * b_plus)
    out_y = s * (a_plus - np.exp(1j * phi3) * b_plus)
    return {"A": complex(a_minus), "B": complex(b_minus), "X": complex(out_x), "Y": complex(out_y)}


PORTS = ("A", "B", "X", "Y")


def network_probabilities(state: QuditState, cfg: NetworkConfig) -> dict[str, float]:
    """Detection probabilities (per input photon) at the four ports."""
    return {port: abs(amp) ** 2 for port, amp in network_amplitudes(state, cfg).items()}


# ----------------------------------------------------------------------
# Measurement operators and the tomography projector set
# ----------------------------------------------------------------------


def measurement_operator(cfg: NetworkConfig, port: str) -> np.ndarray:
    """Hermitian operator M with p(port) = <psi|M|psi> for this config.

    Extracted by probing the network with basis states and their
    two-mode superpositions (a polarization identity), so it includes
    whatever losses and leakages the configuration carries.
    """
    mat = np.zeros((4, 4), dtype=np.complex128)
    basis_states = [QuditState.basis(l) for l in QUDIT_MODES]
    for m in range(4):
        mat[m, m] = network_probabilities(basis_states[m], cfg)[port]
    sqrt_half = math.sqrt(0.5)
    for m in range(4):
        for n in range(m + 1, 4):
            plus = np.zeros(4, dtype=np.complex128)
            plus[m], plus[n] = sqrt_half, sqrt_half
            quad = np.zeros(4, dtype=np.complex128)
            quad[m], quad[n] = sqrt_half, 1j * sqrt_half
            p_plus = network_probabilities(QuditState(plus), cfg)[port]
            p_quad = network_probabilities(QuditState(quad), cfg)[port]
            half_diag = 0.5 * (mat[m, m] + mat[n, n]).real
            re = p_plus - half_diag
            im = half_diag - p_quad
            mat[m, n] = re + 1j * im
            mat[n, m] = re - 1j * im
    return mat


@dataclass(frozen=True)
class ProjectorConfig:
    configuration_id: str
    config: NetworkConfig
    port: str


@dataclass(frozen=True)
class ProjectorSet:
    """The 16 network settings used for full qudit tomography."""

    entries: tuple[ProjectorConfig, ...]

    def operators(self) -> list[np.ndarray]:
        return [measurement_operator(e.config, e.port) for e in self.entries]

    def measurement_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Design matrix over (identity/4, Bloch basis) and its offset.

        Returns (A, t0) with p = t0 + A @ x for rho = I/4 + sum x_a G_a / 2.
        """
        ops = self.operators()
        basis = hermitian_basis(4)
        design = np.array(
            [[0.5 * np.trace(op @ g).real for g in basis] for op in ops], dtype=float
        )
        offsets = np.array([0.25 * np.trace(op).real for op in ops], dtype=float)
        return design, offsets

    def condition_number(self) -> float:
        design, offsets = self.measurement_matrix()
        full = np.column_stack([offsets * 4.0, design])
        return float(np.linalg.cond(full))

    def verify_complete(self) -> float:
        design, offsets = self.measurement_matrix()
        full = np.column_stack([offsets * 4.0, design])
        rank = np.linalg.matrix_rank(full, tol=1e-10)
        if rank < 16:
            raise IncompleteProjectorSetError(
                f"measurement matrix rank {rank} < 16; set is not informationally complete"
            )
        return self.condition_number()


def _pair_phases(pair: tuple[int, int], delta: float) -> tuple[float, float, float]:
    # Relative phase of c_j versus c_i at port X:
    #   (-3,-1): phi1            (+1,+3): phi2
    #   (-3,+1): phi3            (-3,+3): phi2 + phi3
    #   (-1,+1): phi3 - phi1     (-1,+3): phi2 + phi3 - phi1
    if pair == (-3, -1):
        return (delta, 0.0, 0.0)
    if pair == (+1, +3):
        return (0.0, delta, 0.0)
    if pair == (-3, +1):
        return (0.0, 0.0, delta)
    if pair == (-3, +3):
        return (0.0, delta, 0.0)
    if pair == (-1, +1):
        return (0.0, 0.0, delta)
    if pair == (-1, +3):
        return (0.0, delta, 0.0)
    raise NetworkConfigError(f"unknown mode pair {pair}")


def _best_port(modes: tuple[int, ...]) -> str:
    # Same-combiner settings read the first-stage monitor port (half the
    # split loss of the final ports); anything crossing the stages must
    # be read at X.
    if set(modes) <= {-3, -1}:
        return "A"
    if set(modes) <= {+1, +3}:
        return "B"
    return "X"


def tomography_projectors(base: NetworkConfig | None = None) -> ProjectorSet:
    """Singles plus pairwise interference settings (16 rank-1 projectors).

    Pairwise projections shutter the two non-participating paths and set
    the phase knobs so the pair interferes at relative phase 0 or pi/2.
    Each setting is read at the port where its projector carries the
    least split loss.
    """
    base = base or standard_network()
    entries: list[ProjectorConfig] = []
    for mode_l in QUDIT_MODES:
        cfg = base.with_shutters([mode_l]).with_phases((0.0, 0.0, 0.0))
        entries.append(ProjectorConfig(f"single_{mode_l:+d}", cfg, _best_port((mode_l,))))
    for i, mode_i in enumerate(QUDIT_MODES):
        for mode_j in QUDIT_MODES[i + 1 :]:
            for tag, delta in (("re", 0.0), ("im", 0.5 * math.pi)):
                cfg = base.with_shutters([mode_i, mode_j]).with_phases(
                    _pair_phases((mode_i, mode_j), delta)
                )
                entries.append(
                    ProjectorConfig(
                        f"pair_{mode_i:+d}{mode_j:+d}_{tag}",
                        cfg,
                        _best_port((mode_i, mode_j)),
                    )
                )
    return ProjectorSet(tuple(entries))


# ----------------------------------------------------------------------
# Simulation and reconstruction
# ----------------------------------------------------------------------


def simulate_projector_counts(
    state: QuditState,
    projectors: ProjectorSet,
    det: DetectionConfig,
    seed: int,
) -> list[CountRecord]:
    """Binomial click counts for every projector configuration."""
    records = []
    for idx, entry in enumerate(projectors.entries):
        prob = network_probabilities(state, entry.config)[entry.port]
        mu_eff = det.mean_photons * det.detector_efficiency * prob
        p_click = 1.0 - math.exp(-mu_eff) * (1.0 - det.background_rate)
        rng = spawn_rng(seed, "qudit", idx)
        clicks = int(rng.binomial(det.trials, p_click))
        records.append(
            CountRecord(
                configuration_id=entry.configuration_id,
                port=entry.port,
                phase_bin_deg=0.0,
                trials=det.trials,
                clicks=clicks,
                seed=seed,
            )
        )
    return records


def probabilities_from_counts(
    records: Sequence[CountRecord], det: DetectionConfig
) -> dict[str, float]:
    """Invert the click model back to per-photon detection probabilities."""
    scale = det.mean_photons * det.detector_efficiency
    if scale <= 0.0:
        raise ValueError("click model inversion needs mean_photons * efficiency > 0")
    out = {}
    for rec in records:
        frac = min(rec.clicks / rec.trials, 1.0 - 1e-12)
        out[rec.configuration_id] = max(
            -math.log((1.0 - frac) / (1.0 - det.background_rate)) / scale, 0.0
        )
    return out


@dataclass(frozen=True)
class QuditReconstruction:
    rho: DensityMatrix
    residual: float
    condition_number: float
    fidelity: float | None = None


def reconstruct_qudit(
    probabilities: Mapping[str, float],
    projectors: ProjectorSet | None = None,
    target: QuditState | None = None,
    physicality_projection: bool = False,
) -> QuditReconstruction:
    """Least-squares linear inversion of the 16-projector measurements.

    ``probabilities`` maps configuration ids to per-photon detection
    probabilities (see ``probabilities_from_counts`` for click data).
    """
    projectors = projectors or tomography_projectors()
    missing = [e.configuration_id for e in projectors.entries if e.configuration_id not in probabilities]
    if missing:
        raise IncompleteProjectorSetError(f"missing counts for projectors: {missing}")
    cond = projectors.verify_complete()
    design, offsets = projectors.measurement_matrix()
    values = np.array(
        [probabilities[e.configuration_id] for e in projectors.entries], dtype=float
    )
    coords, residuals, rank, _ = np.linalg.lstsq(design, values - offsets, rcond=None)
    if rank < 15:
        raise IncompleteProjectorSetError(f"design rank {rank} < 15")
    fit_residual = math.sqrt(float(np.sum((design @ coords - (values - offsets)) ** 2)))
    rho = density_from_bloch(coords, dim=4)
    if physicality_projection:
        from .qubit import project_physical

        rho = project_physical(rho)
    fid = None if target is None else state_fidelity(rho, target.amplitudes)
    return QuditReconstruction(
        rho=rho, residual=fit_residual, condition_number=cond, fidelity=fid
    )


# ----------------------------------------------------------------------
# Extension budgets
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ExtensionBudget:
    device: str
    dimension: int
    loss: float
    crosstalk_suppression_db: float

    def to_json_dict(self) -> dict:
        return {
            "device": self.device,
            "dimension": self.dimension,
            "loss": self.loss,
            "crosstalk_suppression_db": self.crosstalk_suppression_db,
        }


EXTENSION_PRESETS = {
    "current": ExtensionBudget("Current", 2, 0.75, 27.0),
    "3bs": ExtensionBudget("3BS", 4, 0.88, 27.0),
    "oam-sorter": ExtensionBudget("OAM-sorter", 15, 0.40, 30.0),
}


def extension_budget(preset: str) -> ExtensionBudget:
    """Loss/crosstalk budget of a device family: Current, 3BS or OAM-sorter."""
    key = preset.strip().lower().replace("_", "-").replace(" ", "-")
    if key not in EXTENSION_PRESETS:
        raise KeyError(
            f"unknown extension preset {preset!r}; expected one of "
            f"{sorted(EXTENSION_PRESETS)}"
        )
    return EXTENSION_PRESETS[key]
