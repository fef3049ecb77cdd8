"""Qubit and qudit state algebra: Stokes parameters, density matrices,
linear-inversion reconstruction and fidelity scoring.

The logical basis is |0> = clockwise OAM unit (+1) and |1> =
counter-clockwise (-1).  The three measured observables are

    S1 = p_0 - p_1          (population difference),
    S2 = p_H - p_V          (coherence of the in-phase superpositions),
    S3 = p_D - p_A          (coherence of the quadrature superpositions),

and the density matrix follows from their expectation values as

    rho = (1/2) [[1 + S1, S2 - i S3],
                 [S2 + i S3, 1 - S1]].

For a pure state alpha|0> + beta|1> this gives S1 = |alpha|^2 -
|beta|^2, S2 = 2 Re(alpha conj(beta)), S3 = -2 Im(alpha conj(beta)); the
diagonal mode D = (|0> + i|1>)/sqrt(2) therefore sits at S3 = +1 and the
anti-diagonal mode A at S3 = -1.

Dimension-4 states use the same machinery through a generalized Bloch
decomposition over a traceless Hermitian operator basis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SQRT_HALF = math.sqrt(0.5)

# Operators whose expectation values are (S1, S2, S3). Note the index
# order: population first, then the two coherences.
STOKES_OPERATORS = np.array(
    [
        [[1.0, 0.0], [0.0, -1.0]],
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0j], [1.0j, 0.0]],
    ],
    dtype=np.complex128,
)

# Pure-state coefficients (alpha, beta) of the six named modes.
NAMED_STATES = {
    "R": (1.0, 0.0),
    "L": (0.0, 1.0),
    "H": (SQRT_HALF, SQRT_HALF),
    "V": (SQRT_HALF, -SQRT_HALF),
    "D": (SQRT_HALF, 1.0j * SQRT_HALF),
    "A": (SQRT_HALF, -1.0j * SQRT_HALF),
}


class PairSumError(ValueError):
    """A pair of complementary probabilities does not sum to ~1."""


class DimensionMismatchError(ValueError):
    """Operands act on Hilbert spaces of different dimension."""


@dataclass(frozen=True)
class PureQubit:
    """Normalized pure state alpha|0> + beta|1>."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state must be normalized, |alpha|^2+|beta|^2 = {norm}")

    @classmethod
    def named(cls, name: str) -> "PureQubit":
        try:
            alpha, beta = NAMED_STATES[name.upper()]
        except KeyError:
            raise KeyError(f"unknown state {name!r}; expected one of R, L, H, V, D, A")
        return cls(alpha, beta)

    @classmethod
    def from_bloch(cls, theta: float, phi: float) -> "PureQubit":
        """State at polar angle theta from |0> and azimuth phi."""
        return cls(math.cos(theta / 2.0), cmath_exp(phi) * math.sin(theta / 2.0))

    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=np.complex128)

    @property
    def relative_phase(self) -> float:
        """Phase of beta relative to alpha, in [0, 2*pi)."""
        return float(np.mod(np.angle(self.beta) - np.angle(self.alpha), 2.0 * math.pi))

    @property
    def weights(self) -> tuple[float, float]:
        return abs(self.alpha), abs(self.beta)


def cmath_exp(phi: float) -> complex:
    return complex(math.cos(phi), math.sin(phi))


@dataclass(frozen=True)
class StokesVector:
    s1: float
    s2: float
    s3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s1, self.s2, self.s3], dtype=float)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.as_array()))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian unit-trace operator of dimension 2 or 4.

    ``physicalized`` records whether the matrix went through
    ``project_physical`` (eigenvalues clipped to the probability
    simplex); raw linear-inversion output can carry small negative
    eigenvalues and is kept verbatim by default.
    """

    matrix: np.ndarray
    physicalized: bool = False

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"density matrix must be square, got {mat.shape}")
        if mat.shape[0] not in (2, 4):
            raise ValueError(f"supported dimensions are 2 and 4, got {mat.shape[0]}")
        if np.abs(mat - mat.conj().T).max() > 1e-12:
            raise ValueError("density matrix must be Hermitian within 1e-12")
        if abs(np.trace(mat).real - 1.0) > 1e-12 or abs(np.trace(mat).imag) > 1e-12:
            raise ValueError(f"density matrix must have unit trace, got {np.trace(mat)}")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)

    def to_json_dict(self) -> dict:
        stokes = (
            stokes_of(self).as_array() if self.dim == 2 else bloch_vector(self.matrix)
        )
        return {
            "dim": self.dim,
            "re": [float(v) for v in self.matrix.real.ravel()],
            "im": [float(v) for v in self.matrix.imag.ravel()],
            "physicalized": bool(self.physicalized),
            "stokes": [float(v) for v in stokes],
        }

    def to_json(self, path: str | Path | None = None, **extra) -> str:
        doc = {**self.to_json_dict(), **extra}
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DensityMatrix":
        dim = int(doc["dim"])
        re = np.asarray(doc["re"], dtype=float).reshape(dim, dim)
        im = np.asarray(doc["im"], dtype=float).reshape(dim, dim)
        return cls(re + 1j * im, physicalized=bool(doc.get("physicalized", False)))


def stokes_from_probabilities(
    p0: float,
    p1: float,
    p_h: float,
    p_v: float,
    p_d: float,
    p_a: float,
    pair_tolerance: float = 0.05,
) -> StokesVector:
    """Stokes components from the six projection probabilities.

    Each complementary pair must sum to 1 within ``pair_tolerance``
    (default 0.05 to admit counting noise).
    """
    pairs = {"0/1": (p0, p1), "H/V": (p_h, p_v), "D/A": (p_d, p_a)}
    for label, (p, q) in pairs.items():
        if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
            raise PairSumError(f"probabilities for pair {label} must lie in [0, 1]")
        if abs(p + q - 1.0) > pair_tolerance:
            raise PairSumError(
                f"pair {label} sums to {p + q:.4f}, outside 1 +- {pair_tolerance}"
            )
    return StokesVector(p0 - p1, p_h - p_v, p_d - p_a)


def density_from_stokes(s: StokesVector) -> DensityMatrix:
    """Linear-inversion density matrix from a Stokes vector."""
    arr = s.as_array()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"Stokes components must be finite, got {arr}")
    mat = 0.5 * (np.eye(2, dtype=np.complex128) + np.tensordot(arr, STOKES_OPERATORS, axes=1))
    return DensityMatrix(mat)


def stokes_of(rho: DensityMatrix) -> StokesVector:
    """Expectation values of the three Stokes operators."""
    if rho.dim != 2:
        raise DimensionMismatchError("Stokes vector is defined for dim 2; use bloch_vector")
    vals = [float(np.trace(rho.matrix @ op).real) for op in STOKES_OPERATORS]
    return StokesVector(*vals)


def pure_to_stokes(q: PureQubit) -> StokesVector:
    ab = q.alpha * np.conj(q.beta)
    return StokesVector(
        abs(q.alpha) ** 2 - abs(q.beta) ** 2,
        2.0 * float(ab.real),
        -2.0 * float(ab.imag),
    )


def _target_vector(target) -> np.ndarray:
    if isinstance(target, PureQubit):
        return target.vector()
    vec = np.asarray(getattr(target, "amplitudes", target), dtype=np.complex128).ravel()
    norm = np.linalg.norm(vec)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"target state must be normalized, |psi| = {norm}")
    return vec


def fidelity(rho: DensityMatrix, target) -> float:
    """Overlap <psi|rho|psi> of a state with a pure target."""
    vec = _target_vector(target)
    if vec.size != rho.dim:
        raise DimensionMismatchError(f"target dim {vec.size} != state dim {rho.dim}")
    return float(np.real(np.conj(vec) @ rho.matrix @ vec))


def _simplex_projection(values: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    u = np.sort(values)[::-1]
    css = np.cumsum(u) - 1.0
    rho_idx = np.nonzero(u - css / (np.arange(values.size) + 1) > 0)[0][-1]
    tau = css[rho_idx] / (rho_idx + 1)
    return np.maximum(values - tau, 0.0)


def project_physical(rho: DensityMatrix) -> DensityMatrix:
    """Nearest (Frobenius) positive-semidefinite unit-trace matrix.

    Eigenvalues are projected onto the probability simplex with the
    eigenvectors kept fixed; already-physical input passes through
    unchanged, so the operation is idempotent.
    """
    vals, vecs = np.linalg.eigh(rho.matrix)
    if vals.min() >= 0.0 and abs(vals.sum() - 1.0) <= 1e-12:
        return DensityMatrix(rho.matrix, physicalized=True)
    clipped = _simplex_projection(vals)
    mat = (vecs * clipped) @ vecs.conj().T
    mat = 0.5 * (mat + mat.conj().T)
    mat /= np.trace(mat).real
    return DensityMatrix(mat, physicalized=True)


def hermitian_basis(dim: int) -> list[np.ndarray]:
    """Traceless Hermitian operator basis with Tr(G_a G_b) = 2 delta_ab.

    For dim 2 these are the three Stokes operators; for higher
    dimensions the generalized Gell-Mann construction (symmetric,
    antisymmetric and diagonal families) is used.  A dim-d state is
    rho = I/d + (1/2) sum_a x_a G_a with x_a = Tr(rho G_a).
    """
    if dim == 2:
        return [op.copy() for op in STOKES_OPERATORS]
    ops: list[np.ndarray] = []
    for j in range(dim):
        for k in range(j + 1, dim):
            sym = np.zeros((dim, dim), dtype=np.complex128)
            sym[j, k] = sym[k, j] = 1.0
            ops.append(sym)
            anti = np.zeros((dim, dim), dtype=np.complex128)
            anti[j, k] = -1.0j
            anti[k, j] = 1.0j
            ops.append(anti)
    for m in range(1, dim):
        diag = np.zeros((dim, dim), dtype=np.complex128)
        scale = math.sqrt(2.0 / (m * (m + 1)))
        for j in range(m):
            diag[j, j] = scale
        diag[m, m] = -m * scale
        ops.append(diag)
    return ops


def bloch_vector(matrix: np.ndarray) -> np.ndarray:
    """Generalized Bloch coordinates x_a = Tr(rho G_a)."""
    matrix = np.asarray(matrix, dtype=np.complex128)
    dim = matrix.shape[0]
    return np.array(
        [float(np.trace(matrix @ op).real) for op in hermitian_basis(dim)], dtype=float
    )


def density_from_bloch(coords: np.ndarray, dim: int) -> DensityMatrix:
    """Inverse of ``bloch_vector`` for a dim-d system."""
    coords = np.asarray(coords, dtype=float)
    basis = hermitian_basis(dim)
    if coords.size != len(basis):
        raise DimensionMismatchError(
            f"expected {len(basis)} Bloch components for dim {dim}, got {coords.size}"
        )
    mat = np.eye(dim, dtype=np.complex128) / dim
    for x, op in zip(coords, basis):
        mat = mat + 0.5 * x * op
    return DensityMatrix(mat)
