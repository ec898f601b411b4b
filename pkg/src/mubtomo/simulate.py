"""Target states, synthetic coincidence counts, and count-to-probability conversion.

The source emits OAM-correlated pairs ``sum_l lambda_l |l>_A |l>_B`` with a
Gaussian Schmidt envelope ``lambda_l ~ exp(-l**2 / (2 w**2))``.  Because the
B-side projectors are conjugated, this state shows correlations (not
anti-correlations) in every basis pair.

Counts are integers over an integration window ``T``.  The accidental
estimate for a setting is ``U = A * B * gate_time / T``, which is the
rate product ``(A/T)(B/T) * gate_time`` expressed as counts in the window.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace

import numpy as np

from .design import COMPLETE, OVERCOMPLETE, MeasurementPlan, JointProjector
from .errors import DimensionMismatchError, PhysicalityError
from .mubs import _check_dim, oam_labels


def schmidt_coefficients(d: int, width: float = math.inf) -> np.ndarray:
    """Normalized Schmidt amplitudes over ``oam_labels(d)``.

    ``width=inf`` gives the flat spectrum ``1/sqrt(d)``.
    """
    _check_dim(d)
    if not width > 0:
        raise ValueError(f"Schmidt width must be positive, got {width}")
    ell = np.array(oam_labels(d), dtype=float)
    if math.isinf(width):
        lam = np.ones(d)
    else:
        # shifted so the largest amplitude is 1; avoids underflow at small widths
        lam = np.exp(-(ell**2 - np.min(ell**2)) / (2.0 * width**2))
    return lam / np.linalg.norm(lam)


def target_vector(d: int, width: float = math.inf) -> np.ndarray:
    lam = schmidt_coefficients(d, width)
    psi = np.zeros(d * d, dtype=complex)
    psi[np.arange(d) * (d + 1)] = lam
    return psi


def target_state(d: int, width: float = math.inf, white_noise: float = 0.0) -> np.ndarray:
    """Density matrix of the Schmidt-envelope pair state.

    ``white_noise`` mixes in ``I/D`` with that weight; the default gives the
    pure state.
    """
    if not 0.0 <= white_noise <= 1.0:
        raise ValueError("white_noise must lie in [0, 1]")
    psi = target_vector(d, width)
    rho = np.outer(psi, psi.conj())
    if white_noise:
        D = d * d
        rho = (1.0 - white_noise) * rho + white_noise * np.eye(D) / D
    return rho


def maximally_entangled(d: int) -> np.ndarray:
    return target_state(d, math.inf)


def _check_hermitian(rho: np.ndarray, tol: float = 1e-10) -> None:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got {rho.shape}")
    if not np.allclose(rho, rho.conj().T, atol=tol):
        raise PhysicalityError("density matrix is not Hermitian")


def true_probability(rho, proj: JointProjector) -> float:
    """``Tr(rho Pi)`` for one projector; values below -1e-12 are an error."""
    rho = np.asarray(rho, dtype=complex)
    _check_hermitian(rho)
    if rho.shape[0] != len(proj.vector):
        raise DimensionMismatchError(
            f"rho is {rho.shape[0]}-dimensional, projector {len(proj.vector)}")
    p = float(np.vdot(proj.vector, rho @ proj.vector).real)
    if p < -1e-12:
        raise PhysicalityError(f"negative probability {p:.3e}; rho is not PSD")
    return max(p, 0.0)


def plan_probabilities(rho, plan: MeasurementPlan) -> np.ndarray:
    """Vectorized ``Tr(rho Pi_k)`` over a plan, clipped at zero."""
    rho = np.asarray(rho, dtype=complex)
    _check_hermitian(rho)
    if rho.shape[0] != plan.hilbert_dim:
        raise DimensionMismatchError(
            f"rho is {rho.shape[0]}-dimensional, plan needs {plan.hilbert_dim}")
    psi = plan.vectors
    p = np.einsum("ka,ab,kb->k", psi.conj(), rho, psi).real
    if p.min() < -1e-12:
        raise PhysicalityError(f"negative probability {p.min():.3e}; rho is not PSD")
    return np.clip(p, 0.0, None)


def marginal_probabilities(rho, plan: MeasurementPlan) -> tuple[np.ndarray, np.ndarray]:
    """Single-arm detection probabilities for the A and B halves of each projector."""
    rho = np.asarray(rho, dtype=complex)
    d = plan.dim
    r = rho.reshape(d, d, d, d)
    rho_a = np.einsum("abcb->ac", r)
    rho_b = np.einsum("abad->bd", r)
    a_vecs = np.array([p.photon_a for p in plan.projectors])
    b_vecs = np.array([p.photon_b for p in plan.projectors])
    pa = np.einsum("ka,ab,kb->k", a_vecs.conj(), rho_a, a_vecs).real
    pb = np.einsum("ka,ab,kb->k", b_vecs.conj(), rho_b, b_vecs).real
    return np.clip(pa, 0.0, None), np.clip(pb, 0.0, None)


@dataclass(frozen=True)
class SourceModel:
    """Photon-pair source and detection chain.

    Rates are per second, times in seconds.  ``schmidt_width`` may be
    ``math.inf`` for a flat OAM spectrum.
    """

    dim: int
    schmidt_width: float = math.inf
    pair_rate: float = 2.0e5
    arm_efficiency_a: float = 0.1
    arm_efficiency_b: float = 0.1
    background_a: float = 500.0
    background_b: float = 500.0
    gate_time: float = 10e-9
    integration_time: float = 1.0
    white_noise: float = 0.0

    def __post_init__(self):
        _check_dim(self.dim)
        if not self.schmidt_width > 0:
            raise ValueError("schmidt_width must be positive")
        for name in ("pair_rate", "background_a", "background_b"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("arm_efficiency_a", "arm_efficiency_b"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.gate_time <= 0 or self.integration_time <= 0:
            raise ValueError("gate_time and integration_time must be positive")

    def state(self) -> np.ndarray:
        return target_state(self.dim, self.schmidt_width, self.white_noise)


@dataclass(frozen=True)
class CountRecord:
    settings: tuple[int, int, int, int]
    C: int
    A: int
    B: int
    U: float


@dataclass(frozen=True)
class Dataset:
    """Counts for every setting of a plan, row-aligned with the plan."""

    dim: int
    kind: str
    settings: np.ndarray  # (K, 4) int
    C: np.ndarray
    A: np.ndarray
    B: np.ndarray
    gate_time: float
    integration_time: float
    seed: int = 0

    def __post_init__(self):
        for name in ("settings", "C", "A", "B"):
            arr = np.array(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        k = len(self.settings)
        if not (len(self.C) == len(self.A) == len(self.B) == k):
            raise ValueError("count arrays and settings must have the same length")

    def __len__(self):
        return len(self.settings)

    @property
    def U(self) -> np.ndarray:
        return self.A * self.B.astype(float) * self.gate_time / self.integration_time

    @property
    def records(self) -> list[CountRecord]:
        U = self.U
        return [
            CountRecord(tuple(int(x) for x in s), int(c), int(a), int(b), float(u))
            for s, c, a, b, u in zip(self.settings, self.C, self.A, self.B, U)
        ]

    def check_alignment(self, plan: MeasurementPlan) -> None:
        if plan.dim != self.dim or len(plan) != len(self):
            raise DimensionMismatchError(
                f"dataset (d={self.dim}, {len(self)} rows) does not match "
                f"plan (d={plan.dim}, {len(plan)} rows)")
        if not np.array_equal(plan.settings, self.settings):
            raise DimensionMismatchError("dataset settings are not aligned with the plan")

    def subset(self, plan: MeasurementPlan) -> "Dataset":
        """Rows matching ``plan``'s settings, reordered to the plan's order."""
        index = {tuple(int(x) for x in s): k for k, s in enumerate(self.settings)}
        try:
            rows = np.array([index[tuple(int(x) for x in s)] for s in plan.settings])
        except KeyError as exc:
            raise DimensionMismatchError(f"setting {exc.args[0]} missing from dataset") from None
        return replace(self, kind=plan.kind, settings=self.settings[rows],
                       C=self.C[rows], A=self.A[rows], B=self.B[rows])

    def scaled(self, factor: int) -> "Dataset":
        """Counts and integration window multiplied by an integer ``factor``."""
        return replace(self, C=self.C * factor, A=self.A * factor, B=self.B * factor,
                       integration_time=self.integration_time * factor)

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# dim={self.dim}\n# kind={self.kind}\n"
                  f"# gate_time={self.gate_time!r}\n"
                  f"# integration_time={self.integration_time!r}\n"
                  f"# seed={self.seed}\n")
        buf.write("m,i,n,j,C,A,B\n")
        for s, c, a, b in zip(self.settings, self.C, self.A, self.B):
            buf.write(f"{s[0]},{s[1]},{s[2]},{s[3]},{c},{a},{b}\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "Dataset":
        header: dict[str, str] = {}
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key.strip()] = value.strip()
            elif line.startswith("m,"):
                continue
            else:
                rows.append([int(x) for x in line.split(",")])
        missing = {"dim", "kind", "gate_time", "integration_time"} - header.keys()
        if missing:
            raise ValueError(f"dataset header lacks {sorted(missing)}")
        if not rows:
            raise ValueError("dataset has no rows")
        arr = np.array(rows, dtype=np.int64)
        return cls(int(header["dim"]), header["kind"], arr[:, :4], arr[:, 4], arr[:, 5],
                   arr[:, 6], float(header["gate_time"]),
                   float(header["integration_time"]), int(header.get("seed", 0)))


def expected_counts(plan: MeasurementPlan, model: SourceModel, rho=None):
    """Mean coincidence and single counts per setting: ``(C, A, B)`` arrays."""
    if model.dim != plan.dim:
        raise DimensionMismatchError(f"model d={model.dim}, plan d={plan.dim}")
    rho = model.state() if rho is None else np.asarray(rho, dtype=complex)
    T = model.integration_time
    n_pairs = model.pair_rate * T
    p = plan_probabilities(rho, plan)
    pa, pb = marginal_probabilities(rho, plan)
    mean_a = n_pairs * model.arm_efficiency_a * pa + model.background_a * T
    mean_b = n_pairs * model.arm_efficiency_b * pb + model.background_b * T
    accidentals = mean_a * mean_b * model.gate_time / T
    mean_c = n_pairs * model.arm_efficiency_a * model.arm_efficiency_b * p + accidentals
    return mean_c, mean_a, mean_b


def simulate_counts(plan: MeasurementPlan, model: SourceModel, rho=None,
                    seed: int = 0) -> Dataset:
    """Poisson-sample coincidences and singles for every setting of ``plan``.

    Each setting draws from its own generator seeded by ``(seed, m, i, n, j)``,
    so a setting gets identical counts whichever plan it appears in.
    """
    mean_c, mean_a, mean_b = expected_counts(plan, model, rho)
    C = np.empty(len(plan), dtype=np.int64)
    A = np.empty_like(C)
    B = np.empty_like(C)
    for k, s in enumerate(plan.settings):
        rng = np.random.default_rng([seed, *(int(x) for x in s)])
        C[k], A[k], B[k] = rng.poisson([mean_c[k], mean_a[k], mean_b[k]])
    return Dataset(plan.dim, plan.kind, plan.settings, C, A, B,
                   model.gate_time, model.integration_time, seed)


def quadrant_count(kind: str, d: int) -> int:
    if kind == OVERCOMPLETE:
        return (d + 1) ** 2
    if kind == COMPLETE:
        return d**2
    raise ValueError(f"no quadrant count defined for plan kind {kind!r}")


def normalize_probabilities(data: Dataset) -> np.ndarray:
    """Convert counts to joint detection probabilities.

    Each setting's accidental-corrected contrast ``(C - U)/U`` is floored at
    zero and scaled by a common factor so the whole plan sums to ``Q``, the
    number of ``d x d`` basis-pair quadrants (``(d+1)**2`` overcomplete,
    ``d**2`` complete).  Dividing by ``U`` removes per-mode detection
    efficiency, which enters both singles channels.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    U = data.U
    if np.any(U <= 0):
        raise ValueError("accidental estimate is zero for some setting; "
                         "singles counts must be positive")
    contrast = np.clip((data.C - U) / U, 0.0, None)
    total = contrast.sum()
    if total == 0:
        return np.zeros(len(data))
    return quadrant_count(data.kind, data.dim) * contrast / total


def quantum_contrast(record: CountRecord) -> float:
    """Coincidences over expected accidentals, ``C / U``."""
    if record.U <= 0:
        raise ValueError("accidental estimate must be positive")
    return record.C / record.U
