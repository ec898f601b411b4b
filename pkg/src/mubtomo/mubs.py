"""Complete sets of mutually unbiased bases for OAM subspaces, d = 2..5.

Every basis beyond the computational one is a dephased complex Hadamard
matrix divided by sqrt(d).  The phases are stored as integer exponents ``k``
of the root of unity ``exp(2j*pi*k/n)`` so the tables are exact; they are
converted to complex doubles only when a :class:`MubSet` is built.

Vector ``(m, i)`` has basis index ``m`` in ``1..d+1`` and state index ``i``
in ``1..d`` (one-based, matching the usual tabulation).  Amplitude ``l``
multiplies the OAM mode ``oam_labels(d)[l]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UnsupportedDimensionError

SUPPORTED_DIMENSIONS = (2, 3, 4, 5)

# (root order n, [basis 2, basis 3, ...]) with each basis given row by row as
# exponents k of exp(2j*pi*k/n).  Basis 1 is the identity and is not stored.
_PHASE_TABLES: dict[int, tuple[int, list[list[list[int]]]]] = {
    2: (4, [
        [[0, 0], [0, 2]],
        [[0, 1], [0, 3]],
    ]),
    3: (3, [
        [[0, 0, 0], [0, 1, 2], [0, 2, 1]],
        [[0, 1, 1], [0, 2, 0], [0, 0, 2]],
        [[0, 2, 2], [0, 0, 1], [0, 1, 0]],
    ]),
    4: (4, [
        [[0, 0, 0, 0], [0, 0, 2, 2], [0, 2, 2, 0], [0, 2, 0, 2]],
        [[0, 0, 3, 1], [0, 0, 1, 3], [0, 2, 1, 1], [0, 2, 3, 3]],
        [[0, 1, 2, 1], [0, 3, 2, 3], [0, 1, 0, 3], [0, 3, 0, 1]],
        [[0, 1, 1, 2], [0, 3, 3, 2], [0, 1, 3, 0], [0, 3, 1, 0]],
    ]),
    5: (5, [
        [[0, 0, 0, 0, 0], [0, 1, 2, 3, 4], [0, 2, 4, 1, 3],
         [0, 3, 1, 4, 2], [0, 4, 3, 2, 1]],
        [[0, 1, 4, 4, 1], [0, 2, 1, 2, 0], [0, 3, 3, 0, 4],
         [0, 4, 0, 3, 3], [0, 0, 2, 1, 2]],
        [[0, 2, 3, 3, 2], [0, 3, 0, 1, 1], [0, 4, 2, 4, 0],
         [0, 0, 4, 2, 4], [0, 1, 1, 0, 3]],
        [[0, 3, 2, 2, 3], [0, 4, 4, 0, 2], [0, 0, 1, 3, 1],
         [0, 1, 3, 1, 0], [0, 2, 0, 4, 4]],
        [[0, 4, 1, 1, 4], [0, 0, 3, 4, 3], [0, 1, 0, 2, 2],
         [0, 2, 2, 0, 1], [0, 3, 4, 3, 0]],
    ]),
}

_OAM_LABELS = {
    2: (-2, 2),
    3: (-1, 0, 1),
    4: (-2, -1, 1, 2),
    5: (-2, -1, 0, 1, 2),
}


def _check_dim(d: int) -> None:
    if d not in SUPPORTED_DIMENSIONS:
        raise UnsupportedDimensionError(
            f"no tabulated MUB set for d={d}; supported: {SUPPORTED_DIMENSIONS}"
        )


def root_of_unity(k: int, n: int) -> complex:
    """Return exp(2j*pi*k/n), exact whenever the angle is a quarter turn."""
    k %= n
    if (4 * k) % n == 0:
        return (1, 1j, -1, -1j)[4 * k // n]
    angle = 2.0 * np.pi * k / n
    return complex(np.cos(angle), np.sin(angle))


def oam_labels(d: int) -> list[int]:
    """OAM values spanning the d-dimensional subspace (``l = 0`` skipped for d=2, 4)."""
    _check_dim(d)
    return list(_OAM_LABELS[d])


@dataclass(frozen=True)
class MubVector:
    dim: int
    amplitudes: np.ndarray
    basis_index: int
    state_index: int

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} amplitudes, got shape {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def key(self) -> tuple[int, int]:
        return (self.basis_index, self.state_index)


@dataclass(frozen=True)
class MubSet:
    dim: int
    bases: tuple[tuple[MubVector, ...], ...]
    oam_labels: tuple[int, ...]

    def vector(self, m: int, i: int) -> MubVector:
        """Vector ``i`` of basis ``m`` (both one-based)."""
        if not (1 <= m <= len(self.bases) and 1 <= i <= self.dim):
            raise IndexError(f"no vector (m={m}, i={i}) in a d={self.dim} set")
        return self.bases[m - 1][i - 1]

    def matrix(self, m: int) -> np.ndarray:
        """Basis ``m`` as a d x d array whose rows are the basis vectors."""
        return np.array([v.amplitudes for v in self.bases[m - 1]])

    def vectors(self):
        for basis in self.bases:
            yield from basis

    def to_json(self) -> str:
        doc = {
            "dim": self.dim,
            "oam_labels": list(self.oam_labels),
            "vectors": [
                {
                    "m": v.basis_index,
                    "i": v.state_index,
                    "amplitudes": [[float(c.real), float(c.imag)] for c in v.amplitudes],
                }
                for v in self.vectors()
            ],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "MubSet":
        doc = json.loads(text)
        d = int(doc["dim"])
        grouped: dict[int, dict[int, MubVector]] = {}
        for entry in doc["vectors"]:
            amps = [complex(re, im) for re, im in entry["amplitudes"]]
            v = MubVector(d, np.array(amps), int(entry["m"]), int(entry["i"]))
            grouped.setdefault(v.basis_index, {})[v.state_index] = v
        bases = tuple(
            tuple(grouped[m][i] for i in sorted(grouped[m])) for m in sorted(grouped)
        )
        return cls(d, bases, tuple(int(x) for x in doc["oam_labels"]))


def _basis_from_rows(d: int, m: int, rows: Sequence[Sequence[complex]]) -> tuple[MubVector, ...]:
    return tuple(MubVector(d, np.asarray(row), m, i + 1) for i, row in enumerate(rows))


def build_mub_set(d: int) -> MubSet:
    """Build the tabulated complete set of d+1 mutually unbiased bases.

    Raises
    ------
    UnsupportedDimensionError
        If ``d`` is not one of 2, 3, 4, 5.
    """
    _check_dim(d)
    n, tables = _PHASE_TABLES[d]
    norm = 1.0 / np.sqrt(d)
    bases = [_basis_from_rows(d, 1, np.eye(d, dtype=complex))]
    for m, table in enumerate(tables, start=2):
        rows = [[root_of_unity(k, n) * norm for k in row] for row in table]
        bases.append(_basis_from_rows(d, m, rows))
    return MubSet(d, tuple(bases), tuple(oam_labels(d)))


@dataclass(frozen=True)
class UnbiasednessReport:
    passed: bool
    worst_deviation: float
    tol: float

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return f"unbiasedness {status}: worst deviation {self.worst_deviation:.3e} (tol {self.tol:g})"


def overlap_table(mub_set: MubSet) -> np.ndarray:
    """Squared overlaps |<psi_mi|psi_nj>|^2 as an array indexed [m, n, i, j] (zero-based)."""
    mats = np.array([mub_set.matrix(m) for m in range(1, len(mub_set.bases) + 1)])
    gram = np.einsum("mia,nja->mnij", mats.conj(), mats)
    return np.abs(gram) ** 2


def verify_unbiasedness(mub_set: MubSet, tol: float = 1e-12) -> UnbiasednessReport:
    """Check every pair of vectors against the mutual-unbiasedness conditions.

    Same-basis overlaps must equal the Kronecker delta and cross-basis overlaps
    must equal ``1/d``, each within ``tol``.  The report carries the largest
    absolute deviation found; failure is reported, never raised.
    """
    d = mub_set.dim
    table = overlap_table(mub_set)
    nb = table.shape[0]
    expected = np.full_like(table, 1.0 / d)
    for m in range(nb):
        expected[m, m] = np.eye(d)
    worst = float(np.max(np.abs(table - expected)))
    return UnbiasednessReport(worst <= tol, worst, tol)
