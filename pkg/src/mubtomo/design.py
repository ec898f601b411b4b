"""Bipartite measurement plans and their tomographic-completeness certificate.

A joint projector pairs state ``(m, i)`` on photon A with the complex
conjugate of state ``(n, j)`` on photon B.  Bipartite vectors use row-major
ordering: the amplitude for modes ``(alpha, beta)`` sits at flat index
``alpha * d + beta`` (zero-based), i.e. ``np.kron(a, conj(b))``.
"""
from __future__ import annotations

import io
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionMismatchError
from .mubs import MubSet, MubVector

OVERCOMPLETE = "overcomplete"
COMPLETE = "complete"
CUSTOM = "custom"
PLAN_KINDS = (OVERCOMPLETE, COMPLETE)


@dataclass(frozen=True)
class JointProjector:
    settings: tuple[int, int, int, int]
    vector: np.ndarray
    # single-photon factors: vector == kron(photon_a, photon_b), photon_b already conjugated
    photon_a: np.ndarray | None = None
    photon_b: np.ndarray | None = None

    @property
    def matrix(self) -> np.ndarray:
        return np.outer(self.vector, self.vector.conj())


def joint_vector(a: MubVector, b: MubVector) -> np.ndarray:
    """Bipartite amplitude vector for A in state ``a`` and B projected on ``conj(b)``."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"photon dimensions differ: {a.dim} vs {b.dim}")
    return np.kron(a.amplitudes, b.amplitudes.conj())


@dataclass(frozen=True)
class MeasurementPlan:
    dim: int
    kind: str
    projectors: tuple[JointProjector, ...]
    quadrant_count: int
    settings_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d, n = self.dim, len(self.projectors)
        if self.kind == OVERCOMPLETE:
            expected = ((d * (d + 1)) ** 2, (d + 1) ** 2)
        elif self.kind == COMPLETE:
            expected = (d**4, d**2)
        else:
            expected = (n, self.quadrant_count)
        if (n, self.quadrant_count) != expected:
            raise ValueError(
                f"{self.kind} plan for d={d} needs (size, Q)={expected}, "
                f"got {(n, self.quadrant_count)}"
            )
        index = {p.settings: k for k, p in enumerate(self.projectors)}
        object.__setattr__(self, "settings_index", index)

    def __len__(self):
        return len(self.projectors)

    @property
    def hilbert_dim(self) -> int:
        return self.dim**2

    @cached_property
    def vectors(self) -> np.ndarray:
        """All projector vectors stacked into a (len(plan), D) array."""
        return np.array([p.vector for p in self.projectors])

    @cached_property
    def settings(self) -> np.ndarray:
        return np.array([p.settings for p in self.projectors], dtype=int)

    def quadrants(self) -> dict[tuple[int, int], np.ndarray]:
        """Row indices grouped by basis pair ``(m, n)``."""
        groups: dict[tuple[int, int], list[int]] = {}
        for k, (m, _, n, _) in enumerate(self.settings):
            groups.setdefault((int(m), int(n)), []).append(k)
        return {key: np.array(v) for key, v in groups.items()}

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# dim={self.dim} kind={self.kind} Q={self.quadrant_count}\n")
        cols = ["m", "i", "n", "j"]
        for q in range(self.hilbert_dim):
            cols += [f"re{q}", f"im{q}"]
        buf.write(",".join(cols) + "\n")
        for p in self.projectors:
            vals = [str(s) for s in p.settings]
            for c in p.vector:
                vals += [repr(float(c.real)), repr(float(c.imag))]
            buf.write(",".join(vals) + "\n")
        return buf.getvalue()


def _plan(mub_set: MubSet, states: list[MubVector], kind: str, q: int) -> MeasurementPlan:
    projectors = tuple(
        JointProjector((a.basis_index, a.state_index, b.basis_index, b.state_index),
                       joint_vector(a, b), a.amplitudes, b.amplitudes.conj())
        for a, b in itertools.product(states, repeat=2)
    )
    return MeasurementPlan(mub_set.dim, kind, projectors, q)


def build_overcomplete_plan(mub_set: MubSet) -> MeasurementPlan:
    """Every pairing of the d(d+1) single-photon states, in lexicographic (m, i, n, j) order."""
    d = mub_set.dim
    return _plan(mub_set, list(mub_set.vectors()), OVERCOMPLETE, (d + 1) ** 2)


def complete_plan_states(mub_set: MubSet) -> list[MubVector]:
    """Per-photon subset: all of basis 1, and states 1..d-1 of every other basis."""
    d = mub_set.dim
    return [v for v in mub_set.vectors() if v.basis_index == 1 or v.state_index < d]


def build_complete_plan(mub_set: MubSet) -> MeasurementPlan:
    """The minimal d**4-projector plan (last state of each basis m >= 2 dropped)."""
    d = mub_set.dim
    return _plan(mub_set, complete_plan_states(mub_set), COMPLETE, d**2)


def plan_from_states(mub_set: MubSet, states: list[MubVector]) -> MeasurementPlan:
    """Plan over all pairings of an arbitrary per-photon state list (kind ``custom``)."""
    n_bases = len({v.basis_index for v in states})
    return _plan(mub_set, states, CUSTOM, n_bases**2)


def build_plan(mub_set: MubSet, kind: str) -> MeasurementPlan:
    if kind == OVERCOMPLETE:
        return build_overcomplete_plan(mub_set)
    if kind == COMPLETE:
        return build_complete_plan(mub_set)
    raise ValueError(f"unknown plan kind {kind!r}; expected one of {PLAN_KINDS}")


@dataclass(frozen=True)
class OperatorBasis:
    dim: int
    elements: np.ndarray  # shape (D**2, D, D)

    def __len__(self):
        return len(self.elements)

    def coefficients(self, rho: np.ndarray) -> np.ndarray:
        """Expansion coefficients Tr(rho @ G_mu); real for Hermitian rho."""
        return np.einsum("mab,ba->m", self.elements, rho).real

    def assemble(self, coeffs: np.ndarray) -> np.ndarray:
        return np.einsum("m,mab->ab", coeffs, self.elements)


def operator_basis(D: int) -> OperatorBasis:
    """Trace-orthonormal generalized Gell-Mann basis of D x D Hermitian matrices.

    Element 0 is ``I/sqrt(D)``, followed by the symmetric, antisymmetric and
    diagonal generators, each scaled so that ``Tr(G_mu G_nu) = delta``.
    """
    if D < 2:
        raise ValueError("operator basis needs D >= 2")
    elements = [np.eye(D, dtype=complex) / np.sqrt(D)]
    pairs = list(itertools.combinations(range(D), 2))
    s = 1.0 / np.sqrt(2.0)
    for j, k in pairs:
        g = np.zeros((D, D), dtype=complex)
        g[j, k] = g[k, j] = s
        elements.append(g)
    for j, k in pairs:
        g = np.zeros((D, D), dtype=complex)
        g[j, k] = -1j * s
        g[k, j] = 1j * s
        elements.append(g)
    for l in range(1, D):
        diag = np.zeros(D)
        diag[:l] = 1.0
        diag[l] = -l
        elements.append(np.diag(diag / np.sqrt(l * (l + 1))).astype(complex))
    return OperatorBasis(D, np.array(elements))


def b_matrix(plan: MeasurementPlan, basis: OperatorBasis) -> np.ndarray:
    """Real design matrix with entries <psi_k| G_nu |psi_k>, shape (len(plan), D**2)."""
    D = plan.hilbert_dim
    if basis.dim != D:
        raise DimensionMismatchError(f"plan acts on D={D}, basis on D={basis.dim}")
    psi = plan.vectors
    # <psi|G|psi> = sum_ab conj(psi_a) G_ab psi_b
    outer = np.einsum("ka,kb->kab", psi.conj(), psi).reshape(len(psi), D * D)
    return (outer @ basis.elements.reshape(len(basis), D * D).T).real


@dataclass(frozen=True)
class CompletenessReport:
    complete: bool
    condition_number: float
    min_singular_value: float
    rank: int
    shape: tuple[int, int]

    def to_json(self) -> str:
        return json.dumps({
            "complete": self.complete,
            "condition_number": self.condition_number,
            "min_singular_value": self.min_singular_value,
            "rank": self.rank,
            "shape": list(self.shape),
        }, indent=1)


def completeness_check(plan: MeasurementPlan, basis: OperatorBasis,
                       sv_floor: float = 1e-8) -> CompletenessReport:
    """Certify that the plan's design matrix has full column rank D**2.

    Singular values below ``sv_floor`` count as zero; the condition number is
    the ratio of largest to smallest singular value (``inf`` if rank deficient
    or if there are fewer rows than columns).
    """
    B = b_matrix(plan, basis)
    sv = np.linalg.svd(B, compute_uv=False)
    ncols = B.shape[1]
    rank = int(np.sum(sv > sv_floor))
    complete = rank == ncols
    smin = float(sv[-1]) if len(sv) == ncols else 0.0
    cond = float(sv[0] / smin) if complete else math.inf
    return CompletenessReport(complete, cond, smin, rank, B.shape)


def plan_size_mubs(d: int) -> int:
    """Number of joint measurements in the complete MUB plan."""
    return d**4


def plan_size_qst(d: int) -> int:
    """Measurement count of the overcomplete pairwise-superposition tomography it is compared with."""
    return (4 * math.comb(d, 2) + d) ** 2
