"""State-quality functionals: linear entropy, purity and Uhlmann fidelity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, PhysicalityError

PURE_TOL = 1e-12


def _as_square(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {rho.shape}")
    return rho


def purity(rho) -> float:
    rho = _as_square(rho)
    # Tr(rho^2) for Hermitian rho is the squared Frobenius norm
    return float(np.vdot(rho, rho).real)


def linear_entropy(rho) -> float:
    """``1 - Tr(rho^2)``; zero for pure states, ``1 - 1/D`` for ``I/D``."""
    return 1.0 - purity(rho)


def sqrtm_psd(a: np.ndarray, rcond: float = 0.0) -> np.ndarray:
    """Square root of a Hermitian PSD matrix.

    Eigenvalues below ``rcond`` times the largest one (and all negative
    ones) are set to zero before the root is taken.
    """
    w, v = np.linalg.eigh(a)
    w = np.where(w > rcond * w[-1], w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def _check_physical(rho: np.ndarray, name: str, tol: float = 1e-8) -> None:
    if not np.allclose(rho, rho.conj().T, atol=tol):
        raise PhysicalityError(f"{name} is not Hermitian")
    if np.linalg.eigvalsh(rho)[0] < -tol:
        raise PhysicalityError(f"{name} is not positive semidefinite")


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``Tr[sqrt(sqrt(sigma) rho sqrt(sigma))]^2``.

    When ``sigma`` is pure (linear entropy below 1e-12) this reduces to
    ``<psi|rho|psi>`` with ``psi`` the dominant eigenvector of ``sigma``.
    """
    rho, sigma = _as_square(rho), _as_square(sigma)
    if rho.shape != sigma.shape:
        raise DimensionMismatchError(f"shapes differ: {rho.shape} vs {sigma.shape}")
    _check_physical(rho, "rho")
    _check_physical(sigma, "sigma")
    if linear_entropy(sigma) < PURE_TOL:
        return pure_fidelity(rho, _dominant_vector(sigma))
    return general_fidelity(rho, sigma)


def _dominant_vector(sigma: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(sigma)
    return v[:, -1]


def pure_fidelity(rho: np.ndarray, psi: np.ndarray) -> float:
    psi = np.asarray(psi, dtype=complex)
    return float(np.clip(np.vdot(psi, rho @ psi).real, 0.0, 1.0))


def general_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``(Tr|sqrt(rho) sqrt(sigma)|)^2`` from the singular values of the product.

    Round-off eigenvalues are zeroed first: their square roots (about 1e-8
    for a value of 1e-16) would otherwise leak into the sum.
    """
    cut = len(rho) * np.finfo(float).eps
    a = sqrtm_psd(rho, cut) @ sqrtm_psd(sigma, cut)
    return float(np.clip(np.linalg.svd(a, compute_uv=False).sum() ** 2, 0.0, 1.0))


@dataclass(frozen=True)
class MetricReport:
    linear_entropy: float
    fidelity: float
    purity: float
    reference: str

    def as_dict(self) -> dict:
        return {
            "linear_entropy": self.linear_entropy,
            "fidelity": self.fidelity,
            "purity": self.purity,
            "reference": self.reference,
        }


def metric_report(rho, sigma, reference: str = "reference") -> MetricReport:
    p = purity(rho)
    return MetricReport(1.0 - p, fidelity(rho, sigma), p, reference)
