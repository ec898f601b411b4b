"""Density-matrix estimation from joint detection probabilities.

Two estimators are provided:

* :func:`linear_invert` solves the linear system ``p = B @ gamma`` for the
  Gell-Mann coefficients and projects the result onto physical states.
* :func:`fit` minimizes Pearson's chi-squared over ``rho = T^dag T / Tr(T^dag T)``
  with ``T`` lower triangular (real diagonal), using multi-restart L-BFGS
  with an analytic gradient.

:func:`bootstrap` estimates uncertainties of the linear entropy and the
fidelity by refitting Poisson-resampled copies of a dataset.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .design import (MeasurementPlan, OperatorBasis, b_matrix, completeness_check,
                     operator_basis)
from .errors import CompletenessError, DimensionMismatchError
from .metrics import fidelity, linear_entropy
from .simulate import Dataset, maximally_entangled, normalize_probabilities

PROB_FLOOR = 1e-12


# -- triangular parametrization ------------------------------------------------

def n_params(D: int) -> int:
    return D * D


def t_from_params(x: np.ndarray, D: int) -> np.ndarray:
    """Lower-triangular complex T from D real diagonal entries and D(D-1)/2 complex off-diagonals."""
    x = np.asarray(x, dtype=float)
    if x.shape != (D * D,):
        raise ValueError(f"expected {D * D} parameters, got {x.shape}")
    rows, cols = np.tril_indices(D, -1)
    n_off = len(rows)
    T = np.zeros((D, D), dtype=complex)
    T[np.diag_indices(D)] = x[:D]
    T[rows, cols] = x[D:D + n_off] + 1j * x[D + n_off:]
    return T


def params_from_t(T: np.ndarray) -> np.ndarray:
    D = T.shape[0]
    rows, cols = np.tril_indices(D, -1)
    off = T[rows, cols]
    return np.concatenate([np.diag(T).real, off.real, off.imag])


def _grad_to_params(G: np.ndarray) -> np.ndarray:
    D = G.shape[0]
    rows, cols = np.tril_indices(D, -1)
    off = G[rows, cols]
    return np.concatenate([np.diag(G).real, off.real, off.imag])


def rho_from_t(T: np.ndarray) -> np.ndarray:
    """Physical density matrix ``T^dag T / Tr(T^dag T)``.

    ``T`` must be lower triangular with a real diagonal.
    """
    T = np.asarray(T, dtype=complex)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError(f"T must be square, got shape {T.shape}")
    if np.any(np.triu(T, 1) != 0) or np.any(np.diag(T).imag != 0):
        raise ValueError("T must be lower triangular with a real diagonal")
    rho = T.conj().T @ T
    tr = np.trace(rho).real
    if tr <= 0:
        raise ValueError("T is identically zero")
    rho = rho / tr
    return 0.5 * (rho + rho.conj().T)


def t_from_rho(rho: np.ndarray, mix: float = 1e-6) -> np.ndarray:
    """A lower-triangular T with ``T^dag T`` proportional to ``rho``.

    ``rho`` is first mixed with ``mix * I/D`` so rank-deficient states factor.
    """
    D = rho.shape[0]
    r = (1.0 - mix) * rho + mix * np.eye(D) / D
    r = 0.5 * (r + r.conj().T)
    # reverse-order Cholesky: J r J = L L^dag  =>  r = T^dag T with T = J L^dag J
    J = np.eye(D)[::-1]
    L = np.linalg.cholesky(J @ r @ J)
    return J @ L.conj().T @ J


# -- objective -----------------------------------------------------------------

def chi_squared(p, plan: MeasurementPlan, rho, floor: float = PROB_FLOOR) -> float:
    """Pearson statistic ``sum_k (p_k - q_k)^2 / q_k`` with ``q_k = Tr(rho Pi_k)``.

    Model probabilities below ``floor`` are replaced by ``floor``.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (len(plan),):
        raise DimensionMismatchError(f"{len(p)} probabilities for a {len(plan)}-row plan")
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (plan.hilbert_dim, plan.hilbert_dim):
        raise DimensionMismatchError(f"rho shape {rho.shape} does not match plan")
    psi = plan.vectors
    q = np.einsum("ka,ab,kb->k", psi.conj(), rho, psi).real
    q = np.maximum(q, floor)
    return float(np.sum((p - q) ** 2 / q))


class _Objective:
    """Chi-squared and its gradient as a function of the T parameters."""

    def __init__(self, p: np.ndarray, plan: MeasurementPlan, floor: float, free_scale: bool):
        self.p = np.asarray(p, dtype=float)
        self.psi = plan.vectors
        self.psi_t = self.psi.T.copy()
        self.D = plan.hilbert_dim
        self.floor = floor
        self.free_scale = free_scale
        self.scale = 1.0

    def value_and_grad(self, x: np.ndarray):
        T = t_from_params(x, self.D)
        t = np.vdot(T, T).real
        # row k of psi @ T.T is (T psi_k)^T
        q_raw = np.sum(np.abs(self.psi @ T.T) ** 2, axis=1) / t
        active = q_raw >= self.floor
        q = np.where(active, q_raw, self.floor)
        p = self.p
        if self.free_scale:
            a = np.sum(p**2 / q)
            b = np.sum(q)
            s = math.sqrt(a / b) if a > 0 else 1.0
        else:
            s = 1.0
        self.scale = s
        f = float(np.sum((p - s * q) ** 2 / (s * q)))
        # df/dq_k, zero where the floor is active
        g = np.where(active, s - p**2 / (s * q**2), 0.0)
        W = (self.psi_t * g) @ self.psi.conj()
        G = (2.0 / t) * (T @ W - np.dot(g, q_raw) * T)
        return f, _grad_to_params(G)


def fit_objective(p, plan: MeasurementPlan, x: np.ndarray, floor: float = PROB_FLOOR,
                  free_scale: bool = False) -> tuple[float, np.ndarray]:
    """Objective value and analytic gradient at the T parameter vector ``x``.

    With ``free_scale`` the value is minimized over a global factor on the
    model probabilities; the gradient then holds that factor at its optimum.
    """
    obj = _Objective(p, plan, floor, free_scale)
    return obj.value_and_grad(np.asarray(x, dtype=float))


# -- linear inversion ----------------------------------------------------------

def project_to_physical(h: np.ndarray) -> np.ndarray:
    """Nearest-by-clipping physical state: negative eigenvalues set to 0, trace renormalized."""
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        return np.eye(len(w)) / len(w)
    rho = (v * (w / w.sum())) @ v.conj().T
    return 0.5 * (rho + rho.conj().T)


@dataclass(frozen=True)
class LinearEstimate:
    rho: np.ndarray
    raw: np.ndarray
    projected: bool
    min_eigenvalue: float


def linear_invert(p, plan: MeasurementPlan, basis: OperatorBasis | None = None,
                  tol: float = 1e-10) -> LinearEstimate:
    """Invert ``p = B @ gamma`` with ``gamma_mu = Tr(rho G_mu)`` and rebuild rho.

    The coefficient of ``G_0 = I/sqrt(D)`` is solved along with the others,
    and the assembled matrix is then divided by its trace, so a global
    rescaling of ``p`` does not bias the estimate.  A pseudo-inverse is used
    for non-square (overcomplete) plans.
    """
    basis = basis or operator_basis(plan.hilbert_dim)
    p = np.asarray(p, dtype=float)
    if p.shape != (len(plan),):
        raise DimensionMismatchError(f"{len(p)} probabilities for a {len(plan)}-row plan")
    B = b_matrix(plan, basis)
    if B.shape[0] == B.shape[1]:
        try:
            gamma = np.linalg.solve(B, p)
        except np.linalg.LinAlgError:
            raise CompletenessError("design matrix is singular") from None
    else:
        gamma, _, rank, _ = np.linalg.lstsq(B, p, rcond=None)
        if rank < B.shape[1]:
            raise CompletenessError(f"design matrix has rank {rank} < {B.shape[1]}")
    raw = basis.assemble(gamma)
    raw = 0.5 * (raw + raw.conj().T)
    tr = np.trace(raw).real
    if tr <= 0:
        raw_n = raw
    else:
        raw_n = raw / tr
    w_min = float(np.linalg.eigvalsh(raw_n)[0])
    if tr > 0 and w_min >= -tol:
        return LinearEstimate(raw_n, raw, False, w_min)
    return LinearEstimate(project_to_physical(raw_n), raw, True, w_min)


# -- chi-squared fit -----------------------------------------------------------

@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings.

    ``tol`` is the relative chi-squared change that ends a restart;
    ``maxiter`` bounds the iterations of each restart.  With ``free_scale``
    the fit also profiles a global intensity factor multiplying the model
    probabilities, so a mis-normalized probability vector does not bias the
    state.
    """

    restarts: int = 3
    maxiter: int = 3000
    tol: float = 1e-9
    seed: int = 0
    floor: float = PROB_FLOOR
    free_scale: bool = True
    warm_start: bool = True


@dataclass
class ReconstructionResult:
    rho: np.ndarray
    chi_squared: float
    linear_entropy: float
    fidelity: float
    sigma_s: float | None = None
    sigma_f: float | None = None
    iterations: int = 0
    restarts: int = 0
    converged: bool = False
    restart_chi_squared: list = field(default_factory=list)
    scale: float = 1.0

    def as_dict(self) -> dict:
        D = self.rho.shape[0]
        return {
            "D": D,
            "rho": [[[float(z.real), float(z.imag)] for z in row] for row in self.rho],
            "chi_squared": self.chi_squared,
            "linear_entropy": self.linear_entropy,
            "fidelity": self.fidelity,
            "sigma_s": self.sigma_s,
            "sigma_f": self.sigma_f,
            "iterations": self.iterations,
            "restarts": self.restarts,
            "converged": self.converged,
            "restart_chi_squared": list(self.restart_chi_squared),
            "scale": self.scale,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ReconstructionResult":
        doc = json.loads(text)
        rho = np.array([[complex(re, im) for re, im in row] for row in doc["rho"]])
        keys = set(cls.__dataclass_fields__) - {"rho"}
        return cls(rho=rho, **{k: doc[k] for k in keys if k in doc})


def rho_to_json(rho: np.ndarray) -> str:
    return json.dumps({
        "D": int(rho.shape[0]),
        "rho": [[[float(z.real), float(z.imag)] for z in row] for row in rho],
    }, indent=1)


def rho_from_json(text: str) -> np.ndarray:
    doc = json.loads(text)
    rho = np.array([[complex(re, im) for re, im in row] for row in doc["rho"]])
    if rho.shape != (doc["D"], doc["D"]):
        raise ValueError("rho entries do not match the declared dimension")
    return rho


def certify(plan: MeasurementPlan, basis: OperatorBasis | None = None) -> None:
    basis = basis or operator_basis(plan.hilbert_dim)
    report = completeness_check(plan, basis)
    if not report.complete:
        raise CompletenessError(
            f"plan is not tomographically complete (rank {report.rank} of {plan.hilbert_dim ** 2})")


def fit(p, plan: MeasurementPlan, config: FitConfig | None = None, reference=None,
        check: bool = True) -> ReconstructionResult:
    """Minimum chi-squared density matrix for the probabilities ``p``.

    The first restart starts from the projected linear-inversion estimate
    (when ``config.warm_start``), the rest from random complex Gaussian T.
    The lowest chi-squared over restarts wins.  ``reference`` is the state
    fidelity is reported against (maximally entangled by default).
    """
    config = config or FitConfig()
    p = np.asarray(p, dtype=float)
    if p.shape != (len(plan),):
        raise DimensionMismatchError(f"{len(p)} probabilities for a {len(plan)}-row plan")
    if config.restarts < 1:
        raise ValueError("need at least one restart")
    D = plan.hilbert_dim
    basis = operator_basis(D)
    if check:
        certify(plan, basis)
    reference = maximally_entangled(plan.dim) if reference is None else reference

    rng = np.random.default_rng(config.seed)
    starts = []
    if config.warm_start:
        starts.append(params_from_t(t_from_rho(linear_invert(p, plan, basis).rho)))
    while len(starts) < config.restarts:
        T0 = np.tril(rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D)))
        T0[np.diag_indices(D)] = np.abs(T0.diagonal().real) + 0.1
        starts.append(params_from_t(T0))

    obj = _Objective(p, plan, config.floor, config.free_scale)
    best = None
    restart_values = []
    iterations = 0
    for x0 in starts:
        res = minimize(obj.value_and_grad, x0, jac=True, method="L-BFGS-B",
                       options={"maxiter": config.maxiter, "ftol": config.tol,
                                "gtol": 1e-12, "maxcor": 30})
        iterations += res.nit
        value = float(res.fun)
        restart_values.append(value)
        if best is None or value < best[0]:
            best = (value, res)
    value, res = best
    obj.value_and_grad(res.x)  # refresh the profiled scale at the optimum
    rho = rho_from_t(t_from_params(res.x, D))
    return ReconstructionResult(
        rho=rho,
        chi_squared=value,
        linear_entropy=linear_entropy(rho),
        fidelity=fidelity(rho, reference),
        iterations=iterations,
        restarts=len(starts),
        converged=bool(res.success),
        restart_chi_squared=restart_values,
        scale=obj.scale,
    )


# -- bootstrap -----------------------------------------------------------------

def poisson_replica(data: Dataset, rng: np.random.Generator) -> Dataset:
    """Statistically equivalent copy: every count redrawn Poisson about its observed value."""
    return replace(data, C=rng.poisson(data.C), A=rng.poisson(data.A), B=rng.poisson(data.B))


def bootstrap(data: Dataset, plan: MeasurementPlan, n_replicas: int = 50,
              config: FitConfig | None = None, reference=None,
              return_samples: bool = False):
    """Sample standard deviations ``(sigma_S, sigma_F)`` over Poisson replicas.

    Each replica is renormalized and refit with ``config``; replica ``r``
    draws from its own generator derived from ``config.seed`` and ``r``.
    """
    if n_replicas < 2:
        raise ValueError("bootstrap needs at least two replicas")
    config = config or FitConfig()
    data.check_alignment(plan)
    certify(plan)
    s_vals, f_vals = [], []
    for r in range(n_replicas):
        rng = np.random.default_rng([config.seed, 0xB007, r])
        replica = poisson_replica(data, rng)
        result = fit(normalize_probabilities(replica), plan, config, reference, check=False)
        s_vals.append(result.linear_entropy)
        f_vals.append(result.fidelity)
    sigma = (float(np.std(s_vals, ddof=1)), float(np.std(f_vals, ddof=1)))
    if return_samples:
        return sigma, (np.array(s_vals), np.array(f_vals))
    return sigma
