"""Shared random-state generators for the test suite."""
import numpy as np


def random_density_matrix(D, rng, rank=None):
    """Random full-rank (or given-rank) density matrix from a Ginibre draw."""
    k = rank or D
    g = rng.standard_normal((D, k)) + 1j * rng.standard_normal((D, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure_state(D, rng):
    psi = rng.standard_normal(D) + 1j * rng.standard_normal(D)
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj()), psi
