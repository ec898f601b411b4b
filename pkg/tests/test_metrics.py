import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mubtomo.errors import DimensionMismatchError, PhysicalityError
from mubtomo.metrics import (fidelity, general_fidelity, linear_entropy, metric_report,
                             pure_fidelity, purity, sqrtm_psd)
from mubtomo.simulate import target_state

from helpers import random_density_matrix, random_pure_state


def test_linear_entropy_examples():
    rng = np.random.default_rng(0)
    rho, _ = random_pure_state(4, rng)
    assert linear_entropy(rho) == pytest.approx(0.0, abs=1e-12)
    for D in (2, 4, 9):
        assert linear_entropy(np.eye(D) / D) == pytest.approx(1 - 1 / D, abs=1e-15)
    assert linear_entropy(np.diag([0.75, 0.25])) == pytest.approx(0.375, abs=1e-15)


def test_fidelity_examples():
    rng = np.random.default_rng(1)
    sigma = random_density_matrix(4, rng)
    assert fidelity(sigma, sigma) == pytest.approx(1.0, abs=1e-10)
    a = np.diag([1.0, 0, 0, 0])
    b = np.diag([0, 1.0, 0, 0])
    assert fidelity(a, b) == pytest.approx(0.0, abs=1e-15)


def test_fidelity_mixed_qubit_closed_form():
    # commuting states: F = (sum sqrt(p_i q_i))^2
    rho, sigma = np.diag([0.7, 0.3]), np.diag([0.4, 0.6])
    expected = (math.sqrt(0.28) + math.sqrt(0.18)) ** 2
    assert fidelity(rho, sigma) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_pure_shortcut_matches_general_formula(seed):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(9, rng)
    sigma, psi = random_pure_state(9, rng)
    assert pure_fidelity(rho, psi) == pytest.approx(general_fidelity(rho, sigma), abs=1e-10)
    assert fidelity(rho, sigma) == pytest.approx(general_fidelity(rho, sigma), abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), D=st.sampled_from([2, 3, 4, 9]))
def test_fidelity_symmetric_and_bounded(seed, D):
    rng = np.random.default_rng(seed)
    rho, sigma = random_density_matrix(D, rng), random_density_matrix(D, rng, rank=2)
    f = fidelity(rho, sigma)
    assert 0.0 <= f <= 1.0
    assert f == pytest.approx(fidelity(sigma, rho), abs=1e-10)


def test_sqrtm_psd_clips_negative_noise():
    a = np.diag([4.0, 1.0, -1e-14])
    np.testing.assert_allclose(sqrtm_psd(a), np.diag([2.0, 1.0, 0.0]), atol=1e-12)


def test_fidelity_errors():
    with pytest.raises(DimensionMismatchError):
        fidelity(np.eye(2) / 2, np.eye(4) / 4)
    with pytest.raises(PhysicalityError):
        fidelity(np.diag([1.5, -0.5]), np.eye(2) / 2)
    with pytest.raises(PhysicalityError):
        fidelity(np.array([[0.5, 0.5], [0.0, 0.5]]), np.eye(2) / 2)


def test_report_fields_consistent():
    rng = np.random.default_rng(2)
    rho = random_density_matrix(4, rng)
    rep = metric_report(rho, target_state(2), "maxent")
    assert rep.purity == purity(rho)
    assert 1.0 - rep.linear_entropy == pytest.approx(rep.purity, abs=1e-15)
    assert 0 <= rep.linear_entropy <= 1 - 1 / 4
    assert rep.as_dict()["reference"] == "maxent"


@pytest.mark.parametrize("d", [3, 4, 5])
def test_fidelity_to_maxent_decreases_with_narrowing_width(d):
    ref = target_state(d)
    assert fidelity(ref, ref) == pytest.approx(1.0, abs=1e-12)
    widths = [math.inf, 10.0, 5.0, 3.0, 2.0, 1.5, 1.0, 0.7]
    values = [fidelity(target_state(d, w), ref) for w in widths]
    assert all(a > b for a, b in zip(values, values[1:]))
