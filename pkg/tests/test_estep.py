from decimal import Decimal, getcontext

import numpy as np
import pytest
from conftest import random_data, random_params
from hypothesis import given, settings
from hypothesis import strategies as st

from clusbird import ModelParams, canonical_theta, responsibilities
from clusbird.estep import normalize_log_weights


def decimal_responsibilities(y, params):
    """Posterior weights as ratios of products, evaluated in 40-digit decimals."""
    getcontext().prec = 40
    theta = canonical_theta(params)
    out = []
    for row in y:
        joint = []
        for k in range(params.k):
            prob = Decimal(float(params.xi[k]))
            for d, val in enumerate(row):
                p = 1 / (1 + Decimal(float(-theta[k, d])).exp())
                prob *= p if val == 1 else 1 - p
            joint.append(prob)
        total = sum(joint)
        out.append([float(j / total) for j in joint])
    return np.array(out)


def test_single_component(rng):
    data = random_data(rng, 5, 3)
    params = ModelParams([1.0], rng.normal(size=3), [[1.0]], rng.normal(size=(3, 1)))
    resp = responsibilities(data, params)
    np.testing.assert_array_equal(resp.u, 1.0)


def test_identical_components_return_prior(rng):
    data = random_data(rng, 6, 4)
    params = ModelParams([0.2, 0.3, 0.5], rng.normal(size=4), np.eye(3)[:, :2], np.zeros((4, 2)))
    resp = responsibilities(data, params)
    np.testing.assert_allclose(resp.u, np.tile(params.xi, (6, 1)), rtol=1e-14)


def test_matches_extended_precision(rng):
    data = random_data(rng, 3, 5)
    params = random_params(rng, 2, 1, 5)
    params.mu = np.clip(params.mu, -1, 1)
    params.a = np.clip(params.a, -1.5, 1.5)
    assert np.max(np.abs(canonical_theta(params))) <= 3
    np.testing.assert_allclose(responsibilities(data, params).u,
                               decimal_responsibilities(data.y, params), rtol=1e-12)


def test_hard_labels_one_based_lowest_tie():
    from clusbird.estep import Responsibilities
    r = Responsibilities(u=np.array([[0.5, 0.5], [0.2, 0.8]]), nk=np.array([0.7, 1.3]))
    np.testing.assert_array_equal(r.hard_labels(), [1, 2])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5), st.floats(1.0, 200.0))
def test_rows_stochastic_in_saturation(seed, k, bound):
    rng = np.random.default_rng(seed)
    log_w = rng.uniform(-bound, bound, (20, k)) * 300
    u, _ = normalize_log_weights(log_w)
    assert np.all((u >= 0) & (u <= 1))
    np.testing.assert_allclose(u.sum(axis=1), 1.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_shift_and_permutation(seed):
    rng = np.random.default_rng(seed)
    log_w = rng.normal(0, 50, (8, 4))
    u, _ = normalize_log_weights(log_w)
    shifted, _ = normalize_log_weights(log_w + rng.normal(0, 100, (8, 1)))
    np.testing.assert_allclose(shifted, u, atol=1e-12)
    perm = rng.permutation(4)
    permuted, _ = normalize_log_weights(log_w[:, perm])
    np.testing.assert_allclose(permuted, u[:, perm], atol=1e-15)


def test_masses_and_loglik(rng):
    data = random_data(rng, 30, 6)
    params = random_params(rng, 3, 2, 6)
    resp = responsibilities(data, params)
    assert resp.nk.sum() == pytest.approx(30, abs=1e-9)
    from clusbird import log_likelihood
    assert resp.loglik == pytest.approx(log_likelihood(data, params), rel=1e-14)
