import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsnorm.datagen import random_frame
from dsnorm.exceptions import DimensionError, InputError
from dsnorm.kernel import KernelMatrix, check_data, gaussian_kernel, pairwise_sq_dists


def test_sq_dists_triangle(triangle):
    np.testing.assert_array_equal(pairwise_sq_dists(triangle), [[0, 1, 1], [1, 0, 2], [1, 2, 0]])


def test_sq_dists_duplicate_rows():
    X = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]])
    assert pairwise_sq_dists(X)[0, 1] == 0.0


def test_sq_dists_against_naive_loops(rng):
    X = rng.normal(size=(6, 4))
    naive = np.zeros((6, 6))
    for i in range(6):
        for j in range(6):
            for c in range(4):
                naive[i, j] += (X[i, c] - X[j, c]) ** 2
    D = pairwise_sq_dists(X)
    np.testing.assert_allclose(D, naive, atol=1e-12)
    assert np.array_equal(D, D.T)
    assert np.all(np.diag(D) == 0)


def test_sq_dists_nearby_points_high_dim(rng):
    # the Gram-expansion formula would lose these digits entirely
    base = rng.normal(size=10_000) * 100
    X = np.vstack([base, base + 1e-6, base - 2e-6])
    D = pairwise_sq_dists(X)
    assert D[0, 1] == pytest.approx(1e-12 * 10_000, rel=1e-6)


def test_kernel_values(triangle):
    K = gaussian_kernel(triangle, 1.0)
    assert K.gram[0, 1] == pytest.approx(math.exp(-1))
    assert K.gram[1, 2] == pytest.approx(math.exp(-2))
    assert np.all(np.diag(K.gram) == 0)
    assert K.epsilon == 1.0


def test_kernel_duplicate_points_give_one():
    X = np.array([[0.5, 0.5], [0.5, 0.5], [3.0, 1.0]])
    assert gaussian_kernel(X, 0.3).gram[0, 1] == 1.0


def test_kernel_distance_equal_to_epsilon():
    X = np.array([[0.0], [math.sqrt(0.7)], [5.0]])
    assert gaussian_kernel(X, 0.7).gram[0, 1] == pytest.approx(0.367879441171, rel=1e-11)


def test_kernel_rejects_bad_epsilon(triangle):
    for eps in (0.0, -1.0, np.inf, np.nan):
        with pytest.raises(InputError):
            gaussian_kernel(triangle, eps)


def test_kernel_matrix_validation():
    with pytest.raises(InputError):
        KernelMatrix(np.eye(3))
    with pytest.raises(InputError):
        KernelMatrix(-np.ones((3, 3)) + np.eye(3))
    with pytest.raises(InputError):
        KernelMatrix(np.array([[0, 1, 2], [1, 0, 1], [1, 1, 0.0]]))


def test_check_data():
    with pytest.raises(DimensionError):
        check_data(np.zeros((2, 3)))
    with pytest.raises(InputError):
        check_data(np.array([[0.0, np.inf]] * 3))
    with pytest.raises(DimensionError):
        check_data(np.zeros(5))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 12), st.integers(1, 6))
def test_kernel_invariant_under_rigid_motion(seed, n, m):
    r = np.random.default_rng(seed)
    X = r.normal(size=(n, m))
    Q = random_frame(m, m, r)
    shift = r.normal(size=m) * 10
    eps = r.uniform(0.5, 5)
    a = gaussian_kernel(X, eps).gram
    b = gaussian_kernel(X @ Q.T + shift, eps).gram
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_kernel_monotone_in_distance(rng):
    X = rng.normal(size=(5, 2))
    before = gaussian_kernel(X, 1.0).gram
    X2 = X.copy()
    X2[0] += 0.5 * (X[0] - X[1])  # moves point 0 directly away from point 1
    after = gaussian_kernel(X2, 1.0).gram
    assert after[0, 1] < before[0, 1]
