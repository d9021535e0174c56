import numpy as np
import pytest

from iterreg.linalg import jacobi_eigh


def test_matches_lapack_on_random_symmetric():
    rng = np.random.default_rng(0)
    for n in (1, 2, 5, 12, 30):
        a = rng.standard_normal((n, n))
        a = 0.5 * (a + a.T)
        vals, vecs = jacobi_eigh(a)
        ref = np.linalg.eigvalsh(a)
        np.testing.assert_allclose(vals, ref, atol=1e-12 * max(1, np.abs(ref).max()))
        # orthonormal basis, exact reconstruction
        np.testing.assert_allclose(vecs.T @ vecs, np.eye(n), atol=1e-12)
        np.testing.assert_allclose(vecs @ np.diag(vals) @ vecs.T, a, atol=1e-11)


def test_diagonal_input_is_fixed_point():
    vals, vecs = jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
    np.testing.assert_allclose(vals, [-1.0, 2.0, 3.0])
    np.testing.assert_allclose(np.abs(vecs), np.eye(3)[:, [1, 2, 0]], atol=1e-15)


def test_rejects_non_square():
    with pytest.raises(ValueError):
        jacobi_eigh(np.ones((2, 3)))
