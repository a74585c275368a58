import numpy as np
import pytest
from numpy.testing import assert_allclose

from helmrff import kernels as kn


def fd_hessian(f, u, step=1e-5):
    """Central-difference Hessian of a scalar function at u."""
    n = u.size
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            e_i = np.zeros(n); e_i[i] = step
            e_j = np.zeros(n); e_j[j] = step
            H[i, j] = (f(u + e_i + e_j) - f(u + e_i - e_j)
                       - f(u - e_i + e_j) + f(u - e_i - e_j)) / (4 * step**2)
    return H


def test_symplectic_matrix_structure():
    J = kn.symplectic_matrix(1)
    assert_allclose(J, [[0.0, 1.0], [-1.0, 0.0]])
    J2 = kn.symplectic_matrix(2)
    assert J2.shape == (4, 4)
    assert_allclose(J2.T, -J2)
    assert_allclose(J2 @ J2.T, np.eye(4))
    assert_allclose(J2 @ J2, -np.eye(4))


def test_gaussian_kernel_values():
    x = np.array([1.0, 0.0])
    z = np.zeros(2)
    assert kn.gaussian_kernel(x, x, 1.0) == 1.0
    assert_allclose(kn.gaussian_kernel(x, z, 1.0), np.exp(-0.5))
    # symmetric in its arguments
    assert kn.gaussian_kernel(x, z, 0.3) == kn.gaussian_kernel(z, x, 0.3)
    # wider kernel decays slower
    assert kn.gaussian_kernel(x, z, 2.0) > kn.gaussian_kernel(x, z, 0.5)


def test_curl_free_kernel_example():
    # at u = (1, 0), sigma = 1: e^{-1/2} (I - u u^T)
    G = kn.curl_free_kernel(np.array([1.0, 0.0]), np.zeros(2), 1.0)
    assert_allclose(G, np.exp(-0.5) * np.diag([0.0, 1.0]), atol=1e-15)


def test_curl_free_is_negative_hessian_of_gaussian():
    """G_c(x - z) must equal -grad grad^T of the unnormalized Gaussian bump."""
    sigma = 0.8
    x = np.array([0.4, -0.3])
    z = np.array([-0.2, 0.5])

    def g(u):
        return np.exp(-(u @ u) / (2 * sigma**2))

    H = fd_hessian(g, x - z)
    assert_allclose(kn.curl_free_kernel(x, z, sigma), -H, atol=1e-5)


def test_symplectic_kernel_is_conjugated_curl_free():
    x = np.array([0.7, 0.1])
    z = np.array([-0.4, 0.9])
    J = kn.symplectic_matrix(1)
    Gc = kn.curl_free_kernel(x, z, 1.3)
    assert_allclose(kn.symplectic_kernel(x, z, 1.3), J @ Gc @ J.T, atol=1e-15)
    # the worked example: conjugation swaps the diagonal at u = (1, 0)
    Gs = kn.symplectic_kernel(np.array([1.0, 0.0]), np.zeros(2), 1.0)
    assert_allclose(Gs, np.exp(-0.5) * np.diag([1.0, 0.0]), atol=1e-15)


def test_odd_kernels_antisymmetrize():
    x = np.array([0.3, -0.8])
    z = np.array([0.5, 0.2])
    for odd, even in ((kn.odd_curl_free_kernel, kn.curl_free_kernel),
                      (kn.odd_symplectic_kernel, kn.symplectic_kernel)):
        expected = 0.5 * (even(x, z, 1.1) - even(x, -z, 1.1))
        assert_allclose(odd(x, z, 1.1), expected, atol=1e-15)
        # odd in each argument
        assert_allclose(odd(-x, z, 1.1), -odd(x, z, 1.1), atol=1e-15)
        assert_allclose(odd(x, -z, 1.1), -odd(x, z, 1.1), atol=1e-15)
        # vanishes at the origin pair
        assert_allclose(odd(np.zeros(2), np.zeros(2), 1.1), np.zeros((2, 2)), atol=1e-15)


def test_gram_matrix_blocks_and_psd():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(6, 2))
    for kind in ("curl-free", "symplectic", "odd-curl-free", "odd-symplectic"):
        G = kn.gram_matrix(kind, pts, 0.9)
        assert G.shape == (12, 12)
        assert_allclose(G, G.T, atol=1e-14)
        # spot-check one off-diagonal block against the kernel itself
        block = G[2 * 4:2 * 5, 2 * 1:2 * 2]
        expected = kn.kernel_by_kind(kind)(pts[4], pts[1], 0.9)
        assert_allclose(block, expected, atol=1e-14)
        eigs = np.linalg.eigvalsh(G)
        assert eigs.min() >= -1e-10 * max(eigs.max(), 1.0)


def test_gram_matrix_helmholtz_kind_sums_both_odd_kernels():
    rng = np.random.default_rng(8)
    pts = rng.normal(size=(4, 2))
    total = kn.gram_matrix("helmholtz", pts, 1.2)
    parts = (kn.gram_matrix("odd-curl-free", pts, 1.2)
             + kn.gram_matrix("odd-symplectic", pts, 1.2))
    assert_allclose(total, parts, atol=1e-14)


def test_dimension_and_sigma_validation():
    with pytest.raises(ValueError):
        kn.gaussian_kernel(np.zeros(2), np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        kn.curl_free_kernel(np.zeros(2), np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        kn.curl_free_kernel(np.zeros(2), np.zeros(2), -1.0)
    with pytest.raises(ValueError):
        # symplectic structure needs an even state dimension
        kn.odd_symplectic_kernel(np.zeros(3), np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        kn.gram_matrix("no-such-kernel", np.zeros((2, 2)), 1.0)
