"""Exact Gaussian-derived matrix-valued kernels.

These closed-form kernels are the ground truth that the random-feature
maps in :mod:`helmrff.features` approximate, and they back the small-N
exact-kernel solver in :mod:`helmrff.regression`.
"""

import numpy as np

__all__ = [
    "symplectic_matrix",
    "gaussian_kernel",
    "curl_free_kernel",
    "symplectic_kernel",
    "odd_curl_free_kernel",
    "odd_symplectic_kernel",
    "gram_matrix",
]


def symplectic_matrix(m: int) -> np.ndarray:
    """Canonical skew-symmetric block matrix [[0, I_m], [-I_m, 0]]."""
    if m < 1:
        raise ValueError(f"block size must be >= 1, got {m}")
    eye = np.eye(m)
    zero = np.zeros((m, m))
    return np.block([[zero, eye], [-eye, zero]])


def _check_pair(x, z):
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape or x.ndim != 1:
        raise ValueError(f"expected two vectors of equal length, got shapes {x.shape} and {z.shape}")
    return x, z


def _check_sigma(sigma: float) -> float:
    if not sigma > 0:
        raise ValueError(f"kernel width must be positive, got {sigma}")
    return float(sigma)


def gaussian_kernel(x, z, sigma: float) -> float:
    """Scalar Gaussian kernel exp(-||x - z||^2 / (2 sigma^2))."""
    x, z = _check_pair(x, z)
    sigma = _check_sigma(sigma)
    u = x - z
    return float(np.exp(-u @ u / (2.0 * sigma**2)))


def curl_free_kernel(x, z, sigma: float) -> np.ndarray:
    """Curl-free kernel: negative Hessian of the scalar Gaussian.

    Returns the n x n matrix
        (1/sigma^2) exp(-u.u / (2 sigma^2)) (I - u u^T / sigma^2),  u = x - z.
    Every column is the gradient of a scalar field, so functions built from
    this kernel are gradient fields.
    """
    x, z = _check_pair(x, z)
    sigma = _check_sigma(sigma)
    u = x - z
    s2 = sigma**2
    scale = np.exp(-(u @ u) / (2.0 * s2)) / s2
    return scale * (np.eye(x.size) - np.outer(u, u) / s2)


def symplectic_kernel(x, z, sigma: float) -> np.ndarray:
    """Divergence-free kernel J G_c(x - z) J^T; requires even dimension."""
    x, z = _check_pair(x, z)
    if x.size % 2:
        raise ValueError(f"symplectic kernel needs an even state dimension, got {x.size}")
    J = symplectic_matrix(x.size // 2)
    return J @ curl_free_kernel(x, z, sigma) @ J.T


def odd_curl_free_kernel(x, z, sigma: float) -> np.ndarray:
    """Antisymmetrized curl-free kernel (G_c(x-z) - G_c(x+z)) / 2.

    Functions in the induced space are odd gradient fields: f(-x) = -f(x).
    """
    x, z = _check_pair(x, z)
    return 0.5 * (curl_free_kernel(x, z, sigma) - curl_free_kernel(x, -z, sigma))


def odd_symplectic_kernel(x, z, sigma: float) -> np.ndarray:
    """Antisymmetrized symplectic kernel (G_s(x-z) - G_s(x+z)) / 2."""
    x, z = _check_pair(x, z)
    return 0.5 * (symplectic_kernel(x, z, sigma) - symplectic_kernel(x, -z, sigma))


_KERNELS = {
    "odd-curl-free": odd_curl_free_kernel,
    "odd-symplectic": odd_symplectic_kernel,
    "curl-free": curl_free_kernel,
    "symplectic": symplectic_kernel,
}


def kernel_by_kind(kind: str):
    """Look up a matrix kernel by name; 'helmholtz' is the two-kernel sum."""
    if kind == "helmholtz":
        return lambda x, z, sigma: (
            odd_curl_free_kernel(x, z, sigma) + odd_symplectic_kernel(x, z, sigma)
        )
    try:
        return _KERNELS[kind]
    except KeyError:
        raise ValueError(f"unknown kernel kind {kind!r}; choose from {sorted(_KERNELS) + ['helmholtz']}")


def gram_matrix(kind: str, points, sigma: float) -> np.ndarray:
    """Block Gram matrix of a matrix kernel on a point set.

    Block (i, j) of the (n N) x (n N) result is K(x_i, x_j).  Uses the
    kernel symmetry K(x, z) = K(z, x)^T to evaluate only the upper triangle.
    """
    kernel = kernel_by_kind(kind)
    X = np.atleast_2d(np.asarray(points, dtype=float))
    N, n = X.shape
    G = np.empty((n * N, n * N))
    for i in range(N):
        for j in range(i, N):
            block = kernel(X[i], X[j], sigma)
            G[i * n:(i + 1) * n, j * n:(j + 1) * n] = block
            if i != j:
                G[j * n:(j + 1) * n, i * n:(i + 1) * n] = block.T
    return G
