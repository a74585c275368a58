"""Random Fourier feature bases for the odd matrix kernels and the baseline.

A basis is a frozen draw of frequency vectors; evaluating a feature map at a
state yields a d x n matrix whose products approximate the matching exact
kernel from :mod:`helmrff.kernels`.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .kernels import symplectic_matrix

ODD_CURL_FREE = "odd-curl-free"
ODD_SYMPLECTIC = "odd-symplectic"
GAUSSIAN_SEPARABLE = "gaussian-separable"
KINDS = (ODD_CURL_FREE, ODD_SYMPLECTIC, GAUSSIAN_SEPARABLE)


def split_seed(seed: int, count: int) -> list[int]:
    """Derive `count` independent 64-bit child seeds from a master seed."""
    state = np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)
    return [int(s) for s in state]


@dataclass(frozen=True)
class FeatureBasis:
    """Frozen set of d frequency vectors defining one feature map.

    Weights are drawn i.i.d. from N(0, sigma^-2 I_n); the uniform phases are
    used only by the Gaussian-separable baseline map.
    """

    kind: str
    weights: np.ndarray          # (d, n)
    sigma: float
    seed: int
    phases: np.ndarray | None = field(default=None)

    @property
    def d(self) -> int:
        return self.weights.shape[0]

    @property
    def n(self) -> int:
        return self.weights.shape[1]

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "d": self.d,
            "n": self.n,
            "sigma": self.sigma,
            "seed": self.seed,
            "weights": self.weights.tolist(),
            "phases": None if self.phases is None else self.phases.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FeatureBasis":
        phases = doc.get("phases")
        return cls(
            kind=doc["kind"],
            weights=np.asarray(doc["weights"], dtype=float),
            sigma=float(doc["sigma"]),
            seed=int(doc["seed"]),
            phases=None if phases is None else np.asarray(phases, dtype=float),
        )


def sample_basis(kind: str, d: int, n: int, sigma: float, seed: int) -> FeatureBasis:
    """Draw a feature basis; deterministic and bit-reproducible given the seed.

    Weights are sigma^-1 times standard-normal draws, so bases sampled with
    the same seed but different widths share the same underlying draws.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown feature kind {kind!r}; choose from {KINDS}")
    if d < 1:
        raise ValueError(f"feature count must be >= 1, got {d}")
    if n < 1:
        raise ValueError(f"state dimension must be >= 1, got {n}")
    if not sigma > 0:
        raise ValueError(f"kernel width must be positive, got {sigma}")
    if kind == ODD_SYMPLECTIC and n % 2:
        raise ValueError(f"odd-symplectic basis needs an even state dimension, got {n}")
    if kind == GAUSSIAN_SEPARABLE and d % n:
        raise ValueError(f"baseline basis needs d divisible by n, got d={d}, n={n}")
    rng = np.random.default_rng(seed)
    weights = rng.standard_normal((d, n)) / sigma
    phases = rng.uniform(0.0, 2.0 * np.pi, size=d) if kind == GAUSSIAN_SEPARABLE else None
    return FeatureBasis(kind=kind, weights=weights, sigma=float(sigma), seed=int(seed), phases=phases)


def _check_states(basis: FeatureBasis, x) -> np.ndarray:
    X = np.asarray(x, dtype=float)
    if X.shape[-1] != basis.n:
        raise ValueError(f"state dimension {X.shape[-1]} does not match basis dimension {basis.n}")
    return X


def features_odd_curl_free(x, basis: FeatureBasis) -> np.ndarray:
    """Feature matrix with rows sin(w_i . x) w_i^T / sqrt(d)."""
    if basis.kind != ODD_CURL_FREE:
        raise ValueError(f"expected an {ODD_CURL_FREE} basis, got {basis.kind!r}")
    x = _check_states(basis, x)
    s = np.sin(basis.weights @ x) / np.sqrt(basis.d)
    return s[:, None] * basis.weights


def features_odd_symplectic(x, basis: FeatureBasis) -> np.ndarray:
    """Feature matrix with rows sin(w_i . x) (J w_i)^T / sqrt(d)."""
    if basis.kind != ODD_SYMPLECTIC:
        raise ValueError(f"expected an {ODD_SYMPLECTIC} basis, got {basis.kind!r}")
    x = _check_states(basis, x)
    J = symplectic_matrix(basis.n // 2)
    s = np.sin(basis.weights @ x) / np.sqrt(basis.d)
    return s[:, None] * (basis.weights @ J.T)


def features_gaussian_separable(x, basis: FeatureBasis) -> np.ndarray:
    """Block-diagonal scalar-RFF map approximating k_sigma(x, z) I_n.

    The d frequencies are split into n blocks of m = d/n; block j fills
    column j with sqrt(2/m) cos(w_i . x + b_i), so cross-output products
    vanish exactly and each diagonal estimates the scalar Gaussian kernel.
    """
    if basis.kind != GAUSSIAN_SEPARABLE:
        raise ValueError(f"expected a {GAUSSIAN_SEPARABLE} basis, got {basis.kind!r}")
    x = _check_states(basis, x)
    d, n = basis.d, basis.n
    m = d // n
    c = np.sqrt(2.0 / m) * np.cos(basis.weights @ x + basis.phases)
    psi = np.zeros((d, n))
    for j in range(n):
        psi[j * m:(j + 1) * m, j] = c[j * m:(j + 1) * m]
    return psi


_MAPS = {
    ODD_CURL_FREE: features_odd_curl_free,
    ODD_SYMPLECTIC: features_odd_symplectic,
    GAUSSIAN_SEPARABLE: features_gaussian_separable,
}


def feature_matrix(x, basis: FeatureBasis) -> np.ndarray:
    """Evaluate the feature map matching `basis.kind` at a single state."""
    return _MAPS[basis.kind](x, basis)


def feature_design(basis: FeatureBasis, states) -> np.ndarray:
    """Stack feature matrices for N states into a d x (n N) design block.

    Column block i holds the feature matrix at states[i]; this is the
    vectorized building block for the closed-form fits.
    """
    X = np.atleast_2d(_check_states(basis, states))
    N, n = X.shape
    d = basis.d
    if basis.kind == GAUSSIAN_SEPARABLE:
        m = d // n
        c = np.sqrt(2.0 / m) * np.cos(X @ basis.weights.T + basis.phases)  # (N, d)
        design = np.zeros((d, N, n))
        for j in range(n):
            design[j * m:(j + 1) * m, :, j] = c[:, j * m:(j + 1) * m].T
        return design.reshape(d, N * n)
    rows = basis.weights if basis.kind == ODD_CURL_FREE else basis.weights @ symplectic_matrix(n // 2).T
    s = np.sin(X @ basis.weights.T).T / np.sqrt(d)  # (d, N)
    return (s[:, :, None] * rows[:, None, :]).reshape(d, N * n)


def basis_to_json_str(basis: FeatureBasis) -> str:
    return json.dumps(basis.to_json(), sort_keys=True)
