"""Closed-form ridge fits for the Helmholtz split, the baseline, and the
exact-kernel oracle, plus the fitted-model types.

All fits minimize a regularized least-squares objective over feature
coefficients; the solve is a symmetric positive-definite factorization with
a least-squares fallback.  Models are immutable after fitting and safe to
share across threads.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from . import features as ft
from .kernels import gram_matrix, kernel_by_kind, symplectic_matrix

# Above this coefficient count the primal normal matrix is formed no more;
# the algebraically identical dual solve works on the (n N) x (n N) system.
_PRIMAL_LIMIT = 2048

_EXACT_N_LIMIT = 200

_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class Dataset:
    """Paired state and state-derivative samples.

    `times` and `traj_ids` are optional bookkeeping used by the CSV
    serializers; the fits only read `states` and `derivatives`.
    """

    states: np.ndarray       # (N, n)
    derivatives: np.ndarray  # (N, n)
    times: np.ndarray | None = None
    traj_ids: np.ndarray | None = None

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        derivs = np.atleast_2d(np.asarray(self.derivatives, dtype=float))
        if states.shape != derivs.shape:
            raise ValueError(f"states {states.shape} and derivatives {derivs.shape} must match")
        if states.shape[0] < 1:
            raise ValueError("dataset needs at least one sample")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "derivatives", derivs)

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            self.states[idx],
            self.derivatives[idx],
            None if self.times is None else self.times[idx],
            None if self.traj_ids is None else self.traj_ids[idx],
        )

    def target_vector(self) -> np.ndarray:
        """Derivatives stacked sample-by-sample into one length-nN vector."""
        return self.derivatives.reshape(-1)


@dataclass(frozen=True)
class Hyperparameters:
    """Kernel width, ridge weights, and feature budget for one fit.

    `lambda2` is None for the single-map baseline.
    """

    sigma: float
    lambda1: float
    lambda2: float | None = None
    d: int = 200

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.lambda1 > 0:
            raise ValueError(f"lambda1 must be positive, got {self.lambda1}")
        if self.lambda2 is not None and not self.lambda2 > 0:
            raise ValueError(f"lambda2 must be positive, got {self.lambda2}")
        if self.d < 1:
            raise ValueError(f"feature budget must be >= 1, got {self.d}")

    def to_json(self) -> dict:
        return {"sigma": self.sigma, "lambda1": self.lambda1, "lambda2": self.lambda2, "d": self.d}

    @classmethod
    def from_json(cls, doc: dict) -> "Hyperparameters":
        lam2 = doc.get("lambda2")
        return cls(float(doc["sigma"]), float(doc["lambda1"]),
                   None if lam2 is None else float(lam2), int(doc["d"]))


def _as_batch(x, n):
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != n:
        raise ValueError(f"state dimension {X.shape[1]} does not match model dimension {n}")
    return X, single


@dataclass(frozen=True)
class HelmholtzModel:
    """Learned vector field as a symplectic part plus a gradient part."""

    alpha: np.ndarray
    beta: np.ndarray
    basis_c: ft.FeatureBasis
    basis_s: ft.FeatureBasis
    hyper: Hyperparameters

    @property
    def dim(self) -> int:
        return self.basis_c.n

    def _sqrt_d(self) -> float:
        return np.sqrt(self.basis_c.d)

    def dissipative_part(self, x) -> np.ndarray:
        X, single = _as_batch(x, self.dim)
        W = self.basis_c.weights
        out = (np.sin(X @ W.T) * self.alpha) @ W / self._sqrt_d()
        return out[0] if single else out

    def symplectic_part(self, x) -> np.ndarray:
        X, single = _as_batch(x, self.dim)
        W = self.basis_s.weights
        J = symplectic_matrix(self.dim // 2)
        out = (np.sin(X @ W.T) * self.beta) @ (W @ J.T) / np.sqrt(self.basis_s.d)
        return out[0] if single else out

    def decompose(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Return (symplectic, dissipative) parts of the learned field."""
        return self.symplectic_part(x), self.dissipative_part(x)

    def predict(self, x) -> np.ndarray:
        return self.symplectic_part(x) + self.dissipative_part(x)

    def hamiltonian(self, x) -> float | np.ndarray:
        """Energy estimate whose symplectic gradient is the symplectic part.

        Defined up to an additive constant; even in x.
        """
        X, single = _as_batch(x, self.dim)
        vals = -np.cos(X @ self.basis_s.weights.T) @ self.beta / np.sqrt(self.basis_s.d)
        return float(vals[0]) if single else vals

    def hamiltonian_gradient(self, x) -> np.ndarray:
        """Closed-form gradient of the energy estimate."""
        X, single = _as_batch(x, self.dim)
        W = self.basis_s.weights
        out = (np.sin(X @ W.T) * self.beta) @ W / np.sqrt(self.basis_s.d)
        return out[0] if single else out

    def dissipation_potential(self, x) -> float | np.ndarray:
        """Scalar potential whose gradient is the dissipative part."""
        X, single = _as_batch(x, self.dim)
        vals = -np.cos(X @ self.basis_c.weights.T) @ self.alpha / self._sqrt_d()
        return float(vals[0]) if single else vals

    def to_json(self) -> dict:
        return {
            "model": "helmholtz",
            "hyper": self.hyper.to_json(),
            "basis_c": self.basis_c.to_json(),
            "basis_s": self.basis_s.to_json(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "HelmholtzModel":
        return cls(
            alpha=np.asarray(doc["alpha"], dtype=float),
            beta=np.asarray(doc["beta"], dtype=float),
            basis_c=ft.FeatureBasis.from_json(doc["basis_c"]),
            basis_s=ft.FeatureBasis.from_json(doc["basis_s"]),
            hyper=Hyperparameters.from_json(doc["hyper"]),
        )


@dataclass(frozen=True)
class BaselineModel:
    """Gaussian-separable feature model without structural constraints."""

    alpha: np.ndarray
    basis: ft.FeatureBasis
    hyper: Hyperparameters

    @property
    def dim(self) -> int:
        return self.basis.n

    def predict(self, x) -> np.ndarray:
        X, single = _as_batch(x, self.dim)
        n = self.dim
        m = self.basis.d // n
        c = np.sqrt(2.0 / m) * np.cos(X @ self.basis.weights.T + self.basis.phases)
        out = np.einsum("bjm,jm->bj", c.reshape(len(X), n, m), self.alpha.reshape(n, m))
        return out[0] if single else out

    def to_json(self) -> dict:
        return {
            "model": "gaussian",
            "hyper": self.hyper.to_json(),
            "basis": self.basis.to_json(),
            "alpha": self.alpha.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "BaselineModel":
        return cls(
            alpha=np.asarray(doc["alpha"], dtype=float),
            basis=ft.FeatureBasis.from_json(doc["basis"]),
            hyper=Hyperparameters.from_json(doc["hyper"]),
        )


@dataclass(frozen=True)
class ExactKernelModel:
    """Representer-theorem solution anchored at the training states."""

    coefficients: np.ndarray  # (N, n)
    anchors: np.ndarray       # (N, n)
    kind: str
    sigma: float

    def predict(self, x) -> np.ndarray:
        kernel = kernel_by_kind(self.kind)
        X, single = _as_batch(x, self.anchors.shape[1])
        out = np.empty_like(X)
        for b, xb in enumerate(X):
            acc = np.zeros(X.shape[1])
            for anchor, coef in zip(self.anchors, self.coefficients):
                acc += kernel(xb, anchor, self.sigma) @ coef
            out[b] = acc
        return out[0] if single else out


def assemble_design(dataset: Dataset, basis_c: ft.FeatureBasis, basis_s: ft.FeatureBasis) -> np.ndarray:
    """Stack both feature maps over all samples into a 2d x nN design matrix.

    Column block i is the curl-free feature matrix at x_i stacked over the
    symplectic one.
    """
    if basis_c.n != dataset.dim or basis_s.n != dataset.dim:
        raise ValueError("feature bases do not match the dataset dimension")
    return np.vstack([
        ft.feature_design(basis_c, dataset.states),
        ft.feature_design(basis_s, dataset.states),
    ])


def solve_ridge(design: np.ndarray, targets: np.ndarray, lam_diag: np.ndarray, n_samples: int) -> np.ndarray:
    """Minimize (1/N)||design^T xi - targets||^2 + xi^T diag(lam) xi.

    Solves (design design^T + N diag(lam)) xi = design targets by Cholesky
    factorization, falling back to least squares if rounding spoils the
    positive pivots.  Above _PRIMAL_LIMIT coefficients the same minimizer
    is computed through the dual (Woodbury) form, which only factors an
    (nN x nN) matrix.  A few iterative-refinement sweeps keep the relative
    residual of the primal normal equations within tolerance; failure to
    get there raises rather than returning a bad solution.
    """
    D, M = design.shape
    rhs = design @ targets
    nlam = n_samples * lam_diag

    def apply_normal_eq(v):
        return design @ (design.T @ v) + nlam * v

    if D <= _PRIMAL_LIMIT:
        A = design @ design.T
        A[np.diag_indices_from(A)] += nlam
        try:
            factor = cho_factor(A, lower=True)

            def solve(b):
                return cho_solve(factor, b)
        except LinAlgError:
            def solve(b):
                return np.linalg.lstsq(A, b, rcond=None)[0]
    else:
        scaled = design / lam_diag[:, None]
        B = design.T @ scaled
        B[np.diag_indices_from(B)] += n_samples
        try:
            factor = cho_factor(B, lower=True)

            def inner(b):
                return cho_solve(factor, b)
        except LinAlgError:
            def inner(b):
                return np.linalg.lstsq(B, b, rcond=None)[0]

        def solve(b):
            # Woodbury inverse of (design design^T + N diag(lam)).
            u = b / nlam
            return u - scaled @ inner(design.T @ u)

    xi = solve(rhs)
    scale = np.linalg.norm(rhs)
    rel = np.inf
    for _ in range(4):
        residual = rhs - apply_normal_eq(xi)
        rel = np.linalg.norm(residual) / scale if scale > 0 else np.linalg.norm(residual)
        if rel <= 0.1 * _RESIDUAL_TOL:
            break
        xi = xi + solve(residual)
    if rel > _RESIDUAL_TOL:
        raise RuntimeError(f"ridge solve left relative residual {rel:.3e} > {_RESIDUAL_TOL:g}")
    return xi


def fit_helmholtz(dataset: Dataset, hyper: Hyperparameters, seed: int) -> HelmholtzModel:
    """Closed-form fit of the two-part model; deterministic given the seed.

    The two bases are drawn from independent child seeds so the curl-free
    and symplectic feature blocks are uncoupled.
    """
    if hyper.lambda2 is None:
        raise ValueError("the Helmholtz fit needs both ridge weights; lambda2 is None")
    seed_c, seed_s = ft.split_seed(seed, 2)
    basis_c = ft.sample_basis(ft.ODD_CURL_FREE, hyper.d, dataset.dim, hyper.sigma, seed_c)
    basis_s = ft.sample_basis(ft.ODD_SYMPLECTIC, hyper.d, dataset.dim, hyper.sigma, seed_s)
    design = assemble_design(dataset, basis_c, basis_s)
    lam = np.concatenate([np.full(hyper.d, hyper.lambda1), np.full(hyper.d, hyper.lambda2)])
    xi = solve_ridge(design, dataset.target_vector(), lam, len(dataset))
    return HelmholtzModel(alpha=xi[:hyper.d], beta=xi[hyper.d:], basis_c=basis_c,
                          basis_s=basis_s, hyper=hyper)


def fit_baseline(dataset: Dataset, hyper: Hyperparameters, seed: int) -> BaselineModel:
    """Closed-form fit of the Gaussian-separable baseline (single ridge weight)."""
    basis_seed = ft.split_seed(seed, 1)[0]
    basis = ft.sample_basis(ft.GAUSSIAN_SEPARABLE, hyper.d, dataset.dim, hyper.sigma, basis_seed)
    design = ft.feature_design(basis, dataset.states)
    lam = np.full(hyper.d, hyper.lambda1)
    alpha = solve_ridge(design, dataset.target_vector(), lam, len(dataset))
    return BaselineModel(alpha=alpha, basis=basis, hyper=hyper)


def helmholtz_objective(model: HelmholtzModel, dataset: Dataset) -> float:
    """Training objective: mean squared residual plus both ridge penalties."""
    resid = model.predict(dataset.states) - dataset.derivatives
    mse = np.sum(resid**2) / len(dataset)
    return float(mse + model.hyper.lambda1 * model.alpha @ model.alpha
                 + model.hyper.lambda2 * model.beta @ model.beta)


def baseline_objective(model: BaselineModel, dataset: Dataset) -> float:
    resid = model.predict(dataset.states) - dataset.derivatives
    mse = np.sum(resid**2) / len(dataset)
    return float(mse + model.hyper.lambda1 * model.alpha @ model.alpha)


def fit_exact_kernel(dataset: Dataset, kind: str, sigma: float, lam: float) -> ExactKernelModel:
    """Solve the dense representer system K a + N lambda a = xdot.

    The system is (nN x nN); N is capped because the cost grows cubically.
    Use kind='helmholtz' for the two-kernel sum that the feature model
    approaches as the feature budget grows (with lambda1 = lambda2 = lambda).
    """
    if len(dataset) > _EXACT_N_LIMIT:
        raise ValueError(
            f"exact-kernel fit is dense in nN; N={len(dataset)} exceeds the guard {_EXACT_N_LIMIT}")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    G = gram_matrix(kind, dataset.states, sigma)
    A = G + len(dataset) * lam * np.eye(G.shape[0])
    try:
        coeffs = cho_solve(cho_factor(A, lower=True), dataset.target_vector())
    except LinAlgError:
        coeffs, *_ = np.linalg.lstsq(A, dataset.target_vector(), rcond=None)
    return ExactKernelModel(
        coefficients=coeffs.reshape(len(dataset), dataset.dim),
        anchors=dataset.states.copy(),
        kind=kind,
        sigma=float(sigma),
    )
