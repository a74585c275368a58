"""Model evaluation: vector-field MSE, the long-horizon test protocol,
k-fold grid-search tuning, rollouts, and phase-plane field grids.

The grid search scores every (sigma, lambda) candidate with the exact
closed-form minimizer, but computes it through the dual form so only
(nN x nN) systems are factored; candidates therefore cost microseconds and
the whole search stays deterministic.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import features as ft
from .regression import Dataset, Hyperparameters
from .systems import SystemSpec, Trajectory, integrate_rk4


@dataclass(frozen=True)
class SearchSpace:
    """Hyperparameter grids for the k-fold search.

    `lambda2s` is None when tuning the single-map baseline.  `d` is the
    feature budget used while scoring and carried into the result.
    """

    sigmas: np.ndarray
    lambda1s: np.ndarray
    lambda2s: np.ndarray | None = None
    folds: int = 5
    d: int = 200

    def __post_init__(self):
        for name in ("sigmas", "lambda1s", "lambda2s"):
            grid = getattr(self, name)
            if grid is None:
                continue
            grid = np.asarray(grid, dtype=float)
            if grid.size == 0:
                raise ValueError(f"{name} grid is empty")
            if np.any(grid <= 0):
                raise ValueError(f"{name} grid must be positive")
            object.__setattr__(self, name, grid)
        if self.folds < 2:
            raise ValueError(f"need at least 2 folds, got {self.folds}")


def default_search_space(baseline: bool = False, folds: int = 5, d: int = 200) -> SearchSpace:
    """Log-spaced grids: 13 widths over [0.1, 10], 17 ridge weights over [1e-8, 1]."""
    sigmas = np.logspace(-1.0, 1.0, 13)
    lambdas = np.logspace(-8.0, 0.0, 17)
    return SearchSpace(sigmas=sigmas, lambda1s=lambdas,
                       lambda2s=None if baseline else lambdas, folds=folds, d=d)


@dataclass(frozen=True)
class EvalReport:
    """MSE summary for one fitted model, ready for JSON export."""

    system: str
    model_kind: str
    train_mse: float
    test_mse: float
    train_residuals: list
    test_residuals: list
    hyper: Hyperparameters
    seed: int
    notes: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "system": self.system,
            "model": self.model_kind,
            "train_mse": self.train_mse,
            "test_mse": self.test_mse,
            "train_residuals": self.train_residuals,
            "test_residuals": self.test_residuals,
            "hyper": self.hyper.to_json(),
            "seed": self.seed,
            "d": self.hyper.d,
            "notes": self.notes,
        }


def vector_field_mse(model, dataset: Dataset) -> float:
    """Mean squared prediction error (1/N) sum ||f(x_i) - xdot_i||^2."""
    resid = model.predict(dataset.states) - dataset.derivatives
    return float(np.mean(np.sum(resid**2, axis=1)))


def pointwise_residuals(model, dataset: Dataset) -> np.ndarray:
    resid = model.predict(dataset.states) - dataset.derivatives
    return np.sum(resid**2, axis=1)


def make_test_set(system: SystemSpec, x0, h: float, t_end: float, sim_refine: int = 25) -> Dataset:
    """Noiseless (state, true-field) samples along one long test trajectory."""
    if t_end < h:
        raise ValueError(f"test horizon shorter than the sampling step: t_end={t_end}, h={h}")
    fine = integrate_rk4(system.field, x0, h / sim_refine, t_end)
    states = fine.states[::sim_refine]
    times = fine.times[::sim_refine]
    derivs = np.array([system.field(x) for x in states])
    return Dataset(states=states, derivatives=derivs, times=times,
                   traj_ids=np.zeros(len(times), dtype=int))


def fold_indices(n_samples: int, folds: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffled k-fold split: returns (train, validation) index pairs."""
    if n_samples < folds:
        raise ValueError(f"need at least one sample per fold: N={n_samples}, folds={folds}")
    perm = np.random.default_rng(seed).permutation(n_samples)
    parts = np.array_split(perm, folds)
    out = []
    for i, val in enumerate(parts):
        train = np.concatenate([p for j, p in enumerate(parts) if j != i])
        out.append((np.sort(train), np.sort(val)))
    return out


def _sample_columns(idx: np.ndarray, n: int) -> np.ndarray:
    """Design-matrix column indices covering the given sample indices."""
    return (idx[:, None] * n + np.arange(n)).reshape(-1)


def cross_validate(dataset: Dataset, space: SearchSpace, seed: int) -> Hyperparameters:
    """Pick the grid point with the lowest mean validation MSE over k folds.

    Ties break toward stronger smoothing: larger ridge weight first, then
    larger kernel width.  Deterministic given (dataset, space, seed): the
    fold shuffle and the feature draws all derive from child seeds.
    """
    shuffle_seed, seed_a, seed_b = ft.split_seed(seed, 3)
    folds = fold_indices(len(dataset), space.folds, shuffle_seed)
    n = dataset.dim
    # Descending grids make the first minimum the preferred tie-break winner.
    sigmas = np.sort(np.asarray(space.sigmas))[::-1]
    lam1 = np.sort(np.asarray(space.lambda1s))[::-1]
    baseline = space.lambda2s is None
    lam2 = None if baseline else np.sort(np.asarray(space.lambda2s))[::-1]

    if baseline:
        scores = np.zeros((lam1.size, sigmas.size))
    else:
        scores = np.zeros((lam1.size, lam2.size, sigmas.size))

    for si, sigma in enumerate(sigmas):
        if baseline:
            basis = ft.sample_basis(ft.GAUSSIAN_SEPARABLE, space.d, n, sigma, seed_a)
            grams = [_design_gram(basis, dataset)]
        else:
            basis_c = ft.sample_basis(ft.ODD_CURL_FREE, space.d, n, sigma, seed_a)
            basis_s = ft.sample_basis(ft.ODD_SYMPLECTIC, space.d, n, sigma, seed_b)
            grams = [_design_gram(basis_c, dataset), _design_gram(basis_s, dataset)]
        for train, val in folds:
            ct, cv = _sample_columns(train, n), _sample_columns(val, n)
            x_t = dataset.derivatives[train].reshape(-1)
            x_v = dataset.derivatives[val].reshape(-1)
            g_tt = [g[np.ix_(ct, ct)] for g in grams]
            g_vt = [g[np.ix_(cv, ct)] for g in grams]
            if baseline:
                scores[:, si] += _fold_mse_single(g_tt[0], g_vt[0], x_t, x_v,
                                                  lam1, len(train), len(val))
            else:
                scores[:, :, si] += _fold_mse_pair(g_tt, g_vt, x_t, x_v,
                                                   lam1, lam2, len(train), len(val))
    scores /= space.folds

    flat = int(np.argmin(scores))
    if baseline:
        i1, si = np.unravel_index(flat, scores.shape)
        return Hyperparameters(sigma=float(sigmas[si]), lambda1=float(lam1[i1]),
                               lambda2=None, d=space.d)
    i1, i2, si = np.unravel_index(flat, scores.shape)
    return Hyperparameters(sigma=float(sigmas[si]), lambda1=float(lam1[i1]),
                           lambda2=float(lam2[i2]), d=space.d)


def _design_gram(basis: ft.FeatureBasis, dataset: Dataset) -> np.ndarray:
    design = ft.feature_design(basis, dataset.states)
    return design.T @ design


def _fold_mse_single(g_tt, g_vt, x_t, x_v, lams, n_train, n_val) -> np.ndarray:
    """Validation MSE of the single-map ridge fit for every lambda at once.

    Dual form of the closed-form solution: with G = Phi^T Phi, the predictions
    are (G_vt / lambda) (G_tt / lambda + N I)^-1 x_t.
    """
    M = g_tt[None, :, :] / lams[:, None, None]
    M[:, np.arange(len(x_t)), np.arange(len(x_t))] += n_train
    rhs = np.broadcast_to(x_t[:, None], (lams.size, x_t.size, 1)).copy()
    c = np.linalg.solve(M, rhs)[..., 0]
    preds = np.einsum("vt,lt->lv", g_vt, c) / lams[:, None]
    return np.sum((preds - x_v) ** 2, axis=-1) / n_val


def _fold_mse_pair(g_tt, g_vt, x_t, x_v, lam1, lam2, n_train, n_val) -> np.ndarray:
    """Validation MSE of the two-map fit for the whole lambda1 x lambda2 grid."""
    gc_tt, gs_tt = g_tt
    gc_vt, gs_vt = g_vt
    M = (gc_tt[None, None] / lam1[:, None, None, None]
         + gs_tt[None, None] / lam2[None, :, None, None])
    M[:, :, np.arange(len(x_t)), np.arange(len(x_t))] += n_train
    rhs = np.broadcast_to(x_t[:, None], (lam1.size, lam2.size, x_t.size, 1)).copy()
    c = np.linalg.solve(M, rhs)[..., 0]
    pc = np.einsum("vt,abt->abv", gc_vt, c) / lam1[:, None, None]
    ps = np.einsum("vt,abt->abv", gs_vt, c) / lam2[None, :, None]
    return np.sum((pc + ps - x_v) ** 2, axis=-1) / n_val


def rollout_model(model, x0, h: float, t_end: float) -> Trajectory:
    """Integrate the learned field with the same fixed-step RK4 scheme."""
    return integrate_rk4(lambda x: model.predict(x), x0, h, t_end)


def stream_grid(field_or_model, bounds, resolution) -> np.ndarray:
    """Sample a field on a regular phase-plane grid.

    Returns rows (q, p, qdot, pdot) in row-major order (first axis slowest).
    Accepts either a fitted model or a bare callable field.
    """
    (q_lo, q_hi), (p_lo, p_hi) = bounds
    if np.isscalar(resolution):
        resolution = (int(resolution), int(resolution))
    rq, rp = resolution
    if rq < 2 or rp < 2:
        raise ValueError(f"grid resolution must be >= 2 per axis, got {resolution}")
    qs = np.linspace(q_lo, q_hi, rq)
    ps = np.linspace(p_lo, p_hi, rp)
    Q, P = np.meshgrid(qs, ps, indexing="ij")
    points = np.column_stack([Q.reshape(-1), P.reshape(-1)])
    if hasattr(field_or_model, "predict"):
        values = field_or_model.predict(points)
    else:
        values = np.array([field_or_model(x) for x in points])
    return np.hstack([points, values])


def stream_grid_to_csv(grid: np.ndarray, path, comments: list[str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        for line in comments or []:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["q", "p", "qdot", "pdot"])
        for row in grid:
            writer.writerow([repr(float(v)) for v in row])


def evaluate_model(model, train: Dataset, test: Dataset, system: str, model_kind: str,
                   seed: int, notes: dict | None = None) -> EvalReport:
    return EvalReport(
        system=system,
        model_kind=model_kind,
        train_mse=vector_field_mse(model, train),
        test_mse=vector_field_mse(model, test),
        train_residuals=pointwise_residuals(model, train).tolist(),
        test_residuals=pointwise_residuals(model, test).tolist(),
        hyper=model.hyper,
        seed=seed,
        notes=notes or {},
    )
