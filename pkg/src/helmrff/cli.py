"""Experiment command line: simulate datasets, fit and evaluate models, and
reproduce the two benchmark studies end to end.

Every artifact embeds the resolved configuration and seeds, so re-running a
command with the same inputs rewrites identical files.
"""

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import evaluation as ev
from . import regression as rg
from . import systems as sy
from .features import split_seed

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_THRESHOLD = 2

SIGMA_RANGE = (1e-6, 1e6)

NOTES = {
    "test_mse": "field-space MSE at noiseless states along the test trajectory",
    "baseline": "random-feature Gaussian-separable map with matched feature budget",
}

# Reproduction gates checked on the median over master seeds.
THRESHOLDS = {
    "msd": (
        ("helmholtz test MSE <= 0.05",
         lambda med: med["helmholtz"]["test_mse"] <= 0.05),
        ("helmholtz test MSE <= 0.5 x gaussian test MSE",
         lambda med: med["helmholtz"]["test_mse"] <= 0.5 * med["gaussian"]["test_mse"]),
    ),
    "pendulum": (
        ("helmholtz training MSE <= 0.01",
         lambda med: med["helmholtz"]["train_mse"] <= 0.01),
        ("helmholtz test MSE <= 0.01",
         lambda med: med["helmholtz"]["test_mse"] <= 0.01),
        ("gaussian test MSE >= 100 x helmholtz test MSE",
         lambda med: med["gaussian"]["test_mse"] >= 100.0 * med["helmholtz"]["test_mse"]),
    ),
}


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending key."""


def _fail(key: str, message: str):
    raise ConfigError(f"config key '{key}': {message}")


def _require(doc: dict, key: str):
    node = doc
    for part in key.split("."):
        if not isinstance(node, dict) or part not in node:
            _fail(key, "missing")
        node = node[part]
    return node


def _number(doc: dict, key: str, minimum=None, default=None) -> float:
    node = doc
    for part in key.split("."):
        if not isinstance(node, dict) or part not in node:
            if default is not None:
                return default
            _fail(key, "missing")
        node = node[part]
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        _fail(key, f"expected a number, got {node!r}")
    if minimum is not None and node < minimum:
        _fail(key, f"must be >= {minimum}, got {node}")
    return float(node)


def _point(doc, key) -> np.ndarray:
    node = _require(doc, key)
    if (not isinstance(node, (list, tuple)) or len(node) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in node)):
        _fail(key, f"expected a [q, p] pair of numbers, got {node!r}")
    return np.asarray(node, dtype=float)


def _check_sigma_range(key: str, values):
    lo, hi = SIGMA_RANGE
    for v in np.atleast_1d(values):
        if not (lo <= v <= hi):
            _fail(key, f"kernel width {v:g} outside the supported range [{lo:g}, {hi:g}]")


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully validated experiment description."""

    system_name: str
    system_params: dict
    initial_conditions: np.ndarray
    h: float
    t_end: float
    include_t0: bool
    noise_sigma: float
    test_x0: np.ndarray
    test_h: float
    test_t_end: float
    d: int
    folds: int
    sigma_grid: np.ndarray
    lambda_grid: np.ndarray
    fixed_helmholtz: rg.Hyperparameters | None
    fixed_gaussian: rg.Hyperparameters | None
    seed: int
    output_dir: str
    figure_bounds: tuple
    figure_resolution: int

    def make_system(self) -> sy.SystemSpec:
        return sy.SYSTEM_FACTORIES[self.system_name](**self.system_params)

    def search_space(self, baseline: bool) -> ev.SearchSpace:
        return ev.SearchSpace(
            sigmas=self.sigma_grid,
            lambda1s=self.lambda_grid,
            lambda2s=None if baseline else self.lambda_grid,
            folds=self.folds,
            d=self.d,
        )

    def resolved(self) -> dict:
        """Plain-data echo of the configuration for embedding in artifacts."""
        return {
            "system": {"name": self.system_name, **self.system_params},
            "data": {
                "initial_conditions": self.initial_conditions.tolist(),
                "h": self.h,
                "t_end": self.t_end,
                "include_t0": self.include_t0,
                "noise_sigma": self.noise_sigma,
            },
            "test": {"x0": self.test_x0.tolist(), "h": self.test_h, "t_end": self.test_t_end},
            "model": {"d": self.d},
            "search": {
                "folds": self.folds,
                "sigma_grid": self.sigma_grid.tolist(),
                "lambda_grid": self.lambda_grid.tolist(),
            },
            "hyperparameters": {
                "helmholtz": None if self.fixed_helmholtz is None else self.fixed_helmholtz.to_json(),
                "gaussian": None if self.fixed_gaussian is None else self.fixed_gaussian.to_json(),
            },
            "seed": self.seed,
            "output_dir": self.output_dir,
            "figure": {
                "bounds": [list(b) for b in self.figure_bounds],
                "resolution": self.figure_resolution,
            },
        }


def _log_grid(doc: dict, key: str, default) -> np.ndarray:
    node = doc
    for part in key.split("."):
        node = node.get(part, {}) if isinstance(node, dict) else {}
    if not node:
        return default
    if isinstance(node, list):
        grid = np.asarray(node, dtype=float)
        if grid.size == 0 or np.any(grid <= 0):
            _fail(key, "explicit grid must be a non-empty list of positive numbers")
        return grid
    if not isinstance(node, dict):
        _fail(key, f"expected a list or a log-grid mapping, got {node!r}")
    count = int(_number(node, "count", minimum=1))
    return np.logspace(_number(node, "log10_start"), _number(node, "log10_stop"), count)


def parse_config(path) -> ExperimentConfig:
    """Load and validate a YAML experiment file.

    Syntax errors keep PyYAML's line/column marks; semantic errors name the
    offending key.
    """
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as err:
        raise ConfigError(f"cannot parse {path}: {err}")
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}")
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    name = _require(doc, "system.name")
    if name not in sy.SYSTEM_FACTORIES:
        _fail("system.name", f"unknown system {name!r}; choose from {sorted(sy.SYSTEM_FACTORIES)}")
    if name == "msd":
        params = {
            "m": _number(doc, "system.m", minimum=1e-12),
            "k": _number(doc, "system.k", minimum=1e-12),
            "d": _number(doc, "system.d", minimum=0.0),
        }
    else:
        params = {
            "m": _number(doc, "system.m", minimum=1e-12),
            "l": _number(doc, "system.l", minimum=1e-12),
            "d": _number(doc, "system.d", minimum=0.0),
            "g": _number(doc, "system.g", minimum=1e-12),
        }

    ic_node = _require(doc, "data.initial_conditions")
    if not isinstance(ic_node, list) or not ic_node:
        _fail("data.initial_conditions", "expected a non-empty list of [q, p] pairs")
    ics = np.array([_point({"ic": ic}, "ic") for ic in ic_node])

    h = _number(doc, "data.h", minimum=1e-12)
    t_end = _number(doc, "data.t_end", minimum=h)
    include_t0 = _require(doc, "data.include_t0") if "data" in doc and "include_t0" in doc["data"] else True
    if not isinstance(include_t0, bool):
        _fail("data.include_t0", f"expected a boolean, got {include_t0!r}")
    noise_sigma = _number(doc, "data.noise_sigma", minimum=0.0)

    test_x0 = _point(doc, "test.x0")
    test_h = _number(doc, "test.h", minimum=1e-12, default=h)
    test_t_end = _number(doc, "test.t_end", minimum=test_h)

    d = int(_number(doc, "model.d", minimum=1, default=200.0))
    if d % 2:
        _fail("model.d", f"feature budget must be even so the baseline map splits over both outputs, got {d}")

    folds = int(_number(doc, "search.folds", minimum=2, default=5.0))
    sigma_grid = _log_grid(doc, "search.sigma_grid", np.logspace(-1.0, 1.0, 13))
    lambda_grid = _log_grid(doc, "search.lambda_grid", np.logspace(-8.0, 0.0, 17))
    _check_sigma_range("search.sigma_grid", sigma_grid)

    fixed_h = fixed_g = None
    hp = doc.get("hyperparameters") or {}
    if "helmholtz" in hp:
        node = {"hyperparameters": {"helmholtz": hp["helmholtz"]}}
        sigma = _number(node, "hyperparameters.helmholtz.sigma", minimum=SIGMA_RANGE[0])
        _check_sigma_range("hyperparameters.helmholtz.sigma", sigma)
        fixed_h = rg.Hyperparameters(
            sigma=sigma,
            lambda1=_number(node, "hyperparameters.helmholtz.lambda1", minimum=1e-300),
            lambda2=_number(node, "hyperparameters.helmholtz.lambda2", minimum=1e-300),
            d=d,
        )
    if "gaussian" in hp:
        node = {"hyperparameters": {"gaussian": hp["gaussian"]}}
        sigma = _number(node, "hyperparameters.gaussian.sigma", minimum=SIGMA_RANGE[0])
        _check_sigma_range("hyperparameters.gaussian.sigma", sigma)
        fixed_g = rg.Hyperparameters(
            sigma=sigma,
            lambda1=_number(node, "hyperparameters.gaussian.lambda", minimum=1e-300),
            lambda2=None,
            d=d,
        )

    seed = int(_number(doc, "seed", minimum=0.0, default=0.0))
    output_dir = doc.get("output_dir", "out")
    if not isinstance(output_dir, str) or not output_dir:
        _fail("output_dir", f"expected a non-empty string, got {output_dir!r}")

    fig = doc.get("figure") or {}
    bounds_node = fig.get("bounds", [[-4.0, 4.0], [-4.0, 4.0]])
    try:
        (q_lo, q_hi), (p_lo, p_hi) = [(float(b[0]), float(b[1])) for b in bounds_node]
    except (TypeError, ValueError, IndexError):
        _fail("figure.bounds", f"expected [[q_lo, q_hi], [p_lo, p_hi]], got {bounds_node!r}")
    if q_lo >= q_hi or p_lo >= p_hi:
        _fail("figure.bounds", "lower bounds must be below upper bounds")
    resolution = int(_number(fig, "resolution", minimum=2, default=25.0))

    return ExperimentConfig(
        system_name=name,
        system_params=params,
        initial_conditions=ics,
        h=h,
        t_end=t_end,
        include_t0=include_t0,
        noise_sigma=noise_sigma,
        test_x0=test_x0,
        test_h=test_h,
        test_t_end=test_t_end,
        d=d,
        folds=folds,
        sigma_grid=sigma_grid,
        lambda_grid=lambda_grid,
        fixed_helmholtz=fixed_h,
        fixed_gaussian=fixed_g,
        seed=seed,
        output_dir=output_dir,
        figure_bounds=((q_lo, q_hi), (p_lo, p_hi)),
        figure_resolution=resolution,
    )


def bundled_config_path(experiment: str) -> Path:
    return Path(resources.files("helmrff") / "configs" / f"{experiment}.yaml")


def _seed_map(master: int) -> dict:
    noise, helm, base, cv = split_seed(master, 4)
    return {"master": master, "noise": noise, "helmholtz_fit": helm,
            "gaussian_fit": base, "cv_shuffle": cv}


def simulate_dataset(config: ExperimentConfig, master: int) -> rg.Dataset:
    seeds = _seed_map(master)
    return sy.generate_dataset(
        config.make_system(), config.initial_conditions, config.h, config.t_end,
        sy.NoiseSpec(config.noise_sigma, seeds["noise"]), config.include_t0,
    )


def run_protocol(config: ExperimentConfig, master: int, dataset: rg.Dataset | None = None) -> dict:
    """Tune (unless fixed), fit both models, and evaluate on the test set."""
    seeds = _seed_map(master)
    if dataset is None:
        dataset = simulate_dataset(config, master)
    hyper_h = config.fixed_helmholtz
    if hyper_h is None:
        hyper_h = ev.cross_validate(dataset, config.search_space(baseline=False), seeds["cv_shuffle"])
    hyper_g = config.fixed_gaussian
    if hyper_g is None:
        hyper_g = ev.cross_validate(dataset, config.search_space(baseline=True), seeds["cv_shuffle"])
    helm = rg.fit_helmholtz(dataset, hyper_h, seeds["helmholtz_fit"])
    base = rg.fit_baseline(dataset, hyper_g, seeds["gaussian_fit"])
    test = ev.make_test_set(config.make_system(), config.test_x0, config.test_h, config.test_t_end)
    return {
        "seeds": seeds,
        "dataset": dataset,
        "test": test,
        "helmholtz": helm,
        "gaussian": base,
        "report_helmholtz": ev.evaluate_model(helm, dataset, test, config.system_name,
                                              "helmholtz", master, NOTES),
        "report_gaussian": ev.evaluate_model(base, dataset, test, config.system_name,
                                             "gaussian", master, NOTES),
    }


def _comments(config: ExperimentConfig, seeds: dict) -> list[str]:
    return [
        "config: " + json.dumps(config.resolved(), sort_keys=True),
        "seeds: " + json.dumps(seeds, sort_keys=True),
    ]


def _load_dataset(path) -> rg.Dataset:
    path = Path(path)
    if path.suffix == ".csv":
        return sy.dataset_from_csv(path)
    with open(path) as fh:
        doc = json.load(fh)
    return sy.dataset_from_json(doc.get("data", doc))


def _summary_lines(rows: list[dict], title: str) -> list[str]:
    lines = [title, f"{'model':<12}{'train MSE':>14}{'test MSE':>14}"]
    for row in rows:
        lines.append(f"{row['model']:<12}{row['train_mse']:>14.6g}{row['test_mse']:>14.6g}")
    return lines


def cmd_simulate(args) -> int:
    config = parse_config(args.config)
    master = config.seed if args.seed is None else args.seed
    out = Path(args.out or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = _seed_map(master)
    dataset = simulate_dataset(config, master)
    comments = _comments(config, seeds)

    sy.dataset_to_csv(dataset, out / "train.csv", comments)
    sy.json_dump({"config": config.resolved(), "seeds": seeds, "data": sy.dataset_to_json(dataset)},
                 out / "train.json")
    system = config.make_system()
    fine = [sy.integrate_rk4(system.field, ic, config.h / 25.0, config.t_end)
            for ic in config.initial_conditions]
    plot = [sy.Trajectory(tr.times[::5], tr.states[::5]) for tr in fine]
    sy.trajectories_to_csv(plot, out / "trajectories.csv", comments)
    print(f"N = {len(dataset)}")
    return EXIT_OK


def cmd_fit(args) -> int:
    config = parse_config(args.config)
    master = config.seed if args.seed is None else args.seed
    out = Path(args.out or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.fixed_hypers:
        try:
            sigma, lam1, lam2 = (float(v) for v in args.fixed_hypers.split(","))
        except ValueError:
            raise ConfigError(f"--fixed-hypers expects 'sigma,lambda1,lambda2', got {args.fixed_hypers!r}")
        _check_sigma_range("--fixed-hypers", sigma)
        config = dataclasses.replace(
            config,
            fixed_helmholtz=rg.Hyperparameters(sigma, lam1, lam2, config.d),
            fixed_gaussian=rg.Hyperparameters(sigma, lam1, None, config.d),
        )
    dataset = _load_dataset(args.data) if args.data else None
    result = run_protocol(config, master, dataset)

    base_doc = {"config": config.resolved(), "seeds": result["seeds"]}
    sy.json_dump({**base_doc, **result["helmholtz"].to_json()}, out / "model_helmholtz.json")
    sy.json_dump({**base_doc, **result["gaussian"].to_json()}, out / "model_gaussian.json")
    reports = [result["report_helmholtz"].to_json(), result["report_gaussian"].to_json()]
    sy.json_dump({**base_doc, "reports": reports}, out / "eval_report.json")
    print("\n".join(_summary_lines(reports, f"system: {config.system_name}  seed: {master}")))
    return EXIT_OK


def cmd_eval(args) -> int:
    config = parse_config(args.config)
    master = config.seed if args.seed is None else args.seed
    out = Path(args.out or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(args.model) as fh:
        doc = json.load(fh)
    if doc.get("model") == "helmholtz":
        model = rg.HelmholtzModel.from_json(doc)
    elif doc.get("model") == "gaussian":
        model = rg.BaselineModel.from_json(doc)
    else:
        raise ConfigError(f"{args.model}: unknown model kind {doc.get('model')!r}")
    dataset = _load_dataset(args.data) if args.data else simulate_dataset(config, master)
    test = ev.make_test_set(config.make_system(), config.test_x0, config.test_h, config.test_t_end)
    report = ev.evaluate_model(model, dataset, test, config.system_name, doc["model"], master, NOTES)
    sy.json_dump({"config": config.resolved(), "seeds": _seed_map(master),
                  "reports": [report.to_json()]}, out / "eval_report.json")
    print("\n".join(_summary_lines([report.to_json()], f"system: {config.system_name}  seed: {master}")))
    return EXIT_OK


def _median_summary(reports: list[dict]) -> dict:
    out = {}
    for kind in ("helmholtz", "gaussian"):
        rows = [r for r in reports if r["model"] == kind]
        out[kind] = {
            "train_mse": float(np.median([r["train_mse"] for r in rows])),
            "test_mse": float(np.median([r["test_mse"] for r in rows])),
        }
    return out


def cmd_reproduce(args) -> int:
    if args.seeds < 1:
        raise ConfigError(f"--seeds must be >= 1, got {args.seeds}")
    config = parse_config(args.config or bundled_config_path(args.experiment))
    base_seed = config.seed if args.seed is None else args.seed
    out = Path(args.out or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    masters = [base_seed + i for i in range(args.seeds)]

    # Per-seed runs are pure; gather in seed order so aggregation is stable.
    with ThreadPoolExecutor(max_workers=min(args.jobs, len(masters))) as pool:
        results = list(pool.map(lambda m: run_protocol(config, m), masters))

    reports = []
    for result in results:
        reports.extend([result["report_helmholtz"].to_json(), result["report_gaussian"].to_json()])
    medians = _median_summary(reports)

    seeds0 = results[0]["seeds"]
    comments = _comments(config, seeds0)
    with open(out / "summary.csv", "w") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write("system,model,train_mse,test_mse,seed,d,sigma,lambda1,lambda2\n")
        for r in reports:
            hyp = r["hyper"]
            fh.write(f"{r['system']},{r['model']},{r['train_mse']!r},{r['test_mse']!r},"
                     f"{r['seed']},{hyp['d']},{hyp['sigma']!r},{hyp['lambda1']!r},{hyp['lambda2']!r}\n")

    title = f"experiment: {config.system_name}  (median over {len(masters)} seeds)"
    rows = [{"model": kind, **medians[kind]} for kind in ("gaussian", "helmholtz")]
    summary_text = _summary_lines(rows, title)
    checks = [(desc, bool(check(medians))) for desc, check in THRESHOLDS[config.system_name]]
    check_lines = [f"{'PASS' if ok else 'FAIL'}: {desc}" for desc, ok in checks]
    (out / "summary.txt").write_text("\n".join(comments + summary_text + check_lines) + "\n")

    system = config.make_system()
    first = results[0]
    grids = {
        "true": ev.stream_grid(system.field, config.figure_bounds, config.figure_resolution),
        "gaussian": ev.stream_grid(first["gaussian"], config.figure_bounds, config.figure_resolution),
        "helmholtz": ev.stream_grid(first["helmholtz"], config.figure_bounds, config.figure_resolution),
    }
    for label, grid in grids.items():
        ev.stream_grid_to_csv(grid, out / f"grid_{label}.csv", comments)
    sy.dataset_to_csv(first["dataset"], out / "grid_data.csv", comments)

    sy.json_dump({
        "config": config.resolved(),
        "seeds": [r["seeds"] for r in results],
        "medians": medians,
        "thresholds": [{"description": desc, "passed": ok} for desc, ok in checks],
        "reports": reports,
    }, out / "report.json")

    print("\n".join(summary_text + check_lines))
    return EXIT_OK if all(ok for _, ok in checks) else EXIT_THRESHOLD


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="helmrff",
                                     description="Learn dissipative Hamiltonian vector fields "
                                                 "and reproduce the benchmark experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate and save a noisy training set")
    sim.add_argument("--config", required=True)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", default=None)
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="tune, fit, and evaluate both models")
    fit.add_argument("--config", required=True)
    fit.add_argument("--data", default=None, help="training CSV/JSON; simulated from config if omitted")
    fit.add_argument("--seed", type=int, default=None)
    fit.add_argument("--out", default=None)
    fit.add_argument("--fixed-hypers", default=None, metavar="SIGMA,L1,L2",
                     help="skip the grid search and use these hyperparameters")
    fit.set_defaults(func=cmd_fit)

    ev_cmd = sub.add_parser("eval", help="re-evaluate a saved model")
    ev_cmd.add_argument("--config", required=True)
    ev_cmd.add_argument("--model", required=True)
    ev_cmd.add_argument("--data", default=None)
    ev_cmd.add_argument("--seed", type=int, default=None)
    ev_cmd.add_argument("--out", default=None)
    ev_cmd.set_defaults(func=cmd_eval)

    rep = sub.add_parser("reproduce", help="run a full benchmark over many seeds")
    rep.add_argument("experiment", choices=sorted(THRESHOLDS))
    rep.add_argument("--config", default=None, help="override the bundled experiment config")
    rep.add_argument("--seeds", type=int, default=10, help="number of master seeds")
    rep.add_argument("--seed", type=int, default=None, help="first master seed")
    rep.add_argument("--jobs", type=int, default=4)
    rep.add_argument("--out", default=None)
    rep.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
