"""Experiment runner for the adaptive-sampling loop.

Each replication draws its own initial designs, candidate pools and holdout
set, then repeats: select a candidate, run the chosen fidelity there, append
the result, refit, and record holdout RMSE and cumulative cost.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
from scipy.stats import qmc

from . import __version__
from .acquisition import STRATEGIES, CandidatePool, CostModel, PoolExhaustedError, select_uncertainty
from .benchmarks import PROBLEMS, Problem, get_problem, rmse
from .gp_core import CondensedGP, TrainingSet
from .inference import ChainConfig, PriorSpec, condense, run_chain
from .mf_model import FidelityLevel, OutputScaling, fit_mf

log = logging.getLogger(__name__)

STRATEGY_NAMES = ("mf_ucr", "if_ucr", "if_ucr_bel", "single_us")
_STREAMS = {"design": 0, "pools": 1, "holdout": 2, "mcmc": 3}


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "forrester"
    strategy: str = "if_ucr"
    cost_ratio: tuple[float, float] = (10.0, 1.0)  # (C_H, C_L)
    iterations: int | None = None  # None: problem default (10 Forrester, 15 otherwise)
    replications: int = 10
    n_init_low: int = 4
    n_init_high: int = 2
    pool_size: int = 100
    holdout_size: int | None = None  # None: 100 for analytic problems, 8 for datasets
    seed: int = 0
    design: str = "uniform"
    data_path: str | None = None
    rmse_threshold: float | None = None
    chain_length: int = 2000
    burn_in_fraction: float = 0.5
    adapt_steps: int = 500
    prior_log_amplitude: tuple[float, float] = (0.0, 1.0)
    prior_log_inv_length_scale: tuple[float, float] = (0.0, 1.5)
    prior_log_nugget: tuple[float, float] = (-3.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "cost_ratio", tuple(float(c) for c in self.cost_ratio))
        for name in ("prior_log_amplitude", "prior_log_inv_length_scale", "prior_log_nugget"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    @property
    def cost(self) -> CostModel:
        high, low = self.cost_ratio
        return CostModel(low, high)

    @property
    def cost_label(self) -> str:
        return f"{self.cost_ratio[0]:g}:{self.cost_ratio[1]:g}"

    def prior(self, dim: int) -> PriorSpec:
        a, b, n = self.prior_log_amplitude, self.prior_log_inv_length_scale, self.prior_log_nugget
        return PriorSpec([a[0], *[b[0]] * dim, n[0]], [a[1], *[b[1]] * dim, n[1]])

    def chain_config(self, seed: int) -> ChainConfig:
        return ChainConfig(self.chain_length, self.burn_in_fraction, self.adapt_steps, seed=int(seed))

    def resolved(self, problem: Problem | None = None) -> "ExperimentConfig":
        """Copy with problem-dependent defaults filled in, after validation."""
        problem = problem or get_problem(self.problem, self.data_path)
        iterations = self.iterations if self.iterations is not None else problem.default_iterations
        holdout = self.holdout_size
        if holdout is None:
            holdout = 8 if problem.is_dataset else 100
        cfg = dataclasses.replace(self, iterations=iterations, holdout_size=holdout)
        cfg.validate(problem)
        return cfg

    def validate(self, problem: Problem | None = None) -> None:
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.strategy not in STRATEGY_NAMES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {', '.join(STRATEGY_NAMES)}")
        self.cost  # validates the ratio
        if self.iterations is not None and self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.n_init_low < 2 or self.n_init_high < 1:
            raise ValueError("need n_init_low >= 2 and n_init_high >= 1")
        if self.design not in ("uniform", "lhs"):
            raise ValueError("design must be 'uniform' or 'lhs'")
        if self.holdout_size is not None and self.holdout_size < 1:
            raise ValueError("holdout_size must be >= 1")
        if problem is None or self.iterations is None:
            return
        if problem.is_dataset:
            n = len(problem.table)
            rest = n - (self.holdout_size or 0)
            if rest < max(self.n_init_low, self.n_init_high) + 1:
                raise ValueError(f"dataset of {n} rows too small for holdout and initial design")
        elif self.pool_size < self.iterations:
            raise ValueError(f"pool_size {self.pool_size} smaller than iterations {self.iterations}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class IterationRecord:
    strategy: str
    cost_high: float
    cost_low: float
    replication: int
    iteration: int
    chosen_point: tuple[float, ...]
    chosen_level: str
    score: float
    rmse: float
    cumulative_cost: float
    remaining_low: int
    remaining_high: int

    @property
    def cost_label(self) -> str:
        return f"{self.cost_high:g}:{self.cost_low:g}"


@dataclass
class ReplicationResult:
    replication: int
    seed: int
    records: list[IterationRecord]
    predictions: list[tuple[int, int, int, float, float]]  # (rep, iteration, holdout idx, prediction, truth)
    holdout_indices: list[int] | None
    initial_rmse: float
    truncated: bool = False
    converged: bool = False


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    replications: list[ReplicationResult] = field(default_factory=list)

    @property
    def records(self) -> list[IterationRecord]:
        return [r for rep in self.replications for r in rep.records]

    @property
    def predictions(self) -> list[tuple]:
        return [p for rep in self.replications for p in rep.predictions]


def _rng(seed: int, stream: str, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, _STREAMS[stream], *extra]))


def _mcmc_seed(seed: int, iteration: int) -> int:
    return int(np.random.SeedSequence([seed, _STREAMS["mcmc"], iteration]).generate_state(1)[0])


def _sample_unit(rng: np.random.Generator, n: int, dim: int, design: str, open_lower: bool) -> np.ndarray:
    if design == "lhs":
        u = qmc.LatinHypercube(d=dim, seed=rng).random(n)
    else:
        u = rng.random((n, dim))
    # random() is [0, 1); flip to (0, 1] where 0 is outside the domain
    return 1.0 - u if open_lower else u


class _Oracle:
    """Evaluates either fidelity; dataset problems look up rows by index."""

    def __init__(self, problem: Problem):
        self.problem = problem

    def __call__(self, level: FidelityLevel, X: np.ndarray, rows=None) -> np.ndarray:
        p = self.problem
        if p.is_dataset:
            column = p.low if level is FidelityLevel.LOW else p.high
            return column[np.asarray(rows, dtype=int)]
        f = p.eval_low if level is FidelityLevel.LOW else p.eval_high
        return np.atleast_1d(np.asarray(f(np.atleast_2d(X)), dtype=float))


def _draw_replication(problem: Problem, cfg: ExperimentConfig, seed: int):
    """Initial designs, pools and holdout for one replication (normalized inputs)."""
    d = problem.dim
    if problem.is_dataset:
        n = len(problem.table)
        perm = _rng(seed, "holdout").permutation(n)
        holdout_idx = np.sort(perm[: cfg.holdout_size])
        rest = np.sort(perm[cfg.holdout_size:])
        design_rng = _rng(seed, "design")
        hf_init = np.sort(design_rng.choice(rest, cfg.n_init_high, replace=False))
        lf_init = np.sort(design_rng.choice(rest, cfg.n_init_low, replace=False))
        lf_pool_rows = np.setdiff1d(rest, lf_init)
        hf_pool_rows = np.setdiff1d(rest, hf_init)
        T = problem.table
        return dict(
            holdout=T[holdout_idx], holdout_rows=holdout_idx,
            lf_init=T[lf_init], lf_init_rows=lf_init,
            hf_init=T[hf_init], hf_init_rows=hf_init,
            pool=CandidatePool(T[lf_pool_rows], T[hf_pool_rows]),
            lf_pool_rows=lf_pool_rows, hf_pool_rows=hf_pool_rows,
        )
    design_rng = _rng(seed, "design")
    pool_rng = _rng(seed, "pools")
    sample = lambda rng, n: _sample_unit(rng, n, d, cfg.design, problem.open_lower)  # noqa: E731
    return dict(
        holdout=sample(_rng(seed, "holdout"), cfg.holdout_size), holdout_rows=None,
        lf_init=sample(design_rng, cfg.n_init_low), lf_init_rows=None,
        hf_init=sample(design_rng, cfg.n_init_high), hf_init_rows=None,
        pool=CandidatePool(sample(pool_rng, cfg.pool_size), sample(pool_rng, cfg.pool_size)),
        lf_pool_rows=None, hf_pool_rows=None,
    )


class _SingleFidelityModel:
    """High-fidelity-only GP used by the ``single_us`` baseline."""

    def __init__(self, data: TrainingSet, prior: PriorSpec, chain: ChainConfig):
        self.scaling = OutputScaling.fit(data.outputs)
        train = TrainingSet(data.inputs, self.scaling.forward(data.outputs))
        self.gp = CondensedGP(condense(run_chain(train, prior, chain)), train)

    def predict_mean(self, X) -> np.ndarray:
        return self.scaling.inverse(self.gp.predict_many(X)[0])


def run_replication(cfg: ExperimentConfig, replication: int, problem: Problem | None = None) -> ReplicationResult:
    """One replication of the adaptive-sampling loop; ``cfg`` must be resolved."""
    problem = problem or get_problem(cfg.problem, cfg.data_path)
    seed = cfg.seed + replication
    draw = _draw_replication(problem, cfg, seed)
    oracle = _Oracle(problem)
    LOW, HIGH = FidelityLevel.LOW, FidelityLevel.HIGH

    holdout = draw["holdout"]
    truth = oracle(HIGH, holdout, draw["holdout_rows"])
    d_low = TrainingSet(draw["lf_init"], oracle(LOW, draw["lf_init"], draw["lf_init_rows"]))
    d_high = TrainingSet(draw["hf_init"], oracle(HIGH, draw["hf_init"], draw["hf_init_rows"]))
    pool: CandidatePool = draw["pool"]
    pool_rows = {LOW: draw["lf_pool_rows"], HIGH: draw["hf_pool_rows"]}
    prior = cfg.prior(problem.dim)
    cost = cfg.cost
    single = cfg.strategy == "single_us"

    def fit(iteration: int):
        chain = cfg.chain_config(_mcmc_seed(seed, iteration))
        if single:
            return _SingleFidelityModel(d_high, prior, chain)
        return fit_mf(d_low, d_high, prior, chain)

    def holdout_mean(model) -> np.ndarray:
        if single:
            return model.predict_mean(holdout)
        return model.predict_many(holdout)[0]

    model = fit(0)
    initial_rmse = rmse(holdout_mean(model), truth)
    result = ReplicationResult(
        replication, seed, [], [],
        None if draw["holdout_rows"] is None else [int(i) for i in draw["holdout_rows"]],
        initial_rmse,
    )
    spent = 0.0
    for it in range(1, cfg.iterations + 1):
        try:
            if single:
                avail = pool.available(HIGH)
                if avail.size == 0:
                    raise PoolExhaustedError("high-fidelity candidate pool is exhausted")
                dec = select_uncertainty(model.gp, pool.high[avail], HIGH)
                dec = dataclasses.replace(dec, index=int(avail[dec.index]))
            else:
                dec = STRATEGIES[cfg.strategy](model, pool, cost)
        except PoolExhaustedError as exc:
            log.warning("replication %d truncated at iteration %d: %s", replication, it, exc)
            result.truncated = True
            break
        rows = None if pool_rows[dec.level] is None else [pool_rows[dec.level][dec.index]]
        y = float(oracle(dec.level, dec.point[None, :], rows)[0])
        pool.consume(dec.level, dec.index)
        if dec.level is LOW:
            d_low = d_low.append(dec.point, y)
        else:
            d_high = d_high.append(dec.point, y)
        spent += cost.of(dec.level)

        model = fit(it)
        pred = holdout_mean(model)
        err = rmse(pred, truth)
        remaining = pool.remaining()
        result.records.append(IterationRecord(
            cfg.strategy, cost.cost_high, cost.cost_low, replication, it,
            tuple(float(v) for v in dec.point), dec.level.value, dec.score, err, spent,
            remaining[0], remaining[1],
        ))
        result.predictions.extend(
            (replication, it, j, float(p), float(t)) for j, (p, t) in enumerate(zip(pred, truth))
        )
        if cfg.rmse_threshold is not None and err <= cfg.rmse_threshold:
            result.converged = True
            break
    return result


def _run_task(args):
    cfg, rep = args
    return cfg, rep, run_replication(cfg, rep)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Run every replication of one configuration."""
    return run_sweep([config], workers)[0]


def run_sweep(configs: list[ExperimentConfig], workers: int = 1) -> list[ExperimentResult]:
    """Run several configurations; replications may run in worker processes.

    Results do not depend on ``workers``.
    """
    resolved = [c.resolved() for c in configs]
    results = [ExperimentResult(c) for c in resolved]
    tasks = [(i, rep) for i, c in enumerate(resolved) for rep in range(c.replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_run_task, [(resolved[i], rep) for i, rep in tasks]))
        for (i, _), (_, _, rep_result) in zip(tasks, outs):
            results[i].replications.append(rep_result)
    else:
        problems = {}
        for i, rep in tasks:
            c = resolved[i]
            key = (c.problem, c.data_path)
            if key not in problems:
                problems[key] = get_problem(c.problem, c.data_path)
            log.info("%s %s %s replication %d", c.problem, c.strategy, c.cost_label, rep)
            results[i].replications.append(run_replication(c, rep, problems[key]))
    return results


# ---------------------------------------------------------------------------
# summaries and output files


@dataclass(frozen=True)
class SummaryRow:
    strategy: str
    cost_ratio: str
    iteration: int
    n: int
    rmse_median: float
    rmse_q25: float
    rmse_q75: float
    rmse_iqr: float
    cost_median: float
    cost_q25: float
    cost_q75: float
    cost_iqr: float


def summarize(records) -> list[SummaryRow]:
    """Median and interquartile range of RMSE and cumulative cost across replications."""
    groups: dict[tuple, list[IterationRecord]] = {}
    for r in records:
        groups.setdefault((r.strategy, r.cost_label, r.iteration), []).append(r)
    rows = []
    for (strategy, label, iteration), group in sorted(groups.items(), key=_summary_key):
        e = np.array([r.rmse for r in group])
        c = np.array([r.cumulative_cost for r in group])
        eq = np.percentile(e, [25, 50, 75])
        cq = np.percentile(c, [25, 50, 75])
        rows.append(SummaryRow(
            strategy, label, iteration, len(group),
            float(eq[1]), float(eq[0]), float(eq[2]), float(eq[2] - eq[0]),
            float(cq[1]), float(cq[0]), float(cq[2]), float(cq[2] - cq[0]),
        ))
    return rows


def _summary_key(item):
    (strategy, label, iteration), _ = item
    high, low = (float(v) for v in label.split(":"))
    return strategy, high / low, label, iteration


ITERATION_COLUMNS = [
    "strategy", "cost_high", "cost_low", "replication", "iteration", "chosen_point",
    "chosen_level", "score", "rmse", "cumulative_cost", "remaining_low", "remaining_high",
]
PREDICTION_COLUMNS = ["strategy", "cost_high", "cost_low", "replication", "iteration",
                      "holdout_index", "prediction", "truth"]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return " ".join(repr(float(v)) for v in value)
    return str(value)


def _record_row(r: IterationRecord) -> list[str]:
    return [_fmt(getattr(r, name)) for name in ITERATION_COLUMNS]


def parse_iteration_row(row: dict) -> IterationRecord:
    return IterationRecord(
        strategy=row["strategy"],
        cost_high=float(row["cost_high"]),
        cost_low=float(row["cost_low"]),
        replication=int(row["replication"]),
        iteration=int(row["iteration"]),
        chosen_point=tuple(float(v) for v in row["chosen_point"].split()),
        chosen_level=row["chosen_level"],
        score=float(row["score"]),
        rmse=float(row["rmse"]),
        cumulative_cost=float(row["cumulative_cost"]),
        remaining_low=int(row["remaining_low"]),
        remaining_high=int(row["remaining_high"]),
    )


def read_iterations(path) -> list[IterationRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [parse_iteration_row(row) for row in csv.DictReader(fh)]


def read_predictions(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _versions() -> dict:
    return {"mfas": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def emit_results(results, summary, out_dir) -> dict[str, Path]:
    """Write iterations.csv, summary.csv, predictions.csv and run.json into ``out_dir``.

    Returns:
        mapping of file kind to path.
    """
    results = [results] if isinstance(results, ExperimentResult) else list(results)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {k: out / f"{k}.{ext}" for k, ext in
                 (("iterations", "csv"), ("summary", "csv"), ("predictions", "csv"), ("run", "json"))}
        with paths["iterations"].open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ITERATION_COLUMNS)
            for res in results:
                w.writerows(_record_row(r) for r in res.records)
        with paths["summary"].open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            names = [f.name for f in dataclasses.fields(SummaryRow)]
            w.writerow(names)
            w.writerows([_fmt(getattr(row, n)) for n in names] for row in summary)
        with paths["predictions"].open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PREDICTION_COLUMNS)
            for res in results:
                c = res.config
                for rep, it, j, pred, truth in res.predictions:
                    w.writerow([c.strategy, _fmt(c.cost.cost_high), _fmt(c.cost.cost_low),
                                rep, it, j, _fmt(pred), _fmt(truth)])
        run = {
            "configs": [res.config.to_dict() for res in results],
            "replications": [
                {
                    "strategy": res.config.strategy,
                    "cost_ratio": list(res.config.cost_ratio),
                    "replication": rep.replication,
                    "seed": rep.seed,
                    "holdout_indices": rep.holdout_indices,
                    "initial_rmse": rep.initial_rmse,
                    "truncated": rep.truncated,
                    "converged": rep.converged,
                    "n_iterations": len(rep.records),
                }
                for res in results for rep in res.replications
            ],
            "versions": _versions(),
        }
        paths["run"].write_text(json.dumps(run, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"could not write results to {out}: {exc}") from exc
    return paths
