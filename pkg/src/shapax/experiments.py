"""
Convergence experiments
=======================

Synthetic data generators for six convergence experiments of the Monte
Carlo estimators and the harness measuring their error against the exact
empirical game values.

Every experiment draws a background dataset of logistic-model predictors,
computes the exact attribution of one target feature (or group) at every
observation of the dataset once, and then repeats the Monte Carlo
estimation ``runs`` times for every number of iterations ``K`` of the grid.
The error of a run is the mean integrated squared error (MISE) over the
observations and its relative version (RMISE). At the rate ``1/sqrt(K)``
of the estimators the MISE decays like ``1/K``, a slope of ``-1`` on
log-log axes.

======== ================ ===================== ===========================
id       predictors       target                partition
======== ================ ===================== ===========================
``1a``   4                quotient Shapley S1   ``{1,2}, {3}, {4}``
``1b``   4, 5, 10, 16     Shapley x1            none
``2a``   6                Owen x4               ``{1,2}, {3}, {4,5,6}``
``2b``   6, 10, 14, 18    Owen x5               ``{1,2}, {3}, {4}, {5..p}``
``3a``   6                two-step x4           ``{1,2}, {3}, {4,5,6}``
``3b``   6, 10, 14, 18    two-step x5           ``{1,2}, {3}, {4}, {5..p}``
======== ================ ===================== ===========================

Example
-------
>>> spec = ExperimentSpec("1a", size=8, grid=(16, 32), runs=2)
>>> generated = gen_experiment(spec)
>>> generated.data.shape
(8, 4)
>>> generated.partition.to_lists(one_based=True)
[[1, 2], [3], [4]]
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import jax
import jax.numpy as jnp
import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from .coalition import Partition
from .constants import EXACT_LIMIT
from .data import Dataset
from .distributions import sample_distribution
from .errors import ContractError, limit_error
from .estimate import Estimate, estimate_update
from .game import (
    MarginalGame,
    coalitional_value_of,
    linear_value_of,
    quotient_value_of,
    two_step_value_of,
)
from .mc import (
    EmpiricalMarginal,
    accumulate,
    coalitional_samples,
    linear_samples,
    quotient_samples,
    two_step_samples,
)
from .model import ModelSpec, parse_expression
from .sampling import Stream, Task
from .typing import Key
from .weights import CoalitionalWeightScheme, WeightScheme

logger = logging.getLogger(__name__)

EXPERIMENTS = ("1a", "1b", "2a", "2b", "3a", "3b")

PREDICTORS = {
    "1a": (4,),
    "1b": (4, 5, 10, 16),
    "2a": (6,),
    "2b": (6, 10, 14, 18),
    "3a": (6,),
    "3b": (6, 10, 14, 18),
}
"""Numbers of predictors each experiment is defined for"""

TARGETS = {
    "1a": ("quotient-shapley", 0),
    "1b": ("shapley", 0),
    "2a": ("owen", 3),
    "2b": ("owen", 4),
    "3a": ("two-step", 3),
    "3b": ("two-step", 4),
}
"""Game value and 0-based target index, a group index for quotient values"""

DEFAULT_GRID = tuple(2**r for r in range(9, 15))

_EXPONENT = "-3*(x1 - 5) + 0.2*(x2 - 15) - 2*(x3 - 2/7) - 5*x4"


@dataclass(frozen=True)
class ExperimentSpec:
    """
    Parameters of a convergence experiment.

    Parameters
    ----------
    id : str
        One of ``1a, 1b, 2a, 2b, 3a, 3b``.
    p : int, optional
        Number of predictors, defaults to the smallest one of the experiment.
    size : int
        Number of rows of the background dataset.
    grid : tuple of int
        Numbers of Monte Carlo iterations.
    runs : int
        Repetitions of the estimation for every number of iterations.
    seed : int
        Seed of the data generation and of all Monte Carlo streams.
    any_p : bool
        Accept other numbers of predictors for the experiments with a
        variable number of predictors.
    """

    id: str
    p: Optional[int] = None
    size: int = 100
    grid: Tuple[int, ...] = DEFAULT_GRID
    runs: int = 50
    seed: int = 0
    any_p: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.id not in EXPERIMENTS:
            raise ContractError(
                f"unknown experiment {self.id!r}, expected one of {', '.join(EXPERIMENTS)}"
            )
        allowed = PREDICTORS[self.id]
        if self.p is None:
            object.__setattr__(self, "p", allowed[0])
        variable = self.any_p and len(allowed) > 1
        if self.p not in allowed and not (variable and self.p >= allowed[0]):
            raise ContractError(
                f"experiment {self.id} is defined for p in {set(allowed)}, got {self.p}"
            )
        object.__setattr__(self, "grid", tuple(int(k) for k in self.grid))
        if not self.grid or min(self.grid) < 1:
            raise ContractError("the iteration grid needs positive entries")
        if self.size < 1 or self.runs < 1:
            raise ContractError("dataset size and number of runs must be positive")

    @property
    def kind(self) -> str:
        return TARGETS[self.id][0]

    @property
    def target(self) -> int:
        return TARGETS[self.id][1]

    @property
    def target_name(self) -> str:
        index = self.target + 1
        return f"S{index}" if self.kind.startswith("quotient") else f"x{index}"

    def to_config(self) -> dict:
        config = asdict(self)
        config["grid"] = list(self.grid)
        config["kind"] = self.kind
        config["target"] = self.target_name
        del config["any_p"]
        return config


class GeneratedExperiment(NamedTuple):
    """Background dataset, model, partition and target of an experiment."""

    data: Dataset
    model: ModelSpec
    partition: Optional[Partition]
    target: int


def experiment_expression(experiment: str, p: int) -> str:
    """
    Model of an experiment as expression over ``x1, ..., xp``.

    Example
    -------
    >>> experiment_expression("1b", 6)
    'sqrt(6) / (1 + exp(-3*(x1 - 5) + 0.2*(x2 - 15) - 2*(x3 - 2/7) - 5*x4 + x5 + x6))'
    """
    exponent = _EXPONENT
    if experiment in ("2a", "3a"):
        exponent += " + x5 - 0.5*(pi - 1/pi) - x6"
    elif experiment != "1a":
        exponent += "".join(f" + x{k}" for k in range(5, p + 1))
    return f"sqrt(6) / (1 + exp({exponent}))"


def experiment_partition(experiment: str, p: int) -> Optional[Partition]:
    if experiment == "1a":
        return Partition.from_lists([[0, 1], [2], [3]], p)
    if experiment == "1b":
        return None
    if experiment in ("2a", "3a"):
        return Partition.from_lists([[0, 1], [2], [3, 4, 5]], p)
    return Partition.from_lists([[0, 1], [2], [3], list(range(4, p))], p)


def _base_predictors(keys, size: int) -> List[jnp.ndarray]:
    x1 = sample_distribution("normal", {"mean": 5.0, "variance": 1.0}, keys[0], (size,))
    # scale |x1| per row
    x2 = sample_distribution(
        "gamma", {"shape": 3.0, "scale": np.abs(np.asarray(x1))}, keys[1], (size,)
    )
    x3 = sample_distribution("beta", {"a": 2.0, "b": 5.0}, keys[2], (size,))
    x4 = sample_distribution("uniform", {"low": -1.0, "high": 1.0}, keys[3], (size,))
    return [x1, x2, x3, x4]


def generate_predictors(experiment: str, p: int, size: int, key: Key) -> np.ndarray:
    """
    Draw ``size`` observations of the predictors of an experiment.

    Returns
    -------
    ndarray
        ``(size, p)`` matrix.
    """
    keys = jax.random.split(key, 7)
    columns = _base_predictors(keys, size)
    if experiment in ("2a", "3a"):
        x4 = columns[3]
        e1 = sample_distribution("normal", {"mean": 0.0, "variance": 0.1**2}, keys[4], (size,))
        e2 = sample_distribution("normal", {"mean": 0.0, "variance": 0.05**2}, keys[5], (size,))
        columns += [jnp.exp(x4) + e1, x4**2 * jnp.sin(math.pi * x4) + e2]
    elif experiment == "1b" and p > 4:
        tail = sample_distribution(
            "normal", {"mean": 0.0, "variance": 3.0}, keys[4], (size, p - 4)
        )
        columns += list(tail.T)
    elif experiment in ("2b", "3b"):
        d = p - 4
        cov = np.full((d, d), 0.1) + np.eye(d) * (3.0 - 0.1)
        tail = sample_distribution("mvnormal", {"mean": np.zeros(d), "cov": cov}, keys[4], (size,))
        columns += list(tail.T)
    return np.stack([np.asarray(c, dtype=np.float64) for c in columns], axis=1)


def gen_experiment(spec: ExperimentSpec, key: Optional[Key] = None) -> GeneratedExperiment:
    """
    Generate the background dataset, model, partition and target of an experiment.

    Parameters
    ----------
    spec : ExperimentSpec
        Experiment to generate.
    key : Key, optional
        PRNG key of the data generation, derived from ``spec.seed`` by default.

    Returns
    -------
    GeneratedExperiment
        The target is a group index for quotient values and a feature
        index otherwise.
    """
    if key is None:
        key = Stream(spec.seed, Task.EXPERIMENT, 0).key()
    rows = generate_predictors(spec.id, spec.p, spec.size, key)
    model = parse_expression(experiment_expression(spec.id, spec.p), spec.p)
    partition = experiment_partition(spec.id, spec.p)
    logger.debug("generated experiment %s with %d rows and %d predictors", spec.id, *rows.shape)
    return GeneratedExperiment(Dataset(rows), model, partition, spec.target)


def mise(exact: Sequence[float], estimates: Sequence[float]) -> float:
    """
    Mean integrated squared error, the mean over observations of the squared error.

    Example
    -------
    >>> mise([0.0, 0.0], [1.0, -1.0])
    1.0
    """
    exact = np.asarray(exact, dtype=np.float64)
    estimates = np.asarray(estimates, dtype=np.float64)
    if exact.shape != estimates.shape or exact.ndim != 1:
        raise ContractError(
            f"exact values of shape {exact.shape} and estimates of shape "
            f"{estimates.shape} do not match"
        )
    if exact.size == 0:
        raise ContractError("no observations to average over")
    return math.fsum(((estimates - exact) ** 2).tolist()) / exact.size


def rmise(exact: Sequence[float], estimates: Sequence[float]) -> float:
    """
    Relative MISE, the MISE divided by the mean square of the exact values.

    Example
    -------
    >>> rmise([1.0, 1.0], [2.0, 2.0])
    1.0
    """
    error = mise(exact, estimates)
    exact = np.asarray(exact, dtype=np.float64)
    scale = math.fsum((exact**2).tolist()) / exact.size
    if scale == 0.0:
        raise ContractError("relative error is undefined for all-zero exact values")
    return error / scale


def fit_loglog_slope(points: Sequence[Tuple[float, float]]) -> float:
    """
    Least squares slope of ``log2(value)`` against ``log2(K)``.

    Example
    -------
    >>> round(fit_loglog_slope([(512, 1 / 512), (1024, 1 / 1024), (4096, 1 / 4096)]), 12)
    -1.0
    """
    K = np.array([k for k, _ in points], dtype=np.float64)
    values = np.array([v for _, v in points], dtype=np.float64)
    if np.unique(K).size < 2:
        raise ContractError("slope fit needs at least two distinct iteration counts")
    if np.any(K <= 0) or np.any(values <= 0):
        raise ContractError("slope fit needs positive iteration counts and values")
    slope, _ = np.polyfit(np.log2(K), np.log2(values), 1)
    return float(slope)


def exact_target(spec: ExperimentSpec, generated: GeneratedExperiment, r: int) -> float:
    """Exact empirical value of the target at observation ``r`` of the dataset."""
    data, model, partition, target = generated
    game = MarginalGame(model, data, data.rows[r])
    kind = spec.kind
    if kind == "shapley":
        return linear_value_of(game, WeightScheme.shapley(), target)
    if kind == "quotient-shapley":
        return quotient_value_of(game, partition, WeightScheme.shapley(), target)
    if kind == "owen":
        return coalitional_value_of(game, partition, CoalitionalWeightScheme.owen(), target)
    return two_step_value_of(game, partition, target)


def mc_target(
    spec: ExperimentSpec,
    generated: GeneratedExperiment,
    r: int,
    K: int,
    replicate: int,
) -> Estimate:
    """Monte Carlo estimate of the target at observation ``r`` from ``K`` iterations."""
    data, model, partition, target = generated
    x_star = data.rows[r]
    mode = EmpiricalMarginal(K)
    kind = spec.kind
    if kind == "shapley":
        stream = Stream(spec.seed, Task.GAME_VALUE, target, replicate)
        samples = linear_samples(
            model, data, x_star, WeightScheme.shapley(), mode, stream, target
        )
    elif kind == "quotient-shapley":
        stream = Stream(spec.seed, Task.GAME_VALUE, target, replicate)
        samples = quotient_samples(
            model, data, x_star, partition, WeightScheme.shapley(), mode, stream, target
        )
    elif kind == "owen":
        stream = Stream(spec.seed, Task.COALITIONAL, target, replicate)
        samples = coalitional_samples(
            model, data, x_star, partition, CoalitionalWeightScheme.owen(), mode, stream, target
        )
    else:
        samples = two_step_samples(model, data, x_star, partition, mode, spec.seed, replicate, target)
    return accumulate(samples)


def _check_feasible(spec: ExperimentSpec, generated: GeneratedExperiment, limit: int):
    partition = generated.partition
    sizes = [spec.p] if partition is None else [partition.m, max(partition.sizes())]
    for size in sizes:
        if size > limit:
            raise limit_error(f"{spec.kind} value of experiment {spec.id}", size, limit)


@dataclass(frozen=True)
class ConvergenceRow:
    """Error of one Monte Carlo run over all observations of the dataset."""

    K: int
    run: int
    mise: float
    rmise: float
    variance: float
    """Mean over observations of the squared standard error"""

    seconds: float


def _interval(values: Sequence[float]) -> dict:
    running = None
    for value in values:
        running = estimate_update(running, value)
    low, high = running.ci95
    return {"mean": running.mean, "ci95": [low, high]}


def summarize(spec: ExperimentSpec, rows: Sequence[ConvergenceRow]) -> dict:
    """
    Per-K means with normal approximation 95 % intervals over the runs and
    the fitted log-log slopes of the mean errors.
    """
    per_k = []
    for K in spec.grid:
        cell = [row for row in rows if row.K == K]
        per_k.append(
            {
                "K": K,
                "runs": len(cell),
                "mise": _interval([row.mise for row in cell]),
                "rmise": _interval([row.rmise for row in cell]),
                "variance": float(np.mean([row.variance for row in cell])),
            }
        )
    summary = {"experiment": spec.to_config(), "per_k": per_k}
    for metric in ("mise", "rmise"):
        points = [(entry["K"], entry[metric]["mean"]) for entry in per_k]
        try:
            summary[f"{metric}_slope"] = fit_loglog_slope(points)
        except ContractError as err:
            logger.info("no %s slope: %s", metric, err)
            summary[f"{metric}_slope"] = None
    return summary


class ConvergenceResult(NamedTuple):
    rows: List[ConvergenceRow]
    summary: dict
    exact: np.ndarray
    """Exact target value at every observation"""


def run_convergence(
    spec: ExperimentSpec,
    key: Optional[Key] = None,
    n_jobs: int = 1,
    progress: bool = False,
    limit: int = EXACT_LIMIT,
) -> ConvergenceResult:
    """
    Run a convergence experiment.

    The exact target values are computed once per observation. For every
    ``K`` of the grid and every run the target is estimated at every
    observation with ``K`` iterations of the empirical marginal sampler,
    every estimate from its own replicate stream.

    Parameters
    ----------
    spec : ExperimentSpec
        Experiment to run.
    key : Key, optional
        PRNG key of the data generation.
    n_jobs : int
        Worker threads over the observations, results do not depend on it.
    progress : bool
        Show a progress bar over the ``(K, run)`` cells.
    limit : int
        Largest enumeration for the exact values.

    Returns
    -------
    ConvergenceResult
        One row per ``(K, run)``, the summary and the exact values.

    Raises
    ------
    LimitError
        If the exact values are infeasible.
    """
    generated = gen_experiment(spec, key)
    _check_feasible(spec, generated, limit)
    size = len(generated.data)

    start = time.perf_counter()
    with Parallel(n_jobs=n_jobs, prefer="threads") as parallel:
        exact = np.array(
            parallel(delayed(exact_target)(spec, generated, r) for r in range(size))
        )
        logger.info(
            "experiment %s: exact values at %d observations in %.2f s",
            spec.id,
            size,
            time.perf_counter() - start,
        )
        if not np.any(exact):
            raise ContractError(f"exact values of experiment {spec.id} vanish, no relative error")

        rows = []
        cells = [(g, K, run) for g, K in enumerate(spec.grid) for run in range(spec.runs)]
        for g, K, run in tqdm(
            cells, desc=f"Experiment {spec.id}", leave=True, disable=not progress
        ):
            offset = (g * spec.runs + run) * size
            start = time.perf_counter()
            estimates = parallel(
                delayed(mc_target)(spec, generated, r, K, offset + r) for r in range(size)
            )
            seconds = time.perf_counter() - start
            means = np.array([e.mean for e in estimates])
            row = ConvergenceRow(
                K,
                run,
                mise(exact, means),
                rmise(exact, means),
                float(np.mean([e.stderr**2 for e in estimates])),
                seconds,
            )
            logger.debug("K=%d run=%d mise=%g (%.2f s)", K, run, row.mise, seconds)
            rows.append(row)

    summary = summarize(spec, rows)
    logger.info("experiment %s: MISE slope %s", spec.id, summary["mise_slope"])
    return ConvergenceResult(rows, summary, exact)


CONVERGENCE_COLUMNS = ("experiment", "target", "K", "run", "mise", "rmise", "variance", "seconds")


def write_convergence_csv(spec: ExperimentSpec, rows: Sequence[ConvergenceRow], fd):
    """Write the run table as CSV to an open text file."""
    writer = csv.writer(fd, lineterminator="\n")
    writer.writerow(CONVERGENCE_COLUMNS)
    for row in rows:
        writer.writerow(
            [
                spec.id,
                spec.target_name,
                row.K,
                row.run,
                repr(row.mise),
                repr(row.rmise),
                repr(row.variance),
                f"{row.seconds:.6f}",
            ]
        )


def write_summary_json(summary: dict, fd):
    json.dump(summary, fd, indent=2)
    fd.write("\n")
