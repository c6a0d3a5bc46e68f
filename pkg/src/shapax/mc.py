"""
Monte Carlo game values
=======================

Monte Carlo estimates of linear game values, quotient game values,
coalitional values and two-step Shapley values of the marginal game.

Every value is the expectation of a marginal contribution

    Delta_i(S, x) = f(x*_{S+i}, x_{-(S+i)}) - f(x*_S, x_{-S})

over a random coalition ``S`` drawn from the weights of the game value
and a random background observation ``x``. The sampler mode decides where
the observations come from:

- :class:`TrueMarginal` makes one pass over the background dataset, the
  estimate targets the marginal game of the data generating distribution,
- :class:`EmpiricalMarginal` draws a free number of observations uniformly
  with replacement from the dataset, the estimate targets the empirical
  marginal game of the dataset.

Each feature (or group) is estimated from its own random stream with one
coalition draw per iteration.

Example
-------
>>> from shapax.model import parse_expression
>>> f = parse_expression("x1", 2)
>>> data = Dataset(np.array([[0.0, 0.0], [2.0, 2.0]]))
>>> result = mc_linear_value(
...     f, data, np.array([1.0, 1.0]), WeightScheme.shapley(), EmpiricalMarginal(64), seed=3
... )
>>> float(result.values[1]), float(result.stderr[1])
(0.0, 0.0)
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Sequence

import jax
import jax.numpy as jnp
import numpy as np
from joblib import Parallel, delayed

from .coalition import Partition
from .constants import CHUNK_POINTS, VARIANCE_BOUND_LIMIT
from .data import Dataset
from .errors import ContractError, ModelDomainError, limit_error
from .estimate import Estimate
from .game import (
    AttributionVector,
    _check_partition,
    check_inputs,
    coalitional_kind,
    compose_batch,
    group_names,
)
from .model import ModelSpec
from .sampling import Stream, Task, coalition_masks, permutation_masks
from .typing import ArrayLike, Key
from .util import all_subsets, bits_to_mask
from .weights import CoalitionalWeightScheme, WeightScheme

logger = logging.getLogger(__name__)


class SamplerMode:
    """Source of the background observations paired with the coalition draws."""

    label: str

    def count(self, n_rows: int) -> int:
        """Number of Monte Carlo iterations K for a dataset of ``n_rows`` rows."""
        raise NotImplementedError

    def rows(self, key: Key, n_rows: int) -> np.ndarray:
        """Indices of the background observation of every iteration."""
        raise NotImplementedError


@dataclass(frozen=True)
class TrueMarginal(SamplerMode):
    """One pass over the background dataset in dataset order, ``K = |D|``."""

    label = "mc-true"

    def count(self, n_rows: int) -> int:
        return n_rows

    def rows(self, key: Key, n_rows: int) -> np.ndarray:
        return np.arange(n_rows)


@dataclass(frozen=True)
class EmpiricalMarginal(SamplerMode):
    """``iterations`` observations drawn uniformly with replacement from the dataset."""

    iterations: int

    label = "mc-empirical"

    def __post_init__(self):
        if self.iterations < 1:
            raise ContractError(f"need at least one iteration, got {self.iterations}")

    def count(self, n_rows: int) -> int:
        return self.iterations

    def rows(self, key: Key, n_rows: int) -> np.ndarray:
        return np.asarray(jax.random.randint(key, (self.iterations,), 0, n_rows))


def mode_from_name(name: str, iterations: Optional[int] = None) -> SamplerMode:
    if name == "true":
        return TrueMarginal()
    if name == "empirical":
        if iterations is None:
            raise ContractError("empirical mode needs the number of iterations")
        return EmpiricalMarginal(iterations)
    raise ContractError(f"unknown sampler mode {name!r}")


class _Draws:
    """Background rows and evaluation helpers shared by the estimators."""

    def __init__(self, model: ModelSpec, data: Dataset, x_star: np.ndarray, rows: np.ndarray):
        self.model = model
        self.x_star = x_star
        self.x = data.rows[rows]
        self.size = rows.size

    def evaluate(self, *masks: np.ndarray) -> List[np.ndarray]:
        """
        Model values at the compositions of ``x*`` and the drawn rows for
        each ``(K, n)`` mask, evaluated in a single batch.
        """
        stacked = np.concatenate(masks)
        x = np.tile(self.x, (len(masks), 1))
        step = max(1, CHUNK_POINTS)
        parts = []
        for k in range(0, stacked.shape[0], step):
            points = compose_batch(self.x_star, x[k : k + step], stacked[k : k + step])
            values = self.model(points)
            finite = jnp.isfinite(values)
            if not bool(jnp.all(finite)):
                flat = k + int(jnp.argmin(finite))
                raise ModelDomainError(
                    "non-finite model value in Monte Carlo draw",
                    flat % self.size,
                    np.asarray(points[flat - k]),
                )
            parts.append(np.asarray(values, dtype=np.float64))
        return np.split(np.concatenate(parts), len(masks))


def _group_masks(partition: Partition, group_masks: np.ndarray) -> np.ndarray:
    """Feature masks of the unions ``Q_A`` of the selected groups."""
    return (group_masks.astype(np.int64) @ partition.membership().astype(np.int64)) > 0


def _within_group(local_masks: np.ndarray, members: Sequence[int], n: int) -> np.ndarray:
    masks = np.zeros((local_masks.shape[0], n), dtype=bool)
    masks[:, list(members)] = local_masks
    return masks


def linear_samples(
    model: ModelSpec,
    data: Dataset,
    x_star: np.ndarray,
    scheme: WeightScheme,
    mode: SamplerMode,
    stream: Stream,
    i: int,
) -> np.ndarray:
    """Samples ``Delta_i(S^(k), x^(k))`` of the linear game value of feature ``i``."""
    n = model.n
    k_rows, k_outer, _ = stream.split()
    draws = _Draws(model, data, x_star, mode.rows(k_rows, len(data)))
    S = coalition_masks(scheme, k_outer, draws.size, i, n)
    with_i = S.copy()
    with_i[:, i] = True
    after, before = draws.evaluate(with_i, S)
    return after - before


def quotient_samples(
    model: ModelSpec,
    data: Dataset,
    x_star: np.ndarray,
    partition: Partition,
    scheme: WeightScheme,
    mode: SamplerMode,
    stream: Stream,
    j: int,
) -> np.ndarray:
    """Samples ``Delta_j(A^(k), x^(k))`` of the quotient game value of group ``j``."""
    k_rows, k_outer, _ = stream.split()
    draws = _Draws(model, data, x_star, mode.rows(k_rows, len(data)))
    A = coalition_masks(scheme, k_outer, draws.size, j, partition.m)
    with_j = A.copy()
    with_j[:, j] = True
    after, before = draws.evaluate(_group_masks(partition, with_j), _group_masks(partition, A))
    return after - before


def coalitional_samples(
    model: ModelSpec,
    data: Dataset,
    x_star: np.ndarray,
    partition: Partition,
    cw: CoalitionalWeightScheme,
    mode: SamplerMode,
    stream: Stream,
    i: int,
) -> np.ndarray:
    """
    Samples ``Delta_i(A^(k), T^(k), x^(k))`` of the coalitional value of feature ``i``,
    with ``A`` drawn from the outer scheme over the groups other than the
    group ``S_j`` of ``i`` and ``T`` from the inner scheme over ``S_j \\ {i}``.
    """
    j = partition.group_of(i)
    members = partition.groups[j].indices()
    k_rows, k_outer, k_inner = stream.split()
    draws = _Draws(model, data, x_star, mode.rows(k_rows, len(data)))
    A = coalition_masks(cw.outer, k_outer, draws.size, j, partition.m)
    T = coalition_masks(cw.inner, k_inner, draws.size, members.index(i), len(members))
    before = _group_masks(partition, A) | _within_group(T, members, model.n)
    after = before.copy()
    after[:, i] = True
    f_after, f_before = draws.evaluate(after, before)
    return f_after - f_before


def two_step_samples(
    model: ModelSpec,
    data: Dataset,
    x_star: np.ndarray,
    partition: Partition,
    mode: SamplerMode,
    seed: int,
    replicate: int,
    i: int,
    centered: bool = False,
) -> np.ndarray:
    """
    Samples of the two-step Shapley value of feature ``i``.

    For a singleton group these are the quotient Shapley samples of the
    group. Otherwise every draw contributes

        Delta_i(S, x) + (Delta_j(A, x) - f(x*_{S_j}, x_{-S_j})) / |S_j|

    with ``S`` Shapley distributed within the group, ``A`` Shapley
    distributed over the other groups. The stand-alone worth
    ``f(x*_{S_j}, x_{-S_j})`` enters verbatim, with ``centered`` it is taken
    relative to ``f(x)``.
    """
    j = partition.group_of(i)
    members = partition.groups[j].indices()
    s = len(members)
    shapley = WeightScheme.shapley()
    if s == 1:
        stream = Stream(seed, Task.GAME_VALUE, j, replicate)
        return quotient_samples(model, data, x_star, partition, shapley, mode, stream, j)

    n = model.n
    stream = Stream(seed, Task.TWO_STEP, i, replicate)
    k_rows, k_outer, k_inner = stream.split()
    draws = _Draws(model, data, x_star, mode.rows(k_rows, len(data)))
    K = draws.size

    A = permutation_masks(k_outer, K, j, partition.m)
    with_j = A.copy()
    with_j[:, j] = True
    S = _within_group(permutation_masks(k_inner, K, members.index(i), s), members, n)
    with_i = S.copy()
    with_i[:, i] = True
    group = np.broadcast_to(partition.groups[j].to_mask(), (K, n))
    nobody = np.zeros((K, n), dtype=bool)

    f_with_i, f_S, f_with_j, f_A, f_group, f_x = draws.evaluate(
        with_i, S, _group_masks(partition, with_j), _group_masks(partition, A), group, nobody
    )
    worth = f_group - f_x if centered else f_group
    return (f_with_i - f_S) + ((f_with_j - f_A) - worth) / s


def accumulate(samples: np.ndarray, block: Optional[int] = None) -> Estimate:
    """
    Estimate from the samples of one player, block by block.

    Every block of at most ``block`` samples (``CHUNK_POINTS`` by default)
    is summarized on its own and merged into the running estimate, the
    blocks are fixed by the sample count alone.
    """
    block = CHUNK_POINTS if block is None else block
    if block < 1:
        raise ContractError(f"block size must be positive, got {block}")
    total = None
    for k in range(0, samples.size, block):
        part = Estimate.from_samples(samples[k : k + block])
        total = part if total is None else total.merge(part)
    if total is None:
        raise ContractError("no samples to estimate from")
    return total


def _estimate_all(
    sample_fn: Callable[[int], np.ndarray], players: Sequence[int], n_jobs: int
) -> List[Estimate]:
    def task(p: int) -> Estimate:
        return accumulate(sample_fn(p))

    start = time.perf_counter()
    if n_jobs == 1:
        estimates = [task(p) for p in players]
    else:
        estimates = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(task)(p) for p in players)
    logger.debug("estimated %d players in %.3f s", len(players), time.perf_counter() - start)
    return estimates


def _result(estimates, x_star, kind, mode, names) -> AttributionVector:
    return AttributionVector(
        np.array([e.mean for e in estimates]), x_star, kind, mode.label, tuple(names), tuple(estimates)
    )


def mc_linear_value(
    model: ModelSpec,
    data: Dataset,
    x_star: ArrayLike,
    scheme: WeightScheme,
    mode: SamplerMode,
    seed: int = 0,
    replicate: int = 0,
    n_jobs: int = 1,
) -> AttributionVector:
    """
    Monte Carlo estimate of a linear game value of the marginal game.

    Parameters
    ----------
    model : ModelSpec
        Model ``f``.
    data : Dataset
        Background dataset.
    x_star : array_like
        Observation to explain.
    scheme : WeightScheme
        Coefficients of the game value, coalitions are drawn from them.
    mode : SamplerMode
        :class:`TrueMarginal` or :class:`EmpiricalMarginal`.
    seed : int
        Seed of the random streams.
    replicate : int
        Replicate number, distinct replicates use independent streams.
    n_jobs : int
        Worker threads, the result does not depend on it.

    Returns
    -------
    AttributionVector
        Estimated value and :class:`Estimate` per feature.
    """
    x_star = check_inputs(model, data, x_star)

    def sample(i: int) -> np.ndarray:
        stream = Stream(seed, Task.GAME_VALUE, i, replicate)
        return linear_samples(model, data, x_star, scheme, mode, stream, i)

    estimates = _estimate_all(sample, range(model.n), n_jobs)
    return _result(estimates, x_star, scheme.kind.value, mode, data.names)


def mc_quotient_value(
    model: ModelSpec,
    data: Dataset,
    x_star: ArrayLike,
    partition: Partition,
    scheme: WeightScheme,
    mode: SamplerMode,
    seed: int = 0,
    replicate: int = 0,
    n_jobs: int = 1,
) -> AttributionVector:
    """
    Monte Carlo estimate of a quotient game value, one value per group.

    Group ``j`` uses the same stream id as feature ``j`` of
    :func:`mc_linear_value`, with the partition into singletons both
    estimators see identical draws.
    """
    x_star = check_inputs(model, data, x_star)
    _check_partition(partition, model.n)

    def sample(j: int) -> np.ndarray:
        stream = Stream(seed, Task.GAME_VALUE, j, replicate)
        return quotient_samples(model, data, x_star, partition, scheme, mode, stream, j)

    estimates = _estimate_all(sample, range(partition.m), n_jobs)
    return _result(
        estimates, x_star, f"quotient-{scheme.kind.value}", mode, group_names(partition, data.names)
    )


def mc_coalitional_value(
    model: ModelSpec,
    data: Dataset,
    x_star: ArrayLike,
    partition: Partition,
    cw: CoalitionalWeightScheme,
    mode: SamplerMode,
    seed: int = 0,
    replicate: int = 0,
    n_jobs: int = 1,
) -> AttributionVector:
    """Monte Carlo estimate of a coalitional value such as Owen or Banzhaf-Owen."""
    x_star = check_inputs(model, data, x_star)
    _check_partition(partition, model.n)

    def sample(i: int) -> np.ndarray:
        stream = Stream(seed, Task.COALITIONAL, i, replicate)
        return coalitional_samples(model, data, x_star, partition, cw, mode, stream, i)

    estimates = _estimate_all(sample, range(model.n), n_jobs)
    return _result(estimates, x_star, coalitional_kind(cw), mode, data.names)


def mc_two_step(
    model: ModelSpec,
    data: Dataset,
    x_star: ArrayLike,
    partition: Partition,
    mode: SamplerMode,
    seed: int = 0,
    replicate: int = 0,
    centered: bool = False,
    n_jobs: int = 1,
) -> AttributionVector:
    """
    Monte Carlo estimate of the two-step Shapley value.

    Features in singleton groups reuse the quotient Shapley stream of their
    group, see :func:`mc_quotient_value`.
    """
    x_star = check_inputs(model, data, x_star)
    _check_partition(partition, model.n)

    def sample(i: int) -> np.ndarray:
        return two_step_samples(model, data, x_star, partition, mode, seed, replicate, i, centered)

    estimates = _estimate_all(sample, range(model.n), n_jobs)
    return _result(estimates, x_star, "two-step", mode, data.names)


class VarianceBound(NamedTuple):
    """Variance of a single marginal contribution draw and its upper bound."""

    variance: float
    bound: float
    nu: float
    """Sum over all coalitions of the background mean of the squared model output"""

    max_weight: float

    @property
    def holds(self) -> bool:
        return self.variance <= self.bound


def _coalition_outputs(model: ModelSpec, data: Dataset, x_star: np.ndarray) -> np.ndarray:
    """Model outputs ``F[b, r] = f(x*_S, x^(r)_-S)`` for every coalition bitmask ``b``."""
    n = model.n
    if n > VARIANCE_BOUND_LIMIT:
        raise limit_error("variance bound", n, VARIANCE_BOUND_LIMIT)
    masks = bits_to_mask(all_subsets(n), n)[:, np.newaxis, :]
    points = compose_batch(x_star, data.rows[np.newaxis], masks)
    values = model(points)
    finite = jnp.isfinite(values)
    if not bool(jnp.all(finite)):
        row = int(jnp.argmin(finite.ravel())) % len(data)
        raise ModelDomainError("non-finite model value in variance bound", row)
    return np.asarray(values, dtype=np.float64)


def _delta_moments(F: np.ndarray, scheme: WeightScheme, i: int, n: int):
    subsets = all_subsets(n)
    without = subsets[(subsets >> np.uint64(i)) & np.uint64(1) == 0]
    with_i = (without | np.uint64(1 << i)).astype(np.int64)
    delta = F[with_i] - F[without.astype(np.int64)]
    p = scheme.coefficients(i, without, n)[:, np.newaxis] / F.shape[1]
    first = math.fsum((p * delta).ravel().tolist())
    second = math.fsum((p * delta**2).ravel().tolist())
    return first, second


def delta_moments(
    model: ModelSpec,
    data: Dataset,
    x_star: ArrayLike,
    scheme: WeightScheme,
    i: int,
):
    """
    Exact first and second moment of ``Delta_i(S, x)`` under the empirical measure.

    ``S`` follows the weights of ``scheme`` and ``x`` is uniform over the
    background rows. The first moment is the exact linear game value of
    feature ``i``.

    Returns
    -------
    tuple of float
        ``(E[Delta_i], E[Delta_i^2])``
    """
    x_star = check_inputs(model, data, x_star)
    if not 0 <= i < model.n:
        raise ContractError(f"feature {i} is not in 0..{model.n - 1}")
    return _delta_moments(_coalition_outputs(model, data, x_star), scheme, i, model.n)


def variance_bound_check(
    model: ModelSpec,
    data: Dataset,
    x_star: ArrayLike,
    scheme: WeightScheme,
    i: int,
) -> VarianceBound:
    """
    Exact variance of ``Delta_i(S, x)`` under the empirical measure and its bound.

    The second moment, and hence the variance, is bounded by
    ``4 w_max nu`` with ``w_max`` the largest coalition weight and ``nu``
    the sum over all coalitions ``S`` of the background average of
    ``f(x*_S, x_-S)^2``.

    Raises
    ------
    LimitError
        If the model has more than 12 features.
    """
    x_star = check_inputs(model, data, x_star)
    n = model.n
    if not 0 <= i < n:
        raise ContractError(f"feature {i} is not in 0..{n - 1}")
    F = _coalition_outputs(model, data, x_star)
    first, second = _delta_moments(F, scheme, i, n)
    variance = max(second - first**2, 0.0)

    nu = math.fsum(np.mean(F**2, axis=1).tolist())
    w_max = scheme.max_weight(n, i)
    bound = 4 * w_max * nu
    logger.debug("feature %d: Var(Delta) = %g, bound = %g", i, variance, bound)
    return VarianceBound(variance, bound, nu, w_max)
