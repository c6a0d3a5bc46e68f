"""
Marginal games and exact game values
====================================

The empirical marginal game of a model ``f`` at an observation ``x*`` with
background dataset ``D`` is

    v(S) = 1/|D| sum_{x in D} f(x*_S, x_-S),

the average model output when the features in ``S`` are pinned to ``x*``
and the remaining features are taken from the background rows. The exact
oracles in this module enumerate all coalitions, evaluate every game value
once and combine the memoized values into linear game values, quotient
game values, coalitional values and two-step Shapley values.

Example
-------
>>> from shapax.model import parse_expression
>>> f = parse_expression("x1 + x2", 2)
>>> data = Dataset(np.array([[0.0, 0.0], [2.0, 2.0]]))
>>> x_star = np.array([5.0, 5.0])
>>> empirical_marginal_game(Coalition.from_indices([0], 2), x_star, data, f)
6.0
>>> exact_linear_value(f, data, x_star, WeightScheme.shapley()).values.tolist()
[4.0, 4.0]
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import jax.numpy as jnp
import numpy as np
from joblib import Parallel, delayed

from .coalition import Coalition, Partition, union_bits
from .constants import CHUNK_POINTS, EXACT_LIMIT
from .data import Dataset
from .errors import ContractError, ModelDomainError, limit_error
from .estimate import Estimate
from .model import ModelSpec
from .typing import ArrayLike
from .util import all_subsets, bits_to_mask, scatter_bits
from .weights import CoalitionalWeightScheme, WeightScheme

logger = logging.getLogger(__name__)

EMPIRICAL_GAME = "empirical-marginal"
TRUE_GAME = "marginal"


def compose(x_star: ArrayLike, x: ArrayLike, S: Coalition) -> np.ndarray:
    """
    Point taking coordinate ``i`` from ``x_star`` if ``i`` is in ``S``, else from ``x``.

    Example
    -------
    >>> compose([1.0, 2.0, 3.0], [9.0, 9.0, 9.0], Coalition.from_indices([0, 2], 3)).tolist()
    [1.0, 9.0, 3.0]
    """
    x_star = np.asarray(x_star, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x_star.shape != (S.n,) or x.shape != (S.n,):
        raise ContractError(
            f"points of shapes {x_star.shape} and {x.shape} do not match {S.n} players"
        )
    return np.where(S.to_mask(), x_star, x)


def compose_batch(x_star: ArrayLike, rows: ArrayLike, masks: ArrayLike):
    """Broadcasting :func:`compose` over coalition masks and background rows."""
    return jnp.where(jnp.asarray(masks), jnp.asarray(x_star), jnp.asarray(rows))


def check_point(x_star: ArrayLike, n: int) -> np.ndarray:
    x_star = np.asarray(x_star, dtype=np.float64)
    if x_star.shape != (n,):
        raise ContractError(f"observation must have {n} entries, got shape {x_star.shape}")
    if not np.all(np.isfinite(x_star)):
        raise ContractError("observation has non-finite entries")
    return x_star


def check_inputs(model: ModelSpec, data: Dataset, x_star: ArrayLike) -> np.ndarray:
    if data.n != model.n:
        raise ContractError(f"dataset has {data.n} features, model expects {model.n}")
    return check_point(x_star, model.n)


class MarginalGame:
    """
    Empirical marginal game ``v(S; x*, D, f)`` with memoized values.

    Game values are computed in chunks of at most ``chunk_points`` composed
    points. Chunks are fixed before evaluation and may be processed by
    ``n_jobs`` worker threads, every chunk writes its own slots, so the
    values do not depend on the number of workers.

    Parameters
    ----------
    model : ModelSpec
        Model ``f``.
    data : Dataset
        Background dataset ``D``.
    x_star : array_like
        Observation ``x*`` to explain.
    n_jobs : int
        Number of worker threads.
    """

    def __init__(
        self,
        model: ModelSpec,
        data: Dataset,
        x_star: ArrayLike,
        n_jobs: int = 1,
        chunk_points: int = CHUNK_POINTS,
    ):
        self.model = model
        self.data = data
        self.x_star = check_inputs(model, data, x_star)
        self.n = model.n
        self.n_jobs = n_jobs
        self.chunk = max(1, chunk_points // len(data))
        self._memo: Dict[int, float] = {}
        self._table: Optional[np.ndarray] = None

    def __call__(self, S: Coalition) -> float:
        if S.n != self.n:
            raise ContractError(f"coalition over {S.n} players, game has {self.n}")
        return float(self.values(np.array([S.bits], dtype=np.uint64))[0])

    def values(self, bits: np.ndarray) -> np.ndarray:
        """Game values of an array of coalitions, each distinct coalition is evaluated once."""
        bits = np.asarray(bits, dtype=np.uint64)
        if self._table is not None:
            return self._table[bits.astype(np.int64)]
        flat = bits.ravel()
        missing = np.array(
            sorted({int(b) for b in np.unique(flat)} - self._memo.keys()), dtype=np.uint64
        )
        if missing.size:
            for b, value in zip(missing.tolist(), self.evaluate(missing)):
                self._memo[b] = float(value)
        memo = self._memo
        return np.array([memo[b] for b in flat.tolist()], dtype=np.float64).reshape(bits.shape)

    def table(self) -> np.ndarray:
        """Dense table of all ``2^n`` game values indexed by coalition bitmask."""
        if self._table is None:
            self._table = self.evaluate(all_subsets(self.n))
            self._table.setflags(write=False)
        return self._table

    def evaluate(self, bits: np.ndarray) -> np.ndarray:
        """Game values of the given coalitions without memoization."""
        bits = np.asarray(bits, dtype=np.uint64)
        chunks = [bits[k : k + self.chunk] for k in range(0, bits.size, self.chunk)]
        start = time.perf_counter()
        if self.n_jobs == 1 or len(chunks) == 1:
            parts = [self._evaluate_chunk(chunk) for chunk in chunks]
        else:
            parts = Parallel(n_jobs=self.n_jobs, prefer="threads")(
                delayed(self._evaluate_chunk)(chunk) for chunk in chunks
            )
        logger.debug(
            "evaluated %d coalitions x %d rows in %d chunks (%.3f s)",
            bits.size,
            len(self.data),
            len(chunks),
            time.perf_counter() - start,
        )
        if not parts:
            return np.empty(0, dtype=np.float64)
        return np.concatenate(parts)

    def _evaluate_chunk(self, bits: np.ndarray) -> np.ndarray:
        masks = bits_to_mask(bits, self.n)[:, np.newaxis, :]
        points = compose_batch(self.x_star, self.data.rows[np.newaxis], masks)
        outputs = self.model(points)
        finite = jnp.isfinite(outputs)
        if not bool(jnp.all(finite)):
            flat = int(jnp.argmin(finite.ravel()))
            c, row = divmod(flat, len(self.data))
            raise ModelDomainError(
                f"non-finite model value for coalition {Coalition(int(bits[c]), self.n)}"
                " at background row",
                row,
                np.asarray(points[c, row]),
            )
        return np.asarray(jnp.mean(outputs, axis=-1), dtype=np.float64)


def empirical_marginal_game(
    S: Coalition, x_star: ArrayLike, data: Dataset, model: ModelSpec
) -> float:
    """
    Value of the empirical marginal game at the coalition ``S``.

    Raises
    ------
    ModelDomainError
        If the model is not finite at some composed point, the error
        carries the background row index.
    """
    return MarginalGame(model, data, x_star)(S)


@dataclass(frozen=True)
class AttributionVector:
    """
    Attribution of a model output to features or groups of features.
    """

    values: np.ndarray
    """Attribution per feature or per group"""

    target: np.ndarray
    """Explained observation ``x*``"""

    kind: str
    """Game value computed, e.g. ``shapley`` or ``owen``"""

    mode: str
    """``exact``, ``mc-empirical`` or ``mc-true``"""

    names: Tuple[str, ...]
    """Name of every feature or group"""

    estimates: Optional[Tuple[Estimate, ...]] = None
    """Monte Carlo estimate behind every value"""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if len(self.names) != values.size:
            raise ContractError(f"{len(self.names)} names for {values.size} values")
        if self.estimates is not None and len(self.estimates) != values.size:
            raise ContractError(f"{len(self.estimates)} estimates for {values.size} values")

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, item):
        return self.values[item]

    @property
    def game(self) -> str:
        return TRUE_GAME if self.mode == "mc-true" else EMPIRICAL_GAME

    @property
    def stderr(self) -> np.ndarray:
        if self.estimates is None:
            return np.zeros_like(self.values)
        return np.array([e.stderr for e in self.estimates])

    def to_records(self) -> list:
        """One record per feature or group, indices are 1-based."""
        stderr = self.stderr
        return [
            {
                "index": k + 1,
                "name": self.names[k],
                "value": float(self.values[k]),
                "stderr": float(stderr[k]),
                "kind": self.kind,
                "game": self.game,
            }
            for k in range(self.values.size)
        ]


def group_names(partition: Partition, names: Sequence[str]) -> Tuple[str, ...]:
    return tuple("+".join(names[i] for i in g) for g in partition.groups)


def _check_limit(what: str, size: int, limit: int):
    if size > limit:
        raise limit_error(what, size, limit)


def linear_value_from_table(
    table: np.ndarray, n: int, scheme: WeightScheme, i: int
) -> float:
    """
    Linear game value of player ``i`` from a dense table of game values.

    ``table[b]`` is the value of the coalition with bitmask ``b`` over ``n``
    players.
    """
    subsets = all_subsets(n)
    without = subsets[(subsets >> np.uint64(i)) & np.uint64(1) == 0]
    weights = scheme.coefficients(i, without, n)
    with_i = (without | np.uint64(1 << i)).astype(np.int64)
    diff = table[with_i] - table[without.astype(np.int64)]
    return math.fsum((weights * diff).tolist())


def quotient_table(game: MarginalGame, partition: Partition) -> np.ndarray:
    """Dense table of the quotient game ``v(Q_A)`` over all coalitions of groups."""
    return game.values(union_bits(partition, all_subsets(partition.m)))


def linear_value_of(game: MarginalGame, scheme: WeightScheme, i: int) -> float:
    """Exact linear game value of feature ``i``."""
    return linear_value_from_table(game.table(), game.n, scheme, i)


def quotient_value_of(
    game: MarginalGame, partition: Partition, scheme: WeightScheme, j: int
) -> float:
    """Exact quotient game value of group ``j``."""
    return linear_value_from_table(quotient_table(game, partition), partition.m, scheme, j)


def coalitional_value_of(
    game: MarginalGame, partition: Partition, cw: CoalitionalWeightScheme, i: int
) -> float:
    """
    Exact coalitional value of feature ``i``.

    Sums ``w_j(A, M) w_i(T, S_j) (v(Q_A + T + i) - v(Q_A + T))`` over the
    coalitions of groups ``A`` without the group ``j`` of ``i`` and the
    coalitions ``T`` of ``S_j`` without ``i``.
    """
    j = partition.group_of(i)
    members = partition.groups[j].indices()
    s, k = len(members), members.index(i)

    groups = all_subsets(partition.m)
    outer = groups[(groups >> np.uint64(j)) & np.uint64(1) == 0]
    local = all_subsets(s)
    inner = local[(local >> np.uint64(k)) & np.uint64(1) == 0]

    q = union_bits(partition, outer)[:, np.newaxis]
    t = scatter_bits(inner, members)[np.newaxis, :]
    bit = np.uint64(1 << i)
    diff = game.values(q | t | bit) - game.values(q | t)

    w_outer = cw.outer.coefficients(j, outer, partition.m)
    w_inner = cw.inner.coefficients(k, inner, s)
    terms = w_outer[:, np.newaxis] * w_inner[np.newaxis, :] * diff
    return math.fsum(terms.ravel().tolist())


def two_step_value_of(
    game: MarginalGame, partition: Partition, i: int, centered: bool = False
) -> float:
    """
    Exact two-step Shapley value of feature ``i`` in group ``S_j``,

        phi_i[S_j, v] + (phi_j[M, v^P] - v(S_j)) / |S_j|,

    where ``phi_i[S_j, v]`` is the Shapley value of the game restricted to
    coalitions inside ``S_j``. With ``centered`` the stand-alone worth
    ``v(S_j)`` is replaced by ``v(S_j) - v({})``. Singleton groups receive
    the quotient Shapley value of their group.
    """
    shapley = WeightScheme.shapley()
    j = partition.group_of(i)
    phi_group = quotient_value_of(game, partition, shapley, j)
    members = partition.groups[j].indices()
    s = len(members)
    if s == 1:
        return phi_group
    restricted = game.values(scatter_bits(all_subsets(s), members))
    phi_within = linear_value_from_table(restricted, s, shapley, members.index(i))
    worth = restricted[-1]
    if centered:
        worth = worth - restricted[0]
    return phi_within + (phi_group - worth) / s


def exact_linear_value(
    model: ModelSpec,
    data: Dataset,
    x_star: ArrayLike,
    scheme: WeightScheme,
    limit: int = EXACT_LIMIT,
    n_jobs: int = 1,
) -> AttributionVector:
    """
    Exact linear game value of the empirical marginal game.

    Enumerates all ``2^n`` coalitions, every game value is computed once.

    Parameters
    ----------
    model : ModelSpec
        Model ``f``.
    data : Dataset
        Background dataset.
    x_star : array_like
        Observation to explain.
    scheme : WeightScheme
        Coefficients ``w_i(S, N)``.
    limit : int
        Largest number of features to enumerate.
    n_jobs : int
        Worker threads for the game table.

    Returns
    -------
    AttributionVector
        One value per feature.

    Raises
    ------
    LimitError
        If ``n`` exceeds ``limit``.
    """
    _check_limit("linear game value", model.n, limit)
    game = MarginalGame(model, data, x_star, n_jobs=n_jobs)
    values = [linear_value_of(game, scheme, i) for i in range(model.n)]
    return AttributionVector(
        np.array(values), game.x_star, scheme.kind.value, "exact", data.names
    )


def exact_quotient_value(
    model: ModelSpec,
    data: Dataset,
    x_star: ArrayLike,
    partition: Partition,
    scheme: WeightScheme,
    limit: int = EXACT_LIMIT,
    n_jobs: int = 1,
) -> AttributionVector:
    """
    Exact quotient game value, one value per group of the partition.

    Raises
    ------
    LimitError
        If the number of groups exceeds ``limit``.
    """
    _check_partition(partition, model.n)
    _check_limit("quotient game value", partition.m, limit)
    game = MarginalGame(model, data, x_star, n_jobs=n_jobs)
    table = quotient_table(game, partition)
    values = [
        linear_value_from_table(table, partition.m, scheme, j) for j in range(partition.m)
    ]
    return AttributionVector(
        np.array(values),
        game.x_star,
        f"quotient-{scheme.kind.value}",
        "exact",
        group_names(partition, data.names),
    )


def exact_coalitional_value(
    model: ModelSpec,
    data: Dataset,
    x_star: ArrayLike,
    partition: Partition,
    cw: CoalitionalWeightScheme,
    limit: int = EXACT_LIMIT,
    n_jobs: int = 1,
) -> AttributionVector:
    """
    Exact coalitional value, e.g. Owen or Banzhaf-Owen, one value per feature.

    Raises
    ------
    LimitError
        If the number of groups or the largest group exceeds ``limit``.
    """
    _check_partition(partition, model.n)
    _check_limit("coalitional value (groups)", partition.m, limit)
    _check_limit("coalitional value (group size)", max(partition.sizes()), limit)
    game = MarginalGame(model, data, x_star, n_jobs=n_jobs)
    values = [coalitional_value_of(game, partition, cw, i) for i in range(model.n)]
    return AttributionVector(
        np.array(values), game.x_star, coalitional_kind(cw), "exact", data.names
    )


def exact_two_step(
    model: ModelSpec,
    data: Dataset,
    x_star: ArrayLike,
    partition: Partition,
    centered: bool = False,
    limit: int = EXACT_LIMIT,
    n_jobs: int = 1,
) -> AttributionVector:
    """
    Exact two-step Shapley value, one value per feature.

    Raises
    ------
    LimitError
        If the number of groups or the largest group exceeds ``limit``.
    """
    _check_partition(partition, model.n)
    _check_limit("two-step Shapley value (groups)", partition.m, limit)
    _check_limit("two-step Shapley value (group size)", max(partition.sizes()), limit)
    game = MarginalGame(model, data, x_star, n_jobs=n_jobs)
    values = [two_step_value_of(game, partition, i, centered) for i in range(model.n)]
    return AttributionVector(np.array(values), game.x_star, "two-step", "exact", data.names)


def coalitional_kind(cw: CoalitionalWeightScheme) -> str:
    outer, inner = cw.outer.kind.value, cw.inner.kind.value
    if outer == inner == "shapley":
        return "owen"
    if outer == inner == "banzhaf":
        return "banzhaf-owen"
    return f"coalitional-{outer}-{inner}"


def _check_partition(partition: Partition, n: int):
    if partition.n != n:
        raise ContractError(f"partition covers {partition.n} features, model has {n}")
