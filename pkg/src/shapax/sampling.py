"""
Coalition sampling
==================

Random coalitions ``S`` of ``N \\ {i}`` drawn from the probability measure
given by the weights of a linear game value, and the random streams the
draws come from.

Every estimation task owns a :class:`Stream` identified by the seed, the
kind of task, the feature or group index and a replicate number. Keys are
derived with the counter-based ``threefry`` generator of jax by folding the
identifiers into the seed key, so a task reproduces its draws no matter
which other tasks run or in which order.

Example
-------
>>> key = Stream(7, Task.GAME_VALUE, 0).key()
>>> sample_coalition_permutation(0, 1, key)
Coalition({}, n=1)
>>> masks = permutation_masks(key, 1000, 2, 4)
>>> masks.shape, bool(masks[:, 2].any())
((1000, 4), False)
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from itertools import permutations

import jax
import jax.numpy as jnp
import numpy as np

from .coalition import Coalition
from .constants import TABLE_LIMIT
from .errors import ContractError, LimitError
from .typing import Key
from .util import all_subsets, bits_to_mask
from .weights import SchemeKind, WeightScheme

logger = logging.getLogger(__name__)

_U32 = 2**32


class Task(enum.IntEnum):
    """Kind of estimation task, the first component of a stream id."""

    GAME_VALUE = 0
    """Linear and quotient game values"""

    COALITIONAL = 1
    """Coalitional values such as Owen and Banzhaf-Owen"""

    TWO_STEP = 2
    """Two-step Shapley values of features in groups of two or more"""

    EXPERIMENT = 3
    """Data generation of the convergence experiments"""


@dataclass(frozen=True)
class Stream:
    """
    Identifier of an independent, reproducible random stream.

    Identical ids produce identical keys, distinct ids produce keys of
    statistically independent streams.
    """

    seed: int
    task: Task
    index: int
    """Feature or group index"""

    replicate: int = 0

    def __post_init__(self):
        if not -(2**63) <= self.seed < 2**63:
            raise ContractError(f"seed {self.seed} is not a 64-bit integer")
        for name in ("index", "replicate"):
            value = getattr(self, name)
            if not 0 <= value < _U32:
                raise ContractError(f"stream {name} {value} is outside 0..2^32-1")

    def key(self) -> Key:
        key = jax.random.PRNGKey(self.seed)
        for part in (int(self.task), self.index, self.replicate):
            key = jax.random.fold_in(key, part)
        return key

    def split(self, num: int = 3):
        """Keys for the background rows, the outer and the inner coalition draws."""
        return jax.random.split(self.key(), num)


def fisher_yates(key: Key, batch: int, n: int) -> np.ndarray:
    """
    Uniform random permutations of ``0, ..., n-1`` by Fisher-Yates shuffles.

    Returns
    -------
    ndarray
        ``(batch, n)`` integer array, every row a permutation.
    """
    perm = np.tile(np.arange(n), (batch, 1))
    if n < 2:
        return perm
    # column c swaps position n-1-c with a uniform position in 0..n-1-c
    draws = np.asarray(
        jax.random.randint(key, (batch, n - 1), 0, jnp.arange(n, 1, -1))
    )
    rows = np.arange(batch)
    for c, j in enumerate(range(n - 1, 0, -1)):
        r = draws[:, c]
        top = perm[rows, j].copy()
        perm[rows, j] = perm[rows, r]
        perm[rows, r] = top
    return perm


def predecessors(perm: np.ndarray, i: int) -> np.ndarray:
    """
    Players placed before ``i`` in each permutation, as boolean masks.

    Example
    -------
    >>> predecessors(np.array([[2, 0, 1], [1, 2, 0]]), 0).tolist()
    [[False, False, True], [False, True, True]]
    """
    position = np.argsort(perm, axis=-1)
    return position < position[..., i : i + 1]


def _check_player(i: int, n: int):
    if not 0 <= i < n:
        raise ContractError(f"player {i} is not in 0..{n - 1}")


def permutation_masks(key: Key, batch: int, i: int, n: int) -> np.ndarray:
    """Shapley distributed coalitions of ``N \\ {i}``: predecessors of ``i`` in a random order."""
    _check_player(i, n)
    return predecessors(fisher_yates(key, batch, n), i)


def bernoulli_masks(key: Key, batch: int, i: int, n: int) -> np.ndarray:
    """Banzhaf distributed coalitions of ``N \\ {i}``: every other player joins with probability 1/2."""
    _check_player(i, n)
    masks = np.array(jax.random.bernoulli(key, 0.5, (batch, n)))
    masks[:, i] = False
    return masks


def table_masks(key: Key, batch: int, scheme: WeightScheme, i: int, n: int) -> np.ndarray:
    """
    Coalitions of ``N \\ {i}`` distributed as an explicit weight table.

    Inverse-CDF draw over the enumerated coalitions in bitmask order.
    """
    _check_player(i, n)
    if n > TABLE_LIMIT:
        raise LimitError(f"table sampling enumerates 2^{n - 1} coalitions, limit is {TABLE_LIMIT} players")
    subsets = all_subsets(n)
    without = subsets[(subsets >> np.uint64(i)) & np.uint64(1) == 0]
    cdf = np.cumsum(scheme.coefficients(i, without, n))
    u = np.asarray(jax.random.uniform(key, (batch,), dtype=jnp.float64)) * cdf[-1]
    index = np.minimum(np.searchsorted(cdf, u, side="right"), without.size - 1)
    return bits_to_mask(without[index], n)


def coalition_masks(scheme: WeightScheme, key: Key, batch: int, i: int, n: int) -> np.ndarray:
    """
    Draw ``batch`` coalitions of ``N \\ {i}`` from the measure of a weight scheme.

    Shapley weights use the permutation sampler, Banzhaf weights the
    Bernoulli sampler and explicit tables the inverse-CDF sampler.
    """
    if scheme.kind is SchemeKind.SHAPLEY:
        return permutation_masks(key, batch, i, n)
    if scheme.kind is SchemeKind.BANZHAF:
        return bernoulli_masks(key, batch, i, n)
    return table_masks(key, batch, scheme, i, n)


def sample_coalition_permutation(i: int, n: int, key: Key) -> Coalition:
    """
    Coalition of the players preceding ``i`` in a uniform random permutation.

    The coalition ``S`` is drawn with probability ``|S|!(n-|S|-1)!/n!``.
    """
    return Coalition.from_mask(permutation_masks(key, 1, i, n)[0])


def sample_coalition_bernoulli(i: int, n: int, key: Key) -> Coalition:
    """Coalition including every player other than ``i`` with probability 1/2."""
    return Coalition.from_mask(bernoulli_masks(key, 1, i, n)[0])


def sample_coalition_table(scheme: WeightScheme, i: int, n: int, key: Key) -> Coalition:
    """Coalition drawn from the distribution of an explicit weight table."""
    return Coalition.from_mask(table_masks(key, 1, scheme, i, n)[0])


def permutation_law(i: int, n: int) -> dict:
    """
    Exact law of :func:`predecessors` over all ``n!`` permutations.

    Returns
    -------
    dict
        Maps coalition bitmasks to their probability.

    Example
    -------
    >>> law = permutation_law(0, 2)
    >>> law[0], law[2]
    (0.5, 0.5)
    """
    _check_player(i, n)
    perms = np.array(list(permutations(range(n))))
    bits = predecessors(perms, i) @ (1 << np.arange(n))
    values, counts = np.unique(bits, return_counts=True)
    return {int(b): c / len(perms) for b, c in zip(values, counts)}
