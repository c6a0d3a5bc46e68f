"""
Weight schemes
==============

A linear game value attributes to player ``i`` the weighted sum of its
marginal contributions, ``h_i = sum_S w_i(S, N) (v(S + i) - v(S))`` over
``S`` in ``N \\ {i}``. Nonnegative weights summing to one over ``S`` turn
``w_i(., N)`` into a probability measure on the coalitions without ``i``,
which is what the Monte Carlo samplers draw from.

Example
-------
>>> weight(WeightScheme.shapley(), 1, 3)
0.16666666666666666
>>> weight(WeightScheme.banzhaf(), 2, 5)
0.0625
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Optional, Tuple, Union

import numpy as np

from .coalition import Coalition, Partition
from .constants import EXACT_FACTORIAL_LIMIT, NORMALIZATION_TOL, TABLE_LIMIT
from .errors import ContractError, LimitError
from .util import all_subsets, popcount


class SchemeKind(enum.Enum):
    SHAPLEY = "shapley"
    BANZHAF = "banzhaf"
    TABLE = "table"


TableKey = Union[int, Tuple[int, int]]


@lru_cache(maxsize=None)
def _shapley_weight(s: int, n: int) -> float:
    if n <= EXACT_FACTORIAL_LIMIT:
        return float(
            Fraction(math.factorial(s) * math.factorial(n - s - 1), math.factorial(n))
        )
    return math.exp(math.lgamma(s + 1) + math.lgamma(n - s) - math.lgamma(n + 1))


@dataclass(frozen=True)
class WeightScheme:
    """
    Coefficient family ``w_i(S, N)`` of a linear game value.

    Shapley and Banzhaf weights depend only on the coalition size and are
    computed on demand. Explicit tables are defined for a single ground
    set size ``n`` and are keyed either by coalition size (same weight for
    every coalition of that size and every player) or by
    ``(player, bitmask)`` pairs.
    """

    kind: SchemeKind

    table: Optional[Mapping[TableKey, float]] = field(default=None, compare=False)
    """Explicit weights, only for ``SchemeKind.TABLE``"""

    n: Optional[int] = None
    """Ground set size of an explicit table"""

    def __post_init__(self):
        if self.kind is SchemeKind.TABLE:
            if self.table is None or self.n is None:
                raise ContractError("an explicit weight table needs entries and n")
            if self.n > TABLE_LIMIT:
                raise LimitError(
                    f"explicit weight tables support at most {TABLE_LIMIT} players"
                )
            object.__setattr__(self, "table", dict(self.table))
            if any(w < 0 for w in self.table.values()):
                raise ContractError("weights must be nonnegative")
            self.check_normalized(self.n)
        elif self.table is not None:
            raise ContractError(f"{self.kind.value} weights take no table")

    @classmethod
    def shapley(cls) -> "WeightScheme":
        return cls(SchemeKind.SHAPLEY)

    @classmethod
    def banzhaf(cls) -> "WeightScheme":
        return cls(SchemeKind.BANZHAF)

    @classmethod
    def from_sizes(cls, n: int, weights: Mapping[int, float]) -> "WeightScheme":
        """
        Explicit table with one weight per coalition size.

        ``weights[s]`` is the weight of every single coalition of size ``s``,
        so normalization requires ``sum_s C(n-1, s) weights[s] = 1``.

        Example
        -------
        >>> scheme = WeightScheme.from_sizes(3, {0: 1/3, 1: 1/6, 2: 1/3})
        >>> weight(scheme, 2, 3)
        0.3333333333333333
        """
        return cls(SchemeKind.TABLE, dict(weights), n)

    @classmethod
    def from_coalitions(
        cls, n: int, weights: Mapping[Tuple[int, int], float]
    ) -> "WeightScheme":
        """Explicit table keyed by ``(player, coalition bitmask)``, absent keys weigh zero."""
        return cls(SchemeKind.TABLE, dict(weights), n)

    @property
    def by_coalition(self) -> bool:
        return self.kind is SchemeKind.TABLE and any(
            isinstance(key, tuple) for key in self.table
        )

    def weight(self, s: int, n: int) -> float:
        """Weight of a single coalition of size ``s`` in a ground set of ``n``."""
        if n < 1 or not 0 <= s <= n - 1:
            raise ContractError(f"coalition size {s} is invalid for {n} players")
        if self.kind is SchemeKind.SHAPLEY:
            return _shapley_weight(s, n)
        if self.kind is SchemeKind.BANZHAF:
            return 2.0 ** -(n - 1)
        self._check_table_size(n)
        if self.by_coalition:
            raise ContractError("weights of this table depend on the coalition, use coefficient")
        return float(self.table.get(s, 0.0))

    def coefficient(self, i: int, S: Coalition) -> float:
        """
        Weight ``w_i(S, N)`` of the coalition ``S`` for player ``i``.
        """
        if i in S:
            raise ContractError(f"player {i} is a member of {S}")
        if self.by_coalition:
            self._check_table_size(S.n)
            return float(self.table.get((i, S.bits), 0.0))
        return self.weight(len(S), S.n)

    def coefficients(self, i: int, bits: np.ndarray, n: int) -> np.ndarray:
        """Vectorized :meth:`coefficient` over coalitions without ``i``."""
        bits = np.asarray(bits, dtype=np.uint64)
        if self.by_coalition:
            self._check_table_size(n)
            return np.array(
                [self.table.get((i, int(b)), 0.0) for b in bits.ravel()], dtype=np.float64
            ).reshape(bits.shape)
        return size_weights(self, n)[popcount(bits)]

    def max_weight(self, n: int, i: int = 0) -> float:
        """
        Largest weight ``max_S w_i(S, N)`` of a single coalition.

        Example
        -------
        >>> WeightScheme.shapley().max_weight(4)
        0.25
        """
        if self.by_coalition:
            self._check_table_size(n)
            return max(
                (w for (j, _), w in self.table.items() if j == i), default=0.0
            )
        return float(np.max(size_weights(self, n)))

    def check_normalized(self, n: int, tol: float = NORMALIZATION_TOL):
        """
        Verify that the weights of every player sum to one.

        Raises
        ------
        ContractError
            If the total weight of some player differs from one by more than ``tol``.
        """
        players = range(n)
        for i in players:
            if self.by_coalition:
                others = [b for b in all_subsets(n) if not int(b) >> i & 1]
                total = math.fsum(self.table.get((i, int(b)), 0.0) for b in others)
            else:
                total = math.fsum(
                    math.comb(n - 1, s) * self.weight(s, n) for s in range(n)
                )
            if abs(total - 1.0) > tol:
                raise ContractError(
                    f"weights of player {i} sum to {total!r} over {n} players, expected 1"
                )
            if not self.by_coalition:
                break

    def _check_table_size(self, n: int):
        if self.kind is SchemeKind.TABLE and n != self.n:
            raise ContractError(
                f"weight table is defined for {self.n} players, requested {n}"
            )


def weight(scheme: WeightScheme, s: int, n: int) -> float:
    """
    Probability weight of a single coalition of size ``s`` among ``n`` players.

    Parameters
    ----------
    scheme : WeightScheme
        Coefficient family.
    s : int
        Coalition size, ``0 <= s <= n - 1``.
    n : int
        Size of the ground set.

    Returns
    -------
    float
        ``s!(n-s-1)!/n!`` for Shapley, ``2^-(n-1)`` for Banzhaf, the stored
        value for explicit tables.
    """
    return scheme.weight(s, n)


def size_weights(scheme: WeightScheme, n: int) -> np.ndarray:
    """Weights of all coalition sizes ``0, ..., n-1`` as array."""
    return np.array([scheme.weight(s, n) for s in range(n)], dtype=np.float64)


@dataclass(frozen=True)
class CoalitionalWeightScheme:
    """
    Two-level coefficients of a coalitional value.

    The outer scheme weighs coalitions of groups ``A`` in ``M \\ {j}``, the
    inner scheme weighs coalitions ``T`` in ``S_j \\ {i}`` within the group
    of player ``i``.
    """

    outer: WeightScheme
    inner: WeightScheme

    @classmethod
    def owen(cls) -> "CoalitionalWeightScheme":
        return cls(WeightScheme.shapley(), WeightScheme.shapley())

    @classmethod
    def banzhaf_owen(cls) -> "CoalitionalWeightScheme":
        return cls(WeightScheme.banzhaf(), WeightScheme.banzhaf())

    def composite(self, partition: Partition, i: int, S: Coalition) -> float:
        """
        Composite coefficient ``W_i(S, N, P)``.

        ``S`` contributes only if it splits into a union ``Q_A`` of whole
        groups other than the group ``S_j`` of ``i`` and a coalition ``T`` of
        ``S_j \\ {i}``, in which case the coefficient is
        ``w_j(A, M) * w_i(T, S_j)``.

        Example
        -------
        >>> partition = Partition.from_lists([[0, 1], [2]], 3)
        >>> cw = CoalitionalWeightScheme.owen()
        >>> cw.composite(partition, 0, Coalition.from_indices([2], 3))
        0.25
        >>> cw.composite(partition, 2, Coalition.from_indices([0], 3))
        0.0
        """
        if i in S:
            raise ContractError(f"player {i} is a member of {S}")
        j = partition.group_of(i)
        group = partition.groups[j]
        members = group.indices()
        local = sum(1 << k for k, p in enumerate(members) if p in S)
        T = Coalition(local, len(members))
        rest = S.difference(group)
        A = 0
        for a, other in enumerate(partition.groups):
            overlap = rest.bits & other.bits
            if overlap == other.bits:
                A |= 1 << a
            elif overlap:
                return 0.0
        return self.outer.coefficient(j, Coalition(A, partition.m)) * self.inner.coefficient(
            members.index(i), T
        )
