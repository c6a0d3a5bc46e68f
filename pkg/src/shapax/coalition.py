"""
Coalitions and partitions
=========================

Players are indexed ``0, ..., n-1``. A :class:`Coalition` packs a subset of
players into a single integer bitmask, a :class:`Partition` groups the
players into disjoint, nonempty coalitions.

Example
-------
>>> partition = Partition.from_lists([[0, 1], [2], [3, 4, 5]], 6)
>>> partition.m
3
>>> union_of_groups(partition, Coalition.from_indices([0, 2], 3)).indices()
(0, 1, 3, 4, 5)
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Tuple

import numpy as np

from .constants import MAX_PLAYERS
from .errors import ContractError
from .util import bits_to_mask, mask_to_bits


@dataclass(frozen=True)
class Coalition:
    """
    Subset of the players ``{0, ..., n-1}``.

    Bit ``i`` of ``bits`` is set if and only if player ``i`` is a member.
    """

    bits: int
    """Membership bitmask"""

    n: int
    """Number of players in the ground set"""

    def __post_init__(self):
        if not 0 <= self.n <= MAX_PLAYERS:
            raise ContractError(
                f"coalitions support at most {MAX_PLAYERS} players, got {self.n}"
            )
        if self.bits < 0 or self.bits >> self.n:
            raise ContractError(
                f"bitmask {self.bits:#x} has members outside of {self.n} players"
            )

    @classmethod
    def empty(cls, n: int) -> "Coalition":
        return cls(0, n)

    @classmethod
    def full(cls, n: int) -> "Coalition":
        return cls((1 << n) - 1, n)

    @classmethod
    def from_indices(cls, indices: Iterable[int], n: int) -> "Coalition":
        """
        Create a coalition from member indices.

        Example
        -------
        >>> Coalition.from_indices([0, 2], 3).bits
        5
        """
        bits = 0
        for i in indices:
            if not 0 <= i < n:
                raise ContractError(f"player {i} is not in 0..{n - 1}")
            bits |= 1 << i
        return cls(bits, n)

    @classmethod
    def from_mask(cls, mask: Sequence[bool]) -> "Coalition":
        mask = np.asarray(mask, dtype=bool)
        return cls(int(mask_to_bits(mask)), mask.shape[-1])

    def to_mask(self) -> np.ndarray:
        """Boolean membership mask of length ``n``."""
        return bits_to_mask(np.uint64(self.bits), self.n)

    def indices(self) -> Tuple[int, ...]:
        return tuple(i for i in range(self.n) if self.bits >> i & 1)

    def __contains__(self, i: int) -> bool:
        return 0 <= i < self.n and bool(self.bits >> i & 1)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices())

    def __len__(self) -> int:
        return bin(self.bits).count("1")

    def _check_width(self, other: "Coalition"):
        if other.n != self.n:
            raise ContractError(
                f"coalitions over {self.n} and {other.n} players cannot be combined"
            )

    def union(self, other: "Coalition") -> "Coalition":
        self._check_width(other)
        return Coalition(self.bits | other.bits, self.n)

    def intersection(self, other: "Coalition") -> "Coalition":
        self._check_width(other)
        return Coalition(self.bits & other.bits, self.n)

    def difference(self, other: "Coalition") -> "Coalition":
        self._check_width(other)
        return Coalition(self.bits & ~other.bits, self.n)

    def complement(self) -> "Coalition":
        """Players of the ground set that are not members."""
        return Coalition(~self.bits & ((1 << self.n) - 1), self.n)

    def insert(self, i: int) -> "Coalition":
        if not 0 <= i < self.n:
            raise ContractError(f"player {i} is not in 0..{self.n - 1}")
        return Coalition(self.bits | 1 << i, self.n)

    def remove(self, i: int) -> "Coalition":
        if not 0 <= i < self.n:
            raise ContractError(f"player {i} is not in 0..{self.n - 1}")
        return Coalition(self.bits & ~(1 << i), self.n)

    def __or__(self, other: "Coalition") -> "Coalition":
        return self.union(other)

    def __and__(self, other: "Coalition") -> "Coalition":
        return self.intersection(other)

    def __repr__(self) -> str:
        return f"Coalition({set(self.indices()) or '{}'}, n={self.n})"


@dataclass(frozen=True)
class Partition:
    """
    Ordered partition ``S_1, ..., S_m`` of the players ``{0, ..., n-1}``.
    """

    groups: Tuple[Coalition, ...]
    """Disjoint, nonempty groups covering all players"""

    n: int
    """Number of players"""

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        if not self.groups:
            raise ContractError("a partition needs at least one group")
        seen = 0
        for j, group in enumerate(self.groups):
            if group.n != self.n:
                raise ContractError(
                    f"group {j + 1} is defined over {group.n} players, expected {self.n}"
                )
            if group.bits == 0:
                raise ContractError(f"group {j + 1} is empty")
            if seen & group.bits:
                raise ContractError(f"group {j + 1} overlaps an earlier group")
            seen |= group.bits
        if seen != (1 << self.n) - 1:
            missing = Coalition(~seen & ((1 << self.n) - 1), self.n).indices()
            raise ContractError(f"players {list(missing)} are not covered by any group")

    @classmethod
    def from_lists(
        cls, groups: Sequence[Sequence[int]], n: int, one_based: bool = False
    ) -> "Partition":
        """
        Create a partition from lists of player indices.

        Parameters
        ----------
        groups : list of list of int
            Member indices of every group.
        n : int
            Number of players.
        one_based : bool
            Whether indices are given in 1-based notation.
        """
        offset = 1 if one_based else 0
        return cls(
            tuple(Coalition.from_indices([i - offset for i in g], n) for g in groups),
            n,
        )

    @classmethod
    def from_json(cls, text: str, n: int) -> "Partition":
        """Read a JSON list of 1-based index lists, e.g. ``[[1, 2], [3]]``."""
        try:
            groups = json.loads(text)
        except json.JSONDecodeError as err:
            raise ContractError(f"partition is not valid JSON: {err}") from err
        if not isinstance(groups, list) or not all(
            isinstance(g, list) and all(isinstance(i, int) for i in g) for g in groups
        ):
            raise ContractError("partition must be a JSON list of integer lists")
        return cls.from_lists(groups, n, one_based=True)

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(tuple(Coalition(1 << i, n) for i in range(n)), n)

    @classmethod
    def trivial(cls, n: int) -> "Partition":
        """Partition with the grand coalition as its only group."""
        return cls((Coalition.full(n),), n)

    @property
    def m(self) -> int:
        """Number of groups"""
        return len(self.groups)

    def group_of(self, i: int) -> int:
        """Index of the group containing player ``i``."""
        for j, group in enumerate(self.groups):
            if i in group:
                return j
        raise ContractError(f"player {i} is not in 0..{self.n - 1}")

    def sizes(self) -> Tuple[int, ...]:
        return tuple(len(g) for g in self.groups)

    def membership(self) -> np.ndarray:
        """Boolean ``(m, n)`` matrix, row ``j`` is the mask of group ``j``."""
        return np.stack([g.to_mask() for g in self.groups])

    def group_bits(self) -> np.ndarray:
        """Bitmask of every group as ``uint64`` array of length ``m``."""
        return np.array([g.bits for g in self.groups], dtype=np.uint64)

    def to_lists(self, one_based: bool = False) -> list:
        offset = 1 if one_based else 0
        return [[i + offset for i in g.indices()] for g in self.groups]


def union_of_groups(partition: Partition, A: Coalition) -> Coalition:
    """
    Union ``Q_A`` of the groups selected by a coalition of groups.

    Parameters
    ----------
    partition : Partition
        Partition ``S_1, ..., S_m`` of the players.
    A : Coalition
        Coalition over the ``m`` groups.

    Returns
    -------
    Coalition
        Coalition over the ``n`` players.

    Example
    -------
    >>> partition = Partition.from_lists([[0, 1], [2]], 3)
    >>> union_of_groups(partition, Coalition.full(2)).indices()
    (0, 1, 2)
    """
    if A.n != partition.m:
        raise ContractError(
            f"group coalition has width {A.n}, partition has {partition.m} groups"
        )
    bits = 0
    for j in A:
        bits |= partition.groups[j].bits
    return Coalition(bits, partition.n)


def union_bits(partition: Partition, group_bits: np.ndarray) -> np.ndarray:
    """
    Vectorized :func:`union_of_groups` over an array of group bitmasks.

    Examples
    --------
    >>> partition = Partition.from_lists([[0, 1], [2], [3, 4, 5]], 6)
    >>> union_bits(partition, np.array([0, 1, 4, 7], dtype=np.uint64)).tolist()
    [0, 3, 56, 63]
    """
    selected = bits_to_mask(group_bits, partition.m)
    return np.bitwise_or.reduce(
        np.where(selected, partition.group_bits(), np.uint64(0)), axis=-1
    ).astype(np.uint64)
