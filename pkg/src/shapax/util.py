"""
Utility functions for working with coalitions stored as bitmasks.

Coalitions are packed into ``uint64`` words, bit ``i`` set if player ``i``
is a member, and unpacked into boolean masks over the players whenever a
model needs to see them.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


def bits_to_mask(bits: np.ndarray, n: int) -> np.ndarray:
    """
    Unpack bitmasks into boolean membership masks.

    Parameters
    ----------
    bits : ndarray
        Coalitions as unsigned integers, any shape.
    n : int
        Number of players.

    Returns
    -------
    ndarray
        Boolean array with an additional trailing axis of length ``n``.

    Examples
    --------
    >>> bits_to_mask(np.array([0, 5], dtype=np.uint64), 3).tolist()
    [[False, False, False], [True, False, True]]
    """
    bits = np.asarray(bits, dtype=np.uint64)
    shift = np.arange(n, dtype=np.uint64)
    return ((bits[..., np.newaxis] >> shift) & np.uint64(1)).astype(bool)


def mask_to_bits(mask: np.ndarray) -> np.ndarray:
    """
    Pack boolean membership masks into bitmasks.

    Examples
    --------
    >>> mask_to_bits(np.array([[True, False, True], [False, True, False]])).tolist()
    [5, 2]
    """
    mask = np.asarray(mask, dtype=bool)
    weights = np.uint64(1) << np.arange(mask.shape[-1], dtype=np.uint64)
    return np.bitwise_or.reduce(
        np.where(mask, weights, np.uint64(0)), axis=-1
    ).astype(np.uint64)


def popcount(bits: np.ndarray) -> np.ndarray:
    """
    Count the members of each coalition.

    Examples
    --------
    >>> popcount(np.array([0, 1, 7, 2**63], dtype=np.uint64)).tolist()
    [0, 1, 3, 1]
    """
    bits = np.ascontiguousarray(bits, dtype=np.uint64)
    octets = bits.reshape(-1, 1).view(np.uint8)
    return np.unpackbits(octets, axis=-1).sum(-1).reshape(bits.shape)


def all_subsets(n: int) -> np.ndarray:
    """Every coalition of ``n`` players in increasing bitmask order."""
    return np.arange(2**n, dtype=np.uint64)


def scatter_bits(local: np.ndarray, members: Sequence[int]) -> np.ndarray:
    """
    Map coalitions over the positions of ``members`` to coalitions over all players.

    Bit ``k`` of a local coalition stands for player ``members[k]``.

    Examples
    --------
    >>> scatter_bits(np.array([0, 1, 2, 3], dtype=np.uint64), [2, 5]).tolist()
    [0, 4, 32, 36]
    """
    members = np.asarray(members, dtype=np.uint64)
    weights = np.uint64(1) << members
    mask = bits_to_mask(local, len(members))
    return np.bitwise_or.reduce(
        np.where(mask, weights, np.uint64(0)), axis=-1
    ).astype(np.uint64)
