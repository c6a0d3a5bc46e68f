"""
This module contains library-wide limits and numerical constants.
"""

MAX_PLAYERS = 64
"""Largest supported player count, coalitions are single-word bitmasks."""

EXACT_LIMIT = 20
"""Default largest player count (n, m or group size) for brute-force oracles."""

TABLE_LIMIT = 20
"""Largest ground set for coalition-keyed weight tables and inverse-CDF sampling."""

VARIANCE_BOUND_LIMIT = 12
"""Largest feature count for the enumerated second-moment bound."""

EXACT_FACTORIAL_LIMIT = 20
"""Factorial ratios are computed with exact integers up to this ground-set size."""

NORMALIZATION_TOL = 1e-12
"""Tolerance for the probability normalization of weight schemes."""

Z_95 = 1.959963984540054
"""Two-sided 95 % quantile of the standard normal distribution."""

CHUNK_POINTS = 2**20
"""Maximum number of composed points handed to a model in a single batch."""
