"""
Exceptions
==========

All errors raised by the library derive from :class:`ShapaxError`.
"""

from __future__ import annotations

from typing import Optional

import numpy as np


class ShapaxError(Exception):
    """Base class for all library errors."""


class ContractError(ShapaxError, ValueError):
    """A precondition of an operation is violated."""


class DataError(ShapaxError, ValueError):
    """Input data is malformed, empty or not finite."""


class LimitError(ShapaxError, ValueError):
    """An exact enumeration was requested beyond its configured limit."""


class DistributionError(ContractError):
    """Invalid parameters for a probability distribution."""


class InvariantViolation(ShapaxError, AssertionError):
    """A structural invariant checked at run time does not hold."""


class ModelDomainError(ShapaxError, ArithmeticError):
    """
    A model produced a non-finite value.

    Parameters
    ----------
    message : str
        Description of the failing evaluation.
    index : int, optional
        Row index (game evaluations) or draw index (Monte Carlo) of the
        first non-finite output.
    point : ndarray, optional
        Input at which the model was evaluated.
    """

    def __init__(
        self,
        message: str,
        index: Optional[int] = None,
        point: Optional[np.ndarray] = None,
    ):
        if index is not None:
            message = f"{message} (index {index})"
        super().__init__(message)
        self.index = index
        self.point = point


class ExpressionSyntaxError(ShapaxError, ValueError):
    """
    Error while parsing a model expression.

    Example
    -------
    >>> err = ExpressionSyntaxError("unexpected token", "x1 + * 2", 5)
    >>> print(err)
    unexpected token at position 5
      x1 + * 2
           ^
    """

    def __init__(self, message: str, text: str, position: int):
        super().__init__(
            f"{message} at position {position}\n  {text}\n  {' ' * position}^"
        )
        self.text = text
        self.position = position


def limit_error(what: str, size: int, limit: int) -> LimitError:
    """Build the error for an exact enumeration over ``2**size`` coalitions."""
    return LimitError(
        f"exact {what} over {size} players needs 2^{size} = {2**size} game "
        f"evaluations, above the limit of {limit} players; raise the limit "
        "or use Monte Carlo estimation (--mode empirical)"
    )
