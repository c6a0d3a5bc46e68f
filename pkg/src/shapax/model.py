"""
Models
======

A model maps points of ``R^n`` to reals. Models are evaluated on batches
of points, any array with trailing axis ``n``, and are pure: the same
input always produces bit-identical output.

Example
-------
>>> f = parse_expression("sqrt(6) / (1 + exp(0-3*(x1-5)))", 1)
>>> round(evaluate(f, [5.0]), 5)
1.22474
>>> evaluate(LinearLogistic(1.0, [0.0, 0.0], 0.0), [3.0, -1.0])
0.5
"""

from __future__ import annotations

import json
import logging
import os
from typing import Callable, FrozenSet, Sequence, Union

import jax
import jax.numpy as jnp
import numpy as np

from . import parser
from .errors import ContractError, ModelDomainError
from .typing import Array, ArrayLike

logger = logging.getLogger(__name__)


_functions = {
    "exp": jnp.exp,
    "sin": jnp.sin,
    "cos": jnp.cos,
    "sqrt": jnp.sqrt,
    "abs": jnp.abs,
    "log": jnp.log,
}

_operators = {
    "+": jnp.add,
    "-": jnp.subtract,
    "*": jnp.multiply,
    "/": jnp.divide,
    # nan for a negative base with non-integer exponent
    "^": jnp.power,
}


def _compile(node: parser.Node) -> Callable[[Array], Array]:
    if isinstance(node, parser.Number):
        value = node.value
        return lambda x: jnp.full(x.shape[:-1], value, dtype=x.dtype)
    if isinstance(node, parser.Constant):
        value = parser.CONSTANTS[node.name]
        return lambda x: jnp.full(x.shape[:-1], value, dtype=x.dtype)
    if isinstance(node, parser.Variable):
        k = node.index
        return lambda x: x[..., k]
    if isinstance(node, parser.Negate):
        operand = _compile(node.operand)
        return lambda x: -operand(x)
    if isinstance(node, parser.BinaryOp):
        op = _operators[node.op]
        left, right = _compile(node.left), _compile(node.right)
        return lambda x: op(left(x), right(x))
    if isinstance(node, parser.Call):
        fn = _functions[node.name]
        argument = _compile(node.argument)
        return lambda x: fn(argument(x))
    raise TypeError(f"not an expression node: {node!r}")


class ModelSpec:
    """
    Base class of evaluatable models ``f : R^n -> R``.
    """

    n: int
    """Number of features"""

    def __call__(self, x: ArrayLike) -> Array:
        """
        Evaluate the model on a batch of points.

        Non-finite outputs are returned as they are, use :func:`evaluate`
        or :func:`evaluate_batch` for checked evaluation.
        """
        x = jnp.asarray(x, dtype=jnp.float64)
        if x.shape[-1] != self.n:
            raise ContractError(f"model expects {self.n} features, got {x.shape[-1]}")
        return self._fn(x)

    def features(self) -> FrozenSet[int]:
        """Indices of the features the model reads."""
        return frozenset(range(self.n))

    def to_config(self) -> dict:
        raise NotImplementedError


class Expression(ModelSpec):
    """
    Model given by a parsed arithmetic expression.
    """

    tree: parser.Node
    """Syntax tree"""

    __slots__ = ["n", "tree", "_fn"]

    def __init__(self, tree: parser.Node, n: int):
        if n < 1:
            raise ContractError(f"a model needs at least one feature, got {n}")
        unknown = [k for k in parser.variables(tree) if k >= n]
        if unknown:
            raise ContractError(f"expression reads x{max(unknown) + 1} beyond {n} features")
        self.n = n
        self.tree = tree
        self._fn = jax.jit(_compile(tree))

    @property
    def source(self) -> str:
        return parser.to_source(self.tree)

    def features(self) -> FrozenSet[int]:
        return parser.variables(self.tree)

    def to_config(self) -> dict:
        return {"n": self.n, "kind": "expression", "expression": self.source}

    def __repr__(self) -> str:
        return f"Expression({self.source!r}, n={self.n})"


class LinearLogistic(ModelSpec):
    """
    Scaled logistic function of an affine score,
    ``scale / (1 + exp(-(coeffs . x + intercept)))``.
    """

    __slots__ = ["n", "scale", "coeffs", "intercept", "_fn"]

    def __init__(self, scale: float, coeffs: Sequence[float], intercept: float):
        coeffs = np.array(coeffs, dtype=np.float64).ravel()
        if coeffs.size < 1:
            raise ContractError("a logistic model needs at least one coefficient")
        values = np.concatenate([coeffs, [scale, intercept]])
        if not np.all(np.isfinite(values)):
            raise ContractError("logistic model parameters must be finite")
        self.n = int(coeffs.size)
        self.scale = float(scale)
        self.coeffs = coeffs
        self.intercept = float(intercept)

        w = jnp.asarray(coeffs)
        b, s = self.intercept, self.scale
        self._fn = jax.jit(lambda x: s / (1 + jnp.exp(-(x @ w + b))))

    def features(self) -> FrozenSet[int]:
        return frozenset(int(k) for k in np.flatnonzero(self.coeffs))

    def to_config(self) -> dict:
        return {
            "n": self.n,
            "kind": "logistic",
            "scale": self.scale,
            "coeffs": self.coeffs.tolist(),
            "intercept": self.intercept,
        }

    def __repr__(self) -> str:
        return f"LinearLogistic(scale={self.scale}, coeffs={self.coeffs.tolist()}, intercept={self.intercept})"


def parse_expression(text: str, n: int) -> Expression:
    """
    Parse an expression over the features ``x1, ..., xn`` into a model.

    Parameters
    ----------
    text : str
        Expression source, see :mod:`shapax.parser` for the grammar.
    n : int
        Number of features.

    Returns
    -------
    Expression
        Evaluatable model.

    Example
    -------
    >>> float(parse_expression("x1 + 2*x2", 2)([1.0, 3.0]))
    7.0
    """
    return Expression(parser.parse(text, n), n)


def evaluate(model: ModelSpec, x: ArrayLike) -> float:
    """
    Evaluate a model at a single point.

    Raises
    ------
    ModelDomainError
        If the model value is not finite.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n,):
        raise ContractError(f"expected a point with {model.n} entries, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ContractError("point has non-finite entries")
    value = float(model(x))
    if not np.isfinite(value):
        raise ModelDomainError(f"model value {value} is not finite", point=x)
    return value


def evaluate_batch(model: ModelSpec, points: ArrayLike, what: str = "evaluation") -> Array:
    """
    Evaluate a model on points of shape ``(..., n)`` and require finite output.

    The index reported on failure is the flat index of the first offending
    point along the leading axes.
    """
    values = model(points)
    finite = jnp.isfinite(values)
    if not bool(jnp.all(finite)):
        index = int(jnp.argmin(finite.ravel()))
        point = np.asarray(points).reshape(-1, model.n)[index]
        raise ModelDomainError(f"non-finite model value in {what}", index, point)
    return values


def model_from_config(config: dict) -> ModelSpec:
    """
    Build a model from its configuration.

    The configuration holds ``n`` and ``kind``, plus ``expression`` for
    expression models or ``scale``, ``coeffs`` and ``intercept`` for
    logistic models.
    """
    try:
        n = int(config["n"])
        kind = config["kind"]
        if kind == "expression":
            return parse_expression(config["expression"], n)
        if kind == "logistic":
            model = LinearLogistic(
                config.get("scale", 1.0), config["coeffs"], config.get("intercept", 0.0)
            )
            if model.n != n:
                raise ContractError(f"{model.n} coefficients given for {n} features")
            return model
    except KeyError as err:
        raise ContractError(f"model configuration lacks {err}") from None
    raise ContractError(f"unknown model kind {kind!r}")


def load_model(path: Union[str, os.PathLike]) -> ModelSpec:
    """Read a model configuration from a JSON file."""
    with open(path, encoding="utf-8") as fd:
        try:
            config = json.load(fd)
        except json.JSONDecodeError as err:
            raise ContractError(f"{os.fspath(path)}: invalid JSON: {err}") from None
    model = model_from_config(config)
    logger.debug("loaded %r from %s", model, path)
    return model
