"""
Sampling from parametric distributions
======================================

Thin validated layer over the samplers of :mod:`jax.random` used by the
synthetic experiments. Supported kinds and their parameters:

============== ============================================ ==========
kind           parameters                                   event shape
============== ============================================ ==========
``normal``     ``mean``, ``variance``                       scalar
``gamma``      ``shape``, ``scale``                         scalar
``beta``       ``a``, ``b``                                 scalar
``uniform``    ``low``, ``high``                            scalar
``mvnormal``   ``mean`` (d,), ``cov`` (d, d)                ``(d,)``
============== ============================================ ==========

The second parameter of ``normal`` is a variance, ``gamma`` is in the
shape-scale parameterization with mean ``shape * scale``. Parameters of
scalar kinds may be arrays broadcasting against the requested shape.

Example
-------
>>> key = jax.random.PRNGKey(0)
>>> sample_distribution("uniform", {"low": -1.0, "high": 1.0}, key, (3,)).shape
(3,)
>>> sample_distribution("beta", {"a": 0.0, "b": 5.0}, key)
Traceback (most recent call last):
  ...
shapax.errors.DistributionError: beta parameter 'a' must be positive
"""

from __future__ import annotations

import logging
from typing import Mapping, Tuple

import jax
import jax.numpy as jnp
import numpy as np

from .errors import DistributionError
from .typing import Array, Key

logger = logging.getLogger(__name__)

PARAMETERS = {
    "normal": ("mean", "variance"),
    "gamma": ("shape", "scale"),
    "beta": ("a", "b"),
    "uniform": ("low", "high"),
    "mvnormal": ("mean", "cov"),
}


def _params(kind: str, params: Mapping[str, object]):
    if kind not in PARAMETERS:
        raise DistributionError(f"unknown distribution {kind!r}")
    names = PARAMETERS[kind]
    missing = [name for name in names if name not in params]
    if missing:
        raise DistributionError(f"{kind} distribution lacks parameter {missing[0]!r}")
    extra = sorted(set(params) - set(names))
    if extra:
        raise DistributionError(f"{kind} distribution takes no parameter {extra[0]!r}")
    values = [np.asarray(params[name], dtype=np.float64) for name in names]
    for name, value in zip(names, values):
        if not np.all(np.isfinite(value)):
            raise DistributionError(f"{kind} parameter {name!r} must be finite")
    return values


def _positive(kind: str, name: str, value: np.ndarray, strict: bool = True):
    bad = value <= 0 if strict else value < 0
    if np.any(bad):
        relation = "positive" if strict else "nonnegative"
        raise DistributionError(f"{kind} parameter {name!r} must be {relation}")


def cholesky(cov: np.ndarray) -> np.ndarray:
    """
    Lower Cholesky factor of a symmetric positive definite matrix.

    Raises
    ------
    DistributionError
        If ``cov`` is not square, not symmetric or not positive definite.
    """
    cov = np.asarray(cov, dtype=np.float64)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise DistributionError(f"covariance must be a square matrix, got shape {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
        raise DistributionError("covariance is not symmetric")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise DistributionError("covariance is not positive definite") from None


def sample_distribution(
    kind: str,
    params: Mapping[str, object],
    key: Key,
    shape: Tuple[int, ...] = (),
) -> Array:
    """
    Draw samples of a parametric distribution.

    Parameters
    ----------
    kind : str
        One of ``normal``, ``gamma``, ``beta``, ``uniform``, ``mvnormal``.
    params : dict
        Parameters of the distribution, see the module documentation.
    key : Key
        PRNG key.
    shape : tuple of int
        Batch shape, multivariate draws append the event dimension.

    Returns
    -------
    Array
        Samples in float64.

    Raises
    ------
    DistributionError
        On unknown kinds, missing or invalid parameters and covariance
        matrices which are not symmetric positive definite.
    """
    values = _params(kind, params)
    shape = tuple(shape)
    dtype = jnp.float64

    if kind == "normal":
        mean, variance = values
        _positive(kind, "variance", variance, strict=False)
        z = jax.random.normal(key, shape, dtype)
        return mean + jnp.sqrt(variance) * z

    if kind == "gamma":
        shape_k, scale = values
        _positive(kind, "shape", shape_k)
        _positive(kind, "scale", scale, strict=False)
        a = jnp.broadcast_to(shape_k, shape)
        return jax.random.gamma(key, a, shape, dtype) * scale

    if kind == "beta":
        a, b = values
        _positive(kind, "a", a)
        _positive(kind, "b", b)
        return jax.random.beta(key, a, b, shape, dtype)

    if kind == "uniform":
        low, high = values
        if np.any(high <= low):
            raise DistributionError("uniform parameter 'high' must exceed 'low'")
        return jax.random.uniform(key, shape, dtype, low, high)

    mean, cov = values
    if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
        raise DistributionError(
            f"mean of shape {mean.shape} does not match covariance of shape {cov.shape}"
        )
    L = cholesky(cov)
    z = jax.random.normal(key, shape + (mean.size,), dtype)
    return jnp.asarray(mean) + z @ jnp.asarray(L).T
