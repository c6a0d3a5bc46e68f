"""
Typing information
"""

import jax.numpy as jnp
import numpy as np
from typing import Sequence, Union

Array = jnp.ndarray

Key = jnp.ndarray
"""PRNG key as produced by ``jax.random.PRNGKey``."""

ArrayLike = Union[Array, np.ndarray, Sequence[float]]
