"""
Shapley-type attributions for Jax
=================================

Exact and Monte Carlo estimation of linear game values, quotient game
values, coalitional values and two-step Shapley values for the
empirical marginal game of a model.
"""

import jax

# attributions are checked to 1e-12, single precision is not enough
jax.config.update("jax_enable_x64", True)

__version__ = "0.1.0"
