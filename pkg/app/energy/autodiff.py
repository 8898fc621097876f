"""
Exact gradient of the discrete Willmore energy through JAX.
"""

from __future__ import annotations

import jax
import jax.numpy as jnp
import numpy as np

from app.energy import kernels

jax.config.update("jax_enable_x64", True)


def _willmore(X, F):
    return kernels.willmore_value(jnp, X, F)


def _area(X, F):
    return kernels.area_value(jnp, X, F)


_willmore_grad = jax.jit(jax.grad(_willmore))
_area_grad = jax.jit(jax.grad(_area))


def willmore_gradient_raw(X: np.ndarray, F: np.ndarray) -> np.ndarray:
    return np.asarray(_willmore_grad(jnp.asarray(X, dtype=jnp.float64), jnp.asarray(F, dtype=jnp.int64)))


def area_gradient_raw(X: np.ndarray, F: np.ndarray) -> np.ndarray:
    return np.asarray(_area_grad(jnp.asarray(X, dtype=jnp.float64), jnp.asarray(F, dtype=jnp.int64)))
