"""Polynomial feature maps with analytic Jacobians.

A basis is an ordered list of monomial exponent vectors, e.g.
``[[2, 0], [1, 1], [0, 2]]`` for ``[x1^2, x1*x2, x2^2]``.  Exponent lists
(rather than closures) keep bases serializable and make the Jacobian exact.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


class BasisSet:
    """Ordered monomial feature map phi(x) and its Jacobian."""

    def __init__(self, n: int, exponents):
        expo = np.asarray(exponents, dtype=np.int64)
        if expo.ndim != 2 or expo.shape[1] != n:
            raise ConfigError(f"basis exponent vectors must have length n={n}")
        if np.any(expo < 0):
            raise ConfigError("basis exponents must be non-negative integers")
        if np.any(expo.sum(axis=1) < 1):
            raise ConfigError("every basis monomial must have total degree >= 1")
        seen = {tuple(row) for row in expo.tolist()}
        if len(seen) != expo.shape[0]:
            raise ConfigError("duplicate exponent vectors in basis")
        self.n = n
        self.exponents = expo

    @property
    def size(self) -> int:
        return self.exponents.shape[0]

    def eval(self, x) -> np.ndarray:
        """Feature vector: component i is prod_j x_j**e_ij."""
        x = np.asarray(x, dtype=float)
        return np.prod(x[None, :] ** self.exponents, axis=1)

    def jacobian(self, x) -> np.ndarray:
        """Analytic gradient of each monomial, one row per term (size x n)."""
        x = np.asarray(x, dtype=float)
        expo = self.exponents
        powers = x[None, :] ** expo  # (N, n)
        jac = np.empty((self.size, self.n))
        for j in range(self.n):
            e_j = expo[:, j]
            # d/dx_j of x_j^e is e * x_j^(e-1); zero for e == 0
            dcol = np.where(e_j > 0, e_j * x[j] ** np.maximum(e_j - 1, 0), 0.0)
            others = powers.copy()
            others[:, j] = 1.0
            jac[:, j] = dcol * np.prod(others, axis=1)
        return jac

    def to_list(self):
        return self.exponents.tolist()

    def __eq__(self, other):
        return (
            isinstance(other, BasisSet)
            and self.n == other.n
            and np.array_equal(self.exponents, other.exponents)
        )

    def __repr__(self):
        return f"BasisSet(n={self.n}, terms={self.to_list()})"
