"""Fractional integrals and derivatives of sampled data on uniform grids.

Integrals use the product-trapezoidal rule: the piecewise-linear interpolant
of the data is integrated exactly against the power kernel. Caputo
derivatives use the L1 scheme. Right-sided operators are the mirror images
of the left-sided ones, so every operator here is a (lower or upper)
triangular matrix with Toeplitz structure apart from its first column.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "Side",
    "UniformGrid",
    "Series",
    "validate_order",
    "gamma_fn",
    "caputo_weights",
    "frac_integral_matrix",
    "caputo_matrix",
    "power_weight_quadrature",
    "trapezoid_weights",
    "frac_integral",
    "caputo_derivative",
    "rl_derivative_left",
    "singular_quadrature",
]

# beyond this index the L1 increments are evaluated in expm1/log1p form
_STABLE_WEIGHT_INDEX = 10_000


class Side(enum.Enum):
    """Side of a fractional operator."""

    LEFT = "left"
    RIGHT = "right"

    @classmethod
    def parse(cls, side: "Side | str") -> "Side":
        if isinstance(side, cls):
            return side
        try:
            return cls(str(side).lower())
        except ValueError:
            raise ValueError(f"side must be 'left' or 'right', got {side!r}") from None


@dataclass(frozen=True)
class UniformGrid:
    """Uniform grid on ``[0, length]`` with nodes ``i * h`` for ``i = 0..cells``."""

    length: float
    cells: int

    def __post_init__(self):
        if not (math.isfinite(self.length) and self.length > 0):
            raise ValueError(f"grid length must be positive and finite, got {self.length}")
        if int(self.cells) != self.cells or self.cells < 2:
            raise ValueError(f"grid needs at least 3 nodes (cells >= 2), got cells={self.cells}")
        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "cells", int(self.cells))

    @property
    def node_count(self) -> int:
        return self.cells + 1

    @property
    def h(self) -> float:
        return self.length / self.cells

    @property
    def nodes(self) -> np.ndarray:
        x = np.arange(self.node_count, dtype=float) * self.h
        x[-1] = self.length
        return x

    def refine(self, factor: int) -> "UniformGrid":
        return UniformGrid(self.length, self.cells * int(factor))


@dataclass(frozen=True, eq=False)
class Series:
    """Real samples of a function at the nodes of a grid."""

    grid: UniformGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.node_count,):
            raise ValueError(
                f"expected {self.grid.node_count} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("series values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(cls, grid: UniformGrid, fn) -> "Series":
        return cls(grid, np.broadcast_to(fn(grid.nodes), (grid.node_count,)))

    def l2_norm(self) -> float:
        w = trapezoid_weights(self.grid.cells, self.grid.h)
        return float(np.sqrt(np.dot(w, self.values**2)))


def validate_order(value: float, name: str = "order", spatial: bool = False) -> float:
    """Check a fractional order; spatial orders must lie in (1/2, 1)."""
    value = float(value)
    lower = 0.5 if spatial else 0.0
    if not (lower < value < 1.0):
        bound = "(1/2, 1)" if spatial else "(0, 1)"
        raise ValueError(f"{name} must lie in {bound}, got {value}")
    return value


def gamma_fn(x: float) -> float:
    """Gamma function for positive arguments."""
    x = float(x)
    if not x > 0:
        raise ValueError(f"gamma_fn is defined here for x > 0 only, got {x}")
    return math.gamma(x)


def caputo_weights(alpha: float, count: int) -> np.ndarray:
    """L1 weights ``a_j = (j+1)^(1-alpha) - j^(1-alpha)`` for ``j = 0..count-1``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    e = 1.0 - alpha
    j = np.arange(count, dtype=float)
    a = (j + 1.0) ** e - j**e
    big = j > _STABLE_WEIGHT_INDEX
    if np.any(big):
        jb = j[big]
        a[big] = jb**e * np.expm1(e * np.log1p(1.0 / jb))
    return a


def trapezoid_weights(cells: int, h: float) -> np.ndarray:
    w = np.full(cells + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


@lru_cache(maxsize=64)
def _left_integral_matrix(cells: int, h: float, mu: float) -> np.ndarray:
    n = cells + 1
    m = np.arange(n, dtype=float)
    p = mu + 1.0
    k = np.arange(n, dtype=float)
    # c_0 = 1, c_k = (k+1)^p - 2 k^p + (k-1)^p
    c = np.empty(n)
    c[0] = 1.0
    c[1:] = (k[1:] + 1.0) ** p - 2.0 * k[1:] ** p + (k[1:] - 1.0) ** p
    idx = np.arange(n)
    lag = idx[:, None] - idx[None, :]
    mat = np.where(lag >= 0, c[np.clip(lag, 0, None)], 0.0)
    first = np.zeros(n)
    first[1:] = (m[1:] - 1.0) ** p - (m[1:] - 1.0 - mu) * m[1:] ** mu
    mat[:, 0] = first
    mat[0, :] = 0.0
    mat *= h**mu / math.gamma(mu + 2.0)
    mat.flags.writeable = False
    return mat


@lru_cache(maxsize=64)
def _left_caputo_matrix(cells: int, h: float, mu: float) -> np.ndarray:
    n = cells + 1
    a = caputo_weights(mu, n)
    # coefficient of f_{m-i}: a_0 for i = 0, a_i - a_{i-1} for 0 < i < m, -a_{m-1} for i = m
    d = np.empty(n)
    d[0] = a[0]
    d[1:] = a[1:] - a[:-1]
    idx = np.arange(n)
    lag = idx[:, None] - idx[None, :]
    mat = np.where(lag >= 0, d[np.clip(lag, 0, None)], 0.0)
    mat[1:, 0] = -a[: n - 1]
    mat[0, :] = 0.0
    mat *= h ** (-mu) / math.gamma(2.0 - mu)
    mat.flags.writeable = False
    return mat


@lru_cache(maxsize=64)
def _difference_weights(cells: int, mu: float) -> np.ndarray:
    a = caputo_weights(mu, cells)
    idx = np.arange(cells)
    lag = idx[:, None] - idx[None, :]
    w = np.where(lag >= 0, a[np.clip(lag, 0, None)], 0.0)
    w.flags.writeable = False
    return w


def _mirror(mat: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(mat[::-1, ::-1])
    out.flags.writeable = False
    return out


def frac_integral_matrix(grid: UniformGrid, mu: float, side: Side | str = Side.LEFT) -> np.ndarray:
    """Matrix of the product-trapezoidal fractional integral on ``grid``."""
    mu = validate_order(mu, "mu")
    mat = _left_integral_matrix(grid.cells, grid.h, mu)
    return mat if Side.parse(side) is Side.LEFT else _mirror(mat)


def caputo_matrix(grid: UniformGrid, mu: float, side: Side | str = Side.LEFT) -> np.ndarray:
    """Matrix of the L1 Caputo derivative on ``grid``."""
    mu = validate_order(mu, "mu")
    mat = _left_caputo_matrix(grid.cells, grid.h, mu)
    return mat if Side.parse(side) is Side.LEFT else _mirror(mat)


@lru_cache(maxsize=64)
def _power_weights(cells: int, h: float, p: float) -> np.ndarray:
    s = np.arange(cells + 1, dtype=float)
    m0 = (s[1:] ** (p + 1.0) - s[:-1] ** (p + 1.0)) / (p + 1.0)
    m1 = (s[1:] ** (p + 2.0) - s[:-1] ** (p + 2.0)) / (p + 2.0)
    w = np.zeros(cells + 1)
    w[:-1] += s[1:] * m0 - m1
    w[1:] += m1 - s[:-1] * m0
    w *= h ** (p + 1.0)
    w.flags.writeable = False
    return w


def power_weight_quadrature(grid: UniformGrid, p: float) -> np.ndarray:
    """Weights ``w`` with ``w @ f`` equal to the integral of ``x**p * f`` over the grid.

    ``f`` is replaced by its piecewise-linear interpolant, so the rule is exact
    for piecewise-linear data. Requires ``p > -1``.
    """
    if not p > -1.0:
        raise ValueError(f"power weight needs p > -1, got {p}")
    return _power_weights(grid.cells, grid.h, float(p))


def frac_integral(f: Series, mu: float, side: Side | str = Side.LEFT) -> Series:
    """Left or right fractional integral of order ``mu`` at the grid nodes."""
    return Series(f.grid, frac_integral_matrix(f.grid, mu, side) @ f.values)


def caputo_derivative(f: Series, mu: float, side: Side | str = Side.LEFT) -> Series:
    """L1 approximation of the left or right Caputo derivative.

    The left result is zero at node 0 and the right result is zero at the last
    node. Computed from first differences, so constants map to exact zeros.
    """
    mu = validate_order(mu, "mu")
    grid = f.grid
    left = Side.parse(side) is Side.LEFT
    v = f.values if left else f.values[::-1]
    w = _difference_weights(grid.cells, mu)
    out = np.zeros(grid.node_count)
    out[1:] = (w @ np.diff(v)) * (grid.h ** (-mu) / math.gamma(2.0 - mu))
    return Series(grid, out if left else out[::-1])


def rl_derivative_left(f: Series, mu: float) -> Series:
    """Left Riemann-Liouville derivative as ``d/dt`` of ``I^(1-mu) f``."""
    mu = validate_order(mu, "mu")
    g = frac_integral_matrix(f.grid, 1.0 - mu) @ f.values
    return Series(f.grid, np.gradient(g, f.grid.h, edge_order=2))


def singular_quadrature(f: Series, beta: float) -> float:
    """Integral of ``x**(beta-1) * f(x)`` over the grid, exact for piecewise-linear f."""
    return float(power_weight_quadrature(f.grid, beta - 1.0) @ f.values)
