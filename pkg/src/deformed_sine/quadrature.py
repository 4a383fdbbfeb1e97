"""Composite Gauss-Legendre rules, plain and principal-value integration."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

DEFAULT_ORDER = 16


class DomainError(ValueError):
    """Bad integration interval or singular point."""


class QuadratureError(ArithmeticError):
    """The integrand produced a non-finite value."""


@dataclass(frozen=True, eq=False)
class Grid:
    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple[float, float]
    panel_count: int
    order: int

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def a(self) -> float:
        return self.interval[0]

    @property
    def b(self) -> float:
        return self.interval[1]

    def refined(self, factor: int = 2) -> "Grid":
        return gauss_legendre(self.order, self.a, self.b, self.panel_count * factor)


@lru_cache(maxsize=64)
def _reference_rule(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(order: int, a: float, b: float, panels: int = 1) -> Grid:
    """Composite Gauss-Legendre rule with ``panels`` equal panels on [a, b]."""
    if order < 2:
        raise DomainError(f"order must be >= 2, got {order}")
    if panels < 1:
        raise DomainError(f"panels must be >= 1, got {panels}")
    if not a < b:
        raise DomainError(f"need a < b, got [{a}, {b}]")
    x, w = _reference_rule(int(order))
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return Grid(nodes, weights, (float(a), float(b)), int(panels), int(order))


def panels_for(length: float, max_panel: float) -> int:
    """Number of equal panels so that each is no longer than ``max_panel``."""
    return max(1, int(np.ceil(length / max_panel - 1e-12)))


def _check_finite(values, nodes):
    bad = ~np.isfinite(values)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise QuadratureError(f"non-finite integrand value {values[i]} at node u={nodes[i]!r}")


def integrate(f: Callable, grid: Grid):
    """sum_i omega_i f(u_i); ``f`` is called once on the full node array.

    Vector- or matrix-valued integrands are fine as long as the node axis
    comes first.
    """
    values = np.asarray(f(grid.nodes))
    _check_finite(values.reshape(values.shape[0], -1).sum(axis=1), grid.nodes)
    return np.tensordot(grid.weights, values, axes=(0, 0))


def integrate_half_line(f: Callable, radius: float, order: int = DEFAULT_ORDER,
                        max_panel: float = 0.25):
    """Integral of f over [0, inf) truncated at ``radius`` (f must be negligible beyond)."""
    if radius <= 0:
        return 0.0 * np.asarray(f(np.zeros(1)))[0]
    grid = gauss_legendre(order, 0.0, radius, panels_for(radius, max_panel))
    return integrate(f, grid)


def pv_integrate(h: Callable, grid: Grid, c: float, h_nodes=None, h_c=None):
    """Principal value of int_a^b h(u)/(u - c) du by singularity subtraction.

    Computes int (h(u) - h(c))/(u - c) du + h(c) log((b - c)/(c - a)).
    ``h_nodes`` / ``h_c`` may be passed when the values are already known;
    the node axis comes first for array-valued h.
    """
    a, b = grid.interval
    if not a < c < b:
        raise DomainError(f"singular point c={c} must lie strictly inside ({a}, {b})")
    u = grid.nodes
    hu = np.asarray(h(u)) if h_nodes is None else np.asarray(h_nodes)
    hc = np.asarray(h(np.array([c])))[0] if h_c is None else np.asarray(h_c)
    _check_finite(hu.reshape(hu.shape[0], -1).sum(axis=1), u)
    d = u - c
    extra = (slice(None),) + (None,) * (hu.ndim - 1)
    spacing = (b - a) / u.size
    near = np.abs(d) < 1e-9 * spacing
    with np.errstate(divide="ignore", invalid="ignore"):
        q = (hu - hc) / d[extra]
    if np.any(near):
        if h is None:
            raise DomainError(f"c={c} coincides with a node; pass h so h'(c) can be estimated")
        # a node sits on c: the subtracted quotient tends to h'(c)
        step = 1e-5 * spacing
        hp = (np.asarray(h(np.array([c + step])))[0]
              - np.asarray(h(np.array([c - step])))[0]) / (2 * step)
        q[near] = hp
    return np.tensordot(grid.weights, q, axes=(0, 0)) + hc * np.log((b - c) / (c - a))
