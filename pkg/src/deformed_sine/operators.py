"""Pointwise kernels and Nystrom matrices for the two determinant representations.

The interval representation discretizes K_w on [-s/2pi, s/2pi]; the conjugated
representation discretizes sqrt(w_s) K^sin sqrt(w_s) on the line, truncated where
w_s(r) = w(pi r / s) has decayed.  Both give the same Fredholm determinant.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadrature import DEFAULT_ORDER, Grid, gauss_legendre, panels_for
from .weights import WeightSpec, eval_weight, truncation_radius

# conjugated domain is extended this far past s*Lambda/pi
CONJUGATED_MARGIN = 0.10


@dataclass(frozen=True)
class Classical:
    """The thinned sine kernel ell * K^sin."""

    ell: complex = 1.0


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Symmetric Nystrom matrix M_ij = sqrt(omega_i) k(x_i, x_j) sqrt(omega_j)."""

    matrix: np.ndarray
    grid: Grid
    representation: str
    s: float
    weight: WeightSpec | None = None
    ell: complex | None = None
    root_weight: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return self.grid.size


def sine_kernel_value(x, y):
    """sin(pi(x-y)) / (pi(x-y)), with the diagonal handled by a short series."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    small = np.abs(d) < 1e-6
    t = (np.pi * d) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(small, 1.0 - t / 6.0 + t * t / 120.0, np.sin(np.pi * d) / (np.pi * d))
    return out if out.ndim else float(out)


def fourier_grid(weight: WeightSpec, s: float = 1.0, order: int = DEFAULT_ORDER,
                 radius: float | None = None) -> Grid:
    """Half-line grid [0, Lambda] for the Fourier integral defining K_w.

    Panels resolve both the weight's features and the e^{i s u} oscillation
    reached on the interval [-s/2pi, s/2pi].
    """
    lam = truncation_radius(weight) if radius is None else radius
    lam = max(lam, 1e-3)
    max_panel = min(2.0 * weight.feature_scale(), np.pi / max(s, 1e-12), 0.5)
    return gauss_legendre(order, 0.0, lam, panels_for(lam, max_panel * order / DEFAULT_ORDER))


def deformed_kernel_value(w: WeightSpec, x, y, quad: Grid | None = None):
    """K_w(x, y) = int e^{2 pi i (x-y) u} w(u) du, as 2 int_0^Lambda cos(2 pi (x-y) u) w(u) du."""
    if quad is None:
        d = np.max(np.abs(np.asarray(x, float) - np.asarray(y, float)))
        quad = fourier_grid(w, s=max(np.pi * d, 1.0))
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    wu = 2.0 * quad.weights * eval_weight(w, quad.nodes)
    out = np.cos(2.0 * np.pi * d[..., None] * quad.nodes) @ wu
    return out if np.ndim(out) else float(out)


def default_interval_panels(kernel, s: float, order: int = DEFAULT_ORDER) -> int:
    length = s / np.pi
    if isinstance(kernel, Classical):
        return panels_for(length, 2.0 * order / DEFAULT_ORDER)
    lam = max(truncation_radius(kernel), 0.5)
    return panels_for(length, 1.5 / lam * order / DEFAULT_ORDER)


def build_interval_operator(kernel, s: float, order: int = DEFAULT_ORDER,
                            panels: int | None = None, quad: Grid | None = None) -> DiscreteOperator:
    """Nystrom matrix of K_w (or ell K^sin) restricted to [-s/2pi, s/2pi]."""
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    if panels is None:
        panels = default_interval_panels(kernel, s, order)
    half = s / (2.0 * np.pi)
    grid = gauss_legendre(order, -half, half, panels)
    x, sw = grid.nodes, np.sqrt(grid.weights)
    if isinstance(kernel, Classical):
        k = kernel.ell * sine_kernel_value(x[:, None], x[None, :])
        mat = sw[:, None] * k * sw[None, :]
        mat = 0.5 * (mat + mat.T)
        return DiscreteOperator(mat, grid, "classical_thinned", s, ell=kernel.ell)
    if kernel.is_zero:
        return DiscreteOperator(np.zeros((x.size, x.size)), grid, "interval_deformed", s, weight=kernel)
    if quad is None:
        quad = fourier_grid(kernel, s, order)
    # K = C D C^T + S D S^T with D = diag(2 omega_k w(u_k)): cos(a-b) = cos a cos b + sin a sin b
    wu = 2.0 * quad.weights * eval_weight(kernel, quad.nodes)
    phase = 2.0 * np.pi * np.outer(x, quad.nodes)
    C = np.cos(phase) * sw[:, None]
    S = np.sin(phase) * sw[:, None]
    mat = (C * wu) @ C.T + (S * wu) @ S.T
    mat = 0.5 * (mat + mat.T)
    return DiscreteOperator(mat, grid, "interval_deformed", s, weight=kernel)


def conjugated_domain(weight: WeightSpec, s: float) -> float:
    lam = truncation_radius(weight)
    if lam == 0.0:
        return s / (2.0 * np.pi)
    return (1.0 + CONJUGATED_MARGIN) * s * lam / np.pi


def default_conjugated_panels(weight: WeightSpec, s: float, half_width: float,
                              order: int = DEFAULT_ORDER) -> int:
    # zeta-panels: at most 4 long (the sinc oscillates with period 2) and at most
    # two feature lengths of w once mapped back to the u variable
    scale = order / DEFAULT_ORDER
    max_panel = min(4.0, s * 2.0 * weight.feature_scale() / np.pi) * scale
    return panels_for(2.0 * half_width, max_panel)


def root_weight(weight: WeightSpec, s: float, zeta):
    """sqrt(w_s(zeta)) with w_s(r) = w(pi r / s); principal branch, complex if w < 0 anywhere."""
    ws = eval_weight(weight, np.pi * np.asarray(zeta) / s)
    if np.iscomplexobj(ws) or np.any(ws < 0):
        return np.sqrt(ws.astype(complex))
    return np.sqrt(ws)


def build_conjugated_operator(weight: WeightSpec | tuple, s: float, order: int = DEFAULT_ORDER,
                              panels: int | None = None,
                              half_width: float | None = None) -> DiscreteOperator:
    """Nystrom matrix of sqrt(w_s) K^sin sqrt(w_s) on [-X, X].

    ``weight`` may be a WeightSpec or a ``(ProfileSpec, y)`` pair.  ``half_width``
    overrides the default X = 1.1 s Lambda / pi (it is never made smaller).
    """
    if isinstance(weight, tuple):
        profile, y = weight
        weight = profile.weight(y)
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    X = conjugated_domain(weight, s)
    if half_width is not None:
        X = max(X, half_width)
    if panels is None:
        panels = default_conjugated_panels(weight, s, X, order)
    grid = gauss_legendre(order, -X, X, panels)
    z, sw = grid.nodes, np.sqrt(grid.weights)
    r = root_weight(weight, s, z)
    a = sw * r
    mat = a[:, None] * sine_kernel_value(z[:, None], z[None, :]) * a[None, :]
    return DiscreteOperator(mat, grid, "conjugated", s, weight=weight, root_weight=r)
