"""The direct map f -> W(r) = -2 int_0^inf f'(-u^2 - r) du and its round trip through the
small-s limit of the determinant."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .fredholm import interval_determinant
from .quadrature import DEFAULT_ORDER, QuadratureError, gauss_legendre, panels_for
from .weights import ProfileSpec

# e^{-x^2} < 1e-21 beyond x^2 = 48
_GAUSS_CUT2 = 48.0


@dataclass(frozen=True)
class GaussianDatum:
    """f(y) = amp * exp(-(y - center)^2)."""

    amp: float = 1.0
    center: float = 0.0

    def f(self, y):
        y = np.asarray(y, dtype=float)
        return self.amp * np.exp(-(y - self.center) ** 2)

    def df(self, y):
        y = np.asarray(y, dtype=float)
        return -2.0 * self.amp * (y - self.center) * np.exp(-(y - self.center) ** 2)

    def d2f(self, y):
        y = np.asarray(y, dtype=float)
        t = y - self.center
        return self.amp * (4.0 * t * t - 2.0) * np.exp(-t * t)

    def scaled(self, factor: float) -> "GaussianDatum":
        return GaussianDatum(self.amp * factor, self.center)

    def u_cutoff(self, r: float) -> float:
        """u beyond which f'(-u^2 - r) and f''(-u^2 - r) are negligible."""
        return float(np.sqrt(max(0.0, -(r + self.center)) + np.sqrt(_GAUSS_CUT2) + 1.0))

    def r_cutoff(self) -> float:
        """r beyond which W(r) is negligible."""
        return float(np.sqrt(_GAUSS_CUT2) - self.center)


def _half_line_rule(datum, r, order):
    ub = datum.u_cutoff(r)
    return gauss_legendre(order, 0.0, ub, panels_for(ub, 0.25))


def W_exact(datum: GaussianDatum, r, order: int = DEFAULT_ORDER):
    """W(r) by truncated Gauss-Legendre quadrature, one rule per r."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty_like(r)
    for i, ri in enumerate(r):
        g = _half_line_rule(datum, ri, order)
        vals = datum.df(-g.nodes ** 2 - ri)
        if not np.all(np.isfinite(vals)):
            raise QuadratureError(f"non-finite f' at r={ri}")
        out[i] = -2.0 * np.dot(g.weights, vals)
    return out


def dW_exact(datum: GaussianDatum, r, order: int = DEFAULT_ORDER):
    """W'(r) = 2 int_0^inf f''(-u^2 - r) du."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty_like(r)
    for i, ri in enumerate(r):
        g = _half_line_rule(datum, ri, order)
        out[i] = 2.0 * np.dot(g.weights, datum.d2f(-g.nodes ** 2 - ri))
    return out


@dataclass(eq=False)
class ScatteringTable:
    """Cubic-spline table of W and W' on [r_min, r_max]; zero beyond r_max."""

    r_nodes: np.ndarray
    W_nodes: np.ndarray
    dW_nodes: np.ndarray
    _W: CubicSpline = field(init=False, repr=False)
    _dW: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        self._W = CubicSpline(self.r_nodes, self.W_nodes, extrapolate=False)
        self._dW = CubicSpline(self.r_nodes, self.dW_nodes, extrapolate=False)

    @property
    def r_min(self) -> float:
        return float(self.r_nodes[0])

    @property
    def r_max(self) -> float:
        return float(self.r_nodes[-1])

    def _eval(self, spline, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < self.r_min - 1e-12):
            raise ValueError(f"r={r.min()} below the table start {self.r_min}")
        out = np.where(r > self.r_max, 0.0, spline(np.clip(r, self.r_min, self.r_max)))
        return out

    def W(self, r):
        return self._eval(self._W, r)

    def dW(self, r):
        return self._eval(self._dW, r)


@dataclass(eq=False)
class ScatteringPair:
    datum: GaussianDatum
    table: ScatteringTable
    profile: ProfileSpec
    roundtrip_error: float | None = None

    @property
    def r_grid(self) -> np.ndarray:
        return self.table.r_nodes


def W_from_f(datum: GaussianDatum, y_max: float = 2.0, step: float = 5e-3,
             order: int = DEFAULT_ORDER) -> ScatteringPair:
    """Tabulate W on [-y_max - 1, r_cut] so every W(lambda^2 - y) with |y| <= y_max is covered."""
    r_min = -abs(y_max) - 1.0
    r_max = max(datum.r_cutoff(), r_min + 1.0)
    n = int(np.ceil((r_max - r_min) / step))
    r = np.linspace(r_min, r_max, n + 1)
    table = ScatteringTable(r, W_exact(datum, r, order), dW_exact(datum, r, order))
    profile = ProfileSpec("scattering_derived", table=table) if datum.amp != 0 else ProfileSpec("none")
    return ScatteringPair(datum, table, profile)


def trace_constant(profile: ProfileSpec, y: float, order: int = DEFAULT_ORDER) -> float:
    """(2/pi) int_0^inf W(lambda^2 - y) d lambda, the small-s slope of -sigma."""
    w = profile.weight(y)
    if w.is_zero:
        return 0.0
    from .weights import truncation_radius
    lam = max(truncation_radius(w), 1e-3)
    g = gauss_legendre(order, 0.0, lam, panels_for(lam, min(0.25, w.feature_scale())))
    return float(2.0 / np.pi * np.dot(g.weights, np.real(w(g.nodes))))


@dataclass
class InitialData:
    y: float
    s: list
    ratios: list
    value: float
    extrapolated: bool


def small_s_initial_data(profile: ProfileSpec, y: float,
                         s_sequence: Sequence[float] = (1e-2, 5e-3, 2.5e-3),
                         order: int = DEFAULT_ORDER) -> InitialData:
    """sigma_W(y, s)/s on a descending s sequence, Richardson-extrapolated to s = 0.

    The error model is a0 + a1 s; the two smallest s are combined.  A
    non-monotone sequence is returned raw (last value, ``extrapolated=False``).
    """
    s_seq = sorted((float(s) for s in s_sequence), reverse=True)
    if min(s_seq) < 1e-3:
        raise ValueError("s below 1e-3 is outside the converged regime")
    w = profile.weight(y)
    g = [np.real(complex(interval_determinant(w, s, order).log_det)) / s for s in s_seq]
    if len(g) < 2:
        return InitialData(y, s_seq, g, g[-1], False)
    d = np.diff(g)
    if len(d) > 1 and np.any(np.sign(d[1:]) * np.sign(d[0]) < 0):
        return InitialData(y, s_seq, g, g[-1], False)
    s1, s2 = s_seq[-2], s_seq[-1]
    val = (s1 * g[-1] - s2 * g[-2]) / (s1 - s2)
    return InitialData(y, s_seq, g, float(val), True)


def polar_identity(datum: GaussianDatum, y: float, order: int = DEFAULT_ORDER) -> float:
    """(4/pi) int_0^inf int_0^inf f'(-u^2 - lam^2 + y) du dlam, which equals f(y)."""
    ub = datum.u_cutoff(-y)
    g = gauss_legendre(order, 0.0, ub, panels_for(ub, 0.25))
    U, L = np.meshgrid(g.nodes, g.nodes, indexing="ij")
    vals = datum.df(-U ** 2 - L ** 2 + y)
    return float(4.0 / np.pi * g.weights @ vals @ g.weights)


def roundtrip_check(datum: GaussianDatum, y_grid=None, s_sequence=(1e-2, 5e-3, 2.5e-3),
                    order: int = DEFAULT_ORDER, pair: ScatteringPair | None = None,
                    pde_check: bool = False) -> dict:
    """sup_y |extrapolated sigma_W(y, s)/s - f(y)|, optionally with a sigma-form PDE study
    on the constructed surface."""
    if y_grid is None:
        y_grid = np.linspace(-2.0, 2.0, 17)
    y_grid = np.asarray(y_grid, dtype=float)
    if pair is None:
        pair = W_from_f(datum, y_max=float(np.max(np.abs(y_grid))) + 0.5)
    rows = []
    for y in y_grid:
        init = small_s_initial_data(pair.profile, y, s_sequence, order)
        fy = float(datum.f(y))
        rows.append({"y": float(y), "f": fy, "reconstructed": init.value,
                     "abs_error": abs(init.value - fy), "extrapolated": init.extrapolated})
    err = max(r["abs_error"] for r in rows)
    pair.roundtrip_error = err
    out = {"sup_error": err, "rows": rows, "pair": pair}
    if pde_check:
        from .pde_lab import convergence_study
        study = convergence_study(pair.profile, y_range=(-1.0, 1.0), s_range=(0.2, 1.0),
                                  h_y=0.1, h_s=0.04, order=order)
        out["pde_orders"] = study["orders"]
        out["pde_max"] = study["max_fine"]
    return out
