"""Log-determinants, traces, resolvent solves and refinement for DiscreteOperators."""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgWarning, eigvalsh, lu_factor, lu_solve

from .operators import (Classical, DiscreteOperator, build_conjugated_operator,
                        build_interval_operator, default_interval_panels,
                        deformed_kernel_value, fourier_grid, sine_kernel_value)
from .quadrature import DEFAULT_ORDER
from .weights import ProfileSpec, WeightSpec


class DeterminantZeroError(ArithmeticError):
    """I - M is singular to working precision."""


class ConvergenceError(RuntimeError):
    def __init__(self, message, deltas):
        super().__init__(f"{message}; deltas={list(deltas)}")
        self.deltas = list(deltas)


@dataclass(frozen=True)
class DetResult:
    log_det: complex
    det: complex
    trace: complex
    s: float
    y: float | None = None
    converged: bool = False
    est_error: float = float("nan")
    singular: bool = False
    size: int = 0


def _as_real(z, tol=0.0):
    z = complex(z)
    return z.real if abs(z.imag) <= tol else z


def _factor(op: DiscreteOperator):
    if "lu" not in op._cache:
        a = np.eye(op.size, dtype=op.matrix.dtype) - op.matrix
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)
            op._cache["lu"] = lu_factor(a, check_finite=True)
    return op._cache["lu"]


def _is_singular(lu) -> bool:
    d = np.abs(np.diag(lu[0]))
    return bool(np.any(d == 0.0) or d.min() <= 1e-15 * max(d.max(), 1.0) * d.size)


def trace(op: DiscreteOperator):
    return _as_real(np.trace(op.matrix))


def log_det(op: DiscreteOperator, y: float | None = None, method: str = "auto") -> DetResult:
    """log det(I - M); principal branch, real when det > 0.

    ``method="lu"`` sums the logs of the LU pivots.  ``"eigh"`` (the ``"auto"``
    choice for real symmetric M) sums log1p(-mu) over the eigenvalues mu of M,
    which keeps relative accuracy when M is small; the pivots of I - M are all
    close to 1 there and their logs only carry absolute accuracy.
    """
    tr = trace(op)
    if op.size == 0 or not np.any(op.matrix):
        return DetResult(0.0, 1.0, tr, op.s, y, size=op.size)
    m = op.matrix
    if method == "auto":
        method = "eigh" if np.isrealobj(m) and np.array_equal(m, m.T) else "lu"
    if method == "eigh":
        mu = eigvalsh(m)
        if np.any(mu >= 1.0):
            if np.any(mu == 1.0):
                return DetResult(complex(np.nan, np.nan), 0.0, tr, op.s, y, singular=True,
                                 size=op.size)
            ld = complex(np.sum(np.log(np.abs(1.0 - mu))), np.pi * (np.sum(mu > 1.0) % 2))
        else:
            ld = float(np.sum(np.log1p(-mu)))
        sing = bool(np.min(np.abs(1.0 - mu)) <= 1e-15 * mu.size)
        return DetResult(_as_real(ld), _as_real(np.exp(ld)), tr, op.s, y, singular=sing,
                         size=op.size)
    if method != "lu":
        raise ValueError(f"unknown method {method!r}")
    lu, piv = _factor(op)
    d = np.diag(lu)
    if np.any(d == 0.0):
        return DetResult(complex(np.nan, np.nan), 0.0, tr, op.s, y, singular=True, size=op.size)
    swaps = int(np.count_nonzero(piv != np.arange(piv.size)))
    logabs = float(np.sum(np.log(np.abs(d))))
    phase = float(np.sum(np.angle(d))) + np.pi * (swaps % 2)
    phase = float(np.angle(np.exp(1j * phase)))
    ld = logabs if phase == 0.0 else complex(logabs, phase)
    return DetResult(_as_real(ld), _as_real(np.exp(ld)), tr, op.s, y,
                     singular=_is_singular((lu, piv)), size=op.size)


def resolvent_solve(op: DiscreteOperator, rhs):
    """Values at the nodes of (1 - K)^{-1} rhs, with rhs sampled at the nodes.

    The symmetric matrix acts on sqrt(omega)-scaled vectors, so the system solved
    is (I - M)(sqrt(omega) X) = sqrt(omega) rhs.  Columns of a 2-d ``rhs`` are
    solved together.
    """
    rhs = np.asarray(rhs)
    if not np.any(op.matrix):
        return rhs.copy()
    lu = _factor(op)
    if _is_singular(lu):
        raise DeterminantZeroError(f"I - M is singular at s={op.s}")
    sw = np.sqrt(op.grid.weights)
    scale = sw if rhs.ndim == 1 else sw[:, None]
    if np.iscomplexobj(rhs) and not np.iscomplexobj(lu[0]):
        x = lu_solve(lu, scale * rhs.real) + 1j * lu_solve(lu, scale * rhs.imag)
    else:
        x = lu_solve(lu, scale * rhs)
    return x / scale


def refine_until_converged(builder: Callable[[int, int], DiscreteOperator], tol: float = 1e-10,
                           order: int = DEFAULT_ORDER, panels: int = 1, max_levels: int = 8,
                           y: float | None = None) -> DetResult:
    """Double the panel count until |delta log det| < tol on two consecutive levels."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    prev = log_det(builder(order, panels), y)
    deltas: list[float] = []
    hits = 0
    for _ in range(max_levels):
        panels *= 2
        cur = log_det(builder(order, panels), y)
        if cur.singular or prev.singular:
            return replace(cur, converged=False)
        deltas.append(float(abs(cur.log_det - prev.log_det)))
        hits = hits + 1 if deltas[-1] < tol else 0
        if hits >= 2 or (deltas[-1] == 0.0 and not np.any(builder(order, 1).matrix)):
            return replace(cur, converged=True, est_error=deltas[-1])
        prev = cur
    raise ConvergenceError(f"no convergence to {tol} after {max_levels} doublings", deltas)


def interval_determinant(kernel, s: float, order: int = DEFAULT_ORDER, panels: int | None = None,
                         refine: int = 1, y: float | None = None) -> DetResult:
    """Determinant of the interval representation with ``refine`` times the default panels."""
    if panels is None:
        panels = default_interval_panels(kernel, s, order)
    quad = None
    if not isinstance(kernel, Classical) and not kernel.is_zero:
        base = fourier_grid(kernel, s, order)
        quad = base.refined(refine) if refine > 1 else base
    op = build_interval_operator(kernel, s, order, panels * refine, quad=quad)
    return log_det(op, y)


def conjugated_determinant(weight, s: float, order: int = DEFAULT_ORDER, panels: int | None = None,
                           refine: int = 1, y: float | None = None) -> DetResult:
    if panels is None:
        panels = build_conjugated_operator(weight, s, order).grid.panel_count
    return log_det(build_conjugated_operator(weight, s, order, panels * refine), y)


def endpoint_resolvent(kernel, s: float, order: int = DEFAULT_ORDER, panels: int | None = None):
    """2x2 matrix R(a_i, a_j) of the resolvent kernel K(1-K)^{-1} at the endpoints a = (t, -t),
    t = s/2pi, of the interval representation.

    For even convolution kernels d_s log det = -R(t,t)/pi and
    d_s^2 log det = -R(t,-t)^2/pi^2, so p and q need no differencing.
    """
    if panels is None:
        panels = default_interval_panels(kernel, s, order)
    t = s / (2 * np.pi)
    pts = np.array([t, -t])
    if isinstance(kernel, Classical):
        def k(a, b):
            return kernel.ell * sine_kernel_value(a, b)
        op = build_interval_operator(kernel, s, order, panels)
    else:
        if kernel.is_zero:
            return np.zeros((2, 2))
        quad = fourier_grid(kernel, s, order)
        op = build_interval_operator(kernel, s, order, panels, quad=quad)

        def k(a, b):
            return deformed_kernel_value(kernel, a, b, quad)
    x = op.grid.nodes
    X = resolvent_solve(op, k(x[:, None], pts[None, :]))
    return k(pts[:, None], pts[None, :]) + k(pts[:, None], x[None, :]) @ (op.grid.weights[:, None] * X)


def sigma(profile: ProfileSpec, y: float, s: float, order: int = DEFAULT_ORDER) -> complex:
    """sigma_W(y, s) = log Q_W(y, s), via the interval representation."""
    return interval_determinant(profile.weight(y), s, order, y=y).log_det


def unwrap_sweep(results: Sequence[DetResult]) -> list[DetResult]:
    """Make log_det continuous along an ascending-s sweep (jumps above pi removed)."""
    out = []
    offset = 0.0
    prev = 0.0  # log det -> 0 as s -> 0
    for r in results:
        if r.singular:
            out.append(r)
            continue
        im = complex(r.log_det).imag + offset
        jump = im - prev
        if abs(jump) > np.pi:
            k = np.round(jump / (2 * np.pi))
            offset -= 2 * np.pi * k
            im -= 2 * np.pi * k
        prev = im
        ld = complex(complex(r.log_det).real, im)
        out.append(replace(r, log_det=_as_real(ld)))
    return out


def map_ordered(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally on a thread pool; order is preserved."""
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def determinant_sweep(weight: WeightSpec, s_values: Sequence[float], order: int = DEFAULT_ORDER,
                      workers: int = 1, y: float | None = None) -> list[DetResult]:
    s_values = sorted(s_values)
    res = map_ordered(lambda s: interval_determinant(weight, s, order, y=y), s_values, workers)
    return unwrap_sweep(res)
