"""The undeformed benchmark: sigma-form Painleve V for nu(x; ell) = x d_x log det(1 - ell K^sin)
on [-x/2pi, x/2pi], checked against the thinned determinant.

The sigma-form (x nu'')^2 + 4 (x nu' - nu)(x nu' - nu + nu'^2) = 0 is quadratic in
nu'', and its two branches meet wherever the radicand vanishes, which happens at
interior turning points for ell < 1.  Integrating the x-derivative instead,

    x^2 nu''' = -x nu'' - 2x B - 2A (x + 2 nu'),   A = x nu' - nu,  B = A + nu'^2,

(valid where nu'' != 0, obtained by dividing out the common factor 2 nu'') passes
through those points smoothly; the original equation is then checked as a residual.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .fredholm import DetResult, interval_determinant
from .operators import Classical
from .quadrature import DEFAULT_ORDER

SERIES_ORDER = 7
SEED_X = 1e-3


def series_coefficients(ell: complex) -> list:
    """c_1..c_7 of nu = sum c_k x^k, from substituting the series into the sigma-form.

    With a = -ell/pi the x^2 balance gives c_2 = -a^2 (the branch that makes
    nu analytic at 0), and each higher order is linear in the new coefficient.
    """
    a = -ell / np.pi
    return [0.0, a, -a ** 2, a ** 3, -a ** 4 + a ** 2 / 9, a ** 3 * (a ** 2 - 5.0 / 36.0),
            a ** 2 * (-a ** 4 + a ** 2 / 6.0 - 2.0 / 225.0),
            a ** 3 * (2700 * a ** 4 - 525 * a ** 2 + 28) / 2700.0]


def series_seed(ell: complex, x: float, order: int = SERIES_ORDER):
    """nu, nu', nu'' and int_0^x nu/t dt from the truncated series."""
    c = series_coefficients(ell)[: order + 1]
    k = np.arange(len(c))
    nu = sum(c[j] * x ** j for j in k[1:])
    d1 = sum(j * c[j] * x ** (j - 1) for j in k[1:])
    d2 = sum(j * (j - 1) * c[j] * x ** (j - 2) for j in k[2:])
    I = sum(c[j] * x ** j / j for j in k[1:])
    return nu, d1, d2, I


def sigma_pv_residual(x, nu, d1, d2):
    A = x * d1 - nu
    return (x * d2) ** 2 + 4 * A * (A + d1 ** 2)


def _rhs(x, Y):
    nu, d1, d2, _ = Y
    A = x * d1 - nu
    B = A + d1 * d1
    return [d1, d2, (-x * d2 - 2 * x * B - 2 * A * (x + 2 * d1)) / (x * x), nu / x]


@dataclass
class PVSolution:
    ell: complex
    x_grid: np.ndarray
    nu: np.ndarray
    nu_prime: np.ndarray
    nu_second: np.ndarray
    log_F: np.ndarray           # int_0^x nu(t)/t dt
    series_order: int = SERIES_ORDER
    x0: float = SEED_X
    tol: float = 1e-12
    status: str = "ok"
    x_last: float = float("nan")
    branch_signs: list = field(default_factory=list)
    dense: object = field(default=None, repr=False)

    def residual(self) -> np.ndarray:
        return sigma_pv_residual(self.x_grid, self.nu, self.nu_prime, self.nu_second)

    def at(self, x):
        """(nu, nu', nu'', log F) at arbitrary x in the solved range."""
        x = np.asarray(x, dtype=float)
        if self.dense is None:
            z = np.zeros_like(x)
            return z, z, z, z
        if np.any(x > self.x_last + 1e-12) or np.any(x < self.x0 - 1e-15):
            raise ValueError(f"x outside the solved range [{self.x0}, {self.x_last}]")
        return tuple(self.dense(x))


def _sign_sequence(v):
    s = np.sign(np.real(v))
    s = s[s != 0]
    if s.size == 0:
        return []
    keep = np.concatenate([[True], s[1:] != s[:-1]])
    return [int(t) for t in s[keep]]


def solve_sigma_pv(ell: complex, x_max: float, tol: float = 1e-12, x_grid=None,
                   x0: float = SEED_X) -> PVSolution:
    """Integrate from the series seed at x0 to x_max with DOP853 (rtol = tol, atol = tol/100)."""
    if not x_max > 0:
        raise ValueError("x_max must be positive")
    if abs(ell) > 1:
        raise ValueError("|ell| must be <= 1")
    if x_grid is None:
        x_grid = np.linspace(x0, x_max, 400)
    x_grid = np.asarray(x_grid, dtype=float)
    if ell == 0:
        z = np.zeros_like(x_grid)
        return PVSolution(ell, x_grid, z, z, z, z, x0=x0, tol=tol, x_last=x_max)
    y0 = list(series_seed(ell, x0))
    if np.iscomplexobj(np.asarray(y0)) or isinstance(ell, complex):
        y0 = [complex(v) for v in y0]
    sol = solve_ivp(_rhs, (x0, x_max), y0, method="DOP853", rtol=tol, atol=tol * 1e-2,
                    dense_output=True)
    x_last = float(sol.t[-1])
    status = "ok" if sol.status == 0 else f"truncated: {sol.message}"
    xg = x_grid[x_grid <= x_last + 1e-12]
    nu, d1, d2, I = sol.sol(xg)
    if not np.iscomplexobj(np.asarray(ell)):
        nu, d1, d2, I = (np.real(v) for v in (nu, d1, d2, I))
    return PVSolution(ell, xg, nu, d1, d2, I, SERIES_ORDER, x0, tol, status, x_last,
                      _sign_sequence(sol.y[2]), sol.sol)


def thinned_gap_determinant(ell: complex, s: float, order: int = DEFAULT_ORDER) -> DetResult:
    """det(1 - ell K^sin) on [-s/2pi, s/2pi]."""
    return interval_determinant(Classical(ell), s, order)


def _logF(ell, s, order):
    return complex(thinned_gap_determinant(ell, s, order).log_det)


def compare_classical(ell: complex, s_grid, tol: float = 1e-12, order: int = DEFAULT_ORDER,
                      solution: PVSolution | None = None, rel_h: float = 1e-4) -> dict:
    """max over s of |s d_s log F - nu|, |d_s(s d_s log F) - nu'| and |log F - int nu/x|."""
    s_grid = np.asarray(s_grid, dtype=float)
    if solution is None:
        solution = solve_sigma_pv(ell, float(s_grid.max()) * 1.01, tol)
    nu, d1, _, I = solution.at(s_grid)
    rows = []
    for k, s in enumerate(s_grid):
        h = rel_h * s
        h2 = 10 * h
        f0 = _logF(ell, s, order)
        fp, fm = _logF(ell, s + h, order), _logF(ell, s - h, order)
        fp2, fm2 = _logF(ell, s + h2, order), _logF(ell, s - h2, order)
        d_log = (fp - fm) / (2 * h)
        second = (fp2 - fm2) / (2 * h2) + s * (fp2 - 2 * f0 + fm2) / h2 ** 2
        rows.append({"s": float(s), "nu": nu[k], "nu_prime": d1[k], "sdslogF": s * d_log,
                     "residual1": abs(s * d_log - nu[k]), "residual2": abs(second - d1[k]),
                     "log_residual": abs(f0 - I[k])})
    return {
        "rows": rows,
        "max_residual1": max(r["residual1"] for r in rows) if rows else 0.0,
        "max_residual2": max(r["residual2"] for r in rows) if rows else 0.0,
        "max_log_residual": max(r["log_residual"] for r in rows) if rows else 0.0,
        "solution": solution,
    }
