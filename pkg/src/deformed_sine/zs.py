"""Resolvent fields of the integrable operator, the boundary values Y+, U+ and the
Zakharov-Shabat data phi, psi, U1, with residual checks of the identities they obey.

Everything lives on the zeta-grid of the conjugated operator; a lambda-grid point
maps to zeta = s lambda / pi.  Off-node values of F, G come from Nystrom
interpolation, so no extra solves are needed for arbitrary lambda.

Normalization: the s-log-derivative of the determinant equals -2i [U1]_11, so we
set p = i alpha = 2i [U1]_11 and q = i gamma = 2i [U1]_21.  With these, the Lax
matrix in y is L = i s sigma_3 + 2 d_y U1 and all PDE identities hold with
unit prefactors (see ``pde_lab.calibrate_constants``).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .fredholm import DeterminantZeroError, interval_determinant, map_ordered, resolvent_solve
from .operators import DiscreteOperator, build_conjugated_operator, root_weight, sine_kernel_value
from .quadrature import DEFAULT_ORDER, Grid, gauss_legendre, panels_for, pv_integrate
from .weights import ConfigurationError, ProfileSpec, WeightSpec, eval_weight, \
    eval_weight_derivative, truncation_radius

# lambda-grid extends this far past the support of w'
LAMBDA_MARGIN = 2.0
CALIBRATION_TOL = 1e-6


class ConventionError(RuntimeError):
    """No sign convention satisfies the calibration identity."""


@dataclass(frozen=True)
class Convention:
    orientation: int = 1   # Y = I - orientation * int F g^T / (u - zeta) du
    half_residue: int = 1  # Y_pm = I - orientation * (PV +- half_residue * i pi F g^T)
    residual: float = 0.0


@dataclass(eq=False)
class ZSFieldSet:
    lambda_grid: Grid
    s: float
    weight: WeightSpec
    op: DiscreteOperator
    zeta: np.ndarray
    f_vec: np.ndarray           # (n, 2) at the lambda-grid points
    g_vec: np.ndarray
    F_vec: np.ndarray
    G_vec: np.ndarray
    F_nodes: np.ndarray         # (m, 2) on the operator grid
    G_nodes: np.ndarray
    Yplus: np.ndarray | None = None   # (n, 2, 2)
    Yminus: np.ndarray | None = None
    Uplus: np.ndarray | None = None
    Uminus: np.ndarray | None = None
    phi: np.ndarray | None = None
    psi: np.ndarray | None = None
    convention: Convention | None = None
    extra: dict = field(default_factory=dict)

    @property
    def lam(self) -> np.ndarray:
        return self.lambda_grid.nodes


@dataclass(frozen=True)
class U1Coefficients:
    U1: np.ndarray
    p: complex
    q: complex
    beta: complex
    gamma: complex
    alpha_rh: complex
    sign: int = 1
    dlogF: complex | None = None     # finite-difference d/ds log F used for calibration
    ratio: complex | None = None     # dlogF / (i [U1]_11), expected -2


@dataclass(frozen=True)
class LaxPair:
    beta: complex
    gamma: complex
    s: float
    dyp: complex
    dyq: complex

    def M_of(self, lam):
        lam = np.asarray(lam)
        out = np.empty(lam.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = 1j * lam
        out[..., 0, 1] = -1j * self.beta
        out[..., 1, 0] = 1j * self.gamma
        out[..., 1, 1] = -1j * lam
        return out

    @property
    def L(self) -> np.ndarray:
        a = 1j * self.s - 1j * self.dyp
        return np.array([[a, 1j * self.dyq], [-1j * self.dyq, -a]])


def _resolve(weight) -> WeightSpec:
    if isinstance(weight, tuple):
        profile, y = weight
        return profile.weight(y)
    return weight


def default_lambda_grid(weight: WeightSpec, order: int = DEFAULT_ORDER,
                        max_panel: float | None = None) -> Grid:
    """[-L, L] with L = (truncation radius of w') + 2."""
    weight = _resolve(weight)
    lam = (0.0 if weight.is_zero else truncation_radius(weight, derivative=True)) + LAMBDA_MARGIN
    if max_panel is None:
        max_panel = min(0.5, 2.0 * weight.feature_scale())
    return gauss_legendre(order, -lam, lam, panels_for(2 * lam, max_panel))


def _fg(r, zeta):
    e = np.exp(1j * np.pi * zeta)
    f = (r / (2j * np.pi))[:, None] * np.stack([e, 1.0 / e], axis=1)
    g = r[:, None] * np.stack([1.0 / e, -e], axis=1)
    return f, g


def _interpolate(op: DiscreteOperator, values, points, rhs_at_points):
    """Nystrom interpolation: X(c) = rhs(c) + sum_j k(c, z_j) omega_j X_j."""
    z, om = op.grid.nodes, op.grid.weights
    rc = root_weight(op.weight, op.s, points)
    k = rc[:, None] * sine_kernel_value(points[:, None], z[None, :]) * op.root_weight[None, :]
    return rhs_at_points + k @ (om[:, None] * values)


def assemble_fields(weight, s: float, lambda_grid: Grid | None = None,
                    order: int = DEFAULT_ORDER, panels: int | None = None,
                    lam_points=None) -> ZSFieldSet:
    """f, g exactly and F = (1-K)^{-1} f, G = (1-K^T)^{-1} g on the operator grid.

    ``lam_points`` overrides the lambda-grid nodes (used for shifted stencils);
    the grid's weights are then meaningless.
    """
    w = _resolve(weight)
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(w, order)
    lam = lambda_grid.nodes if lam_points is None else np.asarray(lam_points, dtype=float)
    lam_max = max(np.max(np.abs(lam)), lambda_grid.b, -lambda_grid.a)
    # operator domain must contain the zeta-image of every lambda point strictly inside
    op = build_conjugated_operator(w, s, order, panels, half_width=1.02 * s * lam_max / np.pi)
    z = op.grid.nodes
    f_n, g_n = _fg(op.root_weight, z)
    try:
        F_n = resolvent_solve(op, f_n)
        G_n = resolvent_solve(op, g_n)
    except DeterminantZeroError as exc:
        raise DeterminantZeroError(f"fields unavailable at s={s}: {exc}") from exc
    zeta = s * lam / np.pi
    f, g = _fg(root_weight(w, s, zeta), zeta)
    F = _interpolate(op, F_n, zeta, f)
    G = _interpolate(op, G_n, zeta, g)
    if lam_points is not None:
        lambda_grid = Grid(lam, np.zeros_like(lam), lambda_grid.interval, 1, lam.size)
    return ZSFieldSet(lambda_grid, s, w, op, zeta, f, g, F, G, F_n, G_n)


def _cauchy_parts(fields: ZSFieldSet):
    """PV int F g^T/(u - zeta) du and F(zeta) g(zeta)^T at each lambda point."""
    op = fields.op
    z = op.grid.nodes
    _, g_n = _fg(op.root_weight, z)
    H = np.einsum("ki,kj->kij", fields.F_nodes, g_n)
    hc = np.einsum("ki,kj->kij", fields.F_vec, fields.g_vec)
    pv = np.empty_like(hc)
    for i, c in enumerate(fields.zeta):
        pv[i] = pv_integrate(None, op.grid, c, h_nodes=H, h_c=hc[i])
    return pv, hc


def _boundary_values(pv, hc, conv: Convention):
    eye = np.eye(2)[None]
    o, t = conv.orientation, conv.half_residue
    yp = eye - o * (pv + t * 1j * np.pi * hc)
    ym = eye - o * (pv - t * 1j * np.pi * hc)
    return yp, ym


def _phase_matrices(lam, s):
    e = np.exp(1j * s * lam)
    Pp = np.zeros(lam.shape + (2, 2), dtype=complex)
    Pm = np.zeros_like(Pp)
    Pp[:, 0, 0], Pp[:, 0, 1], Pp[:, 1, 0] = e, e, 1 / e
    Pm[:, 0, 0], Pm[:, 1, 0], Pm[:, 1, 1] = e, 1 / e, -1 / e
    return Pp, Pm


def _calibration_nodes(fields: ZSFieldSet, count: int = 3):
    lam = fields.lam
    scale = max(truncation_radius(fields.weight), 0.5) if not fields.weight.is_zero else 1.0
    targets = np.array([0.0, 0.37, -0.61]) * scale
    return np.unique([int(np.argmin(np.abs(lam - t))) for t in targets[:count]])


def reconstruct_Yplus(fields: ZSFieldSet, convention: Convention | None = None) -> ZSFieldSet:
    """Y+ and Y- from the Cauchy integral of F g^T (principal value plus half residue).

    The orientation sign is fixed by F = Y+ f; that identity is blind to the
    half-residue sign (g^T f = 0), which is fixed by the jump of U instead:
    (U-^{-1} U+)_12 = 1 - w.  Both are calibrated on three nodes and then
    checked everywhere.
    """
    pv, hc = _cauchy_parts(fields)
    w_lam = eval_weight(fields.weight, fields.lam)
    Pp, Pm = _phase_matrices(fields.lam, fields.s)
    idx = _calibration_nodes(fields)

    def score(conv):
        yp, ym = _boundary_values(pv[idx], hc[idx], conv)
        r1 = np.abs(np.einsum("kij,kj->ki", yp, fields.f_vec[idx]) - fields.F_vec[idx]).max()
        up, um = yp @ Pp[idx], ym @ Pm[idx]
        jump = np.linalg.solve(um, up)
        r2 = np.abs(jump[:, 0, 1] - (1.0 - w_lam[idx])).max()
        return max(r1, r2)

    if convention is None:
        trials = [Convention(o, t) for o in (1, -1) for t in (1, -1)]
        scores = [score(c) for c in trials]
        best = int(np.argmin(scores))
        if scores[best] > CALIBRATION_TOL:
            raise ConventionError(f"no Cauchy convention fits: residuals {dict(zip(trials, scores))}")
        convention = replace(trials[best], residual=float(scores[best]))
    yp, ym = _boundary_values(pv, hc, convention)
    return replace(fields, Yplus=yp, Yminus=ym, convention=convention)


def compute_phi_psi(fields: ZSFieldSet) -> ZSFieldSet:
    """U+- = Y+-(s lambda/pi) times the explicit phase matrices; phi, psi = first column of U+."""
    if fields.Yplus is None:
        fields = reconstruct_Yplus(fields)
    Pp, Pm = _phase_matrices(fields.lam, fields.s)
    up = fields.Yplus @ Pp
    um = fields.Yminus @ Pm
    return replace(fields, Uplus=up, Uminus=um, phi=up[:, 0, 0].copy(), psi=up[:, 1, 0].copy())


def field_set(weight, s: float, lambda_grid: Grid | None = None, order: int = DEFAULT_ORDER,
              lam_points=None, convention: Convention | None = None) -> ZSFieldSet:
    """assemble_fields, reconstruct_Yplus and compute_phi_psi in one go."""
    f = assemble_fields(weight, s, lambda_grid, order, lam_points=lam_points)
    return compute_phi_psi(reconstruct_Yplus(f, convention))


def _raw_U1(fields: ZSFieldSet) -> np.ndarray:
    op = fields.op
    _, g_n = _fg(op.root_weight, op.grid.nodes)
    return np.pi / fields.s * np.einsum("k,ki,kj->ij", op.grid.weights, fields.F_nodes, g_n)


def dlogdet_ds(weight, s: float, h: float | None = None, order: int = DEFAULT_ORDER):
    """Centered difference of log det in s (interval representation)."""
    w = _resolve(weight)
    h = 1e-4 * s if h is None else h
    a = interval_determinant(w, s + h, order).log_det
    b = interval_determinant(w, s - h, order).log_det
    return (a - b) / (2 * h)


def _coefficients(U1, sign=1, dlogF=None, ratio=None) -> U1Coefficients:
    alpha, beta, gamma = 2 * U1[0, 0], 2 * U1[0, 1], 2 * U1[1, 0]
    return U1Coefficients(U1, 1j * alpha, 1j * gamma, beta, gamma, alpha, sign, dlogF, ratio)


def compute_U1(fields: ZSFieldSet, sign: int | None = None, h: float | None = None) -> U1Coefficients:
    """U1 = sign (pi/s) int F g^T du; sign calibrated against d_s log F = -p."""
    raw = _raw_U1(fields)
    if fields.weight.is_zero:
        return _coefficients(raw * 0.0)
    if sign is not None:
        return _coefficients(sign * raw, sign)
    dl = complex(dlogdet_ds(fields.weight, fields.s, h))
    errs = {c: abs(dl + 2j * c * raw[0, 0]) for c in (1, -1)}
    sign = min(errs, key=errs.get)
    scale = max(abs(dl), 1e-300)
    if errs[sign] > 1e-5 * max(1.0, scale):
        raise ConventionError(f"U1 sign calibration failed: residuals {errs}, dlogF={dl}")
    ratio = dl / (1j * sign * raw[0, 0]) if raw[0, 0] != 0 else None
    return _coefficients(sign * raw, sign, dl, ratio)


def _wprime(fields):
    return eval_weight_derivative(fields.weight, fields.lam)


def verify_trace_identities(fields: ZSFieldSet, u1: U1Coefficients) -> dict:
    """Normalized residuals of the orthogonality relation and the beta, gamma trace formulas.

    Every residual is divided by N = int |phi|^2 |w'|; the beta and gamma
    formulas are compared after multiplying through by 2 pi s.
    """
    om = fields.lambda_grid.weights
    wp = _wprime(fields)
    phi, psi, s = fields.phi, fields.psi, fields.s
    norm = float(np.sum(om * np.abs(phi) ** 2 * np.abs(wp)))
    if norm == 0.0:
        return {"orthogonality": 0.0, "beta": 0.0, "gamma": 0.0, "gamma_even": 0.0, "norm": 0.0}
    i_pp = np.sum(om * phi ** 2 * wp)
    i_qq = np.sum(om * psi ** 2 * wp)
    i_pq = np.sum(om * phi * psi * wp)
    tps = 2 * np.pi * s
    return {
        "orthogonality": float(abs(i_pq) / norm),
        "beta": float(abs(tps * u1.beta + i_pp) / norm),
        "gamma": float(abs(tps * u1.gamma + i_qq) / norm),
        "gamma_even": float(abs(tps * u1.gamma - i_pp) / norm),
        "norm": norm,
    }


def u1_at(weight, s, order=DEFAULT_ORDER, sign=1) -> U1Coefficients:
    """U1 alone (no lambda-grid work)."""
    f = assemble_fields(weight, s, gauss_legendre(2, -1.0, 1.0), order)
    return compute_U1(f, sign=sign)


def zs_residual(weight, s: float, h: float, lambda_grid: Grid | None = None,
                order: int = DEFAULT_ORDER, workers: int = 1) -> dict:
    """max over lambda of the centered-difference residuals of d_s phi = i lam phi - i beta psi
    and d_s psi = i gamma phi - i lam psi."""
    w = _resolve(weight)
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(w, order)
    sets = map_ordered(lambda t: field_set(w, t, lambda_grid, order), [s - h, s, s + h], workers)
    lo, mid, hi = sets
    u1 = compute_U1(mid, sign=1)
    lam = lambda_grid.nodes
    dphi = (hi.phi - lo.phi) / (2 * h)
    dpsi = (hi.psi - lo.psi) / (2 * h)
    r_phi = np.abs(dphi - 1j * lam * mid.phi + 1j * u1.beta * mid.psi).max()
    r_psi = np.abs(dpsi - 1j * u1.gamma * mid.phi + 1j * lam * mid.psi).max()
    return {"phi": float(r_phi), "psi": float(r_psi), "h": h, "fields": mid, "u1": u1}


def second_log_derivative(fields: ZSFieldSet, h: float | None = None) -> dict:
    """d_s(s d_s log F) by determinant differencing versus (1/pi) int lam w' phi psi."""
    s = fields.s
    h = 1e-3 * s if h is None else h
    w = fields.weight
    vals = [interval_determinant(w, t).log_det for t in (s - h, s, s + h)]
    d1 = (vals[2] - vals[0]) / (2 * h)
    d2 = (vals[2] - 2 * vals[1] + vals[0]) / h ** 2
    fd = d1 + s * d2
    om = fields.lambda_grid.weights
    formula = np.sum(om * fields.lam * _wprime(fields) * fields.phi * fields.psi) / np.pi
    return {"finite_difference": complex(fd), "formula": complex(formula),
            "residual": float(abs(fd - formula)), "h": h}


def lax_y_residual(profile: ProfileSpec, y: float, s: float, h_lam: float, h_y: float,
                   lam_points=None, order: int = DEFAULT_ORDER, workers: int = 1) -> dict:
    """First-column residual of (d_lam + 2 lam d_y) U = L U with centered differences.

    L uses d_y p and d_y q from U1 at y +- h_y.
    """
    w0 = profile.weight(y)
    grid = default_lambda_grid(w0, order)
    if lam_points is None:
        # interior points where w' is not negligible
        lam_points = np.linspace(-0.9, 0.9, 13) * max(truncation_radius(w0, derivative=True), 1.0)
    lam_points = np.asarray(lam_points, dtype=float)
    jobs = [(y, lam_points - h_lam), (y, lam_points + h_lam), (y, lam_points),
            (y - h_y, lam_points), (y + h_y, lam_points)]
    sets = map_ordered(lambda j: field_set((profile, j[0]), s, grid, order, lam_points=j[1]),
                       jobs, workers)
    lm, lp, mid, ym, yp = sets
    c_m = compute_U1(ym, sign=1)
    c_p = compute_U1(yp, sign=1)
    dyp = (c_p.p - c_m.p) / (2 * h_y)
    dyq = (c_p.q - c_m.q) / (2 * h_y)
    lax = LaxPair(0.0, 0.0, s, dyp, dyq)
    L = lax.L
    dphi = (lp.phi - lm.phi) / (2 * h_lam) + 2 * lam_points * (yp.phi - ym.phi) / (2 * h_y)
    dpsi = (lp.psi - lm.psi) / (2 * h_lam) + 2 * lam_points * (yp.psi - ym.psi) / (2 * h_y)
    r1 = dphi - (L[0, 0] * mid.phi + L[0, 1] * mid.psi)
    r2 = dpsi - (L[1, 0] * mid.phi + L[1, 1] * mid.psi)
    return {"phi": float(np.abs(r1).max()), "psi": float(np.abs(r2).max()),
            "dyp": complex(dyp), "dyq": complex(dyq), "lax": lax}


def verify_dynamics(weight, s: float, h: float = 1e-3, profile: ProfileSpec | None = None,
                    y: float = 0.0, h_lam: float = 1e-2, h_y: float = 1e-2,
                    order: int = DEFAULT_ORDER, workers: int = 1) -> dict:
    """Residuals of the s-equation, the second log-derivative identity and, when a
    profile is given, the y-Lax equation."""
    w = _resolve(weight) if profile is None else profile.weight(y)
    zsr = zs_residual(w, s, h, order=order, workers=workers)
    out = {"zs_phi": zsr["phi"], "zs_psi": zsr["psi"],
           "second_log_derivative": second_log_derivative(zsr["fields"])["residual"]}
    if profile is not None:
        lr = lax_y_residual(profile, y, s, h_lam, h_y, order=order, workers=workers)
        out["lax_phi"] = lr["phi"]
        out["lax_psi"] = lr["psi"]
    return out


def lax_pair(profile: ProfileSpec, y: float, s: float, h_y: float = 1e-3,
             order: int = DEFAULT_ORDER) -> LaxPair:
    c = u1_at((profile, y), s, order)
    cm = u1_at((profile, y - h_y), s, order)
    cp = u1_at((profile, y + h_y), s, order)
    return LaxPair(c.beta, c.gamma, s, (cp.p - cm.p) / (2 * h_y), (cp.q - cm.q) / (2 * h_y))
