"""sigma(y, s) = log Q_W(y, s) on rectangular grids and finite-difference checks of
the PDEs it satisfies.

All stencils are centered and second order; the mixed derivative d_s^2 d_y is d_y
applied to the d_s^2 stencil.  Masked nodes (Q = 0) are NaN and poison every
stencil that touches them, so residual maxima use nan-aware reductions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .fredholm import endpoint_resolvent, interval_determinant, map_ordered, unwrap_sweep
from .quadrature import DEFAULT_ORDER
from .weights import ProfileSpec
from . import zs

Q_FORM_THRESHOLD = 1e-3


@dataclass(eq=False)
class SigmaSurface:
    y_grid: np.ndarray
    s_grid: np.ndarray
    sigma: np.ndarray          # (len(y_grid), len(s_grid))
    Q: np.ndarray
    p: np.ndarray
    q: np.ndarray
    h_s: float
    h_y: float
    profile: ProfileSpec
    p_resolvent: np.ndarray | None = None   # R(t,t)/pi, no differencing
    q_resolvent: np.ndarray | None = None   # R(t,-t)/pi, smooth branch of q
    extra: dict = field(default_factory=dict)

    @property
    def mask(self) -> np.ndarray:
        return ~np.isfinite(self.sigma)


def _uniform_step(grid, name):
    d = np.diff(grid)
    if d.size == 0:
        return float("nan")
    if np.any(d <= 0) or np.ptp(d) > 1e-9 * max(abs(d[0]), 1.0):
        raise ValueError(f"{name} must be ascending and uniformly spaced")
    return float(np.mean(d))


def grid_range(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def _real_if_close(a):
    a = np.asarray(a)
    if np.iscomplexobj(a) and np.all(np.abs(a.imag[np.isfinite(a)]) == 0):
        return a.real.copy()
    return a


def _sigma_row(profile: ProfileSpec, y: float, s_grid, order: int, resolvent: bool):
    w = profile.weight(y)
    res = unwrap_sweep([interval_determinant(w, s, order, y=y) for s in s_grid])
    sig = np.array([complex(r.log_det) if not r.singular else complex(np.nan, np.nan)
                    for r in res])
    if not resolvent:
        return sig, None, None
    pr = np.full(sig.shape, np.nan, dtype=complex)
    qr = np.full(sig.shape, np.nan, dtype=complex)
    for j, (s, r) in enumerate(zip(s_grid, res)):
        if not r.singular:
            R = endpoint_resolvent(w, s, order)
            pr[j], qr[j] = R[0, 0] / np.pi, R[0, 1] / np.pi
    return sig, pr, qr


def d_s(a, h):
    out = np.full(a.shape, np.nan, dtype=a.dtype)
    out[:, 1:-1] = (a[:, 2:] - a[:, :-2]) / (2 * h)
    return out


def d_ss(a, h):
    out = np.full(a.shape, np.nan, dtype=a.dtype)
    out[:, 1:-1] = (a[:, 2:] - 2 * a[:, 1:-1] + a[:, :-2]) / h ** 2
    return out


def d_y(a, h):
    out = np.full(a.shape, np.nan, dtype=a.dtype)
    out[1:-1] = (a[2:] - a[:-2]) / (2 * h)
    return out


def continuous_root(x):
    """Principal sqrt of x with sign flips removed along the last axis."""
    r = np.sqrt(np.asarray(x, dtype=complex))
    for j in range(1, r.shape[-1]):
        prev, cur = r[..., j - 1], r[..., j]
        flip = np.abs(cur + prev) < np.abs(cur - prev)
        r[..., j] = np.where(flip, -cur, cur)
    return _real_if_close(r)


def _align_sign(ref, x):
    """Flip x globally so that it agrees in sign with ref on the whole (q is defined up to sign).

    The flip is global: R(t,-t) is smooth in (y, s) and may cross zero, so a
    per-row flip would break continuity in y.
    """
    dot = np.nansum(np.real(np.conj(ref) * x))
    return -x if dot < 0 else x


def surface_from_sigma(sigma, y_grid, s_grid, profile=None) -> SigmaSurface:
    """Wrap a tabulated sigma (real or complex) and derive p = -d_s sigma, q = sqrt(-d_s^2 sigma)."""
    y_grid = np.asarray(y_grid, dtype=float)
    s_grid = np.asarray(s_grid, dtype=float)
    sigma = _real_if_close(sigma)
    hs, hy = _uniform_step(s_grid, "s_grid"), _uniform_step(y_grid, "y_grid")
    p = -d_s(sigma, hs)
    q = continuous_root(-d_ss(sigma, hs))
    return SigmaSurface(y_grid, s_grid, sigma, np.exp(sigma), p, q, hs, hy,
                        profile if profile is not None else ProfileSpec("none"))


def build_sigma_surface(profile: ProfileSpec, y_grid, s_grid, order: int = DEFAULT_ORDER,
                        workers: int = 1, resolvent: bool = True) -> SigmaSurface:
    """sigma = log Q_W from branch-continuous determinant sweeps in s, one per y.

    p and q come from centered differences of sigma.  With ``resolvent=True`` the
    endpoint-resolvent values of p and q are stored as well; they carry no
    differencing error and are what the q-form and coupled residuals use.
    """
    y_grid = np.asarray(y_grid, dtype=float)
    s_grid = np.asarray(s_grid, dtype=float)
    if y_grid.size == 0 or s_grid.size == 0:
        raise ValueError("grids must be nonempty")
    if s_grid.min() <= 0:
        raise ValueError("s_grid must be positive")
    rows = map_ordered(lambda y: _sigma_row(profile, y, s_grid, order, resolvent),
                       list(y_grid), workers)
    surf = surface_from_sigma(np.array([r[0] for r in rows]), y_grid, s_grid, profile)
    if resolvent:
        surf.p_resolvent = _real_if_close(np.array([r[1] for r in rows]))
        qr = np.array([r[2] for r in rows])
        qr = _real_if_close(_align_sign(np.where(np.isfinite(surf.q), surf.q, 0), qr))
        surf.q_resolvent = qr
    return surf


def extract_p_q(surface: SigmaSurface):
    return surface.p, surface.q


def _stencils(surface: SigmaSurface):
    sg, hs, hy = surface.sigma, surface.h_s, surface.h_y
    s = surface.s_grid[None, :]
    ss = d_ss(sg, hs)
    return dict(s=s, ss=ss, y=d_y(sg, hy), sy=d_y(d_s(sg, hs), hy), ssy=d_y(ss, hy))


def sigma_form_residual(surface: SigmaSurface):
    """(d_s^2 d_y sigma)^2 - 4 d_s^2 sigma (-2 s d_s d_y sigma + 2 d_y sigma - (d_s d_y sigma)^2)."""
    t = _stencils(surface)
    lhs = t["ssy"] ** 2
    rhs = 4 * t["ss"] * (-2 * t["s"] * t["sy"] + 2 * t["y"] - t["sy"] ** 2)
    scale = np.abs(lhs) + 4 * np.abs(t["ss"]) * (2 * np.abs(t["s"] * t["sy"]) + 2 * np.abs(t["y"])
                                                 + np.abs(t["sy"]) ** 2)
    return lhs - rhs, scale


def _pq(surface: SigmaSurface, source: str):
    if source == "auto":
        source = "resolvent" if surface.q_resolvent is not None else "stencil"
    if source == "resolvent":
        if surface.q_resolvent is None:
            raise ValueError("surface has no resolvent p, q")
        return surface.p_resolvent, surface.q_resolvent
    if source != "stencil":
        raise ValueError(f"unknown source {source!r}")
    return surface.p, surface.q


def coupled_residuals(surface: SigmaSurface, source: str = "auto"):
    """d_y d_s p - 2 q d_y q and d_y d_s q + 2 q (s - d_y p)."""
    (p, q), hs, hy = _pq(surface, source), surface.h_s, surface.h_y
    s = surface.s_grid[None, :]
    r1 = d_y(d_s(p, hs), hy) - 2 * q * d_y(q, hy)
    r2 = d_y(d_s(q, hs), hy) + 2 * q * (s - d_y(p, hy))
    return r1, r2


def q_form_residual(surface: SigmaSurface, threshold: float = Q_FORM_THRESHOLD,
                    source: str = "auto"):
    """d_s(d_s d_y q / 2q) - d_y(q^2) + 1, masked where |q| <= threshold."""
    q, hs, hy = _pq(surface, source)[1], surface.h_s, surface.h_y
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = d_y(d_s(q, hs), hy) / (2 * q)
        ratio = np.where(np.abs(q) > threshold, ratio, np.nan)
        res = d_s(ratio, hs) - d_y(q ** 2, hy) + 1.0
    small = np.abs(q) <= threshold
    for shift in (-1, 1):
        small = small | np.roll(small, shift, axis=1)
    res = np.where(small, np.nan, res)
    res[:, [0, -1]] = np.nan
    return res


def _summary(res, scale=None):
    a = np.abs(res)
    finite = np.isfinite(a)
    if not finite.any():
        return {"max": float("nan"), "median": float("nan"), "nodes": 0}
    out = {"max": float(a[finite].max()), "median": float(np.median(a[finite])),
           "nodes": int(finite.sum())}
    if scale is not None:
        ref = np.nanmax(np.abs(scale))
        out["max_normalized"] = out["max"] / ref if ref > 0 else 0.0
    return out


def pde_residuals(surface: SigmaSurface, q_threshold: float = Q_FORM_THRESHOLD,
                  source: str = "auto") -> dict:
    """Per-node residual fields and their summaries for the three relations.

    ``source`` picks p, q for the coupled and q-form relations: "stencil"
    (differences of sigma), "resolvent" or "auto" (resolvent when stored).
    """
    sf, scale = sigma_form_residual(surface)
    c1, c2 = coupled_residuals(surface, source)
    qf = q_form_residual(surface, q_threshold, source)
    return {
        "fields": {"sigma_form": sf, "coupled_p": c1, "coupled_q": c2, "q_form": qf},
        "sigma_form": _summary(sf, scale),
        "coupled_p": _summary(c1),
        "coupled_q": _summary(c2),
        "q_form": _summary(qf),
    }


def convergence_study(profile: ProfileSpec, y_range=(-2.0, 2.0), s_range=(0.2, 3.0),
                      h_y: float = 0.05, h_s: float = 0.02, order: int = DEFAULT_ORDER,
                      workers: int = 1, q_threshold: float = Q_FORM_THRESHOLD,
                      source: str = "auto") -> dict:
    """Residual maxima at steps h and h/2 compared on the nodes the two grids share."""
    res = source != "stencil"
    coarse = build_sigma_surface(profile, grid_range(*y_range, h_y), grid_range(*s_range, h_s),
                                 order, workers, res)
    fine = build_sigma_surface(profile, grid_range(*y_range, h_y / 2),
                               grid_range(*s_range, h_s / 2), order, workers, res)
    rc, rf = pde_residuals(coarse, q_threshold, source), pde_residuals(fine, q_threshold, source)
    out = {"coarse": coarse, "fine": fine, "orders": {}, "max_coarse": {}, "max_fine": {}}
    for name in ("sigma_form", "coupled_p", "coupled_q", "q_form"):
        a = np.abs(rc["fields"][name])
        b = np.abs(rf["fields"][name][::2, ::2])
        common = np.isfinite(a) & np.isfinite(b)
        if not common.any():
            out["orders"][name] = float("nan")
            continue
        ma, mb = a[common].max(), b[common].max()
        out["max_coarse"][name] = float(ma)
        out["max_fine"][name] = float(mb)
        out["orders"][name] = float(np.log2(ma / mb)) if mb > 0 else float("inf")
    return out


def _fit(x, y):
    x, y = np.asarray(x, dtype=complex).ravel(), np.asarray(y, dtype=complex).ravel()
    return complex(np.vdot(x, y) / np.vdot(x, x))


def nearest_rational(c: complex, max_den: int = 4):
    """Closest a + b i with a, b rationals of denominator <= max_den; returns (value, text, distance)."""
    parts = []
    for v in (c.real, c.imag):
        parts.append(Fraction(v).limit_denominator(max_den))
    val = complex(float(parts[0]), float(parts[1]))
    re, im = parts
    if im == 0:
        text = str(re)
    elif re == 0:
        text = "i" if im == 1 else "-i" if im == -1 else f"{im}i"
    else:
        text = f"{re}{'+' if im > 0 else '-'}{abs(im)}i"
    return val, text, abs(c - val)


def calibrate_constants(surface: SigmaSurface, samples: Sequence[tuple[float, float]] | None = None,
                        h: float = 1e-3, order: int = DEFAULT_ORDER, tol: float = 1e-3) -> dict:
    """Least-squares prefactors c in the candidate identities

        d_s log Q = c * i [U1]_11,   q = c * gamma,   d_s^2 sigma = c * gamma^2,
        d_s alpha = c * i gamma^2,   d_s log Q = c * p,   d_s^2 sigma = c * q^2

    with sigma-derived quantities from high-accuracy local stencils around each
    sample (y, s) and U1-derived ones from the resolvent.  Each c is matched to the
    nearest rational of denominator <= 4 and flagged if it is further than ``tol``.
    """
    profile = surface.profile
    if samples is None:
        ys = surface.y_grid[[len(surface.y_grid) // 4, len(surface.y_grid) // 2]]
        ss = surface.s_grid[[len(surface.s_grid) // 3, 2 * len(surface.s_grid) // 3]]
        samples = [(float(y), float(s)) for y in ys for s in ss]
    cols = {k: ([], []) for k in ("dlogQ_vs_iU11", "q_vs_gamma", "d2sigma_vs_gamma2",
                                  "dalpha_vs_igamma2", "dlogQ_vs_p", "d2sigma_vs_q2")}
    for y, s in samples:
        w = profile.weight(y)
        ld = [interval_determinant(w, s + k * h, order).log_det for k in (-1, 0, 1)]
        d1 = (ld[2] - ld[0]) / (2 * h)
        d2 = (ld[2] - 2 * ld[1] + ld[0]) / h ** 2
        qs = np.sqrt(complex(-d2))
        c0 = zs.u1_at(w, s, order)
        cm, cp = zs.u1_at(w, s - h, order), zs.u1_at(w, s + h, order)
        dalpha = (cp.alpha_rh - cm.alpha_rh) / (2 * h)
        pairs = {
            "dlogQ_vs_iU11": (1j * c0.U1[0, 0], d1),
            "q_vs_gamma": (c0.gamma, qs),
            "d2sigma_vs_gamma2": (c0.gamma ** 2, d2),
            "dalpha_vs_igamma2": (1j * c0.gamma ** 2, dalpha),
            "dlogQ_vs_p": (c0.p, d1),
            "d2sigma_vs_q2": (c0.q ** 2, d2),
        }
        for k, (x, yv) in pairs.items():
            cols[k][0].append(x)
            cols[k][1].append(yv)
    report = {}
    for k, (x, yv) in cols.items():
        x = np.array(x)
        yv = np.array(yv)
        if not np.any(np.abs(x) > 0):
            report[k] = {"fit": 0j, "rational": "undetermined", "distance": float("nan"),
                         "flagged": True}
            continue
        if k == "q_vs_gamma":
            # q is only defined up to sign; align each sample with the first
            ratio = yv / x
            yv = np.where(np.real(ratio * np.conj(ratio[0])) < 0, -yv, yv)
        c = _fit(x, yv)
        val, text, dist = nearest_rational(c)
        report[k] = {"fit": c, "rational": text, "value": val, "distance": float(dist),
                     "flagged": bool(dist > tol)}
    return report


def small_s_limits(profile: ProfileSpec, y: float, s_values=(1e-2, 5e-3, 2.5e-3),
                   h_y: float = 1e-3, order: int = DEFAULT_ORDER) -> dict:
    """|s d_s sigma|, |d_y sigma|, s ||U1|| and ||d_y U1|| at small s (Frobenius norms).

    s-derivatives use centered differences with step 1e-3 s, y-derivatives step h_y.
    """
    out = {"s": list(s_values), "s_dsigma": [], "dy_sigma": [], "s_U1": [], "dy_U1": []}
    for s in s_values:
        hs = 1e-3 * s
        w = profile.weight(y)
        ds = (interval_determinant(w, s + hs, order).log_det
              - interval_determinant(w, s - hs, order).log_det) / (2 * hs)
        dy = (interval_determinant(profile.weight(y + h_y), s, order).log_det
              - interval_determinant(profile.weight(y - h_y), s, order).log_det) / (2 * h_y)
        u0 = zs.u1_at(w, s, order, sign=1).U1
        um = zs.u1_at(profile.weight(y - h_y), s, order, sign=1).U1
        up = zs.u1_at(profile.weight(y + h_y), s, order, sign=1).U1
        out["s_dsigma"].append(float(abs(s * ds)))
        out["dy_sigma"].append(float(abs(dy)))
        out["s_U1"].append(float(s * np.linalg.norm(u0)))
        out["dy_U1"].append(float(np.linalg.norm((up - um) / (2 * h_y))))
    return out
