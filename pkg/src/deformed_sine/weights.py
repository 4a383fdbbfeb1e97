"""Weight functions w and profiles W for the deformed sine kernel.

A weight w enters the kernel through its Fourier integral; a profile W generates
the one-parameter family of even weights u -> W(u^2 - y).  Every family carries a
closed-form derivative because the trace formulas integrate against w'.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Protocol

import numpy as np
from scipy.special import erf, erfc, expit

WEIGHT_FAMILIES = ("none", "fermi", "gaussian_square", "erf_window",
                   "smoothed_indicator", "scattering_derived")
PROFILE_FAMILIES = ("none", "fermi_factor", "gaussian_square", "scattering_derived")

DEFAULT_TRUNCATION_TOL = 1e-16


class ConfigurationError(ValueError):
    """Invalid weight or profile parameters."""


class UnsupportedWeightError(ValueError):
    """The weight does not decay, so no truncation radius exists."""


class TabulatedProfile(Protocol):
    """What a scattering-derived profile must provide (see ``scattering``)."""

    r_min: float
    r_max: float

    def W(self, r): ...

    def dW(self, r): ...


def _logcosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)


def _sech2(x):
    e = np.exp(-2.0 * np.abs(x))
    return 4.0 * e / (1.0 + e) ** 2


@dataclass(frozen=True)
class WeightSpec:
    """An even weight w on the real line.

    ``family`` picks the closed form; ``alpha``, ``epsilon`` and ``y`` are the
    family parameters (unused ones are ignored).  ``profile`` is only set for
    scattering-derived weights, where w(u) = W(u^2 - y) with W tabulated.
    """

    family: str
    alpha: float = 1.0
    epsilon: float = 0.05
    y: float = 0.0
    profile: Any = field(default=None, repr=False)  # compared by identity
    truncation_tol: float = DEFAULT_TRUNCATION_TOL

    def __post_init__(self):
        if self.family not in WEIGHT_FAMILIES:
            raise ConfigurationError(f"unknown weight family {self.family!r}")
        if self.family in ("fermi", "erf_window") and not self.alpha > 0:
            raise ConfigurationError(f"{self.family} needs alpha > 0, got {self.alpha}")
        if self.family == "smoothed_indicator" and not self.epsilon > 0:
            raise ConfigurationError(f"smoothed_indicator needs epsilon > 0, got {self.epsilon}")
        if self.family == "scattering_derived" and self.profile is None:
            raise ConfigurationError("scattering_derived weight needs a tabulated profile")
        if not 0 < self.truncation_tol < 1:
            raise ConfigurationError("truncation_tol must lie in (0, 1)")

    @property
    def even(self) -> bool:
        return True

    @property
    def range01(self) -> bool:
        return self.family != "scattering_derived"

    @property
    def is_zero(self) -> bool:
        return self.family == "none"

    def __call__(self, u):
        return eval_weight(self, u)

    def derivative(self, u):
        return eval_weight_derivative(self, u)

    def feature_scale(self) -> float:
        """Length (in u) over which w changes appreciably; sizes quadrature panels."""
        fam = self.family
        if fam == "smoothed_indicator":
            return min(0.5, self.epsilon)
        if fam == "erf_window":
            return min(0.5, 0.5 / self.alpha)
        if fam == "fermi":
            edge2 = -np.log(self.alpha) / 4.0
        elif fam in ("gaussian_square", "scattering_derived"):
            edge2 = self.y
        else:
            return 0.5
        return 0.5 / max(1.0, 2.0 * np.sqrt(max(edge2, 0.0)))

    def label(self) -> str:
        fam = self.family
        if fam in ("fermi", "erf_window"):
            return f"{fam}(alpha={self.alpha:g})"
        if fam == "smoothed_indicator":
            return f"{fam}(epsilon={self.epsilon:g})"
        if fam in ("gaussian_square", "scattering_derived"):
            return f"{fam}(y={self.y:g})"
        return fam


@dataclass(frozen=True)
class ProfileSpec:
    """A profile W generating the weights w(u) = W(u^2 - y)."""

    family: str
    table: Any = field(default=None, repr=False)
    truncation_tol: float = DEFAULT_TRUNCATION_TOL

    def __post_init__(self):
        if self.family not in PROFILE_FAMILIES:
            raise ConfigurationError(f"unknown profile family {self.family!r}")
        if self.family == "scattering_derived" and self.table is None:
            raise ConfigurationError("scattering_derived profile needs a table")

    @property
    def range01(self) -> bool:
        return self.family != "scattering_derived"

    def W(self, r):
        r = np.asarray(r, dtype=float)
        if self.family == "fermi_factor":
            return expit(-4.0 * r)
        if self.family == "gaussian_square":
            return np.exp(-r * r)
        if self.family == "scattering_derived":
            return self.table.W(r)
        return np.zeros_like(r)

    def dW(self, r):
        r = np.asarray(r, dtype=float)
        if self.family == "fermi_factor":
            e = expit(-4.0 * r)
            return -4.0 * e * (1.0 - e)
        if self.family == "gaussian_square":
            return -2.0 * r * np.exp(-r * r)
        if self.family == "scattering_derived":
            return self.table.dW(r)
        return np.zeros_like(r)

    def weight(self, y: float) -> WeightSpec:
        """The even weight u -> W(u^2 - y)."""
        tol = self.truncation_tol
        if self.family == "fermi_factor":
            # 1/(e^{4(u^2-y)}+1) is the Fermi weight with alpha = e^{-4y}
            return WeightSpec("fermi", alpha=float(np.exp(-4.0 * y)), y=y, truncation_tol=tol)
        if self.family == "gaussian_square":
            return WeightSpec("gaussian_square", y=y, truncation_tol=tol)
        if self.family == "scattering_derived":
            return WeightSpec("scattering_derived", y=y, profile=self.table, truncation_tol=tol)
        return WeightSpec("none", y=y, truncation_tol=tol)


def eval_weight(spec: WeightSpec | tuple, u):
    """w(u) for a WeightSpec, or for a ``(ProfileSpec, y)`` pair."""
    if isinstance(spec, tuple):
        profile, y = spec
        return profile.W(np.asarray(u, dtype=float) ** 2 - y)
    # evaluating at |u| makes evenness exact, not just up to rounding
    u = np.abs(np.asarray(u, dtype=float))
    fam = spec.family
    if fam == "fermi":
        # log-domain: 1/(alpha e^{4u^2} + 1) = expit(-(4u^2 + log alpha))
        return expit(-(4.0 * u * u + np.log(spec.alpha)))
    if fam == "gaussian_square":
        t = u * u - spec.y
        return np.exp(-t * t)
    if fam == "erf_window":
        a = spec.alpha
        au = np.abs(u)
        # erfc form avoids cancellation in the tails
        return np.where(au > 1.0,
                        0.5 * (erfc(a * (au - 1.0)) - erfc(a * (au + 1.0))),
                        0.5 * (erf(a * (u + 1.0)) - erf(a * (u - 1.0))))
    if fam == "smoothed_indicator":
        eps = spec.epsilon
        k = 1.0 / eps
        log_sinh = k + np.log1p(-np.exp(-2.0 * k)) - np.log(2.0)
        logw = (np.log(0.5) + log_sinh - _logcosh((u + 0.5) / eps)
                - _logcosh((u - 0.5) / eps))
        return np.exp(logw)
    if fam == "scattering_derived":
        return spec.profile.W(u * u - spec.y)
    return np.zeros_like(u)


def eval_weight_derivative(spec: WeightSpec | tuple, u):
    """w'(u) from the closed form of the family."""
    if isinstance(spec, tuple):
        profile, y = spec
        u = np.asarray(u, dtype=float)
        return 2.0 * u * profile.dW(u * u - y)
    u = np.asarray(u, dtype=float)
    return np.sign(u) * _derivative_half_line(spec, np.abs(u))


def _derivative_half_line(spec: WeightSpec, u):
    fam = spec.family
    if fam == "fermi":
        w = eval_weight(spec, u)
        return -8.0 * u * w * (1.0 - w)
    if fam == "gaussian_square":
        t = u * u - spec.y
        return -4.0 * u * t * np.exp(-t * t)
    if fam == "erf_window":
        a = spec.alpha
        return a / np.sqrt(np.pi) * (np.exp(-(a * (u + 1.0)) ** 2)
                                     - np.exp(-(a * (u - 1.0)) ** 2))
    if fam == "smoothed_indicator":
        eps = spec.epsilon
        return 0.5 / eps * (_sech2((u + 0.5) / eps) - _sech2((u - 0.5) / eps))
    if fam == "scattering_derived":
        return 2.0 * u * spec.profile.dW(u * u - spec.y)
    return np.zeros_like(u)


def truncation_radius(spec: WeightSpec | tuple, tol: float | None = None,
                      derivative: bool = False) -> float:
    """Smallest Lambda with |w(u)| <= tol for all |u| >= Lambda.

    The tail is located on a scan grid and refined by bisection inside the last
    cell where |w| exceeds ``tol``; beyond that cell all built-in families are
    monotone.  ``derivative=True`` does the same for w'.
    """
    return _truncation_radius(spec, tol, derivative)


@lru_cache(maxsize=4096)
def _truncation_radius(spec, tol, derivative) -> float:
    if tol is None:
        tol = spec.truncation_tol if isinstance(spec, WeightSpec) else DEFAULT_TRUNCATION_TOL
    if not 0 < tol < 1:
        raise ConfigurationError(f"tol must lie in (0, 1), got {tol}")
    fn = eval_weight_derivative if derivative else eval_weight

    def mag(u):
        return np.abs(fn(spec, u))

    if isinstance(spec, WeightSpec) and spec.is_zero:
        return 0.0
    hi = 1.0
    while mag(np.array([hi, 1.5 * hi, 2.0 * hi])).max() > tol:
        hi *= 2.0
        if hi > 1e4:
            raise UnsupportedWeightError("weight does not decay below tol before |u| = 1e4")
    scan = np.linspace(0.0, hi, 4097)
    above = np.nonzero(mag(scan) > tol)[0]
    if above.size == 0:
        return 0.0
    lo, up = scan[above[-1]], scan[min(above[-1] + 1, scan.size - 1)]
    for _ in range(100):
        mid = 0.5 * (lo + up)
        if mag(np.array([mid]))[0] > tol:
            lo = mid
        else:
            up = mid
        if up - lo < 1e-13 * max(1.0, up):
            break
    return float(up)


def parse_weight(name: str, alpha: float = 1.0, epsilon: float = 0.05, y: float = 0.0,
                 tol: float = DEFAULT_TRUNCATION_TOL) -> WeightSpec:
    """Build a WeightSpec from the config/CLI vocabulary."""
    if name == "fermi_factor":
        return ProfileSpec("fermi_factor", truncation_tol=tol).weight(y)
    return WeightSpec(name, alpha=alpha, epsilon=epsilon, y=y, truncation_tol=tol)
