"""Closed-form quantities for Rayleigh fading: kappa bounds, outage bounds,
the high-SNR linear law and the Taylor series of kappa.

Below the break point the stationary pdf is ``kappa * lam / M^2 * exp(-lam / M)``,
so every outage probability with ``M_th <= sigma_u2`` is
``1 - kappa * exp(-lam / M_th)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .exceptions import BoundClampedWarning, ParameterError, ThresholdAboveBreakpoint
from .model import SystemParams, m_max

__all__ = [
    "KappaBounds",
    "OutageReport",
    "a_kappa",
    "kappa_bounds",
    "outage_closed_form",
    "outage_bounds",
    "high_snr_outage",
    "kappa_taylor",
    "outage_report",
]


def _check_lambda(lam):
    if not (lam > 0 and math.isfinite(lam)):
        raise ParameterError(f"lambda must be finite and > 0, got {lam!r}")


def _check_threshold(M_th, sigma_u2):
    M_th = np.asarray(M_th, dtype=float)
    if np.any(M_th <= 0):
        raise ParameterError("thresholds must be > 0")
    if np.any(M_th > sigma_u2):
        raise ThresholdAboveBreakpoint(
            f"closed form only holds for M_th <= sigma_u2 = {sigma_u2}; use the density solver above it"
        )
    return M_th


def _clamp(p, what):
    p = np.asarray(p, dtype=float)
    clipped = np.clip(p, 0.0, 1.0)
    if np.any(clipped != p):
        warnings.warn(f"{what} left [0, 1] and was clamped", BoundClampedWarning, stacklevel=3)
    return float(clipped) if clipped.ndim == 0 else clipped


def a_kappa(params: SystemParams, lam: float) -> float:
    """``1 - integral_0^sigma_u2 exp(lam/(rho^2 m + sigma_u2)) lam/m^2 exp(-lam/m) dm``.

    Integrated in ``t = lam / m``, which turns the boundary layer at
    ``m -> 0`` into a plain exponential tail on ``[lam/sigma_u2, inf)``.
    Writing ``1 = integral e^(t0 - t) dt`` over the same range gives a
    nonnegative integrand without cancellation; it vanishes identically
    when ``rho = 0``.
    """
    _check_lambda(lam)
    rho2, s2 = params.rho**2, params.sigma_u2
    t0 = lam / s2
    if rho2 == 0:
        return 0.0

    def integrand(s):
        t = t0 + s
        gap = rho2 * lam * lam / (s2 * (rho2 * lam + s2 * t))  # t0 - g(t) >= 0
        return math.exp(t0 - gap - t) * math.expm1(gap)

    value, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=500)
    return value


@dataclass(frozen=True)
class KappaBounds:
    kappa_l: float
    kappa_u: float
    variant: str  # "stable_b" or "unstable_inf"
    a_kappa: float
    lam: float

    @property
    def gap(self):
        return self.kappa_u - self.kappa_l


def kappa_bounds(params: SystemParams, lam: float) -> KappaBounds:
    """Lower and upper bounds on kappa.

    For stable systems ``rho^2 M_max + sigma_u2 = M_max``; for |rho| >= 1
    the lower bound uses ``exp(-lam / M_max) -> 1``.
    """
    a = a_kappa(params, lam)
    s2 = params.sigma_u2
    e_break = math.exp(-lam / s2)
    upper = 1.0 / (a * math.exp(-lam / (s2 * (1.0 + params.rho**2))) + e_break)
    if params.stable:
        lower = 1.0 / (a * math.exp(-lam / m_max(params)) + e_break)
        variant = "stable_b"
    else:
        lower = 1.0 / (a + e_break)
        variant = "unstable_inf"
    return KappaBounds(lower, upper, variant, a, lam)


def outage_closed_form(kappa: float, lam: float, M_th, sigma_u2: Optional[float] = None):
    """``1 - kappa * exp(-lam / M_th)``, clamped to [0, 1].

    Only valid for ``M_th <= sigma_u2``; pass ``sigma_u2`` to have that
    enforced.
    """
    if lam < 0:
        raise ParameterError("lambda must be >= 0")
    if sigma_u2 is not None:
        M_th = _check_threshold(M_th, sigma_u2)
    M_th = np.asarray(M_th, dtype=float)
    return _clamp(1.0 - kappa * np.exp(-lam / M_th), "closed-form outage")


def outage_bounds(params: SystemParams, lam: float, M_th):
    """``(lower, upper)`` on the stationary outage probability for ``M_th <= sigma_u2``."""
    M_th = _check_threshold(M_th, params.sigma_u2)
    kb = kappa_bounds(params, lam)
    e = np.exp(-lam / M_th)
    lower = _clamp(1.0 - kb.kappa_u * e, "outage lower bound")
    upper = _clamp(1.0 - kb.kappa_l * e, "outage upper bound")
    return lower, upper


def high_snr_outage(params: SystemParams, lam: float, M_th):
    """Linear high-SNR law ``(1/M_th - 1/sigma_u2) * lam``, floored at 0."""
    M_th = np.asarray(M_th, dtype=float)
    if np.any(M_th <= 0):
        raise ParameterError("thresholds must be > 0")
    out = np.maximum((1.0 / M_th - 1.0 / params.sigma_u2) * lam, 0.0)
    return float(out) if out.ndim == 0 else out


def kappa_taylor(lam: float, sigma_u2: float, order) -> float:
    """Partial sum of ``sum_l (lam / sigma_u2)^l / l!`` through ``order``.

    ``order = math.inf`` returns the limit ``exp(lam / sigma_u2)``.
    """
    if order < 0:
        raise ParameterError("order must be >= 0")
    x = lam / sigma_u2
    if math.isinf(order):
        return math.exp(x)
    total, term = 1.0, 1.0
    for l in range(1, int(order) + 1):
        term *= x / l
        total += term
    return total


@dataclass(frozen=True)
class OutageReport:
    M_th: float
    lam: float
    p_lower: Optional[float]
    p_upper: Optional[float]
    p_highsnr: float
    p_mc: Optional[float] = None
    p_density: Optional[float] = None


def outage_report(params: SystemParams, lam: float, M_th: float, p_mc=None, p_density=None) -> OutageReport:
    """Collect every outage estimate for one threshold.

    Bounds are left as ``None`` above the break point where they do not apply.
    """
    if M_th <= params.sigma_u2:
        lower, upper = outage_bounds(params, lam, M_th)
    else:
        lower = upper = None
    return OutageReport(
        M_th=float(M_th),
        lam=float(lam),
        p_lower=lower,
        p_upper=upper,
        p_highsnr=min(high_snr_outage(params, lam, M_th), 1.0),
        p_mc=p_mc,
        p_density=p_density,
    )
