"""System, channel and filter types plus the one-step recursions.

The signal is a scalar complex Gauss-Markov process

    x(n) = rho * x(n-1) + u(n),      y(n) = h(n) x(n) + v(n)

observed through an i.i.d. fading gain ``h(n)`` that is known at the
receiver.  The Kalman filter error variance then obeys a random Riccati
recursion driven only by the instantaneous SNR ``gamma(n) = |h(n)|^2 / sigma_v2``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import integrate

from .exceptions import (
    DegenerateChannel,
    NonPositiveVariance,
    ParameterError,
    RhoZeroWarning,
)

__all__ = [
    "SystemParams",
    "ChannelModel",
    "RayleighChannel",
    "CustomChannel",
    "ConstantChannel",
    "FilterState",
    "Issue",
    "validate_params",
    "check_params",
    "m_max",
    "variance_step",
    "kalman_step",
    "sample_snr",
    "snr_db_to_lambda",
    "lambda_to_snr_db",
]


@dataclass(frozen=True)
class SystemParams:
    """Parameters of the Gauss-Markov source and the receiver noise.

    Construction does not validate; use :func:`check_params` or
    :func:`validate_params`.
    """

    rho: float
    sigma_u2: float
    sigma_v2: float

    @property
    def stable(self) -> bool:
        return abs(self.rho) < 1.0


def snr_db_to_lambda(snr_db):
    """Rayleigh rate from mean SNR in dB (lambda = 1 / E[gamma])."""
    return 10.0 ** (-np.asarray(snr_db) / 10.0) if np.ndim(snr_db) else 10.0 ** (-float(snr_db) / 10.0)


def lambda_to_snr_db(lam):
    return -10.0 * np.log10(lam)


# --------------------------------------------------------------------------
# channels
# --------------------------------------------------------------------------


class ChannelModel:
    """Distribution of the instantaneous receive SNR ``gamma >= 0``.

    Subclasses implement :meth:`sample`; density-based ones also :meth:`pdf`.
    """

    #: whether the transfer operator can be evaluated from :meth:`pdf`
    has_density = True

    def pdf(self, gamma):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def is_degenerate(self) -> bool:
        """True if gamma == 0 almost surely."""
        return False

    def snr_upper(self, tail=1e-14) -> float:
        """An SNR above which at most ``tail`` probability mass lies."""
        raise NotImplementedError


@dataclass(frozen=True)
class RayleighChannel(ChannelModel):
    """Rayleigh fading: gamma is exponential with rate ``lam = 1 / E[gamma]``."""

    lam: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ParameterError(f"Rayleigh rate lambda must be finite and > 0, got {self.lam!r}")

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "RayleighChannel":
        return cls(snr_db_to_lambda(snr_db))

    @property
    def mean_snr(self) -> float:
        return 1.0 / self.lam

    @property
    def snr_db(self) -> float:
        return float(lambda_to_snr_db(self.lam))

    def pdf(self, gamma):
        gamma = np.asarray(gamma, dtype=float)
        return np.where(gamma >= 0, self.lam * np.exp(-self.lam * np.maximum(gamma, 0.0)), 0.0)

    def cdf(self, gamma):
        gamma = np.asarray(gamma, dtype=float)
        return np.where(gamma >= 0, -np.expm1(-self.lam * np.maximum(gamma, 0.0)), 0.0)

    def sample(self, rng, size=None):
        return rng.exponential(scale=1.0 / self.lam, size=size)

    def snr_upper(self, tail=1e-14):
        return -math.log(tail) / self.lam


@dataclass(frozen=True)
class ConstantChannel(ChannelModel):
    """Deterministic SNR.  ``ConstantChannel(0.0)`` is the non-existent channel.

    It has no density, so only simulation accepts it.
    """

    gamma: float = 0.0
    has_density = False

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ParameterError(f"SNR must be >= 0, got {self.gamma!r}")

    def sample(self, rng, size=None):
        if size is None:
            return float(self.gamma)
        return np.full(size, float(self.gamma))

    def is_degenerate(self):
        return self.gamma == 0.0

    def snr_upper(self, tail=1e-14):
        return float(self.gamma)


@dataclass(frozen=True, eq=False)
class CustomChannel(ChannelModel):
    """Arbitrary SNR density on ``[0, inf)``.

    Sampling uses ``sampler(rng, size)`` if given, else ``ppf(u)``, else an
    inverse-CDF table built by integrating ``pdf`` numerically.
    """

    density: Callable
    ppf: Optional[Callable] = None
    sampler: Optional[Callable] = None
    n_table: int = 8193
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def pdf(self, gamma):
        gamma = np.asarray(gamma, dtype=float)
        out = np.asarray(self.density(np.maximum(gamma, 0.0)), dtype=float)
        return np.where(gamma >= 0, out, 0.0)

    def mass(self) -> float:
        if "mass" not in self._cache:
            self._cache["mass"] = integrate.quad(lambda g: float(self.pdf(g)), 0.0, np.inf, limit=200)[0]
        return self._cache["mass"]

    def is_degenerate(self):
        return not self.mass() > 1e-12

    def snr_upper(self, tail=1e-14):
        key = ("upper", tail)
        if key not in self._cache:
            total = self.mass()
            hi = 1.0
            while integrate.quad(lambda g: float(self.pdf(g)), hi, np.inf, limit=200)[0] > tail * total:
                hi *= 2.0
                if hi > 1e12:
                    break
            self._cache[key] = hi
        return self._cache[key]

    def _table(self):
        if "table" not in self._cache:
            hi = self.snr_upper(1e-12)
            g = np.linspace(0.0, hi, self.n_table)
            c = integrate.cumulative_trapezoid(self.pdf(g), g, initial=0.0)
            c /= c[-1]
            # np.interp needs strictly increasing abscissae
            keep = np.concatenate(([True], np.diff(c) > 0))
            self._cache["table"] = (c[keep], g[keep])
        return self._cache["table"]

    def sample(self, rng, size=None):
        if self.sampler is not None:
            return self.sampler(rng, size)
        u = rng.random(size)
        if self.ppf is not None:
            return self.ppf(u)
        c, g = self._table()
        return np.interp(u, c, g)


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


class Issue(NamedTuple):
    code: str
    severity: str  # "error" or "warning"
    message: str


def validate_params(params: SystemParams, channel: ChannelModel | None = None) -> list[Issue]:
    """List every problem with a parameter set without raising.

    Errors make the model ill-posed; warnings restrict which analyses apply
    (``rho == 0`` is fine for simulation, ``|rho| >= 1`` rules out the
    density solver).
    """
    issues = []
    for name in ("sigma_u2", "sigma_v2"):
        value = getattr(params, name)
        if not (value > 0 and math.isfinite(value)):
            issues.append(Issue("non_positive_variance", "error", f"{name} must be finite and > 0, got {value!r}"))
    if not math.isfinite(params.rho):
        issues.append(Issue("invalid_rho", "error", f"rho must be finite, got {params.rho!r}"))
    elif params.rho == 0:
        issues.append(Issue("rho_zero", "warning", "rho = 0: stationary-density results assume rho != 0"))
    elif abs(params.rho) >= 1:
        issues.append(Issue("unstable", "warning", f"|rho| = {abs(params.rho)} >= 1: unbounded support, simulation only"))
    if channel is not None and channel.is_degenerate():
        issues.append(Issue("degenerate_channel", "error", "channel SNR is identically zero"))
    return issues


def check_params(params: SystemParams, channel: ChannelModel | None = None) -> SystemParams:
    """Return ``params`` unchanged if usable, raise on the first error.

    ``rho == 0`` emits :class:`RhoZeroWarning`.
    """
    for issue in validate_params(params, channel):
        if issue.severity == "error":
            if issue.code == "non_positive_variance":
                raise NonPositiveVariance(issue.message)
            if issue.code == "degenerate_channel":
                raise DegenerateChannel(issue.message)
            raise ParameterError(issue.message)
        if issue.code == "rho_zero":
            warnings.warn(issue.message, RhoZeroWarning, stacklevel=2)
    return params


# --------------------------------------------------------------------------
# recursions
# --------------------------------------------------------------------------


def m_max(params: SystemParams) -> float:
    """Supremum of the error variance: sigma_u2 / (1 - rho^2), or inf if |rho| >= 1."""
    if abs(params.rho) >= 1:
        return math.inf
    return params.sigma_u2 / (1.0 - params.rho**2)


def variance_step(M_prev, gamma, params: SystemParams):
    """One step of the random Riccati recursion for the a-posteriori variance."""
    P = params.rho**2 * M_prev + params.sigma_u2
    return P / (1.0 + gamma * P)


@dataclass(frozen=True)
class FilterState:
    """A-posteriori estimate, its error variance, and the step counter.

    ``x_hat`` may be an array to run many noise realizations through the
    same channel path at once; ``M`` is shared by all of them.
    """

    x_hat: complex
    M: float
    step_index: int = 0


def kalman_step(state: FilterState, y, h, params: SystemParams) -> FilterState:
    P = params.rho**2 * state.M + params.sigma_u2
    gain = P * np.conj(h) / (params.sigma_v2 + abs(h) ** 2 * P)
    x_pred = params.rho * state.x_hat
    x_post = x_pred + gain * (y - h * x_pred)
    M = (1.0 - (gain * h).real) * P
    return FilterState(x_post, float(M), state.step_index + 1)


def sample_snr(channel: ChannelModel, rng: np.random.Generator, size=None):
    """Draw instantaneous SNR values; deterministic for a given generator state."""
    return channel.sample(rng, size)
