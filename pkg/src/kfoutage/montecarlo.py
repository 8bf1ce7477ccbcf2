"""Monte Carlo simulation of the error-variance chain and of the full filter."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numba
import numpy as np
from scipy import stats

from .exceptions import InsufficientSamples, NonPositiveVariance, ParameterError
from .model import (
    ChannelModel,
    FilterState,
    SystemParams,
    kalman_step,
    m_max,
    sample_snr,
    validate_params,
)

__all__ = [
    "Trajectory",
    "EmpiricalDistribution",
    "OutageEstimate",
    "ConditionalMSE",
    "simulate_chain",
    "empirical_distribution",
    "estimate_outage_mc",
    "verify_conditional_mse",
    "stationarity_check",
    "spawn_seeds",
    "DEFAULT_BURN_IN",
    "DEFAULT_BATCH",
    "DEFAULT_THIN",
]

DEFAULT_BURN_IN = 1000
DEFAULT_BATCH = 1000
DEFAULT_THIN = 10
_CHUNK = 1 << 20


@numba.njit(cache=True)
def _iterate(m, gammas, rho2, sigma_u2, out):
    for k in range(gammas.shape[0]):
        P = rho2 * m + sigma_u2
        m = P / (1.0 + gammas[k] * P)
        out[k] = m
    return m


def spawn_seeds(seed, n):
    """Independent child seeds for ``n`` parallel chains.

    Child ``i`` is ``SeedSequence(seed).spawn(n)[i]``, so results do not
    depend on how chains are scheduled.
    """
    return np.random.SeedSequence(seed).spawn(n)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """``values[k]`` is M(k+1); ``m0`` is the initial variance."""

    values: np.ndarray
    burn_in: int
    seed: object
    params: SystemParams
    channel: ChannelModel
    m0: float = float("nan")

    def __post_init__(self):
        if len(self.values) <= self.burn_in:
            raise InsufficientSamples(f"trajectory of length {len(self.values)} does not exceed burn_in {self.burn_in}")

    @property
    def samples(self):
        """Post burn-in values."""
        return self.values[self.burn_in:]

    def __len__(self):
        return len(self.values)


def simulate_chain(params: SystemParams, channel: ChannelModel, n_steps: int, m0: float, seed=None, burn_in=DEFAULT_BURN_IN) -> Trajectory:
    """Iterate the variance recursion with i.i.d. SNR draws.

    The SNR sequence comes from ``numpy.random.default_rng(seed)`` in
    chunks of 2**20 draws, so a given seed always yields the same path.
    """
    for issue in validate_params(params):
        if issue.code == "non_positive_variance":
            raise NonPositiveVariance(issue.message)
    if n_steps < 1:
        raise ParameterError("n_steps must be >= 1")
    if not m0 > 0:
        raise ParameterError("m0 must be > 0")
    burn_in = min(burn_in, n_steps - 1)
    rng = np.random.default_rng(seed)
    out = np.empty(n_steps)
    m = float(m0)
    rho2 = float(params.rho) ** 2
    for start in range(0, n_steps, _CHUNK):
        stop = min(start + _CHUNK, n_steps)
        g = np.asarray(sample_snr(channel, rng, stop - start), dtype=float)
        m = _iterate(m, g, rho2, float(params.sigma_u2), out[start:stop])
    return Trajectory(out, burn_in, seed, params, channel, float(m0))


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    bin_edges: np.ndarray
    counts: np.ndarray
    total: int
    sorted_samples: np.ndarray = field(repr=False)

    @property
    def widths(self):
        return np.diff(self.bin_edges)

    @property
    def centers(self):
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def density(self):
        return self.counts / (self.total * self.widths)

    def ecdf(self, x):
        """Right-continuous empirical CDF."""
        x = np.asarray(x, dtype=float)
        return np.searchsorted(self.sorted_samples, x, side="right") / self.total


def empirical_distribution(traj: Trajectory, n_bins: int) -> EmpiricalDistribution:
    """Histogram of the post burn-in samples with an edge pinned at sigma_u2.

    Bins are right-closed, equal-width within ``(0, sigma_u2]`` and within
    ``(sigma_u2, upper]``, where ``upper = min(max sample, M_max)``.
    """
    x = np.sort(traj.samples)
    if len(x) < n_bins:
        raise InsufficientSamples(f"{len(x)} post burn-in samples for {n_bins} bins")
    if n_bins < 1:
        raise ParameterError("n_bins must be >= 1")
    s2 = traj.params.sigma_u2
    upper = min(float(x[-1]), m_max(traj.params))
    if upper <= s2 or n_bins == 1:
        edges = np.linspace(0.0, max(upper, s2), n_bins + 1)
    else:
        n1 = min(max(int(round(n_bins * s2 / upper)), 1), n_bins - 1)
        edges = np.concatenate((np.linspace(0.0, s2, n1 + 1), np.linspace(s2, upper, n_bins - n1 + 1)[1:]))
        edges[n1] = s2
    idx = np.clip(np.searchsorted(edges, x, side="left") - 1, 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    return EmpiricalDistribution(edges, counts, len(x), x)


class OutageEstimate(NamedTuple):
    M_th: float
    p_hat: float
    ci_low: float
    ci_high: float
    stderr: float


def _batch_stderr(indicator, batch):
    n_batches = len(indicator) // batch
    if n_batches >= 2:
        means = indicator[: n_batches * batch].reshape(n_batches, batch).mean(axis=1)
        return float(means.std(ddof=1) / math.sqrt(n_batches))
    p = indicator.mean()
    return math.sqrt(p * (1 - p) / len(indicator))


def estimate_outage_mc(traj: Trajectory, thresholds, batch=DEFAULT_BATCH) -> list[OutageEstimate]:
    """Fraction of post burn-in samples at or above each threshold.

    The 95% interval uses batch means (batch length ``batch``) so that
    correlation along the chain widens it as it should.  When every sample
    falls on one side of the threshold the interval comes from the rule of
    three with the number of batches as the effective sample size.
    """
    x = traj.samples
    out = []
    for th in np.atleast_1d(thresholds):
        th = float(th)
        if not th > 0:
            raise ParameterError("thresholds must be > 0")
        ind = (x >= th).astype(float)
        p = float(ind.mean())
        se = _batch_stderr(ind, batch)
        lo, hi = max(p - 1.96 * se, 0.0), min(p + 1.96 * se, 1.0)
        if p in (0.0, 1.0):
            # no events (or no non-events): the normal interval has zero width,
            # so fall back to the rule of three on the batch count
            n_eff = max(len(x) // batch, 1)
            width = min(3.0 / n_eff, 1.0)
            lo, hi = (0.0, width) if p == 0.0 else (1.0 - width, 1.0)
        out.append(OutageEstimate(th, p, lo, hi, se))
    return out


@dataclass(frozen=True)
class ConditionalMSE:
    M: np.ndarray
    realized_mse: np.ndarray
    gamma: np.ndarray

    @property
    def ratio(self):
        return self.realized_mse / self.M


def _cn(rng, var, size):
    return math.sqrt(var / 2.0) * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def verify_conditional_mse(params, channel, n_steps, n_noise_reps, seed=None, m0=None, gammas=None) -> ConditionalMSE:
    """Run the full Kalman filter on one fixed channel path over many noise draws.

    ``M(n)`` should equal the average of ``|x(n) - x_hat(n)|^2`` over noise
    realizations.  ``m0`` defaults to the stationary signal variance
    (``M_max``); ``gammas`` overrides the channel draw.
    """
    if n_noise_reps < 100:
        raise ParameterError("n_noise_reps must be >= 100")
    chan_rng, noise_rng = (np.random.default_rng(s) for s in spawn_seeds(seed, 2))
    if gammas is None:
        gammas = np.asarray(sample_snr(channel, chan_rng, n_steps), dtype=float)
    else:
        gammas = np.asarray(gammas, dtype=float)
        n_steps = len(gammas)
    phases = np.exp(2j * np.pi * chan_rng.random(n_steps))
    h = np.sqrt(gammas * params.sigma_v2) * phases
    if m0 is None:
        m0 = m_max(params)
        if not math.isfinite(m0):
            raise ParameterError("m0 is required when |rho| >= 1")
    x = _cn(noise_rng, m0, n_noise_reps)
    state = FilterState(np.zeros(n_noise_reps, dtype=complex), float(m0))
    M = np.empty(n_steps)
    mse = np.empty(n_steps)
    for n in range(n_steps):
        x = params.rho * x + _cn(noise_rng, params.sigma_u2, n_noise_reps)
        y = h[n] * x + _cn(noise_rng, params.sigma_v2, n_noise_reps)
        state = kalman_step(state, y, h[n], params)
        M[n] = state.M
        mse[n] = np.mean(np.abs(x - state.x_hat) ** 2)
    return ConditionalMSE(M, mse, gammas)


def stationarity_check(params, channel, m0_a, m0_b, n_steps, seed_a, seed_b, burn_in=DEFAULT_BURN_IN, thin=DEFAULT_THIN) -> float:
    """Two-sample KS statistic between chains started at ``m0_a`` and ``m0_b``.

    Post burn-in samples are thinned to every ``thin``-th point first.
    """
    a = simulate_chain(params, channel, n_steps, m0_a, seed_a, burn_in).samples[::thin]
    b = simulate_chain(params, channel, n_steps, m0_b, seed_b, burn_in).samples[::thin]
    return float(stats.ks_2samp(a, b).statistic)
