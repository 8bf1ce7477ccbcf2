"""scikit-learn style wrappers around the solver and the simulator.

Both estimators follow the usual contract: ``__init__`` only stores
hyper-parameters, ``fit`` does the work and sets trailing-underscore
attributes, and ``get_params`` / ``set_params`` / ``clone`` work as usual.
Neither learns from data, so ``X`` in ``fit`` is accepted and ignored.
"""
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .bounds import kappa_bounds, outage_bounds
from .density import outage_from_density, solve_stationary
from .exceptions import ParameterError
from .model import RayleighChannel, SystemParams, check_params, m_max, snr_db_to_lambda
from .montecarlo import DEFAULT_BURN_IN, estimate_outage_mc, simulate_chain


def resolve_channel(lam=None, snr_db=None, channel=None):
    """Exactly one of ``lam``, ``snr_db`` or ``channel``."""
    given = [v is not None for v in (lam, snr_db, channel)]
    if sum(given) != 1:
        raise ParameterError("give exactly one of lam, snr_db or channel")
    if channel is not None:
        return channel
    if snr_db is not None:
        lam = snr_db_to_lambda(snr_db)
    return RayleighChannel(float(lam))


class _IEVBase(BaseEstimator):
    def _setup(self):
        params = SystemParams(float(self.rho), float(self.sigma_u2), float(self.sigma_v2))
        channel = resolve_channel(self.lam, self.snr_db, self.channel)
        check_params(params, channel)
        self.params_ = params
        self.channel_ = channel
        return params, channel

    def bounds(self, M_th):
        """Closed-form ``(lower, upper)`` outage bounds; Rayleigh only."""
        check_is_fitted(self, "params_")
        if not isinstance(self.channel_, RayleighChannel):
            raise ParameterError("bounds are only available for Rayleigh fading")
        return outage_bounds(self.params_, self.channel_.lam, M_th)

    def kappa_bounds(self):
        check_is_fitted(self, "params_")
        return kappa_bounds(self.params_, self.channel_.lam)


class StationaryIEVDensity(_IEVBase):
    """Stationary pdf of the Kalman error variance, by fixed-point iteration.

    Parameters
    ----------
    rho, sigma_u2, sigma_v2 : float
        Source correlation, process noise and measurement noise variances.
    lam, snr_db, channel
        Exactly one: Rayleigh rate, mean SNR in dB, or a ``ChannelModel``.
    n_nodes, tol, max_iter, init
        Solver settings, see :func:`kfoutage.density.solve_stationary`.

    Attributes
    ----------
    density_ : DensityGrid
    report_ : SolveReport
    kappa_ : float or None
        First-branch constant (Rayleigh only).

    Examples
    --------
    >>> est = StationaryIEVDensity(rho=0.95, lam=0.25).fit()
    >>> round(est.outage(0.5), 4)
    0.2646
    """

    def __init__(self, rho=0.95, sigma_u2=1.0, sigma_v2=1.0, lam=None, snr_db=None, channel=None,
                 n_nodes=1024, tol=1e-10, max_iter=10_000, init="uniform"):
        self.rho = rho
        self.sigma_u2 = sigma_u2
        self.sigma_v2 = sigma_v2
        self.lam = lam
        self.snr_db = snr_db
        self.channel = channel
        self.n_nodes = n_nodes
        self.tol = tol
        self.max_iter = max_iter
        self.init = init

    def fit(self, X=None, y=None):
        params, channel = self._setup()
        self.density_, self.report_ = solve_stationary(
            params, channel, tol=self.tol, max_iter=self.max_iter, n_nodes=self.n_nodes, init=self.init
        )
        self.kappa_ = self.report_.kappa
        return self

    def pdf(self, M):
        check_is_fitted(self, "density_")
        return self.density_.pdf(M)

    def cdf(self, M):
        check_is_fitted(self, "density_")
        return self.density_.cdf(M)

    def outage(self, M_th):
        check_is_fitted(self, "density_")
        return outage_from_density(self.density_, M_th)

    def score_samples(self, X):
        """Log-density of each sample (``X`` of shape (n_samples, 1))."""
        check_is_fitted(self, "density_")
        X = check_array(X, ensure_2d=True)
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature, got {X.shape[1]}")
        with np.errstate(divide="ignore"):
            return np.log(self.density_.pdf(X[:, 0]))

    def score(self, X, y=None):
        """Total log-likelihood of ``X`` under the stationary density."""
        return float(np.sum(self.score_samples(X)))


class MonteCarloIEV(_IEVBase):
    """Empirical stationary distribution from one long simulated chain.

    Attributes
    ----------
    trajectory_ : Trajectory
    """

    def __init__(self, rho=0.95, sigma_u2=1.0, sigma_v2=1.0, lam=None, snr_db=None, channel=None,
                 n_steps=10**6, burn_in=DEFAULT_BURN_IN, m0=None, random_state=None):
        self.rho = rho
        self.sigma_u2 = sigma_u2
        self.sigma_v2 = sigma_v2
        self.lam = lam
        self.snr_db = snr_db
        self.channel = channel
        self.n_steps = n_steps
        self.burn_in = burn_in
        self.m0 = m0
        self.random_state = random_state

    def fit(self, X=None, y=None):
        params, channel = self._setup()
        m0 = self.m0 if self.m0 is not None else params.sigma_u2
        self.trajectory_ = simulate_chain(params, channel, int(self.n_steps), m0, self.random_state, self.burn_in)
        self._sorted = np.sort(self.trajectory_.samples)
        return self

    def cdf(self, M):
        check_is_fitted(self, "trajectory_")
        return np.searchsorted(self._sorted, np.asarray(M, dtype=float), side="right") / len(self._sorted)

    def outage(self, M_th):
        """Point estimates ``P(M >= M_th)``; see :meth:`outage_ci` for intervals."""
        check_is_fitted(self, "trajectory_")
        M_th = np.asarray(M_th, dtype=float)
        below = np.searchsorted(self._sorted, M_th, side="left")
        return 1.0 - below / len(self._sorted)

    def outage_ci(self, thresholds):
        check_is_fitted(self, "trajectory_")
        return estimate_outage_mc(self.trajectory_, thresholds)

    @property
    def support_max_(self):
        check_is_fitted(self, "params_")
        return m_max(self.params_)
