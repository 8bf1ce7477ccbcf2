"""Stationary density of the error variance by fixed-point iteration.

The stationary pdf solves

    f(M) = M^-2 * integral_{c(M)}^{M_max} f_gamma(1/M - 1/(rho^2 m + sigma_u2)) f(m) dm

with ``c(M) = 0`` for ``M <= sigma_u2`` and ``(M - sigma_u2) / rho^2`` above.

Discretization
--------------
Densities are stored as ``f = phi * q`` for a fixed envelope ``phi`` with
known antiderivatives of ``phi`` and ``M * phi``.  Integrals are taken by
product integration: ``q`` is interpolated linearly between nodes and the
``phi`` factor is integrated exactly.  For Rayleigh fading the envelope is
``lam / M^2 * exp(-lam / M)``, so ``q`` is exactly constant below the break
point and the boundary layer near ``M = 0`` costs nothing.  Other channels
use the ``1 / M^2`` envelope shared by every kernel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, special

from .exceptions import NoConvergence, ParameterError, UnstableSystem
from .model import ChannelModel, RayleighChannel, SystemParams, m_max

__all__ = [
    "DensityGrid",
    "SolveReport",
    "build_grid",
    "apply_transfer_operator",
    "solve_stationary",
    "kappa_from_density",
    "outage_from_density",
    "write_density_csv",
]

#: the pdf is below this relative level under the smallest node
NEGLIGIBLE = 1e-30


class _RayleighEnvelope:
    def __init__(self, lam):
        self.lam = float(lam)

    def __call__(self, M):
        M = np.asarray(M, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(M > 0, self.lam / M**2 * np.exp(-self.lam / M), 0.0)

    def prim0(self, M):
        # d/dM exp(-lam/M) = phi
        return np.exp(-self.lam / M)

    def prim1(self, M):
        # d/dM lam * E1(lam/M) = M * phi
        return self.lam * special.exp1(self.lam / M)

    def __repr__(self):
        return f"RayleighEnvelope(lam={self.lam!r})"


class _InverseSquareEnvelope:
    def __call__(self, M):
        M = np.asarray(M, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(M > 0, 1.0 / M**2, 0.0)

    def prim0(self, M):
        return -1.0 / M

    def prim1(self, M):
        return np.log(M)

    def __repr__(self):
        return "InverseSquareEnvelope()"


def _envelope_for(channel):
    if isinstance(channel, RayleighChannel):
        return _RayleighEnvelope(channel.lam)
    return _InverseSquareEnvelope()


def _linear_weights(env, a, b):
    """Weights (L, R) with  int_a^b phi * q_lin = L q(a) + R q(b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    I0 = env.prim0(b) - env.prim0(a)
    I1 = env.prim1(b) - env.prim1(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        L = (b * I0 - I1) / d
        R = (I1 - a * I0) / d
    # cancellation guard for slivers
    tiny = d <= 1e-9 * np.maximum(np.abs(b), 1e-300)
    if np.any(tiny):
        mid = env(0.5 * (a + b)) * d * 0.5
        L = np.where(tiny, mid, L)
        R = np.where(tiny, mid, R)
    return L, R


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Discretized pdf on ``[nodes[0], M_max]``.

    ``values`` are pdf values at ``nodes``; ``weights`` give
    ``integral f ~= sum(weights * values)``.  ``nodes[break_index]`` is
    ``sigma_u2`` exactly.
    """

    nodes: np.ndarray
    values: np.ndarray
    break_index: int
    envelope: object = field(repr=False)
    mass_defect: float = 0.0

    def __post_init__(self):
        phi = self.envelope(self.nodes)
        L, R = _linear_weights(self.envelope, self.nodes[:-1], self.nodes[1:])
        W = np.zeros_like(self.nodes)
        W[:-1] += L
        W[1:] += R
        object.__setattr__(self, "_phi", phi)
        object.__setattr__(self, "_cell_L", L)
        object.__setattr__(self, "_cell_R", R)
        object.__setattr__(self, "_qweights", W)

    # -- representation -------------------------------------------------
    @property
    def q(self):
        """values / envelope: the slowly varying factor that is interpolated."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self._phi > 0, self.values / self._phi, 0.0)

    @property
    def weights(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self._phi > 0, self._qweights / self._phi, 0.0)

    @property
    def m_max(self):
        return float(self.nodes[-1])

    @property
    def break_point(self):
        return float(self.nodes[self.break_index])

    def with_q(self, q, mass_defect=0.0):
        return replace(self, values=self._phi * np.asarray(q, dtype=float), mass_defect=mass_defect)

    # -- integrals ------------------------------------------------------
    def integrate(self, g=None):
        """``integral g(M) f(M) dM``; ``g`` is a callable or node values."""
        q = self.q
        if g is not None:
            q = q * (g(self.nodes) if callable(g) else np.asarray(g, dtype=float))
        return float(np.dot(self._qweights, q))

    def mass(self):
        return self.integrate()

    def _tail(self, x, s):
        """``integral_x^{M_max} phi * interp(s)`` for each x (s given at nodes)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        nodes = self.nodes
        cells = self._cell_L * s[:-1] + self._cell_R * s[1:]
        tail_from = np.concatenate((np.cumsum(cells[::-1])[::-1], [0.0]))
        xc = np.clip(x, nodes[0], nodes[-1])
        k = np.clip(np.searchsorted(nodes, xc, side="right") - 1, 0, len(nodes) - 2)
        s_x = np.interp(xc, nodes, s)
        Lp, Rp = _linear_weights(self.envelope, xc, nodes[k + 1])
        out = Lp * s_x + Rp * s[k + 1] + tail_from[k + 1]
        return np.where(x >= nodes[-1], 0.0, out)

    def tail(self, x):
        """``integral_x^{M_max} f`` under the discretized density (unnormalized)."""
        return self._tail(x, self.q)

    def prob_above(self, x):
        """Normalized ``P(M >= x)``; exactly 1 at or below the first node."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.clip(self.tail(x) / self.mass(), 0.0, 1.0)
        return np.where(x <= self.nodes[0], 1.0, out)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = 1.0 - self.prob_above(x)
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.nodes[0]) & (x <= self.nodes[-1])
        out = np.where(inside, self.envelope(x) * np.interp(x, self.nodes, self.q), 0.0)
        return out if x.ndim else float(out)


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_residual: float
    kappa: float | None
    converged: bool
    tol: float
    residuals: tuple = field(default=(), repr=False)
    mass_defect: float = 0.0

    def summary(self):
        kappa = "n/a" if self.kappa is None else repr(self.kappa)
        return (
            f"converged = {self.converged}\n"
            f"iterations = {self.iterations}\n"
            f"final_residual = {self.final_residual!r}\n"
            f"tol = {self.tol!r}\n"
            f"kappa = {kappa}\n"
            f"mass_defect = {self.mass_defect!r}\n"
        )


def _smallest_node(params, channel):
    if isinstance(channel, RayleighChannel):
        # exp(-lam/eps) = NEGLIGIBLE / 2
        eps = channel.lam / (-math.log(NEGLIGIBLE) + math.log(2.0))
    else:
        eps = 1.0 / (channel.snr_upper(1e-14) + 1.0 / params.sigma_u2)
    return min(eps, params.sigma_u2 / 16.0)


GRADED_SHARE = 0.25


def _upper_offsets(d0, span, n, share=GRADED_SHARE):
    """``n`` offsets on ``[0, span]``: ``share`` of them grow geometrically
    from ``d0`` up to the point where the step matches the equispaced step
    that covers the rest."""
    n_geo = max(int(share * n), 1)
    n_lin = n - 1 - n_geo

    def switch(alpha):
        # the step alpha * d_star equals the equispaced step (span - d_star) / (n_lin - 1)
        return span / (1.0 + alpha * (n_lin - 1))

    # n_geo geometric steps of ratio 1 + alpha lead from d0 to the switch point
    alpha = optimize.brentq(lambda a: math.log(switch(a) / d0) - n_geo * math.log1p(a), 1e-12, span / d0)
    d_star = switch(alpha)
    geo = np.geomspace(d0, d_star, n_geo + 1)[:-1]
    lin = np.linspace(d_star, span, n_lin)
    return np.concatenate(([0.0], geo, lin))


def build_grid(params: SystemParams, channel: ChannelModel, n_nodes: int = 1024) -> DensityGrid:
    """Node set for the solver, initialised with the uniform density.

    Half the nodes are log-spaced on ``[eps, sigma_u2]``. The rest cover
    ``[sigma_u2, M_max]``, geometrically graded away from ``sigma_u2`` (where
    the density has a boundary layer of width ``~ rho^2 eps``) and equispaced
    further out. With ``rho = 0`` the second branch is empty and all nodes go
    to the first.
    """
    if not params.stable:
        raise UnstableSystem(f"density solver needs |rho| < 1, got rho = {params.rho}")
    if n_nodes < 64:
        raise ParameterError(f"n_nodes must be >= 64, got {n_nodes}")
    if not channel.has_density:
        raise ParameterError(f"{type(channel).__name__} has no density; the solver needs one")
    s2 = params.sigma_u2
    top = m_max(params)
    eps = _smallest_node(params, channel)
    if top <= s2:
        nodes = np.geomspace(eps, s2, n_nodes)
        nodes[-1] = s2
        brk = n_nodes - 1
    else:
        n_log = n_nodes // 2
        lower = np.geomspace(eps, s2, n_log)
        upper = s2 + _upper_offsets(params.rho**2 * eps, top - s2, n_nodes - n_log + 1)
        upper[-1] = top
        nodes = np.concatenate((lower[:-1], upper))
        brk = n_log - 1
        nodes[brk] = s2
    env = _envelope_for(channel)
    grid = DensityGrid(nodes, np.full(n_nodes, 1.0 / (top - eps)), brk, env)
    return grid.with_q(grid.q / grid.mass())


class _Operator:
    """Discretized transfer operator for a fixed grid; reused across iterations."""

    def __init__(self, grid: DensityGrid, params: SystemParams, channel: ChannelModel):
        self.grid = grid
        self.params = params
        self.channel = channel
        nodes = grid.nodes
        rho2, s2 = params.rho**2, params.sigma_u2
        self.rayleigh = isinstance(channel, RayleighChannel)
        if rho2 > 0:
            cut = np.maximum((nodes - s2) / rho2, 0.0)
        else:
            cut = np.zeros_like(nodes)
        cut = np.clip(cut, nodes[0], nodes[-1])
        k = np.clip(np.searchsorted(nodes, cut, side="right") - 1, 0, len(nodes) - 2)
        self.cut, self.k = cut, k
        self.Lp, self.Rp = _linear_weights(grid.envelope, cut, nodes[k + 1])
        if self.rayleigh:
            self.w = np.exp(channel.lam / (rho2 * nodes + s2))
        else:
            # kernel[i, j] = f_gamma(1/M_i - 1/(rho^2 m_j + sigma_u2))
            arg = 1.0 / nodes[:, None] - 1.0 / (rho2 * nodes[None, :] + s2)
            self.kernel = np.where(arg >= 0, channel.pdf(np.maximum(arg, 0.0)), 0.0)
            arg_cut = np.maximum(1.0 / nodes - 1.0 / (rho2 * cut + s2), 0.0)
            self.kernel_cut = channel.pdf(arg_cut)
            n = len(nodes)
            j = np.arange(n)
            cellL = np.zeros((n, n))
            cellR = np.zeros((n, n))
            # full cells strictly above the cut cell k_i
            full = j[None, :-1] > k[:, None]
            cellL[:, :-1] = np.where(full, grid._cell_L[None, :], 0.0)
            cellR[:, 1:] = np.where(full, grid._cell_R[None, :], 0.0)
            self.row_weights = cellL + cellR
            self.row_weights[j, k + 1] += self.Rp

    def __call__(self, q):
        grid = self.grid
        nodes = grid.nodes
        if self.rayleigh:
            # q_new(M) = int_{c(M)} w(m) f(m) dm, envelope factor carried by phi
            s = self.w * q
            cells = grid._cell_L * s[:-1] + grid._cell_R * s[1:]
            tail_from = np.concatenate((np.cumsum(cells[::-1])[::-1], [0.0]))
            s_cut = np.interp(self.cut, nodes, s)
            new = self.Lp * s_cut + self.Rp * s[self.k + 1] + tail_from[self.k + 1]
        else:
            q_cut = np.interp(self.cut, nodes, q)
            new = (self.kernel * self.row_weights) @ q + self.Lp * self.kernel_cut * q_cut
        return np.maximum(new, 0.0)


def apply_transfer_operator(density: DensityGrid, params: SystemParams, channel: ChannelModel) -> DensityGrid:
    """One application of the stationary-density operator, renormalized.

    The pre-normalization mass defect is kept on the result as a
    discretization diagnostic.
    """
    return _step(_Operator(density, params, channel), density)


def _step(op, density):
    new_q = op(density.q)
    mass = float(np.dot(density._qweights, new_q))
    if not mass > 0:
        raise NoConvergence("transfer operator annihilated the density (grid too coarse?)", density=density)
    return density.with_q(new_q / mass, mass_defect=abs(mass - 1.0))


def solve_stationary(
    params: SystemParams,
    channel: ChannelModel,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    n_nodes: int = 1024,
    init="uniform",
):
    """Iterate the transfer operator to its fixed point.

    Parameters
    ----------
    init : {"uniform", "rho0"} or DensityGrid
        Starting density.  ``"rho0"`` starts from the first-branch shape
        that is exact when rho = 0.

    Returns
    -------
    density : DensityGrid
    report : SolveReport

    Raises
    ------
    NoConvergence
        If the L1 distance between successive iterates is still above
        ``tol`` after ``max_iter`` applications.
    """
    if not tol > 0:
        raise ParameterError("tol must be > 0")
    if isinstance(init, DensityGrid):
        density = init
    else:
        density = build_grid(params, channel, n_nodes)
        if init == "rho0":
            density = density.with_q(np.ones_like(density.nodes))
            density = density.with_q(density.q / density.mass())
        elif init != "uniform":
            raise ParameterError(f"unknown init {init!r}")
    op = _Operator(density, params, channel)
    W = density._qweights
    residuals = []
    residual = math.inf
    for it in range(1, max_iter + 1):
        new = _step(op, density)
        residual = float(np.dot(W, np.abs(new.q - density.q)))
        residuals.append(residual)
        density = new
        if residual < tol:
            break
    converged = residual < tol
    kappa = kappa_from_density(density, params, channel.lam) if isinstance(channel, RayleighChannel) else None
    report = SolveReport(
        iterations=len(residuals),
        final_residual=residual,
        kappa=kappa,
        converged=converged,
        tol=tol,
        residuals=tuple(residuals),
        mass_defect=density.mass_defect,
    )
    if not converged:
        raise NoConvergence(
            f"residual {residual:.3e} above tol {tol:.1e} after {max_iter} iterations",
            density=density,
            report=report,
        )
    return density, report


def kappa_from_density(density: DensityGrid, params: SystemParams, lam: float) -> float:
    """Normalizing constant of the first pdf branch,
    ``integral exp(lam / (rho^2 m + sigma_u2)) f(m) dm``."""
    rho2, s2 = params.rho**2, params.sigma_u2
    return density.integrate(lambda m: np.exp(lam / (rho2 * m + s2))) / density.mass()


def outage_from_density(density: DensityGrid, M_th) -> float:
    """``P(M >= M_th)`` from the discretized stationary density."""
    M_th = np.asarray(M_th, dtype=float)
    if np.any(M_th <= 0):
        raise ParameterError("thresholds must be > 0")
    out = density.prob_above(M_th)
    return out.reshape(M_th.shape) if M_th.ndim else float(out[0])


def write_density_csv(density: DensityGrid, fh, header_lines=()):
    """Two columns ``M,f_M`` with round-trip precision; ``header_lines`` become ``#`` comments."""
    for line in header_lines:
        fh.write(f"# {line}\n")
    fh.write("M,f_M\n")
    for m, f in zip(density.nodes, density.values):
        fh.write(f"{float(m)!r},{float(f)!r}\n")
