"""Brownian ensembles, Ito quadrature, stochastic convolutions and MC statistics."""
from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if int(self.steps) < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def dt(self):
        return self.horizon / self.steps

    @property
    def nodes(self):
        t = np.arange(self.steps + 1) * self.horizon / self.steps
        t[-1] = self.horizon
        return t

    def node_time(self, k):
        self.check_node(k)
        return self.horizon if k == self.steps else k * self.horizon / self.steps

    def check_node(self, k):
        if not 0 <= k <= self.steps:
            raise IndexError(f"node {k} outside grid [0, {self.steps}]")

    def refined(self, factor=2):
        return TimeGrid(self.horizon, self.steps * factor)


@dataclass(frozen=True, eq=False)
class BrownianEnsemble:
    """``paths`` Brownian paths sampled as increments on ``grid``.

    ``level`` counts bridge refinements applied to the base draw; refinement
    ``l`` uses random stream ``l`` of the same seed.
    """

    grid: TimeGrid
    paths: int
    increments: np.ndarray
    seed: int
    level: int = 0

    def __post_init__(self):
        self.increments.setflags(write=False)

    @property
    def W(self):
        """Path values at the nodes, shape ``(paths, steps + 1)``."""
        w = np.zeros((self.paths, self.grid.steps + 1))
        np.cumsum(self.increments, axis=1, out=w[:, 1:])
        return w


def sample_brownian(grid, paths, seed):
    if paths < 1:
        raise ValueError("need at least one path")
    inc = kernels.normals(seed, 0, paths, grid.steps, scale=np.sqrt(grid.dt))
    return BrownianEnsemble(grid, paths, inc, int(seed), 0)


def refine_brownian(ens):
    """Halve the step by Brownian-bridge midpoint insertion.

    Each coarse increment is split as ``dW/2 + sqrt(dt)/2 * Z`` and its
    complement; the pair sums back to the coarse increment exactly.
    """
    level = ens.level + 1
    bridge = kernels.normals(ens.seed, level, ens.paths, ens.grid.steps, scale=0.5 * np.sqrt(ens.grid.dt))
    fine = kernels.split_increments(ens.increments, bridge)
    return BrownianEnsemble(ens.grid.refined(2), ens.paths, fine, ens.seed, level)


def coarsen_brownian(ens):
    """Inverse of ``refine_brownian``: pairwise sums of increments."""
    if ens.grid.steps % 2:
        raise ValueError("cannot coarsen an odd number of steps")
    inc = ens.increments[:, 0::2] + ens.increments[:, 1::2]
    return BrownianEnsemble(TimeGrid(ens.grid.horizon, ens.grid.steps // 2), ens.paths, inc, ens.seed,
                            max(ens.level - 1, 0))


def ito_integral(grid, integrand, ens):
    """Left-endpoint sums ``sum_n f_n dW_n`` per path.

    ``integrand`` has shape ``(steps,)`` or ``(paths, steps)``.
    """
    f = np.asarray(integrand)
    if ens.grid != grid:
        raise ValueError("ensemble grid does not match")
    if f.shape[-1] != grid.steps or (f.ndim == 2 and f.shape[0] != ens.paths) or f.ndim > 2:
        raise ValueError(f"integrand shape {f.shape} incompatible with ({ens.paths}, {grid.steps})")
    return np.sum(f * ens.increments, axis=-1)


def stochastic_convolution(gen, g, ens, k):
    """``sum_{n<k} S(t_k - t_n) g_n dW_n`` per path.

    ``g`` has shape ``(steps, dim)`` (deterministic) or ``(paths, steps, dim)``.
    """
    grid = ens.grid
    grid.check_node(k)
    g = np.asarray(g)
    if g.ndim == 2:
        g = np.broadcast_to(g, (ens.paths,) + g.shape)
    step = gen.propagator(grid.dt)
    acc = np.zeros((ens.paths, gen.space.dim), dtype=np.result_type(g, step))
    for n in range(k):
        acc = (acc + g[:, n, :] * ens.increments[:, n, None]) @ step.T
    return acc


@dataclass(frozen=True)
class McEstimate:
    mean: float
    sem: float
    paths: int

    def within(self, target, k_sem=3.0, bias=0.0):
        return abs(self.mean - target) <= k_sem * self.sem + bias


def mc_estimate(samples):
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("Monte Carlo estimate needs at least two samples")
    return McEstimate(float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size)), int(x.size))
