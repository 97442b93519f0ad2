"""Stochastic heat equation on (0, L) with Neumann boundary control and trace observation.

Cell-centred finite volumes: ``x_i = (i + 1/2) h``. The control enters as a
boundary flux, the observation is the boundary trace by one-sided linear
extrapolation from the two cells next to each endpoint.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.ndimage

from .estimates import sampled_constant
from .solvers import Trajectory, mild_solve_stepping
from .spaces import DiscreteSpace, GeneratorRealization, LinearMap
from .stochastics import TimeGrid, mc_estimate
from .system import StochasticSystemRealization, as_input


def _field(value, steps, cells):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full((1, cells), float(arr))
    elif arr.ndim == 1:
        arr = arr[None]
    if arr.shape[1] != cells:
        raise ValueError(f"coefficient field must have {cells} cells, got {arr.shape[1]}")
    if steps % arr.shape[0]:
        raise ValueError(f"{arr.shape[0]} coefficient pieces do not divide {steps} steps")
    return np.repeat(arr, steps // arr.shape[0], axis=0)


@dataclass(frozen=True, eq=False)
class HeatModel:
    """``coeff_a``/``coeff_b``: scalar, ``(cells,)`` or ``(pieces, cells)`` fields."""

    length: float = np.pi
    cells: int = 16
    coeff_a: object = 0.0
    coeff_b: object = 0.0
    grid: TimeGrid = TimeGrid(1.0, 64)

    def __post_init__(self):
        if self.cells < 4:
            raise ValueError("heat model needs at least 4 cells (two-cell trace stencil per side)")
        if not self.length > 0:
            raise ValueError("length must be positive")
        object.__setattr__(self, "a", _field(self.coeff_a, self.grid.steps, self.cells))
        object.__setattr__(self, "b", _field(self.coeff_b, self.grid.steps, self.cells))

    @property
    def h(self):
        return self.length / self.cells

    @property
    def x(self):
        return (np.arange(self.cells) + 0.5) * self.h

    @property
    def sup_a(self):
        return float(np.max(np.abs(self.a)))

    @property
    def sup_b(self):
        return float(np.max(np.abs(self.b)))

    def refined(self, space=1, time=1):
        """Model with ``space`` times more cells and ``time`` times more steps."""
        grid = TimeGrid(self.grid.horizon, self.grid.steps * time)
        a, b = self.a, self.b
        if space > 1:
            a, b = np.repeat(a, space, axis=1), np.repeat(b, space, axis=1)
        return HeatModel(self.length, self.cells * space, np.repeat(a, time, axis=0),
                         np.repeat(b, time, axis=0), grid)

    def cosine_mode(self, k):
        return np.cos(k * np.pi * self.x / self.length)

    def eigenvalue(self, k):
        return -(4.0 / self.h ** 2) * np.sin(k * np.pi * self.h / (2 * self.length)) ** 2


def neumann_laplacian(cells, h):
    main = np.full(cells, -2.0)
    main[0] = main[-1] = -1.0  # ghost cell mirrors the boundary cell
    off = np.ones(cells - 1)
    return (np.diag(main) + np.diag(off, 1) + np.diag(off, -1)) / h ** 2


def build_heat_system(model):
    n, h = model.cells, model.h
    H = DiscreteSpace(n, h * np.eye(n), "H")
    U = DiscreteSpace.euclidean(2, "U")
    Ut = DiscreteSpace.euclidean(2, "Utilde")
    lap = neumann_laplacian(n, h)
    k = np.arange(n)
    modes = np.cos(np.pi * np.outer(model.x, k) / model.length)
    A = GeneratorRealization(H, lap, spectral=(model.eigenvalue(k), modes))
    B = np.zeros((n, 2))
    B[0, 0] = B[-1, 1] = 1.0 / h  # boundary fluxes (x = 0, x = L)
    C = np.zeros((2, n))
    C[0, :2] = (1.5, -0.5)
    C[1, -2:] = (-0.5, 1.5)
    F1 = model.a[:, :, None] * np.eye(n)
    F2 = model.b[:, :, None] * np.eye(n)
    return StochasticSystemRealization(H, U, Ut, A, LinearMap(U, H, B), LinearMap(H, Ut, C), model.grid,
                                       F1=F1, F2=F2, meta={"instance": "heat", "cells": n, "length": model.length})


def _lift_factor(model):
    n, h = model.cells, model.h
    lap = neumann_laplacian(n, h)
    # banded upper Cholesky storage of I - lap
    ab = np.zeros((2, n))
    ab[1] = 1.0 - np.diag(lap)
    ab[0, 1:] = -np.diag(lap, 1)
    return scipy.linalg.cholesky_banded(ab)


def neumann_lift(model, u_node, factor=None):
    """Solve ``v - Lap_h v = 0`` with Neumann data ``u_node`` (last axis = 2 sides)."""
    u_node = np.asarray(u_node, dtype=float)
    rhs = np.zeros(u_node.shape[:-1] + (model.cells,))
    rhs[..., 0] = u_node[..., 0] / model.h
    rhs[..., -1] = u_node[..., 1] / model.h
    factor = _lift_factor(model) if factor is None else factor
    flat = rhs.reshape(-1, model.cells).T
    v = scipy.linalg.cho_solve_banded((factor, False), flat)
    return v.T.reshape(rhs.shape)


def lift_residual(model, v, u_node):
    lap = neumann_laplacian(model.cells, model.h)
    rhs = np.zeros_like(v)
    rhs[..., 0] = np.asarray(u_node)[..., 0] / model.h
    rhs[..., -1] = np.asarray(u_node)[..., 1] / model.h
    return np.max(np.abs(v - v @ lap.T - rhs))


@dataclass(frozen=True)
class LiftedField:
    v: np.ndarray  # (steps + 1, cells)
    v_t: np.ndarray  # (steps + 1, cells)


def lifted_field(model, u):
    """Lifting at every node; ``u`` is ``(steps, 2)`` and is held at its last value at ``T``."""
    u = np.asarray(u, dtype=float)
    nodes_u = np.vstack([u, u[-1:]])
    v = neumann_lift(model, nodes_u)
    v_t = np.gradient(v, model.grid.dt, axis=0)  # centred inside, one-sided at the ends
    return LiftedField(v, v_t)


def lifted_solve(model, y0, u, ens=None):
    """Solve for ``y - v`` with homogeneous Neumann data, then add ``v`` back.

    With the regularised lifting ``Lap_h v = v``, the source becomes
    ``(a + 1) v - v_t``; the noise carries ``b (y~ + v)``.
    """
    sys = build_heat_system(model)
    u = as_input(sys, u).values
    if u.ndim != 2:
        raise ValueError("lifted_solve needs a deterministic control")
    if not np.any(u):
        return mild_solve_stepping(sys, y0, None, ens)
    if ens is not None and ens.grid != model.grid:
        raise ValueError("ensemble grid does not match model grid")
    lift = lifted_field(model, u)
    dt = model.grid.dt
    S = sys.A.propagator(dt)
    paths = ens.paths if ens is not None else 1
    y0 = np.asarray(y0, dtype=float)
    yt = np.broadcast_to(y0 - lift.v[0], (paths, model.cells)).copy()
    states = np.empty((paths, model.grid.steps + 1, model.cells))
    states[:, 0] = yt + lift.v[0]
    for n in range(model.grid.steps):
        a, b, v = model.a[n], model.b[n], lift.v[n]
        incr = yt + dt * (a * yt + (a + 1.0) * v - lift.v_t[n])
        if ens is not None and np.any(b):
            incr = incr + b * (yt + v) * ens.increments[:, n, None]
        yt = incr @ S.T
        states[:, n + 1] = yt + lift.v[n + 1]
    return Trajectory(model.grid, states, {"scheme": "lifted-exponential-euler", "seed": getattr(ens, "seed", None)})


def boundary_cells(y):
    return np.stack([y[..., 0], y[..., -1]], axis=-1)


def gradient_energy(model, y):
    """``|grad_h y|^2 = sum (y_{i+1} - y_i)^2 / h`` (equals ``-<Lap_h y, y>_H``)."""
    return np.sum(np.diff(y, axis=-1) ** 2, axis=-1) / model.h


def energy_balance(model, traj, u=None, ens=None):
    """Per-path ``(lhs, rhs)`` of the discrete energy identity at ``T``.

    ``lhs = |y(T)|^2 + 2 int |grad y|^2``;
    ``rhs = |y(0)|^2 + 2 int <u, y|_bdry> + 2 int a y^2 + int b^2 y^2``
    with left-rectangle quadrature. The martingale ``2 int <b y, y> dW`` has
    mean zero; when ``ens`` is given it is added per path, which only lowers
    the variance of the difference.
    """
    h, dt = model.h, model.grid.dt
    y = traj.states
    u = np.zeros((model.grid.steps, 2)) if u is None else np.asarray(u, dtype=float)
    yl = y[:, :-1]
    lhs = h * np.sum(y[:, -1] ** 2, axis=-1) + 2 * dt * np.sum(gradient_energy(model, yl), axis=-1)
    control = np.sum(boundary_cells(yl) * u, axis=(-1, -2))
    zero_order = h * np.sum((2 * model.a + model.b ** 2) * yl ** 2, axis=(-1, -2))
    rhs = h * np.sum(y[:, 0] ** 2, axis=-1) + dt * (2 * control + zero_order)
    if ens is not None and np.any(model.b):
        rhs = rhs + 2 * h * np.sum(model.b * yl ** 2 * ens.increments[..., None], axis=(-1, -2))
    return lhs, rhs


def energy_identity_residual(model, traj, u=None, ens=None):
    """``|E(lhs - rhs)|`` and its sem."""
    lhs, rhs = energy_balance(model, traj, u, ens)
    d = lhs - rhs
    if d.size < 2:
        return float(abs(d.mean())), 0.0
    est = mc_estimate(d)
    return abs(est.mean), est.sem


def trace_constant(model):
    """``max |C y|^2 / (|y|^2 + |grad_h y|^2)`` (discrete trace inequality)."""
    sys = build_heat_system(model)
    lap = neumann_laplacian(model.cells, model.h)
    form = model.h * (np.eye(model.cells) - lap)
    CtC = sys.C.matrix.T @ sys.C.matrix
    return float(scipy.linalg.eigh(CtC, form, eigvals_only=True)[-1])


def gronwall_bound(model, y0, u):
    """Discrete Gronwall constant bounding ``E|y(t)|^2 + E int |grad y|^2``.

    Young's inequality with the trace constant ``kappa`` gives
    ``e_k <= (|y0|^2 + 2 kappa |u|^2) + beta dt sum_{n<k} e_n`` with
    ``beta = 2 sup a + sup b^2 + 1/2``, hence ``e_k <= data * (1 + beta dt)^k``.
    """
    kappa = trace_constant(model)
    beta = max(2 * model.sup_a + model.sup_b ** 2 + 0.5, 0.0)
    data = model.h * np.sum(np.asarray(y0) ** 2) + 2 * kappa * model.grid.dt * np.sum(np.asarray(u) ** 2)
    growth = (1 + beta * model.grid.dt) ** np.arange(model.grid.steps + 1)
    return data * growth


def low_mode_sampler(model, modes=6, sides=2, freqs=4):
    """Resolution-independent (y0, u) draws: low cosine modes and low temporal frequencies."""
    def draw(rng, k):
        y0 = sum(rng.standard_normal() * model.cosine_mode(j) for j in range(modes))
        t = model.grid.nodes[:-1] / model.grid.horizon
        u = np.zeros((model.grid.steps, sides))
        for j in range(freqs):
            u += np.outer(np.cos(np.pi * j * t), rng.standard_normal(sides))
        u[k:] = 0
        return y0, u
    return draw


def heat_wellposed_constant(model, trials=8, paths=200, seed=0, observe=True):
    """Sampled constant at ``h`` and ``h/2`` (same draws, same noise).

    Returns ``{"value", "refined", "relative_change", "ratios"}``.
    """
    from .stochastics import sample_brownian

    out = {}
    for tag, m in (("value", model), ("refined", model.refined(space=2))):
        sys = build_heat_system(m)
        if not observe:
            sys = sys.with_observation(LinearMap(sys.H, sys.Utilde, np.zeros_like(sys.C.matrix)))
        ens = sample_brownian(m.grid, paths, seed) if not sys.noise_free else None
        est = sampled_constant(sys, trials, ens, seed, low_mode_sampler(m))
        out[tag] = est.value
        out.setdefault("ratios", {})[tag] = est.ratios
    out["relative_change"] = abs(out["refined"] - out["value"]) / out["value"]
    return out


def gronwall_chain(model, y0, u, ens=None):
    """``(e, bound)``: ``e_k = E|y_k|^2 + E sum_{n<k} |grad y_n|^2 dt`` and its Gronwall bound."""
    sys = build_heat_system(model)
    traj = mild_solve_stepping(sys, y0, u, ens)
    y = traj.states
    grad = np.concatenate([np.zeros((y.shape[0], 1)),
                           np.cumsum(gradient_energy(model, y[:, :-1]), axis=1) * model.grid.dt], axis=1)
    e = np.mean(model.h * np.sum(y ** 2, axis=-1) + grad, axis=0)
    return e, gronwall_bound(model, y0, u)


def steady_profile(model, q, mean):
    """Steady state ``q x + c`` for balanced fluxes ``(-q, q)`` and prescribed mean."""
    return q * model.x + (mean - q * model.length / 2)


def mollify(model, u, eps):
    """Gaussian smoothing of a control in time with width ``eps``."""
    return scipy.ndimage.gaussian_filter1d(np.asarray(u, dtype=float), eps / model.grid.dt, axis=0, mode="nearest")


def density_study(model, y0, u, eps_values):
    """Max-node ``H`` distance between ``lifted_solve(u_eps)`` and the direct solve with ``u``."""
    sys = build_heat_system(model)
    direct = mild_solve_stepping(sys, y0, u).states[0]
    out = []
    for eps in eps_values:
        lifted = lifted_solve(model, y0, mollify(model, u, eps)).states[0]
        out.append(float(np.max(sys.H.norm(lifted - direct))))
    return out
