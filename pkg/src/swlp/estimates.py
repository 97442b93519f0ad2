"""Residuals and constants built on the solvers: weak form, hidden regularity, gains."""
from dataclasses import dataclass

import numpy as np

from .solvers import march
from .spaces import adjoint, inner, semigroup_apply
from .stochastics import mc_estimate
from .system import as_input, input_map_phi


@dataclass(frozen=True)
class GainEstimate:
    value: float  # max over sampled directions
    q90: float
    sem: float  # Monte Carlo sem of the maximising sample
    ratios: np.ndarray


def weak_residual(sys, traj, psi, u=None, ens=None):
    """Per-path defect of the tested integral identity, shape ``(paths, steps + 1)``.

    The control term is paired as ``<u, B* psi>_U``.
    """
    if traj.grid != sys.grid or (ens is not None and ens.grid != sys.grid):
        raise ValueError("trajectory, ensemble and system grids differ")
    if sys.adapted_F1 is not None or sys.adapted_F2 is not None:
        raise ValueError("weak_residual supports recorded coefficients only, not adapted hooks")
    u = as_input(sys, u, traj.paths)
    dt = sys.grid.dt
    Y = traj.states
    astar_psi = psi @ sys.A.adjoint().matrix.T
    bstar_psi = adjoint(sys.B)(psi)
    drift = inner(sys.H, Y[:, :-1], astar_psi)
    drift = drift + inner(sys.H, np.einsum("nij,pnj->pni", sys.F1, Y[:, :-1]), psi)
    drift = drift + inner(sys.U, u.values, bstar_psi)
    terms = drift * dt
    if not sys.noise_free:
        noise = inner(sys.H, np.einsum("nij,pnj->pni", sys.F2, Y[:, :-1]), psi)
        terms = terms + noise * ens.increments
    lhs = inner(sys.H, Y, psi)
    R = np.zeros(lhs.shape, dtype=lhs.dtype)
    R[:, 1:] = lhs[:, 1:] - lhs[:, :1] - np.cumsum(terms, axis=-1)
    return R


def output_energy(sys, Y0, u, ens, upto):
    """Per-path cumulative ``sum_{m<n} |C Y_m|^2 dt`` for ``n = 0..upto``."""
    dt = sys.grid.dt
    cum = None
    for n, Y in march(sys, Y0, u, ens):
        if cum is None:
            cum = np.zeros((Y.shape[0], upto + 1))
        if n >= upto:
            break
        z = sys.C(Y)
        cum[:, n + 1] = cum[:, n] + np.real(sys.Utilde.norm(z) ** 2) * dt
    return cum


def _unit_vector(rng, space):
    while True:
        x = rng.standard_normal(space.dim)
        if space.is_complex:
            x = x + 1j * rng.standard_normal(space.dim)
        nrm = space.norm(x)
        if nrm > 0:
            return x / nrm


def hidden_regularity_ratio(sys, k, trials, ens=None, seed=0, samples=None):
    """Max over random unit ``Y0`` of ``E int_0^t |C Y|^2`` with ``u = 0``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng([seed, 0x4852])
    best, best_sem, values = -np.inf, 0.0, []
    for i in range(trials):
        Y0 = samples[i] if samples is not None else _unit_vector(rng, sys.H)
        Y0 = Y0 / sys.H.norm(Y0)
        per_path = output_energy(sys, Y0, None, ens, k)[:, k]
        mean = float(per_path.mean())
        sem = mc_estimate(per_path).sem if per_path.size > 1 else 0.0
        values.append(mean)
        if mean > best:
            best, best_sem = mean, sem
    values = np.array(values)
    return GainEstimate(float(best), float(np.quantile(values, 0.9)), best_sem, values)


def io_ratio(sys, k, Y0, u, ens=None):
    """``|C Y|_{L^2(0,t_k)} / (|Y0| + |u|_{L^2(0,t_k)})`` with MC expectations."""
    u = as_input(sys, u)
    y0_norm = sys.H.norm(Y0)
    u_norm = np.sqrt(u.l2_norm_sq(sys.grid.dt, sys.U, upto=k))
    denom = float(np.sqrt(np.mean(np.atleast_1d(y0_norm) ** 2)) + np.sqrt(np.mean(np.atleast_1d(u_norm) ** 2)))
    if denom == 0:
        raise ValueError("zero data: the gain quotient is undefined")
    truncated = np.array(u.values)
    truncated[..., k:, :] = 0
    energy = output_energy(sys, Y0, truncated, ens, k)[:, k]
    return float(np.sqrt(energy.mean()) / denom), energy


def gaussian_sampler(sys):
    """Default (Y0, u): independent Gaussians in the coordinate spaces."""
    def draw(rng, k):
        Y0 = rng.standard_normal(sys.dim)
        u = rng.standard_normal((sys.grid.steps, sys.U.dim))
        if sys.H.is_complex:
            Y0 = Y0 + 1j * rng.standard_normal(sys.dim)
        if sys.U.is_complex:
            u = u + 1j * rng.standard_normal(u.shape)
        u[k:] = 0
        return Y0, u
    return draw


def _normalised(sys, Y0, u, k):
    total = sys.H.norm(Y0) ** 2 + as_input(sys, u).l2_norm_sq(sys.grid.dt, sys.U, upto=k)
    return Y0 / np.sqrt(total), u / np.sqrt(total), total


def _draw_pairs(sys, trials, seed, k, sampler):
    sampler = sampler or gaussian_sampler(sys)
    rng = np.random.default_rng([seed, 0x494F])
    pairs = []
    while len(pairs) < trials:
        Y0, u = sampler(rng, k)
        Y0, u, total = _normalised(sys, Y0, u, k)
        if total > 0:  # zero data is redrawn
            pairs.append((Y0, u))
    return pairs


def io_gain(sys, k, trials, ens=None, seed=0, sampler=None):
    """Sampled surrogate for the input/output constant at ``t_k``.

    ``sampler(rng, k) -> (Y0, u)`` overrides the default Gaussian law.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ratios, sems = [], []
    for Y0, u in _draw_pairs(sys, trials, seed, k, sampler):
        r, energy = io_ratio(sys, k, Y0, u, ens)
        ratios.append(r)
        # delta method: sd(sqrt(m)) ~ sd(m) / (2 sqrt(m))
        mean = energy.mean()
        sems.append(r * mc_estimate(energy).sem / (2 * mean) if energy.size > 1 and mean > 0 else 0.0)
    ratios = np.array(ratios)
    i = int(np.argmax(ratios))
    return GainEstimate(float(ratios[i]), float(np.quantile(ratios, 0.9)), float(sems[i]), ratios)


def concatenation_check(sys, k0, u):
    """``|Phi_{2t0} u - S(t0) Phi_{t0} u - Phi_{t0} u(t0 + .)|_H``."""
    if 2 * k0 > sys.grid.steps:
        raise ValueError("2 * t0 exceeds the horizon")
    u = as_input(sys, u).values
    shifted = np.zeros_like(u)
    shifted[..., : u.shape[-2] - k0, :] = u[..., k0:, :]
    t0 = sys.grid.node_time(k0)
    lhs = input_map_phi(sys, 2 * k0, u)
    rhs = semigroup_apply(sys.A, t0, input_map_phi(sys, k0, u)) + input_map_phi(sys, k0, shifted)
    return float(np.max(sys.H.norm(lhs - rhs)))


def gain_extension_curve(sys, nodes, trials, ens=None, seed=0, sampler=None):
    """``[(t, C(t))]`` over increasing ``nodes`` with a shared ensemble.

    Each sampled input is also tested truncated at every earlier node, so
    the returned curve is nondecreasing.
    """
    nodes = list(nodes)
    if any(b <= a for a, b in zip(nodes, nodes[1:])):
        raise ValueError("nodes must be increasing")
    last = nodes[-1]
    best = np.zeros(len(nodes))
    dt = sys.grid.dt
    for Y0, u in _draw_pairs(sys, trials, seed, last, sampler):
        y0_norm = sys.H.norm(Y0)
        for j, kj in enumerate(nodes):
            trunc = np.array(u)
            trunc[kj:] = 0
            u_norm = np.sqrt(as_input(sys, trunc).l2_norm_sq(dt, sys.U))
            denom = y0_norm + u_norm
            if denom == 0:
                continue
            cum = output_energy(sys, Y0, trunc, ens, last).mean(axis=0)
            for i in range(j, len(nodes)):
                best[i] = max(best[i], np.sqrt(cum[nodes[i]]) / denom)
    return [(sys.grid.node_time(k), float(c)) for k, c in zip(nodes, best)]


def wellposed_ratio(sys, Y0, u, ens):
    """``(sup_t (E|y(t)|_H^2)^1/2 + (E int |C y|^2)^1/2) / (|y0|_H + |u|_{L2})``."""
    dt = sys.grid.dt
    state_sq = 0.0
    obs = None
    for n, Y in march(sys, Y0, u, ens):
        state_sq = max(state_sq, float(np.mean(sys.H.norm(Y) ** 2)))
        if n < sys.grid.steps:
            z = np.real(sys.Utilde.norm(sys.C(Y)) ** 2) * dt
            obs = z if obs is None else obs + z
    u_norm = np.sqrt(as_input(sys, u).l2_norm_sq(dt, sys.U))
    denom = float(sys.H.norm(np.asarray(Y0)) + u_norm)
    return (np.sqrt(state_sq) + np.sqrt(np.mean(obs))) / denom


def sampled_constant(sys, trials, ens, seed, sampler=None):
    """Max of ``wellposed_ratio`` over ``trials`` normalised draws (``sem`` is not tracked)."""
    ratios = np.array([wellposed_ratio(sys, Y0, u, ens)
                       for Y0, u in _draw_pairs(sys, trials, seed, sys.grid.steps, sampler)])
    return GainEstimate(float(ratios.max()), float(np.quantile(ratios, 0.9)), 0.0, ratios)
