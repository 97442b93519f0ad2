"""Mild solutions by exponential-Euler stepping and by windowed Picard iteration."""
from dataclasses import dataclass, field

import numpy as np

from .system import as_input


class DivergenceError(FloatingPointError):
    def __init__(self, node):
        super().__init__(f"non-finite state at node {node}")
        self.node = node


class PicardError(RuntimeError):
    def __init__(self, window, iterations, ratio):
        super().__init__(f"Picard iteration did not converge on window {window} after {iterations} "
                         f"iterations (last contraction ratio {ratio})")
        self.window = window
        self.ratio = ratio


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States ``(paths, steps + 1, dim)``; ``states[:, 0] == Y0``."""

    grid: object
    states: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def paths(self):
        return self.states.shape[0]

    def output(self, sys):
        return sys.C(self.states)


def _initial(sys, Y0, paths):
    Y0 = np.asarray(Y0)
    Y0 = sys.H.check(Y0.astype(np.result_type(Y0.dtype, sys.dtype)))
    if Y0.ndim == 1:
        return np.broadcast_to(Y0, (paths, sys.dim)).astype(sys.dtype), True
    if Y0.shape[0] != paths:
        raise ValueError(f"Y0 has {Y0.shape[0]} paths, ensemble has {paths}")
    return Y0.astype(sys.dtype), False


def _path_count(sys, ens, u):
    if ens is not None:
        return ens.paths
    if not sys.noise_free:
        raise ValueError("a Brownian ensemble is required when F2 is nonzero")
    return u.values.shape[0] if u.adapted else 1


class _Stepper:
    """Shared one-step map ``Y -> S(dt)(Y + dt F1 X + dt B u + F2 X dW)``."""

    def __init__(self, sys, u, ens):
        self.sys = sys
        self.dt = sys.grid.dt
        self.S = sys.A.propagator(self.dt)
        self.forced = self.dt * sys.B(u.values)  # (steps, d) or (P, steps, d)
        self.ens = ens
        self.noisy = not sys.noise_free
        self.W = ens.W if ens is not None and (sys.adapted_F1 or sys.adapted_F2) else None

    def _apply(self, coeffs, hook, n, X):
        out = X @ coeffs[n].T
        if hook is not None:
            t = self.sys.grid.node_time(n)
            out = out + np.einsum("pij,pj->pi", hook(t, self.W[:, n]), X)
        return out

    def __call__(self, n, Y, X=None):
        X = Y if X is None else X
        sys = self.sys
        incr = Y + self.forced[..., n, :]
        if sys._f1_active[n] or sys.adapted_F1 is not None:
            incr = incr + self.dt * self._apply(sys.F1, sys.adapted_F1, n, X)
        if self.noisy:
            incr = incr + self._apply(sys.F2, sys.adapted_F2, n, X) * self.ens.increments[:, n, None]
        return incr @ self.S.T


def march(sys, Y0, u=None, ens=None):
    """Yield ``(n, Y_n)`` for ``n = 0..steps`` without storing the trajectory."""
    u = as_input(sys, u, ens.paths if ens is not None else None)
    if ens is not None and ens.grid != sys.grid:
        raise ValueError("ensemble grid does not match system grid")
    paths = _path_count(sys, ens, u)
    Y, deterministic = _initial(sys, Y0, paths)
    if sys.noise_free and deterministic and not u.adapted and sys.adapted_F1 is None:
        # every path is identical: march one and broadcast
        for n, y in march(sys, Y[:1], u, None):
            yield n, np.broadcast_to(y, (paths, sys.dim))
        return
    step = _Stepper(sys, u, ens)
    yield 0, Y
    for n in range(sys.grid.steps):
        Y = step(n, Y)
        if not np.all(np.isfinite(Y)):
            raise DivergenceError(n + 1)
        yield n + 1, Y


def mild_solve_stepping(sys, Y0, u=None, ens=None):
    """Exponential-Euler discretisation of the variation-of-constants formula."""
    first = None
    states = None
    for n, Y in march(sys, Y0, u, ens):
        if states is None:
            first = np.array(Y)
            states = np.empty((Y.shape[0], sys.grid.steps + 1, sys.dim), dtype=Y.dtype)
        states[:, n] = Y
    states[:, 0] = first
    prov = {"scheme": "exponential-euler", "seed": getattr(ens, "seed", None)}
    return Trajectory(sys.grid, states, prov)


def picard_window(sys, safety=2.0):
    """Largest window (in steps) whose contraction estimate is below ``1 / (2 * safety)``."""
    f1, f2 = sys.F1_bound, sys.F2_bound
    if sys.adapted_F1 is not None or sys.adapted_F2 is not None:
        raise ValueError("Picard windows need recorded coefficient bounds; adapted hooks are not bounded")
    if f1 == 0 and f2 == 0:
        return sys.grid.steps
    dt, target = sys.grid.dt, 0.5 / safety
    step = sys.A.propagator(dt)
    chol, inv = sys.H.chol, np.linalg.inv(sys.H.chol)
    prop, smax = np.eye(sys.dim), 1.0
    for w in range(1, sys.grid.steps + 1):
        prop = step @ prop
        smax = max(smax, float(np.linalg.norm(chol @ prop @ inv, 2)))
        tau = w * dt
        if smax * (f1 * tau + f2 * np.sqrt(tau)) > target:
            return max(w - 1, 1)
    return sys.grid.steps


def _mc_sup_distance(sys, X, Y):
    diff = X - Y
    sq = np.real(np.einsum("pni,ij,pnj->pn", diff, sys.H.gram, np.conj(diff)))
    return float(np.sqrt(np.max(np.mean(sq, axis=0))))


def mild_solve_picard(sys, Y0, u=None, ens=None, tol=1e-6, max_iter=60, window=None):
    """Fixed-point iteration of the mild-solution map on successive windows.

    Returns ``(trajectory, info)``; ``info`` holds per-window iteration counts
    and the largest measured ratio of successive iterate distances.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    u = as_input(sys, u, ens.paths if ens is not None else None)
    paths = _path_count(sys, ens, u)
    Y, _ = _initial(sys, Y0, paths)
    step = _Stepper(sys, u, ens)
    width = window or picard_window(sys)
    N = sys.grid.steps
    states = np.empty((paths, N + 1, sys.dim), dtype=Y.dtype)
    states[:, 0] = Y
    iterations, ratios, windows = [], [], []
    a = 0
    while a < N:
        b = min(a + width, N)
        windows.append((a, b))

        def apply_map(X):
            Z = np.empty_like(X)
            Z[:, 0] = states[:, a]
            for j in range(b - a):
                Z[:, j + 1] = step(a + j, Z[:, j], X[:, j])
            return Z

        X = apply_map(np.repeat(states[:, a:a + 1], b - a + 1, axis=1))
        prev, worst = None, 0.0
        for m in range(1, max_iter + 1):
            Xn = apply_map(X)
            delta = _mc_sup_distance(sys, Xn, X)
            if not np.isfinite(delta):
                raise FloatingPointError(f"Picard iterate diverged on window {(a, b)}")
            if prev is not None and prev > 1e3 * np.finfo(float).eps * (1 + np.max(np.abs(Xn))):
                worst = max(worst, delta / prev)
            X, prev = Xn, delta
            if delta < tol:
                break
        else:
            raise PicardError((a, b), max_iter, worst)
        iterations.append(m)
        ratios.append(worst)
        states[:, a:b + 1] = X
        a = b
    traj = Trajectory(sys.grid, states, {"scheme": "picard", "seed": getattr(ens, "seed", None), "tol": tol})
    info = {"window": width, "windows": windows, "iterations": iterations, "contraction": ratios}
    return traj, info
