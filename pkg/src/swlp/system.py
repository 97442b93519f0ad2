"""The abstract controlled system dY = (A + F1)Y dt + Bu dt + F2 Y dW, Z = C Y.

Input map, output map and the admissibility constants live here; solvers and
estimators are in :mod:`swlp.solvers` and :mod:`swlp.estimates`.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .spaces import LinearMap, SpaceError, adjoint
from .stochastics import TimeGrid


def _coefficients(value, dim, steps, name):
    """Normalise a coefficient to shape ``(steps, dim, dim)`` (read-only view)."""
    if value is None:
        arr = np.zeros((1, dim, dim))
    else:
        arr = np.asarray(value)
        if arr.ndim == 2:
            arr = arr[None]
    if arr.shape[1:] != (dim, dim):
        raise SpaceError(f"{name}: matrices must be {dim}x{dim}, got {arr.shape[1:]}")
    if arr.shape[0] == 1:
        arr = np.broadcast_to(arr, (steps, dim, dim))
    elif arr.shape[0] != steps:
        if steps % arr.shape[0]:
            raise SpaceError(f"{name}: {arr.shape[0]} pieces do not divide {steps} steps")
        arr = np.repeat(arr, steps // arr.shape[0], axis=0)
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StochasticSystemRealization:
    """Discrete realization of the system on a fixed time grid.

    ``F1``/``F2`` are piecewise constant per step, given as one matrix or as
    ``(pieces, dim, dim)`` with ``pieces`` dividing ``grid.steps``.
    ``adapted_F1``/``adapted_F2`` optionally add path-dependent parts
    ``f(t_n, W(t_n)) -> (paths, dim, dim)``.
    """

    H: object
    U: object
    Utilde: object
    A: object
    B: LinearMap
    C: LinearMap
    grid: TimeGrid
    F1: object = None
    F2: object = None
    adapted_F1: object = None
    adapted_F2: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = self.H.dim
        if self.A.space.dim != d:
            raise SpaceError("generator dimension does not match H")
        if self.B.domain.dim != self.U.dim or self.B.codomain.dim != d:
            raise SpaceError(f"B must map U({self.U.dim}) -> H({d}), got {self.B.matrix.shape}")
        if self.C.domain.dim != d or self.C.codomain.dim != self.Utilde.dim:
            raise SpaceError(f"C must map H({d}) -> Utilde({self.Utilde.dim}), got {self.C.matrix.shape}")
        object.__setattr__(self, "F1", _coefficients(self.F1, d, self.grid.steps, "F1"))
        object.__setattr__(self, "F2", _coefficients(self.F2, d, self.grid.steps, "F2"))
        # coefficients are read-only, so these flags can be computed once
        object.__setattr__(self, "_f1_active", np.any(self.F1, axis=(1, 2)))
        object.__setattr__(self, "_f2_zero", not np.any(self.F2))

    @property
    def dim(self):
        return self.H.dim

    @property
    def dtype(self):
        kinds = [self.A.propagator(self.grid.dt), self.B.matrix, self.C.matrix, self.F1, self.F2]
        if self.H.is_complex:
            return np.complex128
        return np.result_type(np.float64, *kinds)

    @property
    def noise_free(self):
        return self.adapted_F2 is None and self._f2_zero

    def _bound(self, coeffs):
        core = self.H.chol
        inv = np.linalg.inv(core)
        uniq = {coeffs[n].tobytes(): coeffs[n] for n in range(coeffs.shape[0])}
        return max((float(np.linalg.norm(core @ m @ inv, 2)) for m in uniq.values()), default=0.0)

    @property
    def F1_bound(self):
        return self._bound(self.F1)

    @property
    def F2_bound(self):
        return self._bound(self.F2)

    def with_grid(self, grid):
        """Same system on another grid (coefficients refined piecewise)."""
        f1, f2 = self.F1, self.F2
        if grid.steps != self.grid.steps:
            f1, f2 = self._regrid(f1, grid), self._regrid(f2, grid)
        return replace(self, grid=grid, F1=f1, F2=f2)

    def _regrid(self, coeffs, grid):
        if grid.steps % self.grid.steps == 0:
            return np.repeat(coeffs, grid.steps // self.grid.steps, axis=0)
        if self.grid.steps % grid.steps == 0:
            return coeffs[:: self.grid.steps // grid.steps]
        raise SpaceError("grids are not nested")

    def with_observation(self, C):
        return replace(self, C=C, Utilde=C.codomain)

    def with_coefficients(self, F1=None, F2=None):
        return replace(self, F1=F1, F2=F2, adapted_F1=None, adapted_F2=None)


@dataclass(frozen=True, eq=False)
class InputSignal:
    """Control values per step: ``(steps, m)`` deterministic or ``(paths, steps, m)`` adapted."""

    values: np.ndarray

    @property
    def adapted(self):
        return self.values.ndim == 3

    def l2_norm_sq(self, dt, space, upto=None):
        """``int_0^t |u|_U^2`` per path (scalar when deterministic)."""
        v = self.values[..., :upto, :]
        return np.sum(np.real(space.norm(v) ** 2), axis=-1) * dt


def as_input(sys, u, paths=None):
    """Coerce ``u`` (None, array or InputSignal) to an InputSignal on ``sys.grid``."""
    if isinstance(u, InputSignal):
        vals = u.values
    elif u is None:
        vals = np.zeros((sys.grid.steps, sys.U.dim))
    else:
        vals = np.asarray(u)
        if vals.ndim == 1 and sys.U.dim == 1:
            vals = vals[:, None]
    if vals.shape[-2:] != (sys.grid.steps, sys.U.dim) or vals.ndim not in (2, 3):
        raise SpaceError(f"input shape {vals.shape} incompatible with ({sys.grid.steps}, {sys.U.dim})")
    if vals.ndim == 3 and paths is not None and vals.shape[0] != paths:
        raise SpaceError(f"adapted input has {vals.shape[0]} paths, ensemble has {paths}")
    return InputSignal(vals)


def input_map_phi(sys, k, u):
    """``sum_{n<k} S(t_k - t_n) B u_n dt`` (per path when ``u`` is adapted)."""
    sys.grid.check_node(k)
    u = as_input(sys, u)
    step = sys.A.propagator(sys.grid.dt)
    forced = sys.grid.dt * sys.B(u.values)
    acc = np.zeros(forced.shape[:-2] + (sys.dim,), dtype=np.result_type(forced, step))
    for n in range(k):
        acc = (acc + forced[..., n, :]) @ step.T
    return acc


def input_map_increments(sys, u):
    """``|Phi_{k+1} u - Phi_k u|_H`` for ``k = 0..steps-1`` (deterministic ``u``)."""
    u = as_input(sys, u)
    if u.adapted:
        raise ValueError("increments are defined for a deterministic input")
    step = sys.A.propagator(sys.grid.dt)
    forced = sys.grid.dt * sys.B(u.values)
    acc = np.zeros(sys.dim, dtype=np.result_type(forced, step))
    out = np.empty(sys.grid.steps)
    for n in range(sys.grid.steps):
        new = (acc + forced[n]) @ step.T
        out[n] = sys.H.norm(new - acc)
        acc = new
    return out


def output_map_psi(sys, k, eta):
    """Node function ``s -> C S(s) eta`` for ``t_s <= t_k`` and zero after.

    Returns shape ``(steps + 1, dim(Utilde))``.
    """
    sys.grid.check_node(k)
    eta = sys.H.check(eta)
    step = sys.A.propagator(sys.grid.dt)
    out = np.zeros((sys.grid.steps + 1, sys.Utilde.dim), dtype=np.result_type(eta, step, sys.C.matrix))
    state = np.array(eta, dtype=out.dtype)
    for j in range(k + 1):
        out[j] = sys.C(state)
        state = state @ step.T
    return out


def phi_matrix(sys, k):
    """Assembled input map ``(dim H) x (k * dim U)``; column block ``n`` acts on ``u_n``."""
    sys.grid.check_node(k)
    step = sys.A.propagator(sys.grid.dt)
    blocks = []
    block = step @ sys.B.matrix * sys.grid.dt
    for _ in range(k):
        blocks.append(block)
        block = step @ block
    blocks.reverse()  # block n carries S((k - n) dt)
    if not blocks:
        return np.zeros((sys.dim, 0))
    return np.hstack(blocks)


def psi_matrix(sys, k, nodes=None):
    """Stacked ``C S(t_j)`` for ``j`` in ``nodes`` (default ``0..k-1``, left rule)."""
    nodes = range(k) if nodes is None else nodes
    step = sys.A.propagator(sys.grid.dt)
    nodes = list(nodes)
    powers, prop, at = {}, np.eye(sys.dim, dtype=step.dtype), 0
    for j in sorted(set(nodes)):
        while at < j:
            prop, at = step @ prop, at + 1
        powers[j] = sys.C.matrix @ prop
    if not nodes:
        return np.zeros((0, sys.dim))
    return np.vstack([powers[j] for j in nodes])


def _block_diag_chol(space, blocks):
    return np.kron(np.eye(blocks), space.chol)


def control_admissibility_constant(sys, k):
    """Smallest ``C`` with ``|Phi_t u|_H^2 <= C int_0^t |u|_U^2`` on the grid."""
    if k == 0:
        return 0.0
    phi = phi_matrix(sys, k)
    weighted = sys.H.chol @ phi @ np.linalg.inv(_block_diag_chol(sys.U, k)) / np.sqrt(sys.grid.dt)
    return float(np.linalg.norm(weighted, 2) ** 2)


def observation_admissibility_constant(sys, k):
    """Smallest ``C`` with ``int_0^t |C S(s) eta|^2 ds <= C |eta|_H^2`` on the grid."""
    if k == 0:
        return 0.0
    psi = psi_matrix(sys, k)
    weighted = _block_diag_chol(sys.Utilde, k) @ psi @ np.linalg.inv(sys.H.chol) * np.sqrt(sys.grid.dt)
    return float(np.linalg.norm(weighted, 2) ** 2)


def dual_system(sys):
    """System with generator ``A*`` and observation ``B*`` (used for duality checks)."""
    bstar = adjoint(sys.B)
    return StochasticSystemRealization(sys.H, sys.Utilde, sys.U, sys.A.adjoint(), adjoint(sys.C), bstar,
                                       sys.grid)
