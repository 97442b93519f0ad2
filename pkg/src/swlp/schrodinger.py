"""Stochastic Schrodinger equation on (0, pi) with Dirichlet boundary control.

State space ``H = H^{-1}(0, pi)`` in the sine basis ``e_k = sqrt(2/pi) sin(kx)``,
where ``|e_k|_{H^-1}^2 = 1/k^2``. Multiplication by the coefficients ``a`` and
``b`` goes through collocation at the interior DST-I points ``x_j = j pi / (K+1)``.
The observation is ``-i d_nu (-Delta)^{-1} y`` on the controlled endpoints.
"""
from dataclasses import dataclass

import numpy as np

from .estimates import sampled_constant
from .solvers import mild_solve_stepping
from .spaces import DiscreteSpace, GeneratorRealization, LinearMap, inner
from .stochastics import TimeGrid, mc_estimate, refine_brownian

SQ = np.sqrt(2 / np.pi)
SIDES = (0.0, np.pi)


def _side_index(side):
    for i, s in enumerate(SIDES):
        if np.isclose(side, s):
            return i
    raise ValueError(f"control side must be 0 or pi, got {side}")


def _evaluate(value, x):
    if callable(value):
        return np.asarray(value(x), dtype=complex) * np.ones_like(x)
    arr = np.asarray(value, dtype=complex)
    if arr.ndim == 0:
        return np.full(x.shape, complex(arr))
    if arr.shape != x.shape:
        raise ValueError(f"coefficient table must hold {x.size} values (endpoints included), got {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class SchrodingerModel:
    """``coeff_a``/``coeff_b``: callables of ``x``, scalars, or tables on the
    ``K + 2`` collocation nodes including both endpoints.

    ``boundary_check=False`` lifts the vanishing-at-endpoints requirement; it
    exists for closed-form tests with constant coefficients.
    """

    modes: int = 16
    coeff_a: object = 0.0
    coeff_b: object = 0.0
    control_side: tuple = (0.0,)
    grid: TimeGrid = TimeGrid(1.0, 64)
    boundary_check: bool = True

    def __post_init__(self):
        if self.modes < 8:
            raise ValueError("Schrodinger model needs at least 8 modes")
        sides = tuple(sorted({_side_index(s) for s in np.atleast_1d(self.control_side)}))
        if not sides:
            raise ValueError("control_side must name at least one endpoint")
        object.__setattr__(self, "sides", sides)
        nodes = np.arange(self.modes + 2) * np.pi / (self.modes + 1)
        a, b = _evaluate(self.coeff_a, nodes), _evaluate(self.coeff_b, nodes)
        if self.boundary_check:
            for name, v in (("a", a), ("b", b)):
                if max(abs(v[0]), abs(v[-1])) > 1e-10:
                    raise ValueError(f"coefficient {name} must vanish at both endpoints")
        object.__setattr__(self, "a_values", a[1:-1])
        object.__setattr__(self, "b_values", b[1:-1])

    @property
    def k(self):
        return np.arange(1, self.modes + 1)

    @property
    def lam(self):
        return self.k.astype(float) ** 2

    @property
    def x(self):
        return self.k * np.pi / (self.modes + 1)

    def refined(self, modes=2, time=1):
        return SchrodingerModel(self.modes * modes, self.coeff_a, self.coeff_b,
                                tuple(SIDES[s] for s in self.sides),
                                TimeGrid(self.grid.horizon, self.grid.steps * time), self.boundary_check)

    def with_grid(self, grid):
        return SchrodingerModel(self.modes, self.coeff_a, self.coeff_b, tuple(SIDES[s] for s in self.sides),
                                grid, self.boundary_check)


def collocation(model):
    """``(T, T^-1)``: mode coefficients to interior point values and back."""
    S = np.sin(np.outer(model.x, model.k))
    return SQ * S, np.sqrt(np.pi / 2) * (2.0 / (model.modes + 1)) * S.T


def multiplication(model, values):
    T, Tinv = collocation(model)
    return Tinv @ (values[:, None] * T)


def dirichlet_map(model, datum):
    """Sine coefficients of the affine extension of ``(y(0), y(pi))``."""
    d0, dpi = np.asarray(datum, dtype=complex)[..., 0], np.asarray(datum, dtype=complex)[..., 1]
    k = model.k
    return SQ / k * (d0[..., None] + (-1.0) ** (k + 1) * dpi[..., None])


def dirichlet_l2_norm(model, datum):
    """``|Upsilon u|_{L2}`` from the (orthonormal) sine coefficients."""
    return np.sqrt(np.sum(np.abs(dirichlet_map(model, datum)) ** 2, axis=-1))


def _upsilon_columns(model):
    cols = []
    for s in model.sides:
        datum = np.zeros(2)
        datum[s] = 1.0
        cols.append(dirichlet_map(model, datum))
    return np.stack(cols, axis=1)


def inverse_A(model, y):
    """``(-Delta)^{-1}`` in mode coordinates."""
    return np.asarray(y) / model.lam


def normal_derivative(model, w):
    """Outward normal derivative of ``sum w_k e_k`` on the controlled endpoints."""
    k = model.k
    rows = {0: -SQ * k, 1: SQ * k * (-1.0) ** k}
    return np.stack([np.asarray(w) @ rows[s] for s in model.sides], axis=-1)


def observation_matrix(model):
    """Rows of ``f -> -i d_nu (-Delta)^{-1} f`` on the controlled endpoints."""
    return np.stack([-1j * normal_derivative(model, np.eye(model.modes)[i] / model.lam) for i in range(model.modes)],
                    axis=1)


def bstar_trace(model, f):
    """Closed-form ``B* f``: ``i sqrt(2/pi) sum f_k / k`` at 0, ``-i sqrt(2/pi) sum (-1)^k f_k / k`` at pi."""
    f = np.asarray(f)
    k = model.k
    rows = {0: 1j * SQ / k, 1: -1j * SQ * (-1.0) ** k / k}
    return np.stack([f @ rows[s] for s in model.sides], axis=-1)


def build_schrodinger_system(model):
    from .system import StochasticSystemRealization

    H = DiscreteSpace(model.modes, 1.0 / model.lam, "H^-1", is_complex=True)
    U = DiscreteSpace.euclidean(len(model.sides), "U", is_complex=True)
    A = GeneratorRealization.diagonal(H, 1j * model.lam, group=True)
    B = -1j * model.lam[:, None] * _upsilon_columns(model)
    J = multiplication(model, model.a_values)
    K = multiplication(model, model.b_values)
    return StochasticSystemRealization(
        H, U, U, A, LinearMap(U, H, B), LinearMap(H, U, observation_matrix(model)), model.grid,
        F1=J, F2=K, meta={"instance": "schrodinger", "modes": model.modes, "sides": list(model.sides)},
    )


def gram_adjoint(model, M):
    """``G^-1 M^H G`` for the diagonal ``H^-1`` Gram."""
    g = 1.0 / model.lam
    return (M.conj().T * g[None, :]) / g[:, None]


# -- transformed field -------------------------------------------------------

def transformed_field(model, traj):
    """``w~ = A^{-1} y`` along a trajectory."""
    return inverse_A(model, traj.states)


def transformed_step_defect(model, traj, u, ens, sign=1.0):
    """Max defect of the one-step recursion for ``w~`` with noise ``sign * A^{-1}(b y) dW``.

    ``A^{-1}`` commutes with the group, so the recursion is exact for
    ``sign = +1``; any other sign leaves an O(1) defect on noisy paths.
    """
    sys = build_schrodinger_system(model)
    w = transformed_field(model, traj)
    Y = traj.states
    S = sys.A.propagator(model.grid.dt)
    dt = model.grid.dt
    u = np.zeros((model.grid.steps, len(model.sides))) if u is None else np.asarray(u)
    drift = inverse_A(model, Y[:, :-1] @ sys.F1[0].T + sys.B(u))
    noise = inverse_A(model, Y[:, :-1] @ sys.F2[0].T) * ens.increments[..., None]
    pred = (w[:, :-1] + dt * drift + sign * noise) @ S.T
    return float(np.max(np.abs(pred - w[:, 1:])))


# -- backward equation and duality --------------------------------------------

@dataclass(frozen=True)
class BackwardSolution:
    v: np.ndarray  # (steps + 1, modes)
    V: np.ndarray  # (steps + 1, modes), zero for deterministic terminal data


def backward_adjoint_solve(model, v_T, grid=None):
    """Discrete adjoint of the forward stepping, run backward from ``v_T``.

    ``v_n = (I + dt J)^* S(dt)^* v_{n+1}`` with Gram adjoints, so
    ``<Y_{n+1}, v_{n+1}> - <Y_n, v_n>`` reduces to control and martingale
    terms. Only deterministic terminal data is supported; then ``V = 0``.
    """
    v_T = np.asarray(v_T)
    if v_T.ndim != 1:
        raise NotImplementedError("random terminal data needs a martingale representation; only deterministic v_T "
                                  "is supported")
    if v_T.shape != (model.modes,):
        raise ValueError(f"v_T must have {model.modes} mode coefficients")
    if grid is not None and grid != model.grid:
        raise ValueError("grid does not match the model grid")
    sys = build_schrodinger_system(model)
    dt, N = model.grid.dt, model.grid.steps
    step = gram_adjoint(model, np.eye(model.modes) + dt * sys.F1[0]) @ gram_adjoint(model, sys.A.propagator(dt))
    v = np.empty((N + 1, model.modes), dtype=complex)
    v[N] = v_T
    for n in range(N - 1, -1, -1):
        v[n] = step @ v[n + 1]
    return BackwardSolution(v, np.zeros_like(v))


def duality_pairing(model, y0, u, v_T, ens=None, compensate=True):
    """Per-path ``<Y_N, v_T> - <y0, v_0> - sum dt <u_n, B* v_n>`` (complex).

    With ``compensate`` the Ito martingale ``sum dW_n <K Y_n, S(dt)^* v_{n+1}>``
    is subtracted path by path. It has mean zero, so the expectation is
    unchanged and only the O(dt) drift defect is left.
    """
    sys = build_schrodinger_system(model)
    if ens is not None and ens.grid != model.grid:
        raise ValueError("ensemble grid does not match the model grid")
    u = np.zeros((model.grid.steps, len(model.sides)), dtype=complex) if u is None else np.asarray(u)
    traj = mild_solve_stepping(sys, y0, u, ens)
    back = backward_adjoint_solve(model, v_T)
    bstar_v = bstar_trace(model, back.v[:-1])
    control = np.sum(inner(sys.U, u, bstar_v), axis=-1) * model.grid.dt
    d = inner(sys.H, traj.states[:, -1], v_T) - inner(sys.H, np.asarray(y0), back.v[0]) - control
    if compensate and ens is not None and not sys.noise_free:
        shifted = back.v[1:] @ gram_adjoint(model, sys.A.propagator(model.grid.dt)).T
        noise = traj.states[:, :-1] @ sys.F2[0].T
        d = d - np.sum(inner(sys.H, noise, shifted) * ens.increments, axis=-1)
    return d


def duality_residual(model, y0, u, v_T, ens=None, compensate=True):
    """``(|E pairing|, sem)``; the sem combines real and imaginary parts."""
    d = duality_pairing(model, y0, u, v_T, ens, compensate)
    if d.size < 2:
        return float(np.abs(d.mean())), 0.0
    re, im = mc_estimate(d.real), mc_estimate(d.imag)
    return float(np.hypot(re.mean, im.mean)), float(np.hypot(re.sem, im.sem))


def backward_trace_energy(model, v_T):
    """``int_0^T |d_nu w|^2 dt / |v_T|^2_{H^-1}`` for ``w = A^{-1} v``."""
    back = backward_adjoint_solve(model, v_T)
    dn = normal_derivative(model, inverse_A(model, back.v[:-1]))
    energy = np.sum(np.abs(dn) ** 2) * model.grid.dt
    return float(energy / np.sum(np.abs(v_T) ** 2 / model.lam))


def low_mode_terminal(model, rng, low=6):
    v = np.zeros(model.modes, dtype=complex)
    v[:low] = rng.standard_normal(low) + 1j * rng.standard_normal(low)
    return v


# -- well-posedness constant ---------------------------------------------------

def low_mode_sampler(model, low=6, freqs=4):
    """Resolution-independent complex (y0, u) draws."""
    def draw(rng, k):
        y0 = np.zeros(model.modes, dtype=complex)
        y0[:low] = (rng.standard_normal(low) + 1j * rng.standard_normal(low)) * model.k[:low]
        t = model.grid.nodes[:-1] / model.grid.horizon
        u = np.zeros((model.grid.steps, len(model.sides)), dtype=complex)
        for j in range(freqs):
            coef = rng.standard_normal(len(model.sides)) + 1j * rng.standard_normal(len(model.sides))
            u += np.outer(np.cos(np.pi * j * t), coef)
        u[k:] = 0
        return y0, u
    return draw


def schrodinger_wellposed_constant(model, trials=8, paths=200, seed=0, observe=True):
    """Sampled constant at ``K`` and ``2K`` modes (same draws, same noise).

    The observation is evaluated as ``-i d_nu w~`` with ``w~ = A^{-1} y``.
    """
    from .stochastics import sample_brownian

    out = {"ratios": {}}
    for tag, m in (("value", model), ("refined", model.refined(modes=2))):
        sys = build_schrodinger_system(m)
        if not observe:
            sys = sys.with_observation(LinearMap(sys.H, sys.Utilde, np.zeros_like(sys.C.matrix)))
        ens = sample_brownian(m.grid, paths, seed) if not sys.noise_free else None
        est = sampled_constant(sys, trials, ens, seed, low_mode_sampler(m))
        out[tag] = est.value
        out["ratios"][tag] = est.ratios
    out["relative_change"] = abs(out["refined"] - out["value"]) / out["value"]
    return out


# -- multiplier identity ---------------------------------------------------------

TERM_NAMES = (
    "div_i_mu_phibar_x_phi_x", "div_i_mu_phi_x_phibar_x", "div_phi_dphibar_mu", "div_i_grad_sq_mu",
    "d_mu_phibar_x_phi", "sym_grad_mu", "div_mu_grad_sq", "div_mu_phi_dphibar", "covariation",
)


@dataclass(frozen=True, eq=False)
class MultiplierFieldSpec:
    """Multiplier ``mu(x)`` and test field on ``[0, pi]`` sampled at ``points`` nodes.

    Either ``phi(x, t)`` (deterministic) or ``f``/``g`` for the semimartingale
    ``f(x) W(t) + g(x) t``. ``noise_at="terminal"`` evaluates ``W(T)`` in place
    of ``W(t)``, which is not adapted and is rejected by the residual.
    """

    mu: object
    phi: object = None
    f: object = None
    g: object = None
    points: int = 129
    noise_at: str = "node"

    def __post_init__(self):
        if (self.phi is None) == (self.f is None):
            raise ValueError("give either phi or the semimartingale pair (f, g)")
        if self.points < 5:
            raise ValueError("need at least 5 collocation points")
        if self.noise_at not in ("node", "terminal"):
            raise ValueError("noise_at must be 'node' or 'terminal'")
        mu_x = np.gradient(self.mu_values(self.x), self.x, edge_order=2)
        if not np.all(np.isfinite(mu_x)):
            raise ValueError("mu is not differentiable on the grid")

    @property
    def x(self):
        return np.linspace(0.0, np.pi, self.points)

    @property
    def stochastic(self):
        return self.phi is None

    def mu_values(self, x):
        return np.asarray(self.mu(x), dtype=float) * np.ones_like(x)

    def refined(self):
        return MultiplierFieldSpec(self.mu, self.phi, self.f, self.g, 2 * self.points - 1, self.noise_at)

    def field(self, grid, ens=None, rows=slice(None)):
        """Values ``(paths, steps + 1, points)`` for the paths selected by ``rows``."""
        x, t = self.x, grid.nodes
        if not self.stochastic:
            return np.asarray(self.phi(x[None, :], t[:, None]), dtype=complex)[None] * np.ones((1, t.size, x.size))
        if ens is None:
            raise ValueError("a semimartingale field needs a Brownian ensemble")
        W = ens.W[rows]
        if self.noise_at == "terminal":
            W = np.repeat(W[:, -1:], W.shape[1], axis=1)
        f = np.asarray(self.f(x), dtype=complex) * np.ones_like(x)
        g = np.zeros_like(f) if self.g is None else np.asarray(self.g(x), dtype=complex) * np.ones_like(x)
        return W[..., None] * f + t[None, :, None] * g


def multiplier_terms(spec, grid, ens=None, chunk=None):
    """Per-path space-time integrals: ``(lhs, terms)`` with ``terms[..., j]`` for ``TERM_NAMES[j]``.

    Time differentials are forward increments, so the product rule
    ``d(pq) = p dq + q dp + dp dq`` holds exactly and only the O(h^2)
    spatial derivatives and quadrature remain.
    """
    if spec.stochastic and spec.noise_at != "node":
        raise ValueError("the test field is not adapted: it reads W at a later time")
    paths = ens.paths if spec.stochastic else 1
    chunk = chunk or max(1, int(2e6 // ((grid.steps + 1) * spec.points)))
    parts = [_terms_block(spec, grid, ens, slice(a, min(a + chunk, paths))) for a in range(0, paths, chunk)]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _terms_block(spec, grid, ens, rows):
    x, dt = spec.x, grid.dt
    mu = spec.mu_values(x)
    mu_x = np.gradient(mu, x, edge_order=2)
    Phi = spec.field(grid, ens, rows)
    Phi_x = np.gradient(Phi, x, axis=-1, edge_order=2)
    Phi_xx = np.gradient(Phi_x, x, axis=-1, edge_order=2)
    p, px, pxx = Phi[:, :-1], Phi_x[:, :-1], Phi_xx[:, :-1]
    dp, dpx = np.diff(Phi, axis=1), np.diff(Phi_x, axis=1)
    pb, pxb, pxxb, dpb, dpxb = (np.conj(q) for q in (p, px, pxx, dp, dpx))
    grad_sq = np.abs(px) ** 2

    def ddx(q):
        return np.gradient(q, x, axis=-1, edge_order=2)

    lhs = mu * pxb * (dp + 1j * pxx * dt) - mu * px * (dpb - 1j * pxxb * dt)
    corner = mu * np.conj(Phi_x) * Phi
    terms = [
        ddx(1j * mu * pxb * px) * dt,
        ddx(1j * mu * px * pxb) * dt,
        -ddx(mu * p * dpb),
        -ddx(1j * mu * grad_sq) * dt,
        np.diff(corner, axis=1),
        -2j * mu_x * grad_sq * dt,
        1j * mu_x * grad_sq * dt,
        mu_x * p * dpb,
        -mu * dpxb * dp,
    ]

    def integrate(q):
        return np.sum(np.trapezoid(q, x, axis=-1), axis=-1)

    return integrate(lhs), np.stack([integrate(q) for q in terms], axis=-1)


@dataclass(frozen=True)
class MultiplierResult:
    value: float  # |LHS - RHS| (deterministic) or |E(LHS - RHS)|
    sem: float
    residuals: tuple  # one per refinement level
    order: float  # mean measured order over the refinements
    ablation: dict  # term name -> residual with that term deleted / full residual


def _defect(spec, grid, ens, drop=None):
    lhs, terms = multiplier_terms(spec, grid, ens)
    if drop is not None:
        terms = np.delete(terms, drop, axis=-1)
    return lhs - terms.sum(axis=-1)


def _summary(d):
    if d.size < 2:
        return float(np.abs(d.mean())), 0.0
    re, im = mc_estimate(d.real), mc_estimate(d.imag)
    return float(np.hypot(re.mean, im.mean)), float(np.hypot(re.sem, im.sem))


def multiplier_identity_residual(spec, grid, ens=None, levels=3):
    """Residual of the pointwise multiplier identity integrated over ``(0, pi) x (0, T)``.

    Each refinement doubles the time steps (Brownian bridge for the noise)
    and halves ``h``. Ablation ratios use the per-path mean modulus so that
    mean-zero terms still count.
    """
    if spec.stochastic and spec.noise_at != "node":
        raise ValueError("the test field is not adapted: it reads W at a later time")
    residuals, base = [], None
    s, g, e = spec, grid, ens
    for level in range(levels):
        d = _defect(s, g, e)
        value, sem = _summary(d)
        residuals.append(value)
        if base is None:
            base = (value, sem, d)
        if level + 1 < levels:
            s, g = s.refined(), g.refined()
            e = refine_brownian(e) if e is not None else None
    orders = [np.log2(a / b) for a, b in zip(residuals, residuals[1:]) if a > 0 and b > 0]
    full = float(np.mean(np.abs(base[2])))
    ablation = {}
    for j, name in enumerate(TERM_NAMES):
        dropped = float(np.mean(np.abs(_defect(spec, grid, ens, drop=j))))
        ablation[name] = dropped / full if full > 0 else np.inf
    return MultiplierResult(base[0], base[1], tuple(residuals), float(np.mean(orders)) if orders else np.nan, ablation)
