"""Finite-dimensional Hilbert spaces, Gram-weighted adjoints and semigroups."""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg


class SpaceError(ValueError):
    """Shape or structure mismatch involving a named space."""


@dataclass(frozen=True, eq=False)
class DiscreteSpace:
    """Coordinate space with inner product ``<x, y> = x^T G conj(y)``.

    ``gram`` must be symmetric positive definite. The same coordinates may be
    carried by several spaces with different Gram forms (L2, H1, H^-1 metrics).
    """

    dim: int
    gram: np.ndarray
    label: str = "H"
    is_complex: bool = False
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        gram = np.array(self.gram, dtype=float)
        if gram.ndim == 1:
            gram = np.diag(gram)
        if gram.shape != (self.dim, self.dim):
            raise SpaceError(f"{self.label}: gram shape {gram.shape} != ({self.dim}, {self.dim})")
        if not np.allclose(gram, gram.T, rtol=1e-12, atol=0.0):
            raise SpaceError(f"{self.label}: gram is not symmetric")
        try:
            upper = np.linalg.cholesky(gram).T
        except np.linalg.LinAlgError:
            raise SpaceError(f"{self.label}: gram is not positive definite") from None
        gram.setflags(write=False)
        object.__setattr__(self, "gram", gram)
        object.__setattr__(self, "chol", upper)

    @classmethod
    def euclidean(cls, dim, label="U", is_complex=False):
        return cls(dim, np.eye(dim), label, is_complex)

    @property
    def dtype(self):
        return np.complex128 if self.is_complex else np.float64

    def check(self, x):
        x = np.asarray(x)
        if x.shape[-1:] != (self.dim,):
            raise SpaceError(f"{self.label}: expected trailing dimension {self.dim}, got shape {x.shape}")
        return x

    def norm(self, x):
        return np.sqrt(np.maximum(np.real(inner(self, x, x)), 0.0))


def inner(space, x, y):
    """Gram inner product over the last axis, conjugate-linear in ``y``."""
    x = space.check(x)
    y = space.check(y)
    return np.einsum("...i,ij,...j->...", x, space.gram, np.conj(y))


@dataclass(frozen=True, eq=False)
class LinearMap:
    domain: DiscreteSpace
    codomain: DiscreteSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape != (self.codomain.dim, self.domain.dim):
            raise SpaceError(
                f"map {self.domain.label}->{self.codomain.label}: matrix shape {m.shape} "
                f"!= ({self.codomain.dim}, {self.domain.dim})"
            )
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __call__(self, x):
        x = self.domain.check(x)
        return x @ self.matrix.T

    def __matmul__(self, other):
        return compose(self, other)

    def operator_norm(self):
        """Norm induced by the two Gram forms."""
        core = self.codomain.chol @ self.matrix @ np.linalg.inv(self.domain.chol)
        return float(np.linalg.norm(core, 2)) if core.size else 0.0


def compose(outer, inner_map):
    if outer.domain.dim != inner_map.codomain.dim or outer.domain.label != inner_map.codomain.label:
        raise SpaceError(
            f"cannot compose {outer.domain.label}->{outer.codomain.label} after "
            f"{inner_map.domain.label}->{inner_map.codomain.label}"
        )
    return LinearMap(inner_map.domain, outer.codomain, outer.matrix @ inner_map.matrix)


def adjoint(m):
    """Gram-weighted adjoint ``G_dom^-1 M^H G_cod``."""
    mh = m.matrix.conj().T @ m.codomain.gram
    star = scipy.linalg.cho_solve((m.domain.chol, False), mh)
    return LinearMap(m.codomain, m.domain, star)


class GeneratorRealization:
    """Matrix generator ``A`` on ``space`` with cached propagators ``exp(tA)``.

    If ``spectral=(values, vectors)`` is given, propagators are formed from the
    eigendecomposition; otherwise ``scipy.linalg.expm`` is used. ``shift`` is the
    resolvent point used for H_{-1} conditioning reports only.
    ``group=True`` permits negative times (skew-adjoint generators).
    """

    def __init__(self, space, matrix, spectral=None, shift=1.0, group=False):
        self.space = space
        self.matrix = np.array(matrix)
        self.matrix.setflags(write=False)
        if self.matrix.shape != (space.dim, space.dim):
            raise SpaceError(f"{space.label}: generator shape {self.matrix.shape}")
        self.shift = float(shift)
        self.group = group
        self.spectral = None
        if spectral is not None:
            values, vectors = (np.asarray(s) for s in spectral)
            resid = np.linalg.norm(self.matrix @ vectors - vectors * values)
            scale = max(np.linalg.norm(self.matrix), 1.0) * max(np.linalg.norm(vectors), 1.0)
            if resid > 1e-10 * scale:
                raise SpaceError(f"{space.label}: spectral data inconsistent (residual {resid:.3e})")
            self.spectral = (values, vectors, np.linalg.inv(vectors))
        self._cache = lru_cache(maxsize=256)(self._propagator)

    @classmethod
    def diagonal(cls, space, values, **kw):
        values = np.asarray(values)
        return cls(space, np.diag(values), spectral=(values, np.eye(len(values))), **kw)

    def _propagator(self, t):
        if self.spectral is not None:
            values, vectors, inverse = self.spectral
            prop = (vectors * np.exp(t * values)) @ inverse
        else:
            prop = scipy.linalg.expm(t * self.matrix)
        if not (self.space.is_complex or np.iscomplexobj(self.matrix)):
            prop = np.real(prop)
        prop.setflags(write=False)
        return prop

    def propagator(self, t):
        t = float(t)
        if t < 0 and not self.group:
            raise ValueError(f"semigroup evaluated at negative time {t}")
        if t == 0.0:
            return np.eye(self.space.dim, dtype=self._propagator(0.0).dtype)
        return self._cache(t)

    def adjoint(self):
        star = adjoint(LinearMap(self.space, self.space, self.matrix)).matrix
        spectral = None
        if self.spectral is not None and np.allclose(self.space.gram, np.diag(np.diag(self.space.gram))) \
                and np.allclose(self.spectral[1], np.eye(self.space.dim)):
            spectral = (np.conj(self.spectral[0]), np.eye(self.space.dim))
        return GeneratorRealization(self.space, star, spectral, self.shift, self.group)

    def resolvent_norm(self):
        """``|(shift - A)^-1|`` in the space's Gram norm (the H_{-1} scale factor)."""
        res = np.linalg.inv(self.shift * np.eye(self.space.dim) - self.matrix)
        return LinearMap(self.space, self.space, res).operator_norm()


def semigroup_apply(gen, t, x):
    """``exp(tA) x`` over the last axis of ``x``."""
    x = gen.space.check(x)
    if t == 0:
        return np.array(x, copy=True)
    return x @ gen.propagator(t).T
