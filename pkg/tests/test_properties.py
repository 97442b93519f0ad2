import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from swlp import kernels
from swlp.estimates import concatenation_check
from swlp.presets import scalar_system
from swlp.spaces import DiscreteSpace, LinearMap, adjoint, inner
from swlp.stochastics import TimeGrid, coarsen_brownian, refine_brownian, sample_brownian
from swlp.system import control_admissibility_constant

finite = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2 ** 32))
def test_adjoint_pairing_property(n, m, seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    H = DiscreteSpace(n, g @ g.T + n * np.eye(n), is_complex=True)
    U = DiscreteSpace.euclidean(m, is_complex=True)
    B = LinearMap(U, H, rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m)))
    u = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    lhs = inner(H, B(u), f)
    assert abs(lhs - inner(U, u, adjoint(B)(f))) < 1e-10 * (1 + abs(lhs))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 63), st.integers(1, 30), st.integers(1, 12))
def test_refinement_coupling_property(seed, paths, steps):
    ens = sample_brownian(TimeGrid(1.0, steps), paths, seed)
    assert np.max(np.abs(coarsen_brownian(refine_brownian(ens)).increments - ens.increments)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(finite, st.lists(finite, min_size=16, max_size=16))
def test_concatenation_property(a, u):
    sys = scalar_system(a=a, grid=TimeGrid(1.0, 16))
    assert concatenation_check(sys, 8, np.array(u)) < 1e-10 * (1 + np.abs(u).max())


@settings(max_examples=20, deadline=None)
@given(finite)
def test_admissibility_monotone_property(a):
    sys = scalar_system(a=a, grid=TimeGrid(1.0, 16))
    c = [control_admissibility_constant(sys, k) for k in range(17)]
    assert all(y >= x - 1e-12 for x, y in zip(c, c[1:]))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 64 - 1), st.integers(0, 5), st.integers(1, 9))
def test_normals_lattice_property(seed, stream, paths):
    z = kernels.normals(seed, stream, paths, 7)
    assert np.all(np.isfinite(z))
    assert np.array_equal(z, np.rint(z / kernels.QUANTUM) * kernels.QUANTUM)
