import numpy as np
import pytest
import scipy.special

from swlp import kernels
from swlp.stochastics import TimeGrid, refine_brownian, sample_brownian

BACKENDS = kernels.available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    prev = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(prev)


def test_inverse_normal_cdf_matches_ndtri(backend):
    p = np.concatenate([np.linspace(1e-12, 1 - 1e-12, 4001), [1e-300, 0.02425, 0.97575]])
    z = kernels.inverse_normal_cdf(p)
    ref = scipy.special.ndtri(p)
    assert np.max(np.abs(z - ref) / np.maximum(1, np.abs(ref))) < 1e-14


def test_normals_on_lattice_and_moments(backend):
    z = kernels.normals(3, 0, 2000, 50)
    assert np.array_equal(z, np.rint(z / kernels.QUANTUM) * kernels.QUANTUM)
    assert abs(z.mean()) < 4 / np.sqrt(z.size)
    assert abs(z.var() - 1) < 0.02


def test_counter_stream_is_addressable(backend):
    full = kernels.normals(11, 2, 40, 30)
    # a path's draws do not depend on how many paths are requested
    assert np.array_equal(kernels.normals(11, 2, 5, 30), full[:5])
    assert not np.array_equal(kernels.normals(12, 2, 5, 30), full[:5])
    assert not np.array_equal(kernels.normals(11, 3, 5, 30), full[:5])


@pytest.mark.parametrize("threads", [2, 3, 8])
def test_thread_count_does_not_change_draws(backend, threads):
    assert np.array_equal(kernels.normals(5, 1, 101, 17, 0.1, threads=1), kernels.normals(5, 1, 101, 17, 0.1, threads))


def test_env_thread_setting(monkeypatch):
    monkeypatch.setenv("SWLP_THREADS", "6")
    assert kernels.thread_count() == 6
    monkeypatch.setenv("SWLP_THREADS", "junk")
    assert kernels.thread_count() == 1


@pytest.mark.skipif("compiled" not in BACKENDS, reason="extension not built")
def test_backends_bit_identical():
    prev = kernels.use_backend("python")
    try:
        ens_py = refine_brownian(sample_brownian(TimeGrid(1, 32), 300, 9))
        kernels.use_backend("compiled")
        ens_c = refine_brownian(sample_brownian(TimeGrid(1, 32), 300, 9))
    finally:
        kernels.use_backend(prev)
    assert np.array_equal(ens_py.increments, ens_c.increments)


@pytest.mark.skipif("compiled" not in BACKENDS, reason="extension not built")
def test_backends_bit_identical_at_scale():
    # ~1e6 draws: enough tail samples to catch one-ulp differences in log
    p = (np.arange(1_000_000) + 0.5) / 1_000_000
    prev = kernels.use_backend("python")
    try:
        z_py, q_py = kernels.normals(3, 0, 4000, 256), kernels.inverse_normal_cdf(p)
        kernels.use_backend("compiled")
        z_c, q_c = kernels.normals(3, 0, 4000, 256), kernels.inverse_normal_cdf(p)
    finally:
        kernels.use_backend(prev)
    assert np.array_equal(z_py, z_c)
    assert np.array_equal(q_py, q_c)


def test_split_is_exact(backend):
    coarse = kernels.normals(1, 0, 64, 32, 0.125)
    bridge = kernels.normals(1, 1, 64, 32, 0.0625)
    fine = kernels.split_increments(coarse, bridge)
    assert np.array_equal(fine[:, 0::2] + fine[:, 1::2], coarse)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.use_backend("gpu")
