"""Backend selection for the sampling kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. ``use_backend`` switches explicitly (benchmarks, tests).
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

QUANTUM = _fallback.QUANTUM
BACKEND = "compiled" if _compiled is not None else "python"


def available_backends():
    return ["python"] + (["compiled"] if _compiled is not None else [])


def use_backend(name):
    """Select ``"python"`` or ``"compiled"``; returns the previous backend."""
    global BACKEND
    if name not in available_backends():
        raise ValueError(f"backend {name!r} not available (have {available_backends()})")
    previous, BACKEND = BACKEND, name
    return previous


def thread_count():
    """Worker threads for path-parallel kernels, from ``SWLP_THREADS`` (default 1)."""
    raw = os.environ.get("SWLP_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _chunks(n, k):
    edges = np.linspace(0, n, min(k, n) + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def normals(seed, stream, n_paths, n_steps, scale=1.0, threads=None):
    """Quantised ``scale * N(0,1)`` array of shape ``(n_paths, n_steps)``.

    Entry ``[p, n]`` depends only on ``(seed, stream, p, n)``, so the result
    does not depend on the number of threads.
    """
    out = np.empty((n_paths, n_steps), dtype=np.float64)
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    stream = int(stream) & 0xFFFFFFFFFFFFFFFF
    fill = _compiled.fill_normals if BACKEND == "compiled" else _fallback.fill_normals

    def work(span):
        a, b = span
        fill(seed, stream, a, out[a:b], float(scale))

    spans = _chunks(n_paths, threads or thread_count())
    if len(spans) == 1:
        work(spans[0])
    else:
        with ThreadPoolExecutor(len(spans)) as pool:
            list(pool.map(work, spans))
    return out


def split_increments(coarse, bridge):
    coarse = np.ascontiguousarray(coarse, dtype=np.float64)
    bridge = np.ascontiguousarray(bridge, dtype=np.float64)
    out = np.empty((coarse.shape[0], 2 * coarse.shape[1]), dtype=np.float64)
    if BACKEND == "compiled":
        _compiled.split_increments(coarse, bridge, out)
    else:
        _fallback.split_increments(coarse, bridge, out)
    return out


def inverse_normal_cdf(p):
    p = np.ascontiguousarray(p, dtype=np.float64)
    if BACKEND == "compiled":
        out = np.empty_like(p).ravel()
        _compiled.inverse_normal_cdf(p.ravel(), out)
        return out.reshape(p.shape)
    return _fallback.inverse_normal_cdf(p)
