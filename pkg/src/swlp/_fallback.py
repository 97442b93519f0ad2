"""Pure-numpy versions of the counter-based sampling kernels.

Same arithmetic as ``_kernels.pyx``; used when the extension is not built.
"""
import math

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
M1 = np.uint64(0xBF58476D1CE4E5B9)
M2 = np.uint64(0x94D049BB133111EB)
STREAM_MUL = np.uint64(0xD1B54A32D192ED03)
PATH_MUL = np.uint64(0xA24BAED4963EE407)

# increments are rounded to this absolute quantum so that sums of a few
# thousand of them (|x| < 32) are exact in binary64
QUANTUM = 2.0 ** -48

_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


def _horner(coef, r):
    acc = np.full_like(r, coef[7])
    for c in coef[6::-1]:
        acc = acc * r + c
    return acc


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * M1
    z = (z ^ (z >> np.uint64(27))) * M2
    return z ^ (z >> np.uint64(31))


def counter_uniforms(seed, stream, path0, n_paths, n_steps):
    """Uniforms in (0, 1) keyed by (seed, stream, path, step)."""
    with np.errstate(over="ignore"):
        s = _mix(np.uint64(seed) ^ (np.uint64(stream) * STREAM_MUL + GOLDEN))
        paths = np.arange(path0, path0 + n_paths, dtype=np.uint64)
        p = _mix(s ^ (paths * PATH_MUL + GOLDEN))
        steps = np.arange(n_steps, dtype=np.uint64) + np.uint64(1)
        x = _mix(p[:, None] + steps[None, :] * GOLDEN)
    return ((x >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def inverse_normal_cdf(p):
    """Wichura's AS241 rational approximation, vectorised."""
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    out = np.empty_like(p)
    central = np.abs(q) <= 0.425
    if central.any():
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _horner(_A, r) / _horner(_B, r)
    tail = ~central
    if tail.any():
        qt = q[tail]
        r = np.where(qt < 0.0, p[tail], 1.0 - p[tail])
        # libm log, as in the compiled kernel: numpy's vectorised log may
        # differ by an ulp, which can flip the lattice rounding
        r = np.sqrt(-np.fromiter(map(math.log, r.tolist()), np.float64, r.size))
        near = r <= 5.0
        val = np.empty_like(r)
        rn = r[near] - 1.6
        val[near] = _horner(_C, rn) / _horner(_D, rn)
        rf = r[~near] - 5.0
        val[~near] = _horner(_E, rf) / _horner(_F, rf)
        out[tail] = np.where(qt < 0.0, -val, val)
    return out


def fill_normals(seed, stream, path0, out, scale):
    """Write ``scale * Z`` (quantised) into ``out[n_paths, n_steps]``."""
    n_paths, n_steps = out.shape
    z = inverse_normal_cdf(counter_uniforms(seed, stream, path0, n_paths, n_steps))
    out[...] = np.rint(scale * z / QUANTUM) * QUANTUM


def split_increments(coarse, bridge, out):
    """Brownian-bridge midpoint split of ``coarse`` using quantised ``bridge`` draws.

    ``bridge`` already holds ``sqrt(dt)/2 * Z`` on the quantum lattice.
    """
    first = np.rint(0.5 * coarse / QUANTUM) * QUANTUM + bridge
    out[:, 0::2] = first
    out[:, 1::2] = coarse - first
