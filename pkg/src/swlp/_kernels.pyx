# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled counter-based sampling kernels (mirrors ``_fallback``)."""
from libc.math cimport sqrt, log, rint
from libc.stdint cimport uint64_t, int64_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t M1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t M2 = 0x94D049BB133111EBULL
cdef uint64_t STREAM_MUL = 0xD1B54A32D192ED03ULL
cdef uint64_t PATH_MUL = 0xA24BAED4963EE407ULL
cdef double QUANTUM = 3.552713678800501e-15  # 2**-48
cdef double TWO_M53 = 1.1102230246251565e-16  # 2**-53

cdef double[8] A = [3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
                    1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
                    3.3430575583588128105e4, 2.5090809287301226727e3]
cdef double[8] B = [1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
                    2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
                    5.2264952788528545610e3]
cdef double[8] C = [1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
                    3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
                    2.27238449892691845833e-2, 7.74545014278341407640e-4]
cdef double[8] D = [1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
                    1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
                    1.05075007164441684324e-9]
cdef double[8] E = [6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
                    2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
                    2.71155556874348757815e-5, 2.01033439929228813265e-7]
cdef double[8] F = [1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
                    7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
                    2.04426310338993978564e-15]


cdef inline uint64_t mix(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * M1
    z = (z ^ (z >> 27)) * M2
    return z ^ (z >> 31)


cdef inline double horner(double* c, double r) nogil:
    cdef double acc = c[7]
    cdef int i
    for i in range(6, -1, -1):
        acc = acc * r + c[i]
    return acc


cdef inline double ppnd16(double p) nogil:
    cdef double q = p - 0.5
    cdef double r, val
    if (q if q >= 0 else -q) <= 0.425:
        r = 0.180625 - q * q
        return q * horner(A, r) / horner(B, r)
    r = p if q < 0.0 else 1.0 - p
    r = sqrt(-log(r))
    if r <= 5.0:
        r = r - 1.6
        val = horner(C, r) / horner(D, r)
    else:
        r = r - 5.0
        val = horner(E, r) / horner(F, r)
    return -val if q < 0.0 else val


def inverse_normal_cdf(const double[::1] p, double[::1] out):
    cdef Py_ssize_t i
    with nogil:
        for i in range(p.shape[0]):
            out[i] = ppnd16(p[i])


def fill_normals(uint64_t seed, uint64_t stream, int64_t path0, double[:, ::1] out, double scale):
    cdef Py_ssize_t i, j
    cdef uint64_t s, p, x
    cdef double u
    with nogil:
        s = mix(seed ^ (stream * STREAM_MUL + GOLDEN))
        for i in range(out.shape[0]):
            p = mix(s ^ (<uint64_t>(path0 + i) * PATH_MUL + GOLDEN))
            for j in range(out.shape[1]):
                x = mix(p + <uint64_t>(j + 1) * GOLDEN)
                u = (<double>(x >> 11) + 0.5) * TWO_M53
                out[i, j] = rint(scale * ppnd16(u) / QUANTUM) * QUANTUM


def split_increments(const double[:, ::1] coarse, const double[:, ::1] bridge, double[:, ::1] out):
    cdef Py_ssize_t i, j
    cdef double first
    with nogil:
        for i in range(coarse.shape[0]):
            for j in range(coarse.shape[1]):
                first = rint(0.5 * coarse[i, j] / QUANTUM) * QUANTUM + bridge[i, j]
                out[i, 2 * j] = first
                out[i, 2 * j + 1] = coarse[i, j] - first
