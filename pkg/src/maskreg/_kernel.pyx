# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled likelihood kernel. Mirrors maskreg._kernel_py."""

from libc.math cimport sqrt, exp, erfc, log, floor, ceil, INFINITY

cdef enum:
    UNKNOWN = 0


cdef inline void _inv3(double* A, double* out) noexcept nogil:
    cdef double c00 = A[4] * A[8] - A[5] * A[7]
    cdef double c01 = A[5] * A[6] - A[3] * A[8]
    cdef double c02 = A[3] * A[7] - A[4] * A[6]
    cdef double det = A[0] * c00 + A[1] * c01 + A[2] * c02
    cdef double inv = 1.0 / det
    out[0] = c00 * inv
    out[1] = (A[2] * A[7] - A[1] * A[8]) * inv
    out[2] = (A[1] * A[5] - A[2] * A[4]) * inv
    out[3] = c01 * inv
    out[4] = (A[0] * A[8] - A[2] * A[6]) * inv
    out[5] = (A[2] * A[3] - A[0] * A[5]) * inv
    out[6] = c02 * inv
    out[7] = (A[1] * A[6] - A[0] * A[7]) * inv
    out[8] = (A[0] * A[4] - A[1] * A[3]) * inv


cdef inline double _det3(double* A) noexcept nogil:
    return (A[0] * (A[4] * A[8] - A[5] * A[7])
            - A[1] * (A[3] * A[8] - A[5] * A[6])
            + A[2] * (A[3] * A[7] - A[4] * A[6]))


cdef inline void _mul3(double* A, double* B, double* out) noexcept nogil:
    cdef int i, j
    for i in range(3):
        for j in range(3):
            out[3 * i + j] = A[3 * i] * B[j] + A[3 * i + 1] * B[3 + j] + A[3 * i + 2] * B[6 + j]


cdef inline void _mul3_bt(double* A, double* B, double* out) noexcept nogil:
    # A @ B.T
    cdef int i, j
    for i in range(3):
        for j in range(3):
            out[3 * i + j] = A[3 * i] * B[3 * j] + A[3 * i + 1] * B[3 * j + 1] + A[3 * i + 2] * B[3 * j + 2]


cdef inline void _mul3_at(double* A, double* B, double* out) noexcept nogil:
    # A.T @ B
    cdef int i, j
    for i in range(3):
        for j in range(3):
            out[3 * i + j] = A[i] * B[j] + A[3 + i] * B[3 + j] + A[6 + i] * B[6 + j]


cdef double _point(const double* b, const double* QB, const unsigned char[:, ::1] state,
                   const double[:, ::1] depth, double focal, double cx, double cy,
                   const double* L, const double* R, const double* t,
                   double radius, double eps) noexcept nogil:
    """Log-likelihood of one point; -inf on rejection."""
    cdef double d0 = b[0] - t[0], d1 = b[1] - t[1], d2 = b[2] - t[2]
    # [b]_A = R^T (b - t)
    cdef double x = R[0] * d0 + R[3] * d1 + R[6] * d2
    cdef double y = R[1] * d0 + R[4] * d1 + R[7] * d2
    cdef double z = R[2] * d0 + R[5] * d1 + R[8] * d2
    if z <= 0.0:
        return -INFINITY
    cdef double wa = x / z, ha = y / z
    cdef double ra = sqrt(x * x + y * y + z * z)
    cdef double rho = sqrt(1.0 + wa * wa + ha * ha)
    cdef double dz_dw = -ra * wa / (rho * rho * rho)
    cdef double dz_dh = -ra * ha / (rho * rho * rho)
    cdef double QAi[9]
    cdef double tmp[9]
    cdef double M[9]
    cdef double C[9]
    cdef double Ci[9]
    cdef double Lam[9]
    QAi[0] = z + wa * dz_dw
    QAi[1] = wa * dz_dh
    QAi[2] = wa / rho
    QAi[3] = ha * dz_dw
    QAi[4] = z + ha * dz_dh
    QAi[5] = ha / rho
    QAi[6] = dz_dw
    QAi[7] = dz_dh
    QAi[8] = 1.0 / rho
    # M = Q_B R Q_A^-1
    _mul3(QB, R, tmp)
    _mul3(tmp, QAi, M)
    # C = L + M L M^T ; Lambda = M^T C^-1 M
    _mul3(M, L, tmp)
    _mul3_bt(tmp, M, C)
    cdef int k
    for k in range(9):
        C[k] += L[k]
    cdef double detC = _det3(C)
    if not detC > 0.0:
        return -INFINITY
    _inv3(C, Ci)
    _mul3(Ci, M, tmp)
    _mul3_at(M, tmp, Lam)
    cdef double l11 = Lam[0], l22 = Lam[4], l33 = Lam[8]
    cdef double l21 = 0.5 * (Lam[1] + Lam[3])
    cdef double l31 = 0.5 * (Lam[2] + Lam[6])
    cdef double l32 = 0.5 * (Lam[5] + Lam[7])
    cdef double D11 = (l11 * l33 - l31 * l31) / l33
    cdef double D12 = (l33 * l21 - l31 * l32) / l33
    cdef double D22 = (l22 * l33 - l32 * l32) / l33
    cdef double s2 = sqrt(2.0 * l33)
    cdef double v1 = l31 / s2, v2 = l32 / s2, v3 = l33 / s2
    cdef double detD = D11 * D22 - D12 * D12
    cdef double ext_u = radius * sqrt(D22 / detD) * focal
    cdef double ext_v = radius * sqrt(D11 / detD) * focal
    cdef double u = wa * focal + cx, vv = ha * focal + cy
    cdef int c0 = <int>ceil(u - ext_u), c1 = <int>floor(u + ext_u)
    cdef int r0 = <int>ceil(vv - ext_v), r1 = <int>floor(vv + ext_v)
    cdef int H = state.shape[0], W = state.shape[1]
    cdef int row, col
    cdef double dw, dh, q, g, total = 0.0, rad2 = radius * radius
    cdef unsigned char s
    for row in range(r0, r1 + 1):
        dh = ha - (row - cy) / focal
        for col in range(c0, c1 + 1):
            dw = wa - (col - cx) / focal
            q = D11 * dw * dw + 2.0 * D12 * dw * dh + D22 * dh * dh
            if q > rad2:
                continue
            g = exp(-0.5 * q)
            if row < 0 or row >= H or col < 0 or col >= W:
                total += 2.0 * g
                continue
            s = state[row, col]
            if s == UNKNOWN:
                total += 2.0 * g
            else:
                total += g * erfc(-(v1 * dw + v2 * dh + v3 * (ra - depth[row, col])))
    if total <= eps:
        return -INFINITY
    return log(total) - 0.5 * log(detC)


def point_logliks(const double[:, ::1] pts, const double[:, :, ::1] QB,
                  const unsigned char[:, ::1] state, const double[:, ::1] depth,
                  double focal, double cx, double cy, const double[:, ::1] L,
                  const double[:, ::1] R, const double[::1] t,
                  double radius, double eps, double[::1] out):
    cdef Py_ssize_t j, m = pts.shape[0]
    with nogil:
        for j in range(m):
            out[j] = _point(&pts[j, 0], &QB[j, 0, 0], state, depth, focal, cx, cy,
                            &L[0, 0], &R[0, 0], &t[0], radius, eps)


def cloud_logliks(const double[:, ::1] pts, const double[:, :, ::1] QB,
                  const unsigned char[:, ::1] state, const double[:, ::1] depth,
                  double focal, double cx, double cy, const double[:, ::1] L,
                  const double[:, :, ::1] Rs, const double[:, ::1] ts,
                  double radius, double eps, double[::1] out):
    cdef Py_ssize_t k, j, m = pts.shape[0], n = Rs.shape[0]
    cdef double acc, lp
    with nogil:
        for k in range(n):
            acc = 0.0
            for j in range(m):
                lp = _point(&pts[j, 0], &QB[j, 0, 0], state, depth, focal, cx, cy,
                            &L[0, 0], &Rs[k, 0, 0], &ts[k, 0], radius, eps)
                if lp == -INFINITY:
                    acc = -INFINITY
                    break
                acc += lp
            out[k] = acc
