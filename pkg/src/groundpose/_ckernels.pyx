# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled solver kernels.

Same functions and array contracts as :mod:`groundpose._pykernels`. The
numeric steps are reimplemented on fixed-size C arrays:

* focal polynomials by conjugate-symmetric DFT interpolation of small
  determinants (complex LU with partial pivoting),
* null vectors by Gaussian elimination with complete pivoting,
* quartic roots in closed form, quintic roots isolated between the
  critical points and refined by bracketed Newton; the eigenvalues of the
  balanced companion matrix (LAPACK ``dhseqr``) remain available as a check.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, fabs, fmax, cos, sin, acos, cbrt, hypot, isfinite, M_PI, INFINITY
from scipy.linalg.cython_lapack cimport dgebal, dhseqr

from .errors import DegenerateConfigurationError

cnp.import_array()

cdef double DEGENERATE_RTOL = 1e-12
cdef double MERGE_TOL = 1e-7
cdef double IMAG_TOL = 1e-6


# -- small helpers -----------------------------------------------------------

cdef inline void _columns(const double[:, ::1] R2, const double* a, double Z[5][3]) noexcept nogil:
    # Z[k] = R2 @ E_k @ a
    cdef double v[5][3]
    cdef int k, i
    v[0][0] = a[0]; v[0][1] = 0.0; v[0][2] = a[2]
    v[1][0] = a[2]; v[1][1] = 0.0; v[1][2] = -a[0]
    v[2][0] = a[1]; v[2][1] = 0.0; v[2][2] = 0.0
    v[3][0] = 0.0; v[3][1] = a[1]; v[3][2] = 0.0
    v[4][0] = 0.0; v[4][1] = 0.0; v[4][2] = a[1]
    for k in range(5):
        for i in range(3):
            Z[k][i] = R2[i, 0] * v[k][0] + R2[i, 1] * v[k][1] + R2[i, 2] * v[k][2]


cdef inline void _rt_mul(const double[:, ::1] R, double x, double y, double z, double* out) noexcept nogil:
    # out = R^T (x, y, z)
    cdef int i
    for i in range(3):
        out[i] = R[0, i] * x + R[1, i] * y + R[2, i] * z


cdef inline void _canonical(double* h) noexcept nogil:
    cdef double n = hypot(h[0], h[1])
    cdef int k
    if h[3] < 0:
        n = -n
    for k in range(5):
        h[k] /= n


cdef double _withheld_residual(const double* h, const double[:, ::1] x1, const double[:, ::1] x2,
                               const double[:, ::1] R1, const double[:, ::1] R2,
                               double f1, double f2) noexcept nogil:
    cdef double y[3]
    cdef double w[3]
    cdef double z1, z2
    _rt_mul(R1, x1[2, 0] / f1, x1[2, 1] / f1, 1.0, y)
    w[0] = h[0] * y[0] + h[2] * y[1] + h[1] * y[2]
    w[1] = h[3] * y[1]
    w[2] = -h[1] * y[0] + h[4] * y[1] + h[0] * y[2]
    z1 = R2[1, 0] * w[0] + R2[1, 1] * w[1] + R2[1, 2] * w[2]
    z2 = R2[2, 0] * w[0] + R2[2, 1] * w[1] + R2[2, 2] * w[2]
    if z2 == 0.0:
        return INFINITY
    return fabs(x2[2, 1] - f2 * z1 / z2)


cdef double complex _cdet5(double complex A[5][5]) noexcept nogil:
    cdef int n = 5, i, j, k, p
    cdef double complex det = 1.0, t, fac
    cdef double best, mag
    for k in range(n):
        p = k
        best = fabs(A[k][k].real) + fabs(A[k][k].imag)
        for i in range(k + 1, n):
            mag = fabs(A[i][k].real) + fabs(A[i][k].imag)
            if mag > best:
                best = mag
                p = i
        if best == 0.0:
            return 0.0
        if p != k:
            for j in range(n):
                t = A[k][j]; A[k][j] = A[p][j]; A[p][j] = t
            det = -det
        det = det * A[k][k]
        for i in range(k + 1, n):
            fac = A[i][k] / A[k][k]
            for j in range(k + 1, n):
                A[i][j] = A[i][j] - fac * A[k][j]
    return det


cdef double _rdet5(double A[5][5]) noexcept nogil:
    cdef int n = 5, i, j, k, p
    cdef double det = 1.0, t, fac, best, mag
    for k in range(n):
        p = k
        best = fabs(A[k][k])
        for i in range(k + 1, n):
            mag = fabs(A[i][k])
            if mag > best:
                best = mag
                p = i
        if best == 0.0:
            return 0.0
        if p != k:
            for j in range(n):
                t = A[k][j]; A[k][j] = A[p][j]; A[p][j] = t
            det = -det
        det = det * A[k][k]
        for i in range(k + 1, n):
            fac = A[i][k] / A[k][k]
            for j in range(k + 1, n):
                A[i][j] = A[i][j] - fac * A[k][j]
    return det


cdef int _null_vector(double A[5][5], int m, double* h, double* pivots) noexcept nogil:
    """Null vector of an ``m x 5`` matrix of rank 4 (m = 4 or 5).

    Four steps of complete pivoting; the remaining column is set free.
    Stores the |pivots| and returns 0, or -1 if a pivot is exactly zero.
    """
    cdef int perm[5]
    cdef double x[5]
    cdef int i, j, k, pi, pj, t
    cdef double best, mag, tmp, fac, acc
    for j in range(5):
        perm[j] = j
    for k in range(4):
        pi = k; pj = k; best = -1.0
        for i in range(k, m):
            for j in range(k, 5):
                mag = fabs(A[i][j])
                if mag > best:
                    best = mag; pi = i; pj = j
        if best == 0.0:
            return -1
        pivots[k] = best
        if pi != k:
            for j in range(5):
                tmp = A[k][j]; A[k][j] = A[pi][j]; A[pi][j] = tmp
        if pj != k:
            for i in range(m):
                tmp = A[i][k]; A[i][k] = A[i][pj]; A[i][pj] = tmp
            t = perm[k]; perm[k] = perm[pj]; perm[pj] = t
        for i in range(k + 1, m):
            fac = A[i][k] / A[k][k]
            for j in range(k, 5):
                A[i][j] -= fac * A[k][j]
    x[4] = 1.0
    for i in range(3, -1, -1):
        acc = 0.0
        for j in range(i + 1, 5):
            acc += A[i][j] * x[j]
        x[i] = -acc / A[i][i]
    for j in range(5):
        h[perm[j]] = x[j]
    return 0


# -- polynomial roots --------------------------------------------------------

cdef inline double _polyval(const double* c, int deg, double x) noexcept nogil:
    cdef double acc = 0.0
    cdef int k
    for k in range(deg, -1, -1):
        acc = acc * x + c[k]
    return acc


cdef double _polish(const double* c, int deg, double x) noexcept nogil:
    cdef double p = 0.0, dp = 0.0, xn
    cdef int k
    for k in range(deg, -1, -1):
        dp = dp * x + p
        p = p * x + c[k]
    if dp == 0.0 or not isfinite(dp):
        return x
    xn = x - p / dp
    if not isfinite(xn) or fabs(_polyval(c, deg, xn)) > fabs(p):
        return x
    return xn


cdef int _quadratic(double c0, double c1, double c2, double* out) noexcept nogil:
    cdef double disc, sq, qq
    if c2 == 0.0:
        if c1 == 0.0:
            return 0
        out[0] = -c0 / c1
        return 1
    disc = c1 * c1 - 4.0 * c2 * c0
    if disc < 0.0:
        if -disc > 1e-12 * (c1 * c1 + fabs(4.0 * c2 * c0)):
            return 0
        disc = 0.0
    sq = sqrt(disc)
    qq = -0.5 * (c1 + (sq if c1 >= 0 else -sq))
    if qq == 0.0:
        out[0] = 0.0; out[1] = 0.0
        return 2
    out[0] = qq / c2
    out[1] = c0 / qq
    return 2


cdef int _cubic(double c0, double c1, double c2, double c3, double* out) noexcept nogil:
    cdef double a, b, d, P, Q, shift, disc, sq, u, rho, arg, phi
    cdef double monic[4]
    cdef int n, k
    if c3 == 0.0:
        return _quadratic(c0, c1, c2, out)
    a = c2 / c3; b = c1 / c3; d = c0 / c3
    P = b - a * a / 3.0
    Q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + d
    shift = -a / 3.0
    disc = (Q / 2.0) * (Q / 2.0) + (P / 3.0) * (P / 3.0) * (P / 3.0)
    if P == 0.0 and Q == 0.0:
        out[0] = 0.0; n = 1
    elif disc > 0.0:
        sq = sqrt(disc)
        u = cbrt(-Q / 2.0 + (-sq if Q >= 0 else sq))
        out[0] = u - P / (3.0 * u) if u != 0.0 else 0.0
        n = 1
    else:
        rho = 2.0 * sqrt(-P / 3.0 if P < 0 else 0.0)
        if rho == 0.0:
            out[0] = 0.0; n = 1
        else:
            arg = 3.0 * Q / (P * rho) if P != 0.0 else 0.0
            arg = 1.0 if arg > 1.0 else (-1.0 if arg < -1.0 else arg)
            phi = acos(arg) / 3.0
            for k in range(3):
                out[k] = rho * cos(phi - 2.0 * M_PI * k / 3.0)
            n = 3
    monic[0] = d; monic[1] = b; monic[2] = a; monic[3] = 1.0
    for k in range(n):
        out[k] = _polish(monic, 3, out[k] + shift)
    return n


cdef int _quartic_monic(double a3, double a2, double a1, double a0, double* out) noexcept nogil:
    cdef double shift = -a3 / 4.0, a3s = a3 * a3
    cdef double p = a2 - 3.0 * a3s / 8.0
    cdef double q = a1 - a3 * a2 / 2.0 + a3s * a3 / 8.0
    cdef double r = a0 - a3 * a1 / 4.0 + a3s * a2 / 16.0 - 3.0 * a3s * a3s / 256.0
    cdef double q_scale = fabs(a1)
    cdef double zs[3]
    cdef double ms[3]
    cdef double m, s, kk
    cdef int n = 0, nz, k
    if fabs(a3 * a2) / 2.0 > q_scale:
        q_scale = fabs(a3 * a2) / 2.0
    if fabs(a3s * a3) / 8.0 > q_scale:
        q_scale = fabs(a3s * a3) / 8.0
    if q_scale < 1e-300:
        q_scale = 1e-300
    if fabs(q) <= 1e-14 * q_scale:
        nz = _quadratic(r, p, 1.0, zs)
        for k in range(nz):
            if zs[k] > 0.0:
                s = sqrt(zs[k])
                out[n] = s; out[n + 1] = -s
                n += 2
            elif zs[k] > -1e-12 * (fabs(p) if fabs(p) > 1.0 else 1.0):
                out[n] = 0.0
                n += 1
    else:
        nz = _cubic(-q * q / 8.0, p * p / 4.0 - r, p, 1.0, ms)
        m = ms[0]
        for k in range(1, nz):
            if ms[k] > m:
                m = ms[k]
        if m <= 0.0:
            return 0
        s = sqrt(2.0 * m)
        kk = q / (2.0 * s)
        n = _quadratic(p / 2.0 + m + kk, -s, 1.0, out)
        n += _quadratic(p / 2.0 + m - kk, s, 1.0, out + n)
    for k in range(n):
        out[k] += shift
    return n


cdef int _sort_collapse(double* r, int n, double floor=1.0) noexcept nogil:
    cdef int i, j, m = 0
    cdef double t, ref
    for i in range(1, n):
        t = r[i]
        j = i - 1
        while j >= 0 and r[j] > t:
            r[j + 1] = r[j]
            j -= 1
        r[j + 1] = t
    for i in range(n):
        ref = fmax(floor, fmax(fabs(r[i]), fabs(r[m - 1]) if m > 0 else 0.0))
        if m > 0 and fabs(r[i] - r[m - 1]) <= MERGE_TOL * ref:
            continue
        r[m] = r[i]
        m += 1
    return m


cdef int _real_roots_quartic(const double* c, double tol, double* out) noexcept nogil:
    cdef double raw[4]
    cdef double scale = 1.0, x
    cdef int n, k, m = 0
    if c[4] != 0.0:
        n = _quartic_monic(c[3] / c[4], c[2] / c[4], c[1] / c[4], c[0] / c[4], raw)
    elif c[3] != 0.0:
        n = _cubic(c[0], c[1], c[2], c[3], raw)
    else:
        n = _quadratic(c[0], c[1], c[2], raw)
    for k in range(5):
        if fabs(c[k]) > scale:
            scale = fabs(c[k])
    for k in range(n):
        x = _polish(c, 4, raw[k])
        if isfinite(x) and fabs(_polyval(c, 4, x)) / scale < tol:
            out[m] = x
            m += 1
    return _sort_collapse(out, m)


cdef int _real_roots_companion(const double* c_in, int deg, double* out) noexcept nogil:
    """Real roots via the eigenvalues of the balanced companion matrix."""
    cdef double H[36]
    cdef double wr[6]
    cdef double wi[6]
    cdef double scale[6]
    cdef double work[64]
    cdef double Zd[1]
    cdef int n, i, j, ilo, ihi, info, ldz = 1, lwork = 64, m = 0
    cdef char job_b = b'S', job = b'E', compz = b'N'
    while deg > 0 and c_in[deg] == 0.0:
        deg -= 1
    if deg < 1:
        return 0
    n = deg
    for i in range(n * n):
        H[i] = 0.0
    # column-major: first row holds -c[n-1..0] / c[n]
    for j in range(n):
        H[j * n] = -c_in[n - 1 - j] / c_in[n]
    for i in range(1, n):
        H[i + (i - 1) * n] = 1.0
    dgebal(&job_b, &n, H, &n, &ilo, &ihi, scale, &info)
    if info != 0:
        return 0
    dhseqr(&job, &compz, &n, &ilo, &ihi, H, &n, wr, wi, Zd, &ldz, work, &lwork, &info)
    if info != 0:
        return 0
    for i in range(n):
        if fabs(wi[i]) < IMAG_TOL * (1.0 + fabs(wr[i])):
            out[m] = _polish(c_in, deg, wr[i])
            m += 1
    return _sort_collapse(out, m)


cdef double _bisect_newton(const double* c, int deg, double lo, double hi, double plo) noexcept nogil:
    cdef double x = 0.5 * (lo + hi), p, dp, step, xn
    cdef int it, k
    for it in range(200):
        p = 0.0; dp = 0.0
        for k in range(deg, -1, -1):
            dp = dp * x + p
            p = p * x + c[k]
        if p == 0.0:
            return x
        if (p < 0.0) == (plo < 0.0):
            lo = x; plo = p
        else:
            hi = x
        step = x - p / dp if dp != 0.0 else lo - 1.0
        # a converged step may leave the bracket by roundoff
        if fabs(step - x) <= 1e-15 * fabs(x):
            return step if (lo <= step and step <= hi) else x
        xn = step if (lo < step and step < hi) else 0.5 * (lo + hi)
        if hi - lo <= 4e-16 * fabs(x) or xn == lo or xn == hi:
            return xn
        x = xn
    return x


cdef int _real_roots_bracketed(const double* c_in, int deg, double* out) noexcept nogil:
    """Real roots between consecutive critical points (degree <= 5).

    Critical points come from the same routine applied to the derivative,
    so every level is refined to full precision.
    """
    cdef double d[5]
    cdef double crit[4]
    cdef double pts[6]
    cdef double vals[6]
    cdef double bound = 0.0, t
    cdef int k, nc = 0, npts = 0, m = 0
    while deg > 0 and c_in[deg] == 0.0:
        deg -= 1
    if deg < 1:
        return 0
    if deg == 1:
        out[0] = -c_in[0] / c_in[1]
        return 1
    if deg == 2:
        m = _quadratic(c_in[0], c_in[1], c_in[2], out)
        return _sort_collapse(out, m)
    for k in range(deg):
        d[k] = (k + 1) * c_in[k + 1]
    nc = _real_roots_bracketed(d, deg - 1, crit)
    # Fujiwara bound
    for k in range(deg):
        t = pow(fabs(c_in[k] / c_in[deg]), 1.0 / (deg - k))
        if k == 0:
            t *= pow(0.5, 1.0 / deg)
        if t > bound:
            bound = t
    bound = 2.0 * bound + 1e-300
    pts[npts] = -bound; npts += 1
    for k in range(nc):
        if -bound < crit[k] and crit[k] < bound:
            pts[npts] = crit[k]; npts += 1
    pts[npts] = bound; npts += 1
    for k in range(1, npts - 1):
        vals[k] = _polyval(c_in, deg, pts[k])
    # outside the bound p has its sign at infinity, even if evaluation underflows
    vals[npts - 1] = 1.0 if c_in[deg] > 0.0 else -1.0
    vals[0] = vals[npts - 1] if deg % 2 == 0 else -vals[npts - 1]
    for k in range(npts - 1):
        if vals[k] == 0.0:
            out[m] = pts[k]; m += 1
        elif vals[k + 1] != 0.0 and ((vals[k] < 0.0) != (vals[k + 1] < 0.0)):
            out[m] = _bisect_newton(c_in, deg, pts[k], pts[k + 1], vals[k])
            m += 1
    # pieces are disjoint, so only a relative merge is needed
    return _sort_collapse(out, m, 0.0)


# -- DLT rows ----------------------------------------------------------------

cdef void _rows_fhf(const double[:, ::1] x1, const double[:, ::1] x2, const double[:, ::1] R1,
                    const double[:, ::1] R2, double M0[5][5], double M1[5][5],
                    double M2[5][5]) noexcept nogil:
    cdef double a[3]
    cdef double b[3]
    cdef double Za[5][3]
    cdef double Zb[5][3]
    cdef int i, c, k, r = 0
    cdef double uv
    b[0] = R1[2, 0]; b[1] = R1[2, 1]; b[2] = R1[2, 2]
    _columns(R2, b, Zb)
    for i in range(3):
        _rt_mul(R1, x1[i, 0], x1[i, 1], 0.0, a)
        _columns(R2, a, Za)
        for c in range(2):
            if i == 2 and c == 1:
                continue
            uv = x2[i, c]
            for k in range(5):
                M0[r][k] = uv * Za[k][2]
                M1[r][k] = -Za[k][c] + uv * Zb[k][2]
                M2[r][k] = -Zb[k][c]
            r += 1


cdef void _rows_lin(const double[:, ::1] x1, const double[:, ::1] x2, const double[:, ::1] R1,
                    const double[:, ::1] R2, double f1, int n_pts, int drop,
                    double M0[5][5], double M1[5][5]) noexcept nogil:
    cdef double a[3]
    cdef double Za[5][3]
    cdef int i, c, k, r = 0
    cdef double uv
    for i in range(n_pts):
        _rt_mul(R1, x1[i, 0] / f1, x1[i, 1] / f1, 1.0, a)
        _columns(R2, a, Za)
        for c in range(2):
            if drop and i == n_pts - 1 and c == 1:
                continue
            uv = x2[i, c]
            for k in range(5):
                M0[r][k] = uv * Za[k][2]
                M1[r][k] = -Za[k][c]
            r += 1


cdef double _hadamard(double M0[5][5], double M1[5][5], double M2[5][5], int use2) noexcept nogil:
    cdef double prod = 1.0, s
    cdef int i, k
    for i in range(5):
        s = 0.0
        for k in range(5):
            s += M0[i][k] * M0[i][k] + M1[i][k] * M1[i][k]
            if use2:
                s += M2[i][k] * M2[i][k]
        prod *= sqrt(s)
    return prod


cdef void _det_poly(double M0[5][5], double M1[5][5], double M2[5][5], int N,
                    int lo, int hi, double* out) noexcept nogil:
    """Coefficients ``lo..hi`` of ``det(M0 + z M1 + z^2 M2)`` from N-point DFT.

    The determinant has real coefficients, so only the samples ``k <= N/2``
    are evaluated and the rest follow by conjugation.
    """
    cdef double complex A[5][5]
    cdef double Ar[5][5]
    cdef double complex d[5]
    cdef double complex z, z2, acc
    cdef double r
    cdef int k, i, j, s, half = N // 2
    # z = 1 and z = -1 are real samples
    for s in range(2):
        k = s * half
        r = 1.0 - 2.0 * s
        for i in range(5):
            for j in range(5):
                Ar[i][j] = M0[i][j] + r * M1[i][j] + M2[i][j]
        d[k] = _rdet5(Ar)
    for k in range(1, half):
        z = cos(2.0 * M_PI * k / N) + 1j * sin(2.0 * M_PI * k / N)
        z2 = z * z
        for i in range(5):
            for j in range(5):
                A[i][j] = M0[i][j] + z * M1[i][j] + z2 * M2[i][j]
        d[k] = _cdet5(A)
    for j in range(lo, hi + 1):
        acc = d[0] + (d[half] if j % 2 == 0 else -d[half])
        for k in range(1, half):
            acc = acc + 2.0 * (d[k] * (cos(2.0 * M_PI * k * j / N) - 1j * sin(2.0 * M_PI * k * j / N))).real
        out[j - lo] = acc.real / N


# -- solver kernels ----------------------------------------------------------

def calibrated_kernel(const double[:, ::1] x1, const double[:, ::1] x2,
                      const double[:, ::1] R1, const double[:, ::1] R2):
    """Two-point solver; ``x1``, ``x2`` are ``K^-1``-normalised coordinates."""
    cdef double M0[5][5]
    cdef double M1[5][5]
    cdef double A[5][5]
    cdef double h[5]
    cdef double piv[4]
    cdef int i, k
    _rows_lin(x1, x2, R1, R2, 1.0, 2, 0, M0, M1)
    for i in range(4):
        for k in range(5):
            A[i][k] = M0[i][k] + M1[i][k]
    if _null_vector(A, 4, h, piv) != 0 or piv[3] <= 1e-10 * piv[0]:
        raise DegenerateConfigurationError("DLT matrix has a nullspace of dimension > 1")
    if hypot(h[0], h[1]) == 0.0:
        raise DegenerateConfigurationError("null vector has no rotation component")
    _canonical(h)
    out = np.empty((1, 8))
    cdef double[:, ::1] o = out
    for k in range(5):
        o[0, k] = h[k]
    o[0, 5] = 1.0; o[0, 6] = 1.0; o[0, 7] = 0.0
    return out


def fhf_kernel(const double[:, ::1] x1, const double[:, ::1] x2,
               const double[:, ::1] R1, const double[:, ::1] R2, roots="quartic"):
    """``roots``: ``"quartic"`` (closed form) or ``"eig"`` (companion matrix)."""
    cdef double M0[5][5]
    cdef double M1[5][5]
    cdef double M2[5][5]
    cdef double A[5][5]
    cdef double q[5]
    cdef double fs[4]
    cdef double h[5]
    cdef double piv[4]
    cdef double scale = 0.0, f
    cdef int nf, i, j, k, m = 0
    _rows_fhf(x1, x2, R1, R2, M0, M1, M2)
    # det = f^3 * quartic(f)
    _det_poly(M0, M1, M2, 8, 3, 7, q)
    for k in range(5):
        if fabs(q[k]) > scale:
            scale = fabs(q[k])
    if scale <= DEGENERATE_RTOL * _hadamard(M0, M1, M2, 1):
        raise DegenerateConfigurationError("focal polynomial vanishes identically")
    for k in range(5):
        q[k] /= scale
    if roots == "quartic":
        nf = _real_roots_quartic(q, 1e-6, fs)
    elif roots == "eig":
        nf = _real_roots_companion(q, 4, fs)
    else:
        raise ValueError(f"unknown root method {roots!r}")
    out = np.empty((nf, 8))
    cdef double[:, ::1] o = out
    for k in range(nf):
        f = fs[k]
        if f == 0.0:
            continue
        for i in range(5):
            for j in range(5):
                A[i][j] = M0[i][j] + f * M1[i][j] + f * f * M2[i][j]
        if _null_vector(A, 5, h, piv) != 0 or hypot(h[0], h[1]) == 0.0:
            continue
        _canonical(h)
        for j in range(5):
            o[m, j] = h[j]
        o[m, 5] = f; o[m, 6] = f
        o[m, 7] = _withheld_residual(h, x1, x2, R1, R2, f, f)
        m += 1
    return out[:m]


def hf_kernel(const double[:, ::1] x1, const double[:, ::1] x2,
              const double[:, ::1] R1, const double[:, ::1] R2, double f1, roots="closed"):
    """Only the closed-form root stage is compiled."""
    if roots != "closed":
        raise ValueError("the compiled Hf kernel supports roots='closed' only")
    cdef double M0[5][5]
    cdef double M1[5][5]
    cdef double M2[5][5]
    cdef double A[5][5]
    cdef double q[3]
    cdef double fs[2]
    cdef double h[5]
    cdef double piv[4]
    cdef double scale = 0.0, f
    cdef int nf, i, j, k, m = 0
    _rows_lin(x1, x2, R1, R2, f1, 3, 1, M0, M1)
    for i in range(5):
        for j in range(5):
            M2[i][j] = 0.0
    # det is quintic in f with a double root at 0; 6 samples suffice
    _det_poly(M0, M1, M2, 6, 2, 4, q)
    for k in range(3):
        if fabs(q[k]) > scale:
            scale = fabs(q[k])
    if scale <= DEGENERATE_RTOL * _hadamard(M0, M1, M2, 0):
        raise DegenerateConfigurationError("focal polynomial vanishes identically")
    for k in range(3):
        q[k] /= scale
    nf = _quadratic(q[0], q[1], q[2], fs)
    out = np.empty((nf, 8))
    cdef double[:, ::1] o = out
    for k in range(nf):
        f = _polish(q, 2, fs[k])
        if f == 0.0:
            continue
        for i in range(5):
            for j in range(5):
                A[i][j] = M0[i][j] + f * M1[i][j]
        if _null_vector(A, 5, h, piv) != 0 or hypot(h[0], h[1]) == 0.0:
            continue
        _canonical(h)
        for j in range(5):
            o[m, j] = h[j]
        o[m, 5] = f1; o[m, 6] = f
        o[m, 7] = _withheld_residual(h, x1, x2, R1, R2, f1, f)
        m += 1
    return out[:m]


cdef int _inv3(double X[3][3], double Ai[3][3]) noexcept nogil:
    cdef double det, nrm = 1.0, s
    cdef int i, j
    Ai[0][0] = X[1][1] * X[2][2] - X[1][2] * X[2][1]
    Ai[0][1] = X[0][2] * X[2][1] - X[0][1] * X[2][2]
    Ai[0][2] = X[0][1] * X[1][2] - X[0][2] * X[1][1]
    Ai[1][0] = X[1][2] * X[2][0] - X[1][0] * X[2][2]
    Ai[1][1] = X[0][0] * X[2][2] - X[0][2] * X[2][0]
    Ai[1][2] = X[0][2] * X[1][0] - X[0][0] * X[1][2]
    Ai[2][0] = X[1][0] * X[2][1] - X[1][1] * X[2][0]
    Ai[2][1] = X[0][1] * X[2][0] - X[0][0] * X[2][1]
    Ai[2][2] = X[0][0] * X[1][1] - X[0][1] * X[1][0]
    det = X[0][0] * Ai[0][0] + X[0][1] * Ai[1][0] + X[0][2] * Ai[2][0]
    for j in range(3):
        s = 0.0
        for i in range(3):
            s += X[i][j] * X[i][j]
        nrm *= sqrt(s)
    if fabs(det) <= 1e-12 * nrm:
        return -1
    for i in range(3):
        for j in range(3):
            Ai[i][j] /= det
    return 0


cdef inline void _cross(const double* a, const double* b, double* out) noexcept nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


def nullspace_basis(const double[:, ::1] x1, const double[:, ::1] x2):
    """Three homographies spanning the DLT nullspace of three point pairs."""
    cdef double X[3][3]
    cdef double Ai[3][3]
    cdef int i, j, k
    for i in range(3):
        X[0][i] = x1[i, 0]; X[1][i] = x1[i, 1]; X[2][i] = 1.0
    if _inv3(X, Ai) != 0:
        raise DegenerateConfigurationError("view-1 points are collinear")
    out = np.empty((3, 3, 3))
    cdef double[:, :, ::1] o = out
    for k in range(3):
        for i in range(3):
            for j in range(3):
                o[k, i, j] = (x2[k, i] if i < 2 else 1.0) * Ai[k][j]
    return out


def f1hf2_kernel(const double[:, ::1] x1, const double[:, ::1] x2,
                 const double[:, ::1] R1, const double[:, ::1] R2, roots="bracket"):
    """Three-point solver with two unknown focal lengths (see the numpy twin).

    ``roots``: ``"bracket"`` (critical-point isolation) or ``"eig"``
    (companion-matrix eigenvalues).
    """
    cdef double X[3][3]
    cdef double Ai[3][3]
    cdef double p[3][3]      # p[k] = R2^T P x2_k
    cdef double qv[2][3][3]  # qv[d][k] = R1^T D_d a_k (also the m vectors)
    cdef double c1[2][3]
    cdef double c2[2][3]
    cdef double Acoef[3][3]
    cdef double tmp[3]
    cdef double q10[4]
    cdef double q12[4]
    cdef double m0[4]
    cdef double m2[4]
    cdef double F[7]
    cdef double ws[5]
    cdef double g[3]
    cdef double a[3]
    cdef double Q0[3][3]
    cdef double mm[3]
    cdef double h[5]
    cdef double Qd[3][3]
    cdef double scale = 0.0, w, den, f2, s
    cdef int i, j, k, d, e, nw, m = 0
    for i in range(3):
        X[0][i] = x1[i, 0]; X[1][i] = x1[i, 1]; X[2][i] = 1.0
    if _inv3(X, Ai) != 0:
        raise DegenerateConfigurationError("view-1 points are collinear")
    g[0] = R2[2, 0]; g[1] = R2[2, 1]; g[2] = R2[2, 2]
    if fabs(g[1]) <= 1e-12:
        raise DegenerateConfigurationError("view-2 optical axis is orthogonal to gravity")
    for k in range(3):
        for i in range(3):
            p[k][i] = R2[0, i] * x2[k, 0] + R2[1, i] * x2[k, 1]
            qv[0][k][i] = R1[0, i] * Ai[k][0] + R1[1, i] * Ai[k][1]
            qv[1][k][i] = R1[2, i] * Ai[k][2]
    # Q[d,k][i][j] = p[k][i] * qv[d][k][j]
    for d in range(2):
        for k in range(3):
            c1[d][k] = (g[1] * (p[k][0] * qv[d][k][0] - p[k][2] * qv[d][k][2])
                        - g[0] * p[k][1] * qv[d][k][0] + g[2] * p[k][1] * qv[d][k][2])
            c2[d][k] = (g[1] * (p[k][0] * qv[d][k][2] + p[k][2] * qv[d][k][0])
                        - g[0] * p[k][1] * qv[d][k][2] - g[2] * p[k][1] * qv[d][k][0])
    _cross(c1[0], c2[0], Acoef[0])
    _cross(c1[0], c2[1], Acoef[1])
    _cross(c1[1], c2[0], tmp)
    for i in range(3):
        Acoef[1][i] += tmp[i]
    _cross(c1[1], c2[1], Acoef[2])
    for i in range(4):
        q10[i] = 0.0; q12[i] = 0.0; m0[i] = 0.0; m2[i] = 0.0
    for i in range(3):
        for d in range(2):
            for k in range(3):
                q10[i + d] += Acoef[i][k] * p[k][1] * qv[d][k][0]
                q12[i + d] += Acoef[i][k] * p[k][1] * qv[d][k][2]
                m0[i + d] += Acoef[i][k] * qv[d][k][0]
                m2[i + d] += Acoef[i][k] * qv[d][k][2]
    for i in range(7):
        F[i] = 0.0
    for i in range(4):
        for j in range(4):
            F[i + j] += q10[i] * m2[j] - q12[i] * m0[j]
    for i in range(6):
        if fabs(F[i]) > scale:
            scale = fabs(F[i])
    if scale == 0.0 or not isfinite(scale):
        raise DegenerateConfigurationError("focal polynomial vanishes identically")
    for i in range(6):
        F[i] /= scale
    if roots == "eig":
        nw = _real_roots_companion(F, 5, ws)
    elif roots == "bracket":
        nw = _real_roots_bracketed(F, 5, ws)
    else:
        raise ValueError(f"unknown root method {roots!r}")
    out = np.empty((nw, 8))
    cdef double[:, ::1] o = out
    for e in range(nw):
        w = ws[e]
        if w == 0.0:
            continue
        for i in range(3):
            a[i] = Acoef[0][i] + w * (Acoef[1][i] + w * Acoef[2][i])
        for i in range(3):
            mm[i] = 0.0
            for j in range(3):
                Q0[i][j] = 0.0
        for k in range(3):
            for j in range(3):
                s = a[k] * (qv[0][k][j] + w * qv[1][k][j])
                mm[j] += s
                for i in range(3):
                    Q0[i][j] += p[k][i] * s
        den = g[1] * (mm[0] * mm[0] + mm[2] * mm[2])
        if den == 0.0:
            continue
        f2 = -(Q0[1][0] * mm[0] + Q0[1][2] * mm[2]) / den
        for i in range(3):
            for j in range(3):
                Qd[i][j] = Q0[i][j] + f2 * g[i] * mm[j]
        h[0] = 0.5 * (Qd[0][0] + Qd[2][2])
        h[1] = 0.5 * (Qd[0][2] - Qd[2][0])
        h[2] = Qd[0][1]; h[3] = Qd[1][1]; h[4] = Qd[2][1]
        if hypot(h[0], h[1]) == 0.0:
            continue
        _canonical(h)
        for j in range(5):
            o[m, j] = h[j]
        o[m, 5] = 1.0 / w; o[m, 6] = f2; o[m, 7] = 0.0
        m += 1
    return out[:m]


def transfer_errors(H_in, x1_in, x2_in):
    """Symmetric transfer error of each homography on each correspondence."""
    cdef const double[:, :, ::1] H = np.ascontiguousarray(H_in, dtype=float).reshape(-1, 3, 3)
    cdef const double[:, ::1] x1 = np.ascontiguousarray(x1_in, dtype=float)
    cdef const double[:, ::1] x2 = np.ascontiguousarray(x2_in, dtype=float)
    cdef Py_ssize_t nk = H.shape[0], n = x1.shape[0], k, i
    out = np.empty((nk, n))
    cdef double[:, ::1] o = out
    cdef double G[3][3]
    cdef double a0, a1, a2, b0, b1, b2, df, db, e
    with nogil:
        for k in range(nk):
            # adjugate, a projective inverse that never fails
            G[0][0] = H[k, 1, 1] * H[k, 2, 2] - H[k, 1, 2] * H[k, 2, 1]
            G[0][1] = H[k, 0, 2] * H[k, 2, 1] - H[k, 0, 1] * H[k, 2, 2]
            G[0][2] = H[k, 0, 1] * H[k, 1, 2] - H[k, 0, 2] * H[k, 1, 1]
            G[1][0] = H[k, 1, 2] * H[k, 2, 0] - H[k, 1, 0] * H[k, 2, 2]
            G[1][1] = H[k, 0, 0] * H[k, 2, 2] - H[k, 0, 2] * H[k, 2, 0]
            G[1][2] = H[k, 0, 2] * H[k, 1, 0] - H[k, 0, 0] * H[k, 1, 2]
            G[2][0] = H[k, 1, 0] * H[k, 2, 1] - H[k, 1, 1] * H[k, 2, 0]
            G[2][1] = H[k, 0, 1] * H[k, 2, 0] - H[k, 0, 0] * H[k, 2, 1]
            G[2][2] = H[k, 0, 0] * H[k, 1, 1] - H[k, 0, 1] * H[k, 1, 0]
            for i in range(n):
                a0 = H[k, 0, 0] * x1[i, 0] + H[k, 0, 1] * x1[i, 1] + H[k, 0, 2]
                a1 = H[k, 1, 0] * x1[i, 0] + H[k, 1, 1] * x1[i, 1] + H[k, 1, 2]
                a2 = H[k, 2, 0] * x1[i, 0] + H[k, 2, 1] * x1[i, 1] + H[k, 2, 2]
                b0 = G[0][0] * x2[i, 0] + G[0][1] * x2[i, 1] + G[0][2]
                b1 = G[1][0] * x2[i, 0] + G[1][1] * x2[i, 1] + G[1][2]
                b2 = G[2][0] * x2[i, 0] + G[2][1] * x2[i, 1] + G[2][2]
                if a2 == 0.0 or b2 == 0.0:
                    o[k, i] = INFINITY
                    continue
                df = (a0 / a2 - x2[i, 0]) ** 2 + (a1 / a2 - x2[i, 1]) ** 2
                db = (b0 / b2 - x1[i, 0]) ** 2 + (b1 / b2 - x1[i, 1]) ** 2
                e = sqrt(df + db)
                o[k, i] = e if isfinite(e) else INFINITY
    return out


