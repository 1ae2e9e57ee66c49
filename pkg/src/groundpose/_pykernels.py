"""Pure numpy solver kernels.

This module and the compiled ``_ckernels`` extension expose the same functions
with the same array contracts. :mod:`groundpose.backend` picks one at import.

Every solver kernel returns an ``(k, 8)`` float array with one candidate per
row: ``h1..h5, f1, f2, r``. The ``h`` block satisfies ``h1^2 + h2^2 = 1`` with
``h4 >= 0``. ``r`` is the absolute residual of the withheld v-coordinate of
the third point (2.5-point solvers only, else 0), in the same units as the
input coordinates. Candidates with non-positive focals are *not* filtered
here; the caller applies positivity and saturation thresholds.

All coordinates are expected to be pre-normalised (see
:func:`groundpose.solvers.normalize_inputs`).
"""

from __future__ import annotations

import math

import numpy as np

from . import polysolve
from .errors import DegenerateConfigurationError

# Generators E_k of the ground homography, Hy = sum_k h_k E_k
BASIS = np.zeros((5, 3, 3))
BASIS[0][0, 0] = BASIS[0][2, 2] = 1.0
BASIS[1][0, 2] = 1.0
BASIS[1][2, 0] = -1.0
BASIS[2][0, 1] = 1.0
BASIS[3][1, 1] = 1.0
BASIS[4][2, 1] = 1.0

DEGENERATE_RTOL = 1e-12
_EVAL_POINTS = np.exp(2j * np.pi * np.arange(8) / 8)


def _hy(h):
    return np.array([[h[0], h[2], h[1]], [0.0, h[3], 0.0], [-h[1], h[4], h[0]]])


def _canonical(h):
    h = h / math.hypot(h[0], h[1])
    return -h if h[3] < 0 else h


def _columns(R2, a):
    """``Z[k] = R2 @ E_k @ a`` for each generator, shape (5, 3)."""
    return np.einsum("ij,kjl,l->ki", R2, BASIS, a)


def dlt_rows(x1, x2, R1, R2, mode, f1=None):
    """Coefficient matrices of the retained DLT rows, linear in ``h``.

    The rows of point ``i`` are ``u2 z_3 - f2 z_1`` and ``v2 z_3 - f2 z_2``
    with ``z = R2 Hy y1``; the v-row of the third point is left out for the
    2.5-point cases. Returns ``(M0, M1, M2)`` such that the system reads
    ``(M0 + f M1 + f^2 M2) h = 0``, with ``f`` the unknown focal.

    mode ``"fhf"``: ``y1 = R1^T (u1, v1, f)``, same ``f`` in view 2.
    mode ``"hf"``: ``y1 = R1^T (u1/f1, v1/f1, 1)``, ``f = f2`` unknown.
    mode ``"cal"``: both views normalised (``f = 1``), two points.
    """
    n_pts = len(x1)
    drop = mode in ("fhf", "hf")
    n_rows = 2 * n_pts - (1 if drop else 0)
    M = np.zeros((3, n_rows, 5))
    b = R1[2] if mode == "fhf" else None
    r = 0
    for i in range(n_pts):
        if mode == "fhf":
            a = R1.T @ np.array([x1[i, 0], x1[i, 1], 0.0])
            Zb = _columns(R2, b)
        elif mode == "hf":
            a = R1.T @ np.array([x1[i, 0] / f1, x1[i, 1] / f1, 1.0])
        else:
            a = R1.T @ np.array([x1[i, 0], x1[i, 1], 1.0])
        Za = _columns(R2, a)
        for c in (0, 1):
            if drop and i == n_pts - 1 and c == 1:
                continue
            uv = x2[i, c]
            M[0, r] = uv * Za[:, 2]
            M[1, r] = -Za[:, c]
            if mode == "fhf":
                M[1, r] += uv * Zb[:, 2]
                M[2, r] = -Zb[:, c]
            r += 1
    return M


def det_poly(M) -> np.ndarray:
    """Coefficients (ascending, length 8) of ``det(M0 + f M1 + f^2 M2)``.

    The determinant is sampled on the 8th roots of unity and interpolated with
    a DFT, which is exact for degree <= 7 and perfectly conditioned.
    """
    z = _EVAL_POINTS
    Ms = M[0][None] + z[:, None, None] * M[1][None] + (z * z)[:, None, None] * M[2][None]
    d = np.linalg.det(Ms)
    return (np.fft.fft(d) / 8.0).real


def _hadamard_scale(M) -> float:
    rows = np.sqrt((M ** 2).sum(axis=(0, 2)))
    return float(np.prod(rows))


def null_vector(A) -> np.ndarray:
    return np.linalg.svd(A)[2][-1]


def _withheld_residual(h, x1, x2, R1, R2, f1, f2):
    """|v2 - predicted v2| for the third point under candidate ``h``."""
    y1 = R1.T @ np.array([x1[2, 0] / f1, x1[2, 1] / f1, 1.0])
    z = R2 @ _hy(h) @ y1
    if z[2] == 0.0:
        return math.inf
    return abs(x2[2, 1] - f2 * z[1] / z[2])


def calibrated_kernel(x1, x2, R1, R2) -> np.ndarray:
    """Two-point solver; ``x1``, ``x2`` are ``K^-1``-normalised coordinates."""
    M = dlt_rows(x1, x2, R1, R2, "cal")
    A = M[0] + M[1]
    _, s, Vt = np.linalg.svd(A)
    if s[0] == 0.0 or s[3] <= 1e-10 * s[0]:
        raise DegenerateConfigurationError("DLT matrix has a nullspace of dimension > 1")
    h = Vt[-1]
    if math.hypot(h[0], h[1]) == 0.0:
        raise DegenerateConfigurationError("null vector has no rotation component")
    h = _canonical(h)
    return np.array([[*h, 1.0, 1.0, 0.0]])


def fhf_kernel(x1, x2, R1, R2, roots: str = "quartic") -> np.ndarray:
    M = dlt_rows(x1, x2, R1, R2, "fhf")
    c = det_poly(M)
    # det = f^3 * quartic(f); the f^3 factor is the f = 0 family
    q = c[3:8]
    scale = np.abs(q).max()
    if scale <= DEGENERATE_RTOL * _hadamard_scale(M):
        raise DegenerateConfigurationError("focal polynomial vanishes identically")
    q = q / scale
    if roots == "quartic":
        fs = polysolve.real_roots_quartic(q, tol=1e-6)
    else:
        fs = [lam for lam, _ in polysolve.real_eigenpairs(polysolve.companion_matrix(q))]
    out = []
    for f in fs:
        if f == 0.0:
            continue
        A = M[0] + f * M[1] + (f * f) * M[2]
        h = null_vector(A)
        if math.hypot(h[0], h[1]) == 0.0:
            continue
        h = _canonical(h)
        r = _withheld_residual(h, x1, x2, R1, R2, f, f)
        out.append([*h, f, f, r])
    return np.array(out).reshape(-1, 8)


def hf_kernel(x1, x2, R1, R2, f1: float, roots: str = "closed") -> np.ndarray:
    M = dlt_rows(x1, x2, R1, R2, "hf", f1=f1)
    if roots == "closed":
        c = det_poly(M)
        # det = f^2 * quadratic(f)
        q = c[2:5]
        scale = np.abs(q).max()
        if scale <= DEGENERATE_RTOL * _hadamard_scale(M):
            raise DegenerateConfigurationError("focal polynomial vanishes identically")
        q = q / scale
        fs = [polysolve.newton_polish(q, r) for r in polysolve.real_roots_quadratic(q)]
    else:
        fs = _pencil_eigenvalues(M[0], M[1])
    out = []
    for f in fs:
        if f == 0.0:
            continue
        h = null_vector(M[0] + f * M[1])
        if math.hypot(h[0], h[1]) == 0.0:
            continue
        h = _canonical(h)
        r = _withheld_residual(h, x1, x2, R1, R2, f1, f)
        out.append([*h, f1, f, r])
    return np.array(out).reshape(-1, 8)


def _pencil_eigenvalues(A, B, imag_tol: float = polysolve.IMAG_TOL):
    """Finite, nonzero, real eigenvalues of ``(A + f B) v = 0`` via QZ."""
    from scipy.linalg import eigvals

    lam = eigvals(A, -B, homogeneous_eigvals=True)
    alpha, beta = lam
    scale = np.abs(np.c_[alpha, beta]).max(axis=1)
    out = []
    for a, b, s in zip(alpha, beta, scale):
        if abs(b) <= 1e-10 * s or abs(a) <= 1e-10 * s:
            continue
        v = a / b
        if abs(v.imag) < imag_tol * (1.0 + abs(v.real)):
            out.append(float(v.real))
    return sorted(out)


def nullspace_basis(x1, x2) -> np.ndarray:
    """Three homographies spanning the DLT nullspace of three point pairs.

    ``H_k = x2_k a_k^T`` where ``a_k`` is the k-th row of ``[x1_1 x1_2 x1_3]^-1``,
    so ``H_k x1_i = delta_ki x2_k``.
    """
    X1 = np.column_stack([x1, np.ones(3)]).T
    X2 = np.column_stack([x2, np.ones(3)])
    det = np.linalg.det(X1)
    if abs(det) <= 1e-12 * np.prod(np.linalg.norm(X1, axis=0)):
        raise DegenerateConfigurationError("view-1 points are collinear")
    Ai = np.linalg.inv(X1)
    return np.einsum("ki,kj->kij", X2, Ai)


def f1hf2_kernel(x1, x2, R1, R2, roots: str = "bracket") -> np.ndarray:
    """Three-point solver with two unknown focal lengths.

    Writes ``Hy = R2^T diag(1, 1, f2) H(a) diag(1, 1, w1) R1`` with
    ``H(a) = sum_k a_k H_k`` and ``w1 = 1/f1``. Two combinations of the four
    structural equations do not involve ``f2`` and are linear in ``a``, so
    ``a(w1)`` is a cross product. The remaining consistency condition is a
    quintic in ``w1`` after its structurally zero leading term is dropped.

    ``roots``: ``"bracket"`` (critical-point isolation), ``"companion"`` or
    ``"eig"`` (companion-matrix eigenvalues, the latter via eigenpairs).
    """
    Hb = nullspace_basis(x1, x2)
    g = R2[2]
    if abs(g[1]) <= 1e-12:
        raise DegenerateConfigurationError("view-2 optical axis is orthogonal to gravity")
    P = np.diag([1.0, 1.0, 0.0])
    E33 = np.diag([0.0, 0.0, 1.0])
    # Q[d, k] = coefficient of w1^d a_k in R2^T P H D1 R1
    Q = np.stack([
        np.einsum("ij,kjl,lm->kim", R2.T @ P, Hb, P @ R1),
        np.einsum("ij,kjl,lm->kim", R2.T @ P, Hb, E33 @ R1),
    ])
    # m[d, k] = coefficient of w1^d a_k in R1^T D1 H^T e3
    m = np.stack([
        np.einsum("ij,kj->ki", R1.T @ P, Hb[:, 2, :]),
        np.einsum("ij,kj->ki", R1.T @ E33, Hb[:, 2, :]),
    ])
    c1 = g[1] * (Q[..., 0, 0] - Q[..., 2, 2]) - g[0] * Q[..., 1, 0] + g[2] * Q[..., 1, 2]
    c2 = g[1] * (Q[..., 0, 2] + Q[..., 2, 0]) - g[0] * Q[..., 1, 2] - g[2] * Q[..., 1, 0]
    # a(w1) = c1(w1) x c2(w1), a quadratic 3-vector
    Acoef = np.stack([
        np.cross(c1[0], c2[0]),
        np.cross(c1[0], c2[1]) + np.cross(c1[1], c2[0]),
        np.cross(c1[1], c2[1]),
    ])

    def cubic(coef):
        p = np.zeros(4)
        for i in range(3):
            for j in range(2):
                p[i + j] += Acoef[i] @ coef[j]
        return p

    q10, q12 = cubic(Q[:, :, 1, 0]), cubic(Q[:, :, 1, 2])
    m0, m2 = cubic(m[:, :, 0]), cubic(m[:, :, 2])
    F = np.convolve(q10, m2) - np.convolve(q12, m0)
    quintic = F[:6]
    scale = np.abs(quintic).max()
    if scale == 0.0 or not np.isfinite(scale):
        raise DegenerateConfigurationError("focal polynomial vanishes identically")
    quintic = quintic / scale
    if roots == "eig":
        ws = [lam for lam, _ in polysolve.real_eigenpairs(polysolve.companion_matrix(quintic))]
        ws = [polysolve.newton_polish(quintic, w) for w in ws]
    elif roots == "companion":
        ws = polysolve.real_roots_companion(quintic)
    elif roots == "bracket":
        ws = polysolve.real_roots_bracketed(quintic)
    else:
        raise ValueError(f"unknown root method {roots!r}")
    out = []
    for w1 in ws:
        if w1 == 0.0:
            continue
        a = Acoef[0] + w1 * Acoef[1] + (w1 * w1) * Acoef[2]
        Q0 = np.einsum("k,kij->ij", a, Q[0] + w1 * Q[1])
        mm = a @ (m[0] + w1 * m[1])
        den = g[1] * (mm[0] ** 2 + mm[2] ** 2)
        if den == 0.0:
            continue
        f2 = -(Q0[1, 0] * mm[0] + Q0[1, 2] * mm[2]) / den
        Hy = Q0 + f2 * np.outer(g, mm)
        h = np.array([
            0.5 * (Hy[0, 0] + Hy[2, 2]),
            0.5 * (Hy[0, 2] - Hy[2, 0]),
            Hy[0, 1], Hy[1, 1], Hy[2, 1],
        ])
        if math.hypot(h[0], h[1]) == 0.0:
            continue
        out.append([*_canonical(h), 1.0 / w1, f2, 0.0])
    return np.array(out).reshape(-1, 8)


def adjugate(H) -> np.ndarray:
    """Batched 3x3 adjugate; a projective inverse that never fails."""
    c0, c1, c2 = H[..., :, 0], H[..., :, 1], H[..., :, 2]
    return np.stack([np.cross(c1, c2), np.cross(c2, c0), np.cross(c0, c1)], axis=-2)


def transfer_errors(H, x1, x2) -> np.ndarray:
    """Symmetric transfer error of each homography on each correspondence.

    ``H`` is ``(k, 3, 3)``; returns ``(k, n)`` holding
    ``sqrt(d(x2, H x1)^2 + d(x1, H^-1 x2)^2)``.
    """
    H = np.asarray(H, dtype=float).reshape(-1, 3, 3)
    n = len(x1)
    X1 = np.column_stack([x1, np.ones(n)])
    X2 = np.column_stack([x2, np.ones(n)])
    fwd = np.einsum("kij,nj->kni", H, X1)
    Hinv = adjugate(H)
    bwd = np.einsum("kij,nj->kni", Hinv, X2)
    with np.errstate(divide="ignore", invalid="ignore"):
        d_f = ((fwd[..., :2] / fwd[..., 2:] - x2) ** 2).sum(-1)
        d_b = ((bwd[..., :2] / bwd[..., 2:] - x1) ** 2).sum(-1)
        err = np.sqrt(d_f + d_b)
    return np.where(np.isfinite(err), err, np.inf)
