"""Real roots of small polynomials and real eigenpairs of small matrices.

Coefficient vectors are in ascending order: ``c[k]`` multiplies ``x**k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

IMAG_TOL = 1e-6
MERGE_TOL = 1e-7


@dataclass(frozen=True)
class Quartic:
    c0: float
    c1: float
    c2: float
    c3: float
    c4: float

    @classmethod
    def from_roots(cls, roots, lead: float = 1.0) -> "Quartic":
        if len(roots) != 4:
            raise InvalidInputError("a quartic has four roots")
        c = lead * np.poly(roots)[::-1].real
        return cls(*map(float, c))

    def coefficients(self) -> np.ndarray:
        return np.array([self.c0, self.c1, self.c2, self.c3, self.c4])

    def __call__(self, x):
        return polyval(self.coefficients(), x)


def polyval(c, x):
    """Horner evaluation of an ascending coefficient vector."""
    acc = 0.0 * x
    for ck in reversed(c):
        acc = acc * x + ck
    return acc


def _polyval_deriv(c, x):
    p, dp = 0.0, 0.0
    for ck in reversed(c):
        dp = dp * x + p
        p = p * x + ck
    return p, dp


def newton_polish(c, x: float, steps: int = 1) -> float:
    for _ in range(steps):
        p, dp = _polyval_deriv(c, x)
        if dp == 0.0 or not math.isfinite(dp):
            break
        x_new = x - p / dp
        if not math.isfinite(x_new):
            break
        # a Newton step that makes things worse is dropped
        if abs(polyval(c, x_new)) > abs(p):
            break
        x = x_new
    return x


def _collapse(roots, rel: float = MERGE_TOL, floor: float = 1.0) -> list[float]:
    out: list[float] = []
    for r in sorted(roots):
        if out and abs(r - out[-1]) <= rel * max(floor, abs(r), abs(out[-1])):
            continue
        out.append(r)
    return out


def real_roots_quadratic(c) -> list[float]:
    """Real roots of ``c0 + c1 x + c2 x^2`` (cancellation-free form)."""
    c0, c1, c2 = (float(v) for v in c)
    if c2 == 0.0:
        if c1 == 0.0:
            return []
        return [-c0 / c1]
    disc = c1 * c1 - 4.0 * c2 * c0
    if disc < 0.0:
        # slightly negative discriminants of double roots are rounding noise
        if -disc > 1e-12 * (c1 * c1 + abs(4.0 * c2 * c0)):
            return []
        disc = 0.0
    sq = math.sqrt(disc)
    qq = -0.5 * (c1 + math.copysign(sq, c1))
    if qq == 0.0:
        return [0.0, 0.0]
    r1 = qq / c2
    r2 = c0 / qq
    return sorted([r1, r2])


def real_roots_cubic(c) -> list[float]:
    """Real roots of ``c0 + c1 x + c2 x^2 + c3 x^3``."""
    c0, c1, c2, c3 = (float(v) for v in c)
    if c3 == 0.0:
        return real_roots_quadratic((c0, c1, c2))
    a, b, d = c2 / c3, c1 / c3, c0 / c3
    # x = t - a/3 gives t^3 + P t + Q
    P = b - a * a / 3.0
    Q = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + d
    shift = -a / 3.0
    disc = (Q / 2.0) ** 2 + (P / 3.0) ** 3
    if P == 0.0 and Q == 0.0:
        ts = [0.0]
    elif disc > 0.0:
        sq = math.sqrt(disc)
        u = -Q / 2.0 + math.copysign(sq, -Q)
        u = math.copysign(abs(u) ** (1.0 / 3.0), u)
        ts = [u - P / (3.0 * u)] if u != 0.0 else [0.0]
    else:
        # three real roots (possibly repeated)
        rho = 2.0 * math.sqrt(max(-P / 3.0, 0.0))
        if rho == 0.0:
            ts = [0.0]
        else:
            arg = 3.0 * Q / (P * rho) if P != 0.0 else 0.0
            arg = min(1.0, max(-1.0, arg))
            phi = math.acos(arg) / 3.0
            ts = [rho * math.cos(phi - 2.0 * math.pi * k / 3.0) for k in range(3)]
    monic = (d, b, a, 1.0)
    return _collapse(newton_polish(monic, t + shift) for t in ts)


def _quartic_monic(a3, a2, a1, a0) -> list[float]:
    """Ferrari's method on ``x^4 + a3 x^3 + a2 x^2 + a1 x + a0``."""
    shift = -a3 / 4.0
    a3s = a3 * a3
    p = a2 - 3.0 * a3s / 8.0
    q = a1 - a3 * a2 / 2.0 + a3s * a3 / 8.0
    r = a0 - a3 * a1 / 4.0 + a3s * a2 / 16.0 - 3.0 * a3s * a3s / 256.0
    q_scale = max(abs(a1), abs(a3 * a2) / 2.0, abs(a3s * a3) / 8.0, 1e-300)
    ys: list[float] = []
    if abs(q) <= 1e-14 * q_scale:
        for z in real_roots_quadratic((r, p, 1.0)):
            if z > 0.0:
                s = math.sqrt(z)
                ys.extend([s, -s])
            elif z > -1e-12 * max(1.0, abs(p)):
                ys.append(0.0)
    else:
        # resolvent cubic m^3 + p m^2 + (p^2/4 - r) m - q^2/8 = 0 has a root m > 0
        ms = real_roots_cubic((-q * q / 8.0, p * p / 4.0 - r, p, 1.0))
        m = max(ms)
        if m <= 0.0:
            return []
        s = math.sqrt(2.0 * m)
        k = q / (2.0 * s)
        ys.extend(real_roots_quadratic((p / 2.0 + m + k, -s, 1.0)))
        ys.extend(real_roots_quadratic((p / 2.0 + m - k, s, 1.0)))
    return [y + shift for y in ys]


def real_roots_quartic(q, tol: float = 1e-6) -> list[float]:
    """Real roots of a quartic by the closed-form formula.

    ``q`` is a :class:`Quartic` or five ascending coefficients. A zero leading
    coefficient drops to the cubic/quadratic/linear formula. Each root gets one
    Newton step on the original polynomial and roots whose scaled residual
    ``|q(r)| / max(1, max|c|)`` is not below ``tol`` are discarded.
    """
    c = q.coefficients() if isinstance(q, Quartic) else np.asarray(q, dtype=float).ravel()
    if c.shape != (5,):
        raise InvalidInputError("a quartic has five coefficients")
    if not np.all(np.isfinite(c)):
        raise InvalidInputError("non-finite quartic coefficients")
    if not np.any(c):
        raise InvalidInputError("the zero polynomial has no isolated roots")
    if c[4] != 0.0:
        roots = _quartic_monic(c[3] / c[4], c[2] / c[4], c[1] / c[4], c[0] / c[4])
    elif c[3] != 0.0:
        roots = real_roots_cubic(c[:4])
    else:
        roots = real_roots_quadratic(c[:3])
    scale = max(1.0, float(np.abs(c).max()))
    out = []
    for r in roots:
        r = newton_polish(c, r)
        if math.isfinite(r) and abs(polyval(c, r)) / scale < tol:
            out.append(r)
    return _collapse(out)


def companion_matrix(c) -> np.ndarray:
    """Upper Hessenberg companion matrix of an ascending coefficient vector."""
    c = np.trim_zeros(np.asarray(c, dtype=float), "b")
    n = len(c) - 1
    if n < 1:
        raise InvalidInputError("companion matrix needs degree >= 1")
    C = np.zeros((n, n))
    C[0, :] = -c[-2::-1] / c[-1]
    C[np.arange(1, n), np.arange(n - 1)] = 1.0
    return C


def real_eigenpairs(m, tol: float = 1e-8, imag_tol: float = IMAG_TOL):
    """Real eigenvalues of a small dense matrix with their eigenvectors.

    Conjugate pairs are discarded when ``|Im l| >= imag_tol * (1 + |Re l|)``.
    Eigenvectors are returned with unit norm. Pairs whose residual
    ``||M v - l v|| / ||v||`` exceeds ``tol * ||M||`` are dropped.
    """
    M = np.asarray(m, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise InvalidInputError("expected a non-empty square matrix")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("matrix has non-finite entries")
    vals, vecs = np.linalg.eig(M)
    norm = max(np.linalg.norm(M, 2), np.finfo(float).tiny)
    pairs = []
    for lam, v in zip(vals, vecs.T):
        if abs(lam.imag) >= imag_tol * (1.0 + abs(lam.real)):
            continue
        lr = float(lam.real)
        vr = v.real if np.linalg.norm(v.real) >= np.linalg.norm(v.imag) else v.imag
        vr = vr / np.linalg.norm(vr)
        if np.linalg.norm(M @ vr - lr * vr) > tol * norm:
            continue
        pairs.append((lr, vr))
    pairs.sort(key=lambda p: p[0])
    return pairs


def real_roots_companion(c, imag_tol: float = IMAG_TOL, polish: bool = True) -> list[float]:
    """Real polynomial roots from the eigenvalues of the companion matrix."""
    c = np.trim_zeros(np.asarray(c, dtype=float), "b")
    if len(c) == 0:
        raise InvalidInputError("the zero polynomial has no isolated roots")
    if len(c) == 1:
        return []
    vals = np.linalg.eigvals(companion_matrix(c))
    roots = [float(v.real) for v in vals if abs(v.imag) < imag_tol * (1.0 + abs(v.real))]
    if polish:
        roots = [newton_polish(c, r) for r in roots]
    return _collapse(roots)


def _bisect_newton(c, lo: float, hi: float, plo: float, iters: int = 200) -> float:
    """Root of ``c`` in ``[lo, hi]`` given a sign change; Newton kept inside the bracket."""
    x = 0.5 * (lo + hi)
    for _ in range(iters):
        p, dp = _polyval_deriv(c, x)
        if p == 0.0:
            return x
        if (p < 0.0) == (plo < 0.0):
            lo, plo = x, p
        else:
            hi = x
        step = x - p / dp if dp != 0.0 else lo - 1.0
        # a converged step may leave the bracket by roundoff
        if abs(step - x) <= 1e-15 * abs(x):
            return step if lo <= step <= hi else x
        x_new = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4e-16 * abs(x) or x_new in (lo, hi):
            return x_new
        x = x_new
    return x


def root_bound(c) -> float:
    """Fujiwara bound on the moduli of the roots of ``c`` (ascending)."""
    c = np.asarray(c, dtype=float)
    n = len(c) - 1
    r = np.abs(c[:-1] / c[-1]) ** (1.0 / (n - np.arange(n)))
    r[0] *= 0.5 ** (1.0 / n)
    # the floor keeps subnormal roots inside after the halving underflows
    return 2.0 * float(r.max()) + 1e-300


def real_roots_bracketed(c) -> list[float]:
    """Real roots isolated between the critical points of the polynomial.

    The derivative's real roots, found by the same routine, split the line
    into monotone pieces holding at most one root each; pieces with a sign
    change are refined by bracketed Newton. Roots of even multiplicity
    without a sign change are not reported.
    """
    c = np.trim_zeros(np.asarray(c, dtype=float), "b")
    if len(c) == 0:
        raise InvalidInputError("the zero polynomial has no isolated roots")
    deg = len(c) - 1
    if deg == 0:
        return []
    if deg == 1:
        return [-c[0] / c[1]]
    if deg == 2:
        return real_roots_quadratic(c)
    crit = real_roots_bracketed(np.arange(1, deg + 1) * c[1:])
    bound = root_bound(c)
    pts = [-bound] + [x for x in crit if -bound < x < bound] + [bound]
    vals = [polyval(c, x) for x in pts]
    # outside the bound p has the sign it has at infinity; this also
    # survives underflow when all roots are tiny
    lead = math.copysign(1.0, c[-1])
    vals[0], vals[-1] = lead * (-1.0) ** deg, lead
    roots = []
    for i in range(len(pts) - 1):
        a, b, pa, pb = pts[i], pts[i + 1], vals[i], vals[i + 1]
        if pa == 0.0:
            roots.append(a)
        elif (pa < 0.0) != (pb < 0.0) and pb != 0.0:
            roots.append(_bisect_newton(c, a, b, pa))
    # pieces are disjoint, so only a relative merge is needed
    return _collapse(roots, floor=0.0)
