"""Dense linear algebra over truncated Laurent series.

Matrices are plain lists of lists of LaurentSeries.  Sizes stay small
(a handful of rows), so cubic algorithms with order-based pivoting are fine.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import NumericalError
from .qcore import Config, LaurentSeries


def smat_zero(n: int, m: int, ram: int = 1):
    return [[LaurentSeries.zero(ram) for _ in range(m)] for _ in range(n)]


def smat_eye(n: int, ram: int = 1):
    A = smat_zero(n, n, ram)
    for i in range(n):
        A[i][i] = LaurentSeries.one(ram)
    return A


def smat_from_const(M, ram: int = 1):
    M = np.asarray(M, dtype=np.complex128)
    return [[LaurentSeries.const(M[i, j], ram) for j in range(M.shape[1])]
            for i in range(M.shape[0])]


def smat_shape(A):
    return len(A), len(A[0])


def smat_copy(A):
    return [[e.copy() for e in row] for row in A]


def smat_add(A, B):
    return [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def smat_sub(A, B):
    return [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def smat_scale(A, c):
    return [[e * c for e in row] for row in A]


def smat_mul(A, B):
    n, k = smat_shape(A)
    k2, m = smat_shape(B)
    assert k == k2
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            s = A[i][0] * B[0][j]
            for t in range(1, k):
                s = s + A[i][t] * B[t][j]
            row.append(s)
        out.append(row)
    return out


def smat_vec(A, v):
    n, k = smat_shape(A)
    out = []
    for i in range(n):
        s = A[i][0] * v[0]
        for t in range(1, k):
            s = s + A[i][t] * v[t]
        out.append(s)
    return out


def smat_phi(A, pow: int, cfg: Config):
    return [[e.phi(pow, cfg) for e in row] for row in A]


def svec_phi(v, pow: int, cfg: Config):
    return [e.phi(pow, cfg) for e in v]


def smat_transpose(A):
    n, m = smat_shape(A)
    return [[A[i][j] for i in range(n)] for j in range(m)]


def smat_kron(A, B):
    n, m = smat_shape(A)
    p, r = smat_shape(B)
    out = smat_zero(n * p, m * r)
    for i in range(n):
        for j in range(m):
            for a in range(p):
                for b in range(r):
                    out[i * p + a][j * r + b] = A[i][j] * B[a][b]
    return out


def smat_max_abs(A) -> float:
    return max(e.max_abs() for row in A for e in row)


def smat_const_part(A):
    """Coefficient of z^0 as a numpy matrix."""
    n, m = smat_shape(A)
    M = np.zeros((n, m), dtype=np.complex128)
    for i in range(n):
        for j in range(m):
            M[i, j] = A[i][j].coeff(0)
    return M


def smat_nonconst_norm(A) -> float:
    """Largest coefficient away from z^0; measures distance to constancy."""
    best = 0.0
    for row in A:
        for e in row:
            for i, c in enumerate(e.coeffs):
                if e.lo + i != 0:
                    best = max(best, abs(c))
    return best


def smat_rerami(A, ram: int):
    return [[e.rerami(ram) for e in row] for row in A]


def smat_shift(A, exp):
    return [[e.shift(exp) for e in row] for row in A]


def smat_clean(A, tol: float):
    return [[e.clean(tol) for e in row] for row in A]


def _pivot(col, used, tol):
    """Index of the unused entry of minimal order with decent size."""
    best, besto, bestm = None, None, 0.0
    for i, e in enumerate(col):
        if i in used:
            continue
        o = e.ord(tol)
        if o is None:
            continue
        m = abs(e.coeff(o))
        if besto is None or o < besto or (o == besto and m > bestm):
            best, besto, bestm = i, o, m
    return best


def smat_solve(A, B, cfg: Config):
    """Solve A X = B over the series ring by order-pivoted elimination.

    A must be square and invertible as a series matrix (determinant a unit
    in the window).  B may be a matrix or a vector of series.
    """
    n, m = smat_shape(A)
    assert n == m
    vec = not isinstance(B[0], list)
    Bm = [[b] for b in B] if vec else smat_copy(B)
    Am = smat_copy(A)
    perm = []
    used = set()
    for j in range(n):
        col = [Am[i][j] for i in range(n)]
        p = _pivot(col, used, cfg.tol)
        if p is None:
            raise NumericalError("singular series matrix in solve")
        used.add(p)
        perm.append(p)
        inv = Am[p][j].invert(cfg.prec, cfg.tol)
        Am[p] = [e * inv for e in Am[p]]
        Bm[p] = [e * inv for e in Bm[p]]
        for i in range(n):
            if i == p:
                continue
            f = Am[i][j]
            if f.is_zero():
                continue
            Am[i] = [a - f * b for a, b in zip(Am[i], Am[p])]
            Bm[i] = [a - f * b for a, b in zip(Bm[i], Bm[p])]
    X = [[None] * len(Bm[0]) for _ in range(n)]
    for j, p in enumerate(perm):
        X[j] = Bm[p]
    return [row[0] for row in X] if vec else X


def smat_inverse(A, cfg: Config):
    n, _ = smat_shape(A)
    ram = max(e.ram for row in A for e in row)
    return smat_solve(A, smat_eye(n, ram), cfg)


def smat_det(A, cfg: Config) -> LaurentSeries:
    """Determinant by cofactor expansion (sizes are small)."""
    n, _ = smat_shape(A)
    if n == 1:
        return A[0][0]
    if n == 2:
        return A[0][0] * A[1][1] - A[0][1] * A[1][0]
    det = None
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in A[1:]]
        term = A[0][j] * smat_det(minor, cfg)
        if j % 2:
            term = -term
        det = term if det is None else det + term
    return det


def det_valuation(A, cfg: Config, r: float = 0.02, N: int = 512) -> Fraction | None:
    """Valuation of det A at 0, as a winding number of det A(w) on the
    circle |w| = r in the ramified variable w = z^{1/ram}.

    LU determinants are multiplicative, so the phase survives even when
    |det| is far below the additive cancellation floor of an expanded
    determinant.  Returns None when the determinant looks identically zero.
    """
    n, _ = smat_shape(A)
    ram = max(e.ram for row in A for e in row)
    Ac = [[e.rerami(ram) for e in row] for row in A]
    los = [[e.lo for e in row] for row in Ac]
    coeffs = [[e.coeffs for e in row] for row in Ac]
    phases = np.zeros(N)
    prev = None
    total = 0.0
    for k in range(N):
        w = r * np.exp(2j * np.pi * k / N)
        M = np.empty((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                c = coeffs[i][j]
                M[i, j] = np.polyval(c[::-1], w) * w ** los[i][j]
        sign, logdet = np.linalg.slogdet(M)
        if not np.isfinite(logdet) or sign == 0:
            return None
        th = np.angle(sign)
        if prev is not None:
            d = th - prev
            while d > np.pi:
                d -= 2 * np.pi
            while d < -np.pi:
                d += 2 * np.pi
            total += d
        else:
            first = th
        prev = th
    # close the loop
    d = first - prev
    while d > np.pi:
        d -= 2 * np.pi
    while d < -np.pi:
        d += 2 * np.pi
    total += d
    wind = total / (2 * np.pi)
    iw = round(wind)
    if abs(wind - iw) > 0.2:
        raise NumericalError(f"det winding number did not converge ({wind:.3f})")
    return Fraction(iw, ram)


def smat_det_ord(A, cfg: Config):
    """ord(det A) computed as the sum of pivot orders in an order-pivoted
    elimination.  Far more robust than expanding the determinant, whose
    leading coefficient can drown in cancellation noise.
    """
    Am = smat_copy(A)
    n, _ = smat_shape(Am)
    used: set[int] = set()
    total = Fraction(0)
    for j in range(n):
        col = [Am[i][j] for i in range(n)]
        p = _pivot(col, used, cfg.tol)
        if p is None:
            return None
        used.add(p)
        o = Am[p][j].ord(cfg.tol)
        total += o
        inv = Am[p][j].invert(cfg.prec, cfg.tol)
        piv = [e * inv for e in Am[p]]
        for i in range(n):
            if i in used:
                continue
            f = Am[i][j]
            if f.is_zero():
                continue
            Am[i] = [a - f * b for a, b in zip(Am[i], piv)]
    return total


def smat_rank(A, cfg: Config) -> int:
    """Rank over the series field, decided by order-pivoted elimination."""
    Am = smat_copy(A)
    n, m = smat_shape(Am)
    used = set()
    rank = 0
    for j in range(m):
        col = [Am[i][j] for i in range(n)]
        p = _pivot(col, used, cfg.tol)
        if p is None:
            continue
        used.add(p)
        rank += 1
        inv = Am[p][j].invert(cfg.prec, cfg.tol)
        piv = [e * inv for e in Am[p]]
        for i in range(n):
            if i in used:
                continue
            f = Am[i][j]
            if f.is_zero():
                continue
            Am[i] = [a - f * b for a, b in zip(Am[i], piv)]
    return rank


# ---------------------------------------------------------------------------
# Numeric helpers on constant matrices


def nullspace(M: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of the numerical kernel, columns."""
    M = np.atleast_2d(np.asarray(M, dtype=np.complex128))
    if M.shape[0] == 0:
        return np.eye(M.shape[1], dtype=np.complex128)
    u, s, vh = np.linalg.svd(M)
    scale = s[0] if len(s) and s[0] > 0 else 1.0
    r = int(np.sum(s > rtol * scale))
    return vh[r:].conj().T


def numrank(M: np.ndarray, rtol: float = 1e-9) -> int:
    M = np.atleast_2d(np.asarray(M, dtype=np.complex128))
    s = np.linalg.svd(M, compute_uv=False)
    if len(s) == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def eig_clusters(M: np.ndarray, rtol: float = 1e-6):
    """Eigenvalues of M grouped into clusters of relatively nearby values.

    Returns a list of (value, multiplicity) with value the cluster mean.
    The comparison is relative: spectra here spread over many powers of q,
    and floating point eigenvalues of derogatory matrices scatter.
    """
    vals = np.linalg.eigvals(M)
    clusters: list[list[complex]] = []
    for v in vals:
        for c in clusters:
            ref = max(abs(v), abs(c[0]))
            if abs(v - c[0]) < rtol * max(ref, 1e-300):
                c.append(v)
                break
        else:
            clusters.append([v])
    return [(complex(np.mean(c)), len(c)) for c in clusters]


def schur_split(M: np.ndarray, select, first: bool = True):
    """Unitary Z with Z^H M Z block upper triangular, the selected
    eigenvalue group leading (first=True) or trailing.

    Returns (Z, m) with m the size of the selected group.
    """
    from scipy.linalg import schur

    sel = select if first else (lambda x: not select(x))
    T, Z, sdim = schur(np.asarray(M, dtype=np.complex128), output="complex",
                       sort=lambda x: bool(sel(x)))
    m = sdim if first else M.shape[0] - sdim
    return Z, m


def _rel_close(a: complex, b: complex, rtol: float) -> bool:
    return abs(a - b) < rtol * max(abs(a), abs(b), 1e-300)


def generalized_eigenspace(M: np.ndarray, lam: complex, mult: int,
                           rtol: float = 1e-9, ctol: float = 2e-3) -> np.ndarray:
    """Orthonormal basis of the generalized eigenspace of the cluster at lam.

    Uses a sorted Schur decomposition; cluster membership is decided
    relatively (spectra here live on many scales of |q|).
    """
    Z, m = schur_split(M, lambda x: _rel_close(x, lam, ctol), first=True)
    return Z[:, :m]


def jordan_block_sizes(M: np.ndarray, lam: complex, mult: int, rtol: float = 1e-8,
                       ctol: float = 2e-3) -> list[int]:
    """Jordan block sizes of M at eigenvalue lam with total multiplicity mult.

    Restricts M to the generalized eigenspace first, then decides block
    sizes from numerical ranks of (M - lam)^k.
    """
    V = generalized_eigenspace(M, lam, mult, rtol, ctol)
    Mr = V.conj().T @ M @ V
    d = Mr.shape[0]
    # normalize so the cluster lives at scale one; true singular values of
    # the nilpotent powers then sit far above the eigenvalue scatter floor
    scale = max(abs(lam), float(np.linalg.norm(Mr, 2)) / max(d, 1), 1e-300)
    N = (Mr - lam * np.eye(d)) / scale
    ranks = [d]
    P = np.eye(d, dtype=np.complex128)
    floor = 3e-3
    for k in range(1, d + 1):
        P = P @ N
        s = np.linalg.svd(P, compute_uv=False)
        r = int(np.sum(s > floor ** k)) if len(s) else 0
        r = min(r, ranks[-1])
        ranks.append(r)
        if r == 0:
            break
    while len(ranks) < d + 2:
        ranks.append(ranks[-1])
    # number of blocks of size >= k is ranks[k-1] - ranks[k]
    sizes = []
    for k in range(1, d + 1):
        gek = ranks[k - 1] - ranks[k]
        gek1 = ranks[k] - ranks[k + 1]
        sizes += [k] * (gek - gek1)
    return sorted((s for s in sizes if s > 0), reverse=True)
