"""The skew Laurent operator ring K_n[P, P^-1] with P z = q z P.

Provides operator arithmetic, Newton polygons, the ascending slope
factorization, and cyclic vectors with minimal operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError, NumericalError
from .linalg import smat_inverse, smat_rank, smat_solve, smat_vec, svec_phi
from .qcore import Config, LaurentSeries


class SkewOperator:
    """A finite sum of terms a_k * P^k with Laurent series coefficients.

    The ring relation is P * z^lam = q^lam * z^lam * P.
    """

    __slots__ = ("ram", "terms")

    def __init__(self, ram: int, terms: dict[int, LaurentSeries] | None = None):
        self.ram = int(ram)
        self.terms: dict[int, LaurentSeries] = {}
        if terms:
            for k, c in terms.items():
                if not c.is_zero():
                    self.terms[int(k)] = c.rerami(np.lcm(self.ram, c.ram)) if c.ram != ram else c
            if self.terms:
                r = self.ram
                for c in self.terms.values():
                    r = int(np.lcm(r, c.ram))
                if r != self.ram:
                    self.ram = r
                self.terms = {k: c.rerami(self.ram) for k, c in self.terms.items()}

    # -- constructors ---------------------------------------------------

    @staticmethod
    def zero(ram: int = 1) -> "SkewOperator":
        return SkewOperator(ram, {})

    @staticmethod
    def phi_power(k: int, ram: int = 1) -> "SkewOperator":
        return SkewOperator(ram, {k: LaurentSeries.one(ram)})

    @staticmethod
    def from_series(f: LaurentSeries) -> "SkewOperator":
        return SkewOperator(f.ram, {0: f})

    @staticmethod
    def monomial(c: complex, exp: Fraction | int, k: int) -> "SkewOperator":
        f = LaurentSeries.monomial(c, exp)
        return SkewOperator(f.ram, {k: f})

    # -- structure ------------------------------------------------------

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(c.is_zero(tol) for c in self.terms.values())

    def kmin(self) -> int:
        return min(self.terms) if self.terms else 0

    def kmax(self) -> int:
        return max(self.terms) if self.terms else 0

    def degree(self) -> int:
        return self.kmax()

    def coeff(self, k: int) -> LaurentSeries:
        return self.terms.get(k, LaurentSeries.zero(self.ram))

    def max_abs(self) -> float:
        return max((c.max_abs() for c in self.terms.values()), default=0.0)

    def rerami(self, ram: int) -> "SkewOperator":
        if ram == self.ram:
            return self
        return SkewOperator(ram, {k: c.rerami(ram) for k, c in self.terms.items()})

    def clean(self, tol: float) -> "SkewOperator":
        scale = max(1.0, self.max_abs())
        out = {}
        for k, c in self.terms.items():
            cc = LaurentSeries(c.ram, c.lo,
                               np.where(np.abs(c.coeffs) > tol * scale, c.coeffs, 0.0),
                               c.exact)
            if not cc.is_zero():
                out[k] = cc
        return SkewOperator(self.ram, out)

    def copy(self) -> "SkewOperator":
        return SkewOperator(self.ram, {k: c.copy() for k, c in self.terms.items()})

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = [f"({self.terms[k]!r})*P^{k}" for k in sorted(self.terms, reverse=True)]
        return " + ".join(parts)

    # -- ring operations --------------------------------------------------

    def __add__(self, other: "SkewOperator") -> "SkewOperator":
        r = int(np.lcm(self.ram, other.ram))
        a, b = self.rerami(r), other.rerami(r)
        out = dict(a.terms)
        for k, c in b.terms.items():
            out[k] = out[k] + c if k in out else c
        return SkewOperator(r, out)

    def __neg__(self) -> "SkewOperator":
        return SkewOperator(self.ram, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other: "SkewOperator") -> "SkewOperator":
        return self + (-other)

    def scale(self, c: complex) -> "SkewOperator":
        return SkewOperator(self.ram, {k: v * c for k, v in self.terms.items()})


def skew_mul(L1: SkewOperator, L2: SkewOperator, cfg: Config) -> SkewOperator:
    """Product in the skew ring: P^k * f = phi^k(f) * P^k."""
    r = int(np.lcm(L1.ram, L2.ram))
    a, b = L1.rerami(r), L2.rerami(r)
    out: dict[int, LaurentSeries] = {}
    for i, f in a.terms.items():
        for j, g in b.terms.items():
            term = f * g.phi(i, cfg)
            k = i + j
            out[k] = out[k] + term if k in out else term
    return SkewOperator(r, out)


def op_mul_series_left(u: LaurentSeries, L: SkewOperator) -> SkewOperator:
    return SkewOperator(L.ram, {k: u * c for k, c in L.terms.items()})


def op_mul_series_right(L: SkewOperator, u: LaurentSeries, cfg: Config) -> SkewOperator:
    return SkewOperator(L.ram, {k: c * u.phi(k, cfg) for k, c in L.terms.items()})


# ---------------------------------------------------------------------------
# Newton polygon


@dataclass(frozen=True)
class NewtonPolygon:
    vertices: tuple  # ((i, h) ...) along the finite boundary, ascending i
    segments: tuple  # ((slope, length) ...) slopes strictly ascending

    @property
    def slopes(self):
        return tuple(s for s, _ in self.segments)

    def slope_multiset(self) -> dict:
        """Slope -> total horizontal length."""
        ms: dict[Fraction, int] = {}
        for s, ln in self.segments:
            ms[s] = ms.get(s, 0) + ln
        return ms


def newton_polygon(L: SkewOperator, tol: float = 1e-10) -> NewtonPolygon:
    """Upper convex envelope of the points (i, -ord(a_i)).

    Segments are reported in ascending slope order; the operator P - c z^t
    yields the single slope t.
    """
    if L.is_zero():
        raise DomainError("the zero operator has no Newton polygon")
    pts = []
    for k in sorted(L.terms):
        o = L.terms[k].ord(tol)
        if o is not None:
            pts.append((k, -o))
    if not pts:
        raise DomainError("operator has no coefficients above tolerance")
    # upper hull, left to right
    hull: list[tuple[int, Fraction]] = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # upper hull: successive slopes must strictly decrease
            if (y2 - y1) * (p[0] - x2) <= (p[1] - y2) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(p)
    segs = []
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        segs.append((Fraction(y2 - y1, x2 - x1), x2 - x1))
    segs.reverse()  # ascending slopes
    return NewtonPolygon(tuple(hull), tuple(segs))


# ---------------------------------------------------------------------------
# Slope factorization


@dataclass
class FactorizationResult:
    factors: list
    slopes: list
    residual: float


def _normalize_unit(L: SkewOperator, cfg: Config):
    """Left-multiply by a monomial unit so ord(a_0) = 0 with unit value 1.

    Returns (normalized operator, the unit u used), with u*L = normalized.
    """
    a0 = L.coeff(L.kmin())
    o = a0.ord(cfg.tol)
    lead = a0.coeff(o)
    u = LaurentSeries.monomial(1.0 / lead, -o)
    return op_mul_series_left(u.rerami(int(np.lcm(u.ram, L.ram))), L), u


def _weight_slice(L: SkewOperator, t: int, anchor: int, k: int, D: int):
    """Weight-k coefficients: slot i holds the coefficient of z^{e/ram}
    in a_i where e + t*i = anchor + k."""
    out = np.zeros(D + 1, dtype=np.complex128)
    for i, c in L.terms.items():
        if i > D:
            continue
        e = anchor + k - t * i
        out[i] = c.coeff(Fraction(e, c.ram))
    return out


def _slope_split(L: SkewOperator, cfg: Config):
    """Split off the lowest-slope factor: L = L1 * R with L1 pure.

    L must have ord(a_0) = 0 after unit normalization and kmin = 0.
    Mode-by-mode lifting in increasing weight; each weight is one dense
    linear solve, invertible because the segment polynomial has nonzero
    endpoints.
    """
    poly = newton_polygon(L, cfg.tol)
    lam1, d1 = poly.segments[0]
    D = L.degree()
    R_amb = int(np.lcm(L.ram, lam1.denominator))
    L = L.rerami(R_amb)
    t = int(lam1 * R_amb)
    q = cfg.q

    aD = L.coeff(D)
    oD = int(aD.ord(cfg.tol) * R_amb)
    anchor = oD + t * D

    # initial forms: R0 = P^{D-d1}, L1_0 = the lowest-slope segment
    L10 = {}
    for i in range(d1 + 1):
        deg = D - d1 + i
        e = anchor - t * deg
        c = L.coeff(deg).coeff(Fraction(e, R_amb))
        if abs(c) > 0:
            L10[i] = LaurentSeries(R_amb, e, [c], exact=True)
    L1 = SkewOperator(R_amb, L10)
    R = SkewOperator.phi_power(D - d1, R_amb)

    seg = np.array([L1.coeff(i).coeff(Fraction(anchor - t * (D - d1 + i), R_amb))
                    for i in range(d1 + 1)])

    E = L - skew_mul(L1, R, cfg)
    scale = max(1.0, L.max_abs())

    # available weight range from the coefficient windows
    Kmax = cfg.prec * R_amb
    for i, c in L.terms.items():
        if not c.exact:
            hi = c.lo + len(c.coeffs)
            Kmax = min(Kmax, hi - (anchor - t * i))

    nL, nR = d1, D - d1 + 1  # unknown slots per weight
    for k in range(1, max(Kmax, 1)):
        rhs = _weight_slice(E, t, anchor, k, D)
        if np.max(np.abs(rhs)) <= 1e-300:
            continue
        A = np.zeros((D + 1, nL + nR), dtype=np.complex128)
        # l slot i (degree i < d1, exponent anchor - t*(D-d1+i) + k); its
        # product with R0 = P^{D-d1} lands at degree i + D - d1, twist free.
        for i in range(nL):
            A[i + (D - d1), i] = 1.0
        # r slot j (degree j, exponent t*(D-d1-j) + k), multiplied by the
        # segment terms of L1: (c z^{e_i} P^i)(y z^{e_r} P^j) picks up q^{i e_r / R}.
        for j in range(nR):
            er = t * (D - d1 - j) + k
            for i in range(d1 + 1):
                c = seg[i]
                if c == 0:
                    continue
                tw = np.exp(2j * np.pi * cfg.tau * (i * er / R_amb))
                A[i + j, nL + j] += c * tw
        try:
            sol = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"slope factorization lifting failed at weight {k}: {exc}")
        lterms = {}
        for i in range(nL):
            if sol[i] != 0:
                e = anchor - t * (D - d1) - t * i + k
                lterms[i] = LaurentSeries(R_amb, e, [sol[i]], exact=True)
        rterms = {}
        for j in range(nR):
            v = sol[nL + j]
            if v != 0:
                e = t * (D - d1 - j) + k
                rterms[j] = LaurentSeries(R_amb, e, [v], exact=True)
        dl = SkewOperator(R_amb, lterms)
        dr = SkewOperator(R_amb, rterms)
        # E -= dl*R + L1*dr + dl*dr
        E = E - skew_mul(dl, R, cfg) - skew_mul(L1, dr, cfg) - skew_mul(dl, dr, cfg)
        L1 = L1 + dl
        R = R + dr

    res = 0.0
    for k in range(0, max(Kmax, 1)):
        res = max(res, float(np.max(np.abs(_weight_slice(E, t, anchor, k, D)))))
    return L1, R, res / scale


def slope_factor(L: SkewOperator, cfg: Config, tol_factor: float = 1e-8) -> FactorizationResult:
    """Factor L = L_1 * ... * L_r with strictly ascending pure slopes."""
    if L.is_zero(cfg.tol):
        raise DomainError("cannot factor the zero operator")
    shift = L.kmin()
    work = SkewOperator(L.ram, {k - shift: c for k, c in L.terms.items()})
    work, u0 = _normalize_unit(work, cfg)

    factors: list[SkewOperator] = []
    slopes: list[Fraction] = []
    total_res = 0.0
    while True:
        poly = newton_polygon(work, cfg.tol)
        if len(poly.segments) == 1:
            factors.append(work)
            slopes.append(poly.segments[0][0])
            break
        L1, R, res = _slope_split(work, cfg)
        total_res = max(total_res, res)
        slopes.append(poly.segments[0][0])
        # renormalize the right factor; absorb the unit into L1 so the
        # product is preserved: L1*R = (L1*u^{-1})*(u*R)
        Rn, u = _normalize_unit(R.clean(cfg.tol * 1e-2), cfg)
        factors.append(op_mul_series_right(L1, u.invert(cfg.prec, cfg.tol), cfg))
        work = Rn

    # undo the initial unit: L*P^{-shift} = u0^{-1} * (prod factors)
    u0inv = u0.invert(cfg.prec, cfg.tol)
    factors[0] = op_mul_series_left(u0inv, factors[0])
    # absorb the phi-power shift into the last factor
    if shift:
        factors[-1] = skew_mul(factors[-1], SkewOperator.phi_power(shift, factors[-1].ram), cfg)

    # make trailing factors monic, pushing units left
    for i in range(len(factors) - 1, 0, -1):
        Fi = factors[i]
        lead = Fi.coeff(Fi.kmax())
        if lead.ord(cfg.tol) == 0 and abs(lead.coeff(0) - 1.0) < cfg.tol:
            continue
        u = lead.invert(cfg.prec, cfg.tol)
        factors[i] = op_mul_series_left(u, Fi)
        factors[i - 1] = op_mul_series_right(factors[i - 1], lead, cfg)

    prod = factors[0]
    for f in factors[1:]:
        prod = skew_mul(prod, f, cfg)
    residual = _relative_residual(L, prod, cfg)
    residual = max(residual, total_res)
    if residual > tol_factor:
        raise NumericalError(
            f"slope factorization did not converge in the precision window "
            f"(residual {residual:.3e})")
    return FactorizationResult(factors, slopes, residual)


def _relative_residual(L: SkewOperator, M: SkewOperator, cfg: Config) -> float:
    diff = L - M
    scale = max(1.0, L.max_abs())
    best = 0.0
    r = diff.ram
    for k, c in diff.terms.items():
        # compare inside the window common to both operands
        hi = min(L.coeff(k).rerami(r).hi if k in L.terms else np.inf,
                 M.coeff(k).rerami(r).hi if k in M.terms else np.inf)
        for i, v in enumerate(c.coeffs):
            if c.lo + i < hi:
                best = max(best, abs(v))
    return best / scale


# ---------------------------------------------------------------------------
# Cyclic vectors


def op_apply(L: SkewOperator, F, v, cfg: Config, step: int = 1, Finv=None):
    """Apply the operator to a module element, Phi(v) = F * phi^step(v)."""
    r = max(L.ram, max(e.ram for e in v))
    kmin, kmax = L.kmin(), L.kmax()
    if kmin < 0 and Finv is None:
        Finv = smat_inverse(F, cfg)
    powers = {0: [e.rerami(r) for e in v]}
    cur = powers[0]
    for k in range(1, kmax + 1):
        cur = smat_vec(F, svec_phi(cur, step, cfg))
        powers[k] = cur
    cur = powers[0]
    for k in range(-1, kmin - 1, -1):
        cur = svec_phi(smat_vec(Finv, cur), -step, cfg)
        powers[k] = cur
    out = None
    for k, c in L.terms.items():
        term = [c * e for e in powers[k]]
        out = term if out is None else [a + b for a, b in zip(out, term)]
    return out


def cyclic_vector(F, cfg: Config, step: int = 1, Dmax: int = 8, Smax: int = 8):
    """Find a cyclic vector e and the monic minimal operator L with L(e)=0.

    Deterministic search over perturbations e + lam * z^s * f with
    lam = 1..Dmax and |s| <= Smax.
    """
    d = len(F)
    ram = max(e.ram for row in F for e in row)

    def krylov(e):
        vs = [e]
        for _ in range(d):
            vs.append(smat_vec(F, svec_phi(vs[-1], step, cfg)))
        return vs

    def rank_of(vs, m):
        cols = [[vs[j][i] for j in range(m)] for i in range(d)]
        return smat_rank(cols, cfg)

    e = [LaurentSeries.one(ram) if i == 0 else LaurentSeries.zero(ram) for i in range(d)]
    vs = krylov(e)
    m = rank_of(vs, d)
    shifts = [0]
    for s in range(1, Smax + 1):
        shifts += [s, -s]
    while m < d:
        improved = False
        for fidx in range(d):
            for lam in range(1, Dmax + 1):
                for s in shifts:
                    cand = list(e)
                    cand[fidx] = cand[fidx] + LaurentSeries.monomial(float(lam), s).rerami(ram)
                    vs2 = krylov(cand)
                    m2 = rank_of(vs2, d)
                    if m2 > m:
                        e, vs, m = cand, vs2, m2
                        improved = True
                        break
                if improved:
                    break
            if improved:
                break
        if not improved:
            raise NumericalError(
                f"cyclic vector search exhausted (lam <= {Dmax}, |s| <= {Smax})")
    # minimal monic operator of degree d: Phi^d e = -sum a_k Phi^k e
    W = [[vs[j][i] for j in range(d)] for i in range(d)]
    rhs = [vs[d][i] for i in range(d)]
    a = smat_solve(W, rhs, cfg)
    terms = {d: LaurentSeries.one(ram)}
    for k in range(d):
        terms[k] = -a[k]
    return e, SkewOperator(ram, terms)


def companion_module(L: SkewOperator, cfg: Config):
    """Companion Phi-matrix of a monic operator (basis e, Phi e, ...)."""
    d = L.degree()
    lead = L.coeff(d)
    if lead.ord(cfg.tol) != 0 or abs(lead.coeff(0) - 1.0) > 1e-6:
        u = lead.invert(cfg.prec, cfg.tol)
        L = op_mul_series_left(u, L)
    from .linalg import smat_zero
    F = smat_zero(d, d, L.ram)
    for j in range(d - 1):
        F[j + 1][j] = LaurentSeries.one(L.ram)
    for k in range(d):
        F[k][d - 1] = -L.coeff(k)
    return F
