"""Difference modules as Phi-matrices.

A ``DiffModule`` with ramification n and an s x s matrix F over the series
field in z^{1/n} presents the module over K obtained by restriction of
scalars; its dimension over K is n*s.  The element action on coordinate
vectors is Phi(v) = F * phi(v).

Provides restriction, tensor constructions, the regular singular normal
form, classification of pure modules into canonical forms, canonical global
lattices, data tuples with descent, and the slope filtration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, NumericalError
from .linalg import (
    eig_clusters,
    jordan_block_sizes,
    schur_split,
    smat_clean,
    smat_const_part,
    smat_copy,
    smat_det,
    smat_eye,
    smat_from_const,
    smat_inverse,
    smat_kron,
    smat_mul,
    smat_nonconst_norm,
    smat_phi,
    smat_shift,
    smat_transpose,
    smat_vec,
    smat_zero,
    svec_phi,
)
from .qcore import Config, ConstantClass, LaurentSeries, const_class_of, q_normalize
from .skewops import (
    SkewOperator,
    cyclic_vector,
    newton_polygon,
    op_apply,
    skew_mul,
    slope_factor,
)

# tolerance for merging scattered eigenvalues of one Jordan class
CLUSTER_TOL = 1e-2


class DiffModule:
    """A q-difference module over K presented by an invertible Phi-matrix."""

    __slots__ = ("ram", "mat")

    def __init__(self, ram: int, mat):
        self.ram = int(ram)
        self.mat = mat

    @property
    def size(self) -> int:
        return len(self.mat)

    @property
    def dim(self) -> int:
        """Dimension over K (restriction counts ramification)."""
        return self.ram * self.size

    @staticmethod
    def from_constant(A, ram: int = 1) -> "DiffModule":
        return DiffModule(ram, smat_from_const(np.asarray(A, dtype=complex), ram))

    def copy(self) -> "DiffModule":
        return DiffModule(self.ram, smat_copy(self.mat))

    def __repr__(self):
        return f"DiffModule(ram={self.ram}, size={self.size})"


def unipotent_module(m: int) -> DiffModule:
    """U_m: constant unipotent matrix with a single Jordan block."""
    A = np.eye(m, dtype=complex) + np.diag(np.ones(m - 1), 1)
    return DiffModule.from_constant(A)


@dataclass(frozen=True)
class PureCanonicalForm:
    """Canonical invariants of an indecomposable pure module: slope t/n in
    lowest terms, the class of c^n normalized into a1 in [0,1), and the
    unipotent size m."""

    t: int
    n: int
    cn_class: ConstantClass
    m: int

    def __post_init__(self):
        if math.gcd(self.t, self.n) != 1 and not (self.t == 0 and self.n == 1):
            raise DomainError("slope t/n must be in lowest terms")

    @property
    def slope(self) -> Fraction:
        return Fraction(self.t, self.n)

    @property
    def dim(self) -> int:
        return self.n * self.m

    def c_class(self) -> ConstantClass:
        """The canonical n-th root of the c^n class."""
        return self.cn_class.root(self.n)

    def dual(self) -> "PureCanonicalForm":
        cls, _ = q_normalize(self.cn_class.inv())
        return PureCanonicalForm(-self.t, self.n, cls, self.m)

    def sort_key(self):
        return (self.slope, round(self.cn_class.a0, 6), round(self.cn_class.a1, 6), self.m)

    def matches(self, other: "PureCanonicalForm", tol: float = 1e-6) -> bool:
        return (self.t == other.t and self.n == other.n and self.m == other.m
                and self.cn_class.close_to(other.cn_class, tol))


def forms_match(got: list[PureCanonicalForm], want: list[PureCanonicalForm],
                tol: float = 1e-5) -> bool:
    """Multiset equality of canonical forms up to tolerance (a0 compares
    circularly, so boundary values pair up correctly)."""
    if len(got) != len(want):
        return False
    left = list(want)
    for g in got:
        for i, w in enumerate(left):
            if g.matches(w, tol):
                del left[i]
                break
        else:
            return False
    return True


def canonical_module(form: PureCanonicalForm, cfg: Config) -> DiffModule:
    """The canonical presentation: ram n, matrix c z^{t/n} U_m."""
    c = form.c_class().value(cfg)
    U = np.eye(form.m, dtype=complex) + np.diag(np.ones(form.m - 1), 1)
    mat = []
    for i in range(form.m):
        row = []
        for j in range(form.m):
            if U[i, j] != 0:
                row.append(LaurentSeries.monomial(c * U[i, j], Fraction(form.t, form.n), form.n))
            else:
                row.append(LaurentSeries.zero(form.n))
        mat.append(row)
    return DiffModule(form.n, mat)


def restrict(M: DiffModule, cfg: Config) -> DiffModule:
    """Restrict a ram-n presentation to the equivalent ram-1 presentation.

    Basis ordering: u_{j,i} = z^{j/n} e_i with flat index j*size + i; the
    action picks up phi(z^{j/n}) = q^{j/n} z^{j/n}.
    """
    r, s = M.ram, M.size
    if r == 1:
        return M
    d = r * s
    acc = [[dict() for _ in range(d)] for _ in range(d)]
    for j in range(r):
        tw = cfg.qpow(Fraction(j, r))
        for i in range(s):
            col = j * s + i
            for k in range(s):
                f = M.mat[k][i]
                for mu_idx in range(len(f.coeffs)):
                    cval = f.coeffs[mu_idx]
                    if cval == 0:
                        continue
                    tot = j + f.lo + mu_idx
                    jp = tot % r
                    sp = (tot - jp) // r
                    row = jp * s + k
                    acc[row][col][sp] = acc[row][col].get(sp, 0.0) + tw * cval
    out = [[LaurentSeries.from_terms(acc[i][j], 1) if acc[i][j] else LaurentSeries.zero(1)
            for j in range(d)] for i in range(d)]
    return DiffModule(1, out)


def direct_sum(cfg: Config, *mods: DiffModule) -> DiffModule:
    """Direct sum over K; mixed ramifications are restricted first."""
    parts = [restrict(M, cfg) for M in mods]
    n = sum(p.size for p in parts)
    out = smat_zero(n, n, 1)
    off = 0
    for p in parts:
        for i in range(p.size):
            for j in range(p.size):
                out[off + i][off + j] = p.mat[i][j]
        off += p.size
    return DiffModule(1, out)


def split_module(forms: list[PureCanonicalForm], cfg: Config) -> DiffModule:
    return direct_sum(cfg, *[canonical_module(f, cfg) for f in forms])


# ---------------------------------------------------------------------------
# Tensor constructions


def tensor(M1: DiffModule, M2: DiffModule, cfg: Config) -> DiffModule:
    """Tensor product over K (Kronecker product of ram-1 presentations)."""
    A, B = restrict(M1, cfg), restrict(M2, cfg)
    return DiffModule(1, smat_kron(A.mat, B.mat))


def dual(M: DiffModule, cfg: Config) -> DiffModule:
    """Dual module: Phi-matrix (F^{-1})^T."""
    return DiffModule(M.ram, smat_transpose(smat_inverse(M.mat, cfg)))


def hom_module(M1: DiffModule, M2: DiffModule, cfg: Config) -> DiffModule:
    """Hom(M1, M2) = M1^* tensor M2."""
    return tensor(dual(M1, cfg), M2, cfg)


def gauge_apply(F, G, cfg: Config, step: int = 1):
    """G(q^step z)^{-1} * F(z) * G(z)."""
    Gs = smat_phi(G, step, cfg)
    return smat_mul(smat_inverse(Gs, cfg), smat_mul(F, G))


# ---------------------------------------------------------------------------
# Regular singular normal form (matrix level, arbitrary phi-step)


def smat_clean_abs(A, thr: float):
    """Zero all coefficients below an absolute threshold."""
    out = []
    for row in A:
        orow = []
        for e in row:
            c = np.where(np.abs(e.coeffs) > thr, e.coeffs, 0.0)
            orow.append(LaurentSeries(e.ram, e.lo, c, e.exact))
        out.append(orow)
    return out


def _holomorphic_lattice_ok(F, cfg: Config) -> bool:
    # judge entry orders against the matrix scale, not per entry: deep
    # q-power blocks otherwise mistake cancellation junk for poles
    scale = max(e.max_abs() for row in F for e in row)
    if scale == 0.0:
        return False
    for row in F:
        for e in row:
            for i in range(len(e.coeffs)):
                if e.lo + i < 0 and abs(e.coeffs[i]) > 100 * cfg.tol * scale:
                    return False
    from .linalg import det_valuation
    try:
        return det_valuation(F, cfg) == 0
    except NumericalError:
        return False


def _a1_of(val: complex, cfg: Config) -> float:
    return const_class_of(val, cfg).a1


def _rs_gauge(F, cfg: Config, step: int = 1):
    """Gauge a holomorphic matrix with invertible constant term to a
    constant matrix: returns (A, G) with G(q^step z)^{-1} F G(z) = A and
    all eigenvalues alpha of A satisfying |q^step| < |alpha| <= 1.

    Shearing gauges remove eigenvalues outside the annulus one z-power at
    a time; afterwards the mode recursion is non resonant and each mode is
    one Sylvester solve.
    """
    n = len(F)
    ram = max(e.ram for row in F for e in row)
    if ram != 1:
        raise NumericalError("rs gauge expects an unramified presentation")
    G_total = smat_eye(n, 1)
    F = smat_copy(F)

    def thr_abs():
        # junk floor from unitary conjugations, relative to the current scale
        return 1e-12 * max(e.max_abs() for row in F for e in row)

    # ---- shearing until all eigenvalues sit in the annulus
    for _ in range(200):
        F0 = smat_const_part(F)
        clus = eig_clusters(F0, CLUSTER_TOL)
        shifts = {}
        for val, mult in clus:
            if abs(val) < 1e-300:
                raise DomainError("constant term is singular; not a slope-0 lattice")
            k = math.floor(_a1_of(val, cfg) / step + 1e-9)
            shifts[val] = k
        if all(k == 0 for k in shifts.values()):
            break
        # move the worst cluster group one z-power toward the annulus
        kmax = max(shifts.values())
        kmin = min(shifts.values())
        target = kmax if kmax > 0 else kmin
        group = [v for v, k in shifts.items() if k == target]

        def in_group(x):
            return any(abs(x - v) < CLUSTER_TOL * max(abs(x), abs(v), 1e-300) * 2
                       for v in group)

        if target > 0:
            Z, m = schur_split(F0, in_group, first=False)
            m0 = n - m  # group occupies the trailing block
            V = smat_from_const(Z, 1)
            F = smat_mul(smat_mul(smat_from_const(Z.conj().T, 1), F), V)
            F = smat_clean_abs(F, thr_abs())
            G_total = smat_mul(G_total, V)
            S = smat_eye(n, 1)
            for i in range(m0, n):
                S[i][i] = LaurentSeries.monomial(1.0, 1)
        else:
            Z, m = schur_split(F0, in_group, first=True)
            V = smat_from_const(Z, 1)
            F = smat_mul(smat_mul(smat_from_const(Z.conj().T, 1), F), V)
            F = smat_clean_abs(F, thr_abs())
            G_total = smat_mul(G_total, V)
            S = smat_eye(n, 1)
            for i in range(m):
                S[i][i] = LaurentSeries.monomial(1.0, -1)
        F = gauge_apply(F, S, cfg, step)
        F = smat_clean_abs(F, thr_abs())
        G_total = smat_mul(G_total, S)
        pole_thr = thr_abs() * 10
        for row in F:
            for e in row:
                for i2 in range(len(e.coeffs)):
                    if e.lo + i2 < 0 and abs(e.coeffs[i2]) > pole_thr:
                        raise NumericalError(
                            "shearing produced a pole; lattice reduction failed")
    else:
        raise NumericalError("resonance removal did not terminate")

    # ---- non-resonant mode recursion
    A0 = smat_const_part(F)
    # window of available modes
    K = cfg.prec
    for row in F:
        for e in row:
            if not e.exact:
                K = min(K, e.lo + len(e.coeffs))
    K = max(int(K), 1)
    d = n
    Gk = [np.eye(d, dtype=complex)]
    Fmodes = [np.zeros((d, d), dtype=complex) for _ in range(K)]
    for i in range(d):
        for j in range(d):
            e = F[i][j]
            for idx in range(len(e.coeffs)):
                mode = e.lo + idx
                if 0 <= mode < K:
                    Fmodes[mode][i, j] = e.coeffs[idx]
    I = np.eye(d, dtype=complex)
    lhs_cache = {}
    for k in range(1, K):
        rhs = np.zeros((d, d), dtype=complex)
        for i in range(1, k + 1):
            rhs -= Fmodes[i] @ Gk[k - i]
        mu = cfg.qpow(step * k)
        Lk = np.kron(A0, I) - mu * np.kron(I, A0.T)
        try:
            vec = np.linalg.solve(Lk, rhs.reshape(-1))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"resonant mode {k} in rs gauge: {exc}")
        Gk.append(vec.reshape(d, d))
    Gser = [[LaurentSeries(1, 0, [Gk[k][i, j] for k in range(K)], exact=False)
             for j in range(d)] for i in range(d)]
    G_total = smat_mul(G_total, Gser)
    return A0, G_total


def rs_normal_form(M: DiffModule, cfg: Config):
    """Constant normal form of a regular singular module.

    Returns (A, G) with G(qz)^{-1} F G(z) = A within tolerance and the
    eigenvalues of A in |q| < |alpha| <= 1.
    """
    M1 = restrict(M, cfg)
    if not _holomorphic_lattice_ok(M1.mat, cfg):
        raise DomainError("Phi-matrix is not a slope-0 lattice "
                          "(needs holomorphic entries and unit determinant)")
    A, G = _rs_gauge(M1.mat, cfg, step=1)
    res = smat_nonconst_norm(gauge_apply(M1.mat, G, cfg, 1))
    scale = max(1.0, float(np.max(np.abs(A))))
    if res / scale > 1e-6:
        raise NumericalError(f"rs gauge iteration did not converge (residual {res:.2e})")
    return A, G


# ---------------------------------------------------------------------------
# Classification of pure modules


def module_slope(M: DiffModule, cfg: Config) -> Fraction:
    """ord(det F) / dim; equals the slope for pure modules."""
    from .linalg import det_valuation
    M1 = restrict(M, cfg)
    o = det_valuation(M1.mat, cfg)
    if o is None:
        raise DomainError("Phi-matrix is singular")
    return Fraction(o) / M1.size


def _psi_matrix(F, t: int, n: int, cfg: Config):
    """Matrix of Psi = z^{-t} Phi^n: G = z^{-t} F(z) F(qz) ... F(q^{n-1}z)."""
    G = smat_copy(F)
    for k in range(1, n):
        G = smat_mul(G, smat_phi(F, k, cfg))
    return smat_shift(G, -t) if t else G


def smat_shift(A, k: int):
    return [[e.shift(k) for e in row] for row in A]


def _psi_lattice(G, cfg: Config, step: int):
    """Bring the Psi-matrix to a slope-0 lattice and gauge it constant.

    Fast path when G is already a lattice; otherwise pass to a cyclic
    vector and the companion of the minimal operator, whose constant term
    is invertible because the twisted module has slope zero.
    """
    d = len(G)
    if _holomorphic_lattice_ok(G, cfg):
        return _rs_gauge(G, cfg, step)
    e, Lmin = cyclic_vector(G, cfg, step=step)
    if Lmin.degree() != d:
        raise NumericalError("cyclic vector produced a short minimal operator")
    # The companion of the minimal operator presents the same module and is
    # a slope-0 lattice; building it directly avoids inverting the badly
    # scaled Krylov matrix.  The eigenstructure is basis independent, so
    # classification needs no gauge back to the original coordinates.
    from .skewops import companion_module
    C = companion_module(Lmin.clean(cfg.tol), cfg)
    if not _holomorphic_lattice_ok(C, cfg):
        raise NumericalError("companion lattice for the twist is not slope 0")
    A, _ = _rs_gauge(C, cfg, step)
    return A, None


@dataclass
class PureStructure:
    """Anchored eigenstructure of a pure module: the gauge T brings the
    Psi-operator to the constant matrix psi_const whose cluster list is
    (value, multiplicity), cluster columns in block order."""

    slope: Fraction
    psi_const: np.ndarray
    gauge: list  # series matrix over K
    clusters: list  # [(value, mult)]


def _pure_structure(M: DiffModule, cfg: Config) -> PureStructure:
    M1 = restrict(M, cfg)
    lam = module_slope(M1, cfg)
    t, n = lam.numerator, lam.denominator
    G = _psi_matrix(M1.mat, t, n, cfg)
    scale = max(e.max_abs() for row in G for e in row)
    G = smat_clean_abs(G, 100 * cfg.tol * scale)
    A, T = _psi_lattice(G, cfg, step=n)
    clus = eig_clusters(A, CLUSTER_TOL)
    # sort members of each cluster list by magnitude so downstream picks
    # the best conditioned branch first
    clus.sort(key=lambda vm: -abs(vm[0]))
    return PureStructure(lam, A, T, clus)


def classify_pure(M: DiffModule, cfg: Config) -> list[PureCanonicalForm]:
    """Decompose a pure module into canonical forms (with multiplicity).

    Forms z^{-t} Phi^n, extracts generalized eigenspaces of its constant
    normal form, normalizes eigenvalues by q-powers and reads Jordan sizes.
    """
    ps = _pure_structure(M, cfg)
    t, n = ps.slope.numerator, ps.slope.denominator
    shift_cls = ConstantClass(0.0, Fraction(t * (n - 1), 2))
    # group clusters into q^Z classes; grouping tolerance tracks the
    # accuracy loss on deep q-power branches
    groups: list[dict] = []
    for val, mult in ps.clusters:
        cls = const_class_of(val, cfg).mul(shift_cls.inv())
        ncls, _ = q_normalize(cls)
        for g in groups:
            if g["cls"].close_to(ncls, 2e-2):
                g["members"].append((val, mult))
                break
        else:
            groups.append({"cls": ncls, "members": [(val, mult)]})
    forms: list[PureCanonicalForm] = []
    for g in groups:
        total = sum(m for _, m in g["members"])
        if total % n:
            raise NumericalError("eigenvalue class multiplicity is not divisible "
                                 "by the slope denominator; clustering failed")
        # all branches carry the same Jordan type; read it off the branch of
        # largest magnitude, where the numerics are best conditioned
        val0, mult0 = max(g["members"], key=lambda vm: abs(vm[0]))
        sizes = jordan_block_sizes(ps.psi_const, val0, mult0,
                                   rtol=1e-5, ctol=CLUSTER_TOL)
        if sum(sizes) * n != total:
            raise NumericalError("inconsistent Jordan data across branches")
        cls = const_class_of(val0, cfg).mul(shift_cls.inv())
        ncls, _ = q_normalize(cls)
        for m in sizes:
            forms.append(PureCanonicalForm(t, n, ncls, m))
    forms.sort(key=lambda f: f.sort_key())
    return forms


# ---------------------------------------------------------------------------
# Canonical global lattices


@dataclass
class GlobalModule:
    """Canonical global lattice of a pure module: over C[z^{1/n}, z^{-1/n}]
    the Phi-matrix is z^{t/n} B with B constant invertible and anchored
    (eigenvalues c of B satisfy |q|^{1/n} < |c| <= 1)."""

    ram: int
    slope: Fraction
    B: np.ndarray
    gauge: list  # series matrix with ram-n entries, columns = W basis

    @property
    def wdim(self) -> int:
        return self.B.shape[0]

    def phi_matrix(self):
        mono = LaurentSeries.monomial(1.0, self.slope, self.ram)
        d = self.wdim
        return [[mono * self.B[i, j] if self.B[i, j] != 0 else LaurentSeries.zero(self.ram)
                 for j in range(d)] for i in range(d)]


def m_global(M: DiffModule, cfg: Config) -> GlobalModule:
    """Canonical global lattice of a pure module.

    After gauging Psi = z^{-t} Phi^n constant, eigenvalue blocks are
    rescaled by powers of z^{1/n} so that Phi(W) = z^{t/n} W exactly.
    """
    ps = _pure_structure(M, cfg)
    if ps.gauge is None:
        raise NumericalError("global lattice requires a presentation whose "
                             "twist operator already has a slope-0 lattice")
    t, n = ps.slope.numerator, ps.slope.denominator
    d = ps.psi_const.shape[0]
    base_shift = float(Fraction(t * (n - 1), 2))
    # order clusters deterministically
    clus = sorted(ps.clusters, key=lambda vm: (const_class_of(vm[0], cfg).a0.real,
                                               const_class_of(vm[0], cfg).a1))
    cols = []
    shifts = []
    A = ps.psi_const
    used = 0
    Vblocks = []
    for val, mult in clus:
        from .linalg import generalized_eigenspace
        V = generalized_eigenspace(A, val, mult, ctol=CLUSTER_TOL)
        if V.shape[1] != mult:
            raise NumericalError("eigenspace extraction failed in m_global")
        k = math.floor(_a1_of(val, cfg) - base_shift + 1e-9)
        Vblocks.append(V)
        shifts += [k] * mult
        used += mult
    if used != d:
        raise NumericalError("cluster multiplicities do not cover the module")
    Vfull = np.hstack(Vblocks)
    T = smat_mul(ps.gauge, smat_from_const(Vfull, 1))
    T = smat_rerami_local(T, n)
    for j, k in enumerate(shifts):
        if k:
            for i in range(d):
                T[i][j] = T[i][j].shift(Fraction(-k, n))
    M1 = restrict(M, cfg)
    F = smat_rerami_local(M1.mat, n)
    Fw = gauge_apply(F, T, cfg, 1)
    Fw = smat_clean(Fw, cfg.tol * 1e-2)
    Bser = smat_shift_frac(Fw, Fraction(-t, n))
    B = smat_const_part(Bser)
    res = smat_nonconst_norm(Bser)
    if res > 1e-6 * max(1.0, float(np.max(np.abs(B)))):
        raise NumericalError(f"global lattice is not monomial (residual {res:.2e})")
    return GlobalModule(n, ps.slope, B, T)


def smat_rerami_local(A, n: int):
    r = max(e.ram for row in A for e in row)
    r = int(np.lcm(r, n))
    return [[e.rerami(r) for e in row] for row in A]


def smat_shift_frac(A, exp: Fraction):
    return [[e.shift(exp) for e in row] for row in A]


# ---------------------------------------------------------------------------
# Data tuples with descent


@dataclass
class DataTuple:
    """Solution data of a pure module: slope lam, A in GL(V) and the
    descent generator D satisfying A D = e^{2 pi i lam} D A, D^n = 1."""

    lam: Fraction
    A: np.ndarray
    D: np.ndarray

    @property
    def dim(self) -> int:
        return self.A.shape[0]


def _form_tuple(form: PureCanonicalForm, cfg: Config) -> DataTuple:
    t, n, m = form.t, form.n, form.m
    c = form.c_class().value(cfg)
    P = np.zeros((n, n), dtype=complex)
    for j in range(n):
        P[(j + t) % n, j] = 1.0
    U = np.eye(m, dtype=complex) + np.diag(np.ones(m - 1), 1)
    zeta = np.exp(-2j * np.pi * np.arange(n) / n)
    A = np.kron(c * P, U)
    D = np.kron(np.diag(zeta), np.eye(m))
    return DataTuple(form.slope, A, D)


def data_tuple(M: DiffModule, cfg: Config) -> DataTuple:
    """Data tuple of a pure module, assembled from its canonical forms."""
    forms = classify_pure(M, cfg)
    lam = forms[0].slope
    blocks = [_form_tuple(f, cfg) for f in forms]
    dim = sum(b.dim for b in blocks)
    A = np.zeros((dim, dim), dtype=complex)
    D = np.zeros((dim, dim), dtype=complex)
    off = 0
    for b in blocks:
        d = b.dim
        A[off:off + d, off:off + d] = b.A
        D[off:off + d, off:off + d] = b.D
        off += d
    return DataTuple(lam, A, D)


def tensor_data(d1: DataTuple, d2: DataTuple) -> DataTuple:
    return DataTuple(d1.lam + d2.lam, np.kron(d1.A, d2.A), np.kron(d1.D, d2.D))


# ---------------------------------------------------------------------------
# Tensor decomposition tables


def _unipotent_tensor_sizes(a: int, b: int) -> list[int]:
    """Jordan sizes of U_a (x) U_b in characteristic zero."""
    return [a + b - 1 - 2 * i for i in range(min(a, b))]


def tensor_decompose(p1: PureCanonicalForm, p2: PureCanonicalForm) -> list[PureCanonicalForm]:
    """Canonical forms of the tensor product of two canonical forms."""
    t1, n1, t2, n2 = p1.t, p1.n, p2.t, p2.n
    lam3 = Fraction(t1, n1) + Fraction(t2, n2)
    t3, n3 = lam3.numerator, lam3.denominator
    d = math.gcd(n1, n2)
    nbig = n1 * n2 // d
    k = nbig // n3
    c1 = p1.c_class()
    c2 = p2.c_class()
    out = []
    for j in range(d):
        cj = c1.mul(c2).mul(ConstantClass(Fraction(j * t2, n2) % 1, 0.0))
        for jp in range(k):
            cc = cj.mul(ConstantClass(0.0, Fraction(jp, nbig)))
            cls, _ = q_normalize(cc.power(n3))
            for m in _unipotent_tensor_sizes(p1.m, p2.m):
                out.append(PureCanonicalForm(t3, n3, cls, m))
    out.sort(key=lambda f: f.sort_key())
    return out


# ---------------------------------------------------------------------------
# Slope filtration


@dataclass
class SlopeFiltration:
    """Ascending filtration with pure graded pieces."""

    slopes: list[Fraction]
    graded: list  # [(slope, DiffModule)]
    bases: list   # ascending list of submodule bases (vectors over K)
    cyclic: list  # the cyclic vector used
    operator: SkewOperator
    factors: list


def _reduce_op_ram(L: SkewOperator, tol: float) -> SkewOperator:
    """Drop unnecessary ramification from an operator's coefficients."""
    r = L.ram
    if r == 1:
        return L
    g = 0
    for c in L.terms.values():
        for i, v in enumerate(c.coeffs):
            if abs(v) > tol * max(1.0, c.max_abs()):
                g = math.gcd(g, c.lo + i)
    g = math.gcd(g, r)
    if g in (0, 1):
        return L
    new_ram = r // g
    terms = {}
    for k, c in L.terms.items():
        kept = {}
        for i, v in enumerate(c.coeffs):
            e = c.lo + i
            if abs(v) > tol * max(1.0, c.max_abs()) * 1e-3:
                kept[Fraction(e, r)] = v
        terms[k] = LaurentSeries.from_terms(kept, new_ram) if kept else LaurentSeries.zero(new_ram)
    return SkewOperator(new_ram, terms)


def companion_of(L: SkewOperator, cfg: Config) -> DiffModule:
    from .skewops import companion_module
    Lr = _reduce_op_ram(L.clean(cfg.tol), cfg.tol)
    return DiffModule(Lr.ram, companion_module(Lr, cfg))


def slope_filtration(M: DiffModule, cfg: Config) -> SlopeFiltration:
    """Unique ascending slope filtration via a cyclic vector and the
    ascending slope factorization of its minimal operator."""
    M1 = restrict(M, cfg)
    e, L = cyclic_vector(M1.mat, cfg)
    fr = slope_factor(L, cfg)
    graded = [(s, companion_of(f, cfg)) for s, f in zip(fr.slopes, fr.factors)]
    bases = []
    basis_vecs: list = []
    Finv = None
    for i in range(len(fr.factors)):
        # generator of M_i: image of the tail product L_{i+1} ... L_r
        tail = None
        for f in fr.factors[i + 1:]:
            tail = f if tail is None else skew_mul(tail, f, cfg)
        if tail is None:
            gen = e
        else:
            gen = op_apply(tail, M1.mat, e, cfg)
        deg = sum(f.degree() for f in fr.factors[:i + 1])
        vecs = [gen]
        for _ in range(deg - 1):
            vecs.append(smat_vec(M1.mat, svec_phi(vecs[-1], 1, cfg)))
        bases.append(vecs)
    return SlopeFiltration(list(fr.slopes), graded, bases, e, L, fr.factors)


def graded_forms(M: DiffModule, cfg: Config) -> list[PureCanonicalForm]:
    """Canonical forms of gr(M)."""
    filt = slope_filtration(M, cfg)
    forms: list[PureCanonicalForm] = []
    for _, piece in filt.graded:
        forms += classify_pure(piece, cfg)
    forms.sort(key=lambda f: f.sort_key())
    return forms
