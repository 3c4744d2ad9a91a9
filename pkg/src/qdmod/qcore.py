"""Base arithmetic for q-difference computations.

Everything downstream is built on four primitives:

* ``Config``: the modular parameter tau in the upper half plane, from which
  q = e^{2*pi*i*tau} is derived, together with a precision window and a
  relative zero-test threshold.
* ``ConstantClass``: a nonzero constant c = e^{2*pi*i*(a0 + a1*tau)} stored
  in exact log coordinates, so q-power equivalence and n-th roots are exact.
* ``LaurentSeries``: truncated Laurent series in z^{1/ram} with a tracked
  window of known coefficients.
* theta: the series sum_n q^{n(n-1)/2} (-z)^n and its numeric evaluation.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, NumericalError

TWO_PI_I = 2j * math.pi

# Soft cap on stored series length, independent of Config.prec; guards
# against runaway window growth in iterated products.
_MAX_LEN = 16384


@dataclass(frozen=True)
class Config:
    """Global computation parameters.

    tau is the primitive; q is derived as e^{2*pi*i*tau}. This avoids the
    branch ambiguity of recovering tau from q.
    """

    tau: complex = 0.13 + 1.0j
    prec: int = 64
    tol: float = 1e-10

    def __post_init__(self):
        if self.tau.imag <= 0:
            raise DomainError("tau must have positive imaginary part")
        if self.prec < 8:
            raise DomainError("prec must be at least 8")
        if self.tol <= 0:
            raise DomainError("tol must be positive")

    @property
    def q(self) -> complex:
        return cmath.exp(TWO_PI_I * self.tau)

    def qpow(self, lam) -> complex:
        """q^lam := e^{2*pi*i*tau*lam} for rational or real lam."""
        return cmath.exp(TWO_PI_I * self.tau * float(lam))


DEFAULT_CONFIG = Config()


# ---------------------------------------------------------------------------
# Constant classes in log coordinates


@dataclass(frozen=True)
class ConstantClass:
    """A nonzero constant c = e^{2*pi*i*(a0 + a1*tau)} with 0 <= a0 < 1.

    a0 carries the argument part and a1 the q-power part: multiplying by q
    shifts a1 by one and leaves a0 fixed.
    """

    a0: float
    a1: float

    def __post_init__(self):
        object.__setattr__(self, "a0", self.a0 % 1.0)

    def value(self, cfg: Config) -> complex:
        return cmath.exp(TWO_PI_I * (self.a0 + self.a1 * cfg.tau))

    def mul(self, other: "ConstantClass") -> "ConstantClass":
        return ConstantClass(self.a0 + other.a0, self.a1 + other.a1)

    def inv(self) -> "ConstantClass":
        return ConstantClass(-self.a0, -self.a1)

    def root(self, n: int) -> "ConstantClass":
        """The canonical n-th root (a0/n, a1/n)."""
        return ConstantClass(self.a0 / n, self.a1 / n)

    def power(self, n: int) -> "ConstantClass":
        return ConstantClass(n * self.a0, n * self.a1)

    def shift(self, k: int) -> "ConstantClass":
        """Multiply by q^k."""
        return ConstantClass(self.a0, self.a1 + k)

    def is_one(self, tol: float = 1e-9) -> bool:
        a0 = min(self.a0, 1.0 - self.a0)
        return abs(a0) < tol and abs(self.a1) < tol

    def close_to(self, other: "ConstantClass", tol: float = 1e-9) -> bool:
        d0 = abs((self.a0 - other.a0 + 0.5) % 1.0 - 0.5)
        return d0 < tol and abs(self.a1 - other.a1) < tol

    def q_equivalent(self, other: "ConstantClass", tol: float = 1e-9) -> bool:
        """True when the classes agree up to an integer power of q."""
        d0 = abs((self.a0 - other.a0 + 0.5) % 1.0 - 0.5)
        d1 = self.a1 - other.a1
        return d0 < tol and abs(d1 - round(d1)) < tol


def const_class_of(w: complex, cfg: Config) -> ConstantClass:
    """Log coordinates of a nonzero constant, principal branch."""
    w = complex(w)
    if w == 0:
        raise DomainError("cannot take the constant class of 0")
    u = cmath.log(w) / TWO_PI_I
    a1 = u.imag / cfg.tau.imag
    a0 = (u.real - a1 * cfg.tau.real) % 1.0
    return ConstantClass(a0, a1)


def q_normalize(c: ConstantClass) -> tuple[ConstantClass, int]:
    """Shift the class into a1 in [0, 1), i.e. |q| < |c'| <= 1.

    Returns (c', k) with c = c' * q^k.
    """
    k = math.floor(c.a1 + 1e-6)
    return ConstantClass(c.a0, c.a1 - k), k


# ---------------------------------------------------------------------------
# Truncated ramified Laurent series


class LaurentSeries:
    """A truncated Laurent series in z^{1/ram}.

    Coefficients are stored densely for exponents lo/ram, (lo+1)/ram, ...
    Exponents below lo/ram are exactly zero.  When ``exact`` is true the
    series is a genuine Laurent polynomial (zero above the stored range as
    well); otherwise coefficients at or above (lo+len)/ram are unknown.
    """

    __slots__ = ("ram", "lo", "coeffs", "exact")

    def __init__(self, ram: int, lo: int, coeffs, exact: bool = False):
        self.ram = int(ram)
        self.lo = int(lo)
        c = np.asarray(coeffs, dtype=np.complex128)
        if c.ndim != 1 or len(c) == 0:
            c = np.zeros(1, dtype=np.complex128)
        self.coeffs = c
        self.exact = bool(exact)
        if exact:
            self._trim()

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero(ram: int = 1) -> "LaurentSeries":
        return LaurentSeries(ram, 0, [0.0], exact=True)

    @staticmethod
    def one(ram: int = 1) -> "LaurentSeries":
        return LaurentSeries(ram, 0, [1.0], exact=True)

    @staticmethod
    def const(c: complex, ram: int = 1) -> "LaurentSeries":
        return LaurentSeries(ram, 0, [c], exact=True)

    @staticmethod
    def monomial(c: complex, exp: Fraction | int, ram: int | None = None) -> "LaurentSeries":
        exp = Fraction(exp)
        r = exp.denominator if ram is None else ram
        if (exp * r).denominator != 1:
            r = int(np.lcm(r, exp.denominator))
        return LaurentSeries(r, int(exp * r), [c], exact=True)

    @staticmethod
    def from_terms(terms: dict, ram: int | None = None) -> "LaurentSeries":
        """Build an exact series from {exponent (Fraction/int): coefficient}."""
        if not terms:
            return LaurentSeries.zero(ram or 1)
        exps = [Fraction(e) for e in terms]
        r = ram or 1
        for e in exps:
            r = int(np.lcm(r, e.denominator))
        idx = [int(e * r) for e in exps]
        lo, hi = min(idx), max(idx)
        c = np.zeros(hi - lo + 1, dtype=np.complex128)
        for e, v in zip(idx, terms.values()):
            c[e - lo] += v
        return LaurentSeries(r, lo, c, exact=True)

    # -- bookkeeping ---------------------------------------------------

    def _trim(self):
        c = self.coeffs
        nz = np.nonzero(c)[0]
        if len(nz) == 0:
            self.lo, self.coeffs = 0, np.zeros(1, dtype=np.complex128)
            return
        a, b = nz[0], nz[-1] + 1
        self.lo += int(a)
        self.coeffs = c[a:b]

    @property
    def hi(self) -> float:
        """Exclusive upper end of the known window (numerator units)."""
        return math.inf if self.exact else self.lo + len(self.coeffs)

    def window(self) -> tuple[Fraction, Fraction | None]:
        top = None if self.exact else Fraction(self.lo + len(self.coeffs), self.ram)
        return Fraction(self.lo, self.ram), top

    def copy(self) -> "LaurentSeries":
        return LaurentSeries(self.ram, self.lo, self.coeffs.copy(), self.exact)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.coeffs) <= tol))

    def coeff(self, exp: Fraction | int) -> complex:
        exp = Fraction(exp)
        k = exp * self.ram
        if k.denominator != 1:
            return 0.0
        i = int(k) - self.lo
        if i < 0 or i >= len(self.coeffs):
            return 0.0
        return complex(self.coeffs[i])

    def terms(self, tol: float = 0.0) -> dict:
        """Nonzero coefficients as {Fraction exponent: complex}."""
        out = {}
        for i, c in enumerate(self.coeffs):
            if abs(c) > tol:
                out[Fraction(self.lo + i, self.ram)] = complex(c)
        return out

    def ord(self, tol: float = 1e-10) -> Fraction | None:
        """Exponent of the first coefficient above tol * max|coeffs|."""
        m = self.max_abs()
        if m == 0.0:
            return None
        thr = tol * m
        for i, c in enumerate(self.coeffs):
            if abs(c) > thr:
                return Fraction(self.lo + i, self.ram)
        return None

    def degree(self, tol: float = 1e-10) -> Fraction | None:
        m = self.max_abs()
        if m == 0.0:
            return None
        thr = tol * m
        for i in range(len(self.coeffs) - 1, -1, -1):
            if abs(self.coeffs[i]) > thr:
                return Fraction(self.lo + i, self.ram)
        return None

    def rerami(self, ram2: int) -> "LaurentSeries":
        """Change ramification; ram must divide ram2."""
        if ram2 == self.ram:
            return self
        if ram2 % self.ram:
            raise DomainError(f"ramification {self.ram} does not divide {ram2}")
        s = ram2 // self.ram
        c = np.zeros((len(self.coeffs) - 1) * s + 1, dtype=np.complex128)
        c[::s] = self.coeffs
        return LaurentSeries(ram2, self.lo * s, c, self.exact)

    def truncate(self, hi: int) -> "LaurentSeries":
        """Forget coefficients at numerator exponents >= hi."""
        if hi >= self.lo + len(self.coeffs) and self.exact:
            return self
        n = max(1, hi - self.lo)
        return LaurentSeries(self.ram, self.lo, self.coeffs[:n], exact=False)

    # -- arithmetic ----------------------------------------------------

    def __neg__(self):
        return LaurentSeries(self.ram, self.lo, -self.coeffs, self.exact)

    def __add__(self, other):
        if not isinstance(other, LaurentSeries):
            other = LaurentSeries.const(other)
        f, g = coerce(self, other)
        lo = min(f.lo, g.lo)
        hi = min(f.hi, g.hi)
        exact = f.exact and g.exact
        if exact:
            hi = max(f.lo + len(f.coeffs), g.lo + len(g.coeffs))
        n = int(hi - lo) if hi != math.inf else max(len(f.coeffs), len(g.coeffs))
        n = max(n, 1)
        c = np.zeros(n, dtype=np.complex128)
        for s in (f, g):
            a = s.lo - lo
            m = min(len(s.coeffs), n - a)
            if m > 0:
                c[a:a + m] += s.coeffs[:m]
        return LaurentSeries(f.ram, lo, c, exact)

    def __sub__(self, other):
        return self + (-other if isinstance(other, LaurentSeries) else -LaurentSeries.const(other))

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return LaurentSeries(self.ram, self.lo, self.coeffs * other, self.exact)
        f, g = coerce(self, other)
        if f.is_zero() or g.is_zero():
            if f.exact and g.exact:
                return LaurentSeries.zero(f.ram)
        lo = f.lo + g.lo
        if f.exact and g.exact:
            hi = lo + len(f.coeffs) + len(g.coeffs) - 1
            exact = True
        else:
            hi = min(f.hi + g.lo, g.hi + f.lo)
            exact = False
        n = int(min(hi - lo, _MAX_LEN))
        n = max(n, 1)
        full = np.convolve(f.coeffs, g.coeffs)
        c = full[:n]
        if n > len(full):
            c = np.concatenate([full, np.zeros(n - len(full), dtype=np.complex128)])
        return LaurentSeries(f.ram, lo, c, exact)

    __rmul__ = __mul__
    __radd__ = __add__

    def invert(self, prec: int = 64, tol: float = 1e-10) -> "LaurentSeries":
        """Multiplicative inverse, truncated to the available window.

        Requires a detectable leading coefficient.
        """
        o = self.ord(tol)
        if o is None:
            raise NumericalError("cannot invert a series with no detectable leading term")
        k0 = int(o * self.ram) - self.lo
        a = self.coeffs[k0:]
        n = len(a) if not self.exact else max(prec, len(a))
        if self.exact and len(a) == 1:
            return LaurentSeries(self.ram, -(self.lo + k0), [1.0 / a[0]], exact=True)
        b = np.zeros(n, dtype=np.complex128)
        b[0] = 1.0 / a[0]
        for k in range(1, n):
            s = 0.0
            top = min(k, len(a) - 1)
            for j in range(1, top + 1):
                s += a[j] * b[k - j]
            b[k] = -s / a[0]
        return LaurentSeries(self.ram, -(self.lo + k0), b, exact=False)

    def shift(self, exp: Fraction | int) -> "LaurentSeries":
        """Multiply by z^exp."""
        exp = Fraction(exp)
        r = int(np.lcm(self.ram, exp.denominator))
        f = self.rerami(r)
        return LaurentSeries(r, f.lo + int(exp * r), f.coeffs, f.exact)

    def phi(self, pow: int, cfg: Config) -> "LaurentSeries":
        """Apply phi^pow, phi(z^lam) = q^lam z^lam."""
        if pow == 0:
            return self
        k = np.arange(self.lo, self.lo + len(self.coeffs))
        fac = np.exp(TWO_PI_I * cfg.tau * pow * (k / self.ram))
        return LaurentSeries(self.ram, self.lo, self.coeffs * fac, self.exact)

    def eval(self, w: complex) -> complex:
        """Evaluate at a point, using the principal branch of w^{1/ram}."""
        root = w if self.ram == 1 else cmath.exp(cmath.log(w) / self.ram)
        tot, p = 0.0 + 0.0j, root ** self.lo
        for c in self.coeffs:
            tot += c * p
            p *= root
        return tot

    def clean(self, tol: float) -> "LaurentSeries":
        """Zero out coefficients below tol * max|coeffs| (absolute if max < 1)."""
        thr = tol * max(1.0, self.max_abs())
        c = np.where(np.abs(self.coeffs) > thr, self.coeffs, 0.0)
        return LaurentSeries(self.ram, self.lo, c, self.exact)

    def __repr__(self):
        ts = self.terms(tol=0.0)
        if not ts:
            return "0"
        parts = []
        for e in sorted(ts):
            c = ts[e]
            cs = f"({c.real:.6g}{c.imag:+.6g}i)"
            parts.append(cs if e == 0 else f"{cs}*z^({e})")
        s = " + ".join(parts)
        return s if self.exact else s + " + O(z^(%s))" % (Fraction(self.lo + len(self.coeffs), self.ram))


def coerce(f: LaurentSeries, g: LaurentSeries) -> tuple[LaurentSeries, LaurentSeries]:
    r = int(np.lcm(f.ram, g.ram))
    return f.rerami(r), g.rerami(r)


def phi_apply(f: LaurentSeries, pow: int, cfg: Config) -> LaurentSeries:
    """Module-level alias for the phi action on series."""
    return f.phi(pow, cfg)


# ---------------------------------------------------------------------------
# Theta


def theta(trunc: int, cfg: Config) -> LaurentSeries:
    """Partial sum of sum_{n} q^{n(n-1)/2} (-z)^n over |n| <= trunc.

    The omitted coefficients are of size |q|^{O(trunc^2)} and fall below any
    practical tolerance almost immediately, so the result is flagged exact.
    """
    if trunc > cfg.prec:
        raise DomainError("trunc exceeds the configured precision")
    q = cfg.q
    ns = np.arange(-trunc, trunc + 1)
    c = np.array([q ** (n * (n - 1) / 2.0) * (-1.0) ** (n & 1) for n in ns])
    return LaurentSeries(1, -trunc, c, exact=True)


def theta_eval(w: complex, cfg: Config, trunc: int = 40) -> complex:
    """Numeric value of theta at w by direct summation."""
    q = cfg.q
    tot = 0.0 + 0.0j
    for n in range(-trunc, trunc + 1):
        tot += q ** (n * (n - 1) / 2.0) * (-w) ** n
    return tot


def theta_inverse(cfg: Config, trunc: int = 40) -> LaurentSeries:
    """Two-sided truncated expansion of 1/theta on the annulus |q|<|z|<1.

    Uses the product form theta = d * prod(1 - q^n/z) * prod(1 - q^n z)
    with d = prod_{n>=1}(1 - q^n).
    """
    q = cfg.q
    d = 1.0 + 0.0j
    n = 1
    while abs(q) ** n > 1e-18 and n < 400:
        d *= 1.0 - q ** n
        n += 1

    def geom(qn: complex, sign: int) -> LaurentSeries:
        ks = []
        k = 0
        while abs(qn) ** k > 1e-18 and k <= trunc:
            ks.append(qn ** k)
            k += 1
        c = np.array(ks, dtype=np.complex128)
        if sign > 0:
            return LaurentSeries(1, 0, c, exact=True)
        return LaurentSeries(1, -(len(c) - 1), c[::-1], exact=True)

    res = LaurentSeries.const(1.0 / d)
    # n = 0 factor of the z-product: (1 - z)^{-1}, truncated at z^trunc.
    res = res * LaurentSeries(1, 0, np.ones(trunc + 1), exact=True)
    n = 1
    while abs(q) ** n > 1e-18 and n < 400:
        res = res * geom(q ** n, +1)
        res = res * geom(q ** n, -1)
        res = LaurentSeries(1, res.lo, res.coeffs, exact=True)
        n += 1
    # Keep a symmetric window.
    lo, hi = -trunc, trunc + 1
    a = lo - res.lo
    c = np.zeros(hi - lo, dtype=np.complex128)
    for i in range(hi - lo):
        j = a + i
        if 0 <= j < len(res.coeffs):
            c[i] = res.coeffs[j]
    return LaurentSeries(1, lo, c, exact=True)
