import cmath
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdmod.errors import DomainError, NumericalError
from qdmod.qcore import (
    Config,
    ConstantClass,
    LaurentSeries,
    const_class_of,
    phi_apply,
    q_normalize,
    theta,
    theta_eval,
    theta_inverse,
)

CFG = Config()


class TestConstantClass:
    def test_identity(self):
        c = const_class_of(1.0, CFG)
        assert abs(c.a0) < 1e-12 and abs(c.a1) < 1e-12

    def test_q_maps_to_unit_one(self):
        c = const_class_of(CFG.q, CFG)
        assert abs(c.a0) < 1e-10
        assert abs(c.a1 - 1.0) < 1e-10

    def test_minus_one(self):
        cfg = Config(tau=0.3 + 1.1j)
        c = const_class_of(-1.0, cfg)
        assert abs(c.a0 - 0.5) < 1e-10 and abs(c.a1) < 1e-10
        assert abs(c.value(cfg) - (-1.0)) < 1e-10

    def test_zero_rejected(self):
        with pytest.raises(DomainError):
            const_class_of(0.0, CFG)

    def test_q_normalize_fixed_point(self):
        c, k = q_normalize(ConstantClass(0.25, 0.0))
        assert k == 0 and abs(c.a1) < 1e-12

    def test_q_normalize_q(self):
        c, k = q_normalize(const_class_of(CFG.q, CFG))
        assert k == 1 and abs(c.a0) < 1e-10 and abs(c.a1) < 1e-10

    def test_q_normalize_negative(self):
        c, k = q_normalize(ConstantClass(0.5, -2.25))
        assert k == -3
        assert abs(c.a1 - 0.75) < 1e-12
        v = c.value(CFG)
        assert abs(CFG.q) < abs(v) <= 1.0 + 1e-12

    @given(a0=st.floats(0.05, 0.95), a1=st.floats(-4, 4))
    @settings(max_examples=60, deadline=None)
    def test_roundtrip(self, a0, a1):
        w = cmath.exp(2j * cmath.pi * (a0 + a1 * CFG.tau))
        c = const_class_of(w, CFG)
        assert abs(c.a0 - a0) < 1e-8
        assert abs(c.a1 - a1) < 1e-8

    @given(a1=st.floats(-4, 4))
    @settings(max_examples=40, deadline=None)
    def test_normalize_idempotent(self, a1):
        c, _ = q_normalize(ConstantClass(0.3, a1))
        c2, k2 = q_normalize(c)
        assert k2 == 0 and abs(c2.a1 - c.a1) < 1e-12


class TestSeries:
    def test_mul_window(self):
        f = LaurentSeries.from_terms({0: 1, 1: 1})
        g = LaurentSeries.from_terms({0: 1, 1: -1})
        prod = f * g
        assert abs(prod.coeff(0) - 1) < 1e-14
        assert abs(prod.coeff(1)) < 1e-14
        assert abs(prod.coeff(2) + 1) < 1e-14

    def test_invert_geometric(self):
        f = LaurentSeries.from_terms({0: 1, 1: -1})
        inv = f.invert(16)
        for k in range(10):
            assert abs(inv.coeff(k) - 1.0) < 1e-12

    def test_invert_requires_leading(self):
        z = LaurentSeries.zero()
        with pytest.raises(NumericalError):
            z.invert(8)

    def test_ord_ramified(self):
        f = LaurentSeries.from_terms({Fraction(-3, 2): 1.0, 1: 1.0})
        assert f.ord(1e-10) == Fraction(-3, 2)
        assert f.ram == 2

    def test_rerami(self):
        f = LaurentSeries.from_terms({1: 2.0})
        g = f.rerami(3)
        assert g.coeff(1) == 2.0 and g.ram == 3

    def test_phi_monomial(self):
        f = LaurentSeries.monomial(1.0, 1)
        g = phi_apply(f, 1, CFG)
        assert abs(g.coeff(1) - CFG.q) < 1e-15

    def test_phi_ramified_square(self):
        f = LaurentSeries.monomial(1.0, Fraction(1, 2))
        g = phi_apply(f, 2, CFG)
        assert abs(g.coeff(Fraction(1, 2)) - CFG.q) < 1e-15

    def test_phi_constant(self):
        f = LaurentSeries.one()
        for p in (1, 3, -2):
            assert abs(phi_apply(f, p, CFG).coeff(0) - 1.0) < 1e-15

    @given(p1=st.integers(-3, 3), p2=st.integers(-3, 3))
    @settings(max_examples=30, deadline=None)
    def test_phi_composition(self, p1, p2):
        f = LaurentSeries.from_terms({Fraction(-1, 2): 0.3 + 1j, 0: 1.0, 2: -0.5})
        a = phi_apply(phi_apply(f, p1, CFG), p2, CFG)
        b = phi_apply(f, p1 + p2, CFG)
        diff = a - b
        assert diff.max_abs() < 1e-12 * max(1.0, b.max_abs())

    @given(st.integers(0, 100))
    @settings(max_examples=25, deadline=None)
    def test_mul_commutative(self, seed):
        rng = np.random.default_rng(seed)

        def rand_series():
            terms = {}
            for _ in range(rng.integers(1, 5)):
                e = int(rng.integers(-4, 5))
                terms[e] = complex(rng.standard_normal(), rng.standard_normal())
            return LaurentSeries.from_terms(terms)

        f, g, h = rand_series(), rand_series(), rand_series()
        d1 = f * g - g * f
        assert d1.max_abs() < 1e-12
        d2 = (f * g) * h - f * (g * h)
        assert d2.max_abs() < 1e-10


class TestTheta:
    def test_constant_term_is_one(self):
        th = theta(30, CFG)
        assert abs(th.coeff(0) - 1.0) < 1e-15

    def test_theta_c_with_c_one_trivial(self):
        # theta_c = Theta(cz)/Theta(z) is identically 1 at c = 1
        w = 0.7 + 0.2j
        assert abs(theta_eval(w, CFG) / theta_eval(w, CFG) - 1.0) < 1e-15

    def test_functional_equation(self):
        cfg = Config(tau=0.1 + 1.0j)
        w = 0.5
        lhs = -w * theta_eval(cfg.q * w, cfg)
        rhs = theta_eval(w, cfg)
        assert abs(lhs - rhs) < 1e-10 * abs(rhs)

    def test_functional_equation_residual_shrinks(self):
        # partial sums satisfy the functional equation to O(|q|^trunc);
        # use a larger |q| so the decay is visible above machine epsilon
        cfg = Config(tau=0.1 + 0.25j)
        w = 1.3 + 0.4j
        res = []
        for trunc in (4, 8, 12):
            th = theta(trunc, cfg)
            lhs = -w * th.eval(cfg.q * w)
            rhs = th.eval(w)
            res.append(abs(lhs - rhs) / abs(rhs))
        assert res[1] < res[0] * 1e-2
        assert res[2] < res[1] * 1e-2 or res[2] < 1e-14

    def test_sample_points(self):
        rng = np.random.default_rng(3)
        th = theta(40, CFG)
        for _ in range(10):
            w = complex(rng.uniform(0.4, 1.5), rng.uniform(-0.5, 0.5))
            lhs = -w * th.eval(CFG.q * w)
            rhs = th.eval(w)
            assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(rhs))

    def test_inverse(self):
        th = theta(25, CFG)
        thi = theta_inverse(CFG, 25)
        prod = th * thi
        for k in range(-10, 11):
            want = 1.0 if k == 0 else 0.0
            assert abs(prod.coeff(k) - want) < 1e-12
