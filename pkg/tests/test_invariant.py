import cmath
import json
import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import GOLDEN, chains, points
from nctorus import cochains as co
from nctorus import functionals as fn
from nctorus import invariant as inv
from nctorus.chains import Chain, PeriodicChain, b_plus_B, chain_scale
from nctorus.torus import DeformationPoint, DimensionError, SkewMatrix

D1, D2 = co.derivation(1, 2), co.derivation(2, 2)
KEY_R = ((0, 1), (1, 0), (0, -1), (-1, 0))


def lift(c):
    return PeriodicChain.of(c)


class TestDegrees:
    def test_examples(self):
        assert inv.deg(1, ((1, 0), (0, 1))) == 1
        assert inv.degree_vector(((1, 0), (-1, 0))) == (0, 0)
        c = Chain(2, 1, {((1, 0), (0, 1)): 1.0, ((1, 0), (-1, 0)): 2.0})
        assert inv.project_invariant(c) == Chain(2, 1, {((1, 0), (-1, 0)): 2.0})

    @given(chains(max_degree=4))
    def test_projection_idempotent_and_axiswise(self, c):
        once = inv.project_invariant(c)
        assert inv.project_invariant(once) == once
        assert inv.is_invariant(once)
        assert inv.project_axis(2, inv.project_axis(1, c)) == once

    def test_require_invariant(self):
        with pytest.raises(inv.NonInvariantError):
            inv.require_invariant(Chain(2, 1, {((1, 0), (0, 1)): 1.0}))
        c = Chain(2, 1, {((1, 0), (-1, 0)): 1.0})
        assert inv.require_invariant(c) is c


class TestHomotopy:
    def test_smoothing_examples(self):
        c = Chain(2, 1, {((1, 0), (1, 0)): 1.0})
        assert inv.smoothing_N(1, c) == c * 0.5
        assert inv.smoothing_N(1, Chain(2, 1, {((1, 0), (-1, 0)): 1.0})).is_zero()

    @given(chains(max_degree=4), points(), st.sampled_from([1, 2]))
    def test_chain_homotopy(self, c, p, j):
        pc = lift(c)
        if j == 2:
            pc = inv.project_axis(1, pc)
        bB = co.op_bB(p)
        lhs = bB(inv.homotopy_h(j, pc, p)) + inv.homotopy_h(j, bB(pc), p)
        rhs = pc - inv.project_axis(j, pc)
        assert (lhs - rhs).max_abs() <= 1e-10 * chain_scale(c)


class TestRPoly:
    def test_example(self, theta2):
        assert inv.R_poly(KEY_R, theta2) == pytest.approx(GOLDEN, abs=1e-15)

    def test_trivial(self, theta2):
        assert inv.R_poly(((0, 0), (0, 0)), theta2) == 0
        assert inv.R_poly(KEY_R, SkewMatrix.two(0.0)) == 0

    def test_errors(self, theta2):
        with pytest.raises(inv.NonInvariantError):
            inv.R_poly(((1, 0), (0, 1)), theta2)
        with pytest.raises(DimensionError):
            inv.R_poly(((1, 0, 0), (-1, 0, 0)), theta2)

    @given(chains(max_degree=4, invariant=True), points())
    def test_eigenvalue(self, c, p):
        for key in c.terms:
            single = Chain(2, c.degree, {key: 1.0})
            out = inv.lie_pair_sum(single, p.theta, p)
            assert (out - single * inv.R_poly(key, p.theta)).max_abs() <= 1e-12

    def test_eigenvalue_three_torus(self):
        th = SkewMatrix.from_lower(3, {(2, 1): 0.3, (3, 1): -0.45, (3, 2): 0.8})
        p = DeformationPoint(th, 0.6)
        rng = random.Random(4)
        for _ in range(20):
            inner = [tuple(rng.randint(-2, 2) for _ in range(3)) for _ in range(3)]
            if not all(any(a) for a in inner):
                continue
            key = (tuple(-sum(a[i] for a in inner) for i in range(3)), *inner)
            single = Chain(3, 3, {key: 1.0})
            out = inv.lie_pair_sum(single, th, p)
            assert (out - single * inv.R_poly(key, th)).max_abs() <= 1e-12


class TestTildeTransport:
    def test_single_term(self, theta2):
        c = Chain(2, 3, {KEY_R: 1.0})
        out = inv.transport_tilde_chain(c, 0.0, 1.0, theta2)
        assert out.terms[KEY_R] == pytest.approx(cmath.exp(-2j * math.pi * GOLDEN), abs=1e-14)

    def test_identities(self, theta2):
        c = Chain(2, 3, {KEY_R: 1.0, ((1, 1), (-1, 0), (0, -1), (0, 0)): 0.0})
        assert inv.transport_tilde_chain(c, 0.3, 0.3, theta2) is c
        assert inv.transport_tilde_chain(c, 0.0, 1.0, SkewMatrix.two(0.0)) == c

    @given(chains(max_degree=4, invariant=True), st.floats(-2, 2), st.floats(-2, 2))
    def test_round_trip(self, c, t0, t1):
        th = SkewMatrix.two(GOLDEN)
        back = inv.transport_tilde_chain(inv.transport_tilde_chain(c, t0, t1, th), t1, t0, th)
        assert (back - c).max_abs() <= 1e-12 * chain_scale(c)

    def test_rejects_non_invariant(self, theta2):
        with pytest.raises(inv.NonInvariantError):
            inv.transport_tilde_chain(Chain(2, 1, {((1, 0), (0, 1)): 1.0}), 0.0, 1.0, theta2)

    @given(chains(max_degree=4, invariant=True), st.floats(-1, 1), st.floats(-1, 1))
    def test_chain_map(self, c, t0, t1):
        th = SkewMatrix.two(GOLDEN)
        pc = lift(c)
        lhs = b_plus_B(inv.transport_tilde_chain(pc, t0, t1, th), DeformationPoint(th, t1))
        rhs = inv.transport_tilde_chain(b_plus_B(pc, DeformationPoint(th, t0)), t0, t1, th)
        assert (lhs - rhs).max_abs() <= 1e-9 * chain_scale(c)

    @given(chains(max_degree=4, invariant=True), st.floats(-1, 1))
    def test_pairing_covariance(self, c, s):
        th = SkewMatrix.two(GOLDEN)
        rng = random.Random(len(c))
        table = inv.FunctionalTable(2, c.degree, {k: complex(rng.random(), rng.random()) for k in c.terms})
        before = fn.pairing(table.as_functional(), c, DeformationPoint(th, 0.2))
        moved = inv.transport_tilde_functional(table, 0.2, 0.2 + s, th)
        after = fn.pairing(moved.as_functional(), inv.transport_tilde_chain(c, 0.2, 0.2 + s, th), DeformationPoint(th, 0.2 + s))
        assert after == pytest.approx(before, abs=1e-10 * chain_scale(c))

    def test_functional_table_phase(self, theta2):
        table = inv.FunctionalTable(2, 3, {KEY_R: 2.0})
        out = inv.transport_tilde_functional(table, 0.0, 1.0, theta2)
        assert out.table[KEY_R] == pytest.approx(2.0 * cmath.exp(2j * math.pi * GOLDEN), abs=1e-14)
        with pytest.raises(inv.NonInvariantError):
            inv.transport_tilde_functional(inv.FunctionalTable(2, 1, {((1, 0), (0, 1)): 1.0}), 0, 1, theta2)

    def test_lazy_functional(self, theta2):
        g = fn.gamma_axes((1, 2), 2)
        moved = inv.transport_tilde_functional(g, 0.1, 0.6, theta2)
        key = ((-1, -1), (1, 0), (0, 1))
        expected = g.on_monomials(key, DeformationPoint(theta2, 0.1)) * cmath.exp(
            2j * math.pi * inv.R_poly(key, theta2) * 0.5
        )
        assert moved.on_monomials(key, DeformationPoint(theta2, 0.6)) == pytest.approx(expected, abs=1e-14)
        assert moved.on_monomials(((1, 0), (0, 1), (0, 0)), DeformationPoint(theta2, 0.6)) == 0


class TestChi:
    def test_empty_wedge(self, p2):
        c = Chain(2, 1, {((1, 0), (-1, 0)): 1.0})
        assert inv.chi_apply((), c, p2) == c

    @given(chains(max_degree=3, invariant=True), points())
    def test_composed_contractions(self, c, p):
        pc = lift(c)
        direct = co.cyclic_contraction(D1, co.cyclic_contraction(D2, pc, p), p)
        assert (inv.chi_apply((1, 2), pc, p) - direct).max_abs() == 0

    @given(chains(max_degree=3, invariant=True), points())
    def test_chi_square_is_null_homotopic(self, c, p):
        pc = lift(c)
        bB = co.op_bB(p)
        H = co.op_Ipair(D1, D1, p) * -1.0 - co.op_I(co.compose(D1, D1) * 0.5, p)
        lhs = inv.chi_apply((1,), inv.chi_apply((1,), pc, p), p)
        rhs = co.commutator(bB, H)(pc)
        assert (lhs - rhs).max_abs() <= 1e-9 * chain_scale(c)

    def test_rejects_non_invariant(self, p2):
        with pytest.raises(inv.NonInvariantError):
            inv.chi_apply((1,), Chain(2, 1, {((1, 0), (0, 1)): 1.0}), p2)


class TestWedgeModel:
    def test_tau_transport(self, theta2):
        w = inv.WedgeClass(2, 0, {(): 1.0})
        s = 0.37
        out = inv.gm_transport_wedge(w, 0.1, 0.1 + s, theta2)
        assert out.coeff(()) == 1.0
        assert out.coeff((1, 2)) == pytest.approx(2j * math.pi * GOLDEN * s, abs=1e-14)

    def test_top_class_unchanged(self, theta2):
        w = inv.WedgeClass(2, 0, {(1, 2): 1.5 - 1j})
        assert inv.gm_transport_wedge(w, 0.0, 2.0, theta2).allclose(w, 0.0)

    def test_zero_theta(self):
        w = inv.WedgeClass(3, 1, {(1,): 1.0, (2,): 2.0, (1, 2, 3): 0.5})
        assert inv.gm_transport_wedge(w, 0.0, 1.0, SkewMatrix(np.zeros((3, 3)))).allclose(w, 0.0)

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_matches_generic_nilpotent(self, n):
        rng = random.Random(n)
        th = SkewMatrix.from_lower(n, {(j, k): rng.uniform(-1, 1) for j in range(2, n + 1) for k in range(1, j)})
        for parity in (0, 1):
            coeffs = {s: complex(rng.random(), rng.random()) for s in inv.wedge_basis(n) if len(s) % 2 == parity}
            w = inv.WedgeClass(n, parity, coeffs)
            a = inv.gm_transport_wedge(w, 0.2, 1.1, th)
            b = inv.gm_transport_wedge_reference(w, 0.2, 1.1, th)
            assert a.allclose(b, 1e-12)

    def test_group_law(self):
        th = SkewMatrix.from_lower(4, {(2, 1): 0.3, (4, 3): -0.7, (3, 1): 0.2})
        w = inv.WedgeClass(4, 0, {(): 1.0, (1, 3): 2.0})
        two = inv.gm_transport_wedge(inv.gm_transport_wedge(w, 0.0, 0.4, th), 0.4, 1.0, th)
        assert two.allclose(inv.gm_transport_wedge(w, 0.0, 1.0, th), 1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            inv.WedgeClass(2, 0, {(2, 1): 1.0})
        with pytest.raises(ValueError):
            inv.WedgeClass(2, 1, {(1, 2): 1.0})
        with pytest.raises(ValueError):
            inv.WedgeClass(2, 1, {(3,): 1.0})
        with pytest.raises(DimensionError):
            inv.gm_transport_wedge(inv.WedgeClass(3, 0, {(): 1}), 0, 1, SkewMatrix.two(0.1))

    def test_basis_order(self):
        assert inv.wedge_basis(3) == [(), (1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3)]


def closure_below_cap(z, p):
    r = b_plus_B(z, p)
    return max((c.max_abs() for d, c in r.components.items() if d <= z.cap), default=0.0)


class TestProductCycle:
    def test_closed_at_zero(self, theta2):
        p0 = DeformationPoint(theta2, 0.0)
        z = inv.product_cycle(p0)
        assert inv.is_invariant(z)
        assert closure_below_cap(z, p0) <= 1e-12

    @pytest.mark.parametrize("t", [0.3, 1.0])
    def test_transported_cycle_is_closed(self, theta2, t):
        z = inv.transport_tilde_chain(inv.product_cycle(DeformationPoint(theta2, 0.0)), 0.0, t, theta2)
        assert closure_below_cap(z, DeformationPoint(theta2, t)) <= 1e-12

    def test_pairs_with_tau2(self, theta2):
        p0 = DeformationPoint(theta2, 0.0)
        val = fn.pairing(fn.gamma_axes((1, 2), 2), inv.product_cycle(p0), p0)
        assert abs(val) > 0.1

    def test_requires_commutative_fiber(self, p2):
        with pytest.raises(ValueError):
            inv.product_cycle(p2)

    def test_shuffle_degrees(self, theta2):
        p0 = DeformationPoint(theta2, 0.0)
        x = Chain(2, 1, {((-1, 0), (1, 0)): 1.0})
        y = Chain(2, 1, {((0, -1), (0, 1)): 1.0})
        prod = inv.shuffle_product(x, y, p0)
        assert prod.parity == 0 and prod.degrees() == [2]


class TestSerialization:
    def test_wedge_round_trip(self):
        w = inv.WedgeClass(3, 1, {(1,): 1.0, (1, 2, 3): 0.25 - 2j})
        assert inv.WedgeClass.from_json(json.loads(json.dumps(w.to_json()))).allclose(w, 0.0)

    def test_table_round_trip(self):
        t = inv.FunctionalTable(2, 3, {KEY_R: 1 + 2j, ((0, 0), (1, 0), (0, 1), (-1, -1)): -0.5})
        back = inv.FunctionalTable.from_json(json.loads(json.dumps(t.to_json())))
        assert back.table == t.table

    def test_duplicates_rejected(self):
        data = {"n": 2, "parity": "even", "terms": [{"axes": [], "re": 1, "im": 0}] * 2}
        with pytest.raises(ValueError):
            inv.WedgeClass.from_json(data)
