import cmath
import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import GOLDEN, chains, points, u
from nctorus import cochains as co
from nctorus.chains import Chain, PeriodicChain, boundary_b, chain_scale
from nctorus.torus import DeformationPoint, SkewMatrix, TorusElement, mul
from nctorus.verify import gen_chain, gen_element

ONE = TorusElement.one(2)
D1, D2 = co.derivation(1, 2), co.derivation(2, 2)


def random_monomials(seed, k, count=20):
    rng = random.Random(seed)
    return [tuple(u(rng.randint(-3, 3), rng.randint(-3, 3)) for _ in range(k)) for _ in range(count)]


def op_residual(lhs, rhs, c):
    return (lhs(c) - rhs(c)).max_abs() / chain_scale(c)


class TestMultiDiffAlgebra:
    def test_linear_structure(self, p2):
        X = D1 + D2 * 2
        assert X((u(1, 1),), p2) == u(1, 1) * 3
        assert X.is_derivation
        assert (-D1)((u(2, 0),), p2) == u(2, 0) * -2

    def test_arity_checked(self, p2):
        with pytest.raises(ValueError):
            D1((u(1, 0), u(0, 1)), p2)
        with pytest.raises(ValueError):
            D1 + co.cup(D1, D2)

    def test_cup_examples(self, p2):
        c = co.cup(D1, D2)
        assert c((u(1, 0), u(0, 1)), p2) == u(1, 1)
        assert c((ONE, u(3, 1)), p2).is_zero()
        assert c((u(0, 1), u(1, 0)), p2).is_zero()

    def test_commuting_derivations(self, p2):
        br = co.bracket(D1, D2)
        for args in random_monomials(1, 1):
            assert br(args, p2).is_zero()

    def test_derivation_acts_on_cup(self, p2):
        br = co.bracket(D1, co.cup(D1, D2))
        for args in random_monomials(2, 2):
            assert br(args, p2).norm_inf() <= 1e-12

    def test_bracket_antisymmetry(self, p2):
        E = co.E_cocycle(SkewMatrix.two(GOLDEN))
        pairs = [(D1, co.cup(D1, D2)), (co.cup(D2, D1), E), (D2, E), (co.cup(D1, D2), co.cup(D2, D1))]
        for D, F in pairs:
            sign = -((-1) ** (D.shift * F.shift))
            lhs, rhs = co.bracket(D, F), co.bracket(F, D)
            for args in random_monomials(3, lhs.arity, 5):
                assert (lhs(args, p2) - rhs(args, p2) * sign).norm_inf() <= 1e-10

    def test_multiplication_is_not_normalized(self, p2):
        m = co.multiplication(2)
        assert not m.normalized
        with pytest.raises(co.NormalizationError):
            co.cyclic_contraction(m, Chain(2, 2, {((1, 0), (0, 1), (1, 1)): 1}), p2)

    def test_spot_check_on_derivation(self, p2):
        r = co.spot_check(co.cup(D1, D2), p2, samples=5, seed=1)
        assert max(r.values()) <= 1e-12


class TestCoboundary:
    def test_derivations_are_cocycles(self, p2):
        for D in (D1, D2):
            dD = co.hochschild_delta(D)
            for args in random_monomials(4, 2):
                assert dD(args, p2).norm_inf() <= 1e-12

    def test_matches_bracket_with_m(self, p2):
        D = co.cup(D1, D2)
        lhs, rhs = co.hochschild_delta(D), co.bracket(co.multiplication(2), D)
        for i in range(20):
            args = [gen_element(100 * i + k, 2, 2, 2) for k in range(3)]
            a, b = lhs(args, p2), rhs(args, p2)
            assert (a - b).norm_inf() <= 1e-10 * (1 + max(a.norm_inf(), b.norm_inf()))

    def test_delta_squared(self, p2):
        for D in (co.cup(D1, D2), co.cup(co.cup(D1, D2), D1)):
            dd = co.hochschild_delta(co.hochschild_delta(D))
            for args in random_monomials(5, dd.arity, 5):
                assert dd(args, p2).norm_inf() <= 1e-10


class TestCurvatureCocycle:
    def test_examples(self, p2):
        E = co.E_cocycle(p2.theta)
        expected = mul(u(0, 1), u(1, 0), p2) * (2j * math.pi * GOLDEN)
        assert E((u(0, 1), u(1, 0)), p2).allclose(expected, 1e-14)
        assert E((ONE, u(2, 1)), p2).is_zero() and E((u(2, 1), ONE), p2).is_zero()
        assert E((u(1, 0), u(0, 1)), p2).is_zero()

    def test_cocycle(self, p2):
        dE = co.hochschild_delta(co.E_cocycle(p2.theta))
        for args in random_monomials(6, 3, 10):
            assert dE(args, p2).norm_inf() <= 1e-10


class TestChainOperators:
    def test_lie_derivative_eigenvalue(self, p2):
        c = Chain(2, 1, {((1, 0), (0, 1)): 1})
        assert co.lie_derivative(D1, c, p2) == c
        assert co.lie_derivative(D1, Chain(2, 1, {((1, 0), (-1, 0)): 1}), p2).is_zero()

    def test_lie_of_m_is_minus_b(self, p2):
        m = co.multiplication(2)
        for s in range(50):
            c = gen_chain(s, 2, 1 + s % 4, 3, 2)
            assert (co.lie_derivative(m, c, p2) + boundary_b(c, p2)).max_abs() <= 1e-10 * chain_scale(c)

    def test_iota_examples(self, p2):
        c = Chain(2, 1, {((-1, 0), (1, 0)): 1})
        assert co.contract_iota(D1, c, p2) == Chain(2, 0, {((0, 0),): 1})
        assert co.contract_iota(D2, c, p2).is_zero()

    def test_iota_degree_too_low(self, p2):
        with pytest.raises(ValueError):
            co.contract_iota(co.cup(D1, D2), Chain(2, 1, {((1, 0), (0, 1)): 1}), p2)

    def test_b_iota_commute_for_derivations(self, p2):
        lhs = co.commutator(co.op_b(p2), co.op_iota(D1, p2))
        for s in range(50):
            c = gen_chain(200 + s, 2, 2 + s % 3, 3, 2)
            assert lhs(c).max_abs() <= 1e-10 * chain_scale(c)

    def test_S_and_I_examples(self, p2):
        c = Chain(2, 1, {((-1, 0), (1, 0)): 1})
        assert co.contract_S(D1, c, p2) == Chain(2, 2, {((0, 0), (-1, 0), (1, 0)): 1})
        I = co.cyclic_contraction(D1, c, p2)
        assert isinstance(I, PeriodicChain)
        assert I.component(0) == Chain(2, 0, {((0, 0),): 1})
        assert I.component(2) == Chain(2, 2, {((0, 0), (-1, 0), (1, 0)): 1})

    def test_S_drops_degenerate_outputs(self, p2):
        # rotating the leading 1 into an interior slot is degenerate
        c = Chain(2, 1, {((0, 0), (1, 0)): 1})
        assert co.contract_S(D1, c, p2).is_zero()

    def test_pair_contraction_vanishes_in_low_degree(self, p2):
        for d in (0, 1):
            c = gen_chain(9 + d, 2, d)
            assert co.contract_pair(D1, D2, c, p2).is_zero()

    def test_pair_needs_derivations(self, p2):
        c = gen_chain(1, 2, 2)
        with pytest.raises(ValueError):
            co.lie_pair(co.cup(D1, D2), D1, c, p2)

    @given(chains(max_degree=4, invariant=True), points())
    def test_lie_pair_invariant_form(self, c, p):
        for X, Y in [(D1, D2), (D2, D1), (D1, D1)]:
            a, b = co.lie_pair(X, Y, c, p), co.lie_pair_invariant(X, Y, c, p)
            assert (a - b).max_abs() <= 1e-12 * chain_scale(c)

    def test_lie_pair_generators(self, p2):
        c = Chain(2, 1, {((0, 1), (1, 0)): 1})
        # general form: the double sum is empty at degree 1 and Y(a_0) = delta_1(u_2) = 0
        assert co.lie_pair(D2, D1, c, p2).is_zero()
        assert co.lie_pair(D1, D2, c, p2) == c
        # the invariant-complex form keeps the i = 0 term
        assert co.lie_pair_invariant(D2, D1, c, p2) == c


def cochain_family(theta):
    cups = [co.cup(D1, D2), co.cup(D2, D1)]
    return [D1, D2] + cups + [co.E_cocycle(theta), co.cup(co.E_cocycle(theta), D1) * 0.5]


class TestIdentities:
    @given(chains(max_degree=5), points())
    def test_cartan_homotopy_formula(self, c, p):
        bB = co.op_bB(p)
        for D in cochain_family(p.theta):
            lhs = co.commutator(bB, co.op_I(D, p))
            rhs = co.op_L(D, p) + co.op_I(co.hochschild_delta(D), p)
            assert op_residual(lhs, rhs, c) <= 1e-9

    @given(chains(max_degree=5), points())
    def test_b_and_B_against_lie(self, c, p):
        for D in cochain_family(p.theta):
            L = co.op_L(D, p)
            assert op_residual(co.commutator(co.op_b(p), L), -co.op_L(co.hochschild_delta(D), p), c) <= 1e-9
            assert co.commutator(co.op_B(), L)(c).max_abs() <= 1e-9 * chain_scale(c)
            iota = co.op_iota(D, p)
            assert op_residual(co.commutator(co.op_b(p), iota), co.op_iota(co.hochschild_delta(D), p), c) <= 1e-9

    @given(chains(max_degree=4), points())
    def test_lie_brackets(self, c, p):
        cup = co.cup(D1, D2)
        for D, F in [(D1, D2), (D1, cup), (D2, co.E_cocycle(p.theta))]:
            lhs = co.commutator(co.op_L(D, p), co.op_L(F, p))
            assert op_residual(lhs, co.op_L(co.bracket(D, F), p), c) <= 1e-9
        for X in (D1, D2):
            for D in (cup, co.E_cocycle(p.theta)):
                lhs = co.commutator(co.op_L(X, p), co.op_I(D, p))
                assert op_residual(lhs, co.op_I(co.bracket(X, D), p), c) <= 1e-9

    @given(chains(max_degree=5), points())
    def test_two_derivation_formula_and_corollary(self, c, p):
        bB = co.op_bB(p)
        for X in (D1, D2, D1 + D2 * 0.5):
            for Y in (D1, D2):
                lhs = co.commutator(bB, co.op_Ipair(X, Y, p))
                rhs = co.op_Lpair(X, Y, p) + co.op_I(co.cup(X, Y), p) - co.op_I(Y, p) @ co.op_I(X, p)
                assert op_residual(lhs, rhs, c) <= 1e-9
                lhs = co.commutator(bB, co.op_Lpair(X, Y, p))
                rhs = -co.op_L(co.cup(X, Y), p) + co.op_L(Y, p) @ co.op_I(X, p) - co.op_I(Y, p) @ co.op_L(X, p)
                assert op_residual(lhs, rhs, c) <= 1e-9

    @given(chains(max_degree=4, invariant=True), points())
    def test_chi_witness_on_invariant_chains(self, c, p):
        bB = co.op_bB(p)
        for X in (D1, D2, D1 * 0.3 - D2 * 1.1):
            lhs = co.commutator(bB, -co.op_Ipair(X, X, p) - co.op_I(co.compose(X, X) * 0.5, p))
            assert op_residual(lhs, co.op_I(X, p) @ co.op_I(X, p), c) <= 1e-9

    def test_chi_witness_needs_invariance(self, p2):
        """Off the invariant complex the witness misses by minus half of L_X squared."""
        bB = co.op_bB(p2)
        lhs = co.commutator(bB, -co.op_Ipair(D1, D1, p2) - co.op_I(co.compose(D1, D1) * 0.5, p2))
        gap = lhs - co.op_I(D1, p2) @ co.op_I(D1, p2)
        half_L2 = co.op_L(D1, p2) @ co.op_L(D1, p2) * 0.5
        for key in [((1, 0), (0, 1)), ((2, 0), (0, 1)), ((0, 0), (3, 1)), ((1, 1), (1, 0), (0, 1))]:
            c = Chain(2, len(key) - 1, {key: 1.0})
            assert gap(c).max_abs() > 0.1
            assert (gap(c) + half_L2(c)).max_abs() <= 1e-12

    @given(chains(max_degree=4), points())
    def test_pair_operator_equivariance(self, c, p):
        for Z in (D1, D2):
            for X, Y in [(D1, D2), (D2, D2)]:
                lhs = co.commutator(co.op_L(Z, p), co.op_Ipair(X, Y, p))
                rhs = co.op_Ipair(co.bracket(Z, X), Y, p) + co.op_Ipair(X, co.bracket(Z, Y), p)
                assert op_residual(lhs, rhs, c) <= 1e-9


class TestParser:
    @pytest.mark.parametrize(
        "expr,arity",
        [("delta:1", 1), ("E", 2), ("m", 2), ("cup:(delta:1,delta:2)", 2), ("bracket:(delta:1,cup:(delta:1,delta:2))", 2),
         ("circ:(delta:2,E)", 2), ("d:(cup:(delta:1,delta:2))", 3), ("E:(0.25)", 2)],
    )
    def test_arity(self, expr, arity, theta2):
        assert co.parse_cochain(expr, 2, theta2).arity == arity

    def test_parsed_cup_evaluates(self, p2):
        D = co.parse_cochain("cup:(delta:1, delta:2)", 2, p2.theta)
        assert D((u(1, 0), u(0, 1)), p2) == u(1, 1)

    def test_scalar_E(self, p2):
        E = co.parse_cochain("E:(0.25)", 2)
        expected = mul(u(0, 1), u(1, 0), p2) * (2j * math.pi * 0.25)
        assert E((u(0, 1), u(1, 0)), p2).allclose(expected, 1e-14)

    @pytest.mark.parametrize("expr", ["delta", "cup:(delta:1)", "foo", "E:(x)", "delta:3"])
    def test_errors(self, expr, theta2):
        with pytest.raises(ValueError):
            co.parse_cochain(expr, 2, theta2)

    def test_E_needs_theta(self):
        with pytest.raises(ValueError):
            co.parse_cochain("E", 2)
