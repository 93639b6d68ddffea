import cmath
import itertools
import json
import math
import random

import pytest
from hypothesis import given

from conftest import GOLDEN, chains, points, u
from nctorus.chains import (
    Chain,
    PeriodicChain,
    boundary_b,
    chain_scale,
    ch_idempotent,
    ch_invertible,
    connes_B,
    embed,
    generalized_trace,
)
from nctorus.functionals import pairing, trace_functional
from nctorus.torus import DeformationPoint, MatrixElement, SkewMatrix, TorusElement, mat_mul
from nctorus.verify import conjugated_idempotent, gen_chain, unitriangular_family

ONE = TorusElement.one(2)
ZERO = TorusElement.zero(2)


def unit_matrix(N, i, j, x):
    return MatrixElement([[x if (r, c) == (i, j) else TorusElement.zero(x.n) for c in range(N)] for r in range(N)])


class TestEmbed:
    def test_generators(self):
        assert embed([u(1, 0), u(0, 1)]) == Chain(2, 1, {((1, 0), (0, 1)): 1})

    def test_interior_one_is_degenerate(self):
        x = TorusElement(2, {(1, 2): 1.0, (0, 0): 3.0})
        assert embed([x, ONE]).is_zero()

    def test_bilinear_expansion(self):
        c = embed([u(1, 0) + ONE, u(0, 1)])
        assert c == Chain(2, 1, {((1, 0), (0, 1)): 1, ((0, 0), (0, 1)): 1})

    def test_constructor_drops_degenerate_terms(self):
        c = Chain(2, 2, {((1, 0), (0, 0), (0, 1)): 1.0, ((1, 0), (1, 1), (0, 1)): 2.0})
        assert list(c.terms) == [((1, 0), (1, 1), (0, 1))]


class TestBoundary:
    def test_commutator_of_generators(self, p2):
        c = boundary_b(embed([u(1, 0), u(0, 1)]), p2)
        expected = 1 - cmath.exp(2j * math.pi * GOLDEN * p2.t)
        assert c.degree == 0
        assert c.terms[((1, 1),)] == pytest.approx(expected, abs=1e-15)
        assert len(c) == 1

    def test_leading_one(self, p2):
        assert boundary_b(embed([ONE, u(1, 0)]), p2).is_zero()

    def test_degree_zero_rejected(self, p2):
        with pytest.raises(ValueError):
            boundary_b(Chain(2, 0, {((1, 0),): 1}), p2)

    @given(chains(max_degree=6), points())
    def test_b_squared(self, c, p):
        if c.degree < 2:
            return
        assert boundary_b(boundary_b(c, p), p).max_abs() <= 1e-10 * chain_scale(c)

    def test_b_squared_degree_four_seeded(self, p2):
        for s in range(50):
            c = gen_chain(s, 2, 4, 4, 2)
            assert boundary_b(boundary_b(c, p2), p2).max_abs() <= 1e-10 * chain_scale(c)


class TestConnesB:
    def test_degree_zero(self):
        assert connes_B(Chain(2, 0, {((2, -1),): 1.5})) == Chain(2, 1, {((0, 0), (2, -1)): 1.5})
        assert connes_B(Chain(2, 0, {((0, 0),): 1.0})).is_zero()

    def test_signs_degree_one(self):
        out = connes_B(Chain(2, 1, {((1, 0), (0, 1)): 1.0}))
        # sum_j (-1)^{j} (1, a_j, a_{j+1}) at degree 1
        assert out == Chain(2, 2, {((0, 0), (1, 0), (0, 1)): 1.0, ((0, 0), (0, 1), (1, 0)): -1.0})

    @given(chains(max_degree=5), points())
    def test_B_squared_and_anticommutation(self, c, p):
        assert connes_B(connes_B(c)).max_abs() == 0
        if c.degree >= 1:
            r = boundary_b(connes_B(c), p) + connes_B(boundary_b(c, p))
            assert r.max_abs() <= 1e-10 * chain_scale(c)

    def test_degree_three_seeded(self, p2):
        for s in range(50):
            c = gen_chain(1000 + s, 2, 3, 4, 2)
            r = boundary_b(connes_B(c), p2) + connes_B(boundary_b(c, p2))
            assert connes_B(connes_B(c)).max_abs() == 0
            assert r.max_abs() <= 1e-10 * chain_scale(c)


class TestGeneralizedTrace:
    def test_size_one_is_identity(self):
        x, y = TorusElement(2, {(1, 0): 2.0, (0, 0): 1.0}), TorusElement(2, {(0, 1): 1j})
        assert generalized_trace([MatrixElement([[x]]), MatrixElement([[y]])]) == embed([x, y])

    def test_matrix_units(self):
        a, b = u(1, 2), u(-1, 0)
        assert generalized_trace([unit_matrix(2, 0, 1, a), unit_matrix(2, 1, 0, b)]) == embed([a, b])
        assert generalized_trace([unit_matrix(2, 0, 1, a), unit_matrix(2, 0, 1, b)]).is_zero()

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            generalized_trace([MatrixElement.identity(2, 2), MatrixElement.identity(3, 2)])

    def test_chain_map(self, p2):
        """T commutes with b and B; matrix-level b and B computed by hand here."""
        rng = random.Random(7)

        def rand_matrix(N):
            return MatrixElement(
                [
                    [TorusElement(2, {(rng.randint(-1, 1), rng.randint(-1, 1)): complex(rng.random(), rng.random())})
                     if rng.random() < 0.7 else ZERO for _ in range(N)]
                    for _ in range(N)
                ]
            )

        for N, m in itertools.product((1, 2, 3), (1, 2, 3)):
            fs = [rand_matrix(N) for _ in range(m + 1)]
            T = generalized_trace(fs)
            bT = Chain.zero(2, m - 1)
            for j in range(m):
                merged = fs[:j] + [mat_mul(fs[j], fs[j + 1], p2)] + fs[j + 2 :]
                bT = bT + generalized_trace(merged, coeff=(-1) ** j)
            bT = bT + generalized_trace([mat_mul(fs[m], fs[0], p2)] + fs[1:m], coeff=(-1) ** m)
            assert (bT - boundary_b(T, p2)).max_abs() <= 1e-10 * chain_scale(T)
            eye = MatrixElement.identity(N, 2)
            BT = Chain.zero(2, m + 1)
            for j in range(m + 1):
                BT = BT + generalized_trace([eye] + fs[j:] + fs[:j], coeff=(-1) ** (j * m))
            assert (BT - connes_B(T)).max_abs() <= 1e-10 * chain_scale(T)


def closure_residual(ch, p):
    worst = 0.0
    for k in range(1, ch.cap):
        if (k + 1) % 2 != ch.parity:
            continue
        r = boundary_b(ch.component(k + 1), p) + connes_B(ch.component(k - 1))
        worst = max(worst, r.max_abs())
    return worst


class TestChernCharacters:
    def test_unit_idempotent(self, p2):
        ch = ch_idempotent(MatrixElement.identity(1, 2), p2, cap=6)
        assert ch.component(0) == Chain(2, 0, {((0, 0),): 1.0})
        assert all(ch.component(d).is_zero() for d in (2, 4, 6))

    def test_rank_one_projector_pairing(self, p2):
        P = MatrixElement([[ONE, -u(1, 0)], [ZERO, ZERO]])
        ch = ch_idempotent(P, p2, cap=4)
        assert pairing(trace_functional(2), ch, p2) == pytest.approx(1.0, abs=1e-14)

    def test_identity_rank_three(self, p2):
        ch = ch_idempotent(MatrixElement.identity(3, 2), p2, cap=2)
        assert pairing(trace_functional(2), ch, p2) == pytest.approx(3.0)

    def test_non_idempotent_rejected(self, p2):
        with pytest.raises(ValueError, match="not an idempotent"):
            ch_idempotent(MatrixElement([[u(1, 0)]]), p2)

    @pytest.mark.parametrize("seed", range(4))
    def test_idempotent_closure(self, seed):
        p = DeformationPoint(SkewMatrix.two(GOLDEN), 0.3 + 0.2 * seed)
        P = conjugated_idempotent(2, p, seed)
        ch = ch_idempotent(P, p, cap=6)
        assert closure_residual(ch, p) <= 1e-9 * chain_scale(ch)

    def test_generator_unit(self, p2):
        ch = ch_invertible(MatrixElement([[u(1, 0)]]), p2, cap=1)
        assert ch.component(1) == Chain(2, 1, {((-1, 0), (1, 0)): 1.0})

    def test_trivial_unit(self, p2):
        ch = ch_invertible(MatrixElement.identity(1, 2), p2, cap=5)
        assert ch.is_zero()

    @pytest.mark.parametrize("seed", range(4))
    def test_invertible_closure(self, seed, p2):
        U = unitriangular_family(2, seed)
        ch = ch_invertible(U, p2, cap=5)
        assert closure_residual(ch, p2) <= 1e-9 * chain_scale(ch)

    def test_no_inverse(self, p2):
        with pytest.raises(ValueError, match="inverse"):
            ch_invertible(MatrixElement([[TorusElement(2, {(1, 0): 1, (0, 1): 1})]]), p2)


class TestSerialization:
    def test_chain_round_trip(self):
        c = gen_chain(3, 2, 3)
        assert Chain.from_json(json.loads(json.dumps(c.to_json()))) == c

    def test_periodic_round_trip(self, p2):
        ch = ch_idempotent(conjugated_idempotent(2, p2, 1), p2, cap=4)
        back = PeriodicChain.from_json(json.loads(json.dumps(ch.to_json())))
        assert back.cap == ch.cap and back.parity == ch.parity
        assert all(back.component(d) == ch.component(d) for d in range(0, 5, 2))

    def test_periodic_validation(self):
        with pytest.raises(ValueError):
            PeriodicChain(2, 0, [Chain(2, 1, {((1, 0), (0, 1)): 1})])
        with pytest.raises(ValueError):
            PeriodicChain(2, 0, [Chain(2, 4, {((1, 0),) * 5: 1})], cap=2)

    def test_duplicate_factors_rejected(self):
        term = {"factors": [[1, 0], [0, 1]], "re": 1.0, "im": 0.0}
        with pytest.raises(ValueError):
            Chain.from_json({"n": 2, "degree": 1, "terms": [term, term]})
