"""Hochschild cochains D in C^k(A, A) and the operators they induce on chains.

A :class:`MultiDiff` is extensional: an opaque evaluator on k-tuples of
torus elements at a deformation point. Equality is only ever tested by
evaluation on samples.

Chain-level operators (all act on the monomial basis, term by term):

* ``lie_derivative``  L_D, degree 1 - k
* ``contract_iota``   iota_D, degree -k
* ``contract_S``      S_D, degree 2 - k
* ``cyclic_contraction`` I_D = iota_D + S_D
* ``lie_pair`` / ``contract_pair``  L{X,Y} (degree 0) and I{X,Y} (degree +1)
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .chains import AnyChain, Chain, Key, PeriodicChain, apply_terms, boundary_b, connes_B, emit, mono
from .torus import (
    TWO_PI,
    DeformationPoint,
    DimensionError,
    MultiIndex,
    SkewMatrix,
    TorusElement,
    delta,
    monomial_product,
    mul,
)

Evaluator = Callable[[tuple[TorusElement, ...], DeformationPoint], TorusElement]
Terms = Mapping[MultiIndex, complex]

_CACHE_LIMIT = 200_000


class NormalizationError(ValueError):
    """A non-normalized cochain (the product m) was passed where C^k(A, A) is required."""


def _fmt_scalar(s: complex) -> str:
    return f"{s.real:g}" if s.imag == 0 else f"({s.real:g}{s.imag:+g}j)"


@dataclass(eq=False)
class MultiDiff:
    """Normalized multilinear operator A^k -> A.

    ``shift`` is the Gerstenhaber degree |D| = k - 1. ``normalized=False``
    is reserved for the multiplication m.
    """

    arity: int
    evaluator: Evaluator
    n: int
    label: str = "D"
    is_derivation: bool = False
    normalized: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def shift(self) -> int:
        return self.arity - 1

    def __call__(self, args: Sequence[TorusElement], p: DeformationPoint) -> TorusElement:
        args = tuple(args)
        if len(args) != self.arity:
            raise ValueError(f"{self.label} takes {self.arity} arguments, got {len(args)}")
        return self.evaluator(args, p)

    def on_monomials(self, keys: tuple[MultiIndex, ...], p: DeformationPoint) -> Terms:
        """D(u^{a1}, ..., u^{ak}) as a coefficient map; memoized per (keys, p)."""
        ck = (keys, p)
        hit = self._cache.get(ck)
        if hit is not None:
            return hit
        val = self.evaluator(tuple(TorusElement.monomial(a) for a in keys), p)._terms
        if len(self._cache) >= _CACHE_LIMIT:
            self._cache.clear()
        self._cache[ck] = val
        return val

    # linear structure over C (same arity)
    def _lin(self, other: "MultiDiff", a: complex, b: complex, label: str) -> "MultiDiff":
        if self.arity != other.arity:
            raise ValueError("cannot add cochains of different arity")
        if self.n != other.n:
            raise DimensionError("dimension mismatch")
        f, g = self.evaluator, other.evaluator

        def ev(args, p):
            return f(args, p) * a + g(args, p) * b

        return MultiDiff(
            self.arity,
            ev,
            self.n,
            label,
            is_derivation=self.is_derivation and other.is_derivation,
            normalized=self.normalized and other.normalized,
        )

    def __add__(self, other):
        return self._lin(other, 1.0, 1.0, f"({self.label} + {other.label})")

    def __sub__(self, other):
        return self._lin(other, 1.0, -1.0, f"({self.label} - {other.label})")

    def __mul__(self, s):
        s = complex(s)
        f = self.evaluator
        return MultiDiff(
            self.arity,
            lambda args, p: f(args, p) * s,
            self.n,
            f"{_fmt_scalar(s)}*{self.label}",
            is_derivation=self.is_derivation,
            normalized=self.normalized,
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __repr__(self):
        return f"MultiDiff({self.label}, arity={self.arity})"


def zero_cochain(arity: int, n: int) -> MultiDiff:
    return MultiDiff(arity, lambda args, p: TorusElement.zero(n), n, "0", is_derivation=arity == 1)


def derivation(j: int, n: int) -> MultiDiff:
    """The canonical derivation delta_j (1-based)."""
    if not 1 <= j <= n:
        raise ValueError(f"axis {j} out of range 1..{n}")
    d = MultiDiff(1, lambda args, p: delta(j, args[0]), n, f"delta{j}", is_derivation=True)
    i = j - 1

    # fast monomial path: delta_j u^a = a_j u^a
    def on_mono(keys, p, _i=i):
        a = keys[0]
        return {a: complex(a[_i])} if a[_i] else {}

    d.on_monomials = on_mono  # type: ignore[method-assign]
    return d


def derivations(n: int) -> list[MultiDiff]:
    """Basis delta_1 ... delta_n of the abelian Lie algebra g."""
    return [derivation(j, n) for j in range(1, n + 1)]


def multiplication(n: int) -> MultiDiff:
    """The product m as a (non-normalized) 2-cochain."""
    return MultiDiff(2, lambda args, p: mul(args[0], args[1], p), n, "m", normalized=False)


def compose(X: MultiDiff, Y: MultiDiff) -> MultiDiff:
    """Operator composition X o Y of two 1-cochains (X^2 when Y is X)."""
    if X.arity != 1 or Y.arity != 1:
        raise ValueError("compose needs 1-cochains")
    return MultiDiff(1, lambda args, p: X((Y(args, p),), p), X.n, f"{X.label}{Y.label}")


def cup(D: MultiDiff, E: MultiDiff) -> MultiDiff:
    """(D cup E)(a_1..a_{k+l}) = D(a_1..a_k) E(a_{k+1}..a_{k+l})."""
    if D.n != E.n:
        raise DimensionError("dimension mismatch")
    k, l = D.arity, E.arity

    def ev(args, p):
        return mul(D(args[:k], p), E(args[k:], p), p)

    return MultiDiff(k + l, ev, D.n, f"({D.label} u {E.label})", normalized=D.normalized and E.normalized)


def circ(D: MultiDiff, E: MultiDiff) -> MultiDiff:
    """Gerstenhaber pre-Lie composition D o E; |D o E| = |D| + |E|."""
    if D.n != E.n:
        raise DimensionError("dimension mismatch")
    dD, dE = D.shift, E.shift
    arity = dD + dE + 1
    if arity < 0 or D.arity == 0:
        return zero_cochain(max(arity, 0), D.n)

    def ev(args, p):
        acc = TorusElement.zero(D.n)
        for i in range(dD + 1):
            inner = E(args[i : i + dE + 1], p)
            if inner.is_zero():
                continue
            val = D(args[:i] + (inner,) + args[i + dE + 1 :], p)
            acc = acc + (val if (i * dE) % 2 == 0 else -val)
        return acc

    return MultiDiff(arity, ev, D.n, f"({D.label} o {E.label})", normalized=D.normalized and E.normalized)


def bracket(D: MultiDiff, E: MultiDiff) -> MultiDiff:
    """Gerstenhaber bracket [D, E] = D o E - (-1)^{|D||E|} E o D."""
    sign = -1.0 if (D.shift * E.shift) % 2 else 1.0
    DE, ED = circ(D, E), circ(E, D)
    out = DE._lin(ED, 1.0, -sign, f"[{D.label}, {E.label}]")
    out.is_derivation = D.arity == 1 and E.arity == 1 and D.is_derivation and E.is_derivation
    return out


def hochschild_delta(D: MultiDiff, p: DeformationPoint | None = None) -> MultiDiff:
    """Hochschild coboundary; the products inside are taken at evaluation time."""
    k = D.arity

    def ev(args, q):
        first = D(args[:k], q)
        acc = mul(first, args[k], q) if not first.is_zero() else TorusElement.zero(D.n)
        last = D(args[1:], q)
        if not last.is_zero():
            term = mul(args[0], last, q)
            acc = acc + (term if (k + 1) % 2 == 0 else -term)
        for j in range(1, k + 1):
            merged = mul(args[j - 1], args[j], q)
            val = D(args[: j - 1] + (merged,) + args[j + 1 :], q)
            acc = acc + (val if (k - j + 1) % 2 == 0 else -val)
        return acc

    return MultiDiff(k + 1, ev, D.n, f"d({D.label})", normalized=D.normalized)


def E_cocycle(theta: SkewMatrix) -> MultiDiff:
    """E = 2 pi i sum_{j>k} theta_jk delta_j cup delta_k."""
    n = theta.n
    pairs = list(theta.lower_pairs())

    def ev(args, p):
        x, y = args
        acc = TorusElement.zero(n)
        for j, k, th in pairs:
            dx = delta(j, x)
            if dx.is_zero():
                continue
            acc = acc + mul(dx, delta(k, y), p) * (1j * TWO_PI * th)
        return acc

    return MultiDiff(2, ev, n, "E")


# -- spot checks of the MultiDiff invariants --------------------------------


def _rand_element(rng: random.Random, n: int, support: int = 3, bound: int = 2) -> TorusElement:
    terms = {}
    for _ in range(support):
        a = tuple(rng.randint(-bound, bound) for _ in range(n))
        terms[a] = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
    return TorusElement(n, terms)


def spot_check(D: MultiDiff, p: DeformationPoint, samples: int = 10, seed: int = 0) -> dict[str, float]:
    """Max residuals of multilinearity, normalization and (if flagged) Leibniz."""
    rng = random.Random(seed)
    n, k = D.n, D.arity
    res = {"multilinear": 0.0, "normalized": 0.0, "leibniz": 0.0}
    for _ in range(samples):
        args = [_rand_element(rng, n) for _ in range(k)]
        if k:
            i = rng.randrange(k)
            extra = _rand_element(rng, n)
            s = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
            mixed = list(args)
            mixed[i] = args[i] + extra * s
            other = list(args)
            other[i] = extra
            lhs = D(mixed, p)
            rhs = D(args, p) + D(other, p) * s
            res["multilinear"] = max(res["multilinear"], (lhs - rhs).norm_inf())
            if D.normalized:
                with_one = list(args)
                with_one[i] = TorusElement.one(n)
                res["normalized"] = max(res["normalized"], D(with_one, p).norm_inf())
        if D.is_derivation:
            x, y = _rand_element(rng, n), _rand_element(rng, n)
            lhs = D((mul(x, y, p),), p)
            rhs = mul(D((x,), p), y, p) + mul(x, D((y,), p), p)
            res["leibniz"] = max(res["leibniz"], (lhs - rhs).norm_inf())
    return res


# -- operators on chains -------------------------------------------------------


def _times(p: DeformationPoint, left: Terms, right: Terms) -> dict[MultiIndex, complex]:
    out: dict[MultiIndex, complex] = {}
    for a, ca in left.items():
        for b, cb in right.items():
            key, f = monomial_product(p, a, b)
            out[key] = out.get(key, 0j) + ca * cb * f
    return {k: v for k, v in out.items() if v != 0}


def _require_normalized(D: MultiDiff, allow_m: bool = False):
    if not D.normalized and not allow_m:
        raise NormalizationError(f"{D.label} is not a normalized cochain")


def _lift(c: AnyChain) -> PeriodicChain:
    return PeriodicChain.of(c) if isinstance(c, Chain) else c


def _result(c: AnyChain, fn, parity: int, shift: int, homogeneous: bool):
    if isinstance(c, Chain) and homogeneous:
        return apply_terms(c, fn, parity, shift=shift)
    return apply_terms(_lift(c), fn, parity, cap_shift=max(shift, 0))


def lie_derivative(D: MultiDiff, c: AnyChain, p: DeformationPoint) -> AnyChain:
    """L_D, with the cyclic second sum placing a_0 inside D.

    L_D(a_0..a_n) = sum_{i=1}^{n-d} (-1)^{d(i-1)} (a_0, .., D(a_i..a_{i+d}), .., a_n)
                  + sum_{j=0}^{d} (-1)^{d+nj} (D(a_{n-j+1}..a_n, a_0..a_{d-j}), a_{d-j+1}, .., a_{n-j})
    with d = |D| = k - 1. L_m = -b.
    """
    _require_normalized(D, allow_m=True)
    if D.arity < 1:
        raise ValueError("Lie derivative needs arity >= 1")
    d = D.shift

    def fn(key: Key, coeff: complex, out: dict):
        n = len(key) - 1
        if n < d:
            return
        for i in range(1, n - d + 1):
            val = D.on_monomials(key[i : i + d + 1], p)
            if not val:
                continue
            s = -coeff if (d * (i - 1)) % 2 else coeff
            emit(out, s, [mono(a) for a in key[:i]] + [val] + [mono(a) for a in key[i + d + 1 :]])
        for j in range(d + 1):
            args = key[n - j + 1 :] + key[: d - j + 1]
            val = D.on_monomials(args, p)
            if not val:
                continue
            s = -coeff if (d + n * j) % 2 else coeff
            emit(out, s, [val] + [mono(a) for a in key[d - j + 1 : n - j + 1]])

    return _result(c, fn, (1 - D.arity) % 2, -d, True)


def contract_iota(D: MultiDiff, c: AnyChain, p: DeformationPoint) -> AnyChain:
    """iota_D(a_0..a_n) = (a_0 D(a_1..a_k), a_{k+1}, .., a_n)."""
    _require_normalized(D)
    k = D.arity
    if isinstance(c, Chain) and c.degree < k:
        raise ValueError(f"iota_{D.label} needs degree >= {k}, got {c.degree}")

    def fn(key: Key, coeff: complex, out: dict):
        if len(key) - 1 < k:
            return
        val = D.on_monomials(key[1 : k + 1], p)
        if not val:
            return
        head = _times(p, mono(key[0]), val)
        emit(out, coeff, [head] + [mono(a) for a in key[k + 1 :]])

    return _result(c, fn, k % 2, -k, True)


def contract_S(D: MultiDiff, c: AnyChain, p: DeformationPoint) -> AnyChain:
    """S_D: cyclic insertions of D to the right of a_0, after a leading 1.

    S_D(a_0..a_n) = sum_{j=1}^{n-k+1} sum_{i=0}^{n-k+1-j} (-1)^{(k-1)(j-1) + (n+k-1)i}
        (1, a_{n-i+1}..a_n, a_0..a_{j-1}, D(a_j..a_{j+k-1}), a_{j+k}..a_{n-i})
    """
    _require_normalized(D)
    k = D.arity

    def fn(key: Key, coeff: complex, out: dict):
        n = len(key) - 1
        zero = (0,) * len(key[0])
        for j in range(1, n - k + 2):
            val = D.on_monomials(key[j : j + k], p)
            if not val:
                continue
            for i in range(0, n - k + 2 - j):
                s = -coeff if ((k - 1) * (j - 1) + (n + k - 1) * i) % 2 else coeff
                factors = (
                    [mono(zero)]
                    + [mono(a) for a in key[n - i + 1 :]]
                    + [mono(a) for a in key[:j]]
                    + [val]
                    + [mono(a) for a in key[j + k : n - i + 1]]
                )
                emit(out, s, factors)

    return _result(c, fn, k % 2, 2 - k, True)


def cyclic_contraction(D: MultiDiff, c: AnyChain, p: DeformationPoint) -> PeriodicChain:
    """I_D = iota_D + S_D (always returned as a PeriodicChain)."""
    pc = _lift(c)
    return contract_iota(D, pc, p) + contract_S(D, pc, p)


def _require_derivation(*Xs: MultiDiff):
    for X in Xs:
        if not (X.arity == 1 and X.is_derivation):
            raise ValueError(f"{X.label} is not a derivation")


def lie_pair(X: MultiDiff, Y: MultiDiff, c: AnyChain, p: DeformationPoint) -> AnyChain:
    """L{X,Y}(a_0..a_n) = sum_{1<=i<j<=n} (.. X(a_i) .. Y(a_j) ..) + sum_{i>=1} (Y(a_0), .., X(a_i), ..)."""
    _require_derivation(X, Y)

    def fn(key: Key, coeff: complex, out: dict):
        n = len(key) - 1
        base = [mono(a) for a in key]
        xs = [X.on_monomials((a,), p) for a in key]
        ys = [Y.on_monomials((a,), p) for a in key]
        for i in range(1, n):
            if not xs[i]:
                continue
            for j in range(i + 1, n + 1):
                if not ys[j]:
                    continue
                f = list(base)
                f[i], f[j] = xs[i], ys[j]
                emit(out, coeff, f)
        if ys[0]:
            for i in range(1, n + 1):
                if not xs[i]:
                    continue
                f = list(base)
                f[0], f[i] = ys[0], xs[i]
                emit(out, coeff, f)

    return _result(c, fn, 0, 0, True)


def lie_pair_invariant(X: MultiDiff, Y: MultiDiff, c: AnyChain, p: DeformationPoint) -> AnyChain:
    """The form of L{X,Y} valid on g-invariant chains: sum over 0 <= i < j <= n."""
    _require_derivation(X, Y)

    def fn(key: Key, coeff: complex, out: dict):
        n = len(key) - 1
        base = [mono(a) for a in key]
        xs = [X.on_monomials((a,), p) for a in key]
        ys = [Y.on_monomials((a,), p) for a in key]
        for i in range(0, n):
            if not xs[i]:
                continue
            for j in range(i + 1, n + 1):
                if not ys[j]:
                    continue
                f = list(base)
                f[i], f[j] = xs[i], ys[j]
                emit(out, coeff, f)

    return _result(c, fn, 0, 0, True)


def contract_pair(X: MultiDiff, Y: MultiDiff, c: AnyChain, p: DeformationPoint) -> AnyChain:
    """I{X,Y}(a_0..a_n) = sum_{1<=i<j<=n} sum_{m=0}^{n-j} (-1)^{nm}
    (1, a_{n-m+1}..a_n, a_0, .., X(a_i), .., Y(a_j), .., a_{n-m})."""
    _require_derivation(X, Y)

    def fn(key: Key, coeff: complex, out: dict):
        n = len(key) - 1
        zero = (0,) * len(key[0])
        base = [mono(a) for a in key]
        xs = [X.on_monomials((a,), p) for a in key]
        ys = [Y.on_monomials((a,), p) for a in key]
        for i in range(1, n):
            if not xs[i]:
                continue
            for j in range(i + 1, n + 1):
                if not ys[j]:
                    continue
                body = list(base)
                body[i], body[j] = xs[i], ys[j]
                for m in range(0, n - j + 1):
                    s = -coeff if (n * m) % 2 else coeff
                    emit(out, s, [mono(zero)] + body[n - m + 1 :] + body[: n - m + 1])

    return _result(c, fn, 1, 1, True)


# -- operator algebra for identity checks -----------------------------------


@dataclass(frozen=True)
class Op:
    """A Z/2-graded operator on periodic chains."""

    fn: Callable[[PeriodicChain], PeriodicChain]
    parity: int
    label: str = "op"

    def __call__(self, c: AnyChain) -> PeriodicChain:
        return self.fn(_lift(c))

    def __matmul__(self, other: "Op") -> "Op":
        return Op(lambda c: self.fn(_lift(other.fn(c))), (self.parity + other.parity) % 2, f"{self.label}{other.label}")

    def _combine(self, other: "Op", s: float) -> "Op":
        if self.parity != other.parity:
            raise ValueError(f"cannot add operators of different parity: {self.label}, {other.label}")
        return Op(lambda c: self.fn(c) + other.fn(c) * s, self.parity, f"({self.label}{'+' if s > 0 else '-'}{other.label})")

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, s):
        return Op(lambda c: self.fn(c) * s, self.parity, f"{s}{self.label}")

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


def commutator(S: Op, T: Op) -> Op:
    """Graded commutator [S, T] = ST - (-1)^{|S||T|} TS."""
    sign = -1.0 if S.parity * T.parity % 2 else 1.0
    ST, TS = S @ T, T @ S
    return Op(lambda c: ST.fn(c) - TS.fn(c) * sign, (S.parity + T.parity) % 2, f"[{S.label},{T.label}]")


def op_b(p: DeformationPoint) -> Op:
    return Op(lambda c: boundary_b(c, p), 1, "b")


def op_B() -> Op:
    return Op(connes_B, 1, "B")


def op_bB(p: DeformationPoint) -> Op:
    return Op(lambda c: boundary_b(c, p) + connes_B(c), 1, "(b+B)")


def op_L(D: MultiDiff, p: DeformationPoint) -> Op:
    return Op(lambda c: lie_derivative(D, c, p), (1 - D.arity) % 2, f"L[{D.label}]")


def op_iota(D: MultiDiff, p: DeformationPoint) -> Op:
    return Op(lambda c: contract_iota(D, c, p), D.arity % 2, f"i[{D.label}]")


def op_S(D: MultiDiff, p: DeformationPoint) -> Op:
    return Op(lambda c: contract_S(D, c, p), D.arity % 2, f"S[{D.label}]")


def op_I(D: MultiDiff, p: DeformationPoint) -> Op:
    return Op(lambda c: cyclic_contraction(D, c, p), D.arity % 2, f"I[{D.label}]")


def op_Lpair(X: MultiDiff, Y: MultiDiff, p: DeformationPoint) -> Op:
    return Op(lambda c: lie_pair(X, Y, c, p), 0, f"L{{{X.label},{Y.label}}}")


def op_Ipair(X: MultiDiff, Y: MultiDiff, p: DeformationPoint) -> Op:
    return Op(lambda c: contract_pair(X, Y, c, p), 1, f"I{{{X.label},{Y.label}}}")


def op_zero(parity: int) -> Op:
    return Op(lambda c: c * 0.0, parity, "0")


# -- registry -------------------------------------------------------------------


def parse_cochain(expr: str, n: int, theta: SkewMatrix | None = None) -> MultiDiff:
    """Parse a prefix expression for a cochain.

    Grammar::

        expr := "delta:" INT | "E" | "E:(theta)" | "m"
              | "cup:(" expr "," expr ")" | "bracket:(" expr "," expr ")"
              | "circ:(" expr "," expr ")" | "d:(" expr ")"
    """
    expr = expr.strip()
    if expr.startswith("delta:"):
        return derivation(int(expr[6:]), n)
    if expr in ("E", "E:(theta)"):
        if theta is None:
            raise ValueError("E needs theta")
        return E_cocycle(theta)
    if expr.startswith("E:(") and expr.endswith(")"):
        if n != 2:
            raise ValueError("E:(value) sets theta_21 and needs n = 2")
        return E_cocycle(SkewMatrix.two(float(expr[3:-1])))
    if expr == "m":
        return multiplication(n)
    for name, fn in (("cup", cup), ("bracket", bracket), ("circ", circ)):
        if expr.startswith(name + ":(") and expr.endswith(")"):
            left, right = _split_args(expr[len(name) + 2 : -1])
            return fn(parse_cochain(left, n, theta), parse_cochain(right, n, theta))
    if expr.startswith("d:(") and expr.endswith(")"):
        return hochschild_delta(parse_cochain(expr[3:-1], n, theta))
    raise ValueError(f"cannot parse cochain expression {expr!r}")


def _split_args(s: str) -> tuple[str, str]:
    depth = 0
    for i, ch in enumerate(s):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            return s[:i], s[i + 1 :]
    raise ValueError(f"expected two comma-separated arguments in {s!r}")
