"""Normalized Hochschild chains over the torus on the monomial basis.

A degree-m chain is a sparse combination of tensors
``u^{a0} (x) u^{a1} (x) ... (x) u^{am}``, keyed by the tuple of
multi-indices. A tensor with an interior factor equal to 1 (index 0 in
any slot past the first) is degenerate and never stored.
"""
from __future__ import annotations

import itertools
import math
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

from .torus import (
    DeformationPoint,
    DimensionError,
    MatrixElement,
    MultiIndex,
    TorusElement,
    idempotent_defect,
    invert,
    monomial_product,
)

Key = tuple[MultiIndex, ...]


def is_degenerate(key: Key) -> bool:
    zero = (0,) * len(key[0])
    return zero in key[1:]


def _finish(acc: Mapping[Key, complex]) -> dict[Key, complex]:
    return {k: acc[k] for k in sorted(acc) if acc[k] != 0 and not is_degenerate(k)}


class Chain:
    """Homogeneous normalized chain of a fixed degree."""

    __slots__ = ("n", "degree", "_terms")

    def __init__(self, n: int, degree: int, terms: Mapping[Sequence[Sequence[int]], complex] | None = None):
        if degree < 0:
            raise ValueError("degree must be >= 0")
        self.n = int(n)
        self.degree = int(degree)
        acc: dict[Key, complex] = {}
        for factors, c in (terms or {}).items():
            key = tuple(tuple(int(v) for v in a) for a in factors)
            if len(key) != degree + 1:
                raise ValueError(f"term {key} has {len(key)} factors, expected {degree + 1}")
            if any(len(a) != self.n for a in key):
                raise DimensionError(f"term {key} has wrong index length")
            acc[key] = acc.get(key, 0j) + complex(c)
        self._terms = _finish(acc)

    @classmethod
    def _trusted(cls, n: int, degree: int, acc: Mapping[Key, complex]) -> "Chain":
        obj = cls.__new__(cls)
        obj.n = n
        obj.degree = degree
        obj._terms = _finish(acc)
        return obj

    @classmethod
    def zero(cls, n: int, degree: int) -> "Chain":
        return cls._trusted(n, degree, {})

    @classmethod
    def basis(cls, factors: Sequence[Sequence[int]], coeff: complex = 1.0) -> "Chain":
        key = tuple(tuple(int(v) for v in a) for a in factors)
        return cls._trusted(len(key[0]), len(key) - 1, {key: complex(coeff)})

    @property
    def terms(self) -> Mapping[Key, complex]:
        return MappingProxyType(self._terms)

    def __iter__(self):
        return iter(self._terms.items())

    def __len__(self):
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def max_abs(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def _check(self, other: "Chain"):
        if not isinstance(other, Chain):
            raise TypeError("expected a Chain")
        if self.n != other.n or self.degree != other.degree:
            raise DimensionError(
                f"chain mismatch: (n={self.n}, deg={self.degree}) vs (n={other.n}, deg={other.degree})"
            )

    def __add__(self, other: "Chain") -> "Chain":
        self._check(other)
        acc = dict(self._terms)
        for k, v in other._terms.items():
            acc[k] = acc.get(k, 0j) + v
        return Chain._trusted(self.n, self.degree, acc)

    def __neg__(self) -> "Chain":
        return Chain._trusted(self.n, self.degree, {k: -v for k, v in self._terms.items()})

    def __sub__(self, other: "Chain") -> "Chain":
        return self + (-other)

    def __mul__(self, s) -> "Chain":
        s = complex(s)
        return Chain._trusted(self.n, self.degree, {k: v * s for k, v in self._terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        return (
            isinstance(other, Chain)
            and (self.n, self.degree) == (other.n, other.degree)
            and self._terms == other._terms
        )

    def __repr__(self):
        return f"Chain(n={self.n}, degree={self.degree}, terms={len(self._terms)})"

    def map_coeffs(self, f: Callable[[Key, complex], complex]) -> "Chain":
        return Chain._trusted(self.n, self.degree, {k: f(k, v) for k, v in self._terms.items()})

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "degree": self.degree,
            "terms": [
                {"factors": [list(a) for a in k], "re": c.real, "im": c.imag} for k, c in self._terms.items()
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Chain":
        n, degree = int(data["n"]), int(data["degree"])
        terms: dict = {}
        for t in data["terms"]:
            key = tuple(tuple(int(v) for v in a) for a in t["factors"])
            if key in terms:
                raise ValueError(f"duplicate factor tuple {key}")
            terms[key] = complex(float(t["re"]), float(t.get("im", 0.0)))
        return cls(n, degree, terms)


class PeriodicChain:
    """Components of one parity, keyed by degree, up to ``cap``."""

    __slots__ = ("n", "parity", "cap", "components")

    def __init__(self, n: int, parity: int, components: Mapping[int, Chain] | Iterable[Chain] = (), cap: int = 6):
        self.n = int(n)
        self.parity = int(parity) % 2
        self.cap = int(cap)
        comps = components.values() if isinstance(components, Mapping) else components
        out: dict[int, Chain] = {}
        for c in comps:
            if c.n != self.n:
                raise DimensionError("component dimension mismatch")
            if c.degree % 2 != self.parity:
                raise ValueError(f"degree {c.degree} does not have parity {self.parity}")
            if c.degree > self.cap:
                raise ValueError(f"degree {c.degree} exceeds cap {self.cap}")
            out[c.degree] = out[c.degree] + c if c.degree in out else c
        self.components = {d: out[d] for d in sorted(out) if not out[d].is_zero()}

    @classmethod
    def of(cls, c: Chain, cap: int | None = None) -> "PeriodicChain":
        return cls(c.n, c.degree % 2, [c], cap=max(c.degree, cap if cap is not None else c.degree))

    def component(self, degree: int) -> Chain:
        return self.components.get(degree, Chain.zero(self.n, degree))

    def degrees(self) -> list[int]:
        return list(self.components)

    def is_zero(self) -> bool:
        return not self.components

    def max_abs(self) -> float:
        return max((c.max_abs() for c in self.components.values()), default=0.0)

    def term_count(self) -> int:
        return sum(len(c) for c in self.components.values())

    def _combine(self, other: "PeriodicChain", sign: float) -> "PeriodicChain":
        if not isinstance(other, PeriodicChain):
            raise TypeError("expected a PeriodicChain")
        if self.n != other.n:
            raise DimensionError("dimension mismatch")
        if self.components and other.components and self.parity != other.parity:
            raise ValueError("parity mismatch")
        parity = self.parity if self.components else other.parity
        comps = dict(self.components)
        for d, c in other.components.items():
            c = c * sign
            comps[d] = comps[d] + c if d in comps else c
        return PeriodicChain(self.n, parity, comps, cap=max(self.cap, other.cap))

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, s):
        return PeriodicChain(self.n, self.parity, [c * s for c in self.components.values()], cap=self.cap)

    __rmul__ = __mul__

    def truncate(self, cap: int) -> "PeriodicChain":
        return PeriodicChain(
            self.n, self.parity, [c for d, c in self.components.items() if d <= cap], cap=cap
        )

    def __repr__(self):
        degs = {d: len(c) for d, c in self.components.items()}
        return f"PeriodicChain(n={self.n}, parity={self.parity}, cap={self.cap}, terms={degs})"

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "parity": "even" if self.parity == 0 else "odd",
            "cap": self.cap,
            "components": {str(d): c.to_json() for d, c in self.components.items()},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "PeriodicChain":
        parity = {"even": 0, "odd": 1}[data["parity"]]
        comps = [Chain.from_json(v) for v in data["components"].values()]
        return cls(int(data["n"]), parity, comps, cap=int(data["cap"]))


AnyChain = Chain | PeriodicChain


def chain_scale(c: AnyChain) -> float:
    """Residual scale: (1 + max coefficient) * max(1, term count)."""
    if isinstance(c, Chain):
        return (1.0 + c.max_abs()) * max(1, len(c))
    return (1.0 + c.max_abs()) * max(1, c.term_count())


def residual(c: AnyChain) -> float:
    return c.max_abs()


# -- operator plumbing -------------------------------------------------------

TermFn = Callable[[Key, complex, dict], None]


def apply_terms(c: AnyChain, fn: TermFn, parity: int, shift: int | None = None, cap_shift: int = 0) -> AnyChain:
    """Apply a term-wise operator of the given parity.

    ``fn(key, coeff, out)`` accumulates into ``out[degree][key]``. For a
    Chain input with a fixed degree ``shift`` a Chain is returned; otherwise
    a PeriodicChain.
    """
    out: dict[int, dict[Key, complex]] = {}
    items = c.components.values() if isinstance(c, PeriodicChain) else (c,)
    for comp in items:
        for key, coeff in comp._terms.items():
            fn(key, coeff, out)
    n = c.n
    if isinstance(c, Chain) and shift is not None:
        deg = c.degree + shift
        if deg < 0:
            return Chain.zero(n, 0)
        acc = out.get(deg, {})
        stray = [d for d in out if d != deg and out[d]]
        if stray:
            raise RuntimeError(f"operator produced unexpected degrees {stray}")
        return Chain._trusted(n, deg, acc)
    in_parity = c.parity if isinstance(c, PeriodicChain) else c.degree % 2
    in_cap = c.cap if isinstance(c, PeriodicChain) else c.degree
    comps = [Chain._trusted(n, d, acc) for d, acc in out.items()]
    cap = max([in_cap + cap_shift] + [ch.degree for ch in comps])
    return PeriodicChain(n, (in_parity + parity) % 2, comps, cap=cap)


def _add(out: dict, key: Key, coeff: complex):
    d = out.setdefault(len(key) - 1, {})
    d[key] = d.get(key, 0j) + coeff


def emit(out: dict, coeff: complex, factors: Sequence[Mapping[MultiIndex, complex]]):
    """Multilinear expansion of ``coeff * f0 (x) f1 (x) ...`` into ``out``."""
    if coeff == 0:
        return
    zero = None
    for f in factors:
        if not f:
            return
    if all(len(f) == 1 for f in factors):
        key = []
        for f in factors:
            ((a, c),) = f.items()
            key.append(a)
            coeff = coeff * c
        key = tuple(key)
        zero = (0,) * len(key[0])
        if zero in key[1:] or coeff == 0:
            return
        _add(out, key, coeff)
        return
    deg = len(factors) - 1
    d = out.setdefault(deg, {})
    for combo in itertools.product(*(f.items() for f in factors)):
        key = tuple(a for a, _ in combo)
        if zero is None:
            zero = (0,) * len(key[0])
        if zero in key[1:]:
            continue
        c = coeff
        for _, v in combo:
            c *= v
        d[key] = d.get(key, 0j) + c


def mono(a: MultiIndex) -> dict[MultiIndex, complex]:
    return {a: 1.0 + 0j}


# -- embedding ----------------------------------------------------------------


def embed(elements: Sequence[TorusElement], coeff: complex = 1.0) -> Chain:
    """Multilinear expansion of ``x0 (x) ... (x) xm`` into the normalized basis."""
    if not elements:
        raise ValueError("need at least one factor")
    n = elements[0].n
    if any(e.n != n for e in elements):
        raise DimensionError("factors must share the torus dimension")
    out: dict = {}
    emit(out, complex(coeff), [e._terms for e in elements])
    deg = len(elements) - 1
    return Chain._trusted(n, deg, out.get(deg, {}))


# -- the differentials --------------------------------------------------------


def _b_term(p: DeformationPoint):
    def fn(key: Key, coeff: complex, out: dict):
        m = len(key) - 1
        if m == 0:
            return
        for j in range(m):
            prod, f = monomial_product(p, key[j], key[j + 1])
            new = key[:j] + (prod,) + key[j + 2 :]
            c = coeff * f
            _add_checked(out, new, -c if j % 2 else c)
        prod, f = monomial_product(p, key[m], key[0])
        new = (prod,) + key[1:m]
        c = coeff * f
        _add_checked(out, new, -c if m % 2 else c)

    return fn


def _add_checked(out: dict, key: Key, coeff: complex):
    zero = (0,) * len(key[0])
    if zero in key[1:]:
        return
    _add(out, key, coeff)


def boundary_b(c: AnyChain, p: DeformationPoint) -> AnyChain:
    """Hochschild boundary b at the deformation point p."""
    if c.n != p.n:
        raise DimensionError("chain and theta dimension differ")
    if isinstance(c, Chain):
        if c.degree == 0:
            raise ValueError("b is not defined on degree-0 chains")
        return apply_terms(c, _b_term(p), 1, shift=-1)
    return apply_terms(c, _b_term(p), 1, cap_shift=-1)


def _B_term(key: Key, coeff: complex, out: dict):
    m = len(key) - 1
    zero = (0,) * len(key[0])
    if zero in key:
        return
    for j in range(m + 1):
        new = (zero,) + key[j:] + key[:j]
        _add(out, new, -coeff if (j * m) % 2 else coeff)


def connes_B(c: AnyChain) -> AnyChain:
    """Connes' operator B: C_m -> C_{m+1}."""
    if isinstance(c, Chain):
        return apply_terms(c, _B_term, 1, shift=1)
    return apply_terms(c, _B_term, 1, cap_shift=1)


def b_plus_B(c: PeriodicChain, p: DeformationPoint) -> PeriodicChain:
    if isinstance(c, Chain):
        c = PeriodicChain.of(c)
    return boundary_b(c, p) + connes_B(c)


# -- generalized trace and Chern characters -----------------------------------


def generalized_trace(
    factors: Sequence[MatrixElement], p: DeformationPoint | None = None, coeff: complex = 1.0
) -> Chain:
    """T(X0 (x) ... (x) Xm) = sum over index cycles X0[i0,i1] (x) X1[i1,i2] (x) ... (x) Xm[im,i0]."""
    if not factors:
        raise ValueError("need at least one factor")
    N, n = factors[0].size, factors[0].n
    for X in factors:
        if X.size != N:
            raise ValueError(f"size mismatch: {X.size} vs {N}")
        if X.n != n:
            raise DimensionError("dimension mismatch")
    m = len(factors) - 1
    out: dict = {}

    def walk(pos: int, start: int, cur: int, picked: list):
        X = factors[pos]
        if pos == m:
            e = X.entries[cur][start]
            if e._terms:
                emit(out, coeff, picked + [e._terms])
            return
        for nxt in range(N):
            e = X.entries[cur][nxt]
            if e._terms:
                walk(pos + 1, start, nxt, picked + [e._terms])

    for i0 in range(N):
        walk(0, i0, i0, [])
    return Chain._trusted(n, m, out.get(m, {}))


def ch_idempotent(
    P: MatrixElement, p: DeformationPoint, cap: int = 6, tol: float = 1e-9
) -> PeriodicChain:
    """Even Chern character of an idempotent, pushed to A by the generalized trace.

    (ch P)_0 = T(P); (ch P)_{2k} = (-1)^k (2k)!/k! T((P - 1/2) (x) P^{(x)2k}).
    """
    defect = idempotent_defect(P, p)
    if defect > tol * max(1.0, P.norm_inf()):
        raise ValueError(f"not an idempotent: |P^2 - P| = {defect:.3e}")
    eye = MatrixElement.identity(P.size, P.n)
    comps = [generalized_trace([P])]
    for k in range(1, cap // 2 + 1):
        c = (-1) ** k * math.factorial(2 * k) / math.factorial(k)
        comps.append(
            generalized_trace([P] * (2 * k + 1), coeff=c)
            + generalized_trace([eye] + [P] * (2 * k), coeff=-0.5 * c)
        )
    return PeriodicChain(P.n, 0, comps, cap=cap)


def ch_invertible(
    U: MatrixElement, p: DeformationPoint, cap: int = 5, inverse: MatrixElement | None = None
) -> PeriodicChain:
    """Odd Chern character: (ch U)_{2k+1} = (-1)^k k! T(U^-1 (x) U (x) ... (x) U^-1 (x) U)."""
    if inverse is None:
        try:
            inverse = invert(U, p)
        except ValueError as exc:
            raise ValueError(f"no exact inverse available: {exc}") from None
    comps = []
    for k in range(0, (cap - 1) // 2 + 1):
        c = (-1) ** k * math.factorial(k)
        comps.append(generalized_trace([inverse, U] * (k + 1), coeff=c))
    return PeriodicChain(U.n, 1, comps, cap=max(cap, 1))
