"""Scalar cochains on the torus: dual differentials, the characteristic map
gamma, the psi correction of the rotation lemma, and the canonical pairing.

A :class:`Functional` is driven by its values on monomial tuples; general
arguments are expanded multilinearly.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .chains import AnyChain, Chain, Key, PeriodicChain
from .cochains import MultiDiff, derivation
from .torus import (
    TWO_PI,
    DeformationPoint,
    DimensionError,
    MultiIndex,
    TorusElement,
    monomial_product,
)

MonoEval = Callable[[Key, DeformationPoint], complex]

_CACHE_LIMIT = 200_000


class ParityError(ValueError):
    """Functional and chain live in different parities."""


@dataclass(eq=False)
class Functional:
    """Multilinear map A^{m+1} -> C, stored through its monomial values."""

    degree: int
    mono_eval: MonoEval
    n: int
    label: str = "phi"
    is_cyclic: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_evaluator(
        cls, degree: int, evaluator: Callable[[tuple[TorusElement, ...], DeformationPoint], complex], n: int, **kw
    ) -> "Functional":
        def mono_eval(keys, p):
            return complex(evaluator(tuple(TorusElement.monomial(a) for a in keys), p))

        return cls(degree, mono_eval, n, **kw)

    def on_monomials(self, keys: Key, p: DeformationPoint) -> complex:
        ck = (keys, p)
        hit = self._cache.get(ck)
        if hit is not None:
            return hit
        val = complex(self.mono_eval(keys, p))
        if len(self._cache) >= _CACHE_LIMIT:
            self._cache.clear()
        self._cache[ck] = val
        return val

    def __call__(self, args: Sequence[TorusElement], p: DeformationPoint) -> complex:
        args = tuple(args)
        if len(args) != self.degree + 1:
            raise ValueError(f"{self.label} takes {self.degree + 1} arguments, got {len(args)}")
        total = 0j
        for combo in itertools.product(*(a._terms.items() for a in args)):
            coeff = 1.0 + 0j
            for _, c in combo:
                coeff *= c
            total += coeff * self.on_monomials(tuple(k for k, _ in combo), p)
        return total

    def _lin(self, other: "Functional", a: complex, b: complex, label: str) -> "Functional":
        if self.degree != other.degree:
            raise ValueError("cannot add functionals of different degree")
        f, g = self.on_monomials, other.on_monomials
        return Functional(
            self.degree, lambda k, p: a * f(k, p) + b * g(k, p), self.n, label, self.is_cyclic and other.is_cyclic
        )

    def __add__(self, other):
        return self._lin(other, 1.0, 1.0, f"({self.label} + {other.label})")

    def __sub__(self, other):
        return self._lin(other, 1.0, -1.0, f"({self.label} - {other.label})")

    def __mul__(self, s):
        s = complex(s)
        f = self.on_monomials
        return Functional(self.degree, lambda k, p: s * f(k, p), self.n, f"{_fmt(s)}*{self.label}", self.is_cyclic)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __repr__(self):
        return f"Functional({self.label}, degree={self.degree})"


def _fmt(s: complex) -> str:
    return f"{s.real:g}" if s.imag == 0 else f"{s:g}"


def _word(keys: Sequence[MultiIndex], p: DeformationPoint) -> tuple[MultiIndex, complex]:
    """u^{a_0} u^{a_1} ... as (total index, phase)."""
    acc, f = keys[0], 1.0 + 0j
    for a in keys[1:]:
        acc, g = monomial_product(p, acc, a)
        f *= g
    return acc, f


def tau_word(keys: Sequence[MultiIndex], p: DeformationPoint) -> complex:
    """tau(u^{a_0} ... u^{a_m})."""
    total, f = _word(keys, p)
    return f if not any(total) else 0j


def trace_functional(n: int) -> Functional:
    """tau as a degree-0 cyclic functional."""
    return Functional(0, lambda k, p: 1.0 + 0j if not any(k[0]) else 0j, n, "tau", is_cyclic=True)


# -- dual differentials --------------------------------------------------------


def dual_b(phi: Functional, p: DeformationPoint | None = None) -> Functional:
    """(b phi)(a_0..a_{m+1}); products at ``p`` if given, else at the evaluation point."""
    m = phi.degree

    def ev(keys, q):
        q = p or q
        total = 0j
        for j in range(m + 1):
            prod, f = monomial_product(q, keys[j], keys[j + 1])
            v = phi.on_monomials(keys[:j] + (prod,) + keys[j + 2 :], q) * f
            total += -v if j % 2 else v
        prod, f = monomial_product(q, keys[m + 1], keys[0])
        v = phi.on_monomials((prod,) + keys[1 : m + 1], q) * f
        total += -v if (m + 1) % 2 else v
        return total

    return Functional(m + 1, ev, phi.n, f"b({phi.label})")


def dual_B(phi: Functional) -> Functional:
    """(B phi)(a_0..a_{m-1}) = sum_j (-1)^{j(m-1)} phi(1, a_j, .., a_{m-1}, a_0, .., a_{j-1})."""
    m = phi.degree
    if m < 1:
        raise ValueError("B is not defined on degree-0 functionals")

    def ev(keys, q):
        zero = (0,) * len(keys[0])
        total = 0j
        for j in range(m):
            v = phi.on_monomials((zero,) + keys[j:] + keys[:j], q)
            total += -v if (j * (m - 1)) % 2 else v
        return total

    return Functional(m - 1, ev, phi.n, f"B({phi.label})")


def dual_lie(X: MultiDiff, phi: Functional) -> Functional:
    """phi o L_X for a derivation X: sum_i phi(.., X(a_i), ..)."""
    if not X.is_derivation:
        raise ValueError(f"{X.label} is not a derivation")

    def ev(keys, q):
        total = 0j
        for i, a in enumerate(keys):
            for b, c in X.on_monomials((a,), q).items():
                total += c * phi.on_monomials(keys[:i] + (b,) + keys[i + 1 :], q)
        return total

    return Functional(phi.degree, ev, phi.n, f"{phi.label}.L[{X.label}]")


# -- characteristic map ----------------------------------------------------------


def _diag(X: MultiDiff, a: MultiIndex, p: DeformationPoint) -> complex | None:
    """Eigenvalue of X on u^a, or None if X is not diagonal there."""
    val = X.on_monomials((a,), p)
    if not val:
        return 0j
    if len(val) == 1 and a in val:
        return val[a]
    return None


def _perm_sign(perm: Sequence[int]) -> int:
    sign, seen = 1, [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def _trace_of_derivatives(Xs: Sequence[MultiDiff], keys: Key, p: DeformationPoint, skip_first: bool) -> complex:
    """tau(a_0 X_1(a_1) ... X_k(a_k)) when skip_first, else tau(X_1(a_0) ... X_k(a_{k-1}))."""
    offset = 1 if skip_first else 0
    eig = []
    for l, X in enumerate(Xs):
        e = _diag(X, keys[l + offset], p)
        if e is None:
            break
        eig.append(e)
    else:
        prod = 1.0 + 0j
        for e in eig:
            prod *= e
        return prod * tau_word(keys, p) if prod != 0 else 0j
    # general path: expand each derivative
    parts = [{keys[0]: 1.0 + 0j}] if skip_first else []
    parts += [X.on_monomials((keys[l + offset],), p) for l, X in enumerate(Xs)]
    total = 0j
    for combo in itertools.product(*(d.items() for d in parts)):
        c = 1.0 + 0j
        for _, v in combo:
            c *= v
        total += c * tau_word([k for k, _ in combo], p)
    return total


def gamma(Xs: Sequence[MultiDiff]) -> Functional:
    """gamma(X_1 ^ ... ^ X_k)(a_0..a_k) = (1/k!) sum_sigma sgn(sigma) tau(a_0 X_s1(a_1) ... X_sk(a_k))."""
    Xs = list(Xs)
    for X in Xs:
        if not (X.arity == 1 and X.is_derivation):
            raise ValueError(f"{X.label} is not a derivation")
    if not Xs:
        raise ValueError("gamma of the empty wedge is tau; use gamma_axes((), n)")
    n = Xs[0].n
    k = len(Xs)
    perms = [(pm, _perm_sign(pm)) for pm in itertools.permutations(range(k))]
    norm = 1.0 / math.factorial(k)

    def ev(keys, p):
        if any(sum(a[i] for a in keys) for i in range(len(keys[0]))):
            return 0j
        total = 0j
        for pm, s in perms:
            total += s * _trace_of_derivatives([Xs[i] for i in pm], keys, p, True)
        return total * norm

    label = "gamma(" + "^".join(X.label for X in Xs) + ")"
    return Functional(k, ev, n, label, is_cyclic=True)


def gamma_axes(axes: Sequence[int], n: int) -> Functional:
    """gamma(delta_{j1} ^ ... ^ delta_{jk}); the empty tuple gives tau."""
    if not axes:
        return trace_functional(n)
    return gamma([derivation(j, n) for j in axes])


def tau1(j: int, n: int) -> Functional:
    """Winding cocycle tau_1^j = gamma(delta_j)."""
    if not 1 <= j <= n:
        raise DimensionError(f"axis {j} out of range 1..{n}")
    f = gamma([derivation(j, n)])
    f.label = f"tau1:{j}"
    return f


def tau2(n: int = 2) -> Functional:
    """tau_2 = 4 pi i gamma(delta_1 ^ delta_2), defined for n = 2."""
    if n != 2:
        raise DimensionError("tau2 is defined for n = 2")
    f = gamma([derivation(1, 2), derivation(2, 2)]) * (2j * TWO_PI)
    f.label = "tau2"
    f.is_cyclic = True
    return f


# -- rotation lemma ----------------------------------------------------------------


def psi_correction(Xs: Sequence[MultiDiff]) -> Functional:
    """psi(a_0..a_{n-1}) = (1/n) sum_{j=1}^{n-1} (-1)^{(j-1)(n+1)} (n-j) tau(X_j(a_0) X_{j+1}(a_1) ... X_{j-1}(a_{n-1})).

    With it, tau(a_0 X_1(a_1)..X_n(a_n)) equals the rotation average plus b psi,
    and B psi = 0.
    """
    Xs = list(Xs)
    nX = len(Xs)
    if nX == 0:
        raise ValueError("need at least one derivation")
    n = Xs[0].n
    rotations = []
    for j in range(1, nX):
        order = Xs[j - 1 :] + Xs[: j - 1]
        coeff = (nX - j) / nX * (-1.0 if ((j - 1) * (nX + 1)) % 2 else 1.0)
        rotations.append((coeff, order))

    def ev(keys, p):
        if any(sum(a[i] for a in keys) for i in range(len(keys[0]))):
            return 0j
        return sum(c * _trace_of_derivatives(order, keys, p, False) for c, order in rotations)

    return Functional(nX - 1, ev, n, "psi(" + ",".join(X.label for X in Xs) + ")")


def rotation_average(Xs: Sequence[MultiDiff]) -> Functional:
    """(1/n) sum_j (-1)^{(j-1)(n+1)} tau(a_0 X_j(a_1) .. X_n(a_{n-j+1}) X_1(a_{n-j+2}) .. X_{j-1}(a_n))."""
    Xs = list(Xs)
    nX = len(Xs)
    n = Xs[0].n
    terms = []
    for j in range(1, nX + 1):
        terms.append(((-1.0 if ((j - 1) * (nX + 1)) % 2 else 1.0) / nX, Xs[j - 1 :] + Xs[: j - 1]))

    def ev(keys, p):
        return sum(c * _trace_of_derivatives(order, keys, p, True) for c, order in terms)

    return Functional(nX, ev, n, "rot-avg")


def trace_of_derivatives(Xs: Sequence[MultiDiff]) -> Functional:
    """(a_0..a_n) -> tau(a_0 X_1(a_1) ... X_n(a_n))."""
    Xs = list(Xs)
    return Functional(len(Xs), lambda k, p: _trace_of_derivatives(Xs, k, p, True), Xs[0].n, "tauX")


# -- contractions on functionals ------------------------------------------------------


def contract_dual(Z: MultiDiff, phi: Functional) -> Functional:
    """phi o iota_Z, the degree m+1 part of the transpose of I_Z."""
    if not Z.is_derivation:
        raise ValueError(f"{Z.label} is not a derivation")

    def ev(keys, p):
        total = 0j
        for b, c in Z.on_monomials((keys[1],), p).items():
            head, f = monomial_product(p, keys[0], b)
            total += c * f * phi.on_monomials((head,) + keys[2:], p)
        return total

    return Functional(phi.degree + 1, ev, phi.n, f"I[{Z.label}]*{phi.label}")


def contract_dual_S(Z: MultiDiff, phi: Functional) -> Functional:
    """phi o S_Z, the degree m-1 part of the transpose of I_Z."""
    if not Z.is_derivation:
        raise ValueError(f"{Z.label} is not a derivation")
    m = phi.degree
    if m < 1:
        raise ValueError("S-part of the contraction needs degree >= 1")

    def ev(keys, p):
        # keys has length m: a_0..a_{n} with n = m - 1
        n = len(keys) - 1
        zero = (0,) * len(keys[0])
        total = 0j
        for j in range(1, n + 1):
            val = Z.on_monomials((keys[j],), p)
            if not val:
                continue
            for i in range(0, n + 1 - j):
                s = -1.0 if (n * i) % 2 else 1.0
                for b, c in val.items():
                    args = (zero,) + keys[n - i + 1 :] + keys[:j] + (b,) + keys[j + 1 : n - i + 1]
                    total += s * c * phi.on_monomials(args, p)
        return total

    return Functional(m - 1, ev, phi.n, f"S[{Z.label}]*{phi.label}")


def gamma_contract_correction(Z: MultiDiff, Xs: Sequence[MultiDiff]) -> Functional:
    """psi with iota_Z gamma(X) = gamma(Z ^ X) + b psi, summed from the rotation lemma."""
    Xs = list(Xs)
    k = len(Xs)
    total = None
    for pm in itertools.permutations(range(k)):
        s = _perm_sign(pm) / math.factorial(k)
        term = psi_correction([Z] + [Xs[i] for i in pm]) * s
        total = term if total is None else total + term
    return total


# -- pairing ---------------------------------------------------------------------------


def pairing(
    phi: Functional | Sequence[Functional], omega: AnyChain, p: DeformationPoint
) -> complex:
    """<phi, omega>: each functional evaluated on the matching-degree component."""
    phis = [phi] if isinstance(phi, Functional) else list(phi)
    if isinstance(omega, Chain):
        omega = PeriodicChain.of(omega)
    total = 0j
    for f in phis:
        if f.n != omega.n:
            raise DimensionError("functional and chain dimension differ")
        if f.degree % 2 != omega.parity:
            raise ParityError(f"{f.label} has degree {f.degree} but the chain parity is {'odd' if omega.parity else 'even'}")
        if f.degree > omega.cap:
            raise ValueError(f"{f.label} has degree {f.degree} beyond the chain cap {omega.cap}")
        comp = omega.components.get(f.degree)
        if comp is None:
            continue
        for key, c in comp._terms.items():
            total += c * f.on_monomials(key, p)
    return total


# -- checks ---------------------------------------------------------------------------


def cyclicity_residual(phi: Functional, keys: Key, p: DeformationPoint) -> float:
    """|phi(a_m, a_0, ..) - (-1)^m phi(a_0, ..)|."""
    m = phi.degree
    rot = (keys[-1],) + keys[:-1]
    s = -1.0 if m % 2 else 1.0
    return abs(phi.on_monomials(rot, p) - s * phi.on_monomials(keys, p))


# -- registry ---------------------------------------------------------------------------


def parse_functional(name: str, n: int) -> Functional:
    """Functional by name: "tau", "tau1:j", "tau2", "gamma:j1,j2,..."."""
    name = name.strip()
    if name == "tau":
        return trace_functional(n)
    if name.startswith("tau1:"):
        return tau1(int(name[5:]), n)
    if name == "tau2":
        return tau2(n)
    if name.startswith("gamma:"):
        body = name[6:].strip()
        axes = [int(x) for x in body.split(",") if x.strip()] if body else []
        for j in axes:
            if not 1 <= j <= n:
                raise DimensionError(f"axis {j} out of range 1..{n}")
        return gamma_axes(axes, n)
    if name == "gamma":
        return trace_functional(n)
    raise ValueError(f"unknown functional {name!r}")
