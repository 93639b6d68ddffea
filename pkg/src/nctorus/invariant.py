"""The g-invariant complex of the torus and its exact transports.

A monomial tensor u^{a_0} (x) ... (x) u^{a_m} is invariant when its total
degree sum_i a_i vanishes. On invariant tensors the diagonal connection acts
by the scalar R(a) = sum_{p>q} theta_pq sum_{i<j} a^i_p a^j_q, so transport
is a per-term phase. The exterior algebra on the derivations models
Gauss-Manin transport on the span of the gamma cocycles.
"""
from __future__ import annotations

import cmath
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .chains import AnyChain, Chain, Key, PeriodicChain, _b_term, apply_terms, connes_B, emit, mono
from .cochains import cyclic_contraction, derivation, lie_pair_invariant
from .functionals import Functional
from .ode import nilpotent_transport
from .torus import TWO_PI, DeformationPoint, DimensionError, MultiIndex, SkewMatrix, monomial_product


class NonInvariantError(ValueError):
    """A payload has a tensor with nonzero total degree."""


def degree_vector(key: Key) -> tuple[int, ...]:
    return tuple(sum(a[j] for a in key) for j in range(len(key[0])))


def deg(j: int, key: Key) -> int:
    """deg_j: the j-th component (1-based) of the total Fourier degree."""
    return sum(a[j - 1] for a in key)


def is_invariant_key(key: Key) -> bool:
    return not any(degree_vector(key))


def _chains(c: AnyChain) -> Iterable[Chain]:
    return c.components.values() if isinstance(c, PeriodicChain) else (c,)


def is_invariant(c: AnyChain) -> bool:
    return all(is_invariant_key(k) for comp in _chains(c) for k in comp._terms)


def require_invariant(c: AnyChain) -> AnyChain:
    """Return ``c`` unchanged, or raise NonInvariantError naming a bad term."""
    for comp in _chains(c):
        for k in comp._terms:
            if not is_invariant_key(k):
                raise NonInvariantError(f"term {k} has total degree {degree_vector(k)}")
    return c


def _scale_terms(c: AnyChain, factor) -> AnyChain:
    """Multiply each term by factor(key); zero factors drop the term."""
    if isinstance(c, Chain):
        acc = {}
        for k, v in c._terms.items():
            f = factor(k)
            if f:
                acc[k] = v * f
        return Chain._trusted(c.n, c.degree, acc)
    return PeriodicChain(c.n, c.parity, [_scale_terms(comp, factor) for comp in c.components.values()], cap=c.cap)


def project_invariant(c: AnyChain) -> AnyChain:
    """Keep exactly the terms with all deg_j = 0."""
    return _scale_terms(c, lambda k: 1.0 if is_invariant_key(k) else 0.0)


def project_axis(j: int, c: AnyChain) -> AnyChain:
    """p_j = 1 - N_j L_{delta_j}: keep the terms with deg_j = 0."""
    return _scale_terms(c, lambda k: 1.0 if deg(j, k) == 0 else 0.0)


def smoothing_N(j: int, c: AnyChain) -> AnyChain:
    """N_j: 1/deg_j on terms with deg_j != 0, zero otherwise."""

    def f(k):
        d = deg(j, k)
        return 1.0 / d if d else 0.0

    return _scale_terms(c, f)


def homotopy_h(j: int, c: AnyChain, p: DeformationPoint) -> PeriodicChain:
    """h_j = N_j I_{delta_j}; [b+B, h_j] = 1 - p_j."""
    return smoothing_N(j, cyclic_contraction(derivation(j, p.n), c, p))


# -- the diagonal connection ------------------------------------------------------


def R_poly(factors: Sequence[MultiIndex], theta: SkewMatrix) -> float:
    """R(a) = sum_{p>q} theta_pq sum_{i<j} a^i_p a^j_q for an invariant tuple."""
    factors = tuple(tuple(a) for a in factors)
    if any(len(a) != theta.n for a in factors):
        raise DimensionError("index length differs from theta")
    if not is_invariant_key(factors):
        raise NonInvariantError(f"tuple {factors} has total degree {degree_vector(factors)}")
    arr = np.asarray(factors, dtype=float)
    prefix = np.cumsum(arr, axis=0) - arr  # sum_{i<j} a^i at row j
    return float(np.einsum("jp,pq,jq->", prefix, theta.lower, arr))


def _phase(key: Key, theta: SkewMatrix, ds: float, sign: float) -> complex:
    r = R_poly(key, theta)
    return cmath.exp(sign * 1j * TWO_PI * r * ds) if r and ds else 1.0


def transport_tilde_chain(c: AnyChain, t0: float, t1: float, theta: SkewMatrix) -> AnyChain:
    """Parallel transport for the diagonal connection: coefficients times exp(-2 pi i R (t1 - t0))."""
    require_invariant(c)
    ds = t1 - t0
    if ds == 0 or not any(True for _ in theta.lower_pairs()):
        return c
    return _scale_terms(c, lambda k: _phase(k, theta, ds, -1.0))


@dataclass
class FunctionalTable:
    """A functional given by its values on finitely many monomial tuples (zero elsewhere)."""

    n: int
    degree: int
    table: dict[Key, complex] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for k, v in self.table.items():
            k = tuple(tuple(int(x) for x in a) for a in k)
            if len(k) != self.degree + 1 or any(len(a) != self.n for a in k):
                raise ValueError(f"table key {k} does not match degree {self.degree}, n={self.n}")
            if v != 0:
                clean[k] = complex(v)
        self.table = dict(sorted(clean.items()))

    def as_functional(self, label: str = "table") -> Functional:
        tab = self.table
        return Functional(self.degree, lambda k, p: tab.get(k, 0j), self.n, label)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "degree": self.degree,
            "kind": "functional",
            "terms": [{"factors": [list(a) for a in k], "re": v.real, "im": v.imag} for k, v in self.table.items()],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "FunctionalTable":
        n, degree = int(data["n"]), int(data["degree"])
        table: dict = {}
        for t in data["terms"]:
            k = tuple(tuple(int(x) for x in a) for a in t["factors"])
            if k in table:
                raise ValueError(f"duplicate factors {k}")
            table[k] = complex(float(t["re"]), float(t["im"]))
        return cls(n, degree, table)


def transport_tilde_functional(phi, t0: float, t1: float, theta: SkewMatrix):
    """Dual transport: values times exp(+2 pi i R (t1 - t0)).

    A FunctionalTable is transported entry by entry. A Functional is
    transported lazily; it is read at the point (theta, t0) and vanishes off
    invariant tuples.
    """
    ds = t1 - t0
    if isinstance(phi, FunctionalTable):
        for k in phi.table:
            if not is_invariant_key(k):
                raise NonInvariantError(f"table entry {k} has total degree {degree_vector(k)}")
        if ds == 0:
            return phi
        return FunctionalTable(phi.n, phi.degree, {k: v * _phase(k, theta, ds, 1.0) for k, v in phi.table.items()})

    def ev(keys, q):
        if not is_invariant_key(keys):
            return 0j
        return phi.on_monomials(keys, DeformationPoint(theta, t0)) * _phase(keys, theta, ds, 1.0)

    return Functional(phi.degree, ev, phi.n, f"T[{phi.label}]", phi.is_cyclic)


def lie_pair_sum(c: AnyChain, theta: SkewMatrix, p: DeformationPoint) -> AnyChain:
    """sum_{j>k} theta_jk L{delta_j, delta_k} in the invariant form."""
    n = theta.n
    out = None
    for j, k, th in theta.lower_pairs():
        term = lie_pair_invariant(derivation(j, n), derivation(k, n), c, p) * th
        out = term if out is None else out + term
    return out if out is not None else c * 0.0


# -- chi and the exterior algebra model ----------------------------------------------


def chi_apply(axes: Sequence[int], c: AnyChain, p: DeformationPoint) -> AnyChain:
    """chi(delta_{s1} ^ ... ^ delta_{sk}) = I_{s1} ... I_{sk}; the rightmost acts first."""
    require_invariant(c)
    out = c
    for j in reversed(list(axes)):
        out = cyclic_contraction(derivation(j, p.n), out, p)
    return out


def wedge_basis(n: int) -> list[tuple[int, ...]]:
    """Increasing subsets of 1..n ordered by size, then lexicographically."""
    return [s for k in range(n + 1) for s in itertools.combinations(range(1, n + 1), k)]


def _wedge_insert(front: Sequence[int], s: tuple[int, ...]) -> tuple[int, tuple[int, ...]] | None:
    """e_{front} ^ e_s as (sign, sorted subset), or None when an axis repeats."""
    seq = list(front) + list(s)
    if len(set(seq)) != len(seq):
        return None
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign, tuple(sorted(seq))


@dataclass
class WedgeClass:
    """sum_S c_S [gamma(wedge_{j in S} delta_j)] with S increasing and |S| of one parity."""

    n: int
    parity: int
    coefficients: dict[tuple[int, ...], complex] = field(default_factory=dict)

    def __post_init__(self):
        self.parity %= 2
        clean = {}
        for s, v in self.coefficients.items():
            s = tuple(int(x) for x in s)
            if list(s) != sorted(set(s)) or any(not 1 <= x <= self.n for x in s):
                raise ValueError(f"subset {s} is not strictly increasing in 1..{self.n}")
            if len(s) % 2 != self.parity:
                raise ValueError(f"subset {s} does not have parity {self.parity}")
            if v != 0:
                clean[s] = complex(v)
        order = {s: i for i, s in enumerate(wedge_basis(self.n))}
        self.coefficients = dict(sorted(clean.items(), key=lambda kv: order[kv[0]]))

    def coeff(self, s: Sequence[int]) -> complex:
        return self.coefficients.get(tuple(s), 0j)

    def to_vector(self) -> np.ndarray:
        return np.array([self.coeff(s) for s in wedge_basis(self.n)], dtype=complex)

    @classmethod
    def from_vector(cls, n: int, parity: int, v) -> "WedgeClass":
        return cls(n, parity, {s: complex(x) for s, x in zip(wedge_basis(n), v) if len(s) % 2 == parity % 2 and x != 0})

    def allclose(self, other: "WedgeClass", tol: float = 1e-12) -> bool:
        return self.n == other.n and float(np.max(np.abs(self.to_vector() - other.to_vector()))) <= tol

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "parity": "even" if self.parity == 0 else "odd",
            "terms": [{"axes": list(s), "re": v.real, "im": v.imag} for s, v in self.coefficients.items()],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "WedgeClass":
        parity = {"even": 0, "odd": 1}[data["parity"]]
        coeffs: dict = {}
        for t in data["terms"]:
            s = tuple(int(x) for x in t["axes"])
            if s in coeffs:
                raise ValueError(f"duplicate axes {s}")
            coeffs[s] = complex(float(t["re"]), float(t["im"]))
        return cls(int(data["n"]), parity, coeffs)


def wedge_matrix(theta: SkewMatrix) -> np.ndarray:
    """Matrix of W = 2 pi i sum_{j>k} theta_jk (delta_j ^ delta_k) ^ . on the full exterior algebra."""
    basis = wedge_basis(theta.n)
    index = {s: i for i, s in enumerate(basis)}
    W = np.zeros((len(basis), len(basis)), dtype=complex)
    for col, s in enumerate(basis):
        for j, k, th in theta.lower_pairs():
            ins = _wedge_insert((j, k), s)
            if ins is None:
                continue
            sign, out = ins
            W[index[out], col] += 1j * TWO_PI * th * sign
    return W


def gm_transport_wedge(w: WedgeClass, t0: float, t1: float, theta: SkewMatrix) -> WedgeClass:
    """exp(-(t1 - t0) W) on wedge coefficients; a finite sum since W is nilpotent."""
    if w.n != theta.n:
        raise DimensionError("wedge and theta dimension differ")
    basis = wedge_basis(theta.n)
    index = {s: i for i, s in enumerate(basis)}
    W = wedge_matrix(theta)
    vec = w.to_vector()
    out = vec.copy()
    term = vec.copy()
    # W raises the wedge degree by 2, so at most n // 2 steps survive
    for k in range(1, theta.n // 2 + 1):
        term = W @ term * (-(t1 - t0) / k)
        out = out + term
    return WedgeClass(theta.n, w.parity, {s: out[index[s]] for s in basis if len(s) % 2 == w.parity})


def gm_transport_wedge_reference(w: WedgeClass, t0: float, t1: float, theta: SkewMatrix) -> WedgeClass:
    """The same transport through the generic nilpotent exponential."""
    v = nilpotent_transport(-wedge_matrix(theta), w.to_vector(), t0, t1)
    return WedgeClass.from_vector(theta.n, w.parity, v)


# -- commutative cycles ----------------------------------------------------------------


def _shuffles(p: int, q: int):
    """Yield (sign, positions of the first block) for all (p, q)-shuffles."""
    for pos in itertools.combinations(range(p + q), p):
        # sign = parity of the number of inversions between the two blocks
        inv = sum(sum(1 for j in range(pos_i) if j not in pos) for pos_i in pos)
        yield (-1 if inv % 2 else 1), set(pos)


def shuffle_product(x: AnyChain, y: AnyChain, p: DeformationPoint, cap: int | None = None) -> PeriodicChain:
    """(a_0, a_1..a_p) x (b_0, b_1..b_q) = sum_shuffles sgn (a_0 b_0, shuffled a's and b's).

    A chain map for b + B only on a commutative algebra (t = 0).
    """
    xs = PeriodicChain.of(x) if isinstance(x, Chain) else x
    ys = PeriodicChain.of(y) if isinstance(y, Chain) else y
    if xs.n != ys.n:
        raise DimensionError("dimension mismatch")
    out: dict = {}
    for cx in xs.components.values():
        for cy in ys.components.values():
            deg = cx.degree + cy.degree
            if cap is not None and deg > cap:
                continue
            sh = list(_shuffles(cx.degree, cy.degree))
            for kx, vx in cx._terms.items():
                for ky, vy in cy._terms.items():
                    head, f = monomial_product(p, kx[0], ky[0])
                    for sign, first in sh:
                        ix, iy = iter(kx[1:]), iter(ky[1:])
                        tail = [next(ix) if i in first else next(iy) for i in range(deg)]
                        emit(out, sign * vx * vy * f, [mono(head)] + [mono(a) for a in tail])
    comps = [Chain._trusted(xs.n, d, acc) for d, acc in out.items()]
    top = max([c.degree for c in comps], default=0)
    return PeriodicChain(xs.n, (xs.parity + ys.parity) % 2, comps, cap=cap if cap is not None else top)


def solve_b_preimage(
    target: Chain, letters: Sequence[MultiIndex], p: DeformationPoint, tol: float = 1e-10
) -> Chain:
    """A chain c with b c = target, searched among invariant tensors whose
    interior factors are drawn from ``letters`` (least squares, minimum norm)."""
    n, deg = target.n, target.degree + 1
    cols: list[Key] = []
    rows: dict[Key, int] = {k: i for i, k in enumerate(target._terms)}
    entries = []
    for inner in itertools.product([tuple(a) for a in letters], repeat=deg):
        if any(not any(a) for a in inner):
            continue
        head = tuple(-sum(a[i] for a in inner) for i in range(n))
        key = (head,) + inner
        image = apply_terms(Chain._trusted(n, deg, {key: 1.0 + 0j}), _b_term(p), 1, shift=-1)
        j = len(cols)
        cols.append(key)
        for k, v in image._terms.items():
            entries.append((rows.setdefault(k, len(rows)), j, v))
    M = np.zeros((len(rows), len(cols)), dtype=complex)
    for r, j, v in entries:
        M[r, j] += v
    rhs = np.zeros(len(rows), dtype=complex)
    for k, v in target._terms.items():
        rhs[rows[k]] = v
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    if float(np.max(np.abs(M @ sol - rhs), initial=0.0)) > tol * (1.0 + float(np.max(np.abs(rhs), initial=0.0))):
        raise ValueError("no preimage over the given letters")
    return Chain(n, deg, {cols[j]: complex(round(sol[j].real, 14), round(sol[j].imag, 14)) for j in range(len(cols))})


def product_cycle(p0: DeformationPoint, axes: tuple[int, int] = (1, 2)) -> PeriodicChain:
    """Even (b+B)-cycle through degree 4 for the product class of u_j and u_k at t = 0.

    Degree 2 is the shuffle (v, u_j, u_k) - (v, u_k, u_j), v = (u_j u_k)^{-1};
    degree 4 solves b c_4 = -B c_2. Transport it to other t with
    ``transport_tilde_chain``.
    """
    if p0.t != 0 and any(True for _ in p0.theta.lower_pairs()):
        raise ValueError("the product cycle is built on the commutative fiber t = 0")
    n = p0.n
    j, k = axes
    uj = tuple(1 if i == j - 1 else 0 for i in range(n))
    uk = tuple(1 if i == k - 1 else 0 for i in range(n))
    v = tuple(-a - b for a, b in zip(uj, uk))
    c2 = Chain(n, 2, {(v, uj, uk): 1.0, (v, uk, uj): -1.0})
    inv = [tuple(-x for x in uj), tuple(-x for x in uk)]
    c4 = solve_b_preimage(connes_B(c2) * -1.0, [uj, uk] + inv, p0)
    return PeriodicChain(n, 0, [c2, c4], cap=4)
