"""Arithmetic in the algebraic noncommutative torus at deformation parameter t.

Elements are finitely supported maps ``Z^n -> C``; the monomial ``u^alpha``
is stored under the key ``alpha`` (a tuple of ints). Multiplication is the
twisted convolution

    m_t(x, y)_a = sum_b exp(2 pi i t B(a - b, b)) x_{a-b} y_b,
    B(a, b) = sum_{j>k} a_j b_k theta_jk.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from . import kernels

MultiIndex = tuple[int, ...]

TWO_PI = 2.0 * math.pi

# below this many pairwise products the dict loop beats array setup
_KERNEL_THRESHOLD = 64


class DimensionError(ValueError):
    """Operands live in tori of different dimension."""


@dataclass(frozen=True)
class SkewMatrix:
    """Real skew-symmetric n x n matrix, stored row-major as nested tuples."""

    theta: tuple[tuple[float, ...], ...]
    lower: np.ndarray = field(init=False, repr=False, compare=False)
    _lower_rows: tuple[tuple[float, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rows = tuple(tuple(float(v) for v in row) for row in self.theta)
        n = len(rows)
        if n < 1 or any(len(r) != n for r in rows):
            raise ValueError("theta must be a non-empty square matrix")
        for j in range(n):
            if rows[j][j] != 0.0:
                raise ValueError(f"theta[{j}][{j}] must be 0")
            for k in range(j):
                if rows[j][k] != -rows[k][j]:
                    raise ValueError(f"theta not skew-symmetric at ({j}, {k})")
        object.__setattr__(self, "theta", rows)
        lower = np.tril(np.asarray(rows, dtype=np.float64), k=-1)
        lower.setflags(write=False)
        object.__setattr__(self, "lower", np.ascontiguousarray(lower))
        object.__setattr__(self, "_lower_rows", tuple(tuple(r) for r in lower.tolist()))

    @property
    def n(self) -> int:
        return len(self.theta)

    @classmethod
    def zero(cls, n: int) -> "SkewMatrix":
        return cls(tuple((0.0,) * n for _ in range(n)))

    @classmethod
    def from_lower(cls, n: int, entries: Mapping[tuple[int, int], float]) -> "SkewMatrix":
        """Build from 1-based ``{(j, k): theta_jk}`` with ``j > k``."""
        m = [[0.0] * n for _ in range(n)]
        for (j, k), v in entries.items():
            if not (1 <= k < j <= n):
                raise ValueError(f"entry ({j}, {k}) must satisfy 1 <= k < j <= n")
            m[j - 1][k - 1] = float(v)
            m[k - 1][j - 1] = -float(v)
        return cls(tuple(tuple(r) for r in m))

    @classmethod
    def two(cls, theta21: float) -> "SkewMatrix":
        return cls.from_lower(2, {(2, 1): theta21})

    def entry(self, j: int, k: int) -> float:
        """1-based accessor for theta_jk."""
        return self.theta[j - 1][k - 1]

    def lower_pairs(self) -> Iterator[tuple[int, int, float]]:
        """Yield ``(j, k, theta_jk)`` for j > k (1-based) with nonzero theta_jk."""
        for j in range(2, self.n + 1):
            for k in range(1, j):
                v = self.theta[j - 1][k - 1]
                if v != 0.0:
                    yield j, k, v

    def to_json(self) -> dict:
        return {"n": self.n, "theta": [list(r) for r in self.theta]}

    @classmethod
    def from_json(cls, data: Mapping) -> "SkewMatrix":
        n = int(data["n"])
        rows = tuple(tuple(float(v) for v in r) for r in data["theta"])
        if len(rows) != n:
            raise ValueError("theta row count does not match n")
        return cls(rows)


@dataclass(frozen=True)
class DeformationPoint:
    """A fiber of the deformation: the algebra with product m_t for ``t * theta``."""

    theta: SkewMatrix
    t: float = 1.0

    @property
    def n(self) -> int:
        return self.theta.n

    def at(self, t: float) -> "DeformationPoint":
        return DeformationPoint(self.theta, float(t))


def _check_index(alpha: Sequence[int], n: int) -> MultiIndex:
    key = tuple(int(a) for a in alpha)
    if len(key) != n:
        raise DimensionError(f"multi-index {key} has length {len(key)}, expected {n}")
    return key


def phase(theta: SkewMatrix, a: Sequence[int], b: Sequence[int]) -> float:
    """B_theta(a, b) = sum_{j>k} a_j b_k theta_jk."""
    n = theta.n
    if len(a) != n or len(b) != n:
        raise DimensionError("multi-index length does not match theta")
    return _phase_rows(theta._lower_rows, a, b)


def _phase_rows(lower: tuple[tuple[float, ...], ...], a: Sequence[int], b: Sequence[int]) -> float:
    acc = 0.0
    for j in range(1, len(a)):
        aj = a[j]
        if aj:
            row = lower[j]
            s = 0.0
            for k in range(j):
                bk = b[k]
                if bk:
                    s += row[k] * bk
            acc += aj * s
    return acc


def monomial_product(p: DeformationPoint, a: MultiIndex, b: MultiIndex) -> tuple[MultiIndex, complex]:
    """u^a u^b = exp(2 pi i t B(a, b)) u^(a+b); returns ``(a+b, factor)``."""
    key = tuple(x + y for x, y in zip(a, b))
    ph = _phase_rows(p.theta._lower_rows, a, b)
    if ph == 0.0 or p.t == 0.0:
        return key, 1.0 + 0.0j
    return key, cmath.exp(1j * TWO_PI * p.t * ph)


def lex_sorted(terms: Mapping[MultiIndex, complex]) -> dict[MultiIndex, complex]:
    return {k: terms[k] for k in sorted(terms)}


class TorusElement:
    """Finitely supported element sum_alpha x_alpha u^alpha.

    Immutable. Exact zeros are never stored; ``terms`` iterates in
    lexicographic order of the multi-indices.
    """

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[Sequence[int], complex] | None = None):
        if n < 1:
            raise ValueError("dimension must be >= 1")
        self.n = int(n)
        clean: dict[MultiIndex, complex] = {}
        if terms:
            for alpha, c in terms.items():
                key = _check_index(alpha, self.n)
                c = complex(c)
                if c != 0:
                    clean[key] = clean.get(key, 0j) + c
        self._terms = lex_sorted({k: v for k, v in clean.items() if v != 0})

    @classmethod
    def _trusted(cls, n: int, terms: dict[MultiIndex, complex]) -> "TorusElement":
        obj = cls.__new__(cls)
        obj.n = n
        obj._terms = lex_sorted({k: v for k, v in terms.items() if v != 0})
        return obj

    # constructors
    @classmethod
    def zero(cls, n: int) -> "TorusElement":
        return cls._trusted(n, {})

    @classmethod
    def one(cls, n: int) -> "TorusElement":
        return cls._trusted(n, {(0,) * n: 1.0 + 0j})

    @classmethod
    def monomial(cls, alpha: Sequence[int], c: complex = 1.0) -> "TorusElement":
        key = tuple(int(a) for a in alpha)
        return cls._trusted(len(key), {key: complex(c)})

    @classmethod
    def generator(cls, n: int, j: int, power: int = 1) -> "TorusElement":
        """u_j^power (1-based j)."""
        if not 1 <= j <= n:
            raise ValueError(f"axis {j} out of range 1..{n}")
        alpha = [0] * n
        alpha[j - 1] = power
        return cls.monomial(alpha)

    # access
    @property
    def terms(self) -> Mapping[MultiIndex, complex]:
        return MappingProxyType(self._terms)

    def coeff(self, alpha: Sequence[int]) -> complex:
        return self._terms.get(tuple(alpha), 0j)

    def support(self) -> list[MultiIndex]:
        return list(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms.items())

    def is_zero(self) -> bool:
        return not self._terms

    def is_monomial(self) -> bool:
        return len(self._terms) == 1

    def norm_inf(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # linear structure
    def _same_dim(self, other: "TorusElement"):
        if self.n != other.n:
            raise DimensionError(f"dimension mismatch: {self.n} vs {other.n}")

    def __add__(self, other):
        if not isinstance(other, TorusElement):
            other = TorusElement._trusted(self.n, {(0,) * self.n: complex(other)})
        self._same_dim(other)
        out = dict(self._terms)
        for k, v in other._terms.items():
            out[k] = out.get(k, 0j) + v
        return TorusElement._trusted(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return TorusElement._trusted(self.n, {k: -v for k, v in self._terms.items()})

    def __sub__(self, other):
        if not isinstance(other, TorusElement):
            return self + (-complex(other))
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, s):
        if isinstance(s, TorusElement):
            raise TypeError("use mul(x, y, point): the product depends on the deformation parameter")
        s = complex(s)
        return TorusElement._trusted(self.n, {k: v * s for k, v in self._terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self * (1.0 / complex(s))

    def __eq__(self, other):
        return isinstance(other, TorusElement) and self.n == other.n and self._terms == other._terms

    def __hash__(self):
        return hash((self.n, tuple(self._terms.items())))

    def allclose(self, other: "TorusElement", tol: float = 1e-12) -> bool:
        return (self - other).norm_inf() <= tol

    def prune(self, eps: float = 1e-14, scale: float | None = None) -> "TorusElement":
        """Drop coefficients with ``|c| < eps * scale`` (scale defaults to the max norm)."""
        s = self.norm_inf() if scale is None else scale
        cut = eps * max(s, 1.0)
        return TorusElement._trusted(self.n, {k: v for k, v in self._terms.items() if abs(v) >= cut})

    def __repr__(self):
        if not self._terms:
            return f"TorusElement(n={self.n}, 0)"
        body = " + ".join(f"({c:.6g})u^{list(k)}" for k, c in self._terms.items())
        return f"TorusElement(n={self.n}, {body})"

    # serialization
    def to_json(self) -> dict:
        return {
            "n": self.n,
            "terms": [{"alpha": list(k), "re": c.real, "im": c.imag} for k, c in self._terms.items()],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "TorusElement":
        n = int(data["n"])
        seen = set()
        terms = {}
        for t in data["terms"]:
            key = _check_index(t["alpha"], n)
            if key in seen:
                raise ValueError(f"duplicate multi-index {list(key)}")
            seen.add(key)
            terms[key] = complex(float(t["re"]), float(t.get("im", 0.0)))
        return cls(n, terms)


def as_element(x, n: int) -> TorusElement:
    if isinstance(x, TorusElement):
        return x
    return TorusElement._trusted(n, {(0,) * n: complex(x)})


def _arrays(x: TorusElement) -> tuple[np.ndarray, np.ndarray]:
    idx = np.array(list(x._terms.keys()), dtype=np.int64).reshape(len(x), x.n)
    coeff = np.array(list(x._terms.values()), dtype=np.complex128)
    return np.ascontiguousarray(idx), coeff


def _reduce(idx: np.ndarray, coeff: np.ndarray, n: int) -> dict[MultiIndex, complex]:
    if len(coeff) == 0:
        return {}
    # stable lexicographic sort keeps the (a-major, b-minor) order within ties
    order = np.lexsort(idx.T[::-1])
    idx = idx[order]
    coeff = coeff[order]
    change = np.any(idx[1:] != idx[:-1], axis=1)
    starts = np.concatenate(([0], np.nonzero(change)[0] + 1))
    sums = np.add.reduceat(coeff, starts)
    keys = idx[starts]
    return {tuple(int(v) for v in keys[i]): complex(sums[i]) for i in range(len(starts))}


def mul(x: TorusElement, y: TorusElement, p: DeformationPoint) -> TorusElement:
    """The deformed product m_t(x, y)."""
    if x.n != y.n or x.n != p.n:
        raise DimensionError(f"dimension mismatch: {x.n}, {y.n}, theta {p.n}")
    if not x._terms or not y._terms:
        return TorusElement.zero(x.n)
    if len(x) * len(y) <= _KERNEL_THRESHOLD:
        out: dict[MultiIndex, complex] = {}
        for a, ca in x._terms.items():
            for b, cb in y._terms.items():
                key, f = monomial_product(p, a, b)
                out[key] = out.get(key, 0j) + ca * cb * f
        return TorusElement._trusted(x.n, out)
    ia, ca = _arrays(x)
    ib, cb = _arrays(y)
    idx, coeff = kernels.twisted_products(ia, ca, ib, cb, p.theta.lower, float(p.t))
    return TorusElement._trusted(x.n, _reduce(idx, coeff, x.n))


def mul_many(factors: Iterable[TorusElement], p: DeformationPoint) -> TorusElement:
    it = iter(factors)
    acc = next(it)
    for f in it:
        acc = mul(acc, f, p)
    return acc


def delta(j: int, x: TorusElement) -> TorusElement:
    """Canonical derivation: (delta_j x)_alpha = alpha_j x_alpha (1-based j)."""
    if not 1 <= j <= x.n:
        raise ValueError(f"axis {j} out of range 1..{x.n}")
    i = j - 1
    return TorusElement._trusted(x.n, {k: k[i] * v for k, v in x._terms.items() if k[i]})


def trace(x: TorusElement) -> complex:
    """tau(x) = x_0."""
    return x._terms.get((0,) * x.n, 0j)


def mul_derivative(x: TorusElement, y: TorusElement, p: DeformationPoint) -> TorusElement:
    """d/dt m_t(x, y) = 2 pi i sum_{j>k} theta_jk m_t(delta_j x, delta_k y)."""
    if x.n != y.n or x.n != p.n:
        raise DimensionError("dimension mismatch")
    acc = TorusElement.zero(x.n)
    for j, k, th in p.theta.lower_pairs():
        dx = delta(j, x)
        if dx.is_zero():
            continue
        acc = acc + mul(dx, delta(k, y), p) * (1j * TWO_PI * th)
    return acc


def invert_monomial_unit(x: TorusElement, p: DeformationPoint) -> TorusElement:
    """Exact inverse of ``c u^alpha`` under m_t."""
    if not x.is_monomial():
        raise ValueError("not a monomial unit: element must have exactly one term")
    ((alpha, c),) = x._terms.items()
    neg = tuple(-a for a in alpha)
    _, f = monomial_product(p, alpha, neg)
    return TorusElement._trusted(x.n, {neg: 1.0 / (c * f)})


class MatrixElement:
    """N x N matrix over the torus algebra; immutable."""

    __slots__ = ("size", "n", "entries")

    def __init__(self, entries: Sequence[Sequence[TorusElement]]):
        rows = tuple(tuple(r) for r in entries)
        size = len(rows)
        if size < 1 or any(len(r) != size for r in rows):
            raise ValueError("matrix must be square and non-empty")
        n = rows[0][0].n
        if any(e.n != n for r in rows for e in r):
            raise DimensionError("matrix entries must share the torus dimension")
        self.size = size
        self.n = n
        self.entries = rows

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence], n: int) -> "MatrixElement":
        return cls([[as_element(e, n) for e in r] for r in rows])

    @classmethod
    def identity(cls, size: int, n: int) -> "MatrixElement":
        return cls(
            [[TorusElement.one(n) if i == j else TorusElement.zero(n) for j in range(size)] for i in range(size)]
        )

    @classmethod
    def scalar(cls, x: TorusElement) -> "MatrixElement":
        return cls([[x]])

    @classmethod
    def diagonal(cls, diag: Sequence[TorusElement]) -> "MatrixElement":
        n = diag[0].n
        N = len(diag)
        return cls([[diag[i] if i == j else TorusElement.zero(n) for j in range(N)] for i in range(N)])

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def _check(self, other: "MatrixElement"):
        if self.size != other.size:
            raise ValueError(f"size mismatch: {self.size} vs {other.size}")
        if self.n != other.n:
            raise DimensionError("dimension mismatch")

    def __add__(self, other: "MatrixElement") -> "MatrixElement":
        self._check(other)
        return MatrixElement([[a + b for a, b in zip(ra, rb)] for ra, rb in zip(self.entries, other.entries)])

    def __sub__(self, other: "MatrixElement") -> "MatrixElement":
        self._check(other)
        return MatrixElement([[a - b for a, b in zip(ra, rb)] for ra, rb in zip(self.entries, other.entries)])

    def __mul__(self, s) -> "MatrixElement":
        return MatrixElement([[e * s for e in r] for r in self.entries])

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, MatrixElement) and self.entries == other.entries

    def norm_inf(self) -> float:
        return max(e.norm_inf() for r in self.entries for e in r)

    def allclose(self, other: "MatrixElement", tol: float = 1e-12) -> bool:
        return (self - other).norm_inf() <= tol

    def map(self, f) -> "MatrixElement":
        return MatrixElement([[f(e) for e in r] for r in self.entries])

    def __repr__(self):
        return f"MatrixElement(size={self.size}, n={self.n})"

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "size": self.size,
            "entries": [[e.to_json()["terms"] for e in r] for r in self.entries],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "MatrixElement":
        n = int(data["n"])
        size = int(data["size"])
        rows = data["entries"]
        if len(rows) != size or any(len(r) != size for r in rows):
            raise ValueError("entry grid does not match size")
        return cls([[TorusElement.from_json({"n": n, "terms": e}) for e in r] for r in rows])


def mat_mul(X: MatrixElement, Y: MatrixElement, p: DeformationPoint) -> MatrixElement:
    X._check(Y)
    N = X.size
    zero = TorusElement.zero(X.n)
    out = []
    for i in range(N):
        row = []
        for j in range(N):
            acc = zero
            for k in range(N):
                a, b = X.entries[i][k], Y.entries[k][j]
                if a._terms and b._terms:
                    acc = acc + mul(a, b, p)
            row.append(acc)
        out.append(row)
    return MatrixElement(out)


def mat_trace(X: MatrixElement) -> complex:
    """(tr tensor tau)(X) = sum_i tau(X_ii)."""
    return sum((trace(X.entries[i][i]) for i in range(X.size)), 0j)


def idempotent_defect(P: MatrixElement, p: DeformationPoint) -> float:
    return (mat_mul(P, P, p) - P).norm_inf()


def _is_upper(V: MatrixElement) -> bool:
    return all(V.entries[i][j].is_zero() for i in range(V.size) for j in range(i))


def _is_lower(V: MatrixElement) -> bool:
    return all(V.entries[i][j].is_zero() for i in range(V.size) for j in range(i + 1, V.size))


def invert_unitriangular(V: MatrixElement, p: DeformationPoint, tol: float = 1e-10) -> MatrixElement:
    """Exact inverse of a triangular matrix whose diagonal entries are monomial units.

    Back-substitution over the fiber algebra; the result is checked as a
    two-sided inverse before returning.
    """
    N = V.size
    upper, lower = _is_upper(V), _is_lower(V)
    if not (upper or lower):
        raise ValueError("matrix is not triangular")
    diag_inv = []
    for i in range(N):
        d = V.entries[i][i]
        if not d.is_monomial():
            raise ValueError(f"diagonal entry {i} is not a monomial unit")
        diag_inv.append(invert_monomial_unit(d, p))
    zero = TorusElement.zero(V.n)
    W = [[zero] * N for _ in range(N)]
    for i in range(N):
        W[i][i] = diag_inv[i]
    if upper:
        for j in range(N):
            for i in range(j - 1, -1, -1):
                acc = zero
                for l in range(i + 1, j + 1):
                    acc = acc + mul(V.entries[i][l], W[l][j], p)
                W[i][j] = -mul(diag_inv[i], acc, p)
    else:
        for j in range(N):
            for i in range(j + 1, N):
                acc = zero
                for l in range(j, i):
                    acc = acc + mul(V.entries[i][l], W[l][j], p)
                W[i][j] = -mul(diag_inv[i], acc, p)
    inv = MatrixElement(W)
    eye = MatrixElement.identity(N, V.n)
    scale = max(1.0, V.norm_inf(), inv.norm_inf())
    if not (mat_mul(V, inv, p).allclose(eye, tol * scale) and mat_mul(inv, V, p).allclose(eye, tol * scale)):
        raise ValueError("triangular inverse failed verification")
    return inv


def invert(U: MatrixElement, p: DeformationPoint) -> MatrixElement:
    """Inverse of a monomial unit (1x1) or a product-free triangular matrix."""
    if U.size == 1 and U.entries[0][0].is_monomial():
        return MatrixElement.scalar(invert_monomial_unit(U.entries[0][0], p))
    return invert_unitriangular(U, p)
