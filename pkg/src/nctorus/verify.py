"""Seeded generators and the identity suites.

Every check reports its largest residual divided by the scale
(1 + max input coefficient) * (term count), and passes when that ratio is
within tolerance. ``run_suite`` is deterministic for a fixed config.
"""
from __future__ import annotations

import json
import math
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import cochains as co
from . import functionals as fn
from . import invariant as inv
from .chains import (
    Chain,
    PeriodicChain,
    b_plus_B,
    boundary_b,
    chain_scale,
    ch_idempotent,
    ch_invertible,
    connes_B,
    generalized_trace,
)
from .ode import (
    LinearFamily,
    ParamSection,
    affine_fit,
    dyson_transport,
    fd_derivative,
    nilpotent_transport,
)
from .torus import (
    DeformationPoint,
    MatrixElement,
    SkewMatrix,
    TorusElement,
    delta,
    invert,
    mat_mul,
    mul,
    mul_derivative,
    trace,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

SUITES = ("complex", "operators", "invariant", "transport", "pairing", "chern", "ode")


def worker_count() -> int:
    """Worker cap from NCT_THREADS (default: CPU count)."""
    raw = os.environ.get("NCT_THREADS")
    cpus = os.cpu_count() or 1
    if not raw:
        return cpus
    try:
        return max(1, min(int(raw), cpus))
    except ValueError:
        raise ValueError(f"NCT_THREADS must be an integer, got {raw!r}") from None


# -- configuration and report ------------------------------------------------------


def default_theta(n: int) -> SkewMatrix:
    """Irrational-looking lower entries theta_jk = frac(golden * (j + 2k))."""
    if n == 2:
        return SkewMatrix.two(GOLDEN)
    entries = {}
    for j in range(2, n + 1):
        for k in range(1, j):
            entries[(j, k)] = math.fmod(GOLDEN * (j + 2 * k), 1.0) - 0.5
    return SkewMatrix.from_lower(n, entries)


@dataclass(frozen=True)
class SuiteConfig:
    n: int = 2
    N: int = 2
    theta: SkewMatrix | None = None
    t: float = 0.7
    t_grid: tuple[float, ...] = field(default_factory=lambda: ParamSection.uniform(0.0, 1.0, 21))
    cap: int = 6
    samples: int = 20
    degree_max: int = 5
    support: int = 4
    index_bound: int = 2
    seed: int = 0
    tolerances: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1 or self.N < 1 or self.samples < 1 or self.support < 1 or self.index_bound < 1:
            raise ValueError("counts and bounds must be positive")
        if self.cap < 0 or self.degree_max < 0:
            raise ValueError("degrees must be non-negative")
        if self.theta is None:
            object.__setattr__(self, "theta", default_theta(self.n))
        elif self.theta.n != self.n:
            raise ValueError("theta dimension differs from n")

    @property
    def point(self) -> DeformationPoint:
        return DeformationPoint(self.theta, self.t)

    def tol(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "N": self.N,
            "theta": self.theta.to_json(),
            "t": self.t,
            "t_grid": list(self.t_grid),
            "cap": self.cap,
            "samples": self.samples,
            "degree_max": self.degree_max,
            "support": self.support,
            "index_bound": self.index_bound,
            "seed": self.seed,
            "tolerances": dict(self.tolerances),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "SuiteConfig":
        kw = dict(data)
        if "theta" in kw and kw["theta"] is not None:
            kw["theta"] = SkewMatrix.from_json(kw["theta"])
        if "t_grid" in kw:
            kw["t_grid"] = tuple(float(x) for x in kw["t_grid"])
        unknown = set(kw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**kw)


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    samples: int
    tolerance: float
    passed: bool
    bound: str = "max"  # "max": residual <= tol; "min": residual >= tol

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "residual": self.residual,
            "samples": self.samples,
            "tolerance": self.tolerance,
            "bound": self.bound,
            "passed": self.passed,
        }


@dataclass
class SuiteReport:
    suite: str
    checks: list[CheckResult]
    wall_time: float
    config: SuiteConfig

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "wall_time": self.wall_time,
            "config": self.config.to_json(),
            "checks": [c.to_json() for c in self.checks],
        }

    def table(self) -> str:
        width = max([len(c.name) for c in self.checks] + [8])
        lines = [f"suite {self.suite}: {'PASS' if self.passed else 'FAIL'} ({self.wall_time:.2f} s)"]
        lines.append(f"{'identity':<{width}}  {'residual':>12}  {'tol':>9}  {'n':>5}  status")
        for c in self.checks:
            op = "<=" if c.bound == "max" else ">="
            lines.append(
                f"{c.name:<{width}}  {c.residual:12.3e}  {op}{c.tolerance:7.1e}  {c.samples:5d}  "
                f"{'ok' if c.passed else 'FAIL'}"
            )
        return "\n".join(lines)


# -- generators ---------------------------------------------------------------------------


def _nonzero_index(rng: random.Random, n: int, bound: int) -> tuple[int, ...]:
    while True:
        a = tuple(rng.randint(-bound, bound) for _ in range(n))
        if any(a):
            return a


def _coeff(rng: random.Random) -> complex:
    return complex(rng.uniform(-1, 1), rng.uniform(-1, 1))


def gen_element(seed: int, n: int, support: int = 3, index_bound: int = 2) -> TorusElement:
    """Deterministic sparse element with at most ``support`` terms."""
    rng = random.Random(seed)
    return _element(rng, n, support, index_bound)


def _element(rng: random.Random, n: int, support: int, bound: int) -> TorusElement:
    return TorusElement(n, {tuple(rng.randint(-bound, bound) for _ in range(n)): _coeff(rng) for _ in range(support)})


def gen_chain(
    seed: int, n: int, degree: int, support: int = 4, index_bound: int = 2, invariant: bool = False
) -> Chain:
    """Deterministic sparse chain; interior indices are uniform on the box minus 0.

    With ``invariant`` the leading index is set to minus the sum of the others.
    """
    if n < 1 or degree < 0 or support < 1 or index_bound < 1:
        raise ValueError("bounds must be positive")
    rng = random.Random(seed)
    terms: dict = {}
    for _ in range(support):
        inner = [_nonzero_index(rng, n, index_bound) for _ in range(degree)]
        if invariant:
            head = tuple(-sum(a[i] for a in inner) for i in range(n))
        else:
            head = tuple(rng.randint(-index_bound, index_bound) for _ in range(n))
        terms[(head, *inner)] = _coeff(rng)
    return Chain(n, degree, terms)


def _seed(config: SuiteConfig, tag: str, i: int) -> int:
    h = 0
    for ch in tag:
        h = (h * 131 + ord(ch)) % 1_000_003
    return config.seed * 1_000_003 * 7919 + h * 7919 + i


def _chains(config: SuiteConfig, tag: str, invariant: bool = False, degree_max: int | None = None) -> list[Chain]:
    top = config.degree_max if degree_max is None else degree_max
    return [
        gen_chain(_seed(config, tag, i), config.n, i % (top + 1), config.support, config.index_bound, invariant)
        for i in range(config.samples)
    ]


# -- check plumbing ---------------------------------------------------------------------


class _Collector:
    def __init__(self, config: SuiteConfig):
        self.config = config
        self.tasks: list[tuple[str, Callable[[], CheckResult]]] = []

    def scaled(self, name: str, tol: float, cases: Callable[[], Iterable[tuple[float, float]]]):
        """Register a check whose cases yield (raw residual, scale)."""

        def run():
            worst, count = 0.0, 0
            for raw, scale in cases():
                worst = max(worst, raw / max(scale, 1.0))
                count += 1
            t = self.config.tol(name, tol)
            return CheckResult(name, worst, count, t, worst <= t)

        self.tasks.append((name, run))

    def absolute(self, name: str, tol: float, cases: Callable[[], Iterable[tuple[float, float]]]):
        """Like ``scaled`` but the yielded scale is ignored."""
        self.scaled(name, tol, lambda: ((r, 1.0) for r, _ in cases()))

    def lower(self, name: str, tol: float, value: Callable[[], tuple[float, int]]):
        def run():
            v, count = value()
            t = self.config.tol(name, tol)
            return CheckResult(name, v, count, t, v >= t, bound="min")

        self.tasks.append((name, run))

    def run(self) -> list[CheckResult]:
        workers = min(worker_count(), len(self.tasks)) or 1
        if workers == 1:
            return [task() for _, task in self.tasks]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda nt: nt[1](), self.tasks))


def _diff(a, b) -> float:
    d = a - b
    return d.norm_inf() if isinstance(d, TorusElement) else d.max_abs()


def _lift(c: Chain) -> PeriodicChain:
    return PeriodicChain.of(c)


# -- suite: complex -----------------------------------------------------------------------


def _suite_complex(cfg: SuiteConfig, col: _Collector):
    p, n = cfg.point, cfg.n
    rng_elems = lambda tag: [
        tuple(gen_element(_seed(cfg, tag, 3 * i + k), n, min(cfg.support, 5), 3) for k in range(3))
        for i in range(cfg.samples)
    ]

    def escale(*xs):
        return (1.0 + max(x.norm_inf() for x in xs)) * max(1, max(len(x) for x in xs)) ** 2

    def assoc():
        for x, y, z in rng_elems("assoc"):
            yield _diff(mul(mul(x, y, p), z, p), mul(x, mul(y, z, p), p)), escale(x, y, z) * max(1, len(z))

    def unit():
        one = TorusElement.one(n)
        for x, _, _ in rng_elems("unit"):
            yield max(_diff(mul(one, x, p), x), _diff(mul(x, one, p), x)), 1.0

    def commutation():
        q = DeformationPoint(cfg.theta, 1.0)
        for j in range(1, n + 1):
            for k in range(1, n + 1):
                uj, uk = TorusElement.generator(n, j), TorusElement.generator(n, k)
                phase = np.exp(2j * np.pi * cfg.theta.entry(j, k))
                yield _diff(mul(uj, uk, q), mul(uk, uj, q) * phase), 1.0

    def leibniz():
        for x, y, _ in rng_elems("leibniz"):
            for j in range(1, n + 1):
                lhs = delta(j, mul(x, y, p))
                rhs = mul(delta(j, x), y, p) + mul(x, delta(j, y), p)
                yield _diff(lhs, rhs), escale(x, y) * cfg.index_bound * 4

    def trace_prop():
        for x, y, _ in rng_elems("trace"):
            yield abs(trace(mul(x, y, p)) - trace(mul(y, x, p))), escale(x, y)
            for j in range(1, n + 1):
                yield abs(trace(delta(j, x))), 1.0

    def mul_fd():
        h = 1e-4
        for x, y, _ in rng_elems("muld"):
            fd = (mul(x, y, p.at(p.t + h)) - mul(x, y, p.at(p.t - h))) * (1 / (2 * h))
            yield _diff(mul_derivative(x, y, p), fd), escale(x, y) * 100

    col.scaled("associativity", 1e-10, assoc)
    col.absolute("unit", 0.0, unit)
    col.absolute("commutation relation", 1e-12, commutation)
    col.scaled("derivation rule", 1e-10, leibniz)
    col.scaled("trace property and g-invariance", 1e-10, trace_prop)
    col.scaled("product derivative vs finite differences", 1e-6, mul_fd)

    chains = _chains(cfg, "complex", degree_max=min(cfg.degree_max + 1, 6))

    def b2():
        for c in chains:
            if c.degree >= 2:
                yield boundary_b(boundary_b(c, p), p).max_abs(), chain_scale(c)

    def B2():
        for c in chains:
            yield connes_B(connes_B(c)).max_abs(), chain_scale(c)

    def bB():
        for c in chains:
            if c.degree >= 1:
                yield (boundary_b(connes_B(c), p) + connes_B(boundary_b(c, p))).max_abs(), chain_scale(c)

    col.scaled("b^2 = 0", 1e-10, b2)
    col.scaled("B^2 = 0", 1e-10, B2)
    col.scaled("bB + Bb = 0", 1e-10, bB)


# -- suite: operators ------------------------------------------------------------------------


def _suite_operators(cfg: SuiteConfig, col: _Collector):
    p, n = cfg.point, cfg.n
    ds = co.derivations(n)
    E = co.E_cocycle(cfg.theta)
    cups = [co.cup(ds[j], ds[k]) for j in range(n) for k in range(n) if j != k]
    Ds = ds + cups + [E]
    chains = _chains(cfg, "operators")
    bB, b, B = co.op_bB(p), co.op_b(p), co.op_B()
    rng = random.Random(_seed(cfg, "multidiff", 0))

    def spot():
        m = co.multiplication(n)
        for D in Ds + [co.cup(E, ds[0]), m]:
            r = co.spot_check(D, p, samples=max(3, cfg.samples // 4), seed=rng.randint(0, 10**6))
            yield max(r.values()), 10.0 * (1 + 2 * np.pi) ** 2

    def delta_is_bracket():
        m = co.multiplication(n)
        for D in ds + cups[:2]:
            dD = co.hochschild_delta(D)
            br = co.bracket(m, D)
            for i in range(max(3, cfg.samples // 4)):
                args = [gen_element(_seed(cfg, "dm", 10 * i + k), n, 2, 2) for k in range(D.arity + 1)]
                v1, v2 = dD(args, p), br(args, p)
                yield _diff(v1, v2), 1 + max(v1.norm_inf(), v2.norm_inf())

    def delta_squared():
        for D in ds + cups[:2] + [E]:
            dd = co.hochschild_delta(co.hochschild_delta(D))
            for i in range(3):
                args = [gen_element(_seed(cfg, "dd", 10 * i + k), n, 2, 1) for k in range(dd.arity)]
                yield dd(args, p).norm_inf(), 100.0

    def derivations_cocycles():
        for X in ds + [E]:
            dX = co.hochschild_delta(X)
            for i in range(3):
                args = [gen_element(_seed(cfg, "dX", 10 * i + k), n, 2, 2) for k in range(dX.arity)]
                yield dX(args, p).norm_inf(), 10.0

    def identity(lhs: co.Op, rhs: co.Op, items=None):
        def cases():
            for c in items if items is not None else chains:
                yield _diff(lhs(c), rhs(c)), chain_scale(c)

        return cases

    def chf():
        for D in Ds:
            yield from identity(co.commutator(bB, co.op_I(D, p)), co.op_L(D, p) + co.op_I(co.hochschild_delta(D), p))()

    def b_L():
        for D in Ds:
            yield from identity(co.commutator(b, co.op_L(D, p)), -co.op_L(co.hochschild_delta(D), p))()

    def B_L():
        for D in Ds:
            yield from identity(co.commutator(B, co.op_L(D, p)), co.op_zero((2 - D.arity) % 2))()

    def b_iota():
        for D in Ds:
            yield from identity(co.commutator(b, co.op_iota(D, p)), co.op_iota(co.hochschild_delta(D), p))()

    def L_m():
        m = co.multiplication(n)
        yield from identity(co.op_L(m, p), -b, [c for c in chains if c.degree >= 1])()

    def L_L():
        pairs = [(ds[0], ds[-1]), (ds[0], cups[0]), (ds[-1], E)]
        for D, F in pairs:
            yield from identity(
                co.commutator(co.op_L(D, p), co.op_L(F, p)), co.op_L(co.bracket(D, F), p), chains[: max(4, cfg.samples // 2)]
            )()

    def L_I():
        for X in ds:
            for D in [ds[0], cups[0], E]:
                yield from identity(
                    co.commutator(co.op_L(X, p), co.op_I(D, p)), co.op_I(co.bracket(X, D), p), chains[: max(4, cfg.samples // 2)]
                )()

    def two_derivation():
        for X in ds:
            for Y in ds:
                lhs = co.commutator(bB, co.op_Ipair(X, Y, p))
                rhs = co.op_Lpair(X, Y, p) + co.op_I(co.cup(X, Y), p) - co.op_I(Y, p) @ co.op_I(X, p)
                yield from identity(lhs, rhs)()

    def two_derivation_corollary():
        for X in ds:
            for Y in ds:
                lhs = co.commutator(bB, co.op_Lpair(X, Y, p))
                rhs = (
                    -co.op_L(co.cup(X, Y), p)
                    + co.op_L(Y, p) @ co.op_I(X, p)
                    - co.op_I(Y, p) @ co.op_L(X, p)
                )
                yield from identity(lhs, rhs)()

    inv_chains = _chains(cfg, "chi", invariant=True)

    def chi_witness():
        for X in ds + [ds[0] * 0.3 + ds[-1] * 1.7]:
            lhs = co.commutator(bB, -co.op_Ipair(X, X, p) - co.op_I(co.compose(X, X) * 0.5, p))
            yield from identity(lhs, co.op_I(X, p) @ co.op_I(X, p), inv_chains)()

    def pair_equivariance():
        for Z in ds:
            for X in ds:
                for Y in ds:
                    lhs = co.commutator(co.op_L(Z, p), co.op_Ipair(X, Y, p))
                    rhs = co.op_Ipair(co.bracket(Z, X), Y, p) + co.op_Ipair(X, co.bracket(Z, Y), p)
                    yield from identity(lhs, rhs, chains[: max(4, cfg.samples // 4)])()

    col.scaled("multidiff spot checks", 1e-10, spot)
    col.scaled("coboundary equals bracket with m", 1e-10, delta_is_bracket)
    col.scaled("coboundary squares to zero", 1e-10, delta_squared)
    col.scaled("derivations and E are cocycles", 1e-10, derivations_cocycles)
    col.scaled("Cartan homotopy formula", 1e-9, chf)
    col.scaled("[b, L_D] = -L_dD", 1e-9, b_L)
    col.scaled("[B, L_D] = 0", 1e-9, B_L)
    col.scaled("[b, iota_D] = iota_dD", 1e-9, b_iota)
    col.scaled("L_m = -b", 1e-10, L_m)
    col.scaled("[L_D, L_E] = L_[D,E]", 1e-9, L_L)
    col.scaled("[L_X, I_D] = I_[X,D]", 1e-9, L_I)
    col.scaled("two-derivation formula", 1e-9, two_derivation)
    col.scaled("two-derivation corollary", 1e-9, two_derivation_corollary)
    col.scaled("chi witness on invariant chains", 1e-9, chi_witness)
    col.scaled("pair-operator equivariance", 1e-9, pair_equivariance)


# -- suite: invariant ----------------------------------------------------------------------


def _suite_invariant(cfg: SuiteConfig, col: _Collector):
    p, n = cfg.point, cfg.n
    bB = co.op_bB(p)
    chains = _chains(cfg, "invariant")
    inv_chains = _chains(cfg, "invariant-inv", invariant=True)

    def equivalence():
        for c in chains:
            pc = _lift(c)
            for j in range(1, n + 1):
                cj = pc
                for i in range(1, j):
                    cj = inv.project_axis(i, cj)
                lhs = bB(inv.homotopy_h(j, cj, p)) + inv.homotopy_h(j, bB(cj), p)
                yield _diff(lhs, cj - inv.project_axis(j, cj)), chain_scale(c)

    def projection():
        for c in chains:
            full = inv.project_invariant(_lift(c))
            seq = _lift(c)
            for j in range(1, n + 1):
                seq = inv.project_axis(j, seq)
            yield _diff(full, seq) + _diff(inv.project_invariant(full), full), chain_scale(c)

    def eigen():
        for c in inv_chains:
            for key in c.terms:
                single = Chain(n, c.degree, {key: 1.0})
                out = inv.lie_pair_sum(single, cfg.theta, p)
                yield _diff(out, single * inv.R_poly(key, cfg.theta)), 1.0

    def lie_pair_forms():
        ds = co.derivations(n)
        for c in inv_chains:
            for X in ds:
                for Y in ds:
                    yield _diff(co.lie_pair(X, Y, c, p), co.lie_pair_invariant(X, Y, c, p)), chain_scale(c)

    def commute():
        E = co.E_cocycle(cfg.theta)
        h, t = 1e-4, p.t

        def G(s, x):
            return co.cyclic_contraction(E, x, p.at(s)) * -1.0

        def A(x):
            return inv.lie_pair_sum(x, cfg.theta, p) * (2j * np.pi)

        for c in inv_chains[: max(4, cfg.samples // 2)]:
            if c.degree > 3:
                continue
            pc = _lift(c)
            Gp = (G(t - 2 * h, pc) - G(t + 2 * h, pc) + (G(t + h, pc) - G(t - h, pc)) * 8.0) * (1 / (12 * h))
            yield (Gp + A(G(t, pc)) - G(t, A(pc))).max_abs(), chain_scale(c)

    def chi_compose():
        for c in inv_chains:
            pc = _lift(c)
            direct = co.cyclic_contraction(co.derivation(1, n), co.cyclic_contraction(co.derivation(n, n), pc, p), p)
            yield _diff(inv.chi_apply((1, n), pc, p), direct), chain_scale(c)

    col.scaled("invariant chain equivalence", 1e-10, equivalence)
    col.scaled("invariant projection", 0.0, projection)
    col.absolute("eigenvalue R on invariant terms", 1e-12, eigen)
    col.scaled("invariant form of L{X,Y}", 1e-12, lie_pair_forms)
    col.scaled("Gauss-Manin and diagonal connections commute", 1e-5, commute)
    col.scaled("chi as composed contractions", 0.0, chi_compose)


# -- suite: transport ------------------------------------------------------------------------


def _suite_transport(cfg: SuiteConfig, col: _Collector):
    p, n, theta = cfg.point, cfg.n, cfg.theta
    inv_chains = _chains(cfg, "transport", invariant=True)
    t0, t1 = 0.25, 0.25 + cfg.t

    def chain_map():
        q0, q1 = p.at(t0), p.at(t1)
        for c in inv_chains:
            pc = _lift(c)
            lhs = b_plus_B(inv.transport_tilde_chain(pc, t0, t1, theta), q1)
            rhs = inv.transport_tilde_chain(b_plus_B(pc, q0), t0, t1, theta)
            yield _diff(lhs, rhs), chain_scale(c)

    def covariance():
        rng = random.Random(_seed(cfg, "cov", 0))
        for c in inv_chains:
            table = inv.FunctionalTable(n, c.degree, {k: _coeff(rng) for k in c.terms})
            moved = inv.transport_tilde_functional(table, t0, t1, theta).as_functional()
            before = fn.pairing(table.as_functional(), c, p.at(t0))
            after = fn.pairing(moved, inv.transport_tilde_chain(c, t0, t1, theta), p.at(t1))
            yield abs(after - before), chain_scale(c)

    def round_trip():
        for c in inv_chains:
            back = inv.transport_tilde_chain(inv.transport_tilde_chain(c, t0, t1, theta), t1, t0, theta)
            yield _diff(back, c), 1.0

    def wedge_example():
        th2 = SkewMatrix.two(GOLDEN)
        for s in (0.5, 1.0, -0.75):
            w = inv.gm_transport_wedge(inv.WedgeClass(2, 0, {(): 1.0}), 0.0, s, th2)
            expected = {(): 1.0, (1, 2): 2j * np.pi * GOLDEN * s}
            yield max(abs(w.coeff(k) - v) for k, v in expected.items()), 1.0
            top = inv.gm_transport_wedge(inv.WedgeClass(2, 0, {(1, 2): 1.0}), 0.0, s, th2)
            yield abs(top.coeff((1, 2)) - 1.0) + abs(top.coeff(())), 1.0

    col.scaled("transport is a chain map", 1e-9, chain_map)
    col.scaled("pairing covariance", 1e-10, covariance)
    col.absolute("transport round trip", 1e-12, round_trip)
    col.absolute("wedge transport of tau at n=2", 1e-12, wedge_example)


# -- suite: pairing ----------------------------------------------------------------------------


def winding_units(seed: int, n: int, count: int = 20, bound: int = 3) -> list[tuple[tuple[int, ...], complex]]:
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        alpha = tuple(rng.randint(-bound, bound) for _ in range(n))
        c = complex(rng.uniform(0.5, 2.0), rng.uniform(-1, 1))
        out.append((alpha, c))
    return out


def unitriangular_family(n: int, seed: int = 0) -> MatrixElement:
    """[[u_1, x], [0, u_2]] with a small random Laurent polynomial x."""
    rng = random.Random(seed)
    x = TorusElement(n, {tuple(rng.randint(-1, 1) for _ in range(n)): _coeff(rng) for _ in range(3)})
    u1 = TorusElement.generator(n, 1)
    u2 = TorusElement.generator(n, min(2, n))
    return MatrixElement([[u1, x], [TorusElement.zero(n), u2]])


def conjugated_idempotent(n: int, p: DeformationPoint, seed: int = 0) -> MatrixElement:
    """V P0 V^{-1}: P0 = [[1, -u_1], [0, 0]], V unitriangular with random Laurent entries."""
    rng = random.Random(seed)
    u1 = TorusElement.generator(n, 1)
    P0 = MatrixElement([[TorusElement.one(n), -u1], [TorusElement.zero(n), TorusElement.zero(n)]])
    y = TorusElement(n, {tuple(rng.randint(-1, 1) for _ in range(n)): _coeff(rng) for _ in range(2)})
    V = MatrixElement([[TorusElement.one(n), TorusElement.zero(n)], [y, TorusElement.one(n)]])
    Vi = invert(V, p)
    return mat_mul(mat_mul(V, P0, p), Vi, p)


def pairing_matrix(p: DeformationPoint, parity: int) -> np.ndarray:
    """Rows: gamma cocycles of one parity at n = 2. Columns: fixed cycles.

    Odd: tau1:1, tau1:2 against ch(u_1), ch(u_2). Even: tau, gamma(delta_1 ^ delta_2)
    against ch(1) and the transported product cycle.
    """
    n = 2
    if parity:
        rows = [fn.tau1(1, n), fn.tau1(2, n)]
        cols = [ch_invertible(MatrixElement([[TorusElement.generator(n, j)]]), p, cap=1) for j in (1, 2)]
    else:
        rows = [fn.trace_functional(n), fn.gamma_axes((1, 2), n)]
        one = MatrixElement([[TorusElement.one(n)]])
        base = inv.product_cycle(p.at(0.0))
        cols = [ch_idempotent(one, p, cap=4), inv.transport_tilde_chain(base, 0.0, p.t, p.theta)]
    return np.array([[fn.pairing(r, c, p) for c in cols] for r in rows])


def _suite_pairing(cfg: SuiteConfig, col: _Collector):
    p, n = cfg.point, cfg.n
    ds = co.derivations(n)

    def keysets(tag: str, degree: int, invariant: bool = True):
        for i in range(cfg.samples):
            c = gen_chain(_seed(cfg, tag, i), n, degree, 1, cfg.index_bound, invariant)
            yield next(iter(c.terms))

    wedges = [()] + [(j,) for j in range(1, n + 1)] + [(j, k) for j in range(1, n + 1) for k in range(j + 1, n + 1)]

    def cyclic():
        for w in wedges:
            g = fn.gamma_axes(w, n)
            for key in keysets(f"cyc{w}", g.degree):
                yield fn.cyclicity_residual(g, key, p), 1.0

    def g_invariant():
        for w in wedges:
            g = fn.gamma_axes(w, n)
            for X in ds:
                lifted = fn.dual_lie(X, g)
                for key in keysets(f"ginv{w}", g.degree, invariant=False):
                    yield abs(lifted.on_monomials(key, p)), 1.0

    def closed():
        for w in wedges:
            g = fn.gamma_axes(w, n)
            bg = fn.dual_b(g)
            for key in keysets(f"bg{w}", g.degree + 1):
                yield abs(bg.on_monomials(key, p)), 10.0
            if g.degree >= 1:
                Bg = fn.dual_B(g)
                for key in keysets(f"Bg{w}", g.degree - 1):
                    yield abs(Bg.on_monomials(key, p)), 1.0

    def adjunction():
        rng = random.Random(_seed(cfg, "adj", 0))
        for i in range(max(3, cfg.samples // 4)):
            deg = 2 + (i % 2)
            comps = [
                gen_chain(_seed(cfg, "adjc", 10 * i + d), n, d, cfg.support, cfg.index_bound)
                for d in range((deg + 1) % 2, deg + 2, 2)
            ]
            w = PeriodicChain(n, (deg + 1) % 2, comps, cap=deg + 1)
            # phi lives on the support of (b+B)w so both sides are nonzero
            table = {k: _coeff(rng) for k in b_plus_B(w, p).component(deg).terms}
            phi = fn.Functional(deg, lambda k, q, t=table: t.get(k, 0j), n, "phi")
            lhs = fn.pairing([fn.dual_b(phi), fn.dual_B(phi)], w, p)
            rhs = fn.pairing(phi, b_plus_B(w, p), p)
            yield abs(lhs - rhs) / max(1.0, abs(rhs)), chain_scale(w)

    def psi_lemma():
        for k in range(1, min(3, n + 1) + 1):
            Xs = [ds[(i * 7 + k) % n] for i in range(k)]
            lhs, avg = fn.trace_of_derivatives(Xs), fn.rotation_average(Xs)
            bpsi = fn.dual_b(fn.psi_correction(Xs))
            for key in keysets(f"psi{k}", k):
                yield abs(lhs.on_monomials(key, p) - avg.on_monomials(key, p) - bpsi.on_monomials(key, p)), 10.0 ** k
            if k >= 2:
                Bpsi = fn.dual_B(fn.psi_correction(Xs))
                for key in keysets(f"Bpsi{k}", k - 2):
                    yield abs(Bpsi.on_monomials(key, p)), 10.0 ** k

    def contraction():
        for Z in ds:
            for w in wedges:
                if len(w) > 2:
                    continue
                Xs = [co.derivation(j, n) for j in w]
                phi = fn.gamma_axes(w, n)
                lhs = fn.contract_dual(Z, phi)
                rhs = fn.gamma([Z] + Xs)
                corr = fn.dual_b(fn.gamma_contract_correction(Z, Xs)) if Xs else None
                for key in keysets(f"IZ{w}", len(w) + 1):
                    v = lhs.on_monomials(key, p) - rhs.on_monomials(key, p)
                    if corr is not None:
                        v -= corr.on_monomials(key, p)
                    yield abs(v), 10.0
                if phi.degree >= 1:
                    S = fn.contract_dual_S(Z, phi)
                    for key in keysets(f"SZ{w}", phi.degree - 1):
                        yield abs(S.on_monomials(key, p)), 1.0

    def winding():
        for alpha, c in winding_units(_seed(cfg, "wind", 0), n):
            U = MatrixElement([[TorusElement.monomial(alpha, c)]])
            chU = ch_invertible(U, p, cap=1)
            for j in range(1, n + 1):
                yield abs(fn.pairing(fn.tau1(j, n), chU, p) - alpha[j - 1]), 1.0

    def winding_flat():
        U = unitriangular_family(n, _seed(cfg, "U", 0))
        for j in range(1, n + 1):
            f = fn.tau1(j, n)
            sec = ParamSection.sample(lambda t: fn.pairing(f, ch_invertible(U, p.at(t), cap=1), p.at(t)), cfg.t_grid)
            yield float(np.max(np.abs(fd_derivative(sec).array()))), 1.0

    def rank():
        worst, count = math.inf, 0
        if n != 2:
            return 1.0, 0
        for t in (0.0, cfg.t, 1.0):
            for parity in (0, 1):
                s = np.linalg.svd(pairing_matrix(p.at(t), parity), compute_uv=False)
                worst = min(worst, float(s[-1]))
                count += 1
        return worst, count

    col.absolute("gamma cocycles are cyclic", 1e-10, cyclic)
    col.absolute("gamma cocycles are g-invariant", 1e-12, g_invariant)
    col.scaled("gamma cocycles are (b+B)-closed", 1e-10, closed)
    col.scaled("pairing adjunction", 1e-10, adjunction)
    col.scaled("rotation lemma with B psi = 0", 1e-10, psi_lemma)
    col.scaled("contraction of gamma", 1e-10, contraction)
    col.absolute("winding numbers of monomial units", 1e-12, winding)
    col.absolute("winding pairing is t-independent", 1e-5, winding_flat)
    col.lower("pairing matrix rank surrogate", 1e-6, rank)


# -- suite: chern -------------------------------------------------------------------------------


def matrix_b(factors: Sequence[MatrixElement], p: DeformationPoint) -> list[tuple[float, list[MatrixElement]]]:
    m = len(factors) - 1
    out = [((-1.0) ** j, list(factors[:j]) + [mat_mul(factors[j], factors[j + 1], p)] + list(factors[j + 2 :])) for j in range(m)]
    out.append(((-1.0) ** m, [mat_mul(factors[m], factors[0], p)] + list(factors[1:m])))
    return out


def matrix_B(factors: Sequence[MatrixElement]) -> list[tuple[float, list[MatrixElement]]]:
    m = len(factors) - 1
    eye = MatrixElement.identity(factors[0].size, factors[0].n)
    return [((-1.0) ** (j * m), [eye] + list(factors[j:]) + list(factors[:j])) for j in range(m + 1)]


def _T(terms, n: int, degree: int) -> Chain:
    out = Chain.zero(n, degree)
    for s, fs in terms:
        out = out + generalized_trace(fs, coeff=s)
    return out


def _suite_chern(cfg: SuiteConfig, col: _Collector):
    p, n, N = cfg.point, cfg.n, max(1, min(cfg.N, 3))
    theta21 = cfg.theta.entry(2, 1) if n >= 2 else 0.0

    def rand_matrix(tag: str, i: int) -> MatrixElement:
        rng = random.Random(_seed(cfg, tag, i))
        return MatrixElement(
            [[_element(rng, n, rng.randint(0, 2), 1) for _ in range(N)] for _ in range(N)]
        )

    def trace_chain_map():
        for i in range(max(3, cfg.samples // 2)):
            deg = 1 + i % 3
            fs = [rand_matrix("T", 10 * i + k) for k in range(deg + 1)]
            Tc = generalized_trace(fs)
            yield _diff(_T(matrix_b(fs, p), n, deg - 1), boundary_b(Tc, p)), chain_scale(Tc) * 10
            yield _diff(_T(matrix_B(fs), n, deg + 1), connes_B(Tc)), chain_scale(Tc)

    def closure():
        cases = [ch_idempotent(conjugated_idempotent(n, p, _seed(cfg, "P", i)), p, cap=min(cfg.cap, 6)) for i in range(3)]
        cases.append(ch_idempotent(MatrixElement.identity(N, n), p, cap=min(cfg.cap, 6)))
        cases += [ch_invertible(unitriangular_family(n, _seed(cfg, "U", i)), p, cap=5) for i in range(3)]
        for ch in cases:
            for k in range(1, ch.cap):
                if (k + 1) % 2 != ch.parity:
                    continue
                upper, lower = ch.component(k + 1), ch.component(k - 1)
                r = boundary_b(upper, p) + (connes_B(lower) if k >= 1 else 0)
                yield r.max_abs(), chain_scale(ch)

    def affine():
        if n != 2:
            return
        tau, t2 = fn.trace_functional(n), fn.tau2(n)
        for i in range(2):
            seed = _seed(cfg, "affine", i)

            def tauP(t):
                q = p.at(t)
                return fn.pairing(tau, ch_idempotent(conjugated_idempotent(n, q, seed), q, cap=0), q)

            sec = ParamSection.sample(tauP, cfg.t_grid)
            C, D, res = affine_fit(sec)
            yield res, 1.0
            for t in cfg.t_grid:
                q = p.at(t)
                P = conjugated_idempotent(n, q, seed)
                yield abs(D - theta21 * fn.pairing(t2, PeriodicChain.of(generalized_trace([P, P, P]), cap=2), q)), 1.0

    def derivative_law():
        if n != 2:
            return
        tau, t2 = fn.trace_functional(n), fn.tau2(n)
        seed = _seed(cfg, "affine", 0)
        sec = ParamSection.sample(
            lambda t: fn.pairing(tau, PeriodicChain.of(generalized_trace([conjugated_idempotent(n, p.at(t), seed)])), p.at(t)),
            cfg.t_grid,
        )
        d = fd_derivative(sec).array()
        for t, v in zip(cfg.t_grid, d):
            P = conjugated_idempotent(n, p.at(t), seed)
            yield abs(v - theta21 * fn.pairing(t2, PeriodicChain.of(generalized_trace([P, P, P]), cap=2), p.at(t))), 1.0

    col.scaled("generalized trace is a chain map", 1e-10, trace_chain_map)
    col.scaled("Chern closure", 1e-9, closure)
    col.absolute("trace pairing is affine in t", 1e-6, affine)
    col.absolute("derivative of trace pairing", 1e-5, derivative_law)


# -- suite: ode ------------------------------------------------------------------------------------


def _expm_eig(F: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eig(F)
    return (V * np.exp(w)) @ np.linalg.inv(V)


def _suite_ode(cfg: SuiteConfig, col: _Collector):
    rng = np.random.default_rng(cfg.seed)
    mats = []
    for _ in range(20):
        F = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        s = 2.0 / np.linalg.norm(F, 2)
        mats.append((F, s, rng.normal(size=4) + 1j * rng.normal(size=4)))

    def dyson():
        for F, s, x0 in mats:
            r = dyson_transport(LinearFamily.constant(F), x0, 0.1, 0.1 + s, order=20, quad_steps=512)
            yield float(np.max(np.abs(r.value - _expm_eig(s * F) @ x0))), 1.0

    def monotone():
        for F, s, x0 in mats[:5]:
            r = dyson_transport(LinearFamily.constant(F), x0, 0.0, s, order=20, quad_steps=256)
            res = r.residuals
            floor = 1e-13 * max(1.0, float(np.max(np.abs(x0))))
            # after the first few orders the Taylor tail decreases to the floor
            bad = [max(0.0, res[k + 1] - res[k]) for k in range(3, len(res) - 1) if res[k] > floor]
            yield max(bad, default=0.0), 1.0

    def nilpotent():
        N = np.array([[0, 1], [0, 0]], dtype=complex)
        for s in (0.5, -1.25, 3.0):
            x0 = np.array([0.3 + 0.1j, 1.2])
            yield float(np.max(np.abs(nilpotent_transport(N, x0, 0.0, s) - (x0 + s * (N @ x0))))), 1.0
            r = dyson_transport(LinearFamily.constant(N), x0, 0.0, s, order=4, quad_steps=8)
            yield float(np.max(np.abs(r.value - nilpotent_transport(N, x0, 0.0, s)))), 1.0
            fam = LinearFamily(2, lambda t: t * N)
            r = dyson_transport(fam, x0, 0.2, 0.2 + s, order=4, quad_steps=64)
            closed = x0 + ((0.2 + s) ** 2 - 0.2**2) / 2 * (N @ x0)
            yield float(np.max(np.abs(r.value - closed))), 1.0

    def wedge_model():
        for t in (cfg.theta, default_theta(3), default_theta(4)):
            W = inv.wedge_matrix(t)
            for parity in (0, 1):
                for s in inv.wedge_basis(t.n):
                    if len(s) % 2 != parity:
                        continue
                    w = inv.WedgeClass(t.n, parity, {s: 1.0})
                    a = inv.gm_transport_wedge(w, 0.0, cfg.t, t).to_vector()
                    b = nilpotent_transport(-W, w.to_vector(), 0.0, cfg.t)
                    yield float(np.max(np.abs(a - b))), 1.0

    def fd():
        grid = ParamSection.uniform(0.0, 1.0, 1001)
        sq = fd_derivative(ParamSection.sample(lambda t: t * t, grid))
        yield float(np.max(np.abs(sq.array() - 2 * np.asarray(grid)))), 1.0
        const = fd_derivative(ParamSection.sample(lambda t: 3.0 - 1j, grid))
        yield float(np.max(np.abs(const.array()))), 1.0
        grid = ParamSection.uniform(0.0, 0.01, 401)
        for th in (GOLDEN, -2.0):
            e = ParamSection.sample(lambda t: np.exp(2j * np.pi * th * t), grid)
            d = fd_derivative(e)
            yield float(np.max(np.abs(d.array() - 2j * np.pi * th * e.array()))), 1.0

    col.absolute("Dyson series vs matrix exponential", 1e-8, dyson)
    col.absolute("Dyson residual decreases", 1e-12, monotone)
    col.absolute("nilpotent transport", 1e-10, nilpotent)
    col.absolute("wedge model transport", 1e-12, wedge_model)
    col.absolute("finite differences", 1e-5, fd)


_BUILDERS = {
    "complex": _suite_complex,
    "operators": _suite_operators,
    "invariant": _suite_invariant,
    "transport": _suite_transport,
    "pairing": _suite_pairing,
    "chern": _suite_chern,
    "ode": _suite_ode,
}


def suite_checks(name: str, config: SuiteConfig | None = None) -> list[str]:
    """Names of the identities a suite covers."""
    if name not in _BUILDERS:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    col = _Collector(config or SuiteConfig())
    _BUILDERS[name](col.config, col)
    return [n for n, _ in col.tasks]


def coverage(config: SuiteConfig | None = None) -> dict[str, str]:
    """Identity name -> owning suite; raises if a name is claimed twice."""
    owner: dict[str, str] = {}
    for suite in SUITES:
        for check in suite_checks(suite, config):
            if check in owner:
                raise RuntimeError(f"identity {check!r} appears in {owner[check]} and {suite}")
            owner[check] = suite
    return owner


def run_suite(name: str, config: SuiteConfig | None = None) -> SuiteReport:
    if name not in _BUILDERS:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    config = config or SuiteConfig()
    col = _Collector(config)
    _BUILDERS[name](config, col)
    start = time.perf_counter()
    checks = col.run()
    return SuiteReport(name, checks, time.perf_counter() - start, config)


def report_json(report: SuiteReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True)
