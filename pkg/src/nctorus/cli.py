"""Command-line entry point ``nct``.

Exit codes: 0 success, 1 failed verification, 2 unreadable input or parity
mismatch, 3 non-invariant transport payload.
"""
from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from pathlib import Path
from typing import Any, Mapping

from . import cochains as co
from . import functionals as fn
from . import invariant as inv
from .chains import Chain, PeriodicChain, ch_idempotent, ch_invertible
from .torus import DeformationPoint, MatrixElement, SkewMatrix, TorusElement, idempotent_defect
from .verify import SUITES, SuiteConfig, default_theta, run_suite, worker_count


class InputError(ValueError):
    """Bad command-line input; maps to exit code 2."""


def fmt(x: float) -> str:
    return format(float(x), ".15g")


def fmt_complex(z: complex) -> str:
    z = complex(z)
    return f"{fmt(z.real)} {fmt(z.imag)}"


# -- payload files --------------------------------------------------------------


def payload_kind(data: Mapping) -> str:
    if not isinstance(data, Mapping):
        raise InputError("payload must be a JSON object")
    if data.get("kind") == "functional":
        return "functional"
    if "components" in data:
        return "periodic"
    if "degree" in data and "terms" in data:
        return "chain"
    if "parity" in data and "terms" in data:
        return "wedge"
    if "entries" in data:
        return "matrix"
    if "theta" in data:
        return "theta"
    if "terms" in data:
        return "element"
    raise InputError("unrecognized payload layout")


_LOADERS = {
    "functional": inv.FunctionalTable.from_json,
    "periodic": PeriodicChain.from_json,
    "chain": Chain.from_json,
    "wedge": inv.WedgeClass.from_json,
    "matrix": MatrixElement.from_json,
    "theta": SkewMatrix.from_json,
    "element": TorusElement.from_json,
}


def read_json(path: str | Path) -> Any:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc})") from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def load_payload(data: Any, expect: tuple[str, ...] | None = None):
    kind = payload_kind(data)
    if expect and kind not in expect:
        raise InputError(f"expected {' or '.join(expect)} payload, got {kind}")
    try:
        return _LOADERS[kind](data)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, inv.NonInvariantError):
            raise
        raise InputError(f"invalid {kind} payload: {exc}") from None


def dump_json(obj: Any) -> str:
    """Canonical text: fixed key order, full float precision for exact round trips."""
    data = obj if isinstance(obj, (dict, list)) else obj.to_json()
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_output(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def read_theta(arg: str | None, n: int) -> SkewMatrix:
    if arg is None:
        return default_theta(n)
    try:
        value = float(arg)
    except ValueError:
        theta = load_payload(read_json(arg), ("theta",))
    else:
        if n != 2:
            raise InputError("a scalar theta is only meaningful for n = 2")
        theta = SkewMatrix.two(value)
    if theta.n != n:
        raise InputError(f"theta has n = {theta.n}, payload has n = {n}")
    return theta


def _as_periodic(c) -> PeriodicChain:
    return PeriodicChain.of(c) if isinstance(c, Chain) else c


# -- commands -------------------------------------------------------------------------


_CHAIN_OPS = {"L": co.op_L, "I": co.op_I, "iota": co.op_iota, "S": co.op_S}


def _apply_chain_ops(omega: PeriodicChain, specs, p: DeformationPoint) -> PeriodicChain:
    for spec in specs:
        kind, _, expr = spec.partition(":")
        if kind not in _CHAIN_OPS or not expr:
            raise InputError(f"--apply expects L|I|iota|S:COCHAIN, got {spec!r}")
        D = co.parse_cochain(expr, omega.n, p.theta)
        omega = _as_periodic(_CHAIN_OPS[kind](D, p)(omega))
    return omega


def _apply_functional_ops(phis: list, specs, n: int) -> list:
    for spec in specs:
        if spec == "dual-b":
            phis = [fn.dual_b(f) for f in phis]
        elif spec == "dual-B":
            phis = [fn.dual_B(f) for f in phis]
        else:
            Z = co.derivation(int(spec.split(":", 1)[1]), n)
            phis = [g for f in phis for g in (
                [fn.contract_dual(Z, f)] + ([fn.contract_dual_S(Z, f)] if f.degree >= 1 else [])
            )]
    return phis


def cmd_pair(args) -> int:
    omega = _as_periodic(load_payload(read_json(args.chain), ("chain", "periodic")))
    if args.functional.endswith(".json"):
        phi = load_payload(read_json(args.functional), ("functional",)).as_functional()
        if phi.n != omega.n:
            raise InputError("functional and chain differ in n")
    else:
        try:
            phi = fn.parse_functional(args.functional, omega.n)
        except (KeyError, ValueError) as exc:
            raise InputError(f"bad functional {args.functional!r}: {exc}") from None
    p = DeformationPoint(read_theta(args.theta, omega.n), args.t)
    omega = _apply_chain_ops(omega, args.apply or (), p)
    phis = _apply_functional_ops([phi], args.fop or (), omega.n)
    print(fmt_complex(fn.pairing(phis, omega, p)))
    return 0


def _matrix(data) -> MatrixElement:
    obj = load_payload(data, ("matrix", "element"))
    return MatrixElement([[obj]]) if isinstance(obj, TorusElement) else obj


def cmd_chern(args) -> int:
    M = _matrix(read_json(args.matrix))
    p = DeformationPoint(read_theta(args.theta, M.n), args.t)
    kind = args.kind
    if kind == "auto":
        kind = "idempotent" if idempotent_defect(M, p) <= 1e-9 * max(1.0, M.norm_inf()) else "invertible"
    if kind == "idempotent":
        ch = ch_idempotent(M, p, cap=args.cap if args.cap is not None else 6)
    else:
        ch = ch_invertible(M, p, cap=args.cap if args.cap is not None else 5)
    write_output(dump_json(ch), args.out)
    return 0


def cmd_winding(args) -> int:
    U = _matrix(read_json(args.matrix))
    p = DeformationPoint(read_theta(args.theta, U.n), args.t)
    ch = ch_invertible(U, p, cap=1)
    for j in range(1, U.n + 1):
        print(f"{j} {fmt_complex(fn.pairing(fn.tau1(j, U.n), ch, p))}")
    return 0


def _max_R(keys, theta: SkewMatrix) -> float:
    return max((abs(inv.R_poly(k, theta)) for k in keys), default=0.0)


def cmd_transport(args) -> int:
    manifest = read_json(args.manifest)
    try:
        t0, t1 = float(manifest["t0"]), float(manifest["t1"])
        kind = manifest["object"]
        raw = manifest["payload"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"manifest needs t0, t1, object and payload ({exc})") from None
    base = Path(args.manifest).parent
    payload_path = base / raw if isinstance(raw, str) else None
    data = read_json(payload_path) if payload_path else raw
    expect = {"chain": ("chain", "periodic"), "functional": ("functional",), "wedge": ("wedge",)}
    if kind not in expect:
        raise InputError(f"object must be one of {', '.join(expect)}")
    obj = load_payload(data, expect[kind])
    theta_raw = manifest.get("theta")
    if theta_raw is None:
        theta = default_theta(obj.n)
    elif isinstance(theta_raw, (int, float)):
        theta = read_theta(str(theta_raw), obj.n)
    else:
        theta = load_payload(theta_raw, ("theta",))
        if theta.n != obj.n:
            raise InputError(f"theta has n = {theta.n}, payload has n = {obj.n}")

    if kind == "wedge":
        out = inv.gm_transport_wedge(obj, t0, t1, theta)
        for s in inv.wedge_basis(obj.n):
            d = out.coeff(s) - obj.coeff(s)
            if abs(d) > 0:
                axes = ",".join(map(str, s)) or "-"
                print(f"correction [{axes}]: {fmt_complex(d)}", file=sys.stderr)
    elif kind == "chain":
        inv.require_invariant(obj)
        comps = obj.components.values() if isinstance(obj, PeriodicChain) else [obj]
        print(f"max |R| = {fmt(_max_R((k for c in comps for k in c.terms), theta))}", file=sys.stderr)
        out = inv.transport_tilde_chain(obj, t0, t1, theta)
    else:
        out = inv.transport_tilde_functional(obj, t0, t1, theta)
        print(f"max |R| = {fmt(_max_R(obj.table, theta))}", file=sys.stderr)

    if t1 == t0 and payload_path is not None:
        text = payload_path.read_text(encoding="utf-8")
    elif t1 == t0:
        text = dump_json(data)
    else:
        text = dump_json(out)
    write_output(text, args.out)
    return 0


def cmd_verify(args) -> int:
    config = SuiteConfig()
    if args.config:
        data = read_json(args.config)
        try:
            config = SuiteConfig.from_json(data)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad suite config: {exc}") from None
    if args.samples is not None:
        config = SuiteConfig.from_json({**config.to_json(), "samples": args.samples})
    names = SUITES if args.suite == "all" else (args.suite,)
    reports = [run_suite(name, config) for name in names]
    if args.json:
        print(json.dumps([r.to_json() for r in reports], indent=2, sort_keys=True))
    else:
        print("\n\n".join(r.table() for r in reports))
    return 0 if all(r.passed for r in reports) else 1


def _histogram(keys, n: int) -> list[str]:
    lines = []
    keys = list(keys)
    for j in range(n):
        counts = Counter(inv.degree_vector(k)[j] for k in keys)
        body = " ".join(f"{d}:{c}" for d, c in sorted(counts.items()))
        lines.append(f"  deg_{j + 1}: {body}")
    return lines


def cmd_info(args) -> int:
    data = read_json(args.file)
    kind = payload_kind(data)
    obj = load_payload(data)
    lines = [f"kind: {kind}", f"n: {obj.n}"]
    if kind == "chain":
        lines += [f"degree: {obj.degree}", f"terms: {len(obj)}", f"invariant: {inv.is_invariant(obj)}"]
        lines += _histogram(obj.terms, obj.n)
    elif kind == "periodic":
        lines += [f"parity: {'even' if obj.parity == 0 else 'odd'}", f"cap: {obj.cap}"]
        for d, c in obj.components.items():
            lines.append(f"degree {d}: {len(c)} terms")
        lines.append(f"invariant: {inv.is_invariant(obj)}")
        lines += _histogram((k for c in obj.components.values() for k in c.terms), obj.n)
    elif kind == "functional":
        lines += [f"degree: {obj.degree}", f"entries: {len(obj.table)}"]
        lines += _histogram(obj.table, obj.n)
    elif kind == "wedge":
        lines += [f"parity: {'even' if obj.parity == 0 else 'odd'}", f"terms: {len(obj.coefficients)}"]
    elif kind == "matrix":
        lines += [f"size: {obj.size}", f"support: {sum(len(e) for r in obj.entries for e in r)}"]
    elif kind == "element":
        lines += [f"terms: {len(obj)}"]
    else:
        lines += [f"theta_{j}{k}: {fmt(v)}" for j, k, v in obj.lower_pairs()]
    print("\n".join(lines))
    return 0


# -- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nct", description="Cyclic (co)homology calculus on noncommutative tori.")
    sub = parser.add_subparsers(dest="command", required=True)

    def point_flags(p):
        p.add_argument("--theta", help="theta JSON file, or a number for n = 2 (default: golden-ratio entries)")
        p.add_argument("--t", type=float, default=1.0, help="deformation parameter (default 1)")

    p = sub.add_parser(
        "pair",
        help="pair a cyclic cocycle with a chain",
        epilog="--contract:j replaces phi by the transpose of the cyclic contraction with delta_j; "
        "functional ops apply in command-line order.",
    )
    p.add_argument("--functional", required=True, help="tau, tau1:j, tau2, gamma:j1,j2,... or a table .json")
    p.add_argument("--chain", required=True, help="chain or periodic chain JSON")
    p.add_argument("--apply", action="append", metavar="OP:COCHAIN",
                   help="apply L, I, iota or S of a cochain (e.g. L:delta:1, I:cup:(delta:1,delta:2)) to the chain")
    p.add_argument("--dual-b", dest="fop", action="append_const", const="dual-b", help="replace phi by b*phi")
    p.add_argument("--dual-B", dest="fop", action="append_const", const="dual-B", help="replace phi by B*phi")
    p.add_argument("--fop", action="append", help=argparse.SUPPRESS)
    point_flags(p)
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("chern", help="Chern character of a matrix idempotent or invertible")
    p.add_argument("--matrix", required=True)
    p.add_argument("--kind", choices=("auto", "idempotent", "invertible"), default="auto")
    p.add_argument("--cap", type=int)
    p.add_argument("--out")
    point_flags(p)
    p.set_defaults(func=cmd_chern)

    p = sub.add_parser("winding", help="winding numbers of an invertible matrix")
    p.add_argument("--matrix", required=True)
    point_flags(p)
    p.set_defaults(func=cmd_winding)

    p = sub.add_parser("transport", help="transport an invariant chain, functional table or wedge class")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_transport)

    p = sub.add_parser("verify", help="run an identity suite")
    p.add_argument("--suite", required=True, choices=(*SUITES, "all"))
    p.add_argument("--config")
    p.add_argument("--samples", type=int)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("info", help="describe a payload file")
    p.add_argument("--file", required=True)
    p.set_defaults(func=cmd_info)

    return parser


def _expand_contract_flags(argv: list[str]) -> list[str]:
    """``--contract:j`` becomes ``--fop contract:j`` so the order of functional ops is kept."""
    out = []
    for a in argv:
        if a.startswith("--contract:"):
            j = a.split(":", 1)[1]
            if not j.isdigit():
                out.append(a)  # let argparse report it
                continue
            out += ["--fop", f"contract:{j}"]
        else:
            out.append(a)
    return out


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_expand_contract_flags(argv))
    try:
        worker_count()
        return args.func(args)
    except inv.NonInvariantError as exc:
        print(f"error: non-invariant payload: {exc}", file=sys.stderr)
        return 3
    except fn.ParityError as exc:
        print(f"error: parity mismatch: {exc}", file=sys.stderr)
        return 2
    except (InputError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
