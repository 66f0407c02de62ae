"""Command line interface.

Exit codes: 0 when the query ran (whatever its answer), 1 for usage errors
(bad arguments, unknown ids, id lists that are not slices), 2 when the circuit
file or a subspace literal fails to parse or validate.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from . import engine, oracle
from . import omlattice as lat
from .circuit import Circuit, CircuitError, is_slice, maximal_slices
from .dsl import ParseError, format_subspace, parse_circuit, parse_subspace

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2

DIGITS = 6


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _ids(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="circuit file (.qc)")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--tol", type=float, default=lat.TOL_RANK, help="rank tolerance (default %(default)g)")
    common.add_argument("--trace", action="store_true", help="append the derivation")

    parser = _ArgumentParser(prog="epicirc", description="Epistemic verification of quantum circuits.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    sub.add_parser("check", parents=[common], help="possible or impossible")
    p = sub.add_parser("state", parents=[common], help="epistemic state of a slice")
    p.add_argument("--slice", type=_ids, required=True)
    p = sub.add_parser("verify", parents=[common], help="does a slice verify a subspace")
    p.add_argument("--slice", type=_ids, required=True)
    p.add_argument("--subspace", required=True)
    p = sub.add_parser("cond", parents=[common], help="conditional state of gamma given delta")
    p.add_argument("--gamma", type=_ids, required=True)
    p.add_argument("--delta", type=_ids, required=True)
    p = sub.add_parser("oracle", parents=[common], help="compare the engine with operator composition")
    p.add_argument("--slice", type=_ids, default=None, help="default: every maximal slice")
    p = sub.add_parser("trace", parents=[common], help="derivation of a slice's state")
    p.add_argument("--slice", type=_ids, required=True)
    p.add_argument("--subspace", default=None)
    return parser


def _load(path: str) -> Circuit:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    try:
        return parse_circuit(text)
    except (ParseError, CircuitError, lat.DimensionError) as e:
        raise InputError(f"{path}: {e}") from None


def _slice(c: Circuit, ids: Sequence[str], what: str = "slice") -> list[str]:
    try:
        ok = is_slice(c, ids)
    except KeyError as e:
        raise UsageError(f"{what}: {e.args[0]}") from None
    if not ok:
        raise UsageError(f"{what} {','.join(ids)} is not a slice")
    return list(ids)


def _subspace(c: Circuit, text: str, gamma: Sequence[str]) -> lat.Subspace:
    try:
        return parse_subspace(text, c.dims(gamma))
    except (ParseError, lat.DimensionError) as e:
        raise InputError(f"subspace: {e}") from None


def _fmt(c: Circuit, s: lat.Subspace, gamma: Sequence[str]) -> str:
    return format_subspace(s, c.dims(gamma), digits=DIGITS)


def _trace(c: Circuit, step: engine.Step | None) -> tuple[str, list[dict]]:
    if step is None:
        return "", []

    def fmt(state, dims):
        return format_subspace(state, dims, digits=DIGITS)

    return step.to_text(fmt), step.to_dict(fmt)


def _check(c: Circuit, args) -> tuple[str, dict, engine.Step | None]:
    witness = engine.find_impossibility(c)
    step = None
    if args.trace:
        for _, fr in engine.propagate(c, trace=True):
            step = fr.step
            if fr.state.is_bottom():
                break
    if witness is None:
        return "POSSIBLE", {"result": "POSSIBLE", "witness": None}, step
    text = f"IMPOSSIBLE (witness: {','.join(witness)})"
    return text, {"result": "IMPOSSIBLE", "witness": list(witness)}, step


def _state(c: Circuit, args):
    gamma = _slice(c, args.slice)
    s = engine.epistemic_state(c, gamma)
    lit = _fmt(c, s, gamma)
    step = engine.derivation(c, gamma) if args.trace else None
    return lit, {"slice": gamma, "rank": s.dim, "state": lit}, step


def _verify(c: Circuit, args):
    gamma = _slice(c, args.slice)
    p = _subspace(c, args.subspace, gamma)
    holds = engine.verifies(c, gamma, p)
    result = "HOLDS" if holds else "FAILS"
    step = None
    if args.trace:
        step = engine.derivation(c, gamma, p) if holds else engine.derivation(c, gamma)
    report = {"slice": gamma, "subspace": _fmt(c, p, gamma), "result": result}
    return result, report, step


def _cond(c: Circuit, args):
    gamma = _slice(c, args.gamma, "gamma")
    delta = _slice(c, args.delta, "delta")
    _slice(c, gamma + delta, "gamma + delta")
    s = engine.conditional_state(c, gamma, delta)
    lit = _fmt(c, s, gamma)
    step = engine.derivation(c, gamma + delta) if args.trace else None
    return lit, {"gamma": gamma, "delta": delta, "rank": s.dim, "state": lit}, step


def _oracle(c: Circuit, args):
    targets = [_slice(c, args.slice)] if args.slice is not None else [list(g) for g in maximal_slices(c)]
    rows = []
    for gamma in targets:
        e = engine.epistemic_state(c, gamma)
        o = oracle.composed_image(c, gamma)
        rows.append({
            "slice": gamma,
            "engine": _fmt(c, e, gamma),
            "oracle": _fmt(c, o, gamma),
            "agree": lat.equals(e, o),
        })
    imp_e = engine.is_impossible(c)
    imp_o = oracle.oracle_impossible(c)
    agree = imp_e == imp_o and all(r["agree"] for r in rows)
    result = "AGREE" if agree else "DISAGREE"
    lines = [result, f"impossible: engine={imp_e} oracle={imp_o}"]
    for r in rows:
        mark = "ok" if r["agree"] else "MISMATCH"
        lines.append(f"{mark:<8} {','.join(r['slice'])}: engine {r['engine']} oracle {r['oracle']}")
    report = {"result": result, "impossible": {"engine": imp_e, "oracle": imp_o}, "slices": rows}
    step = engine.derivation(c, targets[0]) if args.trace and targets else None
    return "\n".join(lines), report, step


def _trace_cmd(c: Circuit, args):
    gamma = _slice(c, args.slice)
    if args.subspace is None:
        step = engine.derivation(c, gamma)
        return "", {"slice": gamma, "verified": None}, step
    p = _subspace(c, args.subspace, gamma)
    step = engine.derivation(c, gamma, p)
    if step is None:
        return "FAILS", {"slice": gamma, "verified": False}, engine.derivation(c, gamma)
    return "", {"slice": gamma, "verified": True}, step


COMMANDS = {
    "check": _check,
    "state": _state,
    "verify": _verify,
    "cond": _cond,
    "oracle": _oracle,
    "trace": _trace_cmd,
}


def run(args: argparse.Namespace, out=None) -> int:
    out = out or sys.stdout
    c = _load(args.file)
    with lat.tolerance(args.tol):
        text, report, step = COMMANDS[args.command](c, args)
        show_trace = args.trace or args.command == "trace"
        trace_text, trace_rows = _trace(c, step) if show_trace else ("", [])
    if args.json:
        report = {"command": args.command, **report}
        if show_trace:
            report["trace"] = trace_rows
        out.write(json.dumps(report, sort_keys=True, ensure_ascii=False) + "\n")
    else:
        chunks = [t for t in (text, trace_text) if t]
        out.write("\n".join(chunks) + "\n" if chunks else "")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    if not args.tol > 0:
        print(f"{parser.prog}: error: --tol must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return run(args)
    except UsageError as e:
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as e:
        print(f"{parser.prog}: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
