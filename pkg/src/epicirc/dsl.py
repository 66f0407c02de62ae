"""Plain-text circuit format (``.qc``) and subspace literals.

Circuit files hold one statement per line; ``#`` starts a comment::

    snode A1 2
    op M1: A1 -> A2 = measure span{|0>}
    op CX: B2, A2 -> B3, A3 = unitary CNOT
    op L: w1, w2 -> u1, u2 = linear [1, 0, 0, 1; 0, 1, 0, 0; 0, 0, 1, 0; 0, 0, 0, 0]

Subspace literals are ``top``, ``bot`` or ``span{v, ...}`` where each vector is
a signed sum of coefficient-ket terms such as ``1/sqrt(2)|01> - i|10>``.
Kets list one index per factor: a bare digit string (``|0110>``) or
comma-separated indices (``|0,2,1>``).  Coefficients combine real or
imaginary numbers (``2.5``, ``3i``, ``i``), ``sqrt(..)``, ``*``, ``/`` and
parentheses; write sums as ``(1+2i)|01>``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import omlattice as lat
from .circuit import Circuit, Linear, Measurement, ONode, SNode, Unitary, check
from .gates import GATES
from .omlattice import Subspace

__all__ = [
    "ParseError",
    "parse_scalar",
    "parse_subspace",
    "parse_circuit",
    "format_scalar",
    "format_subspace",
    "format_circuit",
]


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 1, col: int = 1):
        self.line, self.col = line, col
        super().__init__(f"line {line}, column {col}: {message}")


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<ket>\|[^>]*>)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|[-+*/(){}\[\],;:=])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


class _Parser:
    """Recursive-descent parser over one line of text."""

    def __init__(self, text: str, line: int = 1, col0: int = 0):
        self.text, self.line, self.col0 = text, line, col0
        self.toks: list[_Tok] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                self.fail(f"unexpected character {text[pos]!r}", pos)
            if m.lastgroup != "ws":
                self.toks.append(_Tok(m.lastgroup, m.group(), pos))
            pos = m.end()
        self.i = 0

    def fail(self, msg: str, pos: int | None = None):
        if pos is None:
            pos = self.toks[self.i].pos if self.i < len(self.toks) else len(self.text)
        raise ParseError(msg, self.line, self.col0 + pos + 1)

    def peek(self, k: int = 0) -> _Tok | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def at(self, text: str) -> bool:
        t = self.peek()
        return t is not None and t.text == text and t.kind in ("op", "name")

    def take(self, text: str | None = None, kind: str | None = None) -> _Tok:
        t = self.peek()
        if t is None:
            self.fail(f"expected {text or kind}, found end of input")
        if (text is not None and t.text != text) or (kind is not None and t.kind != kind):
            self.fail(f"expected {text or kind}, found {t.text!r}")
        self.i += 1
        return t

    def done(self) -> bool:
        return self.i >= len(self.toks)

    def expect_end(self):
        if not self.done():
            self.fail(f"unexpected {self.peek().text!r}")

    # scalar := ['+'|'-'] product (('+'|'-') product)*
    def scalar(self) -> complex:
        sign = 1
        if self.at("+") or self.at("-"):
            sign = -1 if self.take().text == "-" else 1
        value = sign * self.product()
        while self.at("+") or self.at("-"):
            sign = -1 if self.take().text == "-" else 1
            value += sign * self.product()
        return value

    def product(self) -> complex:
        value = self.factor()
        while self.at("*") or self.at("/"):
            op = self.take().text
            rhs = self.factor()
            if op == "*":
                value *= rhs
            else:
                if rhs == 0:
                    self.fail("division by zero")
                value /= rhs
        return value

    def factor(self) -> complex:
        t = self.peek()
        if t is None:
            self.fail("expected a number, found end of input")
        if t.kind == "op" and t.text in "+-":
            self.i += 1
            v = self.factor()
            return -v if t.text == "-" else v
        if t.kind == "num":
            self.i += 1
            v = float(t.text)
            nxt = self.peek()
            if nxt is not None and nxt.kind == "name" and nxt.text == "i" and nxt.pos == t.pos + len(t.text):
                self.i += 1
                return complex(0.0, v)
            return complex(v, 0.0)
        if t.kind == "name" and t.text == "i":
            self.i += 1
            return 1j
        if t.kind == "name" and t.text == "sqrt":
            self.i += 1
            self.take("(")
            v = self.scalar()
            self.take(")")
            return complex(np.sqrt(v))
        if t.text == "(":
            self.i += 1
            v = self.scalar()
            self.take(")")
            return v
        self.fail(f"expected a number, found {t.text!r}")

    def ket(self, dims: Sequence[int]) -> np.ndarray:
        t = self.take(kind="ket")
        body = t.text[1:-1].strip()
        if "," in body:
            parts = [p.strip() for p in body.split(",")]
        elif body.isdigit() and (len(dims) != 1 or dims[0] <= 10):
            # one digit per factor; a lone large factor may take a multi-digit index
            parts = list(body)
        else:
            parts = [body]
        if len(parts) != len(dims):
            self.fail(f"ket {t.text} has {len(parts)} indices for {len(dims)} factors", t.pos)
        idx = []
        for p, d in zip(parts, dims):
            if not p.isdigit():
                self.fail(f"bad ket index {p!r}", t.pos)
            if int(p) >= d:
                self.fail(f"index {p} out of range for a factor of dimension {d}", t.pos)
            idx.append(int(p))
        return lat.ket(idx, dims)

    # vector := ['+'|'-'] term (('+'|'-') term)* ; term := [product ['*']] ket
    def vector(self, dims: Sequence[int]) -> np.ndarray:
        total = np.zeros(int(np.prod(dims, dtype=np.int64)), dtype=complex)
        first = True
        while True:
            sign = 1
            if self.at("+") or self.at("-"):
                sign = -1 if self.take().text == "-" else 1
            elif not first:
                break
            coeff = 1.0
            t = self.peek()
            if t is None:
                self.fail("expected a ket, found end of input")
            if t.kind != "ket":
                coeff = self.product()
                if self.at("*"):
                    self.take("*")
            total = total + sign * coeff * self.ket(dims)
            first = False
        return total

    def subspace(self, dims: Sequence[int]) -> Subspace:
        n = int(np.prod(dims, dtype=np.int64))
        t = self.peek()
        if t is not None and t.kind == "name" and t.text in ("top", "bot"):
            self.i += 1
            return Subspace.top(n) if t.text == "top" else Subspace.bottom(n)
        self.take("span")
        self.take("{")
        vecs = []
        if not self.at("}"):
            vecs.append(self.vector(dims))
            while self.at(","):
                self.take(",")
                vecs.append(self.vector(dims))
        self.take("}")
        return lat.span(vecs, n)

    def matrix(self) -> np.ndarray:
        self.take("[")
        rows = [[self.scalar()]]
        while not self.at("]"):
            if self.at(","):
                self.take(",")
                rows[-1].append(self.scalar())
            elif self.at(";"):
                self.take(";")
                rows.append([self.scalar()])
            else:
                self.fail("expected ',', ';' or ']' in matrix")
        self.take("]")
        if len({len(r) for r in rows}) != 1:
            self.fail("matrix rows have different lengths")
        return np.array(rows, dtype=complex)

    def idlist(self) -> list[str]:
        ids = []
        if self.peek() is not None and self.peek().kind == "name":
            ids.append(self.take(kind="name").text)
            while self.at(","):
                self.take(",")
                ids.append(self.take(kind="name").text)
        return ids


def parse_scalar(text: str) -> complex:
    p = _Parser(text)
    v = p.scalar()
    p.expect_end()
    return v


def parse_subspace(text: str, dims: Sequence[int] | int) -> Subspace:
    """Parse a subspace literal over the tensor product of factors ``dims``."""
    if isinstance(dims, (int, np.integer)):
        dims = [int(dims)]
    p = _Parser(text)
    s = p.subspace(list(dims))
    p.expect_end()
    return s


def parse_circuit(text: str, validate: bool = True) -> Circuit:
    """Parse a ``.qc`` circuit; the result is validated unless ``validate`` is False."""
    snodes: list[SNode] = []
    dims: dict[str, int] = {}
    pending = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        p = _Parser(line, lineno)
        head = p.take(kind="name")
        if head.text == "snode":
            sid = p.take(kind="name").text
            d = p.take(kind="num")
            if not d.text.isdigit() or int(d.text) < 1:
                p.fail(f"s-node dimension must be a positive integer, got {d.text}", d.pos)
            p.expect_end()
            snodes.append(SNode(sid, int(d.text)))
            dims.setdefault(sid, int(d.text))
        elif head.text == "op":
            oid = p.take(kind="name").text
            p.take(":")
            ins = p.idlist()
            p.take("->")
            outs = p.idlist()
            p.take("=")
            pending.append((p, oid, ins, outs))
        else:
            p.fail(f"expected 'snode' or 'op', found {head.text!r}", head.pos)

    onodes = []
    for p, oid, ins, outs in pending:
        kind = p.take(kind="name")
        if kind.text == "measure":
            for s in ins:
                if s not in dims:
                    p.fail(f"undeclared s-node {s!r}", kind.pos)
            payload = Measurement(p.subspace([dims[s] for s in ins]))
        elif kind.text == "unitary":
            if p.at("["):
                payload = Unitary(p.matrix())
            else:
                name = p.take(kind="name")
                if name.text not in GATES:
                    p.fail(f"unknown gate {name.text!r}", name.pos)
                payload = Unitary(GATES[name.text], name.text)
        elif kind.text == "linear":
            payload = Linear(p.matrix())
        else:
            p.fail(f"expected 'measure', 'unitary' or 'linear', found {kind.text!r}", kind.pos)
        p.expect_end()
        onodes.append(ONode(oid, tuple(ins), tuple(outs), payload))

    c = Circuit(snodes, onodes)
    return check(c) if validate else c


# -- printing --------------------------------------------------------------


def _real(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def format_scalar(z: complex) -> str:
    """Shortest literal that parses back to exactly ``z``."""
    re_, im = float(np.real(z)), float(np.imag(z))
    if im == 0:
        return _real(re_)
    if re_ == 0:
        return {1.0: "i", -1.0: "-i"}.get(im, f"{_real(im)}i")
    sign = "-" if im < 0 else "+"
    return f"({_real(re_)}{sign}{_real(abs(im))}i)"


def _format_ket(index: int, dims: Sequence[int]) -> str:
    idx = np.unravel_index(index, tuple(dims))
    if all(d == 2 for d in dims):
        return "|" + "".join(str(int(i)) for i in idx) + ">"
    return "|" + ",".join(str(int(i)) for i in idx) + ">"


def _format_vector(v: np.ndarray, dims: Sequence[int]) -> str:
    parts = []
    for index in np.flatnonzero(v):
        z = complex(v[index])
        k = _format_ket(index, dims)
        neg = z.real < 0 or (z.real == 0 and z.imag < 0)
        lit = format_scalar(-z if neg else z)
        term = k if lit == "1" else f"{lit}{k}"
        if not parts:
            parts.append(f"-{term}" if neg else term)
        else:
            parts.append(f"- {term}" if neg else f"+ {term}")
    return " ".join(parts) if parts else "0|" + ",".join("0" for _ in dims) + ">"


def format_subspace(s: Subspace, dims: Sequence[int] | None = None, digits: int | None = None) -> str:
    """Subspace literal for ``s``.

    With ``digits`` the basis is first brought to reduced row echelon form
    (pivots equal to 1) and coefficients are rounded, which gives a canonical,
    readable literal; without it the orthonormal basis is printed exactly.
    """
    if s.is_bottom():
        return "bot"
    if s.is_top():
        return "top"
    dims = list(dims) if dims is not None else [s.ambient_dim]
    rows = s.basis.T
    if digits is not None:
        rows = _rref(rows)
        rows = np.round(rows.real, digits) + 1j * np.round(rows.imag, digits) + 0.0
    return "span{" + ", ".join(_format_vector(v, dims) for v in rows) + "}"


def _rref(rows: np.ndarray) -> np.ndarray:
    m = np.array(rows, dtype=complex)
    tol = lat.tol_rank()
    r = 0
    for col in range(m.shape[1]):
        if r == m.shape[0]:
            break
        piv = r + int(np.argmax(np.abs(m[r:, col])))
        if abs(m[piv, col]) <= tol:
            continue
        m[[r, piv]] = m[[piv, r]]
        m[r] /= m[r, col]
        for i in range(m.shape[0]):
            if i != r:
                m[i] -= m[i, col] * m[r]
        r += 1
    return m[:r]


def format_circuit(c: Circuit) -> str:
    lines = [f"snode {s.id} {s.dim}" for s in c.snodes]
    for o in c.onodes:
        head = f"op {o.id}: {', '.join(o.inputs)} -> {', '.join(o.outputs)} = "
        p = o.payload
        if isinstance(p, Measurement):
            body = "measure " + format_subspace(p.outcome, c.dims(o.inputs))
        elif isinstance(p, Unitary) and p.name in GATES:
            body = f"unitary {p.name}"
        elif isinstance(p, Unitary):
            body = "unitary " + _format_matrix(p.matrix)
        else:
            body = "linear " + _format_matrix(p.matrix)
        lines.append(head + body)
    return "\n".join(lines) + "\n"


def _format_matrix(m: np.ndarray) -> str:
    return "[" + "; ".join(", ".join(format_scalar(z) for z in row) for row in m) + "]"
