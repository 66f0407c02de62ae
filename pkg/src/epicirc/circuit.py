"""Circuit graphs: s-nodes (subsystems), o-nodes (operations) and their order.

A circuit is bipartite by construction: arrows are read off each o-node's
ordered ``inputs`` and ``outputs`` lists.  Construction never fails on
structural problems so that :func:`validate` can report them; use
:func:`check` (or the DSL parser) to get a circuit known to be well formed.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .omlattice import TOL_MATRIX, Subspace

__all__ = [
    "SNode",
    "ONode",
    "Unitary",
    "Measurement",
    "Linear",
    "Circuit",
    "CircuitError",
    "Violation",
    "validate",
    "check",
    "precedes",
    "is_slice",
    "cut",
    "is_full_subgraph",
    "strong_past",
    "strong_past_circuit",
    "slices",
    "maximal_slices",
]


@dataclass(frozen=True)
class SNode:
    id: str
    dim: int


def _matrix_eq(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and bool(np.allclose(a, b, rtol=0, atol=TOL_MATRIX))


def _frozen_matrix(m) -> np.ndarray:
    m = np.array(m, dtype=complex)
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class Unitary:
    """A unitary o-node; ``name`` is a display label ignored by equality."""

    matrix: np.ndarray
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen_matrix(self.matrix))

    def __eq__(self, other):
        if not isinstance(other, Unitary):
            return NotImplemented
        return _matrix_eq(self.matrix, other.matrix)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Linear:
    """An arbitrary linear map; not part of the unitary/projection o-node grammar."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen_matrix(self.matrix))

    def __eq__(self, other):
        if not isinstance(other, Linear):
            return NotImplemented
        return _matrix_eq(self.matrix, other.matrix)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Measurement:
    """Projective measurement with the recorded outcome ``outcome``."""

    outcome: Subspace

    def __eq__(self, other):
        if not isinstance(other, Measurement):
            return NotImplemented
        return (
            self.outcome.ambient_dim == other.outcome.ambient_dim
            and self.outcome == other.outcome
        )

    __hash__ = None


Payload = Union[Unitary, Measurement, Linear]


@dataclass(frozen=True)
class ONode:
    id: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    payload: Payload

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))


@dataclass(frozen=True)
class Violation:
    node: str
    rule: str
    message: str

    def __str__(self):
        return f"{self.node}: {self.rule}: {self.message}"


class CircuitError(ValueError):
    def __init__(self, violations: Sequence[Violation] | str):
        if isinstance(violations, str):
            self.violations: tuple[Violation, ...] = ()
            super().__init__(violations)
        else:
            self.violations = tuple(violations)
            super().__init__("; ".join(str(v) for v in self.violations))


class Circuit:
    """Immutable bipartite graph of s-nodes and o-nodes."""

    def __init__(self, snodes: Iterable[SNode] = (), onodes: Iterable[ONode] = ()):
        self._snode_list = tuple(snodes)
        self._onode_list = tuple(onodes)
        self._snodes = {s.id: s for s in self._snode_list}
        self._onodes = {o.id: o for o in self._onode_list}
        self._producers: dict[str, list[str]] = {s: [] for s in self._snodes}
        self._consumers: dict[str, list[str]] = {s: [] for s in self._snodes}
        for o in self._onode_list:
            for s in o.inputs:
                self._consumers.setdefault(s, []).append(o.id)
            for s in o.outputs:
                self._producers.setdefault(s, []).append(o.id)
        self._desc_cache: dict[str, frozenset[str]] = {}

    # -- structure -------------------------------------------------------

    @property
    def snodes(self) -> tuple[SNode, ...]:
        return tuple(self._snodes.values())

    @property
    def onodes(self) -> tuple[ONode, ...]:
        return tuple(self._onodes.values())

    def snode(self, sid: str) -> SNode:
        try:
            return self._snodes[sid]
        except KeyError:
            raise KeyError(f"unknown s-node {sid!r}") from None

    def onode(self, oid: str) -> ONode:
        try:
            return self._onodes[oid]
        except KeyError:
            raise KeyError(f"unknown o-node {oid!r}") from None

    def is_snode(self, nid: str) -> bool:
        return nid in self._snodes

    def __contains__(self, nid: str) -> bool:
        return nid in self._snodes or nid in self._onodes

    def dim(self, sid: str) -> int:
        return self.snode(sid).dim

    def dims(self, nodes: Sequence[str]) -> list[int]:
        return [self.dim(s) for s in nodes]

    def slice_dim(self, nodes: Sequence[str]) -> int:
        return int(np.prod(self.dims(nodes), dtype=np.int64))

    def producer(self, sid: str) -> ONode | None:
        ids = self._producers.get(sid, [])
        return self._onodes[ids[0]] if ids else None

    def consumer(self, sid: str) -> ONode | None:
        ids = self._consumers.get(sid, [])
        return self._onodes[ids[0]] if ids else None

    def sources(self) -> list[str]:
        return sorted(s for s in self._snodes if not self._producers[s])

    def sinks(self) -> list[str]:
        return sorted(s for s in self._snodes if not self._consumers[s])

    def successors(self, nid: str) -> list[str]:
        if nid in self._snodes:
            return list(self._consumers.get(nid, []))
        return [s for s in self._onodes[nid].outputs]

    def descendants(self, nid: str) -> frozenset[str]:
        """All nodes reachable from ``nid`` by a non-empty arrow path."""
        if nid not in self:
            raise KeyError(f"unknown node {nid!r}")
        cached = self._desc_cache.get(nid)
        if cached is not None:
            return cached
        seen: set[str] = set()
        stack = list(self.successors(nid))
        while stack:
            m = stack.pop()
            if m in seen or m not in self:
                continue
            seen.add(m)
            stack.extend(self.successors(m))
        out = frozenset(seen)
        self._desc_cache[nid] = out
        return out

    @cached_property
    def topological_onodes(self) -> tuple[str, ...]:
        """O-nodes in dependency order, ties broken by id."""
        deps: dict[str, set[str]] = {o: set() for o in self._onodes}
        users: dict[str, set[str]] = {o: set() for o in self._onodes}
        for o in self._onode_list:
            for s in o.inputs:
                for p in self._producers.get(s, []):
                    deps[o.id].add(p)
                    users[p].add(o.id)
        heap = [o for o, d in deps.items() if not d]
        heapq.heapify(heap)
        order = []
        while heap:
            o = heapq.heappop(heap)
            order.append(o)
            for u in users[o]:
                deps[u].discard(o)
                if not deps[u]:
                    heapq.heappush(heap, u)
        if len(order) != len(self._onodes):
            raise CircuitError("circuit has a directed cycle")
        return tuple(order)

    # -- derived circuits ------------------------------------------------

    def extended(self, snodes: Iterable[SNode] = (), onodes: Iterable[ONode] = ()) -> Circuit:
        return Circuit(self._snode_list + tuple(snodes), self._onode_list + tuple(onodes))

    def restricted(self, node_ids: Iterable[str]) -> Circuit:
        keep = set(node_ids)
        return Circuit(
            [s for s in self._snode_list if s.id in keep],
            [o for o in self._onode_list if o.id in keep],
        )

    def __eq__(self, other):
        if not isinstance(other, Circuit):
            return NotImplemented
        if set(self._snodes) != set(other._snodes) or set(self._onodes) != set(other._onodes):
            return False
        if any(self._snodes[s] != other._snodes[s] for s in self._snodes):
            return False
        return all(self._onodes[o] == other._onodes[o] for o in self._onodes)

    __hash__ = None

    def __repr__(self):
        return f"<Circuit {len(self._snodes)} s-nodes, {len(self._onodes)} o-nodes>"


# -- validation ----------------------------------------------------------


def validate(c: Circuit) -> list[Violation]:
    """Structural problems of ``c``; an empty list means the circuit is well formed."""
    out: list[Violation] = []
    seen: set[str] = set()
    for s in c._snode_list:
        if s.id in seen:
            out.append(Violation(s.id, "duplicate id", "s-node declared twice"))
        seen.add(s.id)
        if not isinstance(s.dim, (int, np.integer)) or s.dim < 1:
            out.append(Violation(s.id, "s-node dimension", f"dimension {s.dim!r} is not a positive integer"))
    for o in c._onode_list:
        if o.id in seen:
            out.append(Violation(o.id, "duplicate id", "id already used"))
        seen.add(o.id)

    for sid in sorted(set(c._producers) | set(c._consumers)):
        if len(c._producers.get(sid, [])) > 1:
            out.append(Violation(sid, "s-node in-degree", f"produced by {', '.join(c._producers[sid])}"))
        if len(c._consumers.get(sid, [])) > 1:
            out.append(Violation(sid, "s-node out-degree", f"consumed by {', '.join(c._consumers[sid])}"))

    for o in c._onode_list:
        out.extend(_check_onode(c, o))

    if not any(v.rule in ("unknown node",) for v in out):
        try:
            c.topological_onodes
        except CircuitError:
            out.append(Violation("*", "cycle", "arrows form a directed cycle"))
    return out


def _check_onode(c: Circuit, o: ONode) -> list[Violation]:
    out = []
    for s in o.inputs + o.outputs:
        if s not in c._snodes:
            rule = "unknown node" if s not in c._onodes else "bipartite"
            out.append(Violation(o.id, rule, f"{s!r} is not a declared s-node"))
    for lst, what in ((o.inputs, "inputs"), (o.outputs, "outputs")):
        if len(set(lst)) != len(lst):
            out.append(Violation(o.id, "duplicate wire", f"repeated s-node in {what}"))
    if set(o.inputs) & set(o.outputs):
        out.append(Violation(o.id, "cycle", "an s-node is both input and output"))
    if out:
        return out

    d_in = c.slice_dim(o.inputs)
    d_out = c.slice_dim(o.outputs)
    p = o.payload
    if isinstance(p, Measurement):
        if c.dims(o.inputs) != c.dims(o.outputs):
            out.append(Violation(o.id, "measurement dims", "inputs and outputs must match one to one"))
        if p.outcome.ambient_dim != d_in:
            out.append(Violation(o.id, "payload shape", f"outcome lives in C^{p.outcome.ambient_dim}, inputs span C^{d_in}"))
        elif p.outcome.is_bottom():
            out.append(Violation(o.id, "bottom outcome", "the null subspace is not a measurement outcome"))
    elif isinstance(p, (Unitary, Linear)):
        m = p.matrix
        if m.ndim != 2 or m.shape != (d_out, d_in):
            out.append(Violation(o.id, "payload shape", f"matrix is {m.shape}, expected {(d_out, d_in)}"))
        elif isinstance(p, Unitary):
            err = np.linalg.norm(m.conj().T @ m - np.eye(d_in))
            if d_in != d_out or err > TOL_MATRIX:
                out.append(Violation(o.id, "unitarity", f"||U*U - I|| = {err:.3g}"))
    else:
        out.append(Violation(o.id, "payload", f"unsupported payload {type(p).__name__}"))
    return out


def check(c: Circuit) -> Circuit:
    violations = validate(c)
    if violations:
        raise CircuitError(violations)
    return c


# -- order and slices ----------------------------------------------------


def precedes(c: Circuit, a: str, b: str) -> bool:
    """``a`` lies in the strict past of ``b``."""
    if b not in c:
        raise KeyError(f"unknown node {b!r}")
    return b in c.descendants(a)


def _require_snodes(c: Circuit, nodes: Sequence[str]) -> None:
    for s in nodes:
        if not c.is_snode(s):
            raise KeyError(f"{s!r} is not an s-node of the circuit")


def is_slice(c: Circuit, nodes: Sequence[str]) -> bool:
    _require_snodes(c, nodes)
    if len(set(nodes)) != len(nodes):
        return False
    for i, a in enumerate(nodes):
        da = c.descendants(a)
        for b in nodes[i + 1:]:
            if b in da or a in c.descendants(b):
                return False
    return True


def _require_slice(c: Circuit, nodes: Sequence[str]) -> None:
    if not is_slice(c, nodes):
        raise CircuitError(f"{list(nodes)} is not a slice: its s-nodes are not pairwise incomparable")


def cut(c: Circuit, gamma: Sequence[str]) -> Circuit:
    """Remove every node in the strict future of ``gamma``."""
    _require_slice(c, gamma)
    future: set[str] = set()
    for g in gamma:
        future |= c.descendants(g)
    return c.restricted(n for n in list(c._snodes) + list(c._onodes) if n not in future)


def is_full_subgraph(sub: Circuit, sup: Circuit) -> bool:
    for s in sub.snodes:
        if s.id not in sup._snodes or sup._snodes[s.id] != s:
            return False
    for o in sub.onodes:
        if o.id not in sup._onodes or sup._onodes[o.id] != o:
            return False
    nodes = [s.id for s in sub.snodes] + [o.id for o in sub.onodes]
    for a in nodes:
        da_sub, da_sup = sub.descendants(a), sup.descendants(a)
        for b in nodes:
            if (b in da_sub) != (b in da_sup):
                return False
    return True


def strong_past(c: Circuit, gamma: Sequence[str]) -> set[str]:
    """S-nodes every maximal outgoing path of which meets ``gamma``.

    Members of ``gamma`` belong to it; sinks outside ``gamma`` never do.
    """
    _require_slice(c, gamma)
    target = set(gamma)
    memo: dict[str, bool] = {}

    def inside(s: str) -> bool:
        if s in memo:
            return memo[s]
        if s in target:
            res = True
        else:
            o = c.consumer(s)
            res = o is not None and bool(o.outputs) and all(inside(t) for t in o.outputs)
        memo[s] = res
        return res

    return {s for s in c._snodes if inside(s)}


def strong_past_circuit(c: Circuit, gamma: Sequence[str]) -> Circuit:
    """Sub-circuit induced by the strong past, plus o-nodes whose outputs all lie in it."""
    past = strong_past(c, gamma)
    ops = [o.id for o in c.onodes if o.outputs and set(o.outputs) <= past and set(o.inputs) <= past]
    return c.restricted(list(past) + ops)


def _comparability(c: Circuit) -> tuple[list[str], list[int]]:
    ids = sorted(c._snodes)
    index = {s: i for i, s in enumerate(ids)}
    masks = [1 << i for i in range(len(ids))]
    for s in ids:
        for d in c.descendants(s):
            if d in index:
                masks[index[s]] |= 1 << index[d]
                masks[index[d]] |= 1 << index[s]
    return ids, masks


def slices(c: Circuit) -> Iterator[tuple[str, ...]]:
    """Every non-empty slice as an id-sorted tuple."""
    ids, masks = _comparability(c)
    n = len(ids)

    def grow(chosen: list[int], allowed: int, start: int):
        for i in range(start, n):
            if allowed >> i & 1:
                chosen.append(i)
                yield tuple(ids[j] for j in chosen)
                yield from grow(chosen, allowed & ~masks[i], i + 1)
                chosen.pop()

    yield from grow([], (1 << n) - 1, 0)


def maximal_slices(c: Circuit) -> list[tuple[str, ...]]:
    ids, masks = _comparability(c)
    index = {s: i for i, s in enumerate(ids)}
    full = (1 << len(ids)) - 1
    out = []
    for sl in slices(c):
        covered = 0
        for s in sl:
            covered |= masks[index[s]]
        if covered == full:
            out.append(sl)
    return out
