"""Epistemic states of slices by frontier propagation.

The frontier is an ordered list of live s-nodes together with the least
subspace verified there.  Each propagation step is one rule of the logic:

* ``Top``  - a first source enters with the full space,
* ``Tens`` - a further source is adjoined as a ``⊤`` factor,
* ``Swap`` - a block swap reorders the frontier,
* ``Uni``  - a unitary (or linear) o-node maps the state by ``A ⊗ Id``,
* ``Sas``  - a measurement o-node takes the Sasaki projection onto ``p ⊗ ⊤``,
* ``Ord``  - a query subspace above the state is verified.

Because each measurement step replaces the state by its Sasaki projection, the
frontier state is the epistemic state of the frontier slice; restricting to
the strong past first makes the final frontier exactly the queried slice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import omlattice as lat
from .circuit import (
    Circuit,
    CircuitError,
    Linear,
    Measurement,
    ONode,
    Unitary,
    check,
    is_slice,
    strong_past_circuit,
)
from .omlattice import Subspace

__all__ = [
    "RULES",
    "Step",
    "FrontierState",
    "propagate",
    "epistemic_state",
    "derivation",
    "verifies",
    "verifies_at",
    "conditional_state",
    "find_impossibility",
    "is_impossible",
    "DerivedRulesReport",
    "check_derived_rules",
]

RULES = ("Top", "Ord", "Meet", "Swap", "Sas", "Uni", "Tens")


@dataclass(frozen=True, eq=False)
class Step:
    """One rule application; ``premises`` are the steps it was derived from."""

    rule: str
    order: tuple[str, ...]
    state: Subspace
    premises: tuple[Step, ...] = ()
    note: str = ""
    dims: tuple[int, ...] = ()

    def walk(self) -> Iterator[Step]:
        """Premises before conclusions."""
        stack: list[tuple[Step, bool]] = [(self, False)]
        while stack:
            step, done = stack.pop()
            if done:
                yield step
                continue
            stack.append((step, True))
            for p in reversed(step.premises):
                stack.append((p, False))

    def to_text(self, fmt=None) -> str:
        fmt = fmt or _default_fmt
        lines = []
        for s in self.walk():
            note = f"    [{s.note}]" if s.note else ""
            lines.append(f"{s.rule:<4} {','.join(s.order) or '()'} ⊨ {fmt(s.state, s.dims)}{note}")
        return "\n".join(lines)

    def to_dict(self, fmt=None) -> list[dict]:
        fmt = fmt or _default_fmt
        return [
            {"rule": s.rule, "slice": list(s.order), "state": fmt(s.state, s.dims), "note": s.note}
            for s in self.walk()
        ]


def _default_fmt(state: Subspace, dims) -> str:
    from .dsl import format_subspace

    return format_subspace(state, dims or None)


@dataclass(frozen=True)
class FrontierState:
    order: tuple[str, ...]
    state: Subspace


@dataclass
class _Frontier:
    circuit: Circuit
    tracing: bool = False
    order: list[str] = field(default_factory=list)
    state: Subspace = field(default_factory=lambda: Subspace.top(1))
    step: Step | None = None

    def _record(self, rule: str, note: str = "") -> None:
        if self.tracing:
            premises = (self.step,) if self.step is not None else ()
            dims = tuple(self.circuit.dims(self.order))
            self.step = Step(rule, tuple(self.order), self.state, premises, note, dims)

    def snapshot(self) -> FrontierState:
        return FrontierState(tuple(self.order), self.state)

    def start(self) -> None:
        self._record("Top")

    def adjoin(self, sid: str) -> None:
        empty = not self.order
        self.state = lat.tensor(self.state, Subspace.top(self.circuit.dim(sid)))
        self.order.append(sid)
        if empty and self.tracing and self.step is not None and not self.step.order:
            # the empty-slice Top step is subsumed by Top on the first source
            self.step = None
            self._record("Top")
        else:
            self._record("Tens", sid)

    def to_front(self, sid: str) -> None:
        j = self.order.index(sid)
        if j == 0:
            return
        dims = self.circuit.dims(self.order)
        d_before = int(np.prod(dims[:j], dtype=np.int64))
        d_after = int(np.prod(dims[j + 1:], dtype=np.int64))
        self.state = lat.swap_blocks(self.state, d_before, dims[j], d_after)
        self.order = [sid] + self.order[:j] + self.order[j + 1:]
        self._record("Swap", sid)

    def arrange(self, front: Sequence[str]) -> None:
        if self.order[: len(front)] == list(front):
            return
        for sid in reversed(front):
            self.to_front(sid)

    def apply(self, o: ONode) -> None:
        self.arrange(o.inputs)
        k = len(o.inputs)
        d_rest = self.circuit.slice_dim(self.order[k:])
        p = o.payload
        if isinstance(p, Measurement):
            self.state = lat.sasaki(self.state, lat.tensor(p.outcome, Subspace.top(d_rest)))
            rule = "Sas"
        elif isinstance(p, (Unitary, Linear)):
            self.state = lat.apply_left(p.matrix, self.state, d_rest)
            rule = "Uni"
        else:
            raise CircuitError(f"{o.id}: unsupported payload {type(p).__name__}")
        self.order = list(o.outputs) + self.order[k:]
        self._record(rule, o.id if not isinstance(p, Linear) else f"{o.id} (linear)")


def propagate(c: Circuit, trace: bool = False) -> Iterator[tuple[ONode | None, _Frontier]]:
    """Run every o-node of ``c`` in topological order from ⊤ on all sources.

    Yields ``(onode, frontier)`` after each o-node, then ``(None, frontier)``
    once the untouched sources have been adjoined.
    """
    fr = _Frontier(c, tracing=trace)
    fr.start()
    live = set()
    for oid in c.topological_onodes:
        o = c.onode(oid)
        for s in o.inputs:
            if s not in live and c.producer(s) is None:
                fr.adjoin(s)
                live.add(s)
        fr.apply(o)
        live.update(o.outputs)
        yield o, fr
    for s in c.sources():
        if s not in live:
            fr.adjoin(s)
            live.add(s)
    yield None, fr


def _run(c: Circuit, gamma: Sequence[str], trace: bool) -> _Frontier:
    gamma = list(gamma)
    if not is_slice(c, gamma):
        raise CircuitError(f"{gamma} is not a slice")
    sub = strong_past_circuit(c, gamma)
    fr = None
    for _, fr in propagate(sub, trace=trace):
        pass
    if set(fr.order) != set(gamma):
        raise CircuitError(f"frontier {fr.order} does not match slice {gamma}")
    fr.arrange(gamma)
    return fr


def epistemic_state(c: Circuit, gamma: Sequence[str]) -> Subspace:
    """Least subspace verified by ``c`` at the slice ``gamma``."""
    return _run(c, gamma, trace=False).state


def derivation(c: Circuit, gamma: Sequence[str], p: Subspace | None = None) -> Step | None:
    """Rule tree deriving ``gamma ⊨ p`` (or the epistemic state when ``p`` is None).

    Returns None when ``p`` is not verified.
    """
    fr = _run(c, gamma, trace=True)
    if p is None:
        return fr.step
    if not lat.leq(fr.state, p):
        return None
    return Step("Ord", tuple(gamma), p, (fr.step,), dims=tuple(c.dims(gamma)))


def _check_query(c: Circuit, gamma: Sequence[str], p: Subspace) -> None:
    d = c.slice_dim(gamma)
    if p.ambient_dim != d:
        raise lat.DimensionError(f"subspace lives in C^{p.ambient_dim}, slice has dimension {d}")


def verifies(c: Circuit, gamma: Sequence[str], p: Subspace) -> bool:
    _check_query(c, gamma, p)
    return lat.leq(epistemic_state(c, gamma), p)


def verifies_at(c: Circuit, gamma: Sequence[str], p: Subspace, delta: Sequence[str]) -> bool:
    """``gamma ⊨ p @ delta``: the slice gamma::delta verifies p ⊗ ⊤."""
    _check_query(c, gamma, p)
    padded = lat.tensor(p, Subspace.top(c.slice_dim(delta)))
    return verifies(c, list(gamma) + list(delta), padded)


def conditional_state(c: Circuit, gamma: Sequence[str], delta: Sequence[str]) -> Subspace:
    k = epistemic_state(c, list(gamma) + list(delta))
    return lat.minimal_left_factor(k, c.slice_dim(gamma), c.slice_dim(delta))


def find_impossibility(c: Circuit) -> tuple[str, ...] | None:
    """Frontier slice at which whole-circuit propagation first reaches ⊥, if any."""
    check(c)
    for _, fr in propagate(c):
        if fr.state.is_bottom():
            return tuple(fr.order)
    return None


def is_impossible(c: Circuit) -> bool:
    return find_impossibility(c) is not None


@dataclass
class DerivedRulesReport:
    checked: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> str:
        return json.dumps({"checked": self.checked, "violations": self.violations}, sort_keys=True)


def check_derived_rules(c: Circuit, step_identity: bool = True) -> DerivedRulesReport:
    """Check the rules the propagation makes redundant at every measurement.

    For each measurement ``Γ' = Mes_p(Γ)`` met during whole-circuit propagation,
    with ``Δ`` the rest of the frontier and ``k`` the state at ``Γ::Δ``:

    * non contradiction: the new state lies below ``p ⊗ ⊤``;
    * compatible preservation and meet: when ``k`` and ``p ⊗ ⊤`` commute the
      new state is their meet;
    * measurement step identity: the new state equals the epistemic state of
      ``Γ'::Δ`` computed from scratch (skipped with ``step_identity=False``).
    """
    check(c)
    report = DerivedRulesReport()
    fr = _Frontier(c)
    live: set[str] = set()
    for oid in c.topological_onodes:
        o = c.onode(oid)
        for s in o.inputs:
            if s not in live and c.producer(s) is None:
                fr.adjoin(s)
                live.add(s)
        fr.arrange(o.inputs)
        before = fr.state
        before_order = list(fr.order)
        fr.apply(o)
        live.update(o.outputs)
        if not isinstance(o.payload, Measurement):
            continue
        report.checked += 1
        after = fr.state
        q = lat.tensor(o.payload.outcome, Subspace.top(c.slice_dim(before_order[len(o.inputs):])))
        if not lat.leq(after, q):
            report.violations.append(f"{o.id}: NC fails, state not below the outcome")
        if lat.compatible(before, q) and not lat.equals(after, lat.meet(before, q)):
            report.violations.append(f"{o.id}: CP/CM fails, compatible case differs from the meet")
        if step_identity:
            fresh = epistemic_state(c, fr.order)
            if not lat.equals(fresh, after):
                report.violations.append(f"{o.id}: measurement step identity fails at {fr.order}")
            if not lat.equals(epistemic_state(c, before_order), before):
                report.violations.append(f"{o.id}: state before the measurement differs at {before_order}")
    return report
