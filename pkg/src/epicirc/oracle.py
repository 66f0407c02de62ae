"""Reference semantics by direct operator composition.

The oracle builds one matrix from the joint space of the strong past's sources
to the queried slice: projectors for measurements, the matrices themselves for
unitary and linear o-nodes, identity padding, and explicit permutation
matrices for wire reordering.  It never touches the lattice operations the
engine is built from, only :func:`span` to read off a column space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import (
    Circuit,
    CircuitError,
    Linear,
    Measurement,
    ONode,
    SNode,
    Unitary,
    check,
    is_slice,
    strong_past_circuit,
)
from .gates import GATES
from .omlattice import Subspace, span, tol_rank

__all__ = [
    "ComposedOperator",
    "composed_operator",
    "composed_image",
    "oracle_verifies",
    "oracle_impossible",
    "random_circuit",
]


@dataclass(frozen=True, eq=False)
class ComposedOperator:
    matrix: np.ndarray
    source_order: tuple[str, ...]
    target_order: tuple[str, ...]


def wire_permutation(dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Permutation matrix sending factor ``order[i]`` of the input to position ``i``."""
    dims = list(dims)
    if not dims:
        return np.eye(1)
    n = int(np.prod(dims, dtype=np.int64))
    # old flat index sitting at each new flat position
    old = np.arange(n).reshape(dims).transpose(list(order)).ravel()
    perm = np.zeros((n, n))
    perm[np.arange(n), old] = 1.0
    return perm


def _operator(o: ONode) -> np.ndarray:
    p = o.payload
    if isinstance(p, Measurement):
        b = p.outcome.basis
        return b @ b.conj().T
    if isinstance(p, (Unitary, Linear)):
        return np.asarray(p.matrix)
    raise CircuitError(f"{o.id}: unsupported payload {type(p).__name__}")


def _compose(c: Circuit, target: Sequence[str] | None, stop_at_zero: bool):
    sources = c.sources()
    live = list(sources)
    m = np.eye(c.slice_dim(sources), dtype=complex)
    for oid in c.topological_onodes:
        o = c.onode(oid)
        pos = [live.index(s) for s in o.inputs]
        rest = [j for j in range(len(live)) if j not in pos]
        m = wire_permutation(c.dims(live), pos + rest) @ m
        rest_ids = [live[j] for j in rest]
        op = np.kron(_operator(o), np.eye(c.slice_dim(rest_ids)))
        m = op @ m
        live = list(o.outputs) + rest_ids
        if stop_at_zero and np.linalg.norm(m) <= tol_rank():
            return None, live
    if target is not None:
        m = wire_permutation(c.dims(live), [live.index(s) for s in target]) @ m
        live = list(target)
    return m, live


def composed_operator(c: Circuit, gamma: Sequence[str]) -> ComposedOperator:
    gamma = list(gamma)
    if not is_slice(c, gamma):
        raise CircuitError(f"{gamma} is not a slice")
    sub = strong_past_circuit(c, gamma)
    m, _ = _compose(sub, gamma, stop_at_zero=False)
    return ComposedOperator(m, tuple(sub.sources()), tuple(gamma))


def composed_image(c: Circuit, gamma: Sequence[str]) -> Subspace:
    """Column space of the composed operator onto ``gamma``."""
    return span(composed_operator(c, gamma).matrix)


def oracle_verifies(c: Circuit, gamma: Sequence[str], p: Subspace) -> bool:
    image = composed_image(c, gamma).basis
    if p.ambient_dim != image.shape[0]:
        raise ValueError(f"subspace lives in C^{p.ambient_dim}, slice has dimension {image.shape[0]}")
    b = p.basis
    residual = image - b @ (b.conj().T @ image)
    return residual.size == 0 or bool(np.max(np.linalg.norm(residual, axis=0)) <= tol_rank())


def oracle_impossible(c: Circuit) -> bool:
    """Some step of the whole-circuit composition is the zero map."""
    check(c)
    m, _ = _compose(c, None, stop_at_zero=True)
    return m is None


# -- random circuits -------------------------------------------------------

_S = 1 / np.sqrt(2)
_QUBIT_BASES = [
    [np.array([1, 0]), np.array([0, 1])],
    [np.array([_S, _S]), np.array([_S, -_S])],
    [np.array([_S, 1j * _S]), np.array([_S, -1j * _S])],
]
_PAIR_BASES = [
    [np.eye(4)[j] for j in range(4)],
    [
        np.array([_S, 0, 0, _S]),
        np.array([_S, 0, 0, -_S]),
        np.array([0, _S, _S, 0]),
        np.array([0, _S, -_S, 0]),
    ],
]


def _haar_basis(rng: np.random.Generator, n: int) -> list[np.ndarray]:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return [q[:, j] for j in range(n)]


def random_circuit(seed: int, max_qubits: int = 3, max_ops: int = 8) -> Circuit:
    """Deterministic random qubit circuit over H, X, CNOT and fixed-outcome measurements.

    Measurement outcomes are rank 1 on one qubit, rank 1 or 2 on two qubits,
    drawn from computational, conjugate and Bell bases (or a Haar-random basis
    a quarter of the time), so impossible outcome sequences occur regularly.
    """
    if not 1 <= max_qubits <= 3:
        raise ValueError("max_qubits must lie in 1..3")
    rng = np.random.default_rng(seed)
    nq = int(rng.integers(min(2, max_qubits), max_qubits + 1))
    nops = int(rng.integers(1, max_ops + 1))
    stage = [0] * nq
    snodes = [SNode(f"q{w}_0", 2) for w in range(nq)]
    onodes = []

    def advance(wires):
        ins, outs = [], []
        for w in wires:
            ins.append(f"q{w}_{stage[w]}")
            stage[w] += 1
            outs.append(f"q{w}_{stage[w]}")
            snodes.append(SNode(outs[-1], 2))
        return ins, outs

    for k in range(nops):
        kinds = ["H", "X", "M1"] + (["CNOT", "M2"] if nq >= 2 else [])
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind in ("H", "X", "M1"):
            wires = [int(rng.integers(nq))]
        else:
            wires = [int(w) for w in rng.choice(nq, size=2, replace=False)]
        ins, outs = advance(wires)
        if kind in ("H", "X", "CNOT"):
            payload = Unitary(GATES[kind], kind)
        else:
            n = 2 if kind == "M1" else 4
            if rng.random() < 0.25:
                basis = _haar_basis(rng, n)
            else:
                pool = _QUBIT_BASES if n == 2 else _PAIR_BASES
                basis = pool[int(rng.integers(len(pool)))]
            rank = 1 if n == 2 else int(rng.integers(1, 3))
            picks = rng.choice(n, size=rank, replace=False)
            payload = Measurement(span([basis[int(j)] for j in picks], n))
        onodes.append(ONode(f"o{k}", tuple(ins), tuple(outs), payload))
    return check(Circuit(snodes, onodes))
