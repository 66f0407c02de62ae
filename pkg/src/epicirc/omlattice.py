"""Subspace lattice L_n of C^n.

Subspaces are stored as orthonormal bases (``n x k`` complex arrays); projectors
are derived on demand.  Every rank and membership decision goes through
:func:`span`, which applies the absolute tolerance returned by :func:`tol_rank`.
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DimensionError",
    "Subspace",
    "Observable",
    "TOL_RANK",
    "TOL_MATRIX",
    "tol_rank",
    "tolerance",
    "span",
    "leq",
    "equals",
    "distance",
    "complement",
    "meet",
    "join",
    "sasaki",
    "compatible",
    "tensor",
    "tensor_all",
    "swap_blocks",
    "apply_image",
    "apply_left",
    "minimal_left_factor",
    "is_observable",
    "ket",
]

TOL_RANK = 1e-9
TOL_MATRIX = 1e-8

_tol_rank = contextvars.ContextVar("tol_rank", default=TOL_RANK)


def tol_rank() -> float:
    return _tol_rank.get()


@contextlib.contextmanager
def tolerance(value: float):
    """Temporarily override the rank tolerance used by every lattice operation."""
    if not value > 0:
        raise ValueError(f"tolerance must be positive, got {value!r}")
    token = _tol_rank.set(float(value))
    try:
        yield value
    finally:
        _tol_rank.reset(token)


class DimensionError(ValueError):
    """Operands live in incompatible ambient spaces."""


class Subspace:
    """A closed subspace of C^n, held as an orthonormal basis.

    ``==`` is lattice equality (projector distance below ``TOL_MATRIX``) and
    ``<=`` is the lattice order.  Instances are immutable and unhashable.
    """

    __slots__ = ("_basis",)

    def __init__(self, basis: np.ndarray):
        basis = np.array(basis, dtype=complex)
        if basis.ndim != 2 or basis.shape[0] < 1:
            raise DimensionError(f"basis must be an n x k array with n >= 1, got shape {basis.shape}")
        basis.setflags(write=False)
        self._basis = basis

    @classmethod
    def top(cls, n: int) -> Subspace:
        return cls(np.eye(n, dtype=complex))

    @classmethod
    def bottom(cls, n: int) -> Subspace:
        return cls(np.zeros((n, 0), dtype=complex))

    @property
    def basis(self) -> np.ndarray:
        return self._basis

    @property
    def ambient_dim(self) -> int:
        return self._basis.shape[0]

    @property
    def dim(self) -> int:
        return self._basis.shape[1]

    def is_top(self) -> bool:
        return self.dim == self.ambient_dim

    def is_bottom(self) -> bool:
        return self.dim == 0

    def projector(self) -> np.ndarray:
        return self._basis @ self._basis.conj().T

    def vectors(self) -> list[np.ndarray]:
        return [self._basis[:, j] for j in range(self.dim)]

    def __eq__(self, other):
        if not isinstance(other, Subspace):
            return NotImplemented
        return equals(self, other)

    def __le__(self, other):
        if not isinstance(other, Subspace):
            return NotImplemented
        return leq(self, other)

    def __ge__(self, other):
        if not isinstance(other, Subspace):
            return NotImplemented
        return leq(other, self)

    __hash__ = None

    def __repr__(self):
        if self.is_bottom():
            tag = "bot"
        elif self.is_top():
            tag = "top"
        else:
            tag = f"dim {self.dim}"
        return f"<Subspace {tag} of C^{self.ambient_dim}>"


@dataclass(frozen=True)
class Observable:
    outcomes: tuple[Subspace, ...]

    def __init__(self, outcomes: Iterable[Subspace]):
        object.__setattr__(self, "outcomes", tuple(outcomes))

    @property
    def ambient_dim(self) -> int:
        dims = {p.ambient_dim for p in self.outcomes}
        if len(dims) != 1:
            raise DimensionError(f"outcomes span several ambient dimensions: {sorted(dims)}")
        return dims.pop()


def _same_dim(p: Subspace, q: Subspace) -> int:
    if p.ambient_dim != q.ambient_dim:
        raise DimensionError(f"ambient dimensions differ: {p.ambient_dim} vs {q.ambient_dim}")
    return p.ambient_dim


def _extend(basis: np.ndarray, candidates: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal vectors spanning ``candidates`` modulo the span of ``basis``.

    Modified Gram-Schmidt with pivoting on the largest residual; every accepted
    vector is orthogonalized a second time against all previous ones.
    """
    n, k0 = basis.shape
    m = candidates.shape[1]
    q = np.empty((n, k0 + min(m, n - k0)), dtype=complex)
    q[:, :k0] = basis
    k = k0
    residual = np.array(candidates, dtype=complex, copy=True)
    if k0 and m:
        for _ in range(2):
            residual -= basis @ (basis.conj().T @ residual)
    alive = np.ones(m, dtype=bool)
    tol2 = tol * tol
    while k < q.shape[1]:
        sq = np.where(alive, (residual.real**2 + residual.imag**2).sum(axis=0), -1.0)
        j = int(np.argmax(sq))
        if sq[j] <= tol2:
            break
        alive[j] = False
        v = residual[:, j].copy()
        done = q[:, :k]
        v -= done @ (done.conj().T @ v)
        nv = np.sqrt((v.real**2 + v.imag**2).sum())
        if nv <= tol:
            continue
        v /= nv
        q[:, k] = v
        k += 1
        residual -= v[:, None] * (v.conj() @ residual)[None, :]
    return q[:, k0:k].copy()


def span(vectors: Sequence[Sequence[complex]] | np.ndarray, n: int | None = None) -> Subspace:
    """Subspace spanned by ``vectors`` (a list of length-n vectors, or an n x m array of columns)."""
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        cols = np.asarray(vectors, dtype=complex)
        if n is not None and cols.shape[0] != n:
            raise DimensionError(f"vectors have length {cols.shape[0]}, expected {n}")
    else:
        vecs = [np.asarray(v, dtype=complex).ravel() for v in vectors]
        if n is None:
            if not vecs:
                raise DimensionError("cannot infer the ambient dimension of an empty span")
            n = vecs[0].shape[0]
        for v in vecs:
            if v.shape[0] != n:
                raise DimensionError(f"vector of length {v.shape[0]} in a span over C^{n}")
        cols = np.column_stack(vecs) if vecs else np.zeros((n, 0), dtype=complex)
    return Subspace(_extend(np.zeros((cols.shape[0], 0), dtype=complex), cols, tol_rank()))


def ket(indices: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Computational basis vector |i_1 ... i_m> of C^{d_1 x ... x d_m}, left factor slowest."""
    if len(indices) != len(dims):
        raise DimensionError(f"{len(indices)} indices for {len(dims)} factors")
    v = np.zeros(int(np.prod(dims, dtype=int)), dtype=complex)
    v[np.ravel_multi_index(tuple(indices), tuple(dims))] = 1.0
    return v


def leq(p: Subspace, q: Subspace) -> bool:
    _same_dim(p, q)
    if p.dim == 0:
        return True
    if q.dim < p.dim:
        return False
    b, c = p.basis, q.basis
    residual = b - c @ (c.conj().T @ b)
    return bool(np.max(np.linalg.norm(residual, axis=0)) <= tol_rank())


def distance(p: Subspace, q: Subspace) -> float:
    """Frobenius distance between the two orthogonal projectors."""
    _same_dim(p, q)
    return float(np.linalg.norm(p.projector() - q.projector()))


def equals(p: Subspace, q: Subspace) -> bool:
    return p.dim == q.dim and distance(p, q) <= TOL_MATRIX


def complement(p: Subspace) -> Subspace:
    n = p.ambient_dim
    if p.dim == 0:
        return Subspace.top(n)
    if p.dim == n:
        return Subspace.bottom(n)
    return Subspace(_extend(p.basis, np.eye(n, dtype=complex), tol_rank()))


def join(p: Subspace, q: Subspace) -> Subspace:
    _same_dim(p, q)
    if q.dim == 0:
        return p
    if p.dim == 0:
        return q
    extra = _extend(p.basis, q.basis, tol_rank())
    return Subspace(np.hstack([p.basis, extra]))


def meet(p: Subspace, q: Subspace) -> Subspace:
    _same_dim(p, q)
    return complement(join(complement(p), complement(q)))


def sasaki(p: Subspace, q: Subspace) -> Subspace:
    """Sasaki projection of ``p`` onto ``q``: q ∧ (p ∨ q⊥)."""
    _same_dim(p, q)
    q_perp = complement(q)
    # q ∧ r = (q⊥ ∨ r⊥)⊥, reusing q⊥
    return complement(join(q_perp, complement(join(p, q_perp))))


def compatible(p: Subspace, q: Subspace) -> bool:
    _same_dim(p, q)
    a, b = p.projector(), q.projector()
    return bool(np.linalg.norm(a @ b - b @ a) <= tol_rank())


def tensor(p: Subspace, q: Subspace) -> Subspace:
    a, b = p.basis, q.basis
    k = (a[:, None, :, None] * b[None, :, None, :]).reshape(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1])
    return Subspace(k)


def tensor_all(factors: Iterable[Subspace]) -> Subspace:
    out = Subspace.top(1)
    for f in factors:
        out = tensor(out, f)
    return out


def swap_blocks(p: Subspace, d_first: int, d_second: int, d_rest: int = 1) -> Subspace:
    """Block swap Γ::Δ::Ξ -> Δ::Γ::Ξ with the given block dimensions."""
    if d_first * d_second * d_rest != p.ambient_dim:
        raise DimensionError(
            f"{d_first} x {d_second} x {d_rest} does not factor C^{p.ambient_dim}"
        )
    k = p.dim
    b = p.basis.reshape(d_first, d_second, d_rest, k).transpose(1, 0, 2, 3)
    return Subspace(b.reshape(p.ambient_dim, k))


def apply_image(a: np.ndarray, p: Subspace) -> Subspace:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[1] != p.ambient_dim:
        raise DimensionError(f"operator of shape {a.shape} cannot act on C^{p.ambient_dim}")
    if p.dim == 0:
        return Subspace.bottom(a.shape[0])
    return span(a @ p.basis)


def apply_left(a: np.ndarray, p: Subspace, d_rest: int) -> Subspace:
    """Image of ``p`` under ``a ⊗ Id_{d_rest}``, without forming the Kronecker product."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[1] * d_rest != p.ambient_dim:
        raise DimensionError(f"operator of shape {a.shape} (x) Id_{d_rest} cannot act on C^{p.ambient_dim}")
    if p.dim == 0:
        return Subspace.bottom(a.shape[0] * d_rest)
    blocks = p.basis.reshape(a.shape[1], d_rest * p.dim)
    return span((a @ blocks).reshape(a.shape[0] * d_rest, p.dim))


def minimal_left_factor(s: Subspace, d_left: int, d_right: int) -> Subspace:
    """Least p in L_{d_left} with s <= p ⊗ ⊤_{d_right}."""
    if d_left * d_right != s.ambient_dim:
        raise DimensionError(f"{d_left} x {d_right} does not factor C^{s.ambient_dim}")
    contractions = s.basis.reshape(d_left, d_right * s.dim)
    return span(contractions)


def is_observable(obs: Observable) -> bool:
    if not obs.outcomes:
        return False
    n = obs.ambient_dim
    if any(p.is_bottom() for p in obs.outcomes):
        return False
    for i, p in enumerate(obs.outcomes):
        for q in obs.outcomes[i + 1:]:
            if not leq(p, complement(q)):
                return False
    total = Subspace.bottom(n)
    for p in obs.outcomes:
        total = join(total, p)
    return total.is_top()
