"""Shared builders for the tests."""

import numpy as np

from epicirc.omlattice import Subspace, ket, span


def random_subspace(rng: np.random.Generator, n: int, k: int | None = None) -> Subspace:
    """Random subspace of C^n; k defaults to a uniform rank in 0..n."""
    if k is None:
        k = int(rng.integers(0, n + 1))
    z = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    return span(z, n)


def structured_subspace(rng: np.random.Generator, n: int) -> Subspace:
    """Random subspace spanned by computational basis kets, so coincidences happen."""
    k = int(rng.integers(0, n + 1))
    picks = rng.choice(n, size=k, replace=False)
    return span([np.eye(n)[j] for j in picks], n)


def kets(dims, *labels):
    """Sum of basis kets given as index strings, e.g. kets([2, 2], "01", "-10")."""
    v = 0
    for lab in labels:
        sign = -1 if lab.startswith("-") else 1
        v = v + sign * ket([int(ch) for ch in lab.lstrip("-")], dims)
    return v


def ray(dims, *labels) -> Subspace:
    return span([kets(dims, *labels)], int(np.prod(dims)))


def teleport_with_input(p: Subspace, r_dim: int = 1):
    """Teleportation where (A1, R1) is prepared in p by a measurement on fresh sources."""
    from epicirc import fixtures
    from epicirc.circuit import Circuit, Measurement, ONode, SNode

    base = fixtures.load("teleport")
    snodes = [s for s in base.snodes if s.id != "R1"]
    snodes += [SNode("R1", r_dim), SNode("A0", 2), SNode("R0", r_dim)]
    prep = ONode("PA", ("A0", "R0"), ("A1", "R1"), Measurement(p))
    return Circuit(snodes, list(base.onodes) + [prep])
