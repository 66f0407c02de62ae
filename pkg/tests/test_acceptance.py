"""Acceptance criteria, one marked group per criterion.

Run on its own with ``pytest tests/test_acceptance.py`` (or execute this file);
the terminal summary ends with one PASS/FAIL line per criterion.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from epicirc import engine, fixtures
from epicirc import omlattice as lat
from epicirc.circuit import (
    Circuit,
    Measurement,
    ONode,
    SNode,
    Unitary,
    cut,
    is_full_subgraph,
    maximal_slices,
    slices,
    strong_past_circuit,
)
from epicirc.dsl import format_circuit, parse_circuit
from epicirc.engine import (
    check_derived_rules,
    conditional_state,
    epistemic_state,
    find_impossibility,
    is_impossible,
    verifies,
    verifies_at,
)
from epicirc.omlattice import (
    Subspace,
    compatible,
    complement,
    equals,
    join,
    leq,
    meet,
    sasaki,
    span,
    tensor,
)
from epicirc.oracle import composed_image, oracle_impossible, random_circuit
from helpers import kets, ray, teleport_with_input

ZERO, ONE = ray([2], "0"), ray([2], "1")
TOP2 = Subspace.top(2)
CASES = 1000
criterion = pytest.mark.criterion


# -- 1, 2: impossible circuits ---------------------------------------------


@criterion(1, "repeated orthogonal measurement impossible, state [0] at A2")
def test_c1_fig1():
    c = fixtures.load("fig1")
    assert is_impossible(c)
    assert find_impossibility(c) == ("A3",)
    assert equals(epistemic_state(c, ["A2"]), ZERO)


@criterion(2, "measure, CNOT, measure circuit impossible")
def test_c2_fig2():
    c = fixtures.load("fig2")
    assert is_impossible(c)
    assert oracle_impossible(c)


# -- 3: teleportation ------------------------------------------------------


@criterion(3, "teleportation: singlet at B3,C2, possible, input state arrives at C3")
def test_c3_singlet_and_possible():
    c = fixtures.load("teleport")
    assert equals(epistemic_state(c, ["B3", "C2"]), ray([2, 2], "01", "-10"))
    assert not is_impossible(c)


@criterion(3, "teleportation: singlet at B3,C2, possible, input state arrives at C3")
@pytest.mark.parametrize("vec", [[1, 0], [0, 1], [1, 1]], ids=["0", "1", "plus"])
def test_c3_teleported(vec):
    p = span([vec], 2)
    c = teleport_with_input(p)
    assert not is_impossible(c)
    final = ["B5", "A4", "C3", "R1"]
    expected = lat.tensor_all([ZERO, ONE, p, Subspace.top(1)])
    assert verifies(c, final, expected)
    assert equals(epistemic_state(c, final), expected)
    # the C3 factor is exactly p once B5 and A4 are traced out
    assert equals(conditional_state(c, ["C3"], ["B5", "A4", "R1"]), p)


# -- 4: Hardy interferometers ------------------------------------------------

HARDY_RAYS = [
    (["vp", "wp", "wm", "vm"], {"1001": 1, "1010": 1j, "0101": 1j, "0110": -1}),
    (["vp", "up", "um", "vm"], {"1001": 1, "1010": 1j, "0101": 1j, "0000": -1}),
    (["cp", "dp", "um", "vm"], {"1001": 2j, "1010": -1, "0110": 1j, "0000": -np.sqrt(2)}),
    (["cp", "dp", "dm", "cm"], {"1001": -3, "1010": 1j, "0101": 1j, "0110": -1, "0000": -2}),
]


@criterion(4, "Hardy: four spans, [11]-perp at u+u-, u- verifies [1], paradox not derivable")
@pytest.mark.parametrize("gamma, terms", HARDY_RAYS, ids=["beamsplit", "annihil", "mixed", "final"])
def test_c4_rays(gamma, terms):
    c = fixtures.load("hardy")
    v = sum(a * kets([2] * 4, lab) for lab, a in terms.items())
    assert equals(epistemic_state(c, gamma), span([v], 16))


@criterion(4, "Hardy: four spans, [11]-perp at u+u-, u- verifies [1], paradox not derivable")
def test_c4_statements():
    c = fixtures.load("hardy")
    assert verifies_at(c, ["up", "um"], complement(ray([2, 2], "11")), ["vp", "vm"])
    cp = fixtures.load("hardy_prime")
    assert verifies_at(cp, ["um"], ONE, ["cp", "vm", "sp"])


@criterion(4, "Hardy: four spans, [11]-perp at u+u-, u- verifies [1], paradox not derivable")
def test_c4_no_bottom_slice():
    c = fixtures.load("hardy_prime")
    assert not is_impossible(c)
    every = list(slices(c))
    assert len(every) > 100
    for g in every:
        assert not epistemic_state(c, list(g)).is_bottom(), g


# -- 5: three boxes ----------------------------------------------------------


@criterion(5, "three-box conditional states and their inclusion")
def test_c5_three_box():
    c = fixtures.load("threebox")
    k1 = conditional_state(c, ["A1", "B1"], ["C1"])
    k2 = conditional_state(c, ["A1", "B1"], ["C2"])
    assert equals(k1, span([kets([2, 2], "00"), kets([2, 2], "01", "10")], 4))
    assert equals(k2, ray([2, 2], "01", "10"))
    assert leq(k2, k1)


# -- 6: two-qubit Hardy ------------------------------------------------------


@criterion(6, "two-qubit Hardy states, conditional [down], possible")
def test_c6_hardy2():
    c = fixtures.load("hardy2")
    assert equals(epistemic_state(c, ["A2", "B1"]), tensor(ray([2], "0", "-1"), ONE))
    assert equals(conditional_state(c, ["A1"], ["B2"]), ONE)
    k = epistemic_state(c, ["A1", "B1"])
    assert equals(k, ray([2, 2], "00", "10", "01"))
    assert not k.is_bottom()
    assert not is_impossible(c)


# -- 7: lattice laws -------------------------------------------------------


def _haar(rng, n):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _generic(rng, n):
    k = int(rng.integers(0, n + 1))
    return span(rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k)), n)


def _pair(rng):
    """Two subspaces of C^n, n in 2..8: generic half the time, else from one shared basis."""
    n = int(rng.integers(2, 9))
    if rng.random() < 0.5:
        return _generic(rng, n), _generic(rng, n)
    u = _haar(rng, n)
    pick = lambda: span(u[:, rng.random(n) < 0.5], n)  # noqa: E731
    return pick(), pick()


def _law_cases(seed):
    rng = np.random.default_rng(seed)
    for _ in range(CASES):
        yield rng, _pair(rng)


@criterion(7, "lattice laws, 1000 random cases each, dims 2-8")
def test_c7_double_complement():
    for _, (p, _q) in _law_cases(71):
        pp = complement(p)
        assert p.dim + pp.dim == p.ambient_dim
        assert equals(complement(pp), p)


@criterion(7, "lattice laws, 1000 random cases each, dims 2-8")
def test_c7_de_morgan():
    for _, (p, q) in _law_cases(72):
        assert equals(complement(join(p, q)), meet(complement(p), complement(q)))
        assert equals(complement(meet(p, q)), join(complement(p), complement(q)))


@criterion(7, "lattice laws, 1000 random cases each, dims 2-8")
def test_c7_orthomodular():
    for _, (p, r) in _law_cases(73):
        q = join(p, r)
        assert leq(p, q)
        assert equals(q, join(p, meet(q, complement(p))))


@criterion(7, "lattice laws, 1000 random cases each, dims 2-8")
def test_c7_sasaki_projection():
    for _, (p, q) in _law_cases(74):
        image = span(q.projector() @ p.basis, q.ambient_dim)
        assert equals(sasaki(p, q), image)


@criterion(7, "lattice laws, 1000 random cases each, dims 2-8")
def test_c7_sasaki_bottom():
    hits = 0
    for rng, (p, q) in _law_cases(75):
        if rng.random() < 0.5:
            # force p below q-perp half of the time
            qp = complement(q).basis
            p = span(qp @ (rng.normal(size=(qp.shape[1], 2)) + 0j), q.ambient_dim)
        below = leq(p, complement(q))
        hits += below
        assert sasaki(p, q).is_bottom() == below
    assert 0 < hits < CASES


@criterion(7, "lattice laws, 1000 random cases each, dims 2-8")
def test_c7_compatibility_collapse():
    hits = 0
    for _, (p, q) in _law_cases(76):
        if compatible(p, q):
            hits += 1
            assert equals(sasaki(p, q), meet(p, q))
    assert hits >= CASES // 3


# -- 8: differential test ----------------------------------------------------


@criterion(8, "engine agrees with operator composition on 200 random circuits")
def test_c8_differential():
    slices_checked = 0
    kinds = set()
    for seed in range(200):
        c = random_circuit(seed, max_qubits=3, max_ops=8)
        imp = is_impossible(c)
        kinds.add(imp)
        assert imp == oracle_impossible(c), seed
        for g in maximal_slices(c):
            g = list(g)
            assert equals(epistemic_state(c, g), composed_image(c, g)), (seed, g)
            slices_checked += 1
    assert kinds == {True, False}
    assert slices_checked > 200


# -- 9: structural properties ---------------------------------------------------

STRUCTURAL = ("fig2", "teleport", "threebox", "hardy2", "hardy", "hardy_prime")


def _forward_extension(c: Circuit, rng) -> Circuit:
    """Append one to three random o-nodes on the current sinks."""
    snodes, onodes = list(c.snodes), list(c.onodes)
    ext = Circuit(snodes, onodes)
    for k in range(int(rng.integers(1, 4))):
        s = ext.sinks()[int(rng.integers(len(ext.sinks())))]
        d = ext.dim(s)
        new = SNode(f"{s}_x{k}", d)
        if rng.random() < 0.5:
            payload = Unitary(_haar(rng, d))
        else:
            payload = Measurement(span([_haar(rng, d)[:, 0]], d))
        snodes.append(new)
        onodes.append(ONode(f"ext{k}", (s,), (new.id,), payload))
        ext = Circuit(snodes, onodes)
    return ext


@criterion(9, "strong causality, monotony, measurement-step identity")
def test_c9_strong_causality():
    rng = np.random.default_rng(91)
    loaded = {n: fixtures.load(n) for n in STRUCTURAL}
    all_slices = {n: list(slices(c)) for n, c in loaded.items()}
    for _ in range(50):
        name = STRUCTURAL[int(rng.integers(len(STRUCTURAL)))]
        c = loaded[name]
        g = list(all_slices[name][int(rng.integers(len(all_slices[name])))])
        k = epistemic_state(c, g)
        sp = strong_past_circuit(c, g)
        fr = None
        for _, fr in engine.propagate(sp):
            pass
        assert set(fr.order) == set(g)
        fr.arrange(g)
        assert equals(fr.state, k), (name, g)
        # a larger circuit around the same strong past gives the same state
        assert equals(epistemic_state(_forward_extension(c, rng), g), k), (name, g)


@criterion(9, "strong causality, monotony, measurement-step identity")
def test_c9_monotony():
    rng = np.random.default_rng(92)
    for t in range(20):
        name = STRUCTURAL[t % len(STRUCTURAL)]
        c = fixtures.load(name)
        if t % 2:
            ss = list(slices(c))
            sub, sup = cut(c, list(ss[int(rng.integers(len(ss)))])), c
        else:
            sub, sup = c, _forward_extension(c, rng)
        assert is_full_subgraph(sub, sup)
        ss = list(slices(sub))
        for j in rng.choice(len(ss), size=min(12, len(ss)), replace=False):
            g = list(ss[int(j)])
            k = epistemic_state(sub, g)
            assert verifies(sup, g, k), (name, g)
            loose = join(k, _generic(rng, k.ambient_dim))
            assert verifies(sub, g, loose) and verifies(sup, g, loose)


@criterion(9, "strong causality, monotony, measurement-step identity")
@pytest.mark.parametrize("name", fixtures.NAMES)
def test_c9_measurement_step(name):
    c = fixtures.load(name)
    report = check_derived_rules(c)
    measurements = sum(isinstance(o.payload, Measurement) for o in c.onodes)
    if is_impossible(c):
        assert report.checked >= 1
    else:
        assert report.checked == measurements
    assert report.ok, report.violations


# -- 10: command line ----------------------------------------------------------


def _cli(*argv):
    return subprocess.run([sys.executable, "-m", "epicirc", *map(str, argv)], capture_output=True, text=True)


@criterion(10, "CLI round-trip, exit codes, byte-stable JSON")
@pytest.mark.parametrize("name", fixtures.NAMES)
def test_c10_round_trip(name):
    c = fixtures.load(name)
    assert parse_circuit(format_circuit(c)) == c


@criterion(10, "CLI round-trip, exit codes, byte-stable JSON")
def test_c10_exit_codes(tmp_path):
    fig1 = fixtures.path("fig1")
    r = _cli("check", fig1)
    assert (r.returncode, r.stdout) == (0, "IMPOSSIBLE (witness: A3)\n")
    r = _cli("verify", fixtures.path("teleport"), "--slice", "B1,C1", "--subspace", "span{|11>}")
    assert (r.returncode, r.stdout) == (0, "HOLDS\n")
    r = _cli("cond", fixtures.path("threebox"), "--gamma", "A1,B1", "--delta", "C2")
    assert (r.returncode, r.stdout) == (0, "span{|01> + |10>}\n")
    assert _cli("verify", fig1, "--slice", "A2").returncode == 1
    assert _cli("state", fig1, "--slice", "A1,A2").returncode == 1
    bad = tmp_path / "bad.qc"
    bad.write_text("snode A1 2\nop M1: A1 -> A9 = unitary X\n")
    assert _cli("check", bad).returncode == 2
    assert _cli("verify", fig1, "--slice", "A2", "--subspace", "span{|0").returncode == 2


@criterion(10, "CLI round-trip, exit codes, byte-stable JSON")
def test_c10_json_stable():
    argv = ("verify", fixtures.path("teleport"), "--slice", "B1,C1", "--subspace", "span{|11>}", "--json", "--trace")
    a, b = _cli(*argv), _cli(*argv)
    assert a.returncode == 0 and a.stdout == b.stdout
    assert json.loads(a.stdout)["result"] == "HOLDS"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
