"""Named gate matrices accepted by the circuit DSL."""

import numpy as np

_S = 1 / np.sqrt(2)

GATES = {
    "H": np.array([[_S, _S], [_S, -_S]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "SWAP": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
}
GATES["NOT"] = GATES["X"]

for _m in GATES.values():
    _m.setflags(write=False)


def gate(name: str) -> np.ndarray:
    try:
        return GATES[name]
    except KeyError:
        raise KeyError(f"unknown gate {name!r}; known gates: {', '.join(sorted(GATES))}") from None
