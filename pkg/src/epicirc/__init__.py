"""Epistemic verification of quantum circuits over the lattice of subspaces."""

from .circuit import (
    Circuit,
    CircuitError,
    Linear,
    Measurement,
    ONode,
    SNode,
    Unitary,
    check,
    cut,
    is_full_subgraph,
    is_slice,
    maximal_slices,
    precedes,
    slices,
    strong_past,
    strong_past_circuit,
    validate,
)
from .dsl import ParseError, format_circuit, format_subspace, parse_circuit, parse_subspace
from .engine import (
    check_derived_rules,
    conditional_state,
    derivation,
    epistemic_state,
    find_impossibility,
    is_impossible,
    verifies,
    verifies_at,
)
from .omlattice import Subspace, span
from .oracle import composed_image, oracle_impossible, oracle_verifies

__version__ = "0.1.0"
