"""Circuits from the worked examples, as ``.qc`` files."""

from importlib import resources

from ..circuit import Circuit
from ..dsl import parse_circuit

NAMES = ("fig1", "fig2", "teleport", "threebox", "hardy2", "hardy", "hardy_prime")


def text(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.qc").read_text(encoding="utf-8")


def path(name: str):
    return resources.files(__name__).joinpath(f"{name}.qc")


def load(name: str) -> Circuit:
    return parse_circuit(text(name))
