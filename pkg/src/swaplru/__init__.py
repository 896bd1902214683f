"""Circuit-level toric code simulator with SWAP-based syndrome extraction
under Rydberg-decay leakage, plus matching decoders and fit utilities."""

from .lattice import (
    FIVE_CNOT,
    FEED_FORWARD,
    VARIANTS,
    ToricLayout,
    build_layout,
    gate_sequence,
    role_schedule,
)

__all__ = [
    "FIVE_CNOT",
    "FEED_FORWARD",
    "VARIANTS",
    "ToricLayout",
    "build_layout",
    "gate_sequence",
    "role_schedule",
]

__version__ = "0.1.0"
