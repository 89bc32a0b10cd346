"""Exact solving workbench for the Nmbr9 polyomino stacking game."""

from .rules import (
    BoardState,
    Instance,
    Placement,
    apply,
    enumerate_decks,
    legal_placements,
    parse_variant,
    replay,
    score,
    validate_deck,
)
from .shapes import Shape, default_catalog, distinct_orientations, exterior_halo, parse_catalog, rotate90

__version__ = "0.1.0"
