"""Slow relation near infinity for polynomial Liénard systems, and the box dimension of its orbits."""

from .model import CaseTag, Direction, LienardSystem, Side, parity_profile, validate

__all__ = ["CaseTag", "Direction", "LienardSystem", "Side", "parity_profile", "validate"]
__version__ = "0.1.0"
