"""Lagrangian-angle flow of spacelike surfaces in anti-de Sitter space."""

__version__ = "0.1.0"
