"""Pseudospectral toolkit for mixed local-nonlocal diffusion with absorption."""

__version__ = "1.0.0"
