"""Curve-resolution numerics: rank diagnostics of kinetic and titration
concentration matrices, normalizations, irreducibility and SCF extrema."""

__version__ = "0.1.0"
