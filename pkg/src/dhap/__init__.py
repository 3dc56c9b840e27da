"""Finite dyadic models of harmonic analysis: tiles, trees, Haar systems,
stopping-time decompositions, paraproducts and perfect dyadic singular
integral operators, with measured-constant verification."""

__version__ = "0.1.0"
