"""Numerical and symbolic certification that the Szego projection of an
exponentially flat Hartogs domain over the disc is L^p bounded only at p = 2."""

__version__ = "0.1.0"
