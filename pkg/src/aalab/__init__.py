"""Numerical laboratory for almost automorphy and weighted pseudo almost
automorphy of deterministic functions and stochastic processes."""

__version__ = "0.1.0"
