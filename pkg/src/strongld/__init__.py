"""Quasiclassical expected-value dynamics for small-noise SDEs with polynomial drift."""
__version__ = "0.1.0"
