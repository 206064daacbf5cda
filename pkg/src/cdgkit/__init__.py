"""Directed correlation graphs: separation, Markov equivalence and OU numerics."""

__version__ = "0.1.0"
