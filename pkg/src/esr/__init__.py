"""Numerical calculus for generalized observables with a no-registration outcome."""

__version__ = "0.1.0"
