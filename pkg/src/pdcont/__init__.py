"""Primal-dual optimisation by continuation for ``f(u) + lam g(u) + mu h(Au)``."""

__version__ = "0.1.0"
