"""fracpe: a spectral-Galerkin lab for stochastic primitive equations with fractional noise."""

__version__ = "0.1.0"
