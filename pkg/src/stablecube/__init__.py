"""Stable trees, stable cubulations of hulls, barycenters and bicombings on
finite graph models of hyperbolic and hierarchically hyperbolic spaces."""

__version__ = "0.1.0"
