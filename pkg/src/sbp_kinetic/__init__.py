"""Entropy-stable SBP discretizations of scalar and system conservation laws,
with tools for measuring the kinetic relation of nonclassical shocks."""

__version__ = "0.1.0"
