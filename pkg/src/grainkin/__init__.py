"""Numerical laboratory for the one-dimensional inelastic Boltzmann equation."""
