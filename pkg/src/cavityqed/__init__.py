"""Cavity QED toolkit: layered optics, Lindblad dynamics, ensemble averages,
curve fitting, measurement analysis, and synthetic data generation for a
single solid-state emitter in a tunable open microcavity."""

__version__ = "0.1.0"
