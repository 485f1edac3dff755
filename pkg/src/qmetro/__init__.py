"""Exact channel-level analysis of a phase-estimation based quantum Metropolis sampler."""

__version__ = "0.1.0"
