"""Decentralized dual averaging over stochastic networks: simulation, baselines and analysis."""

__version__ = "0.1.0"
