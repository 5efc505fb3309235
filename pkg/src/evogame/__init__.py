"""Evolutionary prediction games: fitness from learned classifiers, selection dynamics, equilibria."""

__version__ = "0.1.0"
