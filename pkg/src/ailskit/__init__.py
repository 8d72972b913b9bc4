"""Adaptive iterated local search for the CVRP with pluggable ruin heuristics."""

__version__ = "0.1.0"
