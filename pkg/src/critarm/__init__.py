"""Simulation and exact-verification toolkit for the Ising model and its
percolation representations (random-cluster and random-current) on finite
subgraphs of Z^d: exact small-graph oracles for correlation inequalities and
coupling identities, Monte Carlo estimators for one-arm probabilities,
magnetisation, cluster volumes and two-point diagrams, and analysis helpers
for extracting critical exponents."""

__version__ = "1.0.0"

from .kernels import BACKEND

__all__ = ["BACKEND", "__version__"]
