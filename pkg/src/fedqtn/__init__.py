"""Federated learning over simulated quantum tensor-network classifiers."""

__version__ = "0.1.0"
