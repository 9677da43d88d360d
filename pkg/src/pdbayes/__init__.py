"""Persistence diagrams from point clouds, Bayesian posterior inference on diagrams, and Bayes-factor classification."""

__version__ = "0.1.0"
