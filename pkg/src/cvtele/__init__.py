"""Teleportation simulation of bosonic Gaussian channels.

Covariance-level Gaussian toolkit, truncated Fock-space oracles, uniform
convergence bounds, the teleportation discrimination game and secret-key
bound evaluators.
"""

__version__ = "0.1.0"
