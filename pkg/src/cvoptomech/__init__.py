"""Gaussian continuous-variable states, optimal teleportation preprocessing and
linearized cavity optomechanics."""

__version__ = "0.1.0"
