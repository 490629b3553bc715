"""Phase-random state ensembles, diagonal random circuits and their
Pauli-space Markov chains."""

__version__ = "0.1.0"
