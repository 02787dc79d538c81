"""Quantum Fisher information and Kraus-channel bounds for multiparameter estimation."""
