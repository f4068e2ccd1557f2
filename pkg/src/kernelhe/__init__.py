"""Simulated homomorphic evaluation of general and kernelized ML algorithms.

Two backends are provided: ``gatesim``/``boolcircuits`` count weighted
Boolean gates over fixed-point words, and ``arithsim`` counts ciphertext
additions and multiplications.  ``costmodel`` turns counts into time under
per-scheme profiles and ``phizer`` picks the cheaper circuit per query.
"""

__version__ = "0.1.0"
