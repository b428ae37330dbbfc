"""hermitia: a desk-scale numerical laboratory for Hermite pseudo-multipliers.

Spectral calculus of the harmonic oscillator H = -Delta + |x|^2 on a
truncated Hermite basis, symbol calculus for operators m(x, H), kernel
decay diagnostics, discrete maximal functions with Muckenhoupt weights,
and Weyl-transform identities.  Everything runs at dimensions n = 1..3
with a truncated spectrum (the "truncated model": operators act as zero
above the top shell).
"""

from hermitia.errors import AccuracyWarning, ConsistencyError, PrecisionError

__all__ = ["AccuracyWarning", "ConsistencyError", "PrecisionError"]
__version__ = "0.1.0"
