"""Order-p parasupersymmetric quantum mechanics on the line, for p = 1, 2, 3.

Exact operator algebra over polynomial superpotentials, finite-difference
operators for the rest, block spectra with ladder families, and the
index computed both from zero modes and from family traces.
"""

__version__ = "0.1.0"
