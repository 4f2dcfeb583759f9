"""ambitlab: power variations of kernel-smoothed white-noise sheets.

Simulation of moving-average random fields over a planar white noise,
exact/Monte-Carlo machinery for their thinned power variations, and the
concentration-measure diagnostics that govern the limit theory.
"""

__version__ = "0.1.0"
