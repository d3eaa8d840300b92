"""Design and evaluation toolkit for all-optical frequency processors.

A processor is a cascade of electro-optic phase modulators (EOMs) and
line-by-line pulse shapers acting on equispaced frequency bins. The package
builds the resulting unitary, synthesizes settings for frequency-hop and
broadcast transformations, and scores designs by fidelity, success
probability and per-channel mutual information.
"""

__version__ = "0.1.0"
