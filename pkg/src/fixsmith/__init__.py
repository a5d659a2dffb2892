"""fixsmith: sample-based repair for a deterministic C-subset.

Learns a distribution over fixes for broken programs, samples many diverse
candidates from a conditional latent-variable sequence model, and arbitrates
among them with the built-in compiler oracle in an iterative repair loop.
"""

__version__ = "0.1.0"
