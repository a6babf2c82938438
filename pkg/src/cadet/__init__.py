"""cadet: desk-scale continual detection of machine-generated artwork.

A self-contained benchmark engine: a tiny from-scratch vision transformer
with deep prompt injection, incremental cosine/linear classifier heads,
knowledge-distillation and EWC regularizers, a synthetic image stream whose
generators carry planted spectral fingerprints, and the once-for-all /
continual detection protocols with their metric suite.
"""

__version__ = "0.1.0"
