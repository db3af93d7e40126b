"""traitgen: personality-conditioned short-text generation toolkit.

Pipeline pieces: lexicon-based Big Five trait scoring, a CNN classifier
that labels corpora with binary trait polarities, a conditional LSTM
generator driven by a 5-bit trait vector, and a synthetic-corpus harness
that verifies the whole chain end to end.
"""

__version__ = "0.1.0"

from .traits import HIGH, LEVELS, LOW, MEDIUM, TRAITS

__all__ = ["TRAITS", "LEVELS", "LOW", "MEDIUM", "HIGH", "__version__"]
