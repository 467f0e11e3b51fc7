"""EEG satisfaction estimation with topography-adaptive attention, plus two downstream uses:
satisfaction-weighted query expansion and satisfaction-augmented rating prediction."""

__version__ = "0.1.0"
