"""Amount- and time-biased random-walk embeddings of transaction graphs,
with one-class detection of phishing accounts and an evaluation harness."""

__version__ = "0.1.0"
