"""Self-learning synthesis of integer-sequence programs in a tiny DSL."""

__version__ = "0.1.0"
