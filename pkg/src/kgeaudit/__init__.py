"""Multiplicity auditing for knowledge-graph embedding link prediction.

Trains families of near-equivalent embedding models, measures how much their
top-K answers disagree (ambiguity, discrepancy, and a performance-based upper
bound), and mitigates the disagreement by aggregating per-query rankings with
positional voting rules.
"""

from .errors import (
    ConfigError,
    IncompatibleModelsError,
    InvalidDatasetError,
    KgeAuditError,
    ParseError,
    TrainingDivergedError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "IncompatibleModelsError",
    "InvalidDatasetError",
    "KgeAuditError",
    "ParseError",
    "TrainingDivergedError",
    "__version__",
]
