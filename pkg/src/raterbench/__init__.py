"""raterbench: analyze how inter-annotator label variability affects
classifier evaluation."""

from .model import (
    MISSING,
    ColumnSchema,
    Dataset,
    ScanKey,
    SelectionSet,
    column,
    intersect,
)

__all__ = [
    "MISSING",
    "ColumnSchema",
    "Dataset",
    "ScanKey",
    "SelectionSet",
    "column",
    "intersect",
]

__version__ = "0.1.0"
