"""Shared exception hierarchy.

Every error raised on a contract violation derives from ToolError so the
CLI and the HTTP service can map them to exit codes / status codes in one
place. ``code`` is a stable machine-readable identifier.
"""

from __future__ import annotations


class ToolError(Exception):
    code = "error"

    def __init__(self, message: str, detail: object = None):
        super().__init__(message)
        self.detail = detail


class SchemaError(ToolError):
    """Invalid column schema or cell value for the declared value kind."""

    code = "schema"


class UnknownColumnError(ToolError):
    code = "unknown_column"

    def __init__(self, name: str, known: list[str] | tuple[str, ...] = ()):
        import difflib

        self.name = name
        matches = difflib.get_close_matches(name, list(known), n=1)
        self.suggestion = matches[0] if matches else None
        message = f"unknown column {name!r}"
        if self.suggestion:
            message += f"; did you mean {self.suggestion!r}?"
        super().__init__(message, detail={"column": name, "suggestion": self.suggestion})


class MismatchedDatasetError(ToolError):
    code = "mismatched_dataset"


class DataFormatError(ToolError):
    """Malformed input file (bad cell, wrong column count, missing header)."""

    code = "data_format"


class QuerySyntaxError(ToolError):
    code = "query_syntax"

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = tuple(expected)
        text = f"syntax error at offset {offset}: {message}"
        if self.expected:
            text += " (expected " + " | ".join(sorted(self.expected)) + ")"
        super().__init__(text, detail={"offset": offset, "expected": sorted(self.expected)})


class DegenerateInputError(ToolError):
    """Statistic undefined for the given input (too few pairs, zero variance)."""

    code = "degenerate_input"


class InfeasibleSpecError(ToolError):
    """Fixture targets are mutually unsatisfiable; message names the constraint."""

    code = "infeasible_spec"
