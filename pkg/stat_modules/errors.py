#!/usr/bin/env python3
"""
stat_modules/errors.py

Exception hierarchy shared by every hyperrecon module.
"""
from typing import Optional


class ReconstructionError(Exception):
    """Base class for all library errors."""


class InvalidStructureError(ReconstructionError, ValueError):
    """A Hypergraph / CategoricalGraph / matrix violates its type invariants."""


class DimensionMismatchError(ReconstructionError, ValueError):
    """Two objects that must share a vertex count do not."""


class DegenerateTruncationError(ReconstructionError, ArithmeticError):
    """A truncated gamma interval carries no mass the samplers can resolve."""


class EmptyTraceError(ReconstructionError, ValueError):
    """An estimator was asked to summarize a chain with no retained samples."""


class UndefinedMetricError(ReconstructionError, ArithmeticError):
    """A metric's denominator is zero (e.g. ε with no interacting pairs)."""


class ConfigError(ReconstructionError, ValueError):
    """Configuration failed validation."""


class FormatError(ReconstructionError, ValueError):
    """
    Parse error in one of the text formats.
    Carries the 1-based line (and optional column) of the offending record.
    """
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)
