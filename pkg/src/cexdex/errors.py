"""Exception hierarchy shared by the cexdex modules."""

from __future__ import annotations

from dataclasses import dataclass


class CexDexError(Exception):
    """Base class for all errors raised by cexdex."""


class DomainError(CexDexError, ValueError):
    """An argument lies outside the domain of an operation (nonpositive price, negative amount)."""


class SlotRangeError(CexDexError, IndexError):
    """A slot's lead-up window is not covered by the price series."""


class UndefinedCorrelationError(CexDexError, ValueError):
    """Correlation requested on a series with zero variance or too few points."""


class ScenarioError(CexDexError, ValueError):
    """A scenario or config file is invalid.

    Parameters
    ----------
    field : str
        Dotted path of the offending field, e.g. ``searchers[1].pool_set``.
    message : str
        Human-readable reason.
    """

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class BlockValidationError(CexDexError, ValueError):
    """A block trace violates one or more of its invariants."""

    def __init__(self, slot: int, violations: list[str]) -> None:
        super().__init__(f"block {slot}: " + "; ".join(violations))
        self.slot = slot
        self.violations = violations


@dataclass(frozen=True)
class ValidationIssue:
    """One problem found while loading a dataset."""

    file: str
    line: int | None
    kind: str  # parse | referential | invariant | checksum | missing
    message: str

    def __str__(self) -> str:
        where = self.file if self.line is None else f"{self.file}:{self.line}"
        return f"{where} [{self.kind}] {self.message}"


class DatasetValidationError(CexDexError):
    """Raised when a dataset has validation issues and the caller asked for strict loading."""

    def __init__(self, issues: list[ValidationIssue]) -> None:
        super().__init__(f"{len(issues)} validation issue(s); first: {issues[0]}")
        self.issues = issues
