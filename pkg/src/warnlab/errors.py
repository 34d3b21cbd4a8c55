"""Exception hierarchy shared across the package.

Every error carries a short ``category`` slug that the CLI prints as
``error[<category>]: <message>`` before exiting nonzero.
"""

from __future__ import annotations


class WarnlabError(Exception):
    category = "error"


class LedgerParseError(WarnlabError):
    """A ledger line could not be decoded or fails field validation."""

    category = "parse"

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class IntegrityError(WarnlabError):
    """A record references something the history does not contain."""

    category = "integrity"


class OrderingError(WarnlabError):
    """Revision arguments violate the required chronological order."""

    category = "ordering"


class ValidationError(WarnlabError):
    """An argument or configuration value is out of contract."""

    category = "validation"


class ExtractionError(WarnlabError):
    """Feature extraction failed for one or more warnings."""

    category = "extraction"

    def __init__(self, message: str, failures: dict | None = None):
        super().__init__(message)
        self.failures = failures or {}


class ModelError(WarnlabError):
    category = "model"
