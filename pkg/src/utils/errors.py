"""
Exception hierarchy shared by every package.

Each error carries a ``detail`` dict so callers (and the CLI) can report
structured context without parsing messages. ``UserInputError`` maps to
exit code 2 and ``NumericalError`` to exit code 1.
"""

from typing import Any, Dict, Optional


class ChangeScoreError(Exception):
    exit_code = 1

    def __init__(self, message: str, detail: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.detail = detail or {}


class UserInputError(ChangeScoreError):
    exit_code = 2


class NumericalError(ChangeScoreError):
    exit_code = 1


class UsageError(UserInputError):
    pass


class EmptySampleError(UserInputError):
    pass
