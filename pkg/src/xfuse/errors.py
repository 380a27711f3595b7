"""Exception types shared across the toolkit.

The CLI maps ValidationError to exit code 1 and file/format problems
(FrameFormatError, OSError) to exit code 2.
"""


class ValidationError(ValueError):
    """A contract violation on in-memory data or configuration."""


class FrameFormatError(Exception):
    """A frame file or manifest whose content does not match the format."""
