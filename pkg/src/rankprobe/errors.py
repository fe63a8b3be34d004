"""Shared exception types."""


class RefusalError(Exception):
    """The requested computation is out of the tool's honest range
    (enumeration too large, conditioning event too rare, sample too small).
    The CLI maps this to exit code 3."""
