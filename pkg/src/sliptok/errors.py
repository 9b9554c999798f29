class DataError(ValueError):
    """Raised when an input file or in-memory structure violates its contract."""
