class MissingInputError(Exception):
    """A file referenced by the manifest is absent or holds no data."""
