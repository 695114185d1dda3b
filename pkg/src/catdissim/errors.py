"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class CatDissimError(Exception):
    exit_code = 2


class UsageError(CatDissimError, ValueError):
    exit_code = 1


class DataError(CatDissimError, ValueError):
    """Malformed input data, schema mismatches, out-of-range indices."""

    exit_code = 2


class SchemaMismatchError(DataError):
    pass


class UnseenCategoryError(DataError):
    """A row uses a category that was not observed when the dissimilarities were built."""


class DomainError(CatDissimError, ArithmeticError):
    """A formula is undefined for the given input (zero denominators, log of zero, ...)."""

    exit_code = 3
