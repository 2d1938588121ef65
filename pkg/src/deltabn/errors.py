"""Exception types shared across the package."""


class DeltaBnError(Exception):
    """Base class for every error raised by this package."""


class DataError(DeltaBnError):
    """Malformed input or a violated data invariant; message carries the row/column."""


class ConstraintError(DeltaBnError):
    """Whitelist/blacklist sets are inconsistent or reference unknown nodes."""


class CycleError(DeltaBnError):
    """A graph that must be acyclic contains a cycle."""


class UndefinedCorrelationError(DeltaBnError):
    """Pearson correlation requested for a zero-variance vector."""


class CollinearityError(DeltaBnError):
    """OLS design matrix is rank deficient."""


class InsufficientDataError(DeltaBnError):
    """A parameter block has too few rows to be fitted."""


class InfeasibleEvidenceError(DeltaBnError):
    """Evidence contradicts a deterministic (zero-variance) relation."""


class SearchOverflowError(DeltaBnError):
    """Hill climbing exceeded its iteration cap; indicates a scoring bug."""
