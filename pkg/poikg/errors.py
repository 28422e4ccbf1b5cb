class PoikgError(Exception):
    r"""Base error for any pipeline related errors."""

    exit_code: int = 1


class ConfigError(PoikgError):
    r"""Error raised when a configuration value or config file is invalid."""

    exit_code = 2


class DataError(PoikgError):
    r"""Error raised when input data cannot support the requested operation."""

    exit_code = 3


class CheckinFormatError(DataError):
    r"""Error raised when a check-in file is missing, has unmappable columns or holds no valid record."""

    pass


class SplitError(DataError):
    r"""Error raised when a check-in log cannot be split by date."""

    pass


class RegionError(DataError):
    r"""Error raised when regions cannot be fitted or a point has no region."""

    pass


class UnknownEntityError(DataError):
    r"""Error raised when a user or POI key is not in the graph vocabulary."""

    pass


class UnknownRelationError(DataError):
    r"""Error raised when a relation path or one of its components is not in the vocabulary."""

    pass


class NegativeSamplingError(DataError):
    r"""Error raised when the requested number of corrupted triples cannot be drawn."""

    pass


class MissingCoordinatesError(DataError):
    r"""Error raised when a user has no home location or a POI has no coordinates."""

    pass


class EmptyCandidateSetError(DataError):
    r"""Error raised when candidate extraction retains no pair. Usually indicates over-aggressive thresholds."""

    pass


class EmptyCandidatePoolError(DataError):
    r"""Error raised when a query has no POI left to rank."""

    pass


class CandidateIndexError(DataError):
    r"""Error raised when a user or POI was extracted away from the spatio-temporal factorization."""

    pass


class DivergenceError(PoikgError):
    r"""Error raised when a training objective becomes non-finite."""

    exit_code = 4


class DimensionMismatchError(PoikgError, ValueError):
    r"""Error raised when vector or matrix shapes do not conform."""

    pass
