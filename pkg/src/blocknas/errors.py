"""Exception hierarchy shared across the package."""


class BlockNasError(Exception):
    """Base class for all blocknas errors."""


class SpaceValidationError(BlockNasError):
    """A search-space definition violates an invariant.

    Messages name the offending JSON path (e.g. ``nodes[2].blocks[0].flops``)
    when the space came from a file.
    """


class ConfigError(BlockNasError):
    """A network configuration is invalid for the active space."""


class OracleError(BlockNasError):
    """An oracle cannot answer a query (missing record, malformed file)."""


class CapExceededError(BlockNasError):
    """An exhaustive operation would touch more configs than the cap allows."""


class EstimationError(BlockNasError):
    """Block-delta estimation cannot proceed (degenerate node, bad mode)."""


class DeviceError(BlockNasError):
    """A device id is unknown or not covered by the required tables."""


class FingerprintError(BlockNasError):
    """A delta table does not belong to the search space it is used with."""


class SolverError(BlockNasError):
    """The search solver was given an ill-formed problem."""
