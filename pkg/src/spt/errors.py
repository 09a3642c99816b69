"""Exception hierarchy shared by every stage of the toolchain."""


class SptError(Exception):
    """Base class for all toolchain errors."""


# Machine model

class InvalidFaultError(SptError):
    """A fault refers to a chip, core or link outside the machine."""


class LinkOccupiedError(SptError):
    """A virtual chip was attached to a link that is already connected."""


# Graphs

class MixedGraphError(SptError):
    """Application and machine elements were mixed in one graph or session."""


class GraphError(SptError):
    """A graph element is malformed or refers to a missing vertex."""


class UnsatisfiableVertexError(SptError):
    """A single atom (or machine vertex) needs more than one core can give."""


# Mapping

class PlacementError(SptError):
    """Vertices could not be placed; ``constraint`` names the binding limit."""

    def __init__(self, message, constraint=None):
        super().__init__(message)
        self.constraint = constraint


class RoutingError(SptError):
    """A sink could not be reached from its source over live links."""

    def __init__(self, message, sink=None):
        super().__init__(message)
        self.sink = sink


class KeyAllocationError(SptError):
    """The 32-bit routing key space is exhausted."""


class TableOverflowError(SptError):
    """A routing table still exceeds its chip's entry budget."""

    def __init__(self, message, chip=None):
        super().__init__(message)
        self.chip = chip


class TagAllocationError(SptError):
    """More IP tags are needed on an Ethernet chip than it has slots."""


class DatabaseNotReadyError(SptError):
    """The mapping database was queried before mapping wrote it."""


# Pipeline

class UnsatisfiablePlanError(SptError):
    """No ordering of the registered algorithms reaches the goals."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


class AmbiguousPlanError(SptError):
    """Two selected algorithms would produce the same artifact."""


class PipelineFailure(SptError):
    """An algorithm raised while the pipeline was executing.

    ``store`` is the artifact store as it stood when the failing algorithm
    started, so earlier outputs can still be inspected.
    """

    def __init__(self, algorithm, cause, store):
        super().__init__(f"algorithm {algorithm!r} failed: {cause}")
        self.algorithm = algorithm
        self.cause = cause
        self.store = store


# Simulation and data

class LoadError(SptError):
    """Something could not be loaded onto the simulated machine."""


class ConfigurationError(SptError):
    """A vertex is missing something it needs at load time (e.g. a tag)."""


class RunFailedError(SptError):
    """One or more cores ended a run in an error state or incomplete."""

    def __init__(self, message, failed_cores=(), diagnostics=(), provenance=None):
        super().__init__(message)
        self.failed_cores = tuple(failed_cores)
        self.diagnostics = tuple(diagnostics)
        self.provenance = provenance


class DataGenerationError(SptError):
    """A generated data image does not fit the vertex's declared SDRAM."""


class UnrunnableError(SptError):
    """A recording vertex cannot record even a single time step."""


class ExtractionTimeoutError(SptError):
    """A read from the machine gave up after the retry limit."""
