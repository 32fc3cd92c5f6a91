"""Exception taxonomy shared by all pipeline stages."""


class DriftlensError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(DriftlensError):
    """Bad or missing configuration: columns, flags, credentials, prompt inputs."""


class DataError(DriftlensError):
    """Malformed input data: duplicate paths, unparseable labels, broken patches."""


class TransportError(DriftlensError):
    """LLM endpoint failure after retries are exhausted."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class OrchestrationError(DriftlensError):
    """Debate role/round schedule violation."""


class PipelineStageError(DriftlensError):
    """A pipeline stage failed; carries the stage name, partial artifacts stay on disk."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
