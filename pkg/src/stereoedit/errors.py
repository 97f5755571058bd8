"""Exception hierarchy shared across the package."""


class StereoEditError(Exception):
    """Base class for all package errors."""


# --- audio ingestion ---

class UnreadableFile(StereoEditError):
    pass


class UnsupportedFormat(StereoEditError):
    pass


class SilentClip(StereoEditError):
    pass


# --- edit engine ---

class TargetNotFound(StereoEditError):
    pass


class AmbiguousTarget(StereoEditError):
    pass


class EmptySceneResult(StereoEditError):
    pass


# --- plan language ---

class ParseError(StereoEditError):
    """Template-text parse failure; carries position and expectation hint."""

    def __init__(self, message, position=None, expected=None):
        super().__init__(message)
        self.position = position
        self.expected = expected


class JsonSyntaxError(StereoEditError):
    pass


class SchemaError(StereoEditError):
    pass


# --- designer ---

class NoCompatibleScenario(StereoEditError):
    pass


class EndpointUnreachable(StereoEditError):
    pass


class AuthFailure(StereoEditError):
    pass


class MalformedResponse(StereoEditError):
    pass


class ValidationFailed(StereoEditError):
    pass


# --- catalog / pipeline ---

class EmptyCatalog(StereoEditError):
    pass


class CatalogMiss(StereoEditError):
    pass


class FailureBudgetExceeded(StereoEditError):
    pass


class OutputDirNotWritable(StereoEditError):
    pass


# --- external editor adapters ---

class AdapterTimeout(StereoEditError):
    pass


class AdapterProtocolError(StereoEditError):
    pass


# --- metrics ---

class LengthMismatch(StereoEditError):
    pass


class NoVoicedFrames(StereoEditError):
    pass
