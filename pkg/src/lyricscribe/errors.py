"""Exception hierarchy shared by every backend adapter."""


class BackendError(Exception):
    """Base class for failures talking to a model backend."""


class TransportError(BackendError):
    """Backend unreachable or returned a server error; worth retrying."""


class InputError(BackendError):
    """The backend rejected the input (e.g. unreadable audio). Fatal for the track."""


class ProtocolError(BackendError):
    """The backend answered with a body that does not follow the wire contract."""


class ResponseParseError(ValueError):
    """No JSON object could be extracted from a chat reply."""


class ResponseSchemaError(ValueError):
    """A chat reply parsed as JSON but violates the three-field schema."""


class JournalError(RuntimeError):
    """A resume journal is unreadable or inconsistent with the corpus."""
