"""Exception taxonomy shared across the package.

Exit-code contract for the CLI: 0 ok, 2 input error, 3 consistency error,
4 transport error. Every exception below carries the code it maps to.
"""


class ObsdxError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InputError(ObsdxError):
    """Bad user-supplied input: files, documents, values."""

    exit_code = 2


class ParseError(InputError):
    """A document could not be parsed; message names the location."""


class ValidationError(InputError):
    """A document parsed but violates a schema or uniqueness rule."""


class MissingEmbeddingError(InputError):
    """An embedding store has no entry for the requested key."""

    def __init__(self, key: str):
        super().__init__(f"no embedding stored for key {key!r}")
        self.key = key


class CorruptStoreError(InputError):
    """An embedding store file failed magic/version/size/index checks."""


class ConsistencyError(ObsdxError):
    """Artifacts that must agree do not (dimensions, fingerprints, ...)."""

    exit_code = 3


class FingerprintMismatchError(ConsistencyError):
    """A trained model was built against a different catalog."""


class TransportError(ObsdxError):
    """The embedding service could not be reached or answered with an error."""

    exit_code = 4
