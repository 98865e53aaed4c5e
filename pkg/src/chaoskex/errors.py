"""Exception types shared across the package."""


class ChaoskexError(Exception):
    """Base class for all package errors."""


class MalformedElementError(ChaoskexError):
    """A field element is out of range for its modulus."""


class NoInverseError(ChaoskexError):
    """Modular inverse requested for a non-invertible element."""


class NonCoprimeModuliError(ChaoskexError):
    """CRT moduli are not pairwise coprime."""


class RegistrationRefusedError(ChaoskexError):
    """The server refused a registration request (e.g. duplicate identity)."""


class ProtocolOrderError(ChaoskexError):
    """A state machine was driven out of phase order."""


class NotEstablishedError(ChaoskexError):
    """Session key requested before the handshake established one."""


class TransportError(ChaoskexError):
    """Channel I/O failure, distinct from a protocol-level abort."""


class CiphertextError(ChaoskexError):
    """Authenticated decryption failed (bad key, tag, or shape)."""


class BaselineAbortError(ChaoskexError):
    """A reference-protocol party stopped (identity or MAC check failed)."""


class StorageError(ChaoskexError):
    """A credential or store file is missing, corrupt, or mismatched."""


class FrameError(ChaoskexError):
    """Base class for wire-format parse errors."""


class TruncatedFrameError(FrameError):
    """Frame shorter than its declared or minimum length."""


class UnknownTagError(FrameError):
    """Frame carries an undefined message tag."""


class FieldOverflowError(FrameError):
    """A field length prefix points past the end of the frame."""


class TrailingGarbageError(FrameError):
    """Frame has extra bytes after the last declared field."""


class FieldFormatError(FrameError):
    """A field's content is invalid (wrong width, bad padding, non-canonical integer)."""


class FrameTooLargeError(FrameError):
    """Encoded payload would exceed the 2^24-byte frame limit."""
