"""Wire framing and handshake channels.

Frame layout: a 4-byte big-endian total length (counting the prefix
itself), a 1-byte message tag, then the message fields in declaration
order, each with its own 4-byte length prefix.  Integers travel
big-endian minimal-width, so encoding is deterministic and injective.

Two channels run the handshake: an in-process loopback (with an
optional interceptor hook for tamper experiments) and a stream socket.
Both produce the same transcript for the same seeds.
"""

from __future__ import annotations

import itertools
import random
import socket
import threading
from dataclasses import dataclass

from .errors import (
    FieldFormatError,
    FrameError,
    FrameTooLargeError,
    RegistrationRefusedError,
    TrailingGarbageError,
    TransportError,
    TruncatedFrameError,
    UnknownTagError,
)
from .primitives import DIGEST_LEN, NONCE_LEN, Identity
from .protocol import (
    AbortMessage,
    AuthConfirm,
    AuthRequest,
    AuthResponse,
    CredentialStore,
    Phase,
    ProtocolConfig,
    RegisterRequest,
    RegisterResponse,
    ServerSession,
    UserSession,
    register_server_process,
)
from .wire import (
    MAX_FIELD_LEN,
    encode_fields,
    int_from_bytes,
    int_to_bytes,
    split_fields_with_spans,
)

TAG_REGISTER_REQUEST = 0x01
TAG_REGISTER_RESPONSE = 0x02
TAG_AUTH_REQUEST = 0x11
TAG_AUTH_RESPONSE = 0x12
TAG_AUTH_CONFIRM = 0x13
TAG_ABORT = 0x7F

_HEADER_LEN = 5  # 4-byte total length + 1-byte tag
_MAX_REASON_LEN = 512

DIR_USER_TO_SERVER = "U->S"
DIR_SERVER_TO_USER = "S->U"

# Field kinds: how a message attribute maps to/from its wire field.
#   identity  32-byte padded identity
#   nonce16   exactly 16 raw bytes
#   bytes32   exactly 32 raw bytes
#   bytes     raw bytes, any length
#   int       canonical big-endian non-negative integer
#   text      UTF-8 string (bounded)
_SPECS: dict[int, tuple[type, tuple[tuple[str, str], ...]]] = {
    TAG_REGISTER_REQUEST: (
        RegisterRequest,
        (
            ("identity", "identity"),
            ("lifted_sum", "int"),
            ("frac_digits", "int"),
            ("m1", "int"),
            ("pw_digest", "bytes32"),
        ),
    ),
    TAG_REGISTER_RESPONSE: (
        RegisterResponse,
        (
            ("server_id", "identity"),
            ("pseudonym", "nonce16"),
            ("wrapped_secret", "bytes32"),
            ("mask_key", "bytes32"),
        ),
    ),
    TAG_AUTH_REQUEST: (
        AuthRequest,
        (
            ("pseudonym", "nonce16"),
            ("masked_credential", "bytes32"),
            ("masked_point", "bytes"),
            ("masked_identity", "bytes32"),
            ("base_point", "int"),
            ("modulus", "int"),
        ),
    ),
    TAG_AUTH_RESPONSE: (
        AuthResponse,
        (
            ("server_id", "identity"),
            ("masked_point", "bytes"),
            ("server_proof", "bytes32"),
        ),
    ),
    TAG_AUTH_CONFIRM: (AuthConfirm, (("user_proof", "bytes32"),)),
    TAG_ABORT: (AbortMessage, (("reason", "text"),)),
}

_TAG_BY_TYPE = {cls: tag for tag, (cls, _) in _SPECS.items()}

ProtocolMessage = (
    RegisterRequest
    | RegisterResponse
    | AuthRequest
    | AuthResponse
    | AuthConfirm
    | AbortMessage
)


def _encode_value(kind: str, value) -> bytes:
    if kind == "identity":
        return value.padded()
    if kind == "nonce16":
        if len(value) != NONCE_LEN:
            raise ValueError(f"expected {NONCE_LEN} bytes, got {len(value)}")
        return bytes(value)
    if kind == "bytes32":
        if len(value) != DIGEST_LEN:
            raise ValueError(f"expected {DIGEST_LEN} bytes, got {len(value)}")
        return bytes(value)
    if kind == "bytes":
        return bytes(value)
    if kind == "int":
        return int_to_bytes(value)
    if kind == "text":
        data = value.encode("utf-8")
        if len(data) > _MAX_REASON_LEN:
            raise ValueError("text field too long")
        return data
    raise AssertionError(f"unknown field kind {kind!r}")


def _decode_value(kind: str, data: bytes):
    if kind == "identity":
        try:
            return Identity.from_padded(data)
        except ValueError as exc:
            raise FieldFormatError(str(exc)) from None
    if kind == "nonce16":
        if len(data) != NONCE_LEN:
            raise FieldFormatError(f"expected {NONCE_LEN}-byte field, got {len(data)}")
        return data
    if kind == "bytes32":
        if len(data) != DIGEST_LEN:
            raise FieldFormatError(f"expected {DIGEST_LEN}-byte field, got {len(data)}")
        return data
    if kind == "bytes":
        return data
    if kind == "int":
        return int_from_bytes(data)
    if kind == "text":
        if len(data) > _MAX_REASON_LEN:
            raise FieldFormatError("text field too long")
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError:
            raise FieldFormatError("text field is not valid UTF-8") from None
    raise AssertionError(f"unknown field kind {kind!r}")


def encode_frame(message: ProtocolMessage) -> bytes:
    """Serialize one protocol message into a self-delimiting frame."""
    tag = _TAG_BY_TYPE.get(type(message))
    if tag is None:
        raise ValueError(f"not a wire message: {type(message).__name__}")
    _, spec = _SPECS[tag]
    payload = encode_fields([_encode_value(kind, getattr(message, name)) for name, kind in spec])
    if len(payload) >= MAX_FIELD_LEN:
        raise FrameTooLargeError(f"payload of {len(payload)} bytes exceeds frame limit")
    total = _HEADER_LEN + len(payload)
    return total.to_bytes(4, "big") + bytes([tag]) + payload


def _split_frame(data: bytes) -> tuple[int, bytes]:
    """Outer parse: check the length prefix, return (tag, payload)."""
    if len(data) < 4:
        raise TruncatedFrameError("frame shorter than its length prefix")
    total = int.from_bytes(data[:4], "big")
    if total < _HEADER_LEN or total > len(data):
        raise TruncatedFrameError(f"frame claims {total} bytes, have {len(data)}")
    if total < len(data):
        raise TrailingGarbageError(f"{len(data) - total} bytes past the frame end")
    if total - _HEADER_LEN >= MAX_FIELD_LEN:
        raise FrameTooLargeError("frame payload exceeds size limit")
    return data[4], data[_HEADER_LEN:]


def decode_frame(data: bytes) -> ProtocolMessage:
    """Parse untrusted bytes; exact inverse of encode_frame on valid input."""
    tag, payload = _split_frame(data)
    if tag not in _SPECS:
        raise UnknownTagError(f"unknown message tag 0x{tag:02x}")
    cls, spec = _SPECS[tag]
    fields, _ = split_fields_with_spans(payload, len(spec))
    values = {name: _decode_value(kind, raw) for (name, kind), raw in zip(spec, fields)}
    return cls(**values)


def frame_field_spans(data: bytes) -> list[tuple[str, int, int]]:
    """Name each field's absolute byte range inside a valid frame."""
    tag, payload = _split_frame(data)
    if tag not in _SPECS:
        raise UnknownTagError(f"unknown message tag 0x{tag:02x}")
    _, spec = _SPECS[tag]
    _, spans = split_fields_with_spans(payload, len(spec))
    return [
        (name, start + _HEADER_LEN, end + _HEADER_LEN)
        for (name, _), (start, end) in zip(spec, spans)
    ]


# --------------------------------------------------------------------------
# Transcripts
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TranscriptEntry:
    """One frame as it crossed the channel (kept raw so tampering shows)."""

    index: int
    direction: str
    frame: bytes

    def message(self) -> ProtocolMessage:
        return decode_frame(self.frame)


def dump_transcript(entries: list[TranscriptEntry]) -> str:
    """One line per frame: index, direction marker, hex payload."""
    return "\n".join(f"{e.index} {e.direction} {e.frame.hex()}" for e in entries)


def parse_transcript(text: str) -> list[TranscriptEntry]:
    """Inverse of dump_transcript; enforces strictly increasing indices."""
    entries: list[TranscriptEntry] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'index direction hex'")
        try:
            index = int(parts[0])
            frame = bytes.fromhex(parts[2])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if entries and index <= entries[-1].index:
            raise ValueError(f"line {lineno}: indices must be strictly increasing")
        entries.append(TranscriptEntry(index, parts[1], frame))
    return entries


# --------------------------------------------------------------------------
# Session drivers
# --------------------------------------------------------------------------

class UserDriver:
    """Feeds raw frames to a UserSession and emits its replies as frames."""

    def __init__(self, session: UserSession):
        self.session = session

    def start(self) -> bytes:
        return encode_frame(self.session.start())

    def on_frame(self, data: bytes) -> bytes | None:
        """Handle one inbound frame; returns the next outbound frame, if any."""
        session = self.session
        if session.terminal:
            return None
        try:
            message = decode_frame(data)
        except FrameError:
            return encode_frame(session.abort("malformed"))
        if isinstance(message, AbortMessage):
            session.peer_aborted(message.reason)
            return None
        if isinstance(message, AuthResponse) and session.phase is Phase.AWAIT_REPLY:
            result = session.finish(message)
            return encode_frame(result)
        return encode_frame(session.abort("malformed"))


class ServerDriver:
    """Server-side frame dispatch: registration requests and auth runs."""

    def __init__(
        self,
        session: ServerSession,
        *,
        registration_rng: random.Random | None = None,
    ):
        self.session = session
        self._registration_rng = registration_rng

    def _register(self, request: RegisterRequest) -> bytes:
        if self._registration_rng is None:
            return encode_frame(AbortMessage("registration-refused: not accepted here"))
        session = self.session
        try:
            response = register_server_process(
                request,
                session.server_id,
                session.store,
                self._registration_rng,
                session.config,
            )
        except RegistrationRefusedError as exc:
            return encode_frame(AbortMessage(f"registration-refused: {exc}"))
        return encode_frame(response)

    def on_frame(self, data: bytes) -> bytes | None:
        """Handle one inbound frame; returns the next outbound frame, if any."""
        session = self.session
        try:
            message = decode_frame(data)
        except FrameError:
            if session.terminal:
                return None
            return encode_frame(session.abort("malformed"))
        if isinstance(message, RegisterRequest):
            return self._register(message)
        if session.terminal:
            return None
        if isinstance(message, AbortMessage):
            session.peer_aborted(message.reason)
            return None
        if isinstance(message, AuthRequest) and session.phase is Phase.INIT:
            result = session.respond(message)
            return encode_frame(result)
        if isinstance(message, AuthConfirm) and session.phase is Phase.AWAIT_PROOF:
            result = session.confirm(message)
            return None if result is None else encode_frame(result)
        return encode_frame(session.abort("malformed"))


def run_handshake(
    user_session: UserSession,
    server_session: ServerSession,
    *,
    intercept=None,
) -> tuple[UserSession, ServerSession, list[TranscriptEntry]]:
    """Drive one full handshake over an in-process loopback channel.

    `intercept(index, direction, frame) -> bytes | None` may rewrite any
    frame in flight (None leaves it untouched); the transcript records
    what was actually delivered.
    """
    user = UserDriver(user_session)
    server = ServerDriver(server_session)
    entries: list[TranscriptEntry] = []

    def deliver(direction: str, data: bytes) -> bytes:
        if intercept is not None:
            replacement = intercept(len(entries), direction, data)
            if replacement is not None:
                data = replacement
        entries.append(TranscriptEntry(len(entries), direction, data))
        return data

    outbound = deliver(DIR_USER_TO_SERVER, user.start())
    receiver = "server"
    for _ in range(8):
        if receiver == "server":
            response = server.on_frame(outbound)
            if response is None:
                break
            outbound = deliver(DIR_SERVER_TO_USER, response)
            receiver = "user"
        else:
            response = user.on_frame(outbound)
            if response is None:
                break
            outbound = deliver(DIR_USER_TO_SERVER, response)
            receiver = "server"
    return user_session, server_session, entries


# --------------------------------------------------------------------------
# Stream-socket channel
# --------------------------------------------------------------------------

class FrameStream:
    """Blocking frame reader/writer over a connected stream socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock

    def send_frame(self, data: bytes):
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from None

    def recv_frame(self) -> bytes | None:
        """Read one frame; None on clean end-of-stream before a frame starts."""
        header = self._recv_exact(4, eof_ok=True)
        if header is None:
            return None
        total = int.from_bytes(header, "big")
        if not _HEADER_LEN <= total <= _HEADER_LEN + MAX_FIELD_LEN:
            raise TransportError(f"unreasonable frame length {total}")
        rest = self._recv_exact(total - 4, eof_ok=False)
        assert rest is not None
        return header + rest

    def _recv_exact(self, count: int, *, eof_ok: bool) -> bytes | None:
        chunks = []
        remaining = count
        while remaining:
            try:
                chunk = self._sock.recv(remaining)
            except OSError as exc:
                raise TransportError(f"receive failed: {exc}") from None
            if not chunk:
                if eof_ok and remaining == count:
                    return None
                raise TransportError("connection closed mid-frame")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)


class SocketServer:
    """Accepts connections and serves one ServerSession per connection.

    With a seed, connection i uses a deterministic generator derived
    from seed+i, so a single seeded connection reproduces the loopback
    byte stream exactly.
    """

    def __init__(
        self,
        store: CredentialStore,
        server_id: Identity,
        *,
        config: ProtocolConfig | None = None,
        host: str = "127.0.0.1",
        port: int = 0,
        seed: int | None = None,
        allow_registration: bool = True,
    ):
        self.store = store
        self.server_id = server_id
        self.config = config if config is not None else ProtocolConfig()
        self._seed = seed
        self._allow_registration = allow_registration
        self._listener = socket.create_server((host, port))
        self._listener.settimeout(0.2)
        self.host, self.port = self._listener.getsockname()[:2]
        self._stop = threading.Event()
        self._accept_thread: threading.Thread | None = None
        self._conn_threads: list[threading.Thread] = []
        self._conn_ids = itertools.count()
        self._lock = threading.Lock()
        self.finished_sessions: list[ServerSession] = []

    def __enter__(self) -> "SocketServer":
        self.start()
        return self

    def __exit__(self, *exc_info):
        self.stop()

    def start(self):
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def stop(self):
        self._stop.set()
        if self._accept_thread is not None:
            self._accept_thread.join()
        self._listener.close()
        for thread in self._conn_threads:
            thread.join(timeout=5.0)

    def serve_forever(self):
        """Run the accept loop on the calling thread until interrupted."""
        try:
            self._accept_loop()
        except KeyboardInterrupt:
            self._stop.set()

    def _rng_for_connection(self, index: int) -> random.Random:
        if self._seed is None:
            return random.SystemRandom()
        return random.Random(self._seed + index)

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                sock, _addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            thread = threading.Thread(target=self._serve_connection, args=(sock,), daemon=True)
            self._conn_threads.append(thread)
            thread.start()

    def _serve_connection(self, sock: socket.socket):
        rng = self._rng_for_connection(next(self._conn_ids))
        session = ServerSession(self.store, self.server_id, rng, self.config)
        driver = ServerDriver(
            session, registration_rng=rng if self._allow_registration else None
        )
        stream = FrameStream(sock)
        try:
            while True:
                frame = stream.recv_frame()
                if frame is None:
                    break
                response = driver.on_frame(frame)
                if response is not None:
                    stream.send_frame(response)
        except TransportError:
            pass
        finally:
            sock.close()
            with self._lock:
                self.finished_sessions.append(session)


def socket_handshake(
    user_session: UserSession, host: str, port: int, *, timeout: float = 10.0
) -> list[TranscriptEntry]:
    """Run one handshake as the client over a stream socket."""
    driver = UserDriver(user_session)
    entries: list[TranscriptEntry] = []

    def record(direction: str, data: bytes):
        entries.append(TranscriptEntry(len(entries), direction, data))

    try:
        with socket.create_connection((host, port), timeout=timeout) as sock:
            stream = FrameStream(sock)
            outbound = driver.start()
            record(DIR_USER_TO_SERVER, outbound)
            stream.send_frame(outbound)
            while not user_session.terminal:
                reply = stream.recv_frame()
                if reply is None:
                    raise TransportError("server closed the connection mid-handshake")
                record(DIR_SERVER_TO_USER, reply)
                response = driver.on_frame(reply)
                if response is not None:
                    record(DIR_USER_TO_SERVER, response)
                    stream.send_frame(response)
    except OSError as exc:
        raise TransportError(f"connection failed: {exc}") from None
    return entries


def socket_register(
    identity: Identity,
    password: bytes,
    host: str,
    port: int,
    rng: random.Random,
    config: ProtocolConfig | None = None,
    *,
    timeout: float = 10.0,
):
    """Register over a stream socket; returns the user's credentials."""
    from .protocol import register_user_begin, register_user_complete

    cfg = config if config is not None else ProtocolConfig()
    request, pending = register_user_begin(identity, password, rng, cfg)
    try:
        with socket.create_connection((host, port), timeout=timeout) as sock:
            stream = FrameStream(sock)
            stream.send_frame(encode_frame(request))
            reply = stream.recv_frame()
    except OSError as exc:
        raise TransportError(f"connection failed: {exc}") from None
    if reply is None:
        raise TransportError("server closed the connection before replying")
    message = decode_frame(reply)
    if isinstance(message, AbortMessage):
        raise RegistrationRefusedError(message.reason)
    if not isinstance(message, RegisterResponse):
        raise TransportError(f"unexpected reply type {type(message).__name__}")
    return register_user_complete(pending, message)
