"""Password-based registration and authenticated key agreement.

Registration: the user derives a chaotic-sum seed and a salted password
digest, the server folds the seed into a two-modulus CRT secret and
hands back a pseudonym plus masked credentials.  Authentication: three
messages carrying masked semigroup points establish a shared session
key with mutual explicit key confirmation.  Neither phase ever puts a
party identity or an unmasked point on the wire.
"""

from __future__ import annotations

import enum
import random
import threading
from dataclasses import dataclass

from . import logistic
from .chebyshev import ChebyParams, decode_element, element_width, encode_element
from .errors import (
    MalformedElementError,
    NotEstablishedError,
    ProtocolOrderError,
    RegistrationRefusedError,
)
from .numtheory import CrtSystem, crt_solve, gen_coprime, gen_prime, is_probable_prime
from .primitives import (
    DIGEST_LEN,
    NONCE_LEN,
    Identity,
    Meter,
    TAG_CRT_SECRET,
    TAG_MASK_KEY,
    TAG_NONCE_MASK,
    TAG_PW_DIGEST,
    TAG_SERVER_PROOF,
    TAG_SESSION_KEY,
    TAG_USER_PROOF,
    TAG_WRAP,
    ct_equal,
    hash_algorithms,
    hash_tuple,
    new_nonce,
    xor_bytes,
)
from .wire import int_to_bytes

# Abort reasons reported to the peer and recorded on the session.
ABORT_UNKNOWN_USER = "unknown-user"
ABORT_AUTH_FAILED = "auth-failed"
ABORT_MALFORMED = "malformed"
ABORT_SERVER_AUTH_FAILED = "server-auth-failed"
ABORT_USER_AUTH_FAILED = "user-auth-failed"


@dataclass(frozen=True)
class ProtocolConfig:
    """Tunable sizes; defaults suit interactive use, tests shrink them."""

    hash_algo: str = "sha256"
    modulus_bits: int = 256
    crt_modulus_bits: int = 64
    logistic_terms: int = 64
    min_modulus_bits: int = 64
    max_modulus_bits: int = 4096

    def __post_init__(self):
        if self.hash_algo not in hash_algorithms():
            raise ValueError(f"unsupported hash algorithm: {self.hash_algo!r}")
        if self.modulus_bits < 8:
            raise ValueError("modulus_bits too small")
        if self.crt_modulus_bits < 8:
            raise ValueError("crt_modulus_bits too small")
        if self.logistic_terms < 1:
            raise ValueError("need at least one logistic term")
        if not self.min_modulus_bits <= self.modulus_bits <= self.max_modulus_bits:
            raise ValueError("modulus_bits outside accepted window")


DEFAULT_CONFIG = ProtocolConfig()


# --------------------------------------------------------------------------
# Messages
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RegisterRequest:
    """User -> server over the registration channel."""

    identity: Identity
    lifted_sum: int
    frac_digits: int
    m1: int
    pw_digest: bytes


@dataclass(frozen=True)
class RegisterResponse:
    """Server -> user: pseudonym plus masked long-term credentials."""

    server_id: Identity
    pseudonym: bytes
    wrapped_secret: bytes
    mask_key: bytes


@dataclass(frozen=True)
class AuthRequest:
    """First authentication message (user -> server)."""

    pseudonym: bytes
    masked_credential: bytes
    masked_point: bytes
    masked_identity: bytes
    base_point: int
    modulus: int


@dataclass(frozen=True)
class AuthResponse:
    """Second authentication message (server -> user)."""

    server_id: Identity
    masked_point: bytes
    server_proof: bytes


@dataclass(frozen=True)
class AuthConfirm:
    """Third authentication message (user -> server)."""

    user_proof: bytes


@dataclass(frozen=True)
class AbortMessage:
    """Either direction: the sender has torn the session down."""

    reason: str


# --------------------------------------------------------------------------
# Long-term state
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class UserCredentials:
    """Everything the user keeps after registering (plus their password)."""

    identity: Identity
    server_id: Identity
    pseudonym: bytes
    wrapped_secret: bytes
    mask_key: bytes
    pw_salt: bytes


@dataclass(frozen=True)
class ServerRecord:
    """One row of the server's verifier table."""

    identity: Identity
    pseudonym: bytes
    wrapped_secret: bytes
    mask_key: bytes
    crt_secret: bytes


class CredentialStore:
    """Thread-safe in-memory verifier table keyed by pseudonym."""

    def __init__(self):
        self._lock = threading.Lock()
        self._by_pseudonym: dict[bytes, ServerRecord] = {}
        self._identities: set[Identity] = set()

    def __len__(self) -> int:
        with self._lock:
            return len(self._by_pseudonym)

    def insert(self, record: ServerRecord):
        with self._lock:
            if record.identity in self._identities:
                raise RegistrationRefusedError(f"identity already registered: {record.identity}")
            if record.pseudonym in self._by_pseudonym:
                raise RegistrationRefusedError("pseudonym collision")
            self._by_pseudonym[record.pseudonym] = record
            self._identities.add(record.identity)

    def lookup(self, pseudonym: bytes) -> ServerRecord | None:
        with self._lock:
            return self._by_pseudonym.get(pseudonym)

    def has_identity(self, identity: Identity) -> bool:
        with self._lock:
            return identity in self._identities

    def records(self) -> list[ServerRecord]:
        with self._lock:
            return list(self._by_pseudonym.values())


# --------------------------------------------------------------------------
# Registration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PendingRegistration:
    """User-side state kept between sending the request and the reply."""

    identity: Identity
    pw_salt: bytes
    pw_digest: bytes
    m1: int


def _random_modulus(bits: int, rng: random.Random) -> int:
    """Random exact-bit-length integer used as a CRT modulus."""
    return rng.getrandbits(bits - 1) | (1 << (bits - 1))


def _chaotic_seed(rng: random.Random, terms: int) -> tuple[int, int]:
    """Sample a logistic trajectory and lift its sum to an integer."""
    params = logistic.sample_params(rng, terms=terms)
    total = logistic.chaotic_sum(logistic.logistic_sequence(params))
    return logistic.decimal_lift(total)


def register_user_begin(
    identity: Identity,
    password: bytes,
    rng: random.Random,
    config: ProtocolConfig = DEFAULT_CONFIG,
) -> tuple[RegisterRequest, PendingRegistration]:
    """Build the registration request and the state needed to finish it."""
    if not password:
        raise ValueError("empty password")
    lifted, digits = _chaotic_seed(rng, config.logistic_terms)
    m1 = _random_modulus(config.crt_modulus_bits, rng)
    pw_salt = new_nonce(rng)
    pw_digest = hash_tuple(TAG_PW_DIGEST, [password, pw_salt], config.hash_algo)
    request = RegisterRequest(identity, lifted, digits, m1, pw_digest)
    pending = PendingRegistration(identity, pw_salt, pw_digest, m1)
    return request, pending


def register_server_process(
    request: RegisterRequest,
    server_id: Identity,
    store: CredentialStore,
    rng: random.Random,
    config: ProtocolConfig = DEFAULT_CONFIG,
) -> RegisterResponse:
    """Fold the user's seed into a CRT secret and enrol the user."""
    if request.lifted_sum < 0 or request.frac_digits < 0:
        raise RegistrationRefusedError("malformed chaotic seed")
    if request.m1 < 2:
        raise RegistrationRefusedError("registration modulus too small")
    if len(request.pw_digest) != DIGEST_LEN:
        raise RegistrationRefusedError("bad password digest length")
    if store.has_identity(request.identity):
        raise RegistrationRefusedError(f"identity already registered: {request.identity}")

    algo = config.hash_algo
    server_seed, _ = _chaotic_seed(rng, config.logistic_terms)
    m2 = gen_coprime(request.m1, config.crt_modulus_bits, rng)
    crt_value, _ = crt_solve(CrtSystem((request.lifted_sum, server_seed), (request.m1, m2)))

    crt_secret = hash_tuple(TAG_CRT_SECRET, [int_to_bytes(crt_value)], algo)
    inner = hash_tuple(TAG_WRAP, [request.identity.padded(), request.pw_digest], algo)
    wrapped_secret = xor_bytes(inner, crt_secret)
    mask_key = hash_tuple(TAG_MASK_KEY, [int_to_bytes(m2), request.pw_digest], algo)

    while True:
        pseudonym = new_nonce(rng)
        record = ServerRecord(request.identity, pseudonym, wrapped_secret, mask_key, crt_secret)
        try:
            store.insert(record)
        except RegistrationRefusedError as exc:
            if "pseudonym" in str(exc):
                continue
            raise
        break
    return RegisterResponse(server_id, pseudonym, wrapped_secret, mask_key)


def register_user_complete(
    pending: PendingRegistration, response: RegisterResponse
) -> UserCredentials:
    """Check the reply's shape and assemble the long-term credentials."""
    if len(response.pseudonym) != NONCE_LEN:
        raise RegistrationRefusedError("bad pseudonym length")
    if len(response.wrapped_secret) != DIGEST_LEN or len(response.mask_key) != DIGEST_LEN:
        raise RegistrationRefusedError("bad credential length")
    return UserCredentials(
        identity=pending.identity,
        server_id=response.server_id,
        pseudonym=response.pseudonym,
        wrapped_secret=response.wrapped_secret,
        mask_key=response.mask_key,
        pw_salt=pending.pw_salt,
    )


# --------------------------------------------------------------------------
# Authentication sessions
# --------------------------------------------------------------------------

class Phase(enum.Enum):
    INIT = "init"
    AWAIT_REPLY = "await-reply"
    AWAIT_PROOF = "await-proof"
    ESTABLISHED = "established"
    ABORTED = "aborted"


_TERMINAL = frozenset({Phase.ESTABLISHED, Phase.ABORTED})


class _Session:
    """State shared by both roles: phase tracking, metering, the key."""

    role = "party"

    def __init__(self, config: ProtocolConfig):
        self.config = config
        self.phase = Phase.INIT
        self.abort_reason: str | None = None
        self.meter = Meter(config.hash_algo)
        self._session_key: bytes | None = None

    @property
    def terminal(self) -> bool:
        return self.phase in _TERMINAL

    def session_key(self) -> bytes:
        if self.phase is not Phase.ESTABLISHED or self._session_key is None:
            raise NotEstablishedError(f"{self.role} session is {self.phase.value}")
        return self._session_key

    def abort(self, reason: str) -> AbortMessage:
        """Tear the session down locally and build the notice for the peer."""
        if self.phase in _TERMINAL:
            raise ProtocolOrderError(f"{self.role} session already {self.phase.value}")
        self.phase = Phase.ABORTED
        self.abort_reason = reason
        return AbortMessage(reason)

    def peer_aborted(self, reason: str):
        """Record an abort notice received from the other side."""
        if self.phase in _TERMINAL:
            return
        self.phase = Phase.ABORTED
        self.abort_reason = f"peer:{reason}"

    def _establish(self, shared_element: int, modulus: int):
        self._session_key = self.meter.hash_tuple(
            TAG_SESSION_KEY, [encode_element(shared_element, modulus)]
        )
        self.phase = Phase.ESTABLISHED

    def _require_phase(self, expected: Phase):
        if self.phase is not expected:
            raise ProtocolOrderError(
                f"{self.role} session is {self.phase.value}, expected {expected.value}"
            )


class UserSession(_Session):
    """Client side of one authentication run."""

    role = "user"

    def __init__(
        self,
        credentials: UserCredentials,
        password: bytes,
        rng: random.Random,
        config: ProtocolConfig = DEFAULT_CONFIG,
    ):
        super().__init__(config)
        self.credentials = credentials
        self._password = password
        self._rng = rng
        self._params: ChebyParams | None = None
        self._exponent = 0
        self._nonce_mask = b""
        self._pw_digest = b""

    def start(self) -> AuthRequest:
        """Pick fresh parameters and produce the first message."""
        self._require_phase(Phase.INIT)
        creds = self.credentials
        self._pw_digest = self.meter.hash_tuple(TAG_PW_DIGEST, [self._password, creds.pw_salt])

        modulus = gen_prime(self.config.modulus_bits, self._rng)
        base = self._rng.randrange(modulus)
        self._params = ChebyParams(modulus, base)
        self._exponent = self._rng.randrange(2, modulus)
        public = self.meter.cheby(self._exponent, base, modulus)

        nonce = new_nonce(self._rng)
        self._nonce_mask = self.meter.hash_tuple(TAG_NONCE_MASK, [nonce])
        width = self._params.element_width
        point_mask = self.meter.mask_expand(creds.mask_key, width)

        request = AuthRequest(
            pseudonym=creds.pseudonym,
            masked_credential=self.meter.xor(creds.wrapped_secret, self._nonce_mask),
            masked_point=self.meter.xor(encode_element(public, modulus), point_mask),
            masked_identity=self.meter.xor(creds.identity.padded(), self._nonce_mask),
            base_point=base,
            modulus=modulus,
        )
        self.phase = Phase.AWAIT_REPLY
        return request

    def finish(self, reply: AuthResponse) -> AuthConfirm | AbortMessage:
        """Authenticate the server's reply and emit the key-confirmation."""
        self._require_phase(Phase.AWAIT_REPLY)
        creds = self.credentials
        params = self._params
        assert params is not None
        if reply.server_id != creds.server_id:
            return self.abort(ABORT_SERVER_AUTH_FAILED)
        width = params.element_width
        if len(reply.masked_point) != width or len(reply.server_proof) != DIGEST_LEN:
            return self.abort(ABORT_MALFORMED)

        inner = self.meter.hash_tuple(TAG_WRAP, [creds.identity.padded(), self._pw_digest])
        crt_secret = self.meter.xor(creds.wrapped_secret, inner)
        point_bytes = self.meter.xor(reply.masked_point, self.meter.mask_expand(crt_secret, width))
        try:
            peer_point = decode_element(point_bytes, params.modulus)
        except MalformedElementError:
            # An out-of-range recovery means the mask disagreed, i.e. the
            # peer does not hold the registered secret.
            return self.abort(ABORT_SERVER_AUTH_FAILED)

        shared = self.meter.cheby(self._exponent, peer_point, params.modulus)
        shared_bytes = encode_element(shared, params.modulus)
        expected = self.meter.hash_tuple(
            TAG_SERVER_PROOF, [creds.identity.padded(), self._nonce_mask, shared_bytes]
        )
        if not ct_equal(expected, reply.server_proof):
            return self.abort(ABORT_SERVER_AUTH_FAILED)

        proof = self.meter.hash_tuple(
            TAG_USER_PROOF, [creds.server_id.padded(), self._nonce_mask, shared_bytes]
        )
        self._establish(shared, params.modulus)
        return AuthConfirm(proof)


class ServerSession(_Session):
    """Server side of one authentication run."""

    role = "server"

    def __init__(
        self,
        store: CredentialStore,
        server_id: Identity,
        rng: random.Random,
        config: ProtocolConfig = DEFAULT_CONFIG,
    ):
        super().__init__(config)
        self.store = store
        self.server_id = server_id
        self._rng = rng
        self._record: ServerRecord | None = None
        self._nonce_mask = b""
        self._shared = 0
        self._modulus = 0

    def respond(self, request: AuthRequest) -> AuthResponse | AbortMessage:
        """Validate the first message and answer with point plus proof."""
        self._require_phase(Phase.INIT)
        record = self.store.lookup(request.pseudonym)
        if record is None:
            return self.abort(ABORT_UNKNOWN_USER)

        modulus, base = request.modulus, request.base_point
        cfg = self.config
        if not cfg.min_modulus_bits <= modulus.bit_length() <= cfg.max_modulus_bits:
            return self.abort(ABORT_MALFORMED)
        if not is_probable_prime(modulus, self._rng):
            return self.abort(ABORT_MALFORMED)
        if not 0 <= base < modulus:
            return self.abort(ABORT_MALFORMED)
        width = element_width(modulus)
        if (
            len(request.masked_point) != width
            or len(request.masked_credential) != DIGEST_LEN
            or len(request.masked_identity) != DIGEST_LEN
        ):
            return self.abort(ABORT_MALFORMED)

        nonce_mask = self.meter.xor(record.wrapped_secret, request.masked_credential)
        try:
            claimed = Identity.from_padded(self.meter.xor(nonce_mask, request.masked_identity))
        except ValueError:
            return self.abort(ABORT_AUTH_FAILED)
        if claimed != record.identity:
            return self.abort(ABORT_AUTH_FAILED)

        point_bytes = self.meter.xor(
            request.masked_point, self.meter.mask_expand(record.mask_key, width)
        )
        try:
            peer_point = decode_element(point_bytes, modulus)
        except MalformedElementError:
            return self.abort(ABORT_MALFORMED)

        exponent = self._rng.randrange(2, modulus)
        shared = self.meter.cheby(exponent, peer_point, modulus)
        public = self.meter.cheby(exponent, base, modulus)
        shared_bytes = encode_element(shared, modulus)
        proof = self.meter.hash_tuple(
            TAG_SERVER_PROOF, [record.identity.padded(), nonce_mask, shared_bytes]
        )
        masked_point = self.meter.xor(
            encode_element(public, modulus), self.meter.mask_expand(record.crt_secret, width)
        )

        self._record = record
        self._nonce_mask = nonce_mask
        self._shared = shared
        self._modulus = modulus
        self.phase = Phase.AWAIT_PROOF
        return AuthResponse(self.server_id, masked_point, proof)

    def confirm(self, message: AuthConfirm) -> AbortMessage | None:
        """Check the user's key-confirmation; None means established."""
        self._require_phase(Phase.AWAIT_PROOF)
        if len(message.user_proof) != DIGEST_LEN:
            return self.abort(ABORT_MALFORMED)
        shared_bytes = encode_element(self._shared, self._modulus)
        expected = self.meter.hash_tuple(
            TAG_USER_PROOF, [self.server_id.padded(), self._nonce_mask, shared_bytes]
        )
        if not ct_equal(expected, message.user_proof):
            return self.abort(ABORT_USER_AUTH_FAILED)
        self._establish(self._shared, self._modulus)
        return None
