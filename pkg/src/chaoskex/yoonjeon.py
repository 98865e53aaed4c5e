"""Reference three-party key agreement used as the comparison baseline.

A trusted relay shares a long-term key with every party.  The initiator
ships its identity in clear so the relay can pick the right key — that
cleartext identity is exactly what the adversary module's anonymity and
linkability scans latch onto.  One complete run costs two authenticated
encryptions and two decryptions, which the operation meters reproduce.

The sealed payloads use a hash-based stream cipher with a separate
authentication digest; both halves are domain-tagged so they can never
collide with protocol hashes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .chebyshev import encode_element
from .errors import BaselineAbortError, CiphertextError, FrameError
from .numtheory import gen_prime
from .primitives import (
    DIGEST_LEN,
    NONCE_LEN,
    Identity,
    Meter,
    ct_equal,
    hash_tuple,
    new_nonce,
)
from .wire import encode_fields, int_from_bytes, int_to_bytes, split_fields

TAG_YJ_KEYSTREAM = "yjenc"
TAG_YJ_AUTH = "yjtag"
TAG_YJ_MAC = "yjmac"

# Frame tags private to this module (the main codec rejects them).
YJ_TAG_KDC_REQUEST = 0x21
YJ_TAG_KDC_TICKET = 0x22
YJ_TAG_RESPONDER_REPLY = 0x23
YJ_TAG_INITIATOR_CONFIRM = 0x24

KeyTable = dict[Identity, bytes]


def new_key_table(identities: list[Identity], rng: random.Random) -> KeyTable:
    """Issue a fresh 32-byte long-term key to every party."""
    return {identity: rng.randbytes(DIGEST_LEN) for identity in identities}


@dataclass(frozen=True)
class KdcRequest:
    """Initiator -> relay; the sender identity travels in clear."""

    sender_id: Identity
    ciphertext: bytes


@dataclass(frozen=True)
class KdcTicket:
    """Relay -> responder."""

    ciphertext: bytes


@dataclass(frozen=True)
class ResponderReply:
    """Responder -> initiator: public point in clear plus a key-bound MAC."""

    public_point: int
    mac: bytes


@dataclass(frozen=True)
class InitiatorConfirm:
    """Initiator -> responder: the closing MAC."""

    mac: bytes


# --------------------------------------------------------------------------
# Authenticated encryption (hash-based, for a dependency-free baseline)
# --------------------------------------------------------------------------

def _keystream(key: bytes, nonce: bytes, length: int, algo: str) -> bytes:
    blocks = []
    for counter in range((length + DIGEST_LEN - 1) // DIGEST_LEN):
        blocks.append(
            hash_tuple(TAG_YJ_KEYSTREAM, [key, nonce, counter.to_bytes(4, "big")], algo)
        )
    return b"".join(blocks)[:length]


def seal(
    key: bytes,
    plaintext: bytes,
    rng: random.Random,
    algo: str = "sha256",
    meter: Meter | None = None,
) -> bytes:
    """Authenticated-encrypt: nonce ∥ auth digest ∥ ciphertext."""
    if meter is not None:
        meter.encryptions += 1
    nonce = new_nonce(rng)
    ct = bytes(p ^ k for p, k in zip(plaintext, _keystream(key, nonce, len(plaintext), algo)))
    auth = hash_tuple(TAG_YJ_AUTH, [key, nonce, ct], algo)
    return nonce + auth + ct


def open_sealed(
    key: bytes, blob: bytes, algo: str = "sha256", meter: Meter | None = None
) -> bytes:
    """Inverse of seal; raises CiphertextError on any mismatch."""
    if meter is not None:
        meter.decryptions += 1
    if len(blob) < NONCE_LEN + DIGEST_LEN:
        raise CiphertextError("sealed blob too short")
    nonce = blob[:NONCE_LEN]
    auth = blob[NONCE_LEN:NONCE_LEN + DIGEST_LEN]
    ct = blob[NONCE_LEN + DIGEST_LEN:]
    if not ct_equal(auth, hash_tuple(TAG_YJ_AUTH, [key, nonce, ct], algo)):
        raise CiphertextError("authentication failed")
    return bytes(c ^ k for c, k in zip(ct, _keystream(key, nonce, len(ct), algo)))


# --------------------------------------------------------------------------
# Protocol steps
# --------------------------------------------------------------------------

@dataclass
class InitiatorState:
    identity: Identity
    peer: Identity
    exponent: int
    base_point: int
    modulus: int
    public: int
    shared: int = 0
    established: bool = False


@dataclass
class ResponderState:
    identity: Identity
    peer: Identity
    modulus: int
    public: int
    shared: int
    established: bool = False


def _mac(key_bytes: bytes, first: Identity, second: Identity, point_bytes: bytes,
         meter: Meter, algo: str) -> bytes:
    if meter is not None:
        return meter.hash_tuple(TAG_YJ_MAC, [key_bytes, first.padded(), second.padded(), point_bytes])
    return hash_tuple(TAG_YJ_MAC, [key_bytes, first.padded(), second.padded(), point_bytes], algo)


def step1_initiate(
    initiator: Identity,
    responder: Identity,
    keys: KeyTable,
    bits: int,
    rng: random.Random,
    meter: Meter,
) -> tuple[KdcRequest, InitiatorState]:
    """Pick (x, N, r), seal the 5-tuple for the relay under the sender key."""
    modulus = gen_prime(bits, rng)
    base = rng.randrange(modulus)
    exponent = rng.randrange(2, modulus)
    public = meter.cheby(exponent, base, modulus)
    plaintext = encode_fields(
        [
            initiator.padded(),
            responder.padded(),
            int_to_bytes(base),
            int_to_bytes(modulus),
            int_to_bytes(public),
        ]
    )
    ciphertext = seal(keys[initiator], plaintext, rng, meter.algo, meter)
    state = InitiatorState(initiator, responder, exponent, base, modulus, public)
    return KdcRequest(initiator, ciphertext), state


def step2_relay(
    request: KdcRequest, keys: KeyTable, rng: random.Random, meter: Meter
) -> KdcTicket:
    """Check the sender, re-seal the tuple for the responder."""
    key = keys.get(request.sender_id)
    if key is None:
        raise BaselineAbortError(f"unknown sender identity: {request.sender_id}")
    try:
        plaintext = open_sealed(key, request.ciphertext, meter.algo, meter)
    except CiphertextError as exc:
        raise BaselineAbortError(f"request rejected: {exc}") from None
    try:
        fields = split_fields(plaintext, 5)
        sender = Identity.from_padded(fields[0])
        receiver = Identity.from_padded(fields[1])
    except (FrameError, ValueError) as exc:
        raise BaselineAbortError(f"malformed request payload: {exc}") from None
    if sender != request.sender_id:
        raise BaselineAbortError("sealed identity disagrees with the clear one")
    if receiver not in keys:
        raise BaselineAbortError(f"unknown responder identity: {receiver}")
    forwarded = encode_fields([fields[1], fields[0], fields[2], fields[3], fields[4]])
    return KdcTicket(seal(keys[receiver], forwarded, rng, meter.algo, meter))


def step3_respond(
    ticket: KdcTicket,
    responder: Identity,
    keys: KeyTable,
    rng: random.Random,
    meter: Meter,
) -> tuple[ResponderReply, ResponderState]:
    """Open the ticket, derive the shared point, reply with a MAC."""
    try:
        plaintext = open_sealed(keys[responder], ticket.ciphertext, meter.algo, meter)
    except CiphertextError as exc:
        raise BaselineAbortError(f"ticket rejected: {exc}") from None
    try:
        fields = split_fields(plaintext, 5)
        named = Identity.from_padded(fields[0])
        peer = Identity.from_padded(fields[1])
        base = int_from_bytes(fields[2])
        modulus = int_from_bytes(fields[3])
        peer_public = int_from_bytes(fields[4])
    except (FrameError, ValueError) as exc:
        raise BaselineAbortError(f"malformed ticket payload: {exc}") from None
    if named != responder:
        raise BaselineAbortError("ticket addressed to someone else")
    if modulus < 5 or not 0 <= base < modulus or not 0 <= peer_public < modulus:
        raise BaselineAbortError("ticket carries unusable parameters")

    exponent = rng.randrange(2, modulus)
    public = meter.cheby(exponent, base, modulus)
    shared = meter.cheby(exponent, peer_public, modulus)
    mac = _mac(
        encode_element(shared, modulus),
        responder,
        peer,
        encode_element(peer_public, modulus),
        meter,
        meter.algo,
    )
    state = ResponderState(responder, peer, modulus, public, shared)
    return ResponderReply(public, mac), state


def step4_confirm(
    reply: ResponderReply, state: InitiatorState, meter: Meter
) -> InitiatorConfirm:
    """Verify the responder's MAC, answer with the closing one."""
    modulus = state.modulus
    if not 0 <= reply.public_point < modulus:
        raise BaselineAbortError("responder point out of range")
    shared = meter.cheby(state.exponent, reply.public_point, modulus)
    key_bytes = encode_element(shared, modulus)
    expected = _mac(
        key_bytes, state.peer, state.identity, encode_element(state.public, modulus),
        meter, meter.algo,
    )
    if not ct_equal(expected, reply.mac):
        raise BaselineAbortError("responder authentication failed")
    state.shared = shared
    state.established = True
    mac = _mac(
        key_bytes, state.identity, state.peer,
        encode_element(reply.public_point, modulus), meter, meter.algo,
    )
    return InitiatorConfirm(mac)


def step5_complete(confirm: InitiatorConfirm, state: ResponderState, meter: Meter):
    """Verify the initiator's MAC; on success both sides hold the key."""
    expected = _mac(
        encode_element(state.shared, state.modulus),
        state.peer,
        state.identity,
        encode_element(state.public, state.modulus),
        meter,
        meter.algo,
    )
    if not ct_equal(expected, confirm.mac):
        raise BaselineAbortError("initiator authentication failed")
    state.established = True


# --------------------------------------------------------------------------
# Framing and a full-run driver
# --------------------------------------------------------------------------

def encode_baseline_frame(message) -> bytes:
    """Serialize a baseline message with the shared outer frame layout."""
    if isinstance(message, KdcRequest):
        tag, fields = YJ_TAG_KDC_REQUEST, [message.sender_id.padded(), message.ciphertext]
    elif isinstance(message, KdcTicket):
        tag, fields = YJ_TAG_KDC_TICKET, [message.ciphertext]
    elif isinstance(message, ResponderReply):
        tag, fields = YJ_TAG_RESPONDER_REPLY, [int_to_bytes(message.public_point), message.mac]
    elif isinstance(message, InitiatorConfirm):
        tag, fields = YJ_TAG_INITIATOR_CONFIRM, [message.mac]
    else:
        raise ValueError(f"not a baseline message: {type(message).__name__}")
    payload = encode_fields(fields)
    total = 5 + len(payload)
    return total.to_bytes(4, "big") + bytes([tag]) + payload


@dataclass
class BaselineRun:
    """Everything one scripted baseline execution produced."""

    initiator: Identity
    responder: Identity
    established: bool
    session_key: bytes
    transcript: list
    initiator_meter: Meter
    responder_meter: Meter
    relay_meter: Meter


def run_baseline(
    initiator: Identity,
    responder: Identity,
    keys: KeyTable,
    rng: random.Random,
    *,
    bits: int = 64,
    algo: str = "sha256",
) -> BaselineRun:
    """Drive all five steps in-process and record the frames."""
    from .transport import TranscriptEntry

    meters = {name: Meter(algo) for name in ("initiator", "relay", "responder")}
    entries: list[TranscriptEntry] = []

    def record(direction, message):
        entries.append(
            TranscriptEntry(len(entries), direction, encode_baseline_frame(message))
        )

    request, istate = step1_initiate(initiator, responder, keys, bits, rng, meters["initiator"])
    record("A->T", request)
    ticket = step2_relay(request, keys, rng, meters["relay"])
    record("T->B", ticket)
    reply, rstate = step3_respond(ticket, responder, keys, rng, meters["responder"])
    record("B->A", reply)
    confirm = step4_confirm(reply, istate, meters["initiator"])
    record("A->B", confirm)
    step5_complete(confirm, rstate, meters["responder"])

    assert istate.shared == rstate.shared
    return BaselineRun(
        initiator=initiator,
        responder=responder,
        established=istate.established and rstate.established,
        session_key=encode_element(istate.shared, istate.modulus),
        transcript=entries,
        initiator_meter=meters["initiator"],
        responder_meter=meters["responder"],
        relay_meter=meters["relay"],
    )
