"""Executable attacks and scans against recorded or live handshakes.

Each check has an operational success criterion (false authentication,
identity recovery, or key recovery) and returns an AttackOutcome; a
`succeeded=True` outcome means a security property was violated and
always carries evidence.  The discrete-log and Diffie-Hellman-style
problems over the map semigroup are assumed hard: at the small moduli
used in tests a brute-force search *would* win, so the known-key
checker limits itself to the polynomial-time recomputation strategies
listed in its docstring.
"""

from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass

from .chebyshev import cheby_eval_fast, element_width, encode_element
from .errors import ChaoskexError
from .primitives import (
    DIGEST_LEN,
    Identity,
    TAG_PW_DIGEST,
    TAG_SERVER_PROOF,
    TAG_SESSION_KEY,
    TAG_WRAP,
    hash_tuple,
    mask_expand,
    xor_bytes,
)
from .protocol import (
    AbortMessage,
    AuthConfirm,
    AuthRequest,
    AuthResponse,
    Phase,
    ProtocolConfig,
    ServerSession,
    UserCredentials,
    UserSession,
)
from .transport import ServerDriver, TranscriptEntry, decode_frame
from .yoonjeon import YJ_TAG_KDC_REQUEST

SUBSTITUTION_POLICIES = ("request-point", "response-point", "both-points", "identity")


@dataclass(frozen=True)
class AttackOutcome:
    """Result of one attack run; succeeded means the property broke."""

    name: str
    succeeded: bool
    evidence: str

    def __post_init__(self):
        if self.succeeded and not self.evidence:
            raise ValueError("a successful attack must carry evidence")

    def __str__(self):
        return f"attack={self.name} succeeded={'true' if self.succeeded else 'false'} evidence={self.evidence}"


def render_outcomes(outcomes: list[AttackOutcome]) -> str:
    """Line-delimited machine-readable report, one attack per line."""
    return "\n".join(str(outcome) for outcome in outcomes)


def _auth_frames(transcript: list[TranscriptEntry]) -> dict[type, bytes]:
    """Index the first frame of each decodable message type."""
    found: dict[type, bytes] = {}
    for entry in transcript:
        try:
            message = decode_frame(entry.frame)
        except ChaoskexError:
            continue
        found.setdefault(type(message), entry.frame)
    return found


def attack_replay(
    old_transcript: list[TranscriptEntry], server_session: ServerSession
) -> AttackOutcome:
    """Re-send a recorded first message (and recorded confirmation).

    The server cannot distinguish the recorded first message from a
    fresh one, but its own point is new, so the recorded confirmation
    binds the wrong key.  Succeeds only if the server establishes.
    """
    frames = _auth_frames(old_transcript)
    request = frames.get(AuthRequest)
    if request is None:
        raise ValueError("transcript contains no authentication request to replay")
    driver = ServerDriver(server_session)
    driver.on_frame(request)
    confirm = frames.get(AuthConfirm)
    if server_session.phase is Phase.AWAIT_PROOF and confirm is not None:
        driver.on_frame(confirm)
    if server_session.phase is Phase.ESTABLISHED:
        return AttackOutcome(
            "replay", True, "server established a session from replayed frames"
        )
    return AttackOutcome(
        "replay",
        False,
        f"server finished {server_session.phase.value}"
        + (f" ({server_session.abort_reason})" if server_session.abort_reason else ""),
    )


def attack_mitm_substitute(
    user_session: UserSession,
    server_session: ServerSession,
    policy: str,
    rng: random.Random,
) -> AttackOutcome:
    """Swap adversary-chosen bytes into the point or identity fields.

    The point fields travel XOR-masked under registration secrets, so
    the interceptor cannot aim its substitution; success requires both
    honest sides to establish with a key the adversary can derive from
    its own exponents and the public parameters.
    """
    if policy not in SUBSTITUTION_POLICIES:
        raise ValueError(f"unknown substitution policy {policy!r}")
    name = f"mitm-{policy}"

    request = user_session.start()
    modulus, base = request.modulus, request.base_point
    width = element_width(modulus)
    exp_a = rng.randrange(2, modulus)
    exp_b = rng.randrange(2, modulus)
    point_a = cheby_eval_fast(exp_a, base, modulus)
    point_b = cheby_eval_fast(exp_b, base, modulus)

    if policy in ("request-point", "both-points"):
        request = dataclasses.replace(
            request, masked_point=encode_element(point_a, modulus)
        )
    elif policy == "identity":
        request = dataclasses.replace(request, masked_identity=rng.randbytes(DIGEST_LEN))

    response = server_session.respond(request)
    if isinstance(response, AbortMessage):
        user_session.peer_aborted(response.reason)
        return AttackOutcome(
            name, False, f"server aborted at the first message: {response.reason}"
        )
    if policy in ("response-point", "both-points"):
        response = dataclasses.replace(
            response, masked_point=encode_element(point_b, modulus)
        )

    confirm = user_session.finish(response)
    if isinstance(confirm, AbortMessage):
        server_session.peer_aborted(confirm.reason)
        return AttackOutcome(
            name, False, f"user aborted at the second message: {confirm.reason}"
        )
    result = server_session.confirm(confirm)
    if isinstance(result, AbortMessage):
        return AttackOutcome(
            name, False, f"server aborted at the confirmation: {result.reason}"
        )

    # Both honest endpoints established; can the interceptor compute a key?
    candidates = set()
    for value in (
        point_a,
        point_b,
        cheby_eval_fast(exp_a, point_b, modulus),
        cheby_eval_fast(exp_b, point_a, modulus),
        cheby_eval_fast(exp_a, point_a, modulus),
        cheby_eval_fast(exp_b, point_b, modulus),
    ):
        candidates.add(
            hash_tuple(
                TAG_SESSION_KEY, [encode_element(value, modulus)], user_session.config.hash_algo
            )
        )
    for label, session in (("user", user_session), ("server", server_session)):
        if session.session_key() in candidates:
            return AttackOutcome(
                name, True, f"{label} session key is derivable from the substituted points"
            )
    return AttackOutcome(
        name,
        False,
        "both sides established but neither key is derivable by the interceptor",
    )


def scan_anonymity(
    transcript: list[TranscriptEntry], identities: list[Identity]
) -> AttackOutcome:
    """Search every frame for any known identity's canonical bytes."""
    hits = []
    for entry in transcript:
        for identity in identities:
            offset = entry.frame.find(identity.padded())
            if offset >= 0:
                hits.append(f"identity {identity} at frame {entry.index} byte {offset}")
    if hits:
        return AttackOutcome("anonymity-scan", True, "; ".join(hits))
    return AttackOutcome(
        "anonymity-scan",
        False,
        f"no identity bytes in {len(transcript)} frames",
    )


def scan_unmasked_points(
    transcript: list[TranscriptEntry],
    credentials: UserCredentials,
    password: bytes,
    config: ProtocolConfig | None = None,
) -> AttackOutcome:
    """Recover both session points with the user's own secrets, then
    check that their raw encodings never crossed the wire unmasked."""
    cfg = config if config is not None else ProtocolConfig()
    algo = cfg.hash_algo
    frames = _auth_frames(transcript)
    request_frame, response_frame = frames.get(AuthRequest), frames.get(AuthResponse)
    if request_frame is None or response_frame is None:
        raise ValueError("transcript does not contain a full handshake")
    request = decode_frame(request_frame)
    response = decode_frame(response_frame)

    width = element_width(request.modulus)
    pw_digest = hash_tuple(TAG_PW_DIGEST, [password, credentials.pw_salt], algo)
    inner = hash_tuple(TAG_WRAP, [credentials.identity.padded(), pw_digest], algo)
    crt_secret = xor_bytes(credentials.wrapped_secret, inner)
    user_point = xor_bytes(
        request.masked_point, mask_expand(credentials.mask_key, width, algo)
    )
    server_point = xor_bytes(
        response.masked_point, mask_expand(crt_secret, width, algo)
    )

    hits = []
    for entry in transcript:
        for label, needle in (("initiator", user_point), ("responder", server_point)):
            offset = entry.frame.find(needle)
            if offset >= 0:
                hits.append(f"{label} point unmasked at frame {entry.index} byte {offset}")
    if hits:
        return AttackOutcome("unmasked-point-scan", True, "; ".join(hits))
    return AttackOutcome(
        "unmasked-point-scan", False, "both session points appear only masked"
    )


@dataclass(frozen=True)
class LinkabilityReport:
    """Transcript indices grouped by whatever stable marker links them."""

    groups: dict[str, list[int]]

    def linked(self) -> dict[str, list[int]]:
        return {key: idxs for key, idxs in self.groups.items() if len(idxs) > 1}

    def __str__(self):
        lines = []
        for key, idxs in sorted(self.groups.items()):
            joined = ",".join(str(i) for i in idxs)
            lines.append(f"marker={key} sessions={joined} linked={'yes' if len(idxs) > 1 else 'no'}")
        return "\n".join(lines)


def report_linkability(transcripts: list[list[TranscriptEntry]]) -> LinkabilityReport:
    """Group sessions by their cleartext wire marker.

    The main protocol shows a fixed pseudonym per user; the baseline
    shows the raw identity.  Either way, equal markers mean an observer
    can tell two sessions involve the same party.
    """
    groups: dict[str, list[int]] = {}
    for index, transcript in enumerate(transcripts):
        marker = None
        for entry in transcript:
            try:
                message = decode_frame(entry.frame)
            except ChaoskexError:
                if len(entry.frame) >= 5 and entry.frame[4] == YJ_TAG_KDC_REQUEST:
                    # Baseline first message: identity field in clear.
                    marker = "id:" + entry.frame[9:41].hex()
                    break
                continue
            if isinstance(message, AuthRequest):
                marker = "pseudonym:" + message.pseudonym.hex()
                break
        groups.setdefault(marker if marker is not None else "unkeyed", []).append(index)
    return LinkabilityReport(groups)


@dataclass(frozen=True)
class SessionRecord:
    """One completed run as the known-key checker sees it."""

    transcript: list[TranscriptEntry]
    session_key: bytes


def check_known_key(
    records: list[SessionRecord], revealed: int, algo: str = "sha256"
) -> AttackOutcome:
    """Try to turn one revealed session key into any other session's key.

    Strategies (all polynomial-time; exhaustive search is out of model):
      1. direct reuse of the revealed key;
      2. re-deriving a key from each public wire field of the target
         transcript;
      3. re-deriving from the revealed key itself;
      4. re-deriving from the revealed key combined with each public
         wire field.
    Also flags RNG reuse: identical keys or identical transcript bytes
    across sessions defeat known-key secrecy outright.
    """
    if not 0 <= revealed < len(records):
        raise ValueError("revealed index out of range")
    for i, first in enumerate(records):
        for j in range(i + 1, len(records)):
            second = records[j]
            if first.session_key == second.session_key:
                return AttackOutcome(
                    "known-key", True, f"sessions {i} and {j} share one key (rng reuse)"
                )
            if [e.frame for e in first.transcript] == [e.frame for e in second.transcript]:
                return AttackOutcome(
                    "known-key", True, f"sessions {i} and {j} have identical transcripts (rng reuse)"
                )

    revealed_key = records[revealed].session_key
    attempts = 0
    for index, record in enumerate(records):
        if index == revealed:
            continue
        candidates = {revealed_key, hash_tuple(TAG_SESSION_KEY, [revealed_key], algo)}
        for entry in record.transcript:
            try:
                spans = _public_fields(entry.frame)
            except ChaoskexError:
                continue
            for field_bytes in spans:
                candidates.add(hash_tuple(TAG_SESSION_KEY, [field_bytes], algo))
                candidates.add(
                    hash_tuple(TAG_SESSION_KEY, [revealed_key, field_bytes], algo)
                )
        attempts += len(candidates)
        if record.session_key in candidates:
            return AttackOutcome(
                "known-key",
                True,
                f"session {index} key recomputed from session {revealed}'s key",
            )
    return AttackOutcome(
        "known-key",
        False,
        f"{attempts} candidate derivations, no other session key recovered; "
        f"{len(records)} keys pairwise distinct",
    )


def _public_fields(frame: bytes) -> list[bytes]:
    from .transport import frame_field_spans

    return [frame[start:end] for _, start, end in frame_field_spans(frame)]


def attack_insider_impersonation(
    victim_session: UserSession,
    insider_credentials: UserCredentials,
    insider_password: bytes,
    rng: random.Random,
) -> AttackOutcome:
    """A registered user tries to answer another user's first message.

    The insider knows its *own* unwrapped CRT digest, but each user's is
    independent, so the insider can neither mask its point acceptably
    nor forge the server's proof.  Succeeds only if the victim
    establishes against the forged reply.
    """
    algo = victim_session.config.hash_algo
    request = victim_session.start()
    modulus, base = request.modulus, request.base_point
    width = element_width(modulus)

    pw_digest = hash_tuple(TAG_PW_DIGEST, [insider_password, insider_credentials.pw_salt], algo)
    inner = hash_tuple(TAG_WRAP, [insider_credentials.identity.padded(), pw_digest], algo)
    insider_crt_secret = xor_bytes(insider_credentials.wrapped_secret, inner)

    exponent = rng.randrange(2, modulus)
    public = cheby_eval_fast(exponent, base, modulus)
    masked_point = xor_bytes(
        encode_element(public, modulus), mask_expand(insider_crt_secret, width, algo)
    )
    # Best available proof forgery: assume the victim's wrap equals the
    # insider's own (it never does — the CRT digest is per-user).
    guessed_mask = xor_bytes(request.masked_credential, insider_credentials.wrapped_secret)
    forged_shared = cheby_eval_fast(exponent, public, modulus)
    forged_proof = hash_tuple(
        TAG_SERVER_PROOF,
        [
            insider_credentials.identity.padded(),
            guessed_mask,
            encode_element(forged_shared, modulus),
        ],
        algo,
    )
    reply = AuthResponse(insider_credentials.server_id, masked_point, forged_proof)
    result = victim_session.finish(reply)
    if victim_session.phase is Phase.ESTABLISHED:
        return AttackOutcome(
            "insider-impersonation", True, "victim accepted a forged server reply"
        )
    reason = result.reason if isinstance(result, AbortMessage) else "?"
    return AttackOutcome(
        "insider-impersonation", False, f"victim aborted: {reason}"
    )


def single_bit_flips(frame: bytes) -> list[bytes]:
    """Every variant of a frame with exactly one field bit flipped."""
    from .transport import frame_field_spans

    variants = []
    for _name, start, end in frame_field_spans(frame):
        for offset in range(start, end):
            for bit in range(8):
                mutated = bytearray(frame)
                mutated[offset] ^= 1 << bit
                variants.append(bytes(mutated))
    return variants
