"""Frame codec, loopback driver loop, transcripts and the socket channel."""

import random

import pytest

from chaoskex.errors import (
    FrameError,
    RegistrationRefusedError,
    TransportError,
    TruncatedFrameError,
    UnknownTagError,
)
from chaoskex.primitives import Identity, new_rng
from chaoskex.protocol import (
    AbortMessage,
    AuthConfirm,
    AuthRequest,
    AuthResponse,
    Phase,
    RegisterResponse,
    UserSession,
    register_user_begin,
)
from chaoskex.transport import (
    DIR_SERVER_TO_USER,
    DIR_USER_TO_SERVER,
    SocketServer,
    TranscriptEntry,
    decode_frame,
    dump_transcript,
    encode_frame,
    frame_field_spans,
    parse_transcript,
    run_handshake,
    socket_handshake,
    socket_register,
)

from conftest import make_deployment


def sample_messages(deployment):
    request, _ = register_user_begin(Identity.from_text("alice"), b"pw", new_rng(1))
    user = deployment.user_session(61)
    server = deployment.server_session(62)
    msg1 = user.start()
    msg2 = server.respond(msg1)
    msg3 = user.finish(msg2)
    return [
        request,
        RegisterResponse(deployment.server_id, b"p" * 16, b"w" * 32, b"m" * 32),
        msg1,
        msg2,
        msg3,
        AbortMessage("auth-failed"),
    ]


# -- codec -------------------------------------------------------------------

def test_frame_round_trip_all_types(deployment):
    for message in sample_messages(deployment):
        frame = encode_frame(message)
        assert int.from_bytes(frame[:4], "big") == len(frame)  # length includes itself
        assert decode_frame(frame) == message


def test_confirm_frame_is_41_bytes():
    frame = encode_frame(AuthConfirm(b"\xab" * 32))
    assert len(frame) == 41  # 4 length + 1 tag + 4 field length + 32 digest
    assert frame[4] == 0x13


def test_encode_rejects_wrong_widths(deployment):
    with pytest.raises(ValueError):
        encode_frame(AuthConfirm(b"short"))
    with pytest.raises(ValueError):
        encode_frame(RegisterResponse(deployment.server_id, b"p" * 15, b"w" * 32, b"m" * 32))
    with pytest.raises(ValueError):
        encode_frame(AbortMessage("x" * 600))
    with pytest.raises(ValueError):
        encode_frame(b"not a message")


def test_decode_rejects_unknown_tags():
    for tag in (0x00, 0x21, 0x22, 0x23, 0x24, 0x42, 0xFF):
        frame = bytearray(encode_frame(AuthConfirm(b"\x01" * 32)))
        frame[4] = tag
        with pytest.raises(UnknownTagError):
            decode_frame(bytes(frame))


def test_decode_rejects_damaged_frames():
    frame = encode_frame(AuthConfirm(b"\x01" * 32))
    with pytest.raises(TruncatedFrameError):
        decode_frame(b"")
    with pytest.raises(TruncatedFrameError):
        decode_frame(frame[:3])
    with pytest.raises(TruncatedFrameError):
        decode_frame(frame[:-1])  # stated length exceeds data
    with pytest.raises(FrameError):
        decode_frame(frame + b"\x00")  # data exceeds stated length
    short = (4).to_bytes(4, "big")  # total length smaller than the header
    with pytest.raises(TruncatedFrameError):
        decode_frame(short)


def test_decode_rejects_bad_field_content(deployment):
    msg1 = deployment.user_session(63).start()
    frame = bytearray(encode_frame(msg1))
    spans = {name: (s, e) for name, s, e in frame_field_spans(bytes(frame))}
    start, _ = spans["modulus"]
    frame[start] = 0  # leading zero byte: non-canonical integer
    with pytest.raises(FrameError):
        decode_frame(bytes(frame))


def test_field_spans_cover_content(deployment):
    for message in sample_messages(deployment):
        frame = encode_frame(message)
        spans = frame_field_spans(frame)
        assert spans, type(message).__name__
        assert all(5 <= s <= e <= len(frame) for _, s, e in spans)
        # Spans are the exact payload regions, in order and non-overlapping.
        for (_, s1, e1), (_, s2, e2) in zip(spans, spans[1:]):
            assert e1 <= s2


def test_decode_fuzz_never_crashes():
    rng = random.Random(999)
    genuine = encode_frame(AuthConfirm(bytes(range(32))))
    for _ in range(1000):
        blob = bytearray(genuine)
        for _ in range(rng.randrange(1, 6)):
            blob[rng.randrange(len(blob))] = rng.randrange(256)
        try:
            decode_frame(bytes(blob))
        except FrameError:
            pass


# -- transcripts --------------------------------------------------------------

def test_transcript_dump_parse_round_trip(deployment):
    user = deployment.user_session(64)
    server = deployment.server_session(65)
    _, _, entries = run_handshake(user, server)
    text = dump_transcript(entries)
    assert parse_transcript(text) == entries
    first = text.splitlines()[0].split()
    assert first[0] == "0" and first[1] == DIR_USER_TO_SERVER


def test_parse_transcript_rejects_garbage():
    with pytest.raises(ValueError):
        parse_transcript("0 U->S zz")  # bad hex
    with pytest.raises(ValueError):
        parse_transcript("0 U->S 0011\n0 S->U 0011")  # non-increasing index
    with pytest.raises(ValueError):
        parse_transcript("just one token")


def test_transcript_entry_decodes():
    entry = TranscriptEntry(0, DIR_SERVER_TO_USER, encode_frame(AbortMessage("x")))
    assert entry.message() == AbortMessage("x")


# -- loopback driver loop ------------------------------------------------------

def test_run_handshake_honest(deployment):
    user, server, entries = run_handshake(
        deployment.user_session(66), deployment.server_session(67)
    )
    assert user.phase is Phase.ESTABLISHED and server.phase is Phase.ESTABLISHED
    assert user.session_key() == server.session_key()
    assert [e.direction for e in entries] == [
        DIR_USER_TO_SERVER, DIR_SERVER_TO_USER, DIR_USER_TO_SERVER,
    ]
    types = [type(e.message()) for e in entries]
    assert types == [AuthRequest, AuthResponse, AuthConfirm]


def test_run_handshake_intercept_can_tamper(deployment):
    def clobber_reply(index, direction, frame):
        if index == 1:
            return frame[:-1] + bytes([frame[-1] ^ 0xFF])
        return None

    user, server, entries = run_handshake(
        deployment.user_session(68), deployment.server_session(69), intercept=clobber_reply
    )
    assert user.phase is Phase.ABORTED
    assert server.phase is Phase.ABORTED
    assert server.abort_reason.startswith("peer:")
    assert entries[2].message() == AbortMessage(user.abort_reason)


def test_run_handshake_truncation_aborts(deployment):
    user, server, entries = run_handshake(
        deployment.user_session(70),
        deployment.server_session(71),
        intercept=lambda i, d, f: f[:7] if i == 0 else None,
    )
    assert user.phase is Phase.ABORTED  # peer abort echoed back
    assert server.abort_reason == "malformed"
    assert user.abort_reason == "peer:malformed"


def test_driver_rejects_out_of_order_messages(deployment):
    # A confirm delivered while the server still expects the first message.
    user, server, entries = run_handshake(
        deployment.user_session(72),
        deployment.server_session(73),
        intercept=lambda i, d, f: encode_frame(AuthConfirm(b"\x05" * 32)) if i == 0 else None,
    )
    assert server.abort_reason == "malformed"


# -- sockets -------------------------------------------------------------------

def test_socket_matches_loopback(deployment):
    loop_user = deployment.user_session(5000)
    loop_server = deployment.server_session(9000)
    _, _, loop_entries = run_handshake(loop_user, loop_server)

    with SocketServer(deployment.store, deployment.server_id, seed=9000) as server:
        sock_user = deployment.user_session(5000)
        sock_entries = socket_handshake(sock_user, server.host, server.port)

    assert dump_transcript(sock_entries) == dump_transcript(loop_entries)
    assert sock_user.session_key() == loop_user.session_key()


def test_socket_register_then_handshake(deployment):
    with SocketServer(deployment.store, deployment.server_id, seed=123) as server:
        creds = socket_register(
            Identity.from_text("newcomer"), b"hunter2", server.host, server.port, new_rng(7)
        )
        user = UserSession(creds, b"hunter2", new_rng(8))
        socket_handshake(user, server.host, server.port)
    assert user.phase is Phase.ESTABLISHED
    assert deployment.store.has_identity(Identity.from_text("newcomer"))
    established = [s for s in server.finished_sessions if s.phase is Phase.ESTABLISHED]
    assert len(established) == 1
    assert established[0].session_key() == user.session_key()


def test_socket_register_refused_when_disabled(deployment):
    with SocketServer(
        deployment.store, deployment.server_id, seed=9, allow_registration=False
    ) as server:
        with pytest.raises(RegistrationRefusedError):
            socket_register(
                Identity.from_text("blocked"), b"pw", server.host, server.port, new_rng(3)
            )


def test_socket_register_duplicate_refused(deployment):
    with SocketServer(deployment.store, deployment.server_id, seed=10) as server:
        with pytest.raises(RegistrationRefusedError, match="already registered"):
            socket_register(
                Identity.from_text("user-0"), b"pw", server.host, server.port, new_rng(4)
            )


def test_socket_connection_refused():
    deployment = make_deployment(seed=77)
    user = deployment.user_session(1)
    with pytest.raises(TransportError):
        socket_handshake(user, "127.0.0.1", 1, timeout=0.5)
