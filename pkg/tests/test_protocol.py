"""Registration and the three-message authenticated key agreement."""

import dataclasses

import pytest

from chaoskex.errors import (
    NotEstablishedError,
    ProtocolOrderError,
    RegistrationRefusedError,
)
from chaoskex.primitives import (
    TAG_CRT_SECRET,
    TAG_PW_DIGEST,
    TAG_WRAP,
    Identity,
    hash_tuple,
    new_rng,
    xor_bytes,
)
from chaoskex.protocol import (
    ABORT_AUTH_FAILED,
    ABORT_MALFORMED,
    ABORT_SERVER_AUTH_FAILED,
    ABORT_UNKNOWN_USER,
    ABORT_USER_AUTH_FAILED,
    AbortMessage,
    AuthConfirm,
    AuthResponse,
    CredentialStore,
    Phase,
    ProtocolConfig,
    RegisterRequest,
    ServerRecord,
    register_server_process,
    register_user_begin,
    register_user_complete,
)

from conftest import make_deployment


def run_honest(deployment, user_seed=101, server_seed=202):
    user = deployment.user_session(user_seed)
    server = deployment.server_session(server_seed)
    msg1 = user.start()
    msg2 = server.respond(msg1)
    msg3 = user.finish(msg2)
    result = server.confirm(msg3)
    return user, server, result


# -- registration -----------------------------------------------------------

def test_registration_round_trip(deployment):
    creds = deployment.credentials[0]
    record = deployment.store.lookup(creds.pseudonym)
    assert record is not None
    assert record.identity == creds.identity
    assert record.wrapped_secret == creds.wrapped_secret
    assert record.mask_key == creds.mask_key
    assert len(creds.pseudonym) == 16
    # The wrap is the XOR of the identity/password digest with the CRT secret.
    pw_digest = hash_tuple(TAG_PW_DIGEST, [deployment.passwords[0], creds.pw_salt])
    inner = hash_tuple(TAG_WRAP, [creds.identity.padded(), pw_digest])
    assert xor_bytes(creds.wrapped_secret, inner) == record.crt_secret


def test_registration_rejects_duplicate_identity(deployment):
    rng = new_rng(55)
    request, _ = register_user_begin(Identity.from_text("user-0"), b"pw", rng)
    with pytest.raises(RegistrationRefusedError):
        register_server_process(request, deployment.server_id, deployment.store, rng)


def test_registration_validates_request(deployment):
    rng = new_rng(56)
    good, _ = register_user_begin(Identity.from_text("fresh"), b"pw", rng)
    for bad in (
        dataclasses.replace(good, lifted_sum=-1),
        dataclasses.replace(good, frac_digits=-2),
        dataclasses.replace(good, m1=1),
        dataclasses.replace(good, pw_digest=b"short"),
    ):
        with pytest.raises(RegistrationRefusedError):
            register_server_process(bad, deployment.server_id, deployment.store, rng)
    with pytest.raises(ValueError):
        register_user_begin(Identity.from_text("fresh"), b"", rng)


def test_register_complete_validates_response(deployment):
    rng = new_rng(57)
    _, pending = register_user_begin(Identity.from_text("fresh"), b"pw", rng)
    response = register_server_process(
        RegisterRequest(Identity.from_text("fresh"), 123, 2, 2**63 + 1, b"\x01" * 32),
        deployment.server_id,
        deployment.store,
        rng,
    )
    creds = register_user_complete(pending, response)
    assert creds.pw_salt == pending.pw_salt
    for bad in (
        dataclasses.replace(response, pseudonym=b"short"),
        dataclasses.replace(response, wrapped_secret=b"short"),
        dataclasses.replace(response, mask_key=b"short"),
    ):
        with pytest.raises(RegistrationRefusedError):
            register_user_complete(pending, bad)


def test_store_uniqueness():
    store = CredentialStore()
    row = ServerRecord(Identity.from_text("a"), b"p" * 16, b"w" * 32, b"m" * 32, b"c" * 32)
    store.insert(row)
    assert len(store) == 1
    with pytest.raises(RegistrationRefusedError):
        store.insert(dataclasses.replace(row, pseudonym=b"q" * 16))  # same identity
    with pytest.raises(RegistrationRefusedError):
        store.insert(dataclasses.replace(row, identity=Identity.from_text("b")))  # same pseudonym
    assert store.lookup(b"nope" * 4) is None
    assert store.has_identity(Identity.from_text("a"))


# -- honest runs ------------------------------------------------------------

def test_honest_handshake_establishes_shared_key(deployment):
    user, server, result = run_honest(deployment)
    assert result is None
    assert user.phase is Phase.ESTABLISHED and server.phase is Phase.ESTABLISHED
    assert user.session_key() == server.session_key()
    assert len(user.session_key()) == 32
    assert user.abort_reason is None and server.abort_reason is None


def test_session_keys_fresh_per_run(deployment):
    keys = set()
    for seed in range(5):
        user, server, _ = run_honest(deployment, 300 + seed, 400 + seed)
        keys.add(user.session_key())
    assert len(keys) == 5


def test_handshake_other_hash_algorithms():
    for algo in ("sha3-256", "blake2s"):
        deployment = make_deployment(algo=algo, seed=77)
        user, server, result = run_honest(deployment)
        assert result is None
        assert user.session_key() == server.session_key()


def test_operation_census(deployment):
    user, server, _ = run_honest(deployment)
    modeled = {"AIDmask", "Ri", "AUs", "AUi"}
    assert {t: n for t, n in user.meter.hashes.items() if t in modeled} == {
        "AIDmask": 1, "Ri": 1, "AUs": 1, "AUi": 1,
    }
    assert user.meter.xors == 5 and user.meter.cheby_evals == 2
    assert {t: n for t, n in server.meter.hashes.items() if t in modeled} == {
        "AUs": 1, "AUi": 1,
    }
    assert server.meter.xors == 4 and server.meter.cheby_evals == 2
    assert user.meter.encryptions == server.meter.encryptions == 0
    assert user.meter.decryptions == server.meter.decryptions == 0


# -- phase discipline -------------------------------------------------------

def test_phase_order_enforced(deployment):
    user = deployment.user_session(1)
    with pytest.raises(ProtocolOrderError):
        user.finish(AuthResponse(deployment.server_id, b"", b""))
    user.start()
    with pytest.raises(ProtocolOrderError):
        user.start()
    server = deployment.server_session(2)
    with pytest.raises(ProtocolOrderError):
        server.confirm(AuthConfirm(b"x" * 32))


def test_session_key_gated(deployment):
    user = deployment.user_session(3)
    with pytest.raises(NotEstablishedError):
        user.session_key()
    user.abort("test")
    with pytest.raises(NotEstablishedError):
        user.session_key()


def test_abort_is_terminal(deployment):
    user = deployment.user_session(4)
    notice = user.abort("malformed")
    assert notice == AbortMessage("malformed")
    assert user.phase is Phase.ABORTED
    with pytest.raises(ProtocolOrderError):
        user.abort("again")
    with pytest.raises(ProtocolOrderError):
        user.start()
    user.peer_aborted("late")  # ignored once terminal
    assert user.abort_reason == "malformed"


def test_peer_abort_recorded(deployment):
    server = deployment.server_session(5)
    server.peer_aborted("auth-failed")
    assert server.phase is Phase.ABORTED
    assert server.abort_reason == "peer:auth-failed"


# -- dishonest and damaged runs ---------------------------------------------

def test_wrong_password_rejected_by_user(deployment):
    user = deployment.user_session(11, password=b"wrong horse")
    server = deployment.server_session(12)
    msg2 = server.respond(user.start())
    assert isinstance(msg2, AuthResponse)  # first message leaks nothing checkable
    msg3 = user.finish(msg2)
    assert isinstance(msg3, AbortMessage)
    assert user.abort_reason == ABORT_SERVER_AUTH_FAILED
    server.peer_aborted(msg3.reason)
    assert server.phase is Phase.ABORTED


def test_unknown_pseudonym(deployment):
    user = deployment.user_session(13)
    server = deployment.server_session(14)
    msg1 = dataclasses.replace(user.start(), pseudonym=b"\xee" * 16)
    reply = server.respond(msg1)
    assert reply == AbortMessage(ABORT_UNKNOWN_USER)
    assert server.abort_reason == ABORT_UNKNOWN_USER


def test_server_rejects_bad_parameters(deployment):
    cases = {
        "composite": lambda m: dataclasses.replace(m, modulus=m.modulus - 1),
        "tiny": lambda m: dataclasses.replace(m, modulus=13),
        "base-range": lambda m: dataclasses.replace(m, base_point=m.modulus),
        "point-width": lambda m: dataclasses.replace(m, masked_point=m.masked_point + b"\x00"),
        "cred-width": lambda m: dataclasses.replace(m, masked_credential=b"x"),
    }
    for name, mutate in cases.items():
        user = deployment.user_session(20)
        server = deployment.server_session(21)
        reply = server.respond(mutate(user.start()))
        assert reply == AbortMessage(ABORT_MALFORMED), name


def test_server_rejects_identity_mismatch(deployment):
    user = deployment.user_session(22)
    server = deployment.server_session(23)
    msg1 = user.start()
    flipped = bytes([msg1.masked_identity[0] ^ 0x01]) + msg1.masked_identity[1:]
    reply = server.respond(dataclasses.replace(msg1, masked_identity=flipped))
    assert reply == AbortMessage(ABORT_AUTH_FAILED)


def test_user_rejects_wrong_server_id(deployment):
    user = deployment.user_session(24)
    server = deployment.server_session(25)
    msg2 = server.respond(user.start())
    forged = dataclasses.replace(msg2, server_id=Identity.from_text("evil"))
    assert user.finish(forged) == AbortMessage(ABORT_SERVER_AUTH_FAILED)


def test_user_rejects_tampered_proof(deployment):
    user = deployment.user_session(26)
    server = deployment.server_session(27)
    msg2 = server.respond(user.start())
    bad = bytes(b ^ 1 for b in msg2.server_proof)
    assert user.finish(dataclasses.replace(msg2, server_proof=bad)) == AbortMessage(
        ABORT_SERVER_AUTH_FAILED
    )


def test_user_rejects_tampered_point(deployment):
    user = deployment.user_session(28)
    server = deployment.server_session(29)
    msg2 = server.respond(user.start())
    flipped = bytes([msg2.masked_point[0] ^ 0x80]) + msg2.masked_point[1:]
    result = user.finish(dataclasses.replace(msg2, masked_point=flipped))
    # Either the point falls out of range (mask disagreement) or the proof fails;
    # both read as a peer without the registered secret.
    assert result == AbortMessage(ABORT_SERVER_AUTH_FAILED)


def test_user_rejects_short_reply_fields(deployment):
    user = deployment.user_session(30)
    server = deployment.server_session(31)
    msg2 = server.respond(user.start())
    assert user.finish(dataclasses.replace(msg2, server_proof=b"short")) == AbortMessage(
        ABORT_MALFORMED
    )


def test_server_rejects_tampered_confirm(deployment):
    user = deployment.user_session(32)
    server = deployment.server_session(33)
    msg3 = user.finish(server.respond(user.start()))
    assert isinstance(msg3, AuthConfirm)
    bad = bytes(b ^ 0x40 for b in msg3.user_proof)
    assert server.confirm(AuthConfirm(bad)) == AbortMessage(ABORT_USER_AUTH_FAILED)
    assert server.phase is Phase.ABORTED
    assert user.phase is Phase.ESTABLISHED  # user cannot tell; key never used


def test_config_validation():
    ProtocolConfig(modulus_bits=64)
    with pytest.raises(ValueError):
        ProtocolConfig(modulus_bits=16)
    with pytest.raises(ValueError):
        ProtocolConfig(hash_algo="md5")
    with pytest.raises(ValueError):
        ProtocolConfig(logistic_terms=0)
