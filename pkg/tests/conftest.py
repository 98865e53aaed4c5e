"""Shared test fixtures: a small registered deployment ready to handshake."""

from dataclasses import dataclass

import pytest

from chaoskex.primitives import Identity, new_rng
from chaoskex.protocol import (
    CredentialStore,
    ProtocolConfig,
    ServerSession,
    UserCredentials,
    UserSession,
    register_server_process,
    register_user_begin,
    register_user_complete,
)


@dataclass
class Deployment:
    """One server store with registered users, plus session factories."""

    config: ProtocolConfig
    store: CredentialStore
    server_id: Identity
    credentials: list[UserCredentials]
    passwords: list[bytes]

    def user_session(self, seed: int, index: int = 0, password: bytes | None = None) -> UserSession:
        pw = self.passwords[index] if password is None else password
        return UserSession(self.credentials[index], pw, new_rng(seed), self.config)

    def server_session(self, seed: int) -> ServerSession:
        return ServerSession(self.store, self.server_id, new_rng(seed), self.config)


def make_deployment(
    *, bits: int = 64, seed: int = 1234, users: int = 1, algo: str = "sha256"
) -> Deployment:
    config = ProtocolConfig(hash_algo=algo, modulus_bits=bits)
    store = CredentialStore()
    server_id = Identity.from_text("server")
    rng = new_rng(seed)
    credentials, passwords = [], []
    for index in range(users):
        identity = Identity.from_text(f"user-{index}")
        password = f"password-{index}".encode()
        request, pending = register_user_begin(identity, password, rng, config)
        response = register_server_process(request, server_id, store, rng, config)
        credentials.append(register_user_complete(pending, response))
        passwords.append(password)
    return Deployment(config, store, server_id, credentials, passwords)


@pytest.fixture
def deployment() -> Deployment:
    return make_deployment()
