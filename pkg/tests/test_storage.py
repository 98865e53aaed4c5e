"""On-disk credential files and the append-only server store."""

import dataclasses
import os

import pytest

from chaoskex.errors import RegistrationRefusedError, StorageError
from chaoskex.primitives import Identity
from chaoskex.protocol import ServerRecord, UserCredentials
from chaoskex.storage import FileCredentialStore, load_credentials, save_credentials


def sample_credentials() -> UserCredentials:
    return UserCredentials(
        identity=Identity.from_text("alice"),
        server_id=Identity.from_text("server"),
        pseudonym=b"p" * 16,
        wrapped_secret=b"w" * 32,
        mask_key=b"m" * 32,
        pw_salt=b"s" * 16,
    )


def sample_row(name="alice", pseudonym=b"p" * 16) -> ServerRecord:
    return ServerRecord(Identity.from_text(name), pseudonym, b"w" * 32, b"m" * 32, b"c" * 32)


def test_credentials_round_trip(tmp_path):
    path = str(tmp_path / "user.ckex")
    creds = sample_credentials()
    save_credentials(path, creds)
    assert load_credentials(path) == creds
    assert os.stat(path).st_mode & 0o777 == 0o600


def test_credentials_overwrite_is_atomic_replace(tmp_path):
    path = str(tmp_path / "user.ckex")
    save_credentials(path, sample_credentials())
    other = dataclasses.replace(sample_credentials(), pseudonym=b"q" * 16)
    save_credentials(path, other)
    assert load_credentials(path) == other
    assert not [n for n in os.listdir(tmp_path) if ".tmp." in n]


def test_load_rejects_damage(tmp_path):
    path = str(tmp_path / "user.ckex")
    save_credentials(path, sample_credentials())
    blob = open(path, "rb").read()

    cases = {
        "bad-magic": b"XXXX" + blob[4:],
        "bad-version": blob[:4] + b"\x09" + blob[5:],
        "truncated": blob[:-3],
        "empty-log": blob[:5],
    }
    for name, damaged in cases.items():
        bad_path = str(tmp_path / name)
        with open(bad_path, "wb") as fh:
            fh.write(damaged)
        with pytest.raises(StorageError):
            load_credentials(bad_path)
    with pytest.raises(StorageError):
        load_credentials(str(tmp_path / "missing.ckex"))


def test_load_rejects_wrong_record_kind(tmp_path):
    path = str(tmp_path / "store.ckex")
    store = FileCredentialStore(path)
    store.insert(sample_row())
    with pytest.raises(StorageError, match="unexpected record tag"):
        load_credentials(path)


def test_file_store_persists_across_reopen(tmp_path):
    path = str(tmp_path / "store.ckex")
    store = FileCredentialStore(path)
    assert len(store) == 0
    store.insert(sample_row("alice", b"p" * 16))
    store.insert(sample_row("bob", b"q" * 16))

    reopened = FileCredentialStore(path)
    assert len(reopened) == 2
    assert reopened.lookup(b"q" * 16).identity == Identity.from_text("bob")
    assert reopened.has_identity(Identity.from_text("alice"))


def test_file_store_rejects_duplicates_without_writing(tmp_path):
    path = str(tmp_path / "store.ckex")
    store = FileCredentialStore(path)
    store.insert(sample_row())
    size_before = os.path.getsize(path)
    with pytest.raises(RegistrationRefusedError):
        store.insert(sample_row())  # same identity and pseudonym
    assert os.path.getsize(path) == size_before
    assert len(FileCredentialStore(path)) == 1


def test_file_store_rejects_credential_file(tmp_path):
    path = str(tmp_path / "user.ckex")
    save_credentials(path, sample_credentials())
    with pytest.raises(StorageError, match="unexpected record tag"):
        FileCredentialStore(path)


def test_file_store_rejects_corrupt_log(tmp_path):
    path = str(tmp_path / "store.ckex")
    store = FileCredentialStore(path)
    store.insert(sample_row())
    with open(path, "ab") as fh:
        fh.write(b"\x00\x00\x00")  # dangling partial header
    with pytest.raises(StorageError):
        FileCredentialStore(path)
