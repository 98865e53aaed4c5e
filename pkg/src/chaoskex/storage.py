"""File persistence for user credentials and the server's verifier table.

One container format for both: a 4-byte magic, a version byte, then a
log of records, each a 4-byte big-endian length followed by a 1-byte
record tag and the record's length-prefixed fields.  Appending a record
never rewrites earlier bytes, so the server store doubles as a log.
"""

from __future__ import annotations

import os
import threading

from .errors import StorageError
from .primitives import Identity
from .protocol import CredentialStore, ServerRecord, UserCredentials
from .wire import encode_fields, split_fields

MAGIC = b"CKEX"
VERSION = 1

_RECORD_CREDENTIALS = 0x01
_RECORD_SERVER_ROW = 0x02

_HEADER = MAGIC + bytes([VERSION])


def _pack_record(tag: int, fields: list[bytes]) -> bytes:
    body = bytes([tag]) + encode_fields(fields)
    return len(body).to_bytes(4, "big") + body


def _iter_records(data: bytes, path: str):
    if not data.startswith(MAGIC):
        raise StorageError(f"{path}: bad magic")
    if len(data) < len(_HEADER) or data[len(MAGIC)] != VERSION:
        raise StorageError(f"{path}: unsupported version")
    offset = len(_HEADER)
    while offset < len(data):
        if offset + 4 > len(data):
            raise StorageError(f"{path}: truncated record header")
        length = int.from_bytes(data[offset:offset + 4], "big")
        offset += 4
        if length < 1 or offset + length > len(data):
            raise StorageError(f"{path}: truncated record")
        body = data[offset:offset + length]
        offset += length
        yield body[0], body[1:]


def _write_private(path: str, data: bytes):
    tmp = f"{path}.tmp.{os.getpid()}"
    fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def save_credentials(path: str, credentials: UserCredentials):
    """Write one credential record, replacing the file atomically."""
    record = _pack_record(
        _RECORD_CREDENTIALS,
        [
            credentials.identity.padded(),
            credentials.server_id.padded(),
            credentials.pseudonym,
            credentials.wrapped_secret,
            credentials.mask_key,
            credentials.pw_salt,
        ],
    )
    _write_private(path, _HEADER + record)


def load_credentials(path: str) -> UserCredentials:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from None
    for tag, body in _iter_records(data, path):
        if tag != _RECORD_CREDENTIALS:
            raise StorageError(f"{path}: unexpected record tag 0x{tag:02x}")
        try:
            fields = split_fields(body, 6)
            return UserCredentials(
                identity=Identity.from_padded(fields[0]),
                server_id=Identity.from_padded(fields[1]),
                pseudonym=fields[2],
                wrapped_secret=fields[3],
                mask_key=fields[4],
                pw_salt=fields[5],
            )
        except Exception as exc:  # noqa: BLE001 - rewrap below
            raise StorageError(f"{path}: corrupt credential record: {exc}") from None
    raise StorageError(f"{path}: no credential record")


def _pack_server_row(record: ServerRecord) -> bytes:
    return _pack_record(
        _RECORD_SERVER_ROW,
        [
            record.identity.padded(),
            record.pseudonym,
            record.wrapped_secret,
            record.mask_key,
            record.crt_secret,
        ],
    )


def _parse_server_row(body: bytes, path: str) -> ServerRecord:
    try:
        fields = split_fields(body, 5)
        return ServerRecord(
            identity=Identity.from_padded(fields[0]),
            pseudonym=fields[1],
            wrapped_secret=fields[2],
            mask_key=fields[3],
            crt_secret=fields[4],
        )
    except Exception as exc:  # noqa: BLE001 - rewrap below
        raise StorageError(f"{path}: corrupt store record: {exc}") from None


class FileCredentialStore(CredentialStore):
    """A CredentialStore whose inserts append to a record log on disk."""

    def __init__(self, path: str):
        super().__init__()
        self._path = path
        self._file_lock = threading.Lock()
        try:
            with open(path, "rb") as fh:
                data = fh.read()
        except FileNotFoundError:
            _write_private(path, _HEADER)
            return
        except OSError as exc:
            raise StorageError(f"cannot read {path}: {exc}") from None
        for tag, body in _iter_records(data, path):
            if tag != _RECORD_SERVER_ROW:
                raise StorageError(f"{path}: unexpected record tag 0x{tag:02x}")
            super().insert(_parse_server_row(body, path))

    def insert(self, record: ServerRecord):
        super().insert(record)
        with self._file_lock:
            try:
                with open(self._path, "ab") as fh:
                    fh.write(_pack_server_row(record))
            except OSError as exc:
                raise StorageError(f"cannot append to {self._path}: {exc}") from None
