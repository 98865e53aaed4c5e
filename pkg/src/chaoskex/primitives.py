"""Hashing, masking and byte-level glue used by every protocol formula.

All hashing goes through `hash_tuple`, which prefixes a domain tag and
length-prefixes every item (4-byte big-endian), so distinct argument
tuples and distinct formulas can never collide. The tag strings are part
of the wire contract: both ends must use the same tag for the same
formula or every derived digest changes.
"""

from __future__ import annotations

import hashlib
import hmac
import random
from collections import Counter
from dataclasses import dataclass

from . import chebyshev

DIGEST_LEN = 32
NONCE_LEN = 16
IDENTITY_MAX = 31  # padded form is 1 length byte + raw + zeros = 32 bytes

# One tag per protocol formula.
TAG_PW_DIGEST = "hpw"        # salted password digest H(pw, salt)
TAG_MASK_KEY = "R1"          # wire mask key H(m2, pw_digest)
TAG_CRT_SECRET = "HX"        # digest of the CRT combination
TAG_WRAP = "Ri"              # identity/password wrap H(id, pw_digest)
TAG_NONCE_MASK = "AIDmask"   # per-session mask H(k) applied to credential and identity
TAG_SERVER_PROOF = "AUs"
TAG_USER_PROOF = "AUi"
TAG_SESSION_KEY = "sk"
TAG_MASK_BLOCK = "mask"      # mask_expand block derivation

_HASHES = {
    "sha256": hashlib.sha256,
    "sha3-256": hashlib.sha3_256,
    "blake2s": hashlib.blake2s,
}


def hash_algorithms() -> list[str]:
    return sorted(_HASHES)


def hash_tuple(tag: str, items: list[bytes], algo: str = "sha256") -> bytes:
    """32-byte digest of a domain tag and items under an injective encoding."""
    try:
        h = _HASHES[algo]()
    except KeyError:
        raise ValueError(f"unknown hash algorithm {algo!r}") from None
    tag_bytes = tag.encode()
    h.update(len(tag_bytes).to_bytes(4, "big"))
    h.update(tag_bytes)
    for item in items:
        h.update(len(item).to_bytes(4, "big"))
        h.update(item)
    return h.digest()


def mask_expand(seed: bytes, out_len: int, algo: str = "sha256") -> bytes:
    """Deterministic expansion of a digest into out_len mask bytes.

    Counter-mode over hash_tuple, so mask_expand(s, n) is always a prefix
    of mask_expand(s, m) for n < m. Lets a 32-byte digest mask a field
    element of any encoded width.
    """
    if out_len < 1:
        raise ValueError("out_len must be >= 1")
    blocks = []
    for counter in range((out_len + DIGEST_LEN - 1) // DIGEST_LEN):
        blocks.append(hash_tuple(TAG_MASK_BLOCK, [seed, counter.to_bytes(4, "big")], algo))
    return b"".join(blocks)[:out_len]


def xor_bytes(a: bytes, b: bytes) -> bytes:
    """Elementwise XOR; refuses length mismatches rather than truncating."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return bytes(x ^ y for x, y in zip(a, b))


def ct_equal(a: bytes, b: bytes) -> bool:
    """Constant-time digest comparison."""
    return hmac.compare_digest(a, b)


@dataclass(frozen=True)
class Identity:
    """A party identity of 1..31 raw bytes with a fixed 32-byte canonical form.

    The canonical form (length byte, raw bytes, zero padding) is what
    crosses hashes, XOR masks and the wire; it decodes uniquely back to
    the raw bytes.
    """

    raw: bytes

    def __post_init__(self):
        if not 1 <= len(self.raw) <= IDENTITY_MAX:
            raise ValueError(f"identity must be 1..{IDENTITY_MAX} bytes")

    def padded(self) -> bytes:
        return bytes([len(self.raw)]) + self.raw + b"\x00" * (IDENTITY_MAX - len(self.raw))

    @classmethod
    def from_padded(cls, data: bytes) -> "Identity":
        if len(data) != DIGEST_LEN:
            raise ValueError("padded identity must be 32 bytes")
        length = data[0]
        if not 1 <= length <= IDENTITY_MAX:
            raise ValueError("invalid identity length byte")
        raw, padding = data[1:1 + length], data[1 + length:]
        if padding != b"\x00" * len(padding):
            raise ValueError("nonzero identity padding")
        return cls(raw)

    @classmethod
    def from_text(cls, text: str) -> "Identity":
        return cls(text.encode())

    def __str__(self):
        return self.raw.decode("utf-8", "backslashreplace")


def new_nonce(rng: random.Random) -> bytes:
    return rng.randbytes(NONCE_LEN)


def new_rng(seed: int | None = None) -> random.Random:
    """Seeded deterministic RNG for tests, OS randomness otherwise."""
    if seed is None:
        return random.SystemRandom()
    return random.Random(seed)


class Meter:
    """Per-session operation census: hash calls by tag, XORs, map evaluations,
    symmetric encryptions/decryptions.

    Every session owns one; nothing global. The wrapped calls are the
    plain primitives above, so metered and unmetered paths compute
    identical bytes.
    """

    def __init__(self, algo: str = "sha256"):
        self.algo = algo
        self.hashes: Counter[str] = Counter()
        self.xors = 0
        self.cheby_evals = 0
        self.encryptions = 0
        self.decryptions = 0

    def hash_tuple(self, tag: str, items: list[bytes]) -> bytes:
        self.hashes[tag] += 1
        return hash_tuple(tag, items, self.algo)

    def mask_expand(self, seed: bytes, out_len: int) -> bytes:
        self.hashes[TAG_MASK_BLOCK] += (out_len + DIGEST_LEN - 1) // DIGEST_LEN
        return mask_expand(seed, out_len, self.algo)

    def xor(self, a: bytes, b: bytes) -> bytes:
        self.xors += 1
        return xor_bytes(a, b)

    def cheby(self, exponent: int, point: int, modulus: int) -> int:
        self.cheby_evals += 1
        return chebyshev.cheby_eval_fast(exponent, point, modulus)
