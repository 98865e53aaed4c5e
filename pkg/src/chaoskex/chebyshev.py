"""Chebyshev polynomial arithmetic over Z_N.

The degree-n Chebyshev polynomial is defined by T_0 = 1, T_1 = x and the
recurrence T_n = 2*x*T_{n-1} - T_{n-2}. Evaluated modulo a large prime it
keeps the semigroup law T_r(T_s(x)) = T_s(T_r(x)) = T_{rs}(x), which is
what makes it usable as a Diffie-Hellman-style primitive: each party keeps
a secret degree and publishes the evaluation.

`cheby_eval_naive` is the linear-time oracle; `cheby_eval_fast` evaluates
the same function in O(log n) modular multiplications via the doubling
identities T_{2k} = 2*T_k^2 - 1 and T_{2k+1} = 2*T_k*T_{k+1} - x.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import MalformedElementError
from .numtheory import is_probable_prime


@dataclass(frozen=True)
class ChebyParams:
    """Public group parameters: prime modulus and base point x in [0, N)."""

    modulus: int
    base: int

    def __post_init__(self):
        if self.modulus < 5:
            raise ValueError("modulus must be >= 5")
        if not is_probable_prime(self.modulus):
            raise ValueError("modulus must be prime")
        if not 0 <= self.base < self.modulus:
            raise MalformedElementError("base point out of range")

    @property
    def element_width(self) -> int:
        return element_width(self.modulus)


@dataclass(frozen=True)
class ChebyKeyPair:
    """Secret degree and its public evaluation T_exponent(base) mod N."""

    exponent: int
    public: int


def element_width(modulus: int) -> int:
    """Canonical encoded width of a field element: ceil(bitlen(N)/8) bytes."""
    return (modulus.bit_length() + 7) // 8


def encode_element(value: int, modulus: int) -> bytes:
    """Big-endian, zero-padded to the canonical element width."""
    if not 0 <= value < modulus:
        raise MalformedElementError(f"element {value} out of range for modulus")
    return value.to_bytes(element_width(modulus), "big")


def decode_element(data: bytes, modulus: int) -> int:
    """Inverse of encode_element; rejects wrong width or out-of-range values."""
    if len(data) != element_width(modulus):
        raise MalformedElementError(f"expected {element_width(modulus)} bytes, got {len(data)}")
    value = int.from_bytes(data, "big")
    if value >= modulus:
        raise MalformedElementError("decoded element not below modulus")
    return value


def cheby_eval_naive(n: int, x: int, modulus: int) -> int:
    """T_n(x) mod N by the linear recurrence. Correctness oracle; O(n)."""
    if n < 0:
        raise ValueError("degree must be >= 0")
    x %= modulus
    if n == 0:
        return 1 % modulus
    prev, cur = 1 % modulus, x
    for _ in range(n - 1):
        prev, cur = cur, (2 * x * cur - prev) % modulus
    return cur


def cheby_eval_fast(n: int, x: int, modulus: int) -> int:
    """T_n(x) mod N in O(log n) multiplications (doubling form of the recurrence)."""
    value, _ = cheby_eval_fast_counted(n, x, modulus)
    return value


def cheby_eval_fast_counted(n: int, x: int, modulus: int) -> tuple[int, int]:
    """Like cheby_eval_fast, but also returns the modular multiplication count."""
    if n < 0:
        raise ValueError("degree must be >= 0")
    x %= modulus
    if n == 0:
        return 1 % modulus, 0
    # Walk the bits of n from the most significant down, maintaining the
    # pair (T_k, T_{k+1}) while k doubles (+ the current bit) each step.
    a, b = 1 % modulus, x
    muls = 0
    for i in range(n.bit_length() - 1, -1, -1):
        if (n >> i) & 1:
            a, b = (2 * a * b - x) % modulus, (2 * b * b - 1) % modulus
        else:
            a, b = (2 * a * a - 1) % modulus, (2 * a * b - x) % modulus
        muls += 2
    return a, muls


def cheby_keygen(params: ChebyParams, rng: random.Random) -> ChebyKeyPair:
    """Sample a secret degree uniformly from [2, N) and publish its evaluation.

    Degrees 0 and 1 are excluded: T_0 is constant and T_1 is the identity,
    so both would leak the secret outright.
    """
    exponent = rng.randrange(2, params.modulus)
    return ChebyKeyPair(exponent, cheby_eval_fast(exponent, params.base, params.modulus))


def cheby_shared(secret: int, peer_public: int, params: ChebyParams) -> int:
    """Apply the secret degree to the peer's public element: T_secret(peer) mod N."""
    if not 0 <= peer_public < params.modulus:
        raise MalformedElementError("peer element out of range")
    return cheby_eval_fast(secret, peer_public, params.modulus)
