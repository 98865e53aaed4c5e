"""Number-theoretic support: extended GCD, modular inverse, CRT, prime and coprime generation."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .errors import NonCoprimeModuliError, NoInverseError

# Primes below 1000, used to cheaply reject composites before Miller-Rabin.
_SMALL_PRIMES: list[int] = []
for _c in range(2, 1000):
    _composite = False
    for _p in _SMALL_PRIMES:
        if _p * _p > _c:
            break
        if _c % _p == 0:
            _composite = True
            break
    if not _composite:
        _SMALL_PRIMES.append(_c)

# 64 random bases give a composite-acceptance probability below 4^-64 < 2^-80.
MILLER_RABIN_ROUNDS = 64


def ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    """Return (g, u, v) with u*a + v*b == g == gcd(a, b) > 0."""
    if a == 0 and b == 0:
        raise ValueError("gcd(0, 0) is undefined")
    r0, r1 = a, b
    s0, s1 = 1, 0
    t0, t1 = 0, 1
    while r1 != 0:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
        t0, t1 = t1, t0 - q * t1
    if r0 < 0:
        r0, s0, t0 = -r0, -s0, -t0
    return r0, s0, t0


def mod_inverse(a: int, m: int) -> int:
    """Inverse of a modulo m, in [1, m). Raises NoInverseError if gcd(a, m) != 1."""
    if m < 2:
        raise ValueError("modulus must be >= 2")
    g, u, _ = ext_gcd(a % m, m)
    if g != 1:
        raise NoInverseError(f"{a} has no inverse modulo {m} (gcd={g})")
    return u % m


@dataclass(frozen=True)
class CrtSystem:
    """A system of congruences x = a_i (mod m_i) with pairwise coprime moduli."""

    residues: tuple[int, ...]
    moduli: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "residues", tuple(self.residues))
        object.__setattr__(self, "moduli", tuple(self.moduli))
        if len(self.residues) != len(self.moduli) or not self.moduli:
            raise ValueError("need equally many residues and moduli, at least one pair")
        if any(m < 1 for m in self.moduli):
            raise ValueError("moduli must be positive")
        for i in range(len(self.moduli)):
            for j in range(i + 1, len(self.moduli)):
                if math.gcd(self.moduli[i], self.moduli[j]) != 1:
                    raise NonCoprimeModuliError(
                        f"moduli {self.moduli[i]} and {self.moduli[j]} share a factor"
                    )


def crt_solve(system: CrtSystem) -> tuple[int, int]:
    """Solve the system, returning (X, M) with 0 <= X < M = prod(moduli).

    Uses the classical reconstruction X = sum(a_i * M_i * y_i) with
    M_i = M / m_i and y_i the inverse of M_i modulo m_i. Residues are
    reduced into their congruence class first.
    """
    big_m = 1
    for m in system.moduli:
        big_m *= m
    x = 0
    for a, m in zip(system.residues, system.moduli):
        if m == 1:
            continue
        partial = big_m // m
        y = mod_inverse(partial, m)
        x += (a % m) * partial * y
    x %= big_m
    assert all(x % m == a % m for a, m in zip(system.residues, system.moduli))
    return x, big_m


def is_probable_prime(n: int, rng: random.Random | None = None,
                      rounds: int = MILLER_RABIN_ROUNDS) -> bool:
    """Miller-Rabin primality test with `rounds` random bases."""
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    if rng is None:
        rng = random.SystemRandom()
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def gen_prime(bits: int, rng: random.Random) -> int:
    """Generate a prime of exactly `bits` bits."""
    if bits < 8:
        raise ValueError("bits must be >= 8")
    while True:
        candidate = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if is_probable_prime(candidate, rng):
            return candidate


def gen_coprime(m1: int, bits: int, rng: random.Random) -> int:
    """Generate an integer of exactly `bits` bits that is coprime to m1."""
    if m1 < 2:
        raise ValueError("m1 must be >= 2")
    if bits < 2:
        raise ValueError("bits must be >= 2")
    while True:
        candidate = rng.getrandbits(bits) | (1 << (bits - 1))
        if math.gcd(m1, candidate) == 1:
            return candidate
