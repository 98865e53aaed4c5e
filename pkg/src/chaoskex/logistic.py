"""Deterministic logistic-map sequences in decimal fixed point.

The iteration x_{n+1} = lambda * x_n * (1 - x_n) feeds the registration
phase, where both parties sum a generated sequence and lift the sum to an
integer for the CRT. Binary floating point would make "the decimal digits
of the sum" platform-dependent, so everything here runs on integer
mantissas scaled by 10^DIGITS with truncation toward zero; identical
parameters give bit-identical sequences everywhere.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

DIGITS = 18
SCALE = 10 ** DIGITS

# Chaos regime bounds for lambda, as mantissas.
LAMBDA_MIN = 3_570_000_000_000_000_000
LAMBDA_MAX = 4_000_000_000_000_000_000


def parse_fixed(text: str) -> int:
    """Parse a non-negative decimal literal ("0.25", "4") into a mantissa."""
    if text.startswith("-"):
        raise ValueError("negative values not supported")
    whole, _, frac = text.partition(".")
    frac = frac.ljust(DIGITS, "0")
    if len(frac) > DIGITS:
        raise ValueError(f"more than {DIGITS} fractional digits")
    return int(whole or "0") * SCALE + int(frac or "0")


def format_fixed(mantissa: int) -> str:
    """Render a mantissa as a decimal string, trailing zeros stripped."""
    whole, frac = divmod(mantissa, SCALE)
    text = str(frac).rjust(DIGITS, "0").rstrip("0")
    return f"{whole}.{text}" if text else str(whole)


@dataclass(frozen=True)
class LogisticParams:
    """Map parameter, initial value and sequence length, all validated.

    `lam` and `x0` are fixed-point mantissas (value * 10^DIGITS). The
    chaos regime 3.57 <= lambda <= 4 is enforced at construction.
    """

    lam: int
    x0: int
    terms: int

    def __post_init__(self):
        if not LAMBDA_MIN <= self.lam <= LAMBDA_MAX:
            raise ValueError("lambda outside the chaos regime [3.57, 4]")
        if not 0 <= self.x0 <= SCALE:
            raise ValueError("x0 must lie in [0, 1]")
        if self.terms < 1:
            raise ValueError("sequence length must be positive")

    @classmethod
    def from_decimals(cls, lam: str, x0: str, terms: int) -> "LogisticParams":
        return cls(parse_fixed(lam), parse_fixed(x0), terms)


def sample_params(rng: random.Random, terms: int = 64) -> LogisticParams:
    """Draw lambda and x0 uniformly from the fixed-point grid."""
    return LogisticParams(
        lam=rng.randrange(LAMBDA_MIN, LAMBDA_MAX + 1),
        x0=rng.randrange(0, SCALE + 1),
        terms=terms,
    )


def logistic_next(x: int, lam: int) -> int:
    """One map step on mantissas: lam * (x * (1 - x)), truncating after each multiply."""
    if not 0 <= x <= SCALE:
        raise ValueError("x must lie in [0, 1]")
    hump = x * (SCALE - x) // SCALE
    return lam * hump // SCALE


def logistic_sequence(params: LogisticParams) -> list[int]:
    """The mantissa sequence x_0 .. x_n (length terms + 1)."""
    seq = [params.x0]
    for _ in range(params.terms):
        seq.append(logistic_next(seq[-1], params.lam))
    return seq


@dataclass(frozen=True)
class ChaoticSum:
    """Exact sum of a generated sequence: integer mantissa and its digit count."""

    mantissa: int
    digits: int

    def __str__(self):
        return f"{self.mantissa}x10^-{self.digits}"


def chaotic_sum(seq: list[int]) -> ChaoticSum:
    """Exact fixed-point sum of a sequence of mantissas."""
    if not seq:
        raise ValueError("empty sequence")
    return ChaoticSum(sum(seq), DIGITS)


def decimal_lift(total: ChaoticSum) -> tuple[int, int]:
    """Lift a sum to (integer, digit count): value * 10^c with trailing zeros stripped.

    The digit count c is canonical (no trailing zero fractional digits), so
    independent parties lifting the same value get the same pair.
    """
    mantissa, digits = total.mantissa, total.digits
    while digits > 0 and mantissa % 10 == 0:
        mantissa //= 10
        digits -= 1
    return mantissa, digits
