"""Chebyshev maps over Z_N: recurrence oracle, fast evaluation, semigroup."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaoskex.chebyshev import (
    ChebyParams,
    cheby_eval_fast,
    cheby_eval_fast_counted,
    cheby_eval_naive,
    cheby_keygen,
    cheby_shared,
    decode_element,
    element_width,
    encode_element,
)
from chaoskex.errors import MalformedElementError
from chaoskex.numtheory import gen_prime


def test_naive_base_cases():
    assert cheby_eval_naive(0, 5, 97) == 1
    assert cheby_eval_naive(1, 5, 97) == 5


def test_known_small_values():
    # T_n(2) = 1, 2, 7, 26, 97, 362, 1351 (integer Chebyshev values at x=2)
    expected = [1, 2, 7, 26, 97, 362, 1351]
    for n, want in enumerate(expected):
        assert cheby_eval_naive(n, 2, 1_000_003) == want
        assert cheby_eval_fast(n, 2, 1_000_003) == want
    assert cheby_eval_fast(2, 3, 7) == (2 * 9 - 1) % 7 == 3


@given(
    st.integers(min_value=0, max_value=400),
    st.integers(min_value=0, max_value=10**9),
    st.integers(min_value=2, max_value=10**9),
)
def test_fast_matches_naive(n, x, modulus):
    x %= modulus
    assert cheby_eval_fast(n, x, modulus) == cheby_eval_naive(n, x, modulus)


@given(
    st.integers(min_value=0, max_value=2**64),
    st.integers(min_value=0, max_value=2**64),
)
@settings(max_examples=60)
def test_semigroup_property(r, s):
    modulus = 18446744073709551557  # largest 64-bit prime
    x = 123456789
    inner = cheby_eval_fast(s, x, modulus)
    assert cheby_eval_fast(r, inner, modulus) == cheby_eval_fast(r * s, x, modulus)


def test_semigroup_concrete():
    assert cheby_eval_fast(2, cheby_eval_fast(3, 2, 10**9), 10**9) == 1351
    assert cheby_eval_fast(6, 2, 10**9) == 1351


def test_fast_multiplication_count():
    for n in (1, 2, 3, 1000, 2**64 - 1):
        _, mults = cheby_eval_fast_counted(n, 7, 10**9 + 7)
        assert mults <= 2 * n.bit_length()


def test_eval_rejects_negative_degree():
    with pytest.raises(ValueError):
        cheby_eval_fast(-1, 2, 7)
    with pytest.raises(ValueError):
        cheby_eval_naive(-1, 2, 7)


def test_eval_reduces_the_point():
    # Parameter validation lives in ChebyParams; the evaluators reduce x.
    assert cheby_eval_fast(3, 9, 7) == cheby_eval_fast(3, 2, 7)


def test_element_codec_round_trip():
    modulus = gen_prime(64, random.Random(5))
    width = element_width(modulus)
    assert width == 8
    for value in (0, 1, modulus - 1, modulus // 2):
        blob = encode_element(value, modulus)
        assert len(blob) == width
        assert decode_element(blob, modulus) == value


def test_element_codec_rejects_out_of_range():
    with pytest.raises(MalformedElementError):
        decode_element(b"\xff" * 8, 2**63 + 5)
    with pytest.raises(MalformedElementError):
        decode_element(b"\x00" * 7, 2**63 + 5)  # wrong width
    with pytest.raises(MalformedElementError):
        encode_element(10, 7)


def test_params_validation():
    rng = random.Random(11)
    modulus = gen_prime(64, rng)
    params = ChebyParams(modulus=modulus, base=3)
    assert params.base == 3
    assert params.element_width == 8
    with pytest.raises(MalformedElementError):
        ChebyParams(modulus=modulus, base=modulus)
    with pytest.raises(MalformedElementError):
        ChebyParams(modulus=modulus, base=-1)
    with pytest.raises(ValueError):
        ChebyParams(modulus=4, base=1)  # too small
    with pytest.raises(ValueError):
        ChebyParams(modulus=2**64, base=1)  # composite


def test_key_agreement_round_trip():
    rng = random.Random(21)
    params = ChebyParams(modulus=gen_prime(64, rng), base=rng.randrange(2, 2**32))
    alice = cheby_keygen(params, rng)
    bob = cheby_keygen(params, rng)
    shared_a = cheby_shared(alice.exponent, bob.public, params)
    shared_b = cheby_shared(bob.exponent, alice.public, params)
    assert shared_a == shared_b
    assert alice.public == cheby_eval_fast(alice.exponent, params.base, params.modulus)
    with pytest.raises(MalformedElementError):
        cheby_shared(alice.exponent, params.modulus, params)
