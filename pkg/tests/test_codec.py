import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acoustic_dmpc.bspline import ideal_line_coeffs
from acoustic_dmpc.codec import (
    EncodedMessage,
    QuantScheme,
    bits_to_hex,
    decode_coeffs,
    decode_payload,
    encode_coeffs,
    encode_payload,
    from_twos,
    hex_to_bits,
    id_bits,
    message_bits,
    payload_bits,
    quantize,
    to_twos,
    unpack_payload,
)
from acoustic_dmpc.errors import ArgumentError, IdError, LengthError


def oracle_field(value: Fraction, bits: int, scale: Fraction) -> str:
    """Independent two's-complement encoder on exact rationals (half-to-even)."""
    x = value / scale
    fl = math.floor(x)
    rem = x - fl
    code = fl + (1 if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and fl % 2) else 0)
    code = max(-(2 ** (bits - 1)), min(2 ** (bits - 1) - 1, code))
    return bin(code % (1 << bits))[2:].zfill(bits)


def oracle_message(c, scheme: QuantScheme) -> str:
    c = [Fraction(v) for v in c]
    n = len(c) - 3
    k = Fraction(scheme.k_ref)
    ideal = [k / 3, 2 * k / 3] + [k] * (n - 2) + [2 * k / 3, k / 3]
    out = oracle_field(c[0], scheme.w1_bits, Fraction(scheme.m_lsb))
    for j in range(n + 2):
        res = 3 / k * (c[j + 1] - c[j] - ideal[j])
        out += oracle_field(res, scheme.w_fi, Fraction(1, 2**scheme.f_bits))
    return out


class TestFixedPoint:
    def test_worked_example_pattern(self):
        # 010 0011 in X_{3,4}
        assert from_twos("0100011") * 2.0**-4 == 2.1875

    def test_twos_roundtrip(self):
        for bits in (1, 3, 7, 16):
            for code in range(-(2 ** (bits - 1)), 2 ** (bits - 1)):
                assert from_twos(to_twos(code, bits)) == code

    def test_x34_table(self):
        # X_{3,4}: i=3 integer bits, first patterns and the extremes
        assert from_twos("0000000") == 0
        assert from_twos("1111111") == -1
        assert from_twos("1000000") * 2**-4 == -4.0
        assert from_twos("0111111") * 2**-4 == 4.0 - 2**-4

    def test_quantize_half_even_and_saturation(self):
        assert quantize(0.5, 4, 1.0) == (0, False)
        assert quantize(1.5, 4, 1.0) == (2, False)
        assert quantize(-2.5, 4, 1.0) == (-2, False)
        assert quantize(100.0, 4, 1.0) == (7, True)
        assert quantize(-100.0, 4, 1.0) == (-8, True)
        assert quantize(float("inf"), 4, 1.0) == (7, True)

    def test_scheme_validation(self):
        s = QuantScheme.from_width(10)
        assert (s.i_bits, s.f_bits, s.w_fi) == (3, 7, 10)
        assert s.residual_range == (-4.0, 4.0 - 2**-7)
        with pytest.raises(ArgumentError):
            QuantScheme.from_width(2)
        with pytest.raises(ArgumentError):
            QuantScheme(k_ref=0.0)
        d = QuantScheme.double_precision(2.0)
        assert (d.w_fi, d.w1_bits, d.k_ref) == (53, 64, 2.0)


class TestCoefficients:
    def test_ideal_line_zero_residuals(self):
        scheme = QuantScheme(k_ref=8.0)
        msg = encode_coeffs(ideal_line_coeffs(10.0, 8.0, 6), scheme)
        assert msg.residuals == (0,) * 8
        assert msg.m_field == 200
        np.testing.assert_allclose(decode_coeffs(msg, scheme), ideal_line_coeffs(10.0, 8.0, 6), atol=1e-12)

    def test_matches_oracle_bits(self):
        rng = np.random.default_rng(11)
        for w_fi in (4, 7, 10, 14):
            scheme = QuantScheme.from_width(w_fi, k_ref=2.5, w1_bits=32, m_lsb=0.05)
            for _ in range(20):
                c = ideal_line_coeffs(rng.uniform(-50, 50), 2.5, 6) + rng.normal(0, 0.5, 9)
                bits, _ = encode_payload(0, {1: c}, scheme, 2)
                assert bits[1:] == oracle_message(c, scheme)

    def test_double_precision_within_float_rounding(self):
        # 50 fraction bits exceed what double arithmetic resolves exactly
        rng = np.random.default_rng(12)
        scheme = QuantScheme.double_precision(2.5)
        for _ in range(20):
            c = ideal_line_coeffs(rng.uniform(-50, 50), 2.5, 6) + rng.normal(0, 0.5, 9)
            msg = encode_coeffs(c, scheme)
            ref = oracle_message(c, scheme)
            codes = [from_twos(ref[64 + 53 * j : 64 + 53 * (j + 1)]) for j in range(8)]
            assert from_twos(ref[:64]) == msg.m_field
            assert max(abs(a - b) for a, b in zip(codes, msg.residuals)) <= 64

    def test_golden_vector(self):
        # frozen: V=3, h_p=3, X_{3,4}, w1=8, m_lsb=0.25, k_ref=1
        scheme = QuantScheme(i_bits=3, f_bits=4, w1_bits=8, k_ref=1.0, m_lsb=0.25)
        c = [1.0, 1.5, 2.25, 3.0, 3.5, 4.0]
        bits, _ = encode_payload(2, {0: c, 1: ideal_line_coeffs(0.0, 1.0, 3)}, scheme, 3)
        msg0 = oracle_message(c, scheme)
        msg1 = oracle_message(ideal_line_coeffs(0.0, 1.0, 3), scheme)
        assert bits == "10" + msg0 + msg1
        assert bits_to_hex(bits) == "810404e9e0400000000000"
        assert len(bits) == payload_bits(3, 8, 7, 3) == 88

    def test_decode_length_error(self):
        scheme = QuantScheme()
        with pytest.raises(LengthError):
            decode_coeffs(EncodedMessage(0, (0, 0, 0)), scheme, n=4)
        with pytest.raises(LengthError):
            encode_coeffs([1.0, 2.0, 3.0], scheme)

    def test_saturation_counted(self):
        scheme = QuantScheme(k_ref=1.0)
        c = ideal_line_coeffs(0.0, 1.0, 4)
        c[3] += 50.0
        msg = encode_coeffs(c, scheme)
        assert msg.saturations >= 1


class TestPayload:
    def test_sizes(self):
        assert id_bits(2) == 1 and id_bits(4) == 2 and id_bits(6) == 3
        assert message_bits(QuantScheme.from_width(10), 6) == 32 + 80
        assert payload_bits(6, 32, 10, 6) == 563
        assert payload_bits(4, 32, 10, 6) == 338
        with pytest.raises(ArgumentError):
            id_bits(1)

    def test_roundtrip_payload(self):
        scheme = QuantScheme(k_ref=3.0)
        rng = np.random.default_rng(4)
        msgs = {a: ideal_line_coeffs(rng.uniform(0, 10), 3.0, 4) + rng.normal(0, 0.1, 7) for a in (0, 1, 3)}
        bits, enc = encode_payload(2, msgs, scheme, 4)
        sender, dec = decode_payload(bits, scheme, 4, 4)
        assert sender == 2 and sorted(dec) == [0, 1, 3]
        for a in msgs:
            np.testing.assert_allclose(dec[a], decode_coeffs(enc[a], scheme), atol=0)
        _, raw = unpack_payload(bits, scheme, 4, 4)
        assert raw == enc

    def test_argument_errors(self):
        scheme = QuantScheme()
        c = ideal_line_coeffs(0.0, 1.0, 4)
        with pytest.raises(IdError):
            encode_payload(4, {0: c}, scheme, 4)
        with pytest.raises(ArgumentError):
            encode_payload(0, {1: c, 2: c}, scheme, 4)
        with pytest.raises(LengthError):
            unpack_payload("0101", scheme, 4, 4)
        bits, _ = encode_payload(0, {1: c, 2: c}, scheme, 3)
        with pytest.raises(IdError):
            unpack_payload("11" + bits[2:], scheme, 3, 4)
        with pytest.raises(LengthError):
            unpack_payload(bits[:-1] + "2", scheme, 3, 4)

    def test_hex_roundtrip(self):
        for bits in ("1", "0110", "101100111", ""):
            assert hex_to_bits(bits_to_hex(bits), len(bits)) == bits


@settings(max_examples=80, deadline=None)
@given(
    st.integers(1, 12),
    st.integers(3, 10),
    st.floats(0.2, 20.0),
    st.lists(st.floats(-0.9, 0.9), min_size=12, max_size=12),
    st.floats(-1000, 1000),
)
def test_roundtrip_error_bound(f_bits, n, k, frac, m):
    scheme = QuantScheme(i_bits=3, f_bits=f_bits, k_ref=k, m_lsb=2.0**-20)
    # residuals well inside the representable range
    res = 3.0 * np.array(frac[: n + 2])
    c = m + np.concatenate([[0.0], np.cumsum(ideal_line_coeffs(0.0, k, n)[1:] - ideal_line_coeffs(0.0, k, n)[:-1] + k / 3 * res)])
    msg = encode_coeffs(c, scheme)
    assert msg.saturations == 0
    dec = decode_coeffs(msg, scheme)
    err_delta = np.abs(np.diff(dec) - np.diff(c))
    assert err_delta.max() <= (k / 3) * 2.0 ** (-f_bits - 1) * (1 + 1e-9) + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(3, 10), st.integers(4, 20), st.integers(0, 40))
def test_payload_length_property(V, h_p, w_fi, w1):
    scheme = QuantScheme.from_width(w_fi, w1_bits=w1, k_ref=1.0)
    c = ideal_line_coeffs(0.0, 1.0, h_p)
    bits, _ = encode_payload(V - 1, {a: c for a in range(V - 1)}, scheme, V)
    assert len(bits) == (V - 1) * (w1 + w_fi * (h_p + 2)) + math.ceil(math.log2(V))
