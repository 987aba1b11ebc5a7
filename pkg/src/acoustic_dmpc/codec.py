"""Quantized wire format for spline coefficient vectors.

A coefficient vector ``c`` of a spline with ``n`` intervals is sent as

* ``m_field``: ``c[0]`` as a signed fixed-point integer of ``w1_bits`` bits
  and resolution ``m_lsb``;
* ``n + 2`` residuals ``(3 / k) * (diff(c) - ideal_deltas)`` quantized onto
  the signed fixed-point alphabet with ``i_bits`` integer bits (two's
  complement, sign included) and ``f_bits`` fraction bits.

A broadcast payload is the sender identifier (``ceil(log2 V)`` bits)
followed by one message per other agent in ascending ID order. All fields
are packed big-endian, most significant bit first. Bitstrings are plain
``str`` objects of ``'0'``/``'1'`` characters.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .bspline import ideal_line_deltas
from .errors import ArgumentError, IdError, LengthError

__all__ = [
    "QuantScheme",
    "EncodedMessage",
    "quantize",
    "to_twos",
    "from_twos",
    "encode_coeffs",
    "decode_coeffs",
    "message_bits",
    "payload_bits",
    "id_bits",
    "encode_payload",
    "unpack_payload",
    "decode_payload",
    "bits_to_hex",
    "hex_to_bits",
]


@dataclass(frozen=True)
class QuantScheme:
    """Fixed-point parameters of the coefficient codec.

    ``k_ref`` is the ideal coefficient advance per spline interval (target
    path speed times interval length, scaled like the exchanged vectors).
    """

    i_bits: int = 3
    f_bits: int = 7
    w1_bits: int = 32
    k_ref: float = 1.0
    m_lsb: float = 0.05

    def __post_init__(self) -> None:
        if self.i_bits < 1:
            raise ArgumentError("i_bits must be >= 1")
        if self.f_bits < 0:
            raise ArgumentError("f_bits must be >= 0")
        if self.w1_bits < 0:
            raise ArgumentError("w1_bits must be >= 0")
        if not self.k_ref > 0:
            raise ArgumentError("k_ref must be positive")
        if not self.m_lsb > 0:
            raise ArgumentError("m_lsb must be positive")

    @property
    def w_fi(self) -> int:
        return self.i_bits + self.f_bits

    @property
    def step(self) -> float:
        return 2.0 ** -self.f_bits

    @property
    def residual_range(self) -> tuple[float, float]:
        lim = 2.0 ** (self.i_bits - 1)
        return (-lim, lim - self.step)

    @classmethod
    def from_width(cls, w_fi: int, i_bits: int = 3, **kw) -> "QuantScheme":
        """Scheme with ``w_fi`` total bits per residual."""
        if w_fi < i_bits:
            raise ArgumentError(f"w_fi={w_fi} smaller than i_bits={i_bits}")
        return cls(i_bits=i_bits, f_bits=w_fi - i_bits, **kw)

    @classmethod
    def double_precision(cls, k_ref: float = 1.0) -> "QuantScheme":
        """Near-lossless reference mode: 53-bit residuals, 64-bit ``m``."""
        return cls(i_bits=3, f_bits=50, w1_bits=64, k_ref=k_ref, m_lsb=2.0**-40)

    def replace(self, **kw) -> "QuantScheme":
        vals = {f: getattr(self, f) for f in ("i_bits", "f_bits", "w1_bits", "k_ref", "m_lsb")}
        vals.update(kw)
        return QuantScheme(**vals)


@dataclass(frozen=True)
class EncodedMessage:
    """Integer fields of one encoded coefficient vector.

    ``saturations`` counts clamped fields; it is bookkeeping and is not
    transmitted.
    """

    m_field: int
    residuals: tuple[int, ...]
    saturations: int = field(default=0, compare=False)

    @property
    def n_intervals(self) -> int:
        return len(self.residuals) - 2


def quantize(value: float, bits: int, scale: float) -> tuple[int, bool]:
    """Round ``value / scale`` half-to-even into a signed ``bits``-wide integer.

    Returns the code and whether it saturated.
    """
    if bits == 0:
        return 0, value != 0.0
    lo = -(1 << (bits - 1))
    hi = (1 << (bits - 1)) - 1
    x = value / scale
    if not np.isfinite(x):
        code = hi if x > 0 else lo
        return code, True
    code = int(np.rint(x))
    if code < lo:
        return lo, True
    if code > hi:
        return hi, True
    return code, False


def to_twos(code: int, bits: int) -> str:
    """Two's-complement bit pattern of ``code``, MSB first."""
    if bits == 0:
        return ""
    return format(code & ((1 << bits) - 1), f"0{bits}b")


def from_twos(pattern: str) -> int:
    """Signed integer of a two's-complement bit pattern."""
    if not pattern:
        return 0
    raw = int(pattern, 2)
    if pattern[0] == "1":
        raw -= 1 << len(pattern)
    return raw


def encode_coeffs(coeffs, scheme: QuantScheme) -> EncodedMessage:
    """Delta-code and quantize a coefficient vector."""
    c = np.asarray(coeffs, dtype=float).ravel()
    if len(c) < 4:
        raise LengthError(f"need at least 4 coefficients, got {len(c)}")
    n = len(c) - 3
    m_code, sat = quantize(c[0], scheme.w1_bits, scheme.m_lsb)
    saturations = int(sat)
    res = (3.0 / scheme.k_ref) * (np.diff(c) - ideal_line_deltas(scheme.k_ref, n))
    codes = []
    for r in res:
        q, sat = quantize(float(r), scheme.w_fi, scheme.step)
        saturations += sat
        codes.append(q)
    return EncodedMessage(m_code, tuple(codes), saturations)


def decode_coeffs(msg: EncodedMessage, scheme: QuantScheme, n: int | None = None) -> np.ndarray:
    """Reconstruct coefficients from an :class:`EncodedMessage`."""
    if n is None:
        n = msg.n_intervals
    if len(msg.residuals) != n + 2:
        raise LengthError(f"expected {n + 2} residual fields, got {len(msg.residuals)}")
    res = np.array(msg.residuals, dtype=float) * scheme.step
    deltas = ideal_line_deltas(scheme.k_ref, n) + (scheme.k_ref / 3.0) * res
    c0 = msg.m_field * scheme.m_lsb
    return np.concatenate([[c0], c0 + np.cumsum(deltas)])


def message_bits(scheme: QuantScheme, h_p: int) -> int:
    """Bits of one message: ``w1 + w_fi * (h_p + 2)``."""
    return scheme.w1_bits + scheme.w_fi * (h_p + 2)


def id_bits(V: int) -> int:
    if V < 2:
        raise ArgumentError(f"network needs at least 2 agents, got {V}")
    return math.ceil(math.log2(V))


def payload_bits(V: int, w1_bits: int, w_fi: int, h_p: int) -> int:
    """Payload size ``(V - 1) * (w1 + w_fi * (h_p + 2)) + ceil(log2 V)``."""
    return (V - 1) * (w1_bits + w_fi * (h_p + 2)) + id_bits(V)


def _pack(msg: EncodedMessage, scheme: QuantScheme) -> str:
    parts = [to_twos(msg.m_field, scheme.w1_bits)]
    parts.extend(to_twos(r, scheme.w_fi) for r in msg.residuals)
    return "".join(parts)


def encode_payload(
    sender: int,
    per_neighbor_coeffs: Mapping[int, object],
    scheme: QuantScheme,
    V: int,
) -> tuple[str, dict[int, EncodedMessage]]:
    """Serialize one broadcast packet.

    Returns the bitstring and the encoded messages keyed by receiver, so
    callers can account for saturation.
    """
    if not 0 <= sender < V:
        raise IdError(f"sender {sender} outside [0, {V})")
    expected = [a for a in range(V) if a != sender]
    if sorted(per_neighbor_coeffs) != expected:
        raise ArgumentError(
            f"need messages for agents {expected}, got {sorted(per_neighbor_coeffs)}"
        )
    lengths = {len(np.ravel(per_neighbor_coeffs[a])) for a in expected}
    if len(lengths) != 1:
        raise ArgumentError(f"coefficient vectors differ in length: {sorted(lengths)}")
    encoded = {a: encode_coeffs(per_neighbor_coeffs[a], scheme) for a in expected}
    bits = to_twos(sender, id_bits(V)) + "".join(_pack(encoded[a], scheme) for a in expected)
    h_p = lengths.pop() - 3
    assert len(bits) == payload_bits(V, scheme.w1_bits, scheme.w_fi, h_p)
    return bits, encoded


def unpack_payload(
    bits: str, scheme: QuantScheme, V: int, h_p: int
) -> tuple[int, dict[int, EncodedMessage]]:
    """Split a payload into sender ID and per-receiver integer fields."""
    want = payload_bits(V, scheme.w1_bits, scheme.w_fi, h_p)
    if len(bits) != want:
        raise LengthError(f"payload has {len(bits)} bits, expected {want}")
    if set(bits) - {"0", "1"}:
        raise LengthError("payload contains characters other than 0/1")
    nid = id_bits(V)
    sender = int(bits[:nid], 2)
    if sender >= V:
        raise IdError(f"sender id {sender} >= V={V}")
    pos = nid
    out = {}
    for a in (a for a in range(V) if a != sender):
        m = from_twos(bits[pos : pos + scheme.w1_bits])
        pos += scheme.w1_bits
        res = []
        for _ in range(h_p + 2):
            res.append(from_twos(bits[pos : pos + scheme.w_fi]))
            pos += scheme.w_fi
        out[a] = EncodedMessage(m, tuple(res))
    return sender, out


def decode_payload(
    bits: str, scheme: QuantScheme, V: int, h_p: int
) -> tuple[int, dict[int, np.ndarray]]:
    """Decode a payload into sender ID and per-receiver coefficient vectors."""
    sender, msgs = unpack_payload(bits, scheme, V, h_p)
    return sender, {a: decode_coeffs(m, scheme, h_p) for a, m in msgs.items()}


def bits_to_hex(bits: str) -> str:
    """Hex dump; the bitstring is right-padded with zeros to whole nibbles."""
    if not bits:
        return ""
    pad = (-len(bits)) % 4
    padded = bits + "0" * pad
    return format(int(padded, 2), f"0{len(padded) // 4}x")


def hex_to_bits(text: str, n_bits: int) -> str:
    """Inverse of :func:`bits_to_hex` for a known bit length."""
    digits = text.strip()
    if n_bits == 0:
        return ""
    total = len(digits) * 4
    if total < n_bits:
        raise LengthError(f"hex has {total} bits, need {n_bits}")
    return format(int(digits, 16), f"0{total}b")[:n_bits]
