"""Polar code construction, CRC attach/check and polar encoding.

A CA-polar code is described by a :class:`CodeSpec`. The ``K + C`` most reliable
synthetic channels carry the message followed by its CRC; the remaining ones
are frozen to zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from polarflip import _backend
from polarflip._reliability import RELIABILITY_1024
from polarflip.errors import InvalidParametersError

#: Default (polynomial, initial register) per CRC width. The polynomial omits
#: the implicit x^C term. 16 bits is CRC-16/CCITT-FALSE; the others are the
#: 5G NR polynomials or common small-width choices, with a zero preload.
CRC_PRESETS = {
    4: (0x3, 0x0),
    6: (0x21, 0x0),
    8: (0x07, 0x0),
    11: (0x621, 0x0),
    16: (0x1021, 0xFFFF),
    24: (0xB2B117, 0x0),
    32: (0x04C11DB7, 0x0),
}

BETA = 2.0 ** 0.25


@dataclass(frozen=True)
class CodeSpec:
    """Immutable description of an ``(N, K + C)`` CA-polar code."""

    n: int
    N: int
    K: int
    C: int
    info_set: tuple[int, ...]
    crc_poly: int
    crc_init: int = 0
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.N != 1 << self.n:
            raise InvalidParametersError(f"N={self.N} is not 2**{self.n}")
        if self.K < 1 or self.C < 0 or self.K + self.C > self.N:
            raise InvalidParametersError(f"invalid (N, K, C) = ({self.N}, {self.K}, {self.C})")
        info = tuple(int(i) for i in self.info_set)
        if len(info) != self.K + self.C:
            raise InvalidParametersError("info_set must have K + C entries")
        if any(b <= a for a, b in zip(info, info[1:])) or (info and (info[0] < 0 or info[-1] >= self.N)):
            raise InvalidParametersError("info_set must be strictly increasing within [0, N)")
        if self.C and not 0 <= self.crc_poly < (1 << self.C):
            raise InvalidParametersError("crc_poly does not fit in C bits")
        object.__setattr__(self, "info_set", info)
        object.__setattr__(self, "_hash", hash((self.N, self.K, self.C, info, self.crc_poly, self.crc_init)))

    def __hash__(self):
        return self._hash

    @property
    def payload_length(self) -> int:
        return self.K + self.C

    @property
    def rate(self) -> float:
        return (self.K + self.C) / self.N

    @cached_property
    def frozen_set(self) -> tuple[int, ...]:
        info = set(self.info_set)
        return tuple(i for i in range(self.N) if i not in info)

    @cached_property
    def info_array(self) -> np.ndarray:
        arr = np.asarray(self.info_set, dtype=np.int64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def frozen_mask(self) -> np.ndarray:
        mask = np.ones(self.N, dtype=np.uint8)
        mask[self.info_array] = 0
        mask.setflags(write=False)
        return mask

    @cached_property
    def _crc_affine(self) -> tuple[np.ndarray, np.ndarray]:
        # CRC is affine in the message: crc(m) = crc(0) ^ m @ G over GF(2).
        C, K = self.C, self.K
        const = np.array(_int_to_bits(crc_remainder([0] * K, self.crc_poly, C, self.crc_init), C), dtype=np.int64)
        rows = np.zeros((K, C), dtype=np.int64)
        mask = (1 << C) - 1
        reg = self.crc_poly  # x^C mod g
        for j in range(K - 1, -1, -1):
            rows[j] = _int_to_bits(reg, C)
            top = (reg >> (C - 1)) & 1
            reg = (reg << 1) & mask
            if top:
                reg ^= self.crc_poly
        return const, rows

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "N": self.N,
            "K": self.K,
            "C": self.C,
            "crc_poly_hex": hex(self.crc_poly),
            "crc_init_hex": hex(self.crc_init),
            "info_set": list(self.info_set),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "CodeSpec":
        try:
            return cls(
                n=int(doc["n"]),
                N=int(doc["N"]),
                K=int(doc["K"]),
                C=int(doc["C"]),
                info_set=tuple(doc["info_set"]),
                crc_poly=int(doc["crc_poly_hex"], 16),
                crc_init=int(doc.get("crc_init_hex", "0x0"), 16),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidParametersError):
                raise
            raise InvalidParametersError(f"malformed CodeSpec document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "CodeSpec":
        return cls.from_dict(json.loads(text))


def _int_to_bits(value: int, width: int) -> list[int]:
    return [(value >> (width - 1 - k)) & 1 for k in range(width)]


def crc_remainder(bits, poly: int, width: int, init: int = 0) -> int:
    """Bitwise MSB-first CRC of a bit sequence (no reflection, no final XOR)."""
    if width == 0:
        return 0
    mask = (1 << width) - 1
    reg = init & mask
    for b in bits:
        top = ((reg >> (width - 1)) & 1) ^ (int(b) & 1)
        reg = (reg << 1) & mask
        if top:
            reg ^= poly
    return reg


def beta_expansion_weights(N: int) -> np.ndarray:
    """Polarization weight of each index, ``sum_j b_j * 2**(j/4)``."""
    n = N.bit_length() - 1
    idx = np.arange(N)
    weights = np.zeros(N)
    for j in range(n):
        weights += ((idx >> j) & 1) * BETA ** j
    return weights


def reliability_order(N: int) -> np.ndarray:
    """Indices of ``0..N-1`` sorted from least to most reliable."""
    if N <= 1024:
        seq = np.asarray(RELIABILITY_1024)
        return seq[seq < N]
    return np.argsort(beta_expansion_weights(N), kind="stable")


def build_code_spec(N: int, K: int, C: int, crc_poly: int | None = None, crc_init: int | None = None) -> CodeSpec:
    """Select the ``K + C`` most reliable channels of a length-``N`` polar code.

    Lengths up to 1024 use the 5G NR reliability sequence; longer codes fall
    back to the beta-expansion ordering.
    """
    if N < 2 or N & (N - 1):
        raise InvalidParametersError(f"N={N} must be a power of two >= 2")
    if K < 1 or C < 0 or K + C > N:
        raise InvalidParametersError(f"need 1 <= K and K + C <= N, got K={K}, C={C}, N={N}")
    if crc_poly is None:
        if C and C not in CRC_PRESETS:
            raise InvalidParametersError(f"no default CRC polynomial of width {C}")
        crc_poly, default_init = CRC_PRESETS.get(C, (0, 0))
        crc_init = default_init if crc_init is None else crc_init
    order = reliability_order(N)
    info = np.sort(order[N - (K + C):])
    return CodeSpec(
        n=N.bit_length() - 1,
        N=N,
        K=K,
        C=C,
        info_set=tuple(int(i) for i in info),
        crc_poly=crc_poly,
        crc_init=0 if crc_init is None else crc_init,
    )


def _as_bits(bits, length: int, what: str) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1 or arr.shape[0] != length:
        raise InvalidParametersError(f"{what} must have length {length}, got shape {arr.shape}")
    return arr


def compute_crc(message, spec: CodeSpec) -> np.ndarray:
    """The ``C`` CRC bits of a ``K``-bit message."""
    m = _as_bits(message, spec.K, "message")
    if spec.C == 0:
        return np.zeros(0, dtype=np.uint8)
    const, rows = spec._crc_affine
    return ((const + m.astype(np.int64) @ rows) & 1).astype(np.uint8)


def attach_crc(message, spec: CodeSpec) -> np.ndarray:
    m = _as_bits(message, spec.K, "message")
    return np.concatenate([m, compute_crc(m, spec)])


def check_crc(payload, spec: CodeSpec) -> bool:
    p = _as_bits(payload, spec.K + spec.C, "payload")
    return bool(np.array_equal(compute_crc(p[: spec.K], spec), p[spec.K:]))


def insert_info(payload, spec: CodeSpec) -> np.ndarray:
    """Scatter ``K + C`` payload bits onto the information positions of ``u``."""
    p = _as_bits(payload, spec.K + spec.C, "payload")
    u = np.zeros(spec.N, dtype=np.uint8)
    u[spec.info_array] = p
    return u


def extract_info(u, spec: CodeSpec) -> np.ndarray:
    return _as_bits(u, spec.N, "u")[spec.info_array].copy()


def encode(u) -> np.ndarray:
    """``x = u G_N`` over GF(2) via the butterfly recursion."""
    arr = np.asarray(u, dtype=np.uint8)
    N = arr.shape[0] if arr.ndim == 1 else 0
    if N < 1 or N & (N - 1):
        raise InvalidParametersError(f"encode needs a 1-D power-of-two length, got shape {arr.shape}")
    if np.any(arr > 1):
        raise InvalidParametersError("u must be a bit vector")
    return _backend.impl.polar_transform(arr)
