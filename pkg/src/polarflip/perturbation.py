"""Gaussian LLR perturbation and the SCP / DSCP decoders."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from polarflip.errors import InvalidParametersError
from polarflip.flip_engine import DecodeOutcome, _crc_passes, make_outcome
from polarflip.polar_code import CodeSpec
from polarflip.sc_kernel import ScDecoder, decoder_for

DEFAULT_SIGMA2 = 0.95


@dataclass(frozen=True)
class PerturbConfig:
    """Perturbation variance and the DSCP escalation schedule.

    The DSCP defaults are placeholders; tune them per code.
    """

    sigma2: float = DEFAULT_SIGMA2
    dscp_initial_sigma2: float = 0.5
    dscp_step: float = 0.25

    def __post_init__(self):
        if self.sigma2 < 0 or self.dscp_initial_sigma2 < 0:
            raise InvalidParametersError("perturbation variances must be >= 0")
        if self.dscp_step < 0:
            raise InvalidParametersError("dscp_step must be >= 0")


class RngStream:
    """A reproducible Gaussian source addressed by ``(seed, stream)``.

    Backed by PCG64 seeded through ``SeedSequence(seed, spawn_key=stream)``,
    so distinct stream tuples give statistically independent sequences.
    """

    def __init__(self, seed: int, stream: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.stream = tuple(int(s) for s in stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    @property
    def bit_generator(self):
        return self.generator.bit_generator

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream})"


def perturb(L, sigma2: float, rng) -> np.ndarray:
    """``L + N(0, sigma2)``, element-wise, as a new array."""
    if sigma2 < 0:
        raise InvalidParametersError("sigma2 must be >= 0")
    L = np.asarray(L, dtype=np.float64)
    return L + math.sqrt(sigma2) * rng.standard_normal(L.shape[0])


def scp_decode(L, spec: CodeSpec, Pmax: int, cfg: PerturbConfig, rng, decoder: ScDecoder | None = None) -> DecodeOutcome:
    """SC, then up to ``Pmax`` SC trials on freshly perturbed copies of ``L``."""
    if Pmax < 0:
        raise InvalidParametersError("Pmax must be >= 0")
    dec = decoder or decoder_for(spec)
    dec.run(L)
    if _crc_passes(dec, spec):
        return make_outcome(dec, True, 0, 0, True)
    success, used = perturb_phase(dec, L, spec, Pmax, cfg.sigma2, rng)
    return make_outcome(dec, success, 0, used, False)


def perturb_phase(dec: ScDecoder, L, spec: CodeSpec, Pmax: int, sigma2: float, rng) -> tuple[bool, int]:
    for p in range(1, Pmax + 1):
        dec.run(perturb(L, sigma2, rng))
        if _crc_passes(dec, spec):
            return True, p
    return False, Pmax


def dscp_decode(L, spec: CodeSpec, Pmax: int, cfg: PerturbConfig, rng, decoder: ScDecoder | None = None) -> DecodeOutcome:
    """SCP whose variance grows by ``dscp_step`` whenever an estimate repeats.

    Repeats are detected on the number of ones of each estimate only (n bits
    per trial instead of N), so distinct estimates with equal weight also
    trigger an increase.
    """
    if Pmax < 0:
        raise InvalidParametersError("Pmax must be >= 0")
    dec = decoder or decoder_for(spec)
    dec.run(L)
    if _crc_passes(dec, spec):
        return make_outcome(dec, True, 0, 0, True)
    var = cfg.dscp_initial_sigma2
    ones = [int(dec.u_hat.sum())]
    trace = []
    for p in range(1, Pmax + 1):
        trace.append(var)
        dec.run(perturb(L, var, rng))
        if _crc_passes(dec, spec):
            return make_outcome(dec, True, 0, p, False, sigma2_trace=tuple(trace))
        count = int(dec.u_hat.sum())
        if count in ones:
            var += cfg.dscp_step
        ones.append(count)
    return make_outcome(dec, False, 0, Pmax, False, sigma2_trace=tuple(trace))
