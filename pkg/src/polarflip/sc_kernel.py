"""Successive-cancellation decoding with optional single-bit flip injection."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from polarflip import _backend
from polarflip.errors import InvalidParametersError
from polarflip.polar_code import CodeSpec


def f_func(a: float, b: float) -> float:
    """Min-sum check-node update."""
    return float(np.sign(a) * np.sign(b) * min(abs(a), abs(b)))


def boxplus(a: float, b: float) -> float:
    """Exact check-node update, ``2 atanh(tanh(a/2) tanh(b/2))`` in a stable form."""
    return f_func(a, b) + math.log1p(math.exp(-abs(a + b))) - math.log1p(math.exp(-abs(a - b)))


def g_func(a: float, b: float, u_partial: int) -> float:
    """Variable-node update given the partial sum of the left subtree."""
    return b + (1 - 2 * u_partial) * a


def hard_decision(llr: float) -> int:
    return 0 if llr >= 0 else 1


@dataclass(frozen=True)
class ScResult:
    u_hat: np.ndarray
    decision_llrs: np.ndarray


class ScDecoder:
    """A reusable SC decoder instance bound to one code.

    The instance owns mutable scratch memory; use one per thread. After
    :meth:`run`, :attr:`u_hat` and :attr:`decision_llrs` are views into that
    memory and are overwritten by the next call.
    """

    def __init__(self, spec: CodeSpec, exact: bool = False):
        self.spec = spec
        self.exact = exact
        self._kernel = _backend.impl.ScKernel(spec.frozen_mask, exact)
        self._info = set(spec.info_set)

    @property
    def u_hat(self) -> np.ndarray:
        return self._kernel.u_hat

    @property
    def decision_llrs(self) -> np.ndarray:
        return self._kernel.dec_llrs

    @property
    def f_evals(self) -> int:
        return self._kernel.f_evals

    @property
    def g_evals(self) -> int:
        return self._kernel.g_evals

    @property
    def leaf_visits(self) -> int:
        return self._kernel.leaf_visits

    def reset_counters(self) -> None:
        self._kernel.reset_counters()

    def run(self, llr, flip_position: int | None = None) -> None:
        llr = np.asarray(llr, dtype=np.float64)
        if llr.shape != (self.spec.N,):
            raise InvalidParametersError(f"expected {self.spec.N} LLRs, got shape {llr.shape}")
        if flip_position is None:
            flip = -1
        else:
            flip = int(flip_position)
            if flip not in self._info:
                raise InvalidParametersError(f"flip position {flip} is not an information index")
        self._kernel.decode(llr, flip)

    def decode(self, llr, flip_position: int | None = None) -> ScResult:
        self.run(llr, flip_position)
        return ScResult(self.u_hat.copy(), self.decision_llrs.copy())

    def payload(self) -> np.ndarray:
        return self.u_hat[self.spec.info_array]


_local = threading.local()


def decoder_for(spec: CodeSpec, exact: bool = False) -> ScDecoder:
    """Per-thread cached decoder for ``spec``."""
    cache = getattr(_local, "decoders", None)
    if cache is None:
        cache = _local.decoders = {}
    key = (spec, exact)
    dec = cache.get(key)
    if dec is None:
        if len(cache) > 32:
            cache.clear()
        dec = cache[key] = ScDecoder(spec, exact)
    return dec


def sc_decode(L, spec: CodeSpec, flip_position: int | None = None, exact: bool = False) -> ScResult:
    """``SC(L)`` or, with ``flip_position``, ``SC(L, i)`` with the decision at ``i`` inverted."""
    return decoder_for(spec, exact).decode(L, flip_position)
