"""Pure-Python (numpy) fallback for the compiled kernels in ``_core``.

Every routine here performs the same floating-point operations in the same
order as its compiled twin, so both backends return bit-identical results
in min-sum mode.
"""

import numpy as np


def _minsum(a, b):
    return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))


def _boxplus(a, b):
    return _minsum(a, b) + np.log1p(np.exp(-np.abs(a + b))) - np.log1p(np.exp(-np.abs(a - b)))


class ScKernel:
    """SC decoder over a fixed frozen pattern.

    ``decode`` fills ``u_hat`` and ``dec_llrs`` in place; the f/g/leaf
    counters accumulate across calls until ``reset_counters``.
    """

    def __init__(self, frozen_mask, exact=False):
        self.frozen = np.ascontiguousarray(frozen_mask, dtype=np.uint8).copy()
        self.N = self.frozen.shape[0]
        self.n = self.N.bit_length() - 1
        info = np.flatnonzero(self.frozen == 0)
        self.n_info = info.shape[0]
        self.rank = np.full(self.N, -1, dtype=np.int64)
        self.rank[info] = np.arange(self.n_info)
        self.u_hat = np.zeros(self.N, dtype=np.uint8)
        self.dec_llrs = np.zeros(self.n_info)
        self.exact = bool(exact)
        self._f = _boxplus if self.exact else _minsum
        self._flip = -1
        self.reset_counters()

    def reset_counters(self):
        self.f_evals = 0
        self.g_evals = 0
        self.leaf_visits = 0

    def decode(self, llr, flip=-1):
        llr = np.ascontiguousarray(llr, dtype=np.float64)
        if llr.shape != (self.N,):
            raise ValueError(f"expected {self.N} LLRs, got shape {llr.shape}")
        self._flip = int(flip)
        self._node(llr, 0)

    def _node(self, a, leaf0):
        s = a.shape[0]
        if s == 1:
            self.leaf_visits += 1
            lam = float(a[0])
            if self.frozen[leaf0]:
                bit = 0
            else:
                self.dec_llrs[self.rank[leaf0]] = lam
                bit = 0 if lam >= 0 else 1
                if leaf0 == self._flip:
                    bit ^= 1
            self.u_hat[leaf0] = bit
            return np.array([bit], dtype=np.uint8)
        h = s >> 1
        lo, hi = a[:h], a[h:]
        self.f_evals += h
        beta_l = self._node(self._f(lo, hi), leaf0)
        self.g_evals += h
        beta_r = self._node(np.where(beta_l == 1, hi - lo, hi + lo), leaf0 + h)
        return np.concatenate([beta_l ^ beta_r, beta_r])


def polar_transform(u):
    x = np.array(u, dtype=np.uint8, copy=True)
    N = x.shape[0]
    h = 1
    while h < N:
        blocks = x.reshape(-1, 2 * h)
        blocks[:, :h] ^= blocks[:, h:]
        h *= 2
    return x
