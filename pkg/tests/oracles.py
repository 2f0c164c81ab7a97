"""Independent reference implementations used as test oracles."""

import numpy as np

from polarflip.sc_kernel import boxplus, f_func, g_func


def reference_sc(L, frozen, flip=-1, exact=False):
    """Textbook recursive SC on u -> u G_N; returns (u_hat, decision LLRs by index)."""
    u = np.zeros(len(L), dtype=np.uint8)
    lam = np.zeros(len(L))

    def node(a, first):
        if len(a) == 1:
            i = first
            lam[i] = a[0]
            u[i] = 0 if frozen[i] else (0 if a[0] >= 0 else 1)
            if i == flip:
                u[i] ^= 1
            return np.array([u[i]])
        h = len(a) // 2
        left, right = a[:h], a[h:]
        check = boxplus if exact else f_func
        bl = node(np.array([check(x, y) for x, y in zip(left, right)]), first)
        br = node(np.array([g_func(x, y, int(b)) for x, y, b in zip(left, right, bl)]), first + h)
        return np.concatenate([bl ^ br, br])

    node(np.asarray(L, dtype=np.float64), 0)
    return u, lam
