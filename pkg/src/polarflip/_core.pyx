# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled SC kernel and fused Monte-Carlo frame loop.

Mirrors ``_pycore`` (kernel) and the Python decoders (frame loop) operation
for operation; the test-suite checks that both produce identical outcomes.
"""

import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport copysign, exp, fabs, log1p, sqrt
from libc.stdint cimport int32_t, int64_t, uint8_t, uint64_t
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy, memset
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal

cnp.import_array()

# decoder kinds, kept in sync with polarflip.composite_decoders.KIND_CODES
cdef enum:
    K_SC = 0
    K_SCF = 1
    K_DSCF = 2
    K_SCP = 3
    K_DSCP = 4
    K_DSCFP = 5
    K_PDSCF = 6

cdef double J_THRESHOLD = 5.0
cdef double J_PENALTY = 1.5


cdef inline double _minsum(double a, double b) noexcept nogil:
    # equals sign(a)*sign(b)*min(|a|,|b|) up to the sign of a zero result,
    # which no decision or metric can observe
    cdef double fa = fabs(a), fb = fabs(b)
    return copysign(fa if fa < fb else fb, a * b)


cdef inline double _boxplus(double a, double b) noexcept nogil:
    return _minsum(a, b) + log1p(exp(-fabs(a + b))) - log1p(exp(-fabs(a - b)))


cdef struct Sc:
    int N
    int n_info
    bint exact
    long long f_evals
    long long g_evals
    long long leaf_visits
    uint8_t* uh
    double* dl
    double* alpha
    uint8_t* beta_l
    uint8_t* beta_r
    uint8_t* xhat
    uint8_t* frozen
    int* rank
    int flip


cdef void _sc_run(Sc* sc, const double* llr, int flip) noexcept nogil:
    memcpy(sc.alpha + sc.N, llr, sc.N * sizeof(double))
    sc.flip = flip
    _sc_node(sc, sc.N, 0, sc.xhat)


cdef void _sc_node(Sc* sc, int s, int leaf0, uint8_t* out) noexcept nogil:
    cdef int h, j
    cdef double lam
    cdef uint8_t bit
    cdef double* a
    cdef double* c
    cdef uint8_t* bl
    cdef uint8_t* br
    if s == 1:
        sc.leaf_visits += 1
        lam = sc.alpha[1]
        if sc.frozen[leaf0]:
            bit = 0
        else:
            sc.dl[sc.rank[leaf0]] = lam
            bit = 0 if lam >= 0 else 1
            if leaf0 == sc.flip:
                bit ^= 1
        sc.uh[leaf0] = bit
        out[0] = bit
        return
    h = s >> 1
    a = sc.alpha + s
    c = sc.alpha + h
    bl = sc.beta_l + h
    br = sc.beta_r + h
    if sc.exact:
        for j in range(h):
            c[j] = _boxplus(a[j], a[j + h])
    else:
        for j in range(h):
            c[j] = _minsum(a[j], a[j + h])
    sc.f_evals += h
    _sc_node(sc, h, leaf0, bl)
    for j in range(h):
        if bl[j]:
            c[j] = a[j + h] - a[j]
        else:
            c[j] = a[j + h] + a[j]
    sc.g_evals += h
    _sc_node(sc, h, leaf0 + h, br)
    for j in range(h):
        out[j] = bl[j] ^ br[j]
        out[j + h] = br[j]


cdef class ScKernel:
    """SC decoder over a fixed frozen pattern (compiled)."""

    cdef Sc sc
    cdef readonly int N, n, n_info
    cdef readonly bint exact
    cdef readonly object u_hat, dec_llrs

    def __cinit__(self, frozen_mask, exact=False):
        cdef cnp.ndarray[cnp.uint8_t, ndim=1] fm = np.ascontiguousarray(frozen_mask, dtype=np.uint8)
        cdef int N = fm.shape[0], i, r = 0
        memset(&self.sc, 0, sizeof(Sc))
        if N < 1 or N & (N - 1):
            raise ValueError("frozen mask length must be a power of two")
        self.N = N
        self.n = 0
        while (1 << self.n) < N:
            self.n += 1
        self.exact = exact
        self.sc.N = N
        self.sc.exact = exact
        self.sc.alpha = <double*> malloc(2 * N * sizeof(double))
        self.sc.beta_l = <uint8_t*> malloc(2 * N)
        self.sc.beta_r = <uint8_t*> malloc(2 * N)
        self.sc.xhat = <uint8_t*> malloc(N)
        self.sc.frozen = <uint8_t*> malloc(N)
        self.sc.rank = <int*> malloc(N * sizeof(int))
        if not (self.sc.alpha and self.sc.beta_l and self.sc.beta_r and self.sc.xhat
                and self.sc.frozen and self.sc.rank):
            raise MemoryError()
        for i in range(N):
            self.sc.frozen[i] = 1 if fm[i] else 0
            if fm[i]:
                self.sc.rank[i] = -1
            else:
                self.sc.rank[i] = r
                r += 1
        self.n_info = r
        self.sc.n_info = r
        self.u_hat = np.zeros(N, dtype=np.uint8)
        self.dec_llrs = np.zeros(r, dtype=np.float64)
        self.sc.uh = <uint8_t*> cnp.PyArray_DATA(self.u_hat)
        self.sc.dl = <double*> cnp.PyArray_DATA(self.dec_llrs)
        self.sc.flip = -1

    def __dealloc__(self):
        free(self.sc.alpha)
        free(self.sc.beta_l)
        free(self.sc.beta_r)
        free(self.sc.xhat)
        free(self.sc.frozen)
        free(self.sc.rank)

    @property
    def f_evals(self):
        return self.sc.f_evals

    @property
    def g_evals(self):
        return self.sc.g_evals

    @property
    def leaf_visits(self):
        return self.sc.leaf_visits

    def reset_counters(self):
        self.sc.f_evals = 0
        self.sc.g_evals = 0
        self.sc.leaf_visits = 0

    def decode(self, llr, int flip=-1):
        cdef cnp.ndarray[cnp.float64_t, ndim=1] arr = np.ascontiguousarray(llr, dtype=np.float64)
        if arr.shape[0] != self.N:
            raise ValueError(f"expected {self.N} LLRs, got {arr.shape[0]}")
        _sc_run(&self.sc, <double*> cnp.PyArray_DATA(arr), flip)


def polar_transform(u):
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] x = np.array(u, dtype=np.uint8, copy=True)
    _transform(<uint8_t*> cnp.PyArray_DATA(x), x.shape[0])
    return x


cdef void _transform(uint8_t* x, int N) noexcept nogil:
    cdef int h = 1, b, j
    while h < N:
        b = 0
        while b < N:
            for j in range(b, b + h):
                x[j] ^= x[j + h]
            b += 2 * h
        h <<= 1


cdef bitgen_t* _bitgen(object bit_generator) except NULL:
    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid bit generator")
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef struct Frame:
    # code
    int N
    int K
    int C
    int P  # K + C
    const int64_t* info
    uint64_t poly
    uint64_t init
    # decoder
    int kind
    int fmax
    int pmax
    double sigma2
    double dscp_init
    double dscp_step
    # workspace
    uint8_t* payload
    uint8_t* est
    uint8_t* x
    double* llr
    double* llr_p
    double* cand_metric
    int* cand_pos
    int* ones
    # per-frame results
    int trials
    int init_fail


cdef int _crc_ok(Frame* fr, const uint8_t* p) noexcept nogil:
    cdef int C = fr.C, j
    cdef uint64_t mask, reg, top
    if C == 0:
        return 1
    mask = ((<uint64_t> 1) << C) - 1
    reg = fr.init & mask
    for j in range(fr.K):
        top = ((reg >> (C - 1)) & 1) ^ p[j]
        reg = (reg << 1) & mask
        if top:
            reg ^= fr.poly
    for j in range(C):
        if ((reg >> (C - 1 - j)) & 1) != p[fr.K + j]:
            return 0
    return 1


cdef int _trial(Frame* fr, Sc* k, const double* llr, int flip) noexcept nogil:
    cdef int j
    _sc_run(k, llr, flip)
    fr.trials += 1
    for j in range(fr.P):
        fr.est[j] = k.uh[fr.info[j]]
    return _crc_ok(fr, fr.est)


cdef int _candidates(Frame* fr, Sc* k, bint dynamic) noexcept nogil:
    """Fill cand_pos with the info ranks of the fmax smallest flip metrics."""
    cdef int F = fr.fmax, cnt = 0, j, pos
    cdef double cum = 0.0, a, metric
    cdef double* cm = fr.cand_metric
    cdef int* cp = fr.cand_pos
    for j in range(fr.P):
        a = fabs(k.dl[j])
        if dynamic:
            if a <= J_THRESHOLD:
                cum += J_PENALTY
            metric = a + cum
        else:
            metric = a
        if cnt < F:
            pos = cnt
            cnt += 1
        elif metric < cm[F - 1]:
            pos = F - 1
        else:
            continue
        while pos > 0 and cm[pos - 1] > metric:
            cm[pos] = cm[pos - 1]
            cp[pos] = cp[pos - 1]
            pos -= 1
        cm[pos] = metric
        cp[pos] = j
    return cnt


cdef int _dscf(Frame* fr, Sc* k, const double* llr, bint dynamic, bint first) noexcept nogil:
    cdef int nc, t
    if _trial(fr, k, llr, -1):
        return 1
    if first:
        fr.init_fail = 1
    if fr.fmax == 0:
        return 0
    nc = _candidates(fr, k, dynamic)
    for t in range(nc):
        if _trial(fr, k, llr, <int> fr.info[fr.cand_pos[t]]):
            return 1
    return 0


cdef void _perturb(Frame* fr, bitgen_t* pg, double var) noexcept nogil:
    cdef double scale = sqrt(var)
    cdef int i
    for i in range(fr.N):
        fr.llr_p[i] = fr.llr[i] + scale * random_standard_normal(pg)


cdef int _popcount(Sc* k) noexcept nogil:
    cdef int i, s = 0
    for i in range(k.N):
        s += k.uh[i]
    return s


cdef int _decode(Frame* fr, Sc* k, bitgen_t* pg) noexcept nogil:
    cdef int kind = fr.kind, p, q, cnt, n_ones, seen
    cdef double var
    fr.trials = 0
    fr.init_fail = 0
    if kind == K_SC:
        if _trial(fr, k, fr.llr, -1):
            return 1
        fr.init_fail = 1
        return 0
    if kind == K_SCF or kind == K_DSCF:
        return _dscf(fr, k, fr.llr, kind == K_DSCF, 1)
    if kind == K_PDSCF:
        if _dscf(fr, k, fr.llr, 1, 1):
            return 1
        for p in range(fr.pmax):
            _perturb(fr, pg, fr.sigma2)
            if _dscf(fr, k, fr.llr_p, 1, 0):
                return 1
        return 0
    if kind == K_DSCFP:
        if _dscf(fr, k, fr.llr, 1, 1):
            return 1
    else:
        if _trial(fr, k, fr.llr, -1):
            return 1
        fr.init_fail = 1
    if kind == K_DSCP:
        var = fr.dscp_init
        fr.ones[0] = _popcount(k)
        n_ones = 1
        for p in range(fr.pmax):
            _perturb(fr, pg, var)
            if _trial(fr, k, fr.llr_p, -1):
                return 1
            cnt = _popcount(k)
            seen = 0
            for q in range(n_ones):
                if fr.ones[q] == cnt:
                    seen = 1
                    break
            if seen:
                var += fr.dscp_step
            fr.ones[n_ones] = cnt
            n_ones += 1
        return 0
    # SCP and the perturbation phase of DSCFP
    for p in range(fr.pmax):
        _perturb(fr, pg, fr.sigma2)
        if _trial(fr, k, fr.llr_p, -1):
            return 1
    return 0


def run_frames(ScKernel kernel, info_set, int K, int C, crc_poly, crc_init,
               int kind, int fmax, int pmax, double sigma2, double dscp_init, double dscp_step,
               double noise_sigma, double noise_var, chan_bitgen, pert_bitgen, int n_frames,
               int max_errors=0):
    """Simulate up to ``n_frames`` frames end to end.

    Per frame, ``chan_bitgen`` supplies ceil(K/64) raw words for the message
    and N normals for the channel; ``pert_bitgen`` supplies perturbation
    normals. Stops after the frame carrying the ``max_errors``-th block error
    when ``max_errors > 0``. Returns per-frame (block_error, undetected,
    trials, init_fail).
    """
    cdef cnp.ndarray[cnp.int64_t, ndim=1] info = np.ascontiguousarray(info_set, dtype=np.int64)
    cdef int N = kernel.N, P = K + C, W = (K + 63) // 64
    if info.shape[0] != P or kernel.n_info != P:
        raise ValueError("info set does not match the kernel")
    if C > 63:
        raise ValueError("CRC widths above 63 bits are not supported")
    cdef bitgen_t* cg = _bitgen(chan_bitgen)
    cdef bitgen_t* pg = _bitgen(pert_bitgen)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] err = np.zeros(n_frames, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] und = np.zeros(n_frames, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] trials = np.zeros(n_frames, dtype=np.int32)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] ifail = np.zeros(n_frames, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] payload = np.zeros(P, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] est = np.zeros(P, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] x = np.zeros(N, dtype=np.uint8)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] llr = np.zeros(N)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] llr_p = np.zeros(N)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cmet = np.zeros(max(fmax, 1))
    cdef cnp.ndarray[cnp.int32_t, ndim=1] cpos = np.zeros(max(fmax, 1), dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] ones = np.zeros(pmax + 1, dtype=np.int32)
    cdef Frame fr
    cdef int f, i, j, w, ok, mismatch, n_err = 0, done = 0
    cdef uint64_t word, reg, mask, top
    cdef double y

    fr.N = N
    fr.K = K
    fr.C = C
    fr.P = P
    fr.info = <const int64_t*> cnp.PyArray_DATA(info)
    fr.poly = <uint64_t> crc_poly
    fr.init = <uint64_t> crc_init
    fr.kind = kind
    fr.fmax = fmax
    fr.pmax = pmax
    fr.sigma2 = sigma2
    fr.dscp_init = dscp_init
    fr.dscp_step = dscp_step
    fr.payload = <uint8_t*> cnp.PyArray_DATA(payload)
    fr.est = <uint8_t*> cnp.PyArray_DATA(est)
    fr.x = <uint8_t*> cnp.PyArray_DATA(x)
    fr.llr = <double*> cnp.PyArray_DATA(llr)
    fr.llr_p = <double*> cnp.PyArray_DATA(llr_p)
    fr.cand_metric = <double*> cnp.PyArray_DATA(cmet)
    fr.cand_pos = <int*> cnp.PyArray_DATA(cpos)
    fr.ones = <int*> cnp.PyArray_DATA(ones)

    with chan_bitgen.lock, pert_bitgen.lock:
      with nogil:
        for f in range(n_frames):
            # message
            for w in range(W):
                word = cg.next_uint64(cg.state)
                for j in range(64):
                    i = w * 64 + j
                    if i >= K:
                        break
                    fr.payload[i] = (word >> j) & 1
            # CRC
            if C > 0:
                mask = ((<uint64_t> 1) << C) - 1
                reg = fr.init & mask
                for j in range(K):
                    top = ((reg >> (C - 1)) & 1) ^ fr.payload[j]
                    reg = (reg << 1) & mask
                    if top:
                        reg ^= fr.poly
                for j in range(C):
                    fr.payload[K + j] = (reg >> (C - 1 - j)) & 1
            # encode
            memset(fr.x, 0, N)
            for j in range(P):
                fr.x[fr.info[j]] = fr.payload[j]
            _transform(fr.x, N)
            # BPSK over AWGN
            for i in range(N):
                y = (1.0 - 2.0 * fr.x[i]) + noise_sigma * random_standard_normal(cg)
                fr.llr[i] = (2.0 * y) / noise_var
            ok = _decode(&fr, &kernel.sc, pg)
            mismatch = 0
            for j in range(P):
                if fr.est[j] != fr.payload[j]:
                    mismatch = 1
                    break
            err[f] = 1 if (not ok or mismatch) else 0
            und[f] = 1 if (ok and mismatch) else 0
            trials[f] = fr.trials
            ifail[f] = fr.init_fail
            done = f + 1
            if err[f]:
                n_err += 1
                if max_errors > 0 and n_err >= max_errors:
                    break
    return err[:done], und[:done], trials[:done], ifail[:done]
