"""Rate-1/3 turbo code with max-log-MAP iterative decoding.

Two identical 8-state recursive systematic convolutional encoders
(feedback 1 + D^2 + D^3, feed-forward 1 + D + D^3) are concatenated in
parallel through a QPP interleaver.  Each encoder is terminated with three
tail steps, giving a mother codeword of ``3*K + 12`` bits laid out as::

    [systematic (K) | parity 1 (K) | parity 2 (K) | tail 1 (6) | tail 2 (6)]

Tail blocks are ``x0 z0 x1 z1 x2 z2`` (systematic / parity per tail step).

LLR sign convention: positive means bit 0.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .qpp import QPP_PARAMS

__all__ = [
    "TurboCode",
    "LLR_CLIP",
    "qpp_permutation",
]

LLR_CLIP = 50.0
N_ITER = 8
_NEG = -1e30


def qpp_permutation(K: int) -> np.ndarray:
    """Interleaver ``pi`` such that the interleaved sequence is ``c[pi]``."""
    try:
        f1, f2 = QPP_PARAMS[K]
    except KeyError:
        raise ValueError(f"no QPP interleaver for block length {K}") from None
    i = np.arange(K, dtype=np.int64)
    return (f1 * i + f2 * i * i) % K


def _trellis():
    # state = (s1 << 2) | (s2 << 1) | s3, s1 being the most recent feedback bit a
    nxt = np.empty((8, 2), np.int64)
    sysb = np.empty((8, 2), np.int64)
    par = np.empty((8, 2), np.int64)
    for st in range(8):
        s1, s2, s3 = (st >> 2) & 1, (st >> 1) & 1, st & 1
        for a in range(2):
            nxt[st, a] = (a << 2) | (s1 << 1) | s2
            sysb[st, a] = a ^ s2 ^ s3
            par[st, a] = a ^ s1 ^ s3
    return nxt, sysb, par


_NEXT, _SYS, _PAR = _trellis()


@njit(cache=True)
def _rsc_encode(u, nxt, sysb, par, out_par, out_tail):
    st = 0
    for t in range(u.shape[0]):
        # input u forces feedback bit a = u ^ s2 ^ s3
        a = u[t] ^ ((st >> 1) & 1) ^ (st & 1)
        out_par[t] = par[st, a]
        st = nxt[st, a]
    for t in range(3):
        out_tail[2 * t] = sysb[st, 0]
        out_tail[2 * t + 1] = par[st, 0]
        st = nxt[st, 0]


@njit(cache=True)
def _encode_batch(bits, perm, nxt, sysb, par):
    B, K = bits.shape
    out = np.zeros((B, 3 * K + 12), np.uint8)
    u2 = np.empty(K, np.uint8)
    for b in range(B):
        u = bits[b]
        out[b, :K] = u
        _rsc_encode(u, nxt, sysb, par, out[b, K:2 * K], out[b, 3 * K:3 * K + 6])
        for i in range(K):
            u2[i] = u[perm[i]]
        _rsc_encode(u2, nxt, sysb, par, out[b, 2 * K:3 * K], out[b, 3 * K + 6:3 * K + 12])
    return out


def _predecessors():
    # the two (previous state, branch metric index) pairs entering each state
    prev = np.zeros((8, 2), np.int64)
    gidx = np.zeros((8, 2), np.int64)
    fill = np.zeros(8, np.int64)
    for st in range(8):
        for a in range(2):
            ns = _NEXT[st, a]
            prev[ns, fill[ns]] = st
            gidx[ns, fill[ns]] = 2 * _SYS[st, a] + _PAR[st, a]
            fill[ns] += 1
    return prev, gidx


# module-level tables are frozen into the compiled kernels as constants
_PREV, _PREV_G = _predecessors()
_G = 2 * _SYS + _PAR


@njit(cache=True)
def _siso(ls, lp, la, alpha, gam, out):
    """Max-log-MAP over K + 3 trellis steps; writes a-posteriori LLRs of the K info bits."""
    T = ls.shape[0]
    K = la.shape[0]
    # gam[t, 2*u + p]: branch metric of systematic bit u and parity bit p
    for t in range(T):
        lu = 0.5 * (ls[t] + (la[t] if t < K else 0.0))
        hp = 0.5 * lp[t]
        gam[t, 0] = lu + hp
        gam[t, 1] = lu - hp
        gam[t, 2] = -lu + hp
        gam[t, 3] = -lu - hp
    for s in range(8):
        alpha[0, s] = _NEG
    alpha[0, 0] = 0.0
    for t in range(T):
        g = gam[t]
        a = alpha[t]
        na = alpha[t + 1]
        for ns in range(8):
            v0 = a[_PREV[ns, 0]] + g[_PREV_G[ns, 0]]
            v1 = a[_PREV[ns, 1]] + g[_PREV_G[ns, 1]]
            na[ns] = v0 if v0 > v1 else v1
        norm = na[0]
        for s in range(8):
            na[s] -= norm
    beta = np.full(8, _NEG)
    beta[0] = 0.0
    nb = np.empty(8)
    for t in range(T - 1, -1, -1):
        g = gam[t]
        m0 = _NEG
        m1 = _NEG
        for s in range(8):
            b0 = g[_G[s, 0]] + beta[_NEXT[s, 0]]
            b1 = g[_G[s, 1]] + beta[_NEXT[s, 1]]
            nb[s] = b0 if b0 > b1 else b1
            v0 = alpha[t, s] + b0
            v1 = alpha[t, s] + b1
            if _SYS[s, 0] == 1:  # input a=0 emits systematic 1
                v0, v1 = v1, v0
            if v0 > m0:
                m0 = v0
            if v1 > m1:
                m1 = v1
        if t < K:
            out[t] = m0 - m1
        norm = nb[0]
        for s in range(8):
            beta[s] = nb[s] - norm


@njit(cache=True)
def _decode_batch(llr, perm, n_iter):
    B, L = llr.shape
    K = (L - 12) // 3
    bits = np.zeros((B, K), np.uint8)
    iters = np.zeros(B, np.int64)
    alpha = np.empty((K + 4, 8))
    gam = np.empty((K + 3, 4))
    ls1 = np.empty(K + 3)
    lp1 = np.empty(K + 3)
    ls2 = np.empty(K + 3)
    lp2 = np.empty(K + 3)
    la1 = np.empty(K)
    la2 = np.empty(K)
    app1 = np.empty(K)
    app2 = np.empty(K)
    le1 = np.empty(K)
    prev = np.empty(K, np.uint8)
    cur = np.empty(K, np.uint8)
    for b in range(B):
        y = llr[b]
        for i in range(K):
            ls1[i] = y[i]
            lp1[i] = y[K + i]
            ls2[i] = y[perm[i]]
            lp2[i] = y[2 * K + i]
            la1[i] = 0.0
            prev[i] = 2
        for t in range(3):
            ls1[K + t] = y[3 * K + 2 * t]
            lp1[K + t] = y[3 * K + 2 * t + 1]
            ls2[K + t] = y[3 * K + 6 + 2 * t]
            lp2[K + t] = y[3 * K + 6 + 2 * t + 1]
        for it in range(n_iter):
            _siso(ls1, lp1, la1, alpha, gam, app1)
            for i in range(K):
                le1[i] = app1[i] - la1[i] - ls1[i]
            for i in range(K):
                la2[i] = le1[perm[i]]
            _siso(ls2, lp2, la2, alpha, gam, app2)
            same = True
            for i in range(K):
                la1[perm[i]] = app2[i] - la2[i] - ls2[i]
                c = 1 if app2[i] < 0.0 else 0
                cur[perm[i]] = c
            for i in range(K):
                if cur[i] != prev[i]:
                    same = False
                prev[i] = cur[i]
            iters[b] = it + 1
            if same:
                break
        for i in range(K):
            bits[b, i] = cur[i]
    return bits, iters


class TurboCode:
    """Turbo codec for one information block length ``K``.

    >>> code = TurboCode(40)
    >>> code.encode(np.zeros((1, 40), np.uint8)).shape
    (1, 132)
    """

    def __init__(self, K: int, n_iter: int = N_ITER):
        self.K = K
        self.n_iter = n_iter
        self.perm = qpp_permutation(K)

    @property
    def mother_length(self) -> int:
        return 3 * self.K + 12

    def encode(self, bits: np.ndarray) -> np.ndarray:
        """Encode a (batch, K) array of bits into (batch, 3K + 12) mother codewords."""
        bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
        if bits.shape[-1] != self.K:
            raise ValueError(f"expected {self.K} information bits, got {bits.shape[-1]}")
        return _encode_batch(np.ascontiguousarray(bits), self.perm, _NEXT, _SYS, _PAR)

    def decode(self, llr: np.ndarray, return_iterations: bool = False):
        """Max-log-MAP turbo decoding of (batch, 3K + 12) mother-code LLRs.

        Iterations stop early once the hard decisions repeat across two
        consecutive iterations, with at most ``n_iter`` iterations.
        """
        llr = np.atleast_2d(np.asarray(llr, dtype=np.float64))
        if llr.shape[-1] != self.mother_length:
            raise ValueError(
                f"expected {self.mother_length} LLRs, got {llr.shape[-1]}"
            )
        llr = np.clip(llr, -LLR_CLIP, LLR_CLIP)
        bits, iters = _decode_batch(
            np.ascontiguousarray(llr), self.perm, self.n_iter
        )
        if return_iterations:
            return bits, iters
        return bits
