"""NumPy fallback for the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def ts_advance(z, owner, base, v, incr, gamma, tau, g_out, changed_out):
    for b in range(v.shape[0]):
        cand = v[b] / gamma
        upd = cand > z
        ch = bool(upd.any())
        if ch:
            z[upd] = cand[upd]
            owner[upd] = base + b
        gamma = gamma + incr[b]
        m = z.min()
        g_out[b] = gamma * m
        changed_out[b] = ch
        if tau / gamma < m:
            return b + 1, gamma, True
    return v.shape[0], gamma, False


def ef_advance(z, v, incr, gamma, pos):
    head = z[:pos]
    for b in range(v.shape[0]):
        if 1.0 / gamma < z[pos]:
            return b, b, gamma, 2
        if np.all(v[b, :pos] / gamma < head):
            np.maximum(z[pos:], v[b, pos:] / gamma, out=z[pos:])
            return b + 1, b, gamma, 1
        gamma = gamma + incr[b]
    return v.shape[0], v.shape[0], gamma, 0
