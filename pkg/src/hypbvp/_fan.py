"""Compiled loops for the fan sums of D and F (numba when available)."""

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

AVAILABLE = njit is not None


def _coupled_sum(starts, ends, node, weight, pos, dval, coef, src, out):
    # out[a, r] = sum_p weight[p] dval[p, r] sum_k coef[k, p, r] src_k(node[p], pos[p, r])
    K = coef.shape[0]
    R = pos.shape[1]
    last = src.shape[2] - 1
    for a in range(starts.shape[0]):
        for r in range(R):
            out[a, r] = 0.0
        for p in range(starts[a], ends[a]):
            w = weight[p]
            if w == 0.0:
                continue
            c = node[p]
            for r in range(R):
                q = min(max(pos[p, r], 0.0), float(last))
                i0 = min(int(q), last - 1)
                fr = q - i0
                s = 0.0
                for k in range(K):
                    lo = src[k, c, i0]
                    s += coef[k, p, r] * (lo + fr * (src[k, c, i0 + 1] - lo))
                out[a, r] += w * dval[p, r] * s


def _plain_sum(starts, ends, node, weight, pos, dval, src, out):
    R = pos.shape[1]
    last = src.shape[1] - 1
    for a in range(starts.shape[0]):
        for r in range(R):
            out[a, r] = 0.0
        for p in range(starts[a], ends[a]):
            w = weight[p]
            if w == 0.0:
                continue
            c = node[p]
            for r in range(R):
                q = min(max(pos[p, r], 0.0), float(last))
                i0 = min(int(q), last - 1)
                fr = q - i0
                lo = src[c, i0]
                out[a, r] += w * dval[p, r] * (lo + fr * (src[c, i0 + 1] - lo))


if AVAILABLE:
    coupled_sum = njit(cache=True)(_coupled_sum)
    plain_sum = njit(cache=True)(_plain_sum)
else:
    coupled_sum = plain_sum = None


def block_ends(starts, total):
    return np.append(starts[1:], total).astype(np.intp)
