"""Compiled helpers shared by the simulation kernels.

The heap stores keys ``(a: float64, b: int64, c: int64)`` in three parallel
arrays and orders them lexicographically; callers use ``c`` as the payload.
"""
import math

import numpy as np
from numba import njit

from .distributions import (LAW_DOUBLE_EXP, LAW_EMPIRICAL, LAW_EXPONENTIAL, LAW_POINT,
                            LAW_POWER, LAW_STRETCH)

JIT = dict(cache=True, nogil=True)


@njit(**JIT)
def key_less(a1, b1, c1, a2, b2, c2):
    if a1 != a2:
        return a1 < a2
    if b1 != b2:
        return b1 < b2
    return c1 < c2


@njit(**JIT)
def heap_push(ka, kb, kc, size, a, b, c):
    i = size
    while i > 0:
        parent = (i - 1) >> 1
        if key_less(a, b, c, ka[parent], kb[parent], kc[parent]):
            ka[i] = ka[parent]
            kb[i] = kb[parent]
            kc[i] = kc[parent]
            i = parent
        else:
            break
    ka[i] = a
    kb[i] = b
    kc[i] = c
    return size + 1


@njit(**JIT)
def heap_pop(ka, kb, kc, size):
    """Remove the minimum; returns ``(a, b, c, new_size)``."""
    a0, b0, c0 = ka[0], kb[0], kc[0]
    size -= 1
    if size > 0:
        a, b, c = ka[size], kb[size], kc[size]
        i = 0
        while True:
            child = 2 * i + 1
            if child >= size:
                break
            r = child + 1
            if r < size and key_less(ka[r], kb[r], kc[r], ka[child], kb[child], kc[child]):
                child = r
            if key_less(ka[child], kb[child], kc[child], a, b, c):
                ka[i] = ka[child]
                kb[i] = kb[child]
                kc[i] = kc[child]
                i = child
            else:
                break
        ka[i] = a
        kb[i] = b
        kc[i] = c
    return a0, b0, c0, size


@njit(**JIT)
def positive_quantile(code, params, y):
    """Scalar ``F_zeta^{-1}(y)`` for the law encoded by ``PositiveLaw.kernel_spec``."""
    if code == LAW_POWER:
        return (params[1] * y) ** (1.0 / params[0])
    if code == LAW_STRETCH:
        return (-math.log(params[1] * y)) ** (-1.0 / params[0])
    if code == LAW_DOUBLE_EXP:
        t = math.log1p(-math.log(y))
        if t <= 0.0:
            return 1.0
        return min(t ** (-1.0 / params[0]), 1.0)
    if code == LAW_EXPONENTIAL:
        return -math.log1p(-y) / params[0]
    if code == LAW_POINT:
        return params[0]
    if code == LAW_EMPIRICAL:
        n = params.shape[0]
        pos = y * (n - 1)
        i = int(pos)
        if i >= n - 1:
            return params[n - 1]
        frac = pos - i
        return params[i] + frac * (params[i + 1] - params[i])
    return np.nan


@njit(**JIT)
def open_uniform(rng):
    return rng.random() + 2.0 ** -54


@njit(**JIT)
def sample_from_cumulative(rng, cum):
    """Index ``k`` with probability ``cum[k] - cum[k-1]``; linear scan (short supports)."""
    u = rng.random() * cum[cum.shape[0] - 1]
    k = 0
    last = cum.shape[0] - 1
    while k < last and u >= cum[k]:
        k += 1
    return k
