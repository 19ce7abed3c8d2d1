"""Binary indexed (Fenwick) tree over nonnegative float weights.

The functions are numba-compiled so the event engine can call them from
its inner loop. ``tree`` has length ``n + 1``; slot 0 is unused.
"""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def build(values):
    n = values.shape[0]
    tree = np.zeros(n + 1, dtype=np.float64)
    for i in range(n):
        tree[i + 1] += values[i]
    for j in range(1, n + 1):
        parent = j + (j & -j)
        if parent <= n:
            tree[parent] += tree[j]
    return tree


@numba.njit(cache=True, nogil=True)
def add(tree, i, delta):
    n = tree.shape[0] - 1
    j = i + 1
    while j <= n:
        tree[j] += delta
        j += j & -j


@numba.njit(cache=True, nogil=True)
def prefix(tree, i):
    """Sum of the first ``i`` weights (sites ``0..i-1``)."""
    s = 0.0
    j = i
    while j > 0:
        s += tree[j]
        j -= j & -j
    return s


@numba.njit(cache=True, nogil=True)
def search(tree, target):
    """Smallest index ``i`` with ``prefix(i + 1) > target``.

    Zero-weight entries are never returned for in-range targets. Returns
    ``n`` when ``target`` is at or beyond the total.
    """
    n = tree.shape[0] - 1
    step = 1
    while step * 2 <= n:
        step *= 2
    pos = 0
    rem = target
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] <= rem:
            pos = nxt
            rem -= tree[nxt]
        step //= 2
    return pos


class RateTree:
    """Thin object wrapper, mostly for tests and interactive use."""

    def __init__(self, values):
        self.values = np.array(values, dtype=np.float64)
        self.tree = build(self.values)

    def __len__(self):
        return self.values.shape[0]

    def set(self, i, value):
        add(self.tree, i, value - self.values[i])
        self.values[i] = value

    def total(self):
        return prefix(self.tree, len(self))

    def prefix(self, i):
        return prefix(self.tree, i)

    def search(self, target):
        return search(self.tree, target)
