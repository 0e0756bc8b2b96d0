"""Compiled inner loop for stored Gram matrices; used only when numba imports."""
from __future__ import annotations

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAVE_NUMBA = numba is not None

if HAVE_NUMBA:
    @numba.njit(cache=True, boundscheck=False, nogil=True)
    def window_products(gram, rows, cols, pos, base, ptr, lead, r_out, lead_out):
        # each Gram row is read once: gather its needed columns, then reduce
        buf = np.empty(cols.size)
        for i in range(rows.size):
            g = gram[rows[i]]
            for j in range(cols.size):
                buf[j] = g[cols[j]]
            for j in range(lead):
                lead_out[i, j] = buf[j]
            for q in range(ptr.size - 1):
                acc = 0.0
                for p in range(ptr[q], ptr[q + 1]):
                    acc += base[p] * buf[pos[p]]
                r_out[i, q] = acc
