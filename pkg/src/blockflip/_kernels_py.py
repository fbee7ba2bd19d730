"""Pure numpy implementations of the bipartite index kernels.

Every function takes C-contiguous ``complex128`` arrays and the factor
dimensions ``n`` (first factor, outer index) and ``m`` (second factor).
The compiled module ``_kernels_ext`` exposes the same functions.
"""

import numpy as np


def partial_trace_first(x, n, m):
    return np.einsum("prps->rs", x.reshape(n, m, n, m))


def partial_transpose_second(x, n, m):
    return np.ascontiguousarray(
        x.reshape(n, m, n, m).transpose(0, 3, 2, 1).reshape(n * m, n * m)
    )


def reshuffle_contract(s, n, m):
    """Return ``T[k, l, j, i] = sum_{p,q} s[(p,j),(k,q)] * s[(l,q),(p,i)]``."""
    s4 = s.reshape(n, m, n, m)
    return np.einsum("pjkq,lqpi->klji", s4, s4, optimize=True)
