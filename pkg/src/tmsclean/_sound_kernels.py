"""Leave-one-out noise-estimation sweep: the SOUND hot loop.

One sweep solves, for every channel i, a regularized (n-1) x (n-1) system
built from the lead-field Gram matrix and predicts channel i from the
others.  The numba build runs channels in parallel; the numpy fallback is
selected by TMSCLEAN_NUMBA=0 (see _accel).  Both paths are numerically
identical up to BLAS reduction order.
"""

from __future__ import annotations

import numpy as np

from ._accel import HAS_NUMBA, njit, prange


def _loo_sweep_py(g: np.ndarray, y: np.ndarray, sigma: np.ndarray, lam: float) -> np.ndarray:
    """One leave-one-out sweep; returns unnormalized new sigma (SDs)."""
    n = g.shape[0]
    out = np.empty(n)
    for i in prange(n):
        m = n - 1
        sub = np.empty((m, m))
        cross = np.empty(m)
        ysub = np.empty((m, y.shape[1]))
        r = 0
        for a in range(n):
            if a == i:
                continue
            c = 0
            for b in range(n):
                if b == i:
                    continue
                sub[r, c] = g[a, b]
                c += 1
            cross[r] = g[i, a]
            ysub[r] = y[a]
            r += 1
        tr = 0.0
        for a in range(m):
            tr += sub[a, a]
        reg = lam * tr / m
        for a in range(m):
            s = sigma[(a if a < i else a + 1)]
            sub[a, a] += reg * s * s
        coef = np.linalg.solve(sub, cross)
        resid = y[i] - coef @ ysub
        out[i] = np.sqrt(np.mean(resid * resid))
    return out


if HAS_NUMBA:
    loo_sweep = njit(cache=True, parallel=True)(_loo_sweep_py)
else:
    loo_sweep = _loo_sweep_py
