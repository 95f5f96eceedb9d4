"""Hot Monte-Carlo kernels with a numba backend and a pure-numpy fallback.

Two inner loops dominate the simulator's runtime: accumulating the
use-and-then-forget SINR expectation terms over channel realizations, and
building the per-sample local MMSE combining vectors.  Both ship in two
implementations that produce the same numbers up to summation-order
round-off:

* ``numba``: ``@njit``-compiled sample loops (default when numba imports);
* ``numpy``: vectorized batched linear algebra.

Set ``CFPAS_BACKEND=numpy`` or ``CFPAS_BACKEND=numba`` to force a backend.
Kernels run single-threaded so that reduction order, and therefore every
emitted byte, is reproducible for a fixed backend.  ``benchmarks/``
contains a script comparing the two paths.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "active_backend",
    "sinr_accumulate",
    "lp_mmse_combine",
    "IMPLEMENTATIONS",
]


def _pick_backend() -> str:
    choice = os.environ.get("CFPAS_BACKEND", "").strip().lower()
    if choice not in ("", "numpy", "numba"):
        raise ValueError(
            f"CFPAS_BACKEND must be 'numba' or 'numpy', got {choice!r}"
        )
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise
        return "numpy"
    return "numba"


_BACKEND = _pick_backend()


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return _BACKEND


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _sinr_accumulate_numpy(v, h, pair_k, pair_l, lorder, lstart):
    S, K = h.shape[0], h.shape[1]
    L = lstart.shape[0] - 1
    # z[s, k, i] = sum over serving APs of UE k of v_kl^H h_il
    z = np.zeros((S, K, K), dtype=np.complex128)
    for l in range(L):
        sel = lorder[lstart[l]:lstart[l + 1]]
        if sel.size == 0:
            continue
        contrib = np.einsum("spn,sin->spi", v[:, sel, :].conj(), h[:, :, l, :])
        z[:, pair_k[sel], :] += contrib
    idx = np.arange(K)
    sum_self = z[:, idx, idx].sum(axis=0)
    sum_cross = (z.real ** 2 + z.imag ** 2).sum(axis=0)
    vnorm = (v.real ** 2 + v.imag ** 2).sum(axis=2).sum(axis=0)
    sum_norm = np.bincount(pair_k, weights=vnorm, minlength=K)
    return sum_self, sum_cross, sum_norm


def _lp_mmse_combine_numpy(hhat, base, rho_pair, pair_l, lorder, lstart):
    S, P, N = hhat.shape
    L = lstart.shape[0] - 1
    v = np.zeros_like(hhat)
    for l in range(L):
        sel = lorder[lstart[l]:lstart[l + 1]]
        if sel.size == 0:
            continue
        hl = hhat[:, sel, :]                                     # (S, d, N)
        w = rho_pair[sel]
        gram = np.einsum("sdn,sdm->snm", hl * w[None, :, None], hl.conj())
        gram += base[l][None, :, :]
        sol = np.linalg.solve(gram, hl.transpose(0, 2, 1))       # (S, N, d)
        v[:, sel, :] = sol.transpose(0, 2, 1) * w[None, :, None]
    return v


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if _BACKEND == "numba":
    from numba import njit

    @njit(cache=True)
    def _sinr_accumulate_numba(v, h, pair_k, pair_l, lorder, lstart):
        S, P, N = v.shape
        K = h.shape[1]
        sum_self = np.zeros(K, dtype=np.complex128)
        sum_cross = np.zeros((K, K))
        sum_norm = np.zeros(K)
        z = np.zeros((K, K), dtype=np.complex128)
        for s in range(S):
            z[:, :] = 0.0
            for p in range(P):
                k = pair_k[p]
                l = pair_l[p]
                vn = 0.0
                for i in range(K):
                    acc = 0.0 + 0.0j
                    for n in range(N):
                        acc += np.conj(v[s, p, n]) * h[s, i, l, n]
                    z[k, i] += acc
                for n in range(N):
                    vn += v[s, p, n].real ** 2 + v[s, p, n].imag ** 2
                sum_norm[k] += vn
            for k in range(K):
                sum_self[k] += z[k, k]
                for i in range(K):
                    sum_cross[k, i] += z[k, i].real ** 2 + z[k, i].imag ** 2
        return sum_self, sum_cross, sum_norm

    @njit(cache=True)
    def _lp_mmse_combine_numba(hhat, base, rho_pair, pair_l, lorder, lstart):
        S, P, N = hhat.shape
        L = lstart.shape[0] - 1
        v = np.zeros_like(hhat)
        gram = np.zeros((N, N), dtype=np.complex128)
        for s in range(S):
            for l in range(L):
                d = lstart[l + 1] - lstart[l]
                if d == 0:
                    continue
                gram[:, :] = base[l]
                for j in range(lstart[l], lstart[l + 1]):
                    p = lorder[j]
                    w = rho_pair[p]
                    for n in range(N):
                        for m in range(N):
                            gram[n, m] += w * hhat[s, p, n] * np.conj(hhat[s, p, m])
                rhs = np.empty((N, d), dtype=np.complex128)
                for c in range(d):
                    p = lorder[lstart[l] + c]
                    for n in range(N):
                        rhs[n, c] = hhat[s, p, n]
                sol = np.linalg.solve(np.ascontiguousarray(gram), rhs)
                for c in range(d):
                    p = lorder[lstart[l] + c]
                    for n in range(N):
                        v[s, p, n] = rho_pair[p] * sol[n, c]
        return v

    IMPLEMENTATIONS = {
        "numpy": {
            "sinr_accumulate": _sinr_accumulate_numpy,
            "lp_mmse_combine": _lp_mmse_combine_numpy,
        },
        "numba": {
            "sinr_accumulate": _sinr_accumulate_numba,
            "lp_mmse_combine": _lp_mmse_combine_numba,
        },
    }
else:
    IMPLEMENTATIONS = {
        "numpy": {
            "sinr_accumulate": _sinr_accumulate_numpy,
            "lp_mmse_combine": _lp_mmse_combine_numpy,
        },
    }

_ACTIVE = IMPLEMENTATIONS[_BACKEND]


def group_pairs_by_ap(pair_l, num_aps: int):
    """Sort serving-pair indices by AP for the per-AP kernel loops.

    Returns ``(lorder, lstart)``: pair indices reordered so that the pairs of
    AP ``l`` occupy ``lorder[lstart[l]:lstart[l+1]]``.
    """
    lorder = np.argsort(pair_l, kind="stable").astype(np.int64)
    counts = np.bincount(pair_l, minlength=num_aps)
    lstart = np.zeros(num_aps + 1, dtype=np.int64)
    np.cumsum(counts, out=lstart[1:])
    return lorder, lstart


def sinr_accumulate(v, h, pair_k, pair_l, lorder, lstart):
    """Accumulate SINR expectation terms over one batch of realizations.

    Parameters
    ----------
    v : (S, P, N) complex
        Combining vectors packed over serving (UE, AP) pairs.
    h : (S, K, L, N) complex
        True channel realizations for every (UE, AP) link.
    pair_k, pair_l : (P,) int64
        UE / AP index of each serving pair.
    lorder, lstart : int64 arrays
        AP grouping from :func:`group_pairs_by_ap`.

    Returns
    -------
    sum_self : (K,) complex
        Per-UE sum over samples of the combined own-channel inner product.
    sum_cross : (K, K) float
        ``[k, i]`` holds the summed squared magnitude of UE k's combiner
        against UE i's channel.
    sum_norm : (K,) float
        Summed squared norms of each UE's combining vectors.
    """
    return _ACTIVE["sinr_accumulate"](
        np.ascontiguousarray(v), np.ascontiguousarray(h),
        pair_k, pair_l, lorder, lstart,
    )


def lp_mmse_combine(hhat, base, rho_pair, pair_l, lorder, lstart):
    """Local MMSE combining vectors for every serving pair and sample.

    For AP ``l`` the per-sample Gram matrix is the rank-one sum
    ``base_l + sum_i rho_i hhat_il hhat_il^H`` over its served UEs, where
    ``base_l`` carries the noise and estimation-error terms; the combiner of
    pair ``(k, l)`` is ``rho_k`` times the solve of that system against
    ``hhat_kl``.
    """
    return _ACTIVE["lp_mmse_combine"](
        np.ascontiguousarray(hhat), np.ascontiguousarray(base),
        np.ascontiguousarray(rho_pair), pair_l, lorder, lstart,
    )
