"""Permutation-loop kernels: numba-compiled with a pure-numpy fallback.

The composite-index tables these kernels consume are built in symspace:
``digits[i, k]`` is the base-d digit of composite index i at site k,
``gathers[p]`` is the inverse of permutation p as a gather map, and
``weights[k] = d**(n - 1 - k)`` are the big-endian place values.

Set OBSAVG_PURE_NUMPY=1 to skip numba entirely (fallback path, also used
by the benchmark for comparison).
"""
from __future__ import annotations

import os

import numpy as np


def _pure_numpy_requested() -> bool:
    return os.environ.get("OBSAVG_PURE_NUMPY", "").strip().lower() in ("1", "true", "yes", "on")


nb = None
if not _pure_numpy_requested():
    try:
        import numba as nb
    except ImportError:
        nb = None

HAVE_NUMBA = nb is not None


def permuted_indices(digits: np.ndarray, gather: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Composite index of each basis vector after routing site k from site gather[k]."""
    return digits[:, gather] @ weights


def twirl_mean_numpy(x: np.ndarray, digits: np.ndarray, gathers: np.ndarray,
                     weights: np.ndarray) -> np.ndarray:
    """Average of the index-relabeled copies x[t, :][:, t] over all permutations."""
    out = np.zeros(x.shape, dtype=np.complex128)
    for p in range(gathers.shape[0]):
        t = digits[:, gathers[p]] @ weights
        out += x[np.ix_(t, t)]
    out /= gathers.shape[0]
    return out


def pair_min_codes_numpy(digits: np.ndarray, gathers: np.ndarray,
                         weights: np.ndarray) -> np.ndarray:
    """Canonical orbit code min_p (t_p[i] * dim + t_p[j]) for every index pair."""
    dim = digits.shape[0]
    codes = np.full((dim, dim), np.iinfo(np.int64).max, dtype=np.int64)
    for p in range(gathers.shape[0]):
        t = digits[:, gathers[p]] @ weights
        np.minimum(codes, t[:, None] * dim + t[None, :], out=codes)
    return codes


if HAVE_NUMBA:

    @nb.njit(cache=True)
    def _twirl_mean_jit(x, digits, gathers, weights):  # pragma: no cover - exercised via wrapper
        dim = x.shape[0]
        n_perm = gathers.shape[0]
        n_sites = digits.shape[1]
        out = np.zeros((dim, dim), dtype=np.complex128)
        t = np.empty(dim, dtype=np.int64)
        for p in range(n_perm):
            for i in range(dim):
                acc = 0
                for k in range(n_sites):
                    acc += digits[i, gathers[p, k]] * weights[k]
                t[i] = acc
            for i in range(dim):
                ti = t[i]
                for j in range(dim):
                    out[i, j] += x[ti, t[j]]
        for i in range(dim):
            for j in range(dim):
                out[i, j] /= n_perm
        return out

    @nb.njit(cache=True)
    def _pair_min_codes_jit(digits, gathers, weights):  # pragma: no cover - exercised via wrapper
        dim = digits.shape[0]
        n_perm = gathers.shape[0]
        n_sites = digits.shape[1]
        codes = np.full((dim, dim), np.iinfo(np.int64).max, dtype=np.int64)
        t = np.empty(dim, dtype=np.int64)
        for p in range(n_perm):
            for i in range(dim):
                acc = 0
                for k in range(n_sites):
                    acc += digits[i, gathers[p, k]] * weights[k]
                t[i] = acc
            for i in range(dim):
                base = t[i] * dim
                for j in range(dim):
                    code = base + t[j]
                    if code < codes[i, j]:
                        codes[i, j] = code
        return codes

    def twirl_mean(x, digits, gathers, weights):
        return _twirl_mean_jit(
            np.ascontiguousarray(x, dtype=np.complex128),
            np.ascontiguousarray(digits, dtype=np.int64),
            np.ascontiguousarray(gathers, dtype=np.int64),
            np.ascontiguousarray(weights, dtype=np.int64),
        )

    def pair_min_codes(digits, gathers, weights):
        return _pair_min_codes_jit(
            np.ascontiguousarray(digits, dtype=np.int64),
            np.ascontiguousarray(gathers, dtype=np.int64),
            np.ascontiguousarray(weights, dtype=np.int64),
        )

else:
    twirl_mean = twirl_mean_numpy
    pair_min_codes = pair_min_codes_numpy
