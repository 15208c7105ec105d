"""Hot array kernels with two interchangeable backends.

Every kernel exists as a numba ``@njit`` loop and as a pure-numpy
expression. Both backends perform the floating point operations in the
same order, so results are bit-identical. The active backend is picked at
import time from ``DSEQ_BACKEND`` (``numba`` or ``numpy``); numba is used
when it imports cleanly and the variable is unset.
"""
from __future__ import annotations

import os
from contextlib import contextmanager
from types import SimpleNamespace

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


# ---------------------------------------------------------------- numpy path

def _np_delta2d(x):
    out = x.copy()
    out[:, 1:] -= x[:, :-1]
    out[1:, :] -= x[:-1, :]
    out[1:, 1:] += x[:-1, :-1]
    return out


def _np_prefix2d(x):
    return np.cumsum(np.cumsum(x, axis=0), axis=1)


def _np_suffix2d(x):
    r = np.cumsum(x[::-1, :], axis=0)[::-1, :]
    return np.ascontiguousarray(np.cumsum(r[:, ::-1], axis=1)[:, ::-1])


def _np_prefix_absmax2d(x):
    a = np.abs(x).astype(np.float64)
    return np.maximum.accumulate(np.maximum.accumulate(a, axis=0), axis=1)


def _np_scatter_apply(rm, rn, k, l, v, xtab, out):
    np.add.at(out, (rm, rn), v * xtab[k, l])
    return out


NUMPY = SimpleNamespace(
    name="numpy",
    delta2d=_np_delta2d,
    prefix2d=_np_prefix2d,
    suffix2d=_np_suffix2d,
    prefix_absmax2d=_np_prefix_absmax2d,
    scatter_apply=_np_scatter_apply,
)


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _nb_delta2d(x):
        M, N = x.shape
        out = np.empty_like(x)
        for m in range(M):
            for n in range(N):
                v = x[m, n]
                if n > 0:
                    v -= x[m, n - 1]
                if m > 0:
                    v -= x[m - 1, n]
                    if n > 0:
                        v += x[m - 1, n - 1]
                out[m, n] = v
        return out

    @njit(cache=True)
    def _nb_prefix2d(x):
        M, N = x.shape
        out = np.empty_like(x)
        for n in range(N):
            out[0, n] = x[0, n]
        for m in range(1, M):
            for n in range(N):
                out[m, n] = out[m - 1, n] + x[m, n]
        for m in range(M):
            for n in range(1, N):
                out[m, n] = out[m, n - 1] + out[m, n]
        return out

    @njit(cache=True)
    def _nb_suffix2d(x):
        M, N = x.shape
        out = np.empty_like(x)
        for n in range(N):
            out[M - 1, n] = x[M - 1, n]
        for m in range(M - 2, -1, -1):
            for n in range(N):
                out[m, n] = out[m + 1, n] + x[m, n]
        for m in range(M):
            for n in range(N - 2, -1, -1):
                out[m, n] = out[m, n + 1] + out[m, n]
        return out

    @njit(cache=True)
    def _nb_prefix_absmax2d(x):
        M, N = x.shape
        out = np.empty((M, N), dtype=np.float64)
        for m in range(M):
            for n in range(N):
                v = abs(float(x[m, n]))
                if m > 0 and out[m - 1, n] > v:
                    v = out[m - 1, n]
                out[m, n] = v
        for m in range(M):
            for n in range(1, N):
                if out[m, n - 1] > out[m, n]:
                    out[m, n] = out[m, n - 1]
        return out

    @njit(cache=True)
    def _nb_scatter_apply(rm, rn, k, l, v, xtab, out):
        for t in range(rm.shape[0]):
            out[rm[t], rn[t]] += v[t] * xtab[k[t], l[t]]
        return out

    NUMBA = SimpleNamespace(
        name="numba",
        delta2d=_nb_delta2d,
        prefix2d=_nb_prefix2d,
        suffix2d=_nb_suffix2d,
        prefix_absmax2d=_nb_prefix_absmax2d,
        scatter_apply=_nb_scatter_apply,
    )
else:  # pragma: no cover
    NUMBA = None

BACKENDS = {"numpy": NUMPY}
if NUMBA is not None:
    BACKENDS["numba"] = NUMBA


def _initial_backend():
    want = os.environ.get("DSEQ_BACKEND", "").strip().lower()
    if want == "numpy" or NUMBA is None:
        return NUMPY
    return NUMBA


_active = _initial_backend()


def backend() -> str:
    return _active.name


def set_backend(name: str) -> None:
    global _active
    if name not in BACKENDS:
        raise ValueError(f"unknown or unavailable backend {name!r}")
    _active = BACKENDS[name]


@contextmanager
def using(name: str):
    prev = _active.name
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


# Wrappers keep one call site per kernel; arrays are made contiguous so the
# numba signatures stay few.

def delta2d(x):
    return _active.delta2d(np.ascontiguousarray(x))


def prefix2d(x):
    return _active.prefix2d(np.ascontiguousarray(x))


def suffix2d(x):
    return _active.suffix2d(np.ascontiguousarray(x))


def prefix_absmax2d(x):
    return _active.prefix_absmax2d(np.ascontiguousarray(x))


def scatter_apply(rm, rn, k, l, v, xtab, out):
    return _active.scatter_apply(
        np.ascontiguousarray(rm, dtype=np.int64),
        np.ascontiguousarray(rn, dtype=np.int64),
        np.ascontiguousarray(k, dtype=np.int64),
        np.ascontiguousarray(l, dtype=np.int64),
        np.ascontiguousarray(v),
        np.ascontiguousarray(xtab),
        out,
    )
