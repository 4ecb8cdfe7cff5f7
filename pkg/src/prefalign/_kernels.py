"""Hot numeric kernels with a numba fast path and a pure-Python fallback.

The two loops that dominate run time live here: the sequential power-one
random-walk test (millions of Bernoulli steps per experiment sweep) and the
Lasso cyclic coordinate-descent loop. Each kernel has two implementations
with identical semantics; the active one is chosen at import time. Setting
the environment variable ``PREFALIGN_NO_NUMBA=1`` forces the fallback path,
which is what ``benchmarks/bench_kernels.py`` uses to compare the two.

Randomness inside kernels is a counter-based SplitMix64 stream: the i-th
variate of a stream is a pure function of (seed, i), so a consumer that
records how many variates it used can be replayed exactly, and the numba
and fallback paths see bit-identical uniforms.
"""

from __future__ import annotations

import math
import os

import numpy as np

_FLAG = os.environ.get("PREFALIGN_NO_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false")

try:
    if _DISABLED:
        raise ImportError("numba disabled via PREFALIGN_NO_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        """No-op decorator standing in for numba.njit."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


_MASK64 = (1 << 64) - 1
_PHI = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TO_UNIT = 2.0**-53


def _u64_at_py(seed: int, counter: int) -> int:
    """SplitMix64 output for stream `seed` at position `counter` (pure ints)."""
    x = (int(seed) + ((int(counter) + 1) * _PHI)) & _MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK64
    return x ^ (x >> 31)


def _uniform_at_py(seed: int, counter: int) -> float:
    return (_u64_at_py(seed, counter) >> 11) * _TO_UNIT


def _walk_test_py(p, eta, cap, seed, counter):
    """Sequential power-one test, fallback path. See walk_test for contract."""
    S = 0
    m = 0
    c = int(counter)
    neg_log_eta = -math.log(eta)
    while m < cap:
        u = _uniform_at_py(seed, c)
        c += 1
        if u < p:
            S += 1
        else:
            S -= 1
        m += 1
        boundary = math.sqrt(2.0 * m * (math.log(m + 1.0) + neg_log_eta))
        if S >= boundary or -S >= boundary:
            return (1 if S > 0 else -1), m, S, True
    sign = 1 if S > 0 else (-1 if S < 0 else 0)
    return sign, m, S, False


def _lasso_cd_py(gram, cov, lam, w, max_iter, tol):
    """Cyclic coordinate descent on the Gram system, fallback path."""
    d = cov.shape[0]
    it = 0
    delta = 0.0
    for it in range(1, max_iter + 1):
        delta = 0.0
        for j in range(d):
            gjj = gram[j, j]
            if gjj <= 0.0:
                continue
            rho = cov[j] - np.dot(gram[j], w) + gjj * w[j]
            if rho > lam:
                new = (rho - lam) / gjj
            elif rho < -lam:
                new = (rho + lam) / gjj
            else:
                new = 0.0
            diff = new - w[j]
            if diff != 0.0:
                w[j] = new
                if abs(diff) > delta:
                    delta = abs(diff)
        if delta < tol:
            return it, delta
    return max_iter, delta


if HAS_NUMBA:

    @njit(cache=True)
    def _u64_at_nb(seed, counter):
        x = seed + (counter + np.uint64(1)) * np.uint64(_PHI)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(_MIX1)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(_MIX2)
        return x ^ (x >> np.uint64(31))

    @njit(cache=True)
    def _uniform_at_nb(seed, counter):
        return (_u64_at_nb(seed, counter) >> np.uint64(11)) * _TO_UNIT

    @njit(cache=True)
    def _walk_test_nb(p, eta, cap, seed, counter):
        S = 0
        m = 0
        c = counter
        neg_log_eta = -np.log(eta)
        while m < cap:
            u = _uniform_at_nb(seed, c)
            c += np.uint64(1)
            if u < p:
                S += 1
            else:
                S -= 1
            m += 1
            boundary = np.sqrt(2.0 * m * (np.log(m + 1.0) + neg_log_eta))
            if S >= boundary or -S >= boundary:
                return (1 if S > 0 else -1), m, S, True
        sign = 1 if S > 0 else (-1 if S < 0 else 0)
        return sign, m, S, False

    @njit(cache=True)
    def _lasso_cd_nb(gram, cov, lam, w, max_iter, tol):
        d = cov.shape[0]
        it = 0
        delta = 0.0
        for it in range(1, max_iter + 1):
            delta = 0.0
            for j in range(d):
                gjj = gram[j, j]
                if gjj <= 0.0:
                    continue
                rho = cov[j] - np.dot(gram[j], w) + gjj * w[j]
                if rho > lam:
                    new = (rho - lam) / gjj
                elif rho < -lam:
                    new = (rho + lam) / gjj
                else:
                    new = 0.0
                diff = new - w[j]
                if diff != 0.0:
                    w[j] = new
                    if abs(diff) > delta:
                        delta = abs(diff)
            if delta < tol:
                return it, delta
        return max_iter, delta


def uniform_at(seed: int, counter: int) -> float:
    """Uniform [0,1) variate at a fixed stream position.

    Parameters
    ----------
    seed : int
        Stream identifier (any 64-bit value).
    counter : int
        Zero-based position within the stream.
    """
    if HAS_NUMBA:
        return float(_uniform_at_nb(np.uint64(seed), np.uint64(counter)))
    return _uniform_at_py(seed, counter)


def walk_test(p: float, eta: float, cap: int, seed: int, counter: int):
    """Run one power-one random-walk test to its boundary or a hard cap.

    Steps are +1 with probability `p`, -1 otherwise, using stream positions
    counter, counter+1, ... The test stops the first time
    |S_m| >= sqrt(2 m (ln(m+1) - ln eta)).

    Returns
    -------
    (sign, steps, walk_value, crossed) : tuple
        sign is the declared drift direction (+1/-1, 0 only for an uncrossed
        zero walk at the cap); steps is the number of variates consumed;
        crossed is False iff the hard cap fired first.
    """
    if HAS_NUMBA:
        sign, m, S, crossed = _walk_test_nb(
            float(p), float(eta), int(cap), np.uint64(seed), np.uint64(counter)
        )
        return int(sign), int(m), int(S), bool(crossed)
    return _walk_test_py(float(p), float(eta), int(cap), seed, counter)


def lasso_cd(gram: np.ndarray, cov: np.ndarray, lam: float, w: np.ndarray,
             max_iter: int, tol: float):
    """Cyclic coordinate descent for (1/2n)||y - Xw||^2 + lam*||w||_1.

    Operates on gram = X'X/n and cov = X'y/n; `w` is updated in place.
    Returns (iterations, last max coefficient change).
    """
    if HAS_NUMBA:
        it, delta = _lasso_cd_nb(gram, cov, float(lam), w, int(max_iter), float(tol))
    else:
        it, delta = _lasso_cd_py(gram, cov, float(lam), w, int(max_iter), float(tol))
    return int(it), float(delta)


def derive_stream(*keys) -> int:
    """Derive a decorrelated 64-bit stream seed from a tuple of integer keys.

    Chains each key through the SplitMix64 finalizer so that nearby master
    seeds, purposes, and replication indices produce unrelated streams.
    """
    state = 0x8E3C5B1F2A9D4E71
    for k in keys:
        state = _u64_at_py(state ^ (int(k) & _MASK64), 0)
    return state
