"""Exact event-driven simulation of the assembled discrete generators
(continuous-time Markov chains): unbiased stochastic oracle for the matrix
semigroups and for membrane occupation times.

Per-path streams are derived from (seed, path_index) with a splitmix64 hash,
so runs are deterministic for a fixed seed and embarrassingly parallel over
paths.  The hash is the on-disk run record's stream derivation.
"""

import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit, prange, set_num_threads

from .errors import ValidationError


def configure_threads():
    """Apply THINLAYER_THREADS to the numba thread pool (1 = serial)."""
    raw = os.environ.get("THINLAYER_THREADS")
    if not raw:
        return None
    try:
        k = int(raw)
    except ValueError as exc:
        raise ValidationError("THINLAYER_THREADS", f"not an integer: {raw!r}") from exc
    if k < 1:
        raise ValidationError("THINLAYER_THREADS", f"must be >= 1, got {k}")
    try:
        set_num_threads(k)
    except ValueError:
        pass  # more threads requested than the pool has; keep the maximum
    return k


@dataclass(frozen=True)
class CtmcRun:
    """One simulation request against a generator matrix."""

    matrix: object  # scipy sparse or dense square matrix
    start: int
    t: float
    n_paths: int
    seed: int

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix)
        n = m.shape[0]
        if m.shape[0] != m.shape[1]:
            raise ValidationError("matrix", "generator must be square")
        if not 0 <= self.start < n:
            raise ValidationError("start", f"start node {self.start} out of range")
        if self.t < 0:
            raise ValidationError("t", "horizon must be nonnegative")
        if self.n_paths < 1:
            raise ValidationError("n_paths", "need at least one path")
        off = m.copy()
        off.setdiag(0.0)
        if off.nnz and off.min() < -1e-12:
            raise ValidationError("matrix", "negative off-diagonal rate (not Metzler)")
        row_sums = np.abs(np.asarray(m.sum(axis=1)).ravel())
        if np.max(row_sums) > 1e-8 * max(1.0, abs(m).max()):
            raise ValidationError("matrix", "row sums must vanish (conservative chain)")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class PathEstimate:
    mean: float
    stderr: float
    n_paths: int


@njit(cache=True)
def _splitmix64(seed, index):
    z = np.uint64(seed) + np.uint64(index) * np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _one_path(indptr, indices, data, diag, start, t, mask):
    node = start
    now = 0.0
    occ = 0.0
    while True:
        rate = -diag[node]
        if rate <= 0.0:
            # absorbing node: stays for the rest of the horizon
            if mask[node]:
                occ += t - now
            break
        hold = np.random.exponential(1.0 / rate)
        stay = min(hold, t - now)
        if mask[node]:
            occ += stay
        now += stay
        if now >= t:
            break
        u = np.random.random() * rate
        acc = 0.0
        nxt = node
        for k in range(indptr[node], indptr[node + 1]):
            j = indices[k]
            if j == node:
                continue
            acc += data[k]
            if u < acc:
                nxt = j
                break
        node = nxt
    return node, occ


@njit(cache=True, parallel=True)
def _simulate_kernel(indptr, indices, data, diag, start, t, n_paths, seed, mask):
    terminal = np.empty(n_paths, dtype=np.int64)
    occupation = np.zeros(n_paths)
    for path in prange(n_paths):
        np.random.seed(np.uint32(_splitmix64(seed, path) & np.uint64(0xFFFFFFFF)))
        node, occ = _one_path(indptr, indices, data, diag, start, t, mask)
        terminal[path] = node
        occupation[path] = occ
    return terminal, occupation


def simulate_ctmc(run, mask=None):
    """Run the chain; returns (terminal nodes, per-path occupation fractions
    of the masked node set)."""
    m = run.matrix
    n = m.shape[0]
    if mask is None:
        mask = np.zeros(n, dtype=np.bool_)
    else:
        mask = np.asarray(mask, dtype=np.bool_)
        if mask.shape != (n,):
            raise ValidationError("mask", f"expected {n} flags, got {mask.shape}")
    terminal, occ = _simulate_kernel(
        m.indptr,
        m.indices,
        np.maximum(m.data, 0.0),
        m.diagonal(),
        run.start,
        float(run.t),
        run.n_paths,
        np.uint64(run.seed),
        mask,
    )
    frac = occ / run.t if run.t > 0 else np.zeros(run.n_paths)
    return terminal, frac


def _estimate(samples):
    n = len(samples)
    mean = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return PathEstimate(mean=mean, stderr=stderr, n_paths=n)


def estimate_semigroup(run, f_values):
    """Monte Carlo estimate of (e^{tA} f)(start) = E f(X_t)."""
    f_values = np.asarray(f_values, dtype=float)
    if f_values.shape != (run.matrix.shape[0],):
        raise ValidationError("f", f"expected {run.matrix.shape[0]} node values")
    terminal, _ = simulate_ctmc(run)
    return _estimate(f_values[terminal])


def membrane_occupation(run, membrane_nodes):
    """Mean fraction of [0,t] the chain spends in the given node set."""
    n = run.matrix.shape[0]
    mask = np.zeros(n, dtype=np.bool_)
    for i in membrane_nodes:
        if not 0 <= i < n:
            raise ValidationError("membrane_nodes", f"node {i} out of range")
        mask[i] = True
    _, frac = simulate_ctmc(run, mask)
    return _estimate(frac)
