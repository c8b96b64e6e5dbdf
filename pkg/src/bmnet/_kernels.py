"""Inner-loop kernels with a numba path and a pure-numpy path.

The numba path is used when numba imports cleanly and the environment
variable ``BMNET_DISABLE_NUMBA`` is unset (or set to ``0``/``false``).
Both paths are kept importable under ``*_numba`` / ``*_numpy`` names so the
tests and the benchmark can compare them directly.

All integer arrays are int64 and all real arrays float64; callers are
expected to pass contiguous arrays of those dtypes. Ragged per-node tables
are passed flattened with CSR-style pointer arrays of length V + 1.
"""
import os

import numpy as np

_DISABLED = os.environ.get("BMNET_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def encode_rows_numpy(data, cols, radices):
    """Mixed-radix index of ``data[:, cols]``, first column most significant."""
    k = np.zeros(data.shape[0], dtype=np.int64)
    for c, r in zip(cols, radices):
        k = k * r + data[:, c]
    return k


def tabulate_numpy(kidx, jidx, weights, n_rows, n_states):
    flat = kidx * n_states + jidx
    counts = np.bincount(flat, weights=weights, minlength=n_rows * n_states)
    return counts.astype(np.float64, copy=False).reshape(n_rows, n_states)


def loglik_sum_numpy(log_table, kidx, jidx):
    return float(np.sum(log_table[kidx, jidx]))


def ancestral_sample_numpy(u, cum, offsets, n_states, par_ptr, par_cols, par_radix):
    n, v = u.shape
    out = np.zeros((n, v), dtype=np.int64)
    for i in range(v):
        q = n_states[i]
        cols = par_cols[par_ptr[i]:par_ptr[i + 1]]
        radix = par_radix[par_ptr[i]:par_ptr[i + 1]]
        k = encode_rows_numpy(out, cols, radix)
        rows = cum[offsets[i]:offsets[i + 1]].reshape(-1, q)[k]
        out[:, i] = np.sum(u[:, i:i + 1] >= rows[:, :q - 1], axis=1)
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @numba.njit(cache=True)
    def encode_rows_numba(data, cols, radices):
        n = data.shape[0]
        k = np.zeros(n, dtype=np.int64)
        for d in range(n):
            acc = 0
            for t in range(cols.size):
                acc = acc * radices[t] + data[d, cols[t]]
            k[d] = acc
        return k

    @numba.njit(cache=True)
    def _tabulate_weighted(kidx, jidx, weights, n_rows, n_states):
        counts = np.zeros((n_rows, n_states), dtype=np.float64)
        for d in range(kidx.size):
            counts[kidx[d], jidx[d]] += weights[d]
        return counts

    @numba.njit(cache=True)
    def _tabulate_unit(kidx, jidx, n_rows, n_states):
        counts = np.zeros((n_rows, n_states), dtype=np.float64)
        for d in range(kidx.size):
            counts[kidx[d], jidx[d]] += 1.0
        return counts

    def tabulate_numba(kidx, jidx, weights, n_rows, n_states):
        if weights is None:
            return _tabulate_unit(kidx, jidx, n_rows, n_states)
        return _tabulate_weighted(kidx, jidx, weights, n_rows, n_states)

    @numba.njit(cache=True)
    def _loglik_sum(log_table, kidx, jidx):
        total = 0.0
        for d in range(kidx.size):
            total += log_table[kidx[d], jidx[d]]
        return total

    def loglik_sum_numba(log_table, kidx, jidx):
        return float(_loglik_sum(log_table, kidx, jidx))

    @numba.njit(cache=True)
    def ancestral_sample_numba(u, cum, offsets, n_states, par_ptr, par_cols, par_radix):
        n, v = u.shape
        out = np.zeros((n, v), dtype=np.int64)
        for d in range(n):
            for i in range(v):
                k = 0
                for t in range(par_ptr[i], par_ptr[i + 1]):
                    k = k * par_radix[t] + out[d, par_cols[t]]
                q = n_states[i]
                base = offsets[i] + k * q
                s = 0
                for j in range(q - 1):
                    if u[d, i] >= cum[base + j]:
                        s += 1
                out[d, i] = s
        return out

if USE_NUMBA:
    encode_rows = encode_rows_numba
    tabulate = tabulate_numba
    loglik_sum = loglik_sum_numba
    ancestral_sample = ancestral_sample_numba
else:
    encode_rows = encode_rows_numpy
    tabulate = tabulate_numpy
    loglik_sum = loglik_sum_numpy
    ancestral_sample = ancestral_sample_numpy
