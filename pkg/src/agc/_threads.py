"""Thread-count control for the numeric kernels.

``AGC_THREADS`` caps both our row-chunked sparse products and the BLAS pool.
Row chunks are independent, so results do not depend on the thread count;
BLAS reductions may, which is why determinism is promised per thread count.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numpy as np
from threadpoolctl import threadpool_limits

# below this many stored entries a single call beats the pool overhead
_PARALLEL_NNZ = 1 << 20


def num_threads():
    raw = os.environ.get("AGC_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            n = 0
        if n >= 1:
            return n
    return os.cpu_count() or 1


@contextmanager
def limited_blas():
    with threadpool_limits(limits=num_threads()):
        yield


def spmm(mat, dense, out=None):
    """Row-parallel ``mat @ dense`` for a scipy CSR matrix.

    Each worker owns a contiguous block of destination rows, so no reduction
    crosses threads.
    """
    n_threads = num_threads()
    if out is None:
        out = np.empty((mat.shape[0], dense.shape[1]), dtype=np.result_type(mat.dtype, dense.dtype))
    if n_threads == 1 or mat.nnz < _PARALLEL_NNZ:
        out[...] = mat @ dense
        return out
    bounds = np.linspace(0, mat.shape[0], n_threads + 1).astype(np.int64)

    def work(i):
        lo, hi = bounds[i], bounds[i + 1]
        if hi > lo:
            out[lo:hi] = mat[lo:hi] @ dense

    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        list(pool.map(work, range(n_threads)))
    return out
