import os

# Small-matrix workloads: BLAS threading only adds oversubscription overhead,
# and the acceptance suite carries wall-clock budgets. Must be set before
# numpy first loads its BLAS.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import pytest  # noqa: E402


@pytest.fixture(scope="session", autouse=True)
def warm_numba_kernels():
    """Pay JIT compilation once up front so timed tests measure the work."""
    from gmpool import kernels

    kernels.warmup()
