import numpy as np
import pytest
import scipy.sparse as sp

from heatwave.sparse import SparseMatrix


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_sparse(rng, rows, cols, density=0.5, symmetric=False):
    m = rng.random((rows, cols))
    m[rng.random((rows, cols)) > density] = 0.0
    if symmetric:
        m = (m + m.T) / 2
    return SparseMatrix.from_scipy(sp.csr_matrix(m), symmetric=symmetric)


def relative_diff(a, b):
    scale = max(np.abs(a).max(), np.abs(b).max(), 1e-300)
    return np.abs(a - b).max() / scale
