import numpy as np
import pytest

from pptlab.qstate import BipartiteDims, BipartiteState, HermitianOperator, ProductVector


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_hermitian(dims: BipartiteDims, rng) -> HermitianOperator:
    d = dims.total
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return HermitianOperator(dims, (x + x.conj().T) / 2.0)


def random_state(dims: BipartiteDims, rng, rank=None) -> BipartiteState:
    d = dims.total
    rank = rank or d
    a = rng.standard_normal((rank, d)) + 1j * rng.standard_normal((rank, d))
    return BipartiteState(HermitianOperator(dims, a.conj().T @ a))


def random_product_vector(dims: BipartiteDims, rng) -> ProductVector:
    a = rng.standard_normal(dims.m) + 1j * rng.standard_normal(dims.m)
    b = rng.standard_normal(dims.n) + 1j * rng.standard_normal(dims.n)
    return ProductVector(a, b)


def random_full_rank_ppt(dims: BipartiteDims, rng) -> BipartiteState:
    """Separable full-rank state: many random product terms plus a floor."""
    d = dims.total
    rho = 0.05 * np.eye(d, dtype=complex)
    for _ in range(3 * d):
        pv = random_product_vector(dims, rng)
        v = pv.vec()
        rho += np.outer(v, v.conj())
    return BipartiteState(HermitianOperator(dims, rho))
