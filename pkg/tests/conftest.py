import numpy as np
import pytest

from sobex.domain import VoxelDomain, build_domain
from sobex.distance import distance_transform
from sobex.whitney import whitney_decompose


@pytest.fixture(scope="session")
def unit_square_k6():
    return build_domain("cube", 6, dim=2)


@pytest.fixture(scope="session")
def ball_k7():
    return build_domain("ball", 7, r=0.5, margin=1)


@pytest.fixture(scope="session")
def ball_k7_dec(ball_k7):
    return whitney_decompose(ball_k7, 8)


@pytest.fixture(scope="session")
def square_dec(unit_square_k6):
    return whitney_decompose(unit_square_k6, 7)


@pytest.fixture(scope="session")
def slab_k9():
    """Half-plane style slab: cells with y > 0 inside a [-1.25,1.25]^2 box."""
    K = 9
    N = int(2.5 * 2**K)
    lo_int = (-(N // 2), -(N // 2))
    iy = np.arange(N) + lo_int[1]
    mask = np.zeros((N, N), bool)
    mask[:, iy > 0] = True
    return VoxelDomain(K, lo_int, mask)


@pytest.fixture(scope="session")
def slab_k9_dist(slab_k9):
    return distance_transform(slab_k9)
