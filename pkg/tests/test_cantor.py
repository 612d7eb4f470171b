import math
from fractions import Fraction

import numpy as np
import pytest

from sobex.cantor import (
    CantorTubeSpec,
    build_cantor_tube,
    cantor_occupancy,
    polyline_length,
    seg_seg_dist2,
)
from sobex.errors import ConstructionError


@pytest.fixture(scope="module")
def depth1():
    return build_cantor_tube(1)


@pytest.fixture(scope="module")
def depth2():
    return build_cantor_tube(2)


def test_depth1_constants_closed_form(depth1):
    # l_1 = lambda_1 = e^-1 / 2, e_1 = (1 - e^-1)/3, c_0 = e_1/8, c_1 = c_0/64
    assert float(depth1.l[1]) == pytest.approx(0.5 * math.exp(-1), rel=1e-12)
    assert float(depth1.e[1]) == pytest.approx((1 - math.exp(-1)) / 3, rel=1e-12)
    assert float(depth1.c[0]) == pytest.approx((1 - math.exp(-1)) / 24, rel=1e-12)
    assert float(depth1.c[1]) == pytest.approx((1 - math.exp(-1)) / 24 / 64, rel=1e-12)
    # the spec constants recursion in exact arithmetic
    assert depth1.c[0] == depth1.e[1] / 8
    assert depth1.c[1] == depth1.c[0] / 64


def test_depth2_cantor_measure(depth2):
    # |C_2| = (2 lambda_1 * 2 lambda_2)^3 = (e^-1 e^-1/2)^3 = e^-4.5
    val = float(depth2.cantor_measure(2))
    assert val == pytest.approx(math.exp(-4.5), rel=5e-13)
    # exact identity against the construction constants
    assert depth2.cantor_measure(2) == (
        2 * depth2.lambdas[0] * 2 * depth2.lambdas[1]
    ) ** 3


def test_constants_inequalities(depth2):
    for n in (1, 2):
        assert depth2.c[n] <= depth2.e[n] / 8
        assert depth2.c[n] <= depth2.l[n]


def test_curve_lengths_allow_splitting(depth2):
    for n in (1, 2):
        for verts in depth2.curves[n]:
            assert polyline_length(verts) >= 8 * depth2.c[n]


def test_split_rules(depth2):
    for n in (1, 2):
        cn = depth2.c[n]
        for i, pieces in enumerate(depth2.splits[n]):
            assert len(pieces) % 2 == 0  # (P1)
            for piece in pieces:
                ln = polyline_length(piece)
                assert 2 * cn <= ln <= 6 * cn  # (P2)
            for a, b in zip(pieces, pieces[1:]):
                assert a[-1] == b[0]  # (P3)
            assert pieces[0][0] == depth2.anchors_y[n][i]  # (P4)
            assert pieces[-1][-1] == depth2.anchors_x[n][i]


def test_tube_separation_exact(depth2):
    # (L3) with the tube radius accounted: tubes at the same level stay
    # at least c_n apart, i.e. curves stay >= 2 c_n apart
    for n in (1, 2):
        curves = depth2.curves[n]
        bound = (2 * depth2.c[n]) ** 2
        # same-parent pairs exactly; cross-parent pairs via the cube gap
        for pi in range(len(depth2.cubes[n - 1])):
            for a in range(pi * 8, pi * 8 + 8):
                for b in range(a + 1, pi * 8 + 8):
                    best = min(
                        seg_seg_dist2(p0, p1, q0, q1)
                        for p0, p1 in zip(curves[a], curves[a][1:])
                        for q0, q1 in zip(curves[b], curves[b][1:])
                    )
                    assert best >= bound


def test_anchor_offsets(depth2):
    # (L2): exit points sit within c_{n-1}/2 of the parent's top-face center
    for n in (1, 2):
        for i, y in enumerate(depth2.anchors_y[n]):
            if n == 1:
                xp = (Fraction(1, 2), Fraction(1, 2), Fraction(1))
            else:
                xp = depth2.anchors_x[n - 1][i // 8]
            d2 = sum((a - b) ** 2 for a, b in zip(y, xp))
            assert d2 <= (depth2.c[n - 1] / 2) ** 2


def test_lambda_validation():
    with pytest.raises(ConstructionError):
        build_cantor_tube(2, lambda_override=[Fraction(1, 2), Fraction(1, 3)])
    with pytest.raises(ConstructionError):
        build_cantor_tube(2, lambda_override=[Fraction(1, 3), Fraction(1, 4)])
    with pytest.raises(ConstructionError):
        build_cantor_tube(0)


def test_infeasible_routing_raises():
    # lambda_2 extremely close to 1/2 starves the level-2 streets
    lam1 = Fraction(2, 5)
    eps = Fraction(1, 100000)
    lam2 = Fraction(1, 2) - eps
    with pytest.raises(ConstructionError) as err:
        build_cantor_tube(2, lambda_override=[lam1, lam2])
    assert err.value.level == 2


def test_serialization_roundtrip(depth2):
    text = depth2.to_text()
    back = CantorTubeSpec.from_text(text)
    assert back.to_text() == text
    assert back.lambdas == depth2.lambdas
    assert back.curves[2][17] == depth2.curves[2][17]
    assert back.splits[1][3] == depth2.splits[1][3]


def test_window_voxelization_tubes(depth1):
    # window around the top-face riser cluster at tube-resolving resolution
    K = 14
    w = Fraction(1, 2**8)
    lo = (Fraction(1, 2) - w, Fraction(1, 2) - w, Fraction(1) - w)
    lo_int = tuple(int(v * 2**K) for v in lo)
    shape = (2 * int(w * 2**K), 2 * int(w * 2**K), int(w * 2**K))
    mask = cantor_occupancy(depth1, K, lo_int, shape)
    removed = ~mask
    from scipy import ndimage

    _, ncomp = ndimage.label(removed)
    assert ncomp == 8
