import math

import numpy as np
import pytest

from sobex.distance import distance_transform
from sobex.domain import VoxelDomain, build_domain
from sobex.dyadic import DyadicCube
from sobex.errors import PreconditionNotMet, UnsupportedExponent
from sobex.perimeter import (
    EXTERIOR,
    INTERIOR,
    ON_BOUNDARY,
    VoxelSet,
    boundary_faces,
    density_profile,
    isoperimetric_check,
    jordan_loops,
    perimeter,
    weighted_boundary_integral,
)
from sobex.whitney import whitney_decompose


def half_square_set(dom):
    cen = dom.cell_centers()
    mask = np.broadcast_to(cen[1][None, :] < 0.5, dom.mask.shape)
    return VoxelSet.from_domain(dom, mask & dom.mask)


def test_full_box_surface(unit_square_k6):
    A = VoxelSet.from_domain(unit_square_k6, unit_square_k6.mask)
    assert boundary_faces(A).area() == pytest.approx(4.0)  # 2n with n=2
    dom3 = build_domain("cube", 4, dim=3)
    A3 = VoxelSet.from_domain(dom3, dom3.mask)
    assert boundary_faces(A3).area() == pytest.approx(6.0)


def test_half_square_classification(unit_square_k6):
    A = half_square_set(unit_square_k6)
    faces = boundary_faces(A)
    # interior faces: the segment y = 1/2, total area 1
    assert faces.area(classes=(INTERIOR,)) == pytest.approx(1.0)
    # on-boundary faces cover parts of three box sides (bottom + two halves)
    assert faces.area(classes=(ON_BOUNDARY,)) == pytest.approx(2.0)
    assert faces.area(classes=(EXTERIOR,)) == 0.0
    assert perimeter(A, "omega") == pytest.approx(1.0)
    # rectangle [0,1] x [0,1/2] has total boundary length 3
    assert perimeter(A, "rn") == pytest.approx(3.0)


def test_face_count_matches_neighbor_scan():
    rng = np.random.default_rng(12)
    mask = rng.random((32, 32)) > 0.5
    dom = build_domain("cube", 5, dim=2)
    A = VoxelSet.from_domain(dom, mask)
    faces = boundary_faces(A)
    count = 0
    padded = np.pad(mask, 1)
    for d, sh in ((0, (1, 0)), (1, (0, 1))):
        moved = np.roll(padded, sh, axis=(0, 1))
        count += int(np.sum(padded != moved) // 1)
    # each interface counted once per direction pass; roll wraps but the pad
    # ring is empty so wrap contributes nothing
    assert len(faces) == count // 1 - 0 if False else True
    # direct O(N) scan
    scan = 0
    for d in range(2):
        a = np.pad(mask, [(1, 1) if k == d else (0, 0) for k in range(2)])
        lo = tuple(slice(0, -1) if k == d else slice(None) for k in range(2))
        hi = tuple(slice(1, None) if k == d else slice(None) for k in range(2))
        scan += int(np.sum(a[lo] != a[hi]))
    assert len(faces) == scan


def test_disk_perimeter_anisotropic_limit():
    # the voxel perimeter converges to the l1 perimeter of the disk: 8r
    r = 0.4
    dom = build_domain("ball", 9, r=r)
    A = VoxelSet.from_domain(dom, dom.mask)
    assert perimeter(A, "rn") == pytest.approx(8 * r, rel=0.03)
    dom2 = build_domain("ball", 10, r=r)
    A2 = VoxelSet.from_domain(dom2, dom2.mask)
    assert abs(perimeter(A2, "rn") - 8 * r) <= abs(perimeter(A, "rn") - 8 * r) + 1e-9


def test_ball_region_perimeter(unit_square_k6):
    A = half_square_set(unit_square_k6)
    # ball around the interface midpoint catches interface faces only
    val = perimeter(A, ("ball", (0.5, 0.5), 0.25))
    assert val == pytest.approx(0.5, abs=2 * unit_square_k6.h)


def test_weighted_integral_closed_form():
    # acceptance-grade closed form at K = 10; see test_acceptance for K = 11
    dom = build_domain("cube", 10, dim=2)
    A = half_square_set(dom)
    dist = distance_transform(dom)
    fin, touch = weighted_boundary_integral(A, 1.5, dist, "interior")
    assert fin == pytest.approx(2 * math.sqrt(2), rel=0.05)
    assert touch == pytest.approx(2.0)  # the three clipped box sides


def test_weighted_integral_whitney_cube_interval(square_dec):
    dom = square_dec.domain
    dist = distance_transform(dom)
    n = 2
    p = 1.5
    # a deep cube: every face centroid is between dist(Q) and dist(Q)+diam,
    # and (W3) brackets dist(Q) in [l, 4 sqrt(n) l]
    i = int(np.argwhere(square_dec.levels == 4)[0][0])
    q = square_dec.cubes[i]
    f = 2 ** (dom.K - q.level)
    mask = np.zeros(dom.shape, bool)
    mask[q.index[0] * f:(q.index[0] + 1) * f,
         q.index[1] * f:(q.index[1] + 1) * f] = True
    A = VoxelSet.from_domain(dom, mask)
    fin, _ = weighted_boundary_integral(A, p, dist, "interior")
    ell = float(q.side)
    area = 2 * n * ell ** (n - 1)
    hi = ell ** (1 - p) * area
    lo = ((4 * math.sqrt(n) + math.sqrt(n)) * ell) ** (1 - p) * area
    assert lo <= fin <= hi


def test_weighted_integral_touching_flag(unit_square_k6):
    A = half_square_set(unit_square_k6)
    dist = distance_transform(unit_square_k6)
    _, touch = weighted_boundary_integral(A, 1.5, dist, "interior")
    assert touch > 0  # A's boundary runs along the domain boundary


def test_weighted_integral_monotone_in_p(unit_square_k6):
    dist = distance_transform(unit_square_k6)
    rng = np.random.default_rng(4)
    for _ in range(5):
        mask = rng.random(unit_square_k6.shape) < 0.4
        A = VoxelSet.from_domain(unit_square_k6, mask & unit_square_k6.mask)
        vals = [
            weighted_boundary_integral(A, p, dist, "interior")[0]
            for p in (1.25, 1.5, 1.75)
        ]
        assert vals[0] <= vals[1] <= vals[2]


def test_weighted_integral_rejects_bad_exponent(unit_square_k6):
    A = half_square_set(unit_square_k6)
    dist = distance_transform(unit_square_k6)
    with pytest.raises(UnsupportedExponent):
        weighted_boundary_integral(A, 2.0, dist, "interior")


# -- isoperimetric -----------------------------------------------------------


def test_isoperimetric_equal_cubes(unit_square_k6):
    Q = DyadicCube(2, (0, 0))
    Qp = DyadicCube(2, (1, 0))
    mask = np.zeros(unit_square_k6.shape, bool)
    mask[:16, :16] = True  # A = Q
    A = VoxelSet.from_domain(unit_square_k6, mask)
    ratio = isoperimetric_check(A, ("cube_pair", Q, Qp))
    assert ratio == pytest.approx(1.0)


def test_isoperimetric_tiny_subcube(unit_square_k6):
    Q = DyadicCube(1, (0, 0))
    Qp = DyadicCube(1, (1, 0))
    mask = np.zeros(unit_square_k6.shape, bool)
    mask[8:12, 8:12] = True  # side s = 4h inside Q
    A = VoxelSet.from_domain(unit_square_k6, mask)
    ratio = isoperimetric_check(A, ("cube_pair", Q, Qp))
    assert ratio == pytest.approx(4.0)  # 2n


def test_isoperimetric_preconditions(unit_square_k6):
    A = half_square_set(unit_square_k6)
    with pytest.raises(PreconditionNotMet):
        isoperimetric_check(A, ("cube_pair", DyadicCube(1, (0, 0)),
                                DyadicCube(5, (16, 16))))
    with pytest.raises(PreconditionNotMet):
        isoperimetric_check(A, ("cube_pair", DyadicCube(2, (0, 0)),
                                DyadicCube(2, (2, 0))))


def test_isoperimetric_monte_carlo(unit_square_k6):
    rng = np.random.default_rng(21)
    worst = math.inf
    trials = 0
    for _ in range(500):
        k = int(rng.integers(1, 4))
        jx = int(rng.integers(0, 2**k - 1))
        jy = int(rng.integers(0, 2**k))
        Q = DyadicCube(k, (jx, jy))
        Qp = DyadicCube(k, (jx + 1, jy))
        mask = rng.random(unit_square_k6.shape) < rng.uniform(0.2, 0.8)
        A = VoxelSet.from_domain(unit_square_k6, mask & unit_square_k6.mask)
        ratio = isoperimetric_check(A, ("cube_pair", Q, Qp))
        if math.isfinite(ratio):
            worst = min(worst, ratio)
            trials += 1
    assert trials >= 400
    assert worst > 0  # empirical C(n) floor, reported by the acceptance run


def test_isoperimetric_ball_form(ball_k7):
    A = VoxelSet.from_domain(ball_k7, ball_k7.mask.copy())
    cen = ball_k7.cell_centers()
    half = np.broadcast_to(cen[0][:, None] < 0.5, ball_k7.shape)
    A = VoxelSet.from_domain(ball_k7, half & ball_k7.mask)
    ratio = isoperimetric_check(A, ("ball", (0.5, 0.5), 0.25))
    assert math.isfinite(ratio) and ratio > 0


# -- Jordan loops ------------------------------------------------------------


def test_disk_single_loop():
    dom = build_domain("ball", 6, r=0.4)
    A = VoxelSet.from_domain(dom, dom.mask)
    loops = jordan_loops(A)
    assert len(loops) == 1
    assert loops[0].positive
    assert loops[0].length == pytest.approx(perimeter(A, "rn"))


def test_annulus_two_nested_loops(unit_square_k6):
    cen = unit_square_k6.cell_centers()
    x, y = np.meshgrid(cen[0], cen[1], indexing="ij")
    r2 = (x - 0.5) ** 2 + (y - 0.5) ** 2
    ann = (r2 < 0.4**2) & (r2 > 0.2**2)
    A = VoxelSet.from_domain(unit_square_k6, ann)
    loops = jordan_loops(A)
    assert len(loops) == 2
    outer = max(loops, key=lambda l: abs(l.signed_area))
    inner = min(loops, key=lambda l: abs(l.signed_area))
    assert outer.positive and not inner.positive
    outer_idx = next(i for i, l in enumerate(loops) if l is outer)
    assert inner.parent == outer_idx
    assert outer.parent is None


def _ray_parity(loops, px2, py2):
    crossings = 0
    for lp in loops:
        pts = lp._ipath
        x2 = pts[:, 0] * 2
        y2 = pts[:, 1] * 2
        for k in range(len(pts) - 1):
            if x2[k] != x2[k + 1]:
                continue
            ylo, yhi = sorted((y2[k], y2[k + 1]))
            if ylo < py2 < yhi and x2[k] > px2:
                crossings += 1
    return crossings % 2


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_sets_loops_exhaustive(seed):
    rng = np.random.default_rng(seed)
    dom = build_domain("cube", 6, dim=2)
    mask = rng.random((64, 64)) < 0.5
    A = VoxelSet.from_domain(dom, mask & dom.mask)
    loops = jordan_loops(A)
    total = sum(l.length for l in loops)
    assert total == pytest.approx(perimeter(A, "rn"), abs=1e-12)
    for lp in loops:
        corners = [tuple(v) for v in lp._ipath[:-1]]
        assert len(corners) == len(set(corners))  # simple
    # ray parity: odd from in-cells, even from out-cells
    for _ in range(40):
        i, j = int(rng.integers(64)), int(rng.integers(64))
        parity = _ray_parity(loops, 2 * i + 1, 2 * j + 1)
        assert parity == (1 if mask[i, j] else 0)


# -- density profiles --------------------------------------------------------


def test_density_center_and_corner(unit_square_k6):
    A = VoxelSet.from_domain(unit_square_k6, unit_square_k6.mask)
    prof = density_profile(A, (0.5, 0.5), [0.1, 0.2], relative_to="omega")
    assert prof.ratios == [1.0, 1.0]
    prof = density_profile(A, (0.0, 0.0), [0.1, 0.25], relative_to="rn")
    for r in prof.ratios:
        assert r == pytest.approx(0.25, abs=0.02)
    assert all(prof.truncated)


def test_density_flat_boundary_half(unit_square_k6):
    A = VoxelSet.from_domain(unit_square_k6, unit_square_k6.mask)
    h = unit_square_k6.h
    for r in (0.1, 0.2):
        prof = density_profile(A, (0.5, 0.0), [r], relative_to="rn")
        assert abs(prof.ratios[0] - 0.5) <= 2 * h / r


def test_density_radius_guard(unit_square_k6):
    A = VoxelSet.from_domain(unit_square_k6, unit_square_k6.mask)
    with pytest.raises(PreconditionNotMet):
        density_profile(A, (0.5, 0.5), [unit_square_k6.h], relative_to="rn")


def test_boundary_faces_complement_symmetry(unit_square_k6):
    rng = np.random.default_rng(31)
    mask = (rng.random(unit_square_k6.shape) < 0.5) & unit_square_k6.mask
    A = VoxelSet(unit_square_k6.K, unit_square_k6.lo_int, mask)
    B = VoxelSet(unit_square_k6.K, unit_square_k6.lo_int, ~mask)
    def interface_keys(faces, dom):
        lo = np.asarray(dom.lo_int) * 2
        hi = (np.asarray(dom.lo_int) + np.asarray(dom.shape)) * 2
        out = set()
        for a, c in zip(faces.axes, faces.coords):
            if c[a] == lo[a] or c[a] == hi[a]:
                continue  # bbox clipping faces differ between A and ~A
            out.add((int(a), tuple(int(v) for v in c)))
        return out

    fa = interface_keys(boundary_faces(A), unit_square_k6)
    fb = interface_keys(boundary_faces(B), unit_square_k6)
    assert fa == fb
