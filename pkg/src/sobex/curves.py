"""Singular-weight shortest paths in the complement (or interior) of a voxel
domain, and the curve-condition / John / cig checkers built on them.

Paths live on the cell-center lattice with 8-connectivity in 2D and
26-connectivity in 3D; an edge costs its Euclidean length times the mean of
the endpoint weights.  Cell centers are never closer than h/2 to the
discrete boundary, so the singular weight dist^(1-p) stays finite and the
Riemann sums converge to the continuum line integrals as the grid refines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as cs_dijkstra
from scipy.spatial import cKDTree

from .distance import DistanceField, distance_transform
from .domain import VoxelDomain, build_domain
from .errors import Unreachable, UnsupportedExponent

_OFFSETS_2D = [(1, 0), (0, 1), (1, 1), (1, -1)]
_OFFSETS_3D = [
    (1, 0, 0), (0, 1, 0), (0, 0, 1),
    (1, 1, 0), (1, -1, 0), (1, 0, 1), (1, 0, -1), (0, 1, 1), (0, 1, -1),
    (1, 1, 1), (1, 1, -1), (1, -1, 1), (1, -1, -1),
]


@dataclass
class GeodesicPath:
    vertices: np.ndarray        # (m, n) cell centers, first/last are endpoints
    edge_lengths: np.ndarray
    edge_weights: np.ndarray
    cost: float
    length: float

    @property
    def empty(self) -> bool:
        return len(self.vertices) <= 1


class GeodesicSolver:
    """Shortest-path engine over one side of the domain with a fixed weight.

    weight: ("power", p) for dist^(1-p) with 1 < p < 2, "unit" for the
    length metric with boundary-adjacent cells forbidden, "inverse" for the
    1/dist John-curve surrogate.
    """

    def __init__(self, dom: VoxelDomain, dist: DistanceField | None = None,
                 side: str = "complement", weight="unit"):
        self.dom = dom
        self.side = side
        self.weight_spec = weight
        dist = dist if dist is not None else distance_transform(dom)
        self.dist = dist
        mask = (~dom.mask) if side == "complement" else dom.mask
        d2 = dist.d2_int
        if weight == "unit":
            mask = mask & (d2 > 1)  # forbid cells hugging the boundary
            w = np.ones(mask.shape)
        elif weight == "inverse":
            w = np.zeros(mask.shape)
            w[mask] = 1.0 / dist.values[mask]
        else:
            kind, p = weight
            if kind != "power":
                raise ValueError(f"unknown weight {weight!r}")
            if not (1.0 <= p < 2.0):
                raise UnsupportedExponent(f"p must lie in [1,2), got {p}")
            w = np.zeros(mask.shape)
            w[mask] = dist.values[mask] ** (1.0 - p)
        self.node_mask = mask
        if not mask.any():
            raise Unreachable(f"no cells on the {side} side")
        self.ids = np.full(mask.shape, -1, dtype=np.int64)
        self.cells = np.argwhere(mask)
        self.ids[mask] = np.arange(len(self.cells))
        self._w = w
        self._build_graph()
        h = dom.h
        centers = (self.cells + np.asarray(dom.lo_int) + 0.5) * h
        self._tree = cKDTree(centers)
        self._centers = centers

    def _build_graph(self):
        n = self.dom.n
        h = self.dom.h
        mask = self.node_mask
        offsets = _OFFSETS_2D if n == 2 else _OFFSETS_3D
        rows, cols, data = [], [], []
        for off in offsets:
            sl_from = tuple(
                slice(max(0, -o), mask.shape[d] - max(0, o)) for d, o in enumerate(off)
            )
            sl_to = tuple(
                slice(max(0, o), mask.shape[d] + min(0, o)) for d, o in enumerate(off)
            )
            ok = mask[sl_from] & mask[sl_to]
            a = self.ids[sl_from][ok]
            b = self.ids[sl_to][ok]
            wmean = 0.5 * (self._w[sl_from][ok] + self._w[sl_to][ok])
            length = math.sqrt(sum(o * o for o in off)) * h
            rows.append(a)
            cols.append(b)
            data.append(length * wmean)
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        data = np.concatenate(data)
        m = len(self.cells)
        self.graph = csr_matrix((data, (rows, cols)), shape=(m, m))

    def snap(self, z) -> int:
        """Nearest lattice node to a point."""
        _, i = self._tree.query(np.asarray(z, dtype=float))
        return int(i)

    def distances_from(self, src: int):
        dists, pred = cs_dijkstra(
            self.graph, directed=False, indices=src, return_predecessors=True
        )
        return dists, pred

    def path(self, z1, z2) -> GeodesicPath:
        s = self.snap(z1)
        t = self.snap(z2)
        if s == t:
            return GeodesicPath(self._centers[[s]], np.array([]), np.array([]),
                                0.0, 0.0)
        dists, pred = self.distances_from(s)
        if not np.isfinite(dists[t]):
            raise Unreachable("endpoints lie in different components")
        chain = [t]
        while chain[-1] != s:
            chain.append(int(pred[chain[-1]]))
        chain.reverse()
        return self._path_from_chain(chain, float(dists[t]))

    def _path_from_chain(self, chain, cost) -> GeodesicPath:
        verts = self._centers[chain]
        seen = {}
        simple = []
        for v_id in chain:  # loop erasure; Dijkstra paths are already simple
            if v_id in seen:
                simple = simple[: seen[v_id] + 1]
            else:
                seen[v_id] = len(simple)
                simple.append(v_id)
        verts = self._centers[simple]
        diffs = np.diff(verts, axis=0)
        lengths = np.sqrt((diffs**2).sum(axis=1))
        cellw = self._w[tuple(self.cells[simple].T)]
        weights = 0.5 * (cellw[:-1] + cellw[1:])
        return GeodesicPath(verts, lengths, weights, cost,
                            float(lengths.sum()))


def weighted_geodesic(dom: VoxelDomain, dist: DistanceField, z1, z2, p: float,
                      side: str = "complement") -> GeodesicPath:
    """Least-cost lattice path between two points for the dist^(1-p) metric
    (p = 1 uses unit weight with boundary cells forbidden)."""
    if not (1.0 <= p < 2.0):
        raise UnsupportedExponent(f"p must lie in [1,2), got {p}")
    weight = "unit" if p == 1.0 else ("power", p)
    solver = GeodesicSolver(dom, dist, side=side, weight=weight)
    return solver.path(z1, z2)


def bellman_ford_cost(solver: GeodesicSolver, z1, z2) -> float:
    """Independent relaxation oracle (dense iteration to a fixed point)."""
    s = solver.snap(z1)
    t = solver.snap(z2)
    m = solver.graph.shape[0]
    coo = solver.graph.tocoo()
    edges = np.stack([coo.row, coo.col]).T
    w = coo.data
    dist = np.full(m, np.inf)
    dist[s] = 0.0
    for _ in range(m):
        nd = dist.copy()
        np.minimum.at(nd, edges[:, 1], dist[edges[:, 0]] + w)
        np.minimum.at(nd, edges[:, 0], dist[edges[:, 1]] + w)
        if np.array_equal(nd, dist):
            break
        dist = nd
    return float(dist[t])


# ---------------------------------------------------------------------------
# curve-condition scan
# ---------------------------------------------------------------------------


@dataclass
class CurveConditionReport:
    K: int
    p: float
    scales: list[float]
    sup_ratio: list[float]       # per scale
    rows: list[dict]             # z1, z2, separation, cost, ratio, scale
    drift: list[float] | None = None          # same-scale sup at K+1 over K
    sup_ratio_refined: list[float] | None = None   # per-scale sups at K+1
    flags: list[str] = field(default_factory=list)


def boundary_probe_points(dom: VoxelDomain, side: str = "complement") -> np.ndarray:
    """Centers of side cells hugging the discrete boundary (dist = h/2)."""
    dist = distance_transform(dom)
    mask = (~dom.mask) if side == "complement" else dom.mask
    sel = mask & (dist.d2_int <= 1)
    cells = np.argwhere(sel)
    return (cells + np.asarray(dom.lo_int) + 0.5) * dom.h


def curve_condition_scan(dom: VoxelDomain, p: float, n_pairs: int, seed: int,
                         scales=None, focus=None, refine: bool = True,
                         ) -> CurveConditionReport:
    """Sampled sup of cost / |z1-z2|^(2-p) over boundary pairs, stratified by
    separation scale.  With `focus` set, half of each scale's pairs anchor
    near that point (needed to see localized degeneracies).  When `refine`
    is on, the domain regenerates at K+1 and the per-scale drift of the sup
    ratio is reported."""
    report = _scan_once(dom, p, n_pairs, seed, scales, focus)
    if refine:
        dom2 = build_domain(dom.name, dom.K + 1)
        fine = _scan_once(dom2, p, n_pairs, seed, report.scales, focus)
        report.sup_ratio_refined = fine.sup_ratio
        report.drift = [
            f / c if c > 0 else math.nan
            for f, c in zip(fine.sup_ratio, report.sup_ratio)
        ]
    return report


def _scan_once(dom, p, n_pairs, seed, scales, focus) -> CurveConditionReport:
    rng = np.random.default_rng(seed)
    pts = boundary_probe_points(dom)
    tree = cKDTree(pts)
    if scales is None:
        diam = float(np.ptp(pts, axis=0).max())
        scales = [diam / 2**j for j in range(2, 6)]
    scales = sorted(scales, reverse=True)
    solver = GeodesicSolver(dom, None, side="complement",
                            weight=("power", p) if p > 1 else "unit")
    rows = []
    sups = []
    for s in scales:
        pair_budget = max(2, n_pairs // len(scales))
        anchors = []
        if focus is not None:
            # anchor at the pair scale away from the focus feature, so that
            # scale-s pairs probe the geometry at depth ~s
            ring = tree.query_ball_point(np.asarray(focus, dtype=float), 1.5 * s)
            ring = [c for c in ring
                    if np.linalg.norm(pts[c] - np.asarray(focus)) >= 0.5 * s]
            rng.shuffle(ring)
            anchors += [int(v) for v in ring[: pair_budget // 2]]
        while len(anchors) < pair_budget:
            anchors.append(int(rng.integers(len(pts))))
        sup = 0.0
        by_anchor: dict[int, list[int]] = {}
        max_targets = 128
        for a in anchors:
            cand = tree.query_ball_point(pts[a], 1.5 * s)
            cand = [c for c in cand
                    if c != a and np.linalg.norm(pts[c] - pts[a]) >= 0.75 * s]
            if not cand:
                continue
            if len(cand) > max_targets:
                pick = rng.choice(len(cand), size=max_targets, replace=False)
                cand = [cand[int(v)] for v in pick]
            by_anchor.setdefault(a, []).extend(cand)
        for a, targets in by_anchor.items():
            src = solver.snap(pts[a])
            dists, _ = solver.distances_from(src)
            for b in targets:
                tgt = solver.snap(pts[b])
                cost = float(dists[tgt])
                if not math.isfinite(cost):
                    continue
                sep = float(np.linalg.norm(
                    solver._centers[tgt] - solver._centers[src]))
                if sep == 0.0:
                    continue
                ratio = cost / sep ** (2.0 - p)
                rows.append({
                    "z1": tuple(solver._centers[src]),
                    "z2": tuple(solver._centers[tgt]),
                    "separation": sep, "cost": cost, "ratio": ratio,
                    "scale": s,
                })
                sup = max(sup, ratio)
        sups.append(sup)
    return CurveConditionReport(dom.K, p, list(scales), sups, rows)


# ---------------------------------------------------------------------------
# cig and John checkers
# ---------------------------------------------------------------------------


@dataclass
class CigReport:
    cig_d: float
    cig_l: float
    path: GeodesicPath
    # the planar theory ties the two constants via cig_l = 2^14 cig_d^2;
    # recorded for reference, not enforced
    cig_l_from_d: float = 0.0

    def __post_init__(self):
        self.cig_l_from_d = 2.0**14 * self.cig_d**2


def cig_check(dom: VoxelDomain, dist: DistanceField, x, y) -> CigReport:
    """Measured cig constants along a 1/dist-optimal interior curve; these
    are upper bounds for the best-curve constants."""
    solver = GeodesicSolver(dom, dist, side="interior", weight="inverse")
    path = solver.path(x, y)
    if path.empty:
        return CigReport(0.0, 0.0, path)
    verts = path.vertices
    dvals = _dist_at_vertices(dom, dist, verts)
    cum = np.concatenate([[0.0], np.cumsum(path.edge_lengths)])
    total = cum[-1]
    m = len(verts)
    diam_pref = np.zeros(m)
    diam_suff = np.zeros(m)
    for j in range(1, m):
        d = np.linalg.norm(verts[: j + 1] - verts[j], axis=1).max()
        diam_pref[j] = max(diam_pref[j - 1], d)
    for j in range(m - 2, -1, -1):
        d = np.linalg.norm(verts[j:] - verts[j], axis=1).max()
        diam_suff[j] = max(diam_suff[j + 1], d)
    with np.errstate(divide="ignore"):
        rd = np.minimum(diam_pref, diam_suff) / dvals
        rl = np.minimum(cum, total - cum) / dvals
    return CigReport(float(rd.max()), float(rl.max()), path)


@dataclass
class JohnReport:
    constant: float          # sup over samples of sup_t t / dist(gamma(t))
    per_sample: list[float]
    x0: tuple[float, ...]


def john_check(dom: VoxelDomain, dist: DistanceField, x0,
               n_samples: int = 64, seed: int = 0) -> JohnReport:
    """John-constant estimate from 1/dist geodesics between boundary samples
    and the center point (an upper bound for these curves only)."""
    rng = np.random.default_rng(seed)
    solver = GeodesicSolver(dom, dist, side="interior", weight="inverse")
    probes = boundary_probe_points(dom, side="interior")
    if len(probes) > n_samples:
        probes = probes[rng.choice(len(probes), n_samples, replace=False)]
    src = solver.snap(x0)
    dists, pred = solver.distances_from(src)
    per = []
    for z in probes:
        t = solver.snap(z)
        if not np.isfinite(dists[t]):
            continue
        chain = [t]
        while chain[-1] != src:
            chain.append(int(pred[chain[-1]]))
        path = solver._path_from_chain(chain, float(dists[t]))
        verts = path.vertices
        dvals = _dist_at_vertices(dom, dist, verts)
        cum = np.concatenate([[0.0], np.cumsum(path.edge_lengths)])
        ratios = cum[1:] / dvals[1:]
        per.append(float(ratios.max()) if len(ratios) else 0.0)
    if not per:
        raise Unreachable("no boundary sample reaches the center")
    return JohnReport(max(per), per, tuple(float(v) for v in x0))


def _dist_at_vertices(dom: VoxelDomain, dist: DistanceField,
                      verts: np.ndarray) -> np.ndarray:
    cells = np.floor(verts / dom.h).astype(np.int64) - np.asarray(dom.lo_int)
    for d in range(dom.n):
        cells[:, d] = np.clip(cells[:, d], 0, dom.mask.shape[d] - 1)
    return dist.values[tuple(cells.T)]
