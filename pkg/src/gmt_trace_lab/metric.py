"""Boundary-weighted geodesic metric ``d_alpha`` on voxel graphs.

Edge weights are ``(d_a^(alpha-1) + d_b^(alpha-1)) / 2 * |a - b|`` with
``d`` the voxel distance field.  Weights are rounded to a common dyadic
quantum ``2^-q`` chosen so that every path length is an integer multiple of
``2^-q`` below ``2^53 2^-q``: all shortest-path sums are then exact in
floating point, so symmetry and the triangle inequality hold exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import DegenerateDomainError, DomainError
from .geometry import as_points, voxelize
from .wireframe import grid_point_sequence, layer_height, series_converges

SNAP_RADIUS_CELLS = 2.0


def alpha_from_p(p, d):
    """``alpha = (p - d) / (p - 1)``; requires ``p > d``."""
    if not p > d:
        raise DomainError(f"alpha needs p > d (Sobolev embedding into Hoelder spaces); got p={p}, d={d}")
    if math.isinf(p):
        return 1.0
    return (p - d) / (p - 1)


def neighbour_offsets(dim, connectivity):
    """Half of the neighbour stencil (offsets with positive leading entry)."""
    allowed = {2: {4: 1, 8: 2}, 3: {6: 1, 18: 2, 26: 3}}
    if connectivity not in allowed.get(dim, {}):
        raise DomainError(f"connectivity {connectivity} not valid in {dim}D")
    max_nonzero = allowed[dim][connectivity]
    out = []
    for off in itertools.product((-1, 0, 1), repeat=dim):
        nz = [o for o in off if o != 0]
        if nz and len(nz) <= max_nonzero and nz[0] > 0:
            out.append(off)
    return out


def default_connectivity(dim):
    return 26 if dim == 3 else 8


@dataclass(eq=False)
class GeodesicGraph:
    vox: object
    alpha: float
    connectivity: int
    node_index: np.ndarray  # flat voxel index -> node id (-1 outside)
    node_voxels: np.ndarray  # (n, d) voxel indices
    edges: np.ndarray  # (m, 2) node ids, i < j not required
    raw_weights: np.ndarray
    weights: np.ndarray  # quantized
    quantum: float
    matrix: csr_matrix

    @property
    def n_nodes(self):
        return self.node_voxels.shape[0]

    @property
    def n_edges(self):
        return self.edges.shape[0]

    def centers(self, nodes=None):
        idx = self.node_voxels if nodes is None else self.node_voxels[np.atleast_1d(nodes)]
        return self.vox.origin + (idx + 0.5) * self.vox.h


def build_graph(vox, alpha, connectivity=None):
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if vox.distance is None:
        raise DomainError("voxel domain has no distance field")
    connectivity = connectivity or default_connectivity(vox.dim)
    occ = vox.occupancy
    n = int(occ.sum())
    if n == 0:
        raise DegenerateDomainError("voxel domain has no interior voxels")
    node_index = np.full(occ.size, -1, dtype=np.int64)
    flat = np.flatnonzero(occ.ravel())
    node_index[flat] = np.arange(n)
    node_index = node_index.reshape(occ.shape)
    node_voxels = np.argwhere(occ)
    wnode = vox.distance[occ] ** (alpha - 1.0)
    E, W = [], []
    for off in neighbour_offsets(vox.dim, connectivity):
        a_sl, b_sl = [], []
        for o, size in zip(off, occ.shape):
            a_sl.append(slice(max(0, -o), size - max(0, o)))
            b_sl.append(slice(max(0, o), size - max(0, -o)))
        a_sl, b_sl = tuple(a_sl), tuple(b_sl)
        both = occ[a_sl] & occ[b_sl]
        ia = node_index[a_sl][both]
        ib = node_index[b_sl][both]
        length = vox.h * math.sqrt(sum(o * o for o in off))
        E.append(np.stack([ia, ib], axis=1))
        W.append(0.5 * (wnode[ia] + wnode[ib]) * length)
    edges = np.concatenate(E) if E else np.zeros((0, 2), dtype=np.int64)
    raw = np.concatenate(W) if W else np.zeros(0)
    total = float(raw.sum()) if raw.size else 1.0
    q = math.floor(52 - math.log2(max(total, 1e-300)))
    quantum = 2.0**-q
    weights = np.maximum(np.rint(raw / quantum), 1.0) * quantum
    mat = csr_matrix((np.concatenate([weights, weights]),
                      (np.concatenate([edges[:, 0], edges[:, 1]]),
                       np.concatenate([edges[:, 1], edges[:, 0]]))), shape=(n, n))
    return GeodesicGraph(vox, float(alpha), connectivity, node_index, node_voxels, edges,
                         raw, weights, quantum, mat)


def snap(graph, x):
    """Nearest interior voxel (ties: lexicographically smallest index) within 2h."""
    vox = graph.vox
    x = as_points(x, vox.dim)[0]
    base = np.floor((x - vox.origin) / vox.h - 0.5).astype(int)
    best = None
    for off in itertools.product(range(-2, 4), repeat=vox.dim):
        idx = base + np.array(off)
        if np.any(idx < 0) or np.any(idx >= np.array(vox.shape)):
            continue
        node = graph.node_index[tuple(idx)]
        if node < 0:
            continue
        d = float(np.linalg.norm(vox.origin + (idx + 0.5) * vox.h - x))
        key = (d, tuple(idx))
        if best is None or key < best[0]:
            best = (key, int(node))
    if best is None or best[0][0] > SNAP_RADIUS_CELLS * vox.h:
        raise DomainError(f"point {tuple(x)} has no interior voxel within {SNAP_RADIUS_CELLS}h")
    return best[1]


def node_distances(graph, sources):
    return dijkstra(graph.matrix, directed=False, indices=np.atleast_1d(sources))


def d_alpha(graph, x, y):
    """Graph distance between the voxels snapped from ``x`` and ``y`` (+inf if unreachable)."""
    i, j = snap(graph, x), snap(graph, y)
    if i == j:
        return 0.0
    return float(node_distances(graph, i)[0, j])


def d_alpha_many(graph, pairs):
    """Distances for many ``(x, y)`` pairs, grouping Dijkstra runs by source."""
    snapped = [(snap(graph, x), snap(graph, y)) for x, y in pairs]
    sources = sorted({i for i, _ in snapped})
    D = node_distances(graph, sources) if sources else np.zeros((0, graph.n_nodes))
    row = {s: k for k, s in enumerate(sources)}
    return [0.0 if i == j else float(D[row[i], j]) for i, j in snapped]


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass
class CauchyDiagnostic:
    points: list
    increments: list
    partial_sums: list
    estimates: list | None
    ratios: list | None
    verdict: str  # "summable-trend" | "not-summable" | "not-connected" | "inconclusive"
    detail: str = ""


def _geometric_decay(inc):
    v = np.asarray(inc, dtype=float)
    if np.all(v == 0):
        return True
    if v.size < 2 or np.any(v <= 0):
        return False
    return bool(np.all(np.diff(np.log(v)) < 0))


def cauchy_diagnostic(graphs, points, estimates=None, exact_summable=None):
    """Increments ``d_alpha(x_{N-1}, x_N)`` and partial sums.

    ``graphs`` is one graph or one graph per increment.  With closed-form
    ``estimates`` of the increments, the verdict follows the exact
    summability of the estimate series (``exact_summable``) provided the
    measured/estimate ratios stay within a factor 8 of each other;
    otherwise it is the measured decay trend.
    """
    pts = [tuple(float(c) for c in p) for p in points]
    m = len(pts) - 1
    gs = graphs if isinstance(graphs, (list, tuple)) else [graphs] * m
    inc = []
    for k in range(m):
        try:
            inc.append(d_alpha(gs[k], pts[k], pts[k + 1]))
        except DomainError as exc:
            return CauchyDiagnostic(pts, inc, list(np.cumsum(inc)), estimates, None,
                                    "not-connected", str(exc))
    sums = [float(s) for s in np.cumsum(inc)]
    if any(math.isinf(v) for v in inc):
        return CauchyDiagnostic(pts, inc, sums, estimates, None, "not-connected",
                                "consecutive points in different components")
    ratios = None
    if estimates is not None:
        ratios = [a / b if b > 0 else (0.0 if a == 0 else math.inf) for a, b in zip(inc, estimates)]
    if all(v == 0 for v in inc):
        return CauchyDiagnostic(pts, inc, sums, estimates, ratios, "summable-trend", "constant sequence")
    if exact_summable is not None and ratios is not None:
        r = [x for x in ratios if x > 0 and math.isfinite(x)]
        if r and max(r) / min(r) <= 8:
            return CauchyDiagnostic(pts, inc, sums, estimates, ratios,
                                    "summable-trend" if exact_summable else "not-summable",
                                    "measured increments track the closed-form estimate")
    verdict = "summable-trend" if _geometric_decay(inc) else "inconclusive"
    return CauchyDiagnostic(pts, inc, sums, estimates, ratios, verdict, "measured trend only")


def wireframe_step_graph(params, N, x_prev, x_next, alpha, cells_per_radius=3,
                         connectivity=26, budget=None):
    """Local graph for the step ``x_{N-1} -> x_N`` at spacing ``r_N / cells_per_radius``.

    The window is the bounding box of the two points padded by ``r_N + 2h``;
    tubes cut by the window keep their distance field from inside the window
    only (a local approximation, exact on the connecting vertical tube).
    """
    from .geometry import DEFAULT_VOXEL_BUDGET, build_domain

    r = params.radius(N)
    h = r / cells_per_radius
    P = np.array([x_prev, x_next], dtype=float)
    pad = r + 2 * h
    lo, hi = P.min(axis=0) - pad, P.max(axis=0) + pad
    dom = build_domain({"type": "wireframe", "c": params.c, "layers": params.layers,
                        **({} if params.radii is None else {"radii": list(params.radii)})})
    vox = voxelize(dom, h, bbox=(lo, hi), budget=budget or DEFAULT_VOXEL_BUDGET)
    return build_graph(vox, alpha, connectivity)


def wireframe_cauchy(params, p, z=(0.5, 0.5, 2.0), N_max=None, N_min=1, cells_per_radius=3,
                     connectivity=26, budget=None):
    """Cauchy diagnostic for the nearest-grid-point sequence under ``z``."""
    from .wireframe import increment_estimate

    N_max = params.layers if N_max is None else N_max
    alpha = alpha_from_p(p, 3)
    xs = grid_point_sequence(params, z, N_max)
    graphs, est = [], []
    for N in range(N_min, N_max + 1):
        graphs.append(wireframe_step_graph(params, N, xs[N - 1], xs[N], alpha,
                                           cells_per_radius, connectivity, budget))
        est.append(increment_estimate(params, p, N)[0])
    a = 2 * params.c / (p - 1) - 1
    summable = series_converges(a, 4 / (p - 1)) if params.default_schedule else None
    return cauchy_diagnostic(graphs, xs[N_min - 1:], est, summable)


@dataclass
class QuasiconvexityReport:
    max_ratio: float
    ratios: list
    pairs: list
    quantiles: dict


def quasiconvexity_ratio(graph, pairs=None, n_pairs=200, seed=0):
    """Max of geodesic / Euclidean over sample pairs (``alpha = 1`` graph).

    Random pairs are drawn from the largest connected component.
    """
    if graph.alpha != 1.0:
        raise DomainError("quasi-convexity uses the alpha = 1 graph")
    if pairs is None:
        _, labels = connected_components(graph.matrix, directed=False)
        big = np.argmax(np.bincount(labels))
        nodes = np.flatnonzero(labels == big)
        rng = np.random.default_rng(seed)
        pick = rng.choice(nodes, size=(n_pairs, 2))
        pick = pick[pick[:, 0] != pick[:, 1]]
        C = graph.centers()
        pairs = [(C[a], C[b]) for a, b in pick]
    d = d_alpha_many(graph, pairs)
    ratios = []
    for (x, y), dv in zip(pairs, d):
        e = float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float)))
        if e > 0:
            ratios.append(dv / e)
    ratios_arr = np.asarray(ratios)
    q = {f"q{int(k * 100)}": float(np.quantile(ratios_arr, k)) for k in (0.5, 0.9, 0.99)}
    return QuasiconvexityReport(float(ratios_arr.max()), ratios,
                                [(tuple(map(float, x)), tuple(map(float, y))) for x, y in pairs], q)


def halfspace_vertical_fixture(h, height=2.0, lateral=4):
    """Voxelized ``{z > 0}`` column: boundary half-way between voxel rows,
    lateral centers on the axis."""
    from .geometry import build_domain

    dom = build_domain({"type": "halfspace", "normal": [0, 0, -1], "offset": 0})
    lo = np.array([-(lateral + 0.5) * h, -(lateral + 0.5) * h, -2 * h])
    hi = np.array([(lateral + 0.5) * h, (lateral + 0.5) * h, height + 4 * h])
    return dom, voxelize(dom, h, bbox=(lo, hi))


__all__ = [
    "alpha_from_p", "build_graph", "GeodesicGraph", "d_alpha", "d_alpha_many", "snap",
    "cauchy_diagnostic", "CauchyDiagnostic", "wireframe_cauchy", "quasiconvexity_ratio",
    "QuasiconvexityReport", "neighbour_offsets", "halfspace_vertical_fixture", "layer_height",
]
