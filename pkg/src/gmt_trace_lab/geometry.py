"""Implicit CSG domains, voxelization and boundary sampling.

Every node evaluates three vectorized quantities on a point array ``P`` of
shape ``(n, d)``:

* ``value(P)``: a signed function, negative exactly on the (open) set.
  Primitives return their exact signed distance; CSG nodes combine children
  with min / max / negation.
* ``lb(P)``: a conservative lower bound on ``dist(P, boundary)``, exact for
  single primitives.
* ``bbox()``: axis-aligned bounds (``+-inf`` for unbounded sets).

All primitives are open.  ``complement`` is the complement of the closure,
i.e. ``{value_child > 0}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import (
    DegenerateDomainError,
    DomainError,
    ResourceError,
    SceneError,
)

DEFAULT_VOXEL_BUDGET = 2**28


def as_points(P, dim=None):
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = P[None, :]
    if dim is not None and P.shape[1] != dim:
        raise DomainError(f"expected {dim}-dimensional points, got shape {P.shape}")
    return P


# ---------------------------------------------------------------------------
# Nodes
# ---------------------------------------------------------------------------


class Node:
    dim: int

    def value(self, P):
        raise NotImplementedError

    def lb(self, P):
        return np.abs(self.value(P))

    def contains(self, P):
        return self.value(P) < 0.0

    def bbox(self):
        raise NotImplementedError


class Ball(Node):
    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.dim = self.center.size

    def value(self, P):
        return np.linalg.norm(P - self.center, axis=1) - self.radius

    def bbox(self):
        return self.center - self.radius, self.center + self.radius


class Box(Node):
    """Open box ``min < x < max``; a zero-thickness box is empty but its
    closure (used by ``complement``) is the degenerate face."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.dim = self.lo.size
        self._c = (self.lo + self.hi) / 2
        self._half = (self.hi - self.lo) / 2

    def value(self, P):
        q = np.abs(P - self._c) - self._half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        return outside + np.minimum(q.max(axis=1), 0.0)

    def bbox(self):
        return self.lo.copy(), self.hi.copy()


def segment_distance(P, a, b):
    """Euclidean distance from each row of ``P`` to the closed segment [a, b]."""
    ab = b - a
    L2 = float(ab @ ab)
    if L2 == 0.0:
        return np.linalg.norm(P - a, axis=1)
    t = np.clip((P - a) @ ab / L2, 0.0, 1.0)
    return np.linalg.norm(P - (a + t[:, None] * ab), axis=1)


class Capsule(Node):
    def __init__(self, a, b, radius):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.radius = float(radius)
        self.dim = self.a.size

    def value(self, P):
        return segment_distance(P, self.a, self.b) - self.radius

    def bbox(self):
        return (np.minimum(self.a, self.b) - self.radius,
                np.maximum(self.a, self.b) + self.radius)


class HalfSpace(Node):
    """``{x : normal . x < offset}`` with the normal rescaled to unit length."""

    def __init__(self, normal, offset):
        n = np.asarray(normal, dtype=float)
        norm = np.linalg.norm(n)
        self.normal = n / norm
        self.offset = float(offset) / norm
        self.dim = n.size

    def value(self, P):
        return P @ self.normal - self.offset

    def bbox(self):
        lo = np.full(self.dim, -np.inf)
        hi = np.full(self.dim, np.inf)
        # axis-aligned half-spaces have one finite face
        axes = np.flatnonzero(self.normal)
        if axes.size == 1:
            i = axes[0]
            if self.normal[i] > 0:
                hi[i] = self.offset / self.normal[i]
            else:
                lo[i] = self.offset / self.normal[i]
        return lo, hi


class Union(Node):
    def __init__(self, children):
        self.children = list(children)
        self.dim = self.children[0].dim

    def value(self, P):
        return np.min([c.value(P) for c in self.children], axis=0)

    def lb(self, P):
        vals = np.array([c.value(P) for c in self.children])
        lbs = np.array([c.lb(P) for c in self.children])
        inside = vals < 0
        any_in = inside.any(axis=0)
        # inside: min over children containing P; outside: min over all
        lb_in = np.where(inside, lbs, np.inf).min(axis=0)
        return np.where(any_in, lb_in, lbs.min(axis=0))

    def bbox(self):
        boxes = [c.bbox() for c in self.children]
        return (np.min([b[0] for b in boxes], axis=0),
                np.max([b[1] for b in boxes], axis=0))


class Intersection(Node):
    def __init__(self, children):
        self.children = list(children)
        self.dim = self.children[0].dim

    def value(self, P):
        return np.max([c.value(P) for c in self.children], axis=0)

    def lb(self, P):
        vals = np.array([c.value(P) for c in self.children])
        lbs = np.array([c.lb(P) for c in self.children])
        outside = vals >= 0
        any_out = outside.any(axis=0)
        # outside: min over children excluding P; inside: min over all
        lb_out = np.where(outside, lbs, np.inf).min(axis=0)
        return np.where(any_out, lb_out, lbs.min(axis=0))

    def bbox(self):
        boxes = [c.bbox() for c in self.children]
        return (np.max([b[0] for b in boxes], axis=0),
                np.min([b[1] for b in boxes], axis=0))


class Complement(Node):
    def __init__(self, child):
        self.child = child
        self.dim = child.dim

    def value(self, P):
        return -self.child.value(P)

    def lb(self, P):
        return self.child.lb(P)

    def bbox(self):
        return np.full(self.dim, -np.inf), np.full(self.dim, np.inf)


# ---------------------------------------------------------------------------
# Domain wrapper and scene parsing
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ImplicitDomain:
    root: Node
    description: dict | None = field(default=None, repr=False)

    @property
    def dim(self):
        return self.root.dim

    @property
    def bbox(self):
        lo, hi = self.root.bbox()
        return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)

    def contains(self, P):
        return self.root.contains(as_points(P, self.dim))

    def value(self, P):
        return self.root.value(as_points(P, self.dim))

    def dist_lb(self, P):
        return self.root.lb(as_points(P, self.dim))

    def dist_to_boundary(self, x):
        """Conservative distance from an interior point to the boundary."""
        x = as_points(x, self.dim)
        if not self.contains(x).all():
            raise DomainError(f"point {x.tolist()} is not in the domain")
        d = self.dist_lb(x)
        return float(d[0]) if d.size == 1 else d


def _vec(node, key, path, dim=None):
    if key not in node:
        raise SceneError(f"{path}.{key}", "missing field")
    try:
        v = np.asarray(node[key], dtype=float)
    except (TypeError, ValueError):
        raise SceneError(f"{path}.{key}", "expected a numeric array") from None
    if v.ndim != 1 or v.size not in (2, 3):
        raise SceneError(f"{path}.{key}", "expected a 2- or 3-vector")
    if dim is not None and v.size != dim:
        raise SceneError(f"{path}.{key}", f"dimension {v.size} != {dim}")
    if not np.all(np.isfinite(v)):
        raise SceneError(f"{path}.{key}", "non-finite coordinate")
    return v


def _num(node, key, path, positive=False):
    if key not in node:
        raise SceneError(f"{path}.{key}", "missing field")
    v = node[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise SceneError(f"{path}.{key}", "expected a finite number")
    if positive and v <= 0:
        raise SceneError(f"{path}.{key}", "must be > 0")
    return float(v)


def parse_node(node, path="$"):
    if not isinstance(node, dict):
        raise SceneError(path, "node must be an object")
    kind = node.get("type")
    if kind == "ball":
        return Ball(_vec(node, "center", path), _num(node, "radius", path, positive=True))
    if kind == "box":
        lo = _vec(node, "min", path)
        hi = _vec(node, "max", path, dim=lo.size)
        if np.any(lo > hi):
            raise SceneError(path, "box corners not ordered (min > max)")
        return Box(lo, hi)
    if kind == "capsule":
        a = _vec(node, "a", path)
        return Capsule(a, _vec(node, "b", path, dim=a.size),
                       _num(node, "radius", path, positive=True))
    if kind == "halfspace":
        n = _vec(node, "normal", path)
        if np.linalg.norm(n) == 0:
            raise SceneError(f"{path}.normal", "zero normal")
        return HalfSpace(n, _num(node, "offset", path))
    if kind in ("union", "intersection"):
        kids = node.get("children")
        if not isinstance(kids, list) or not kids:
            raise SceneError(f"{path}.children", "expected a non-empty list")
        parsed = [parse_node(k, f"{path}.children[{i}]") for i, k in enumerate(kids)]
        dims = {c.dim for c in parsed}
        if len(dims) != 1:
            raise SceneError(f"{path}.children", f"mixed dimensions {sorted(dims)}")
        return Union(parsed) if kind == "union" else Intersection(parsed)
    if kind == "complement":
        return Complement(parse_node(node.get("child"), f"{path}.child"))
    if kind == "wireframe":
        from .wireframe import WireframeNode, WireframeParams

        c = _num(node, "c", path)
        layers = node.get("layers")
        if not isinstance(layers, int) or isinstance(layers, bool) or layers < 1:
            raise SceneError(f"{path}.layers", "expected an integer >= 1")
        radii = node.get("radii")
        try:
            params = WireframeParams(c=c, layers=layers,
                                     radii=None if radii is None else tuple(radii))
            return WireframeNode(params)
        except (ValueError, TypeError) as exc:
            raise SceneError(path, str(exc)) from None
    if kind == "forest":
        from .planar import ForestNode

        cols = node.get("columns")
        if not isinstance(cols, int) or isinstance(cols, bool) or cols < 1:
            raise SceneError(f"{path}.columns", "expected an integer >= 1")
        try:
            return ForestNode(cols, _num(node, "ratio", path, positive=True))
        except ValueError as exc:
            raise SceneError(path, str(exc)) from None
    raise SceneError(f"{path}.type", f"unknown node type {kind!r}")


def build_domain(scene):
    """Build an :class:`ImplicitDomain` from a scene dict, JSON string or path.

    A scene is either a node or ``{"domain": node, ...}``.
    """
    if isinstance(scene, Path) or (isinstance(scene, str) and not scene.lstrip().startswith("{")):
        p = Path(scene)
        if not p.exists():
            raise FileNotFoundError(f"scene file not found: {p}")
        scene = json.loads(p.read_text())
    elif isinstance(scene, str):
        scene = json.loads(scene)
    root_desc = scene.get("domain", scene) if isinstance(scene, dict) else scene
    root = parse_node(root_desc, "$.domain" if root_desc is not scene else "$")
    if root.dim not in (2, 3):
        raise SceneError("$", f"dimension {root.dim} not in {{2, 3}}")
    lo, hi = root.bbox()
    if np.any(np.asarray(lo) >= np.asarray(hi)):
        raise DegenerateDomainError(f"bounding box collapses: lo={list(lo)}, hi={list(hi)}")
    return ImplicitDomain(root, root_desc)


# ---------------------------------------------------------------------------
# Voxelization
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class VoxelDomain:
    """Occupancy grid with voxel centers at ``origin + (i + 1/2) h``.

    ``distance`` holds, on occupied voxels, the Euclidean distance transform
    of the occupancy minus ``h/2`` (the boundary sits on average halfway
    between the last interior and first exterior center), so interior values
    are always ``>= h/2``.  It is zero on exterior voxels.
    """

    h: float
    origin: np.ndarray
    occupancy: np.ndarray
    distance: np.ndarray

    @property
    def dim(self):
        return self.occupancy.ndim

    @property
    def shape(self):
        return self.occupancy.shape

    @property
    def interior_count(self):
        return int(self.occupancy.sum())

    def volume(self):
        return self.interior_count * self.h**self.dim

    def centers(self, idx=None):
        """Centers of the given index array ``(n, d)``, or of all occupied voxels."""
        if idx is None:
            idx = np.argwhere(self.occupancy)
        return self.origin + (np.asarray(idx) + 0.5) * self.h

    def grid_axes(self):
        return [self.origin[i] + (np.arange(n) + 0.5) * self.h for i, n in enumerate(self.shape)]

    def index_of(self, x):
        """Nearest voxel index to each point (ties go to the lower index)."""
        x = as_points(x, self.dim)
        k = (x - self.origin) / self.h - 0.5
        idx = np.ceil(k - 0.5).astype(np.int64)
        return np.clip(idx, 0, np.array(self.shape) - 1)

    @classmethod
    def from_occupancy(cls, occupancy, h, origin=None):
        occ = np.ascontiguousarray(occupancy, dtype=bool)
        origin = np.zeros(occ.ndim) if origin is None else np.asarray(origin, dtype=float)
        return cls(float(h), origin, occ, _distance_field(occ, h))


def _distance_field(occ, h, fallback=None):
    dist = np.zeros(occ.shape)
    if not occ.any():
        return dist
    if (~occ).any():
        edt = ndimage.distance_transform_edt(occ, sampling=h)
        dist[occ] = edt[occ] - h / 2
    elif fallback is not None:
        dist[occ] = np.maximum(fallback(), h / 2)
    else:
        dist[occ] = np.inf
    return dist


def voxel_grid_shape(lo, hi, h):
    return tuple(max(1, int(math.ceil((b - a) / h - 1e-9))) for a, b in zip(lo, hi))


def voxelize(domain, h, bbox=None, budget=DEFAULT_VOXEL_BUDGET, anchor=None):
    """Sample ``domain`` on a grid of spacing ``h``.

    ``bbox`` defaults to the domain bounding box padded by ``2h``; it must be
    finite.  With the default bbox, an ``anchor`` point is made a voxel
    center by lowering ``lo`` by less than ``h`` (zero-thickness features
    such as slits are only seen by centers lying on them).  The voxel count
    is checked against ``budget`` before allocation.
    """
    if not h > 0:
        raise DomainError("voxel spacing h must be > 0")
    if bbox is None:
        lo, hi = domain.bbox
        lo, hi = lo - 2 * h, hi + 2 * h
        if anchor is not None:
            a = np.asarray(anchor, dtype=float)
            k = np.ceil((a - lo) / h - 0.5)
            lo = np.where(np.isfinite(lo), a - (k + 0.5) * h, lo)
    else:
        lo, hi = (np.asarray(b, dtype=float) for b in bbox)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise DomainError("unbounded domain: pass an explicit finite bbox")
    shape = voxel_grid_shape(lo, hi, h)
    count = math.prod(shape)
    if count > budget:
        raise ResourceError(f"voxel count {count} exceeds budget {budget}")
    occ = np.empty(shape, dtype=bool)
    axes = [lo[i] + (np.arange(n) + 0.5) * h for i, n in enumerate(shape)]
    # slab-by-slab along axis 0 bounds peak memory
    rest = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(-1, len(shape) - 1)
    slab = max(1, 2_000_000 // max(1, rest.shape[0]))
    for s in range(0, shape[0], slab):
        xs = axes[0][s:s + slab]
        P = np.concatenate([np.repeat(xs, rest.shape[0])[:, None],
                            np.tile(rest, (xs.size, 1))], axis=1)
        occ[s:s + slab] = domain.contains(P).reshape((xs.size,) + shape[1:])

    def fallback():
        return domain.dist_lb(lo + (np.argwhere(occ) + 0.5) * h)

    return VoxelDomain(float(h), lo, occ, _distance_field(occ, h, fallback))


# ---------------------------------------------------------------------------
# Boundary samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundarySample:
    point: tuple
    source: str  # "analytic" | "voxel-face"
    normal: tuple | None = None


def numeric_gradient(domain, P, step=None):
    P = as_points(P, domain.dim)
    step = step if step is not None else 1e-7 * max(1.0, float(np.abs(P).max()))
    g = np.empty_like(P)
    for i in range(domain.dim):
        e = np.zeros(domain.dim)
        e[i] = step
        g[:, i] = (domain.value(P + e) - domain.value(P - e)) / (2 * step)
    return g


def project_to_boundary(domain, P, iters=12, tol=1e-10):
    """Newton-project points onto the zero set of ``domain.value``.

    Returns ``(points, ok)``; ``ok`` marks points that converged and lie
    outside the (open) domain.
    """
    P = as_points(P, domain.dim).copy()
    scale = 1 + np.abs(P).max(axis=1)
    for _ in range(iters):
        v = domain.value(P)
        active = np.abs(v) > tol * scale
        if not active.any():
            break
        g = numeric_gradient(domain, P[active])
        gn = np.linalg.norm(g, axis=1)
        # value functions are distance-like (|grad| = 1 a.e.); a vanishing
        # numeric gradient means a kink, where a unit step is the safe choice
        gn = np.where(gn < 0.5, np.where(gn == 0, np.inf, gn), gn**2)
        P[active] -= (v[active] / gn)[:, None] * g
    v = domain.value(P)
    # nudge points that landed a rounding error inside the open set; steps
    # are kept only if they raise the value (at a slit both sides are inside)
    for _ in range(40):
        inside = np.flatnonzero(v < 0)
        if inside.size == 0:
            break
        g = numeric_gradient(domain, P[inside])
        gn = np.linalg.norm(g, axis=1)
        gn[gn == 0] = 1.0
        step = (np.abs(v[inside]) + 1e-13 * scale[inside]) * 2
        Q = P[inside] + step[:, None] * g / gn[:, None]
        vq = domain.value(Q)
        better = vq > v[inside]
        if not better.any():
            break
        P[inside[better]] = Q[better]
        v[inside[better]] = vq[better]
    ok = (np.abs(v) < tol * (1 + np.abs(P).max(axis=1))) & (v >= 0)
    return P, ok


def boundary_samples(domain, h, n, seed=0, bbox=None, budget=DEFAULT_VOXEL_BUDGET, anchor=None):
    """Draw ``n`` boundary points from interior/exterior voxel faces.

    Face centroids are chosen uniformly (seeded) and Newton-projected onto the
    boundary; points that fail to project are discarded and redrawn.
    """
    vox = voxelize(domain, h, bbox=bbox, budget=budget, anchor=anchor)
    occ = vox.occupancy
    faces, normals = [], []
    for ax in range(vox.dim):
        lo_sl = [slice(None)] * vox.dim
        hi_sl = [slice(None)] * vox.dim
        lo_sl[ax] = slice(0, -1)
        hi_sl[ax] = slice(1, None)
        lower = occ[tuple(lo_sl)]
        idx = np.argwhere(lower != occ[tuple(hi_sl)])
        if idx.size == 0:
            continue
        pts = vox.origin + (idx + 0.5) * vox.h
        pts[:, ax] += 0.5 * vox.h
        nrm = np.zeros((idx.shape[0], vox.dim))
        nrm[:, ax] = np.where(lower[tuple(idx.T)], 1.0, -1.0)
        faces.append(pts)
        normals.append(nrm)
    if not faces:
        return []
    faces = np.concatenate(faces)
    normals = np.concatenate(normals)
    rng = np.random.default_rng(seed)
    order = rng.permutation(faces.shape[0])
    out = []
    start = 0
    while len(out) < n and start < order.size:
        take = order[start:start + 2 * (n - len(out)) + 8]
        start += take.size
        P, ok = project_to_boundary(domain, faces[take])
        for p, good, nr in zip(P, ok, normals[take]):
            if good and len(out) < n:
                out.append(BoundarySample(tuple(float(c) for c in p), "voxel-face",
                                          tuple(float(c) for c in nr)))
    return out
