"""Lebesgue density, measure-theoretic boundary and boundary-measure estimators.

Volume fractions ``|A n B(z,r)| / |B(z,r)|`` are estimated with a jittered
(stratified) sample of the unit ball that depends only on
``(dimension, sample count, seed, radius index)``.  Every set queried at the
same point therefore sees the same sample, so set inclusion and
complementation carry over exactly to the estimates.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree
from skimage import measure as skmeasure

from .errors import DomainError, ResolutionError, ScaleError
from .geometry import as_points

DEFAULT_TOLERANCE = 0.02
DEFAULT_TAIL = 4
MTB_BAND = (0.05, 0.95)
DEFAULT_RADII = tuple(2.0 ** (-j) for j in range(1, 11))


def dyadic_radii(j_min, j_max, scale=1.0):
    return tuple(scale * 2.0 ** (-j) for j in range(j_min, j_max + 1))


@lru_cache(maxsize=32)
def unit_ball_sample(d, n, seed, index):
    """Jittered-grid sample of the unit ball, mapped volume-preservingly.

    The cube ``[0,1]^d`` is split into ``m^d`` cells (``m = round(n^(1/d))``),
    one uniform point per cell, then mapped by radius ``u^(1/d)`` and
    area-preserving spherical coordinates.
    """
    m = max(1, int(round(n ** (1.0 / d))))
    rng = np.random.default_rng(np.random.SeedSequence([seed, d, n, index]))
    cells = np.indices((m,) * d).reshape(d, -1).T
    U = (cells + rng.random(cells.shape)) / m
    rho = U[:, 0] ** (1.0 / d)
    if d == 2:
        th = 2 * np.pi * U[:, 1]
        X = np.stack([np.cos(th), np.sin(th)], axis=1)
    elif d == 3:
        cz = 1.0 - 2.0 * U[:, 1]
        sz = np.sqrt(np.maximum(0.0, 1.0 - cz**2))
        th = 2 * np.pi * U[:, 2]
        X = np.stack([sz * np.cos(th), sz * np.sin(th), cz], axis=1)
    else:
        raise DomainError(f"dimension {d} not supported")
    X *= rho[:, None]
    X.setflags(write=False)
    return X


@dataclass
class DensityReport:
    point: tuple
    radii: list
    fractions: list
    std_errors: list
    upper: float
    lower: float
    verdict: str  # "converged" | "oscillating" | "inconclusive"
    limit: float | None
    tolerance: float
    n_samples: int
    seed: int

    @property
    def finest(self):
        return self.fractions[-1]

    def tail(self, k=DEFAULT_TAIL):
        return self.fractions[-k:]

    @property
    def verdict_text(self):
        return f"converged-to {self.limit:.4g}" if self.verdict == "converged" else self.verdict


def _check_radii(radii, z):
    r = np.asarray(radii, dtype=float)
    if r.ndim != 1 or r.size == 0 or np.any(r <= 0) or np.any(np.diff(r) >= 0):
        raise DomainError("radii must be positive and strictly decreasing")
    floor = 10 * np.finfo(float).eps * float(np.linalg.norm(z))
    if r[-1] <= floor:
        raise ScaleError(f"radius {r[-1]:.3g} below resolvable scale {floor:.3g} at |z|")
    return r


def volume_fractions(domain, z, radii, n_samples=10_000, seed=0):
    """Per-radius volume fractions and iid-bound standard errors."""
    z = as_points(z, domain.dim)[0]
    r = _check_radii(radii, z)
    if n_samples < 1000:
        raise DomainError("need at least 1000 samples per radius")
    fr, se = [], []
    for j, rj in enumerate(r):
        X = unit_ball_sample(domain.dim, n_samples, seed, j)
        f = float(np.count_nonzero(domain.contains(z + rj * X))) / X.shape[0]
        fr.append(f)
        # binomial standard error: an upper bound for the stratified estimator
        se.append(math.sqrt(max(f * (1 - f), 0.25 / X.shape[0]) / X.shape[0]))
    return z, r, fr, se


def _verdict(fr, se, tolerance, tail):
    t = np.asarray(fr[-tail:])
    if t.size and t.max() - t.min() < tolerance:
        return "converged", float(t.mean())
    d = np.diff(t)
    big = np.abs(d) > 2 * np.asarray(se[-tail:])[1:] + 1e-12
    signs = np.sign(d[big])
    if signs.size >= 2 and np.any(signs[1:] != signs[:-1]):
        return "oscillating", None
    return "inconclusive", None


def density_at(domain, z, radii=DEFAULT_RADII, n_samples=10_000, seed=0,
               tolerance=DEFAULT_TOLERANCE, tail=DEFAULT_TAIL):
    """Multiscale density report of ``domain`` at ``z``.

    ``domain`` is anything with ``dim`` and a vectorized ``contains``.
    Upper/lower estimates are the max/min over the ``tail`` finest radii.
    """
    z, r, fr, se = volume_fractions(domain, z, radii, n_samples, seed)
    t = fr[-tail:]
    verdict, limit = _verdict(fr, se, tolerance, tail)
    return DensityReport(
        point=tuple(float(v) for v in z), radii=[float(v) for v in r], fractions=fr,
        std_errors=se, upper=float(max(t)), lower=float(min(t)), verdict=verdict,
        limit=limit, tolerance=tolerance, n_samples=int(unit_ball_sample(domain.dim, n_samples, seed, 0).shape[0]),
        seed=seed)


class CellSet:
    """Union of grid cells ``origin + h * (idx + [0,1]^d)`` where ``mask`` is set."""

    def __init__(self, mask, h, origin=None):
        self.mask = np.asarray(mask, dtype=bool)
        self.h = float(h)
        self.dim = self.mask.ndim
        self.origin = np.zeros(self.dim) if origin is None else np.asarray(origin, dtype=float)

    def contains(self, P):
        P = as_points(P, self.dim)
        idx = np.floor((P - self.origin) / self.h).astype(np.int64)
        ok = np.all((idx >= 0) & (idx < np.array(self.mask.shape)), axis=1)
        out = np.zeros(P.shape[0], dtype=bool)
        out[ok] = self.mask[tuple(idx[ok].T)]
        return out


@dataclass
class MtbResult:
    status: str  # "member" | "non-member" | "indeterminate"
    report: DensityReport

    @property
    def member(self):
        return {"member": True, "non-member": False}.get(self.status)


def mtb_decision(tail_fractions, band=MTB_BAND):
    t = np.asarray(tail_fractions)
    lo, hi = band
    if np.all((t >= lo) & (t <= hi)):
        return "member"
    if np.all(t < lo) or np.all(t > hi):
        return "non-member"
    return "indeterminate"


def mtb_membership(domain, z, radii=DEFAULT_RADII, band=MTB_BAND, n_samples=10_000,
                   seed=0, tail=DEFAULT_TAIL):
    """Is ``z`` in the measure-theoretic boundary (density neither 0 nor 1)?"""
    rep = density_at(domain, z, radii, n_samples, seed, tail=tail)
    return MtbResult(mtb_decision(rep.tail(tail), band), rep)


# ---------------------------------------------------------------------------
# Boundary classification
# ---------------------------------------------------------------------------

LABELS = ("density-0", "density-1/2", "density-1", "measure-theoretic-boundary-other", "inconclusive")


def label_report(rep, tolerance=DEFAULT_TOLERANCE, band=MTB_BAND, tail=DEFAULT_TAIL):
    t = np.asarray(rep.tail(tail))
    if rep.verdict == "converged":
        for value, name in ((0.0, "density-0"), (0.5, "density-1/2"), (1.0, "density-1")):
            if np.all(np.abs(t - value) < tolerance):
                return name
    if np.all((t >= band[0]) & (t <= band[1])):
        return "measure-theoretic-boundary-other"
    return "inconclusive"


@dataclass
class BoundaryClassification:
    points: list
    labels: list
    finest: list
    tolerance: float
    histogram: list
    bin_edges: list
    reports: list = field(default_factory=list, repr=False)

    def fractions(self):
        n = max(1, len(self.labels))
        return {lab: self.labels.count(lab) / n for lab in LABELS}


def _ordered_map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def _sample_point(s):
    return getattr(s, "point", s)


def classify_boundary(domain, samples, radii=DEFAULT_RADII, tolerance=DEFAULT_TOLERANCE,
                      n_samples=10_000, seed=0, bins=20, workers=1):
    """Label each boundary sample by its density class."""
    pts = [tuple(float(c) for c in _sample_point(s)) for s in samples]
    reps = _ordered_map(lambda p: density_at(domain, p, radii, n_samples, seed, tolerance),
                        pts, workers)
    labels = [label_report(r, tolerance) for r in reps]
    finest = [r.finest for r in reps]
    hist, edges = np.histogram(finest, bins=bins, range=(0.0, 1.0))
    return BoundaryClassification(pts, labels, finest, tolerance, hist.tolist(),
                                  edges.tolist(), reps)


# ---------------------------------------------------------------------------
# Perimeter
# ---------------------------------------------------------------------------


@dataclass
class PerimeterEstimate:
    face_count: float
    normal_corrected: float
    empty: bool = False


DEFAULT_SIGMA = 1.0
SIGN_MARGIN = 0.01


def smoothed_occupancy(vox, sigma=DEFAULT_SIGMA):
    """Occupancy blurred by a Gaussian of ``sigma`` voxels, level 0.5 = boundary.

    The blurred field is clamped to agree in sign with the raw occupancy at
    every voxel (interior >= 0.5 + margin, exterior <= 0.5 - margin), so the
    0.5-level set keeps the occupancy topology -- one-voxel slits survive --
    while its position between voxel centers comes from the smooth field.
    """
    occ = vox.occupancy
    f = ndimage.gaussian_filter(occ.astype(np.float64), sigma, mode="nearest")
    return np.where(occ, np.maximum(f, 0.5 + SIGN_MARGIN), np.minimum(f, 0.5 - SIGN_MARGIN))


def contour_polylines(field, level=0.5):
    """Marching-squares contours; saddles connect the high values."""
    return skmeasure.find_contours(field, level, fully_connected="high")


def _window_slices(vox, window):
    if window is None:
        return tuple(slice(0, n) for n in vox.shape)
    lo, hi = (np.asarray(w, dtype=float) for w in window)
    a = np.ceil((lo - vox.origin) / vox.h - 0.5).astype(int)
    b = np.floor((hi - vox.origin) / vox.h - 0.5).astype(int) + 1
    a = np.clip(a, 0, vox.shape)
    b = np.clip(b, 0, vox.shape)
    return tuple(slice(int(i), int(j)) for i, j in zip(a, b))


def perimeter_estimate(vox, window=None, sigma=DEFAULT_SIGMA):
    """Face-count and normal-corrected (marching squares/cubes) perimeter.

    The face count weights every interior/exterior voxel face by
    ``h^(d-1)`` and so measures ``int sum_i |n_i|`` (Manhattan bias); the
    normal-corrected value is the area of the 0.5-level set of the smoothed
    occupancy and converges to the true perimeter for smooth boundaries.
    """
    sl = _window_slices(vox, window)
    occ = vox.occupancy[sl]
    if occ.size == 0:
        return PerimeterEstimate(0.0, 0.0, empty=True)
    faces = 0
    for ax in range(vox.dim):
        a = [slice(None)] * vox.dim
        b = [slice(None)] * vox.dim
        a[ax], b[ax] = slice(0, -1), slice(1, None)
        faces += int(np.count_nonzero(occ[tuple(a)] != occ[tuple(b)]))
    face_count = faces * vox.h ** (vox.dim - 1)
    field_ = smoothed_occupancy(vox, sigma)[sl]
    if min(field_.shape) < 2 or field_.min() >= 0.5 or field_.max() <= 0.5:
        return PerimeterEstimate(face_count, 0.0, empty=False)
    if vox.dim == 2:
        length = sum(float(np.linalg.norm(np.diff(c, axis=0), axis=1).sum())
                     for c in contour_polylines(field_))
        corrected = length * vox.h
    else:
        verts, faces_, _, _ = skmeasure.marching_cubes(field_, 0.5, spacing=(vox.h,) * 3)
        corrected = float(skmeasure.mesh_surface_area(verts, faces_))
    return PerimeterEstimate(face_count, corrected)


# ---------------------------------------------------------------------------
# Hausdorff measure of codimension-one sets
# ---------------------------------------------------------------------------

UNIT_BALL_VOLUME = {0: 1.0, 1: 2.0, 2: math.pi, 3: 4 * math.pi / 3}


def densify_polyline(vertices, step, closed=False):
    V = np.asarray(vertices, dtype=float)
    if closed:
        V = np.vstack([V, V[:1]])
    out = []
    for a, b in zip(V[:-1], V[1:]):
        k = max(1, int(math.ceil(np.linalg.norm(b - a) / step)))
        t = np.arange(k)[:, None] / k
        out.append(a + t * (b - a))
    out.append(V[-1:])
    return np.vstack(out)


@dataclass
class HausdorffEstimate:
    eps: list
    covering_numbers: list
    box_sums: list
    omega_normalized: list
    minkowski: list
    value: float
    resolution: float


def sampling_resolution(P):
    if P.shape[0] < 2:
        return math.inf
    d, _ = cKDTree(P).query(P, k=2)
    return float(d[:, 1].max())


def _tube_volume(tree, P, rho, sub):
    d = P.shape[1]
    keys = np.unique(np.floor(P / rho).astype(np.int64), axis=0)
    offs = np.indices((3,) * d).reshape(d, -1).T - 1
    cand = np.unique((keys[:, None, :] + offs[None]).reshape(-1, d), axis=0)
    fine = (np.indices((sub,) * d).reshape(d, -1).T + 0.5) / sub
    s = rho / sub
    count = 0
    chunk = max(1, 400_000 // fine.shape[0])
    for i in range(0, cand.shape[0], chunk):
        centers = ((cand[i:i + chunk, None, :] + fine[None]) * rho).reshape(-1, d)
        dist, _ = tree.query(centers, distance_upper_bound=rho)
        count += int(np.count_nonzero(dist < rho))
    return count * s**d


def hausdorff_estimate(geometry, eps, closed=False):
    """(d-1)-dimensional measure of a point cloud or list of polylines.

    For each scale ``eps`` this reports the grid box-covering number
    ``N(eps)``, the raw sum ``N eps^(d-1)``, the ball-normalized sum
    ``N omega_(d-1) (eps/2)^(d-1)`` and the Minkowski value
    ``|{dist < eps/2}| / eps`` (tube volume measured by a fine box cover).
    The box sums carry an orientation bias; ``value`` is the Minkowski
    content, linearly extrapolated to ``eps -> 0`` when several scales are
    given.
    """
    eps_list = [float(e) for e in np.atleast_1d(eps)]
    if isinstance(geometry, (list, tuple)) and geometry and np.asarray(geometry[0]).ndim == 2:
        step = min(eps_list) / 16
        P = np.vstack([densify_polyline(v, step, closed) for v in geometry])
    else:
        P = np.asarray(geometry, dtype=float)
    d = P.shape[1]
    res = sampling_resolution(P)
    if min(eps_list) < 2 * res:
        raise ResolutionError(f"eps={min(eps_list):.3g} < 2 x sampling resolution {res:.3g}")
    tree = cKDTree(P)
    sub = 8 if d == 2 else 4
    Ns, box, omega, mink = [], [], [], []
    for e in eps_list:
        N = int(np.unique(np.floor(P / e).astype(np.int64), axis=0).shape[0])
        Ns.append(N)
        box.append(N * e ** (d - 1))
        omega.append(N * UNIT_BALL_VOLUME[d - 1] * (e / 2) ** (d - 1))
        mink.append(_tube_volume(tree, P, e / 2, sub) / e)
    if len(eps_list) >= 2:
        value = float(np.polyfit(eps_list, mink, 1)[1])
    else:
        value = mink[0]
    return HausdorffEstimate(eps_list, Ns, box, omega, mink, value, res)


# ---------------------------------------------------------------------------
# Rough trace
# ---------------------------------------------------------------------------


@dataclass
class RoughTraceReport:
    point: tuple
    thresholds: list
    membership: list  # True / False / None (indeterminate) per threshold
    value: float | None
    bracket: tuple | None
    band: tuple | None


def default_thresholds(values, levels=32):
    lo, hi = float(np.min(values)), float(np.max(values))
    spread = hi - lo
    delta = spread / (levels - 1) if spread > 0 else 0.05 * max(1.0, abs(hi))
    return list(np.linspace(lo - delta, hi + delta, levels))


def grid_cell_radii(h, n=6):
    """Radii below half a cell, where cell unions have scale-free densities."""
    return tuple(h * 2.0 ** (-j - 1) for j in range(1, n + 1))


def rough_trace(u, z, thresholds=None, levels=32, radii=None, band=MTB_BAND,
                n_samples=4096, seed=0):
    """Grid supremum of ``t`` with ``z`` in the measure-theoretic boundary of ``[u > t]``.

    ``u`` is a grid function (``values`` on the interior voxels of
    ``u.domain``): each superlevel set is the union of its cells.
    """
    vox = u.domain
    vals = np.asarray(u.values, dtype=float)
    inside = vals[vox.occupancy]
    if not np.all(np.isfinite(inside)):
        raise DomainError("u must be finite on the domain")
    if thresholds is None:
        thresholds = default_thresholds(inside, levels)
    thresholds = sorted(float(t) for t in thresholds)
    if thresholds[0] >= inside.min() or thresholds[-1] < inside.max():
        raise DomainError("thresholds must cover [min u - delta, max u + delta]")
    radii = grid_cell_radii(vox.h) if radii is None else radii
    members = []
    cache = {}
    for t in thresholds:
        mask = vox.occupancy & (vals > t)
        key = mask.tobytes()
        if key not in cache:
            res = mtb_membership(CellSet(mask, vox.h, vox.origin), z, radii, band, n_samples, seed)
            cache[key] = res.member
        members.append(cache[key])
    return _sup_report(z, thresholds, members)


def _sup_report(z, thresholds, members):
    z = tuple(float(c) for c in np.atleast_1d(z))
    hits = [i for i, m in enumerate(members) if m is True]
    unknown = [i for i, m in enumerate(members) if m is None]
    top = hits[-1] if hits else None
    above = [i for i in unknown if top is None or i > top]
    if above:
        lo = thresholds[top] if top is not None else None
        return RoughTraceReport(z, thresholds, members, None, None, (lo, thresholds[above[-1]]))
    if top is None:
        return RoughTraceReport(z, thresholds, members, None, None, None)
    nxt = thresholds[top + 1] if top + 1 < len(thresholds) else math.inf
    return RoughTraceReport(z, thresholds, members, thresholds[top], (thresholds[top], nxt), None)
