"""Grid functions, discrete W^{1,p} norms and nonuniqueness witness sequences.

Norm convention: ``||u||_{1,p}^p = ||u||_p^p + ||grad u||_p^p`` with
``|grad u|`` the Euclidean norm of the discrete gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError, ResolutionError, UnsupportedOperationError
from .geometry import DEFAULT_VOXEL_BUDGET, ImplicitDomain, as_points, voxelize
from .wireframe import (
    TOP_HEIGHT,
    WireframeNode,
    WireframeParams,
    default_radius,
    layer_height,
    nonuniqueness_criterion,
    vertical_distance,
    wire_length,
)


@dataclass(eq=False)
class GridFunction:
    """Values on the interior voxels of ``domain`` (zero elsewhere).

    ``closed_form`` maps ``(n, d)`` points to values; when present the stored
    values are its evaluation at the voxel centers.
    """

    domain: object
    values: np.ndarray | None
    closed_form: object = None
    description: str = ""

    @classmethod
    def from_function(cls, vox, f, description=""):
        vals = np.zeros(vox.shape)
        occ = vox.occupancy
        if occ.any():
            vals[occ] = np.asarray(f(vox.centers(np.argwhere(occ))), dtype=float)
        if not np.all(np.isfinite(vals[occ])):
            raise DomainError("grid function values must be finite")
        return cls(vox, vals, f, description)

    @classmethod
    def from_values(cls, vox, values, description=""):
        vals = np.where(vox.occupancy, np.asarray(values, dtype=float), 0.0)
        if not np.all(np.isfinite(vals)):
            raise DomainError("grid function values must be finite")
        return cls(vox, vals, None, description)

    def evaluate(self, P):
        if self.closed_form is None:
            raise UnsupportedOperationError("no closed form attached: traces of raw grid data are ill-posed")
        return np.asarray(self.closed_form(as_points(P)), dtype=float)

    def scaled(self, lam):
        cf = None if self.closed_form is None else (lambda P, f=self.closed_form: lam * f(P))
        return GridFunction(self.domain, None if self.values is None else lam * self.values, cf,
                            self.description)

    def interior_values(self):
        return self.values[self.domain.occupancy]


@dataclass
class GradientField:
    components: np.ndarray  # shape (*grid, d), zero outside the domain
    isolated: np.ndarray  # voxels with no interior neighbour on any axis

    def magnitude(self):
        return np.sqrt(np.sum(self.components**2, axis=-1))


def gradient(u):
    """Forward differences where the forward neighbour is interior, else backward.

    An axis with neither neighbour interior contributes a zero component;
    voxels with no interior neighbour at all are flagged ``isolated``.
    """
    vox = u.domain
    occ = vox.occupancy
    v = u.values
    d = vox.dim
    G = np.zeros(occ.shape + (d,))
    has_any = np.zeros(occ.shape, dtype=bool)
    for ax in range(d):
        fwd_ok = np.zeros_like(occ)
        bwd_ok = np.zeros_like(occ)
        fwd = np.zeros(occ.shape)
        bwd = np.zeros(occ.shape)
        a = [slice(None)] * d
        b = [slice(None)] * d
        a[ax], b[ax] = slice(0, -1), slice(1, None)
        a, b = tuple(a), tuple(b)
        fwd_ok[a] = occ[a] & occ[b]
        fwd[a] = (v[b] - v[a]) / vox.h
        bwd_ok[b] = occ[a] & occ[b]
        bwd[b] = (v[b] - v[a]) / vox.h
        G[..., ax] = np.where(fwd_ok, fwd, np.where(bwd_ok, bwd, 0.0))
        has_any |= fwd_ok | bwd_ok
    G[~occ] = 0.0
    return GradientField(G, occ & ~has_any)


def _check_p(p):
    if math.isinf(p):
        raise DomainError("p = inf is not supported")
    if not p >= 1:
        raise DomainError(f"p must be in [1, inf), got {p}")


def lp_norm(u, p):
    _check_p(p)
    vals = u.interior_values()
    return float(np.sum(u.domain.h ** u.domain.dim * np.abs(vals) ** p)) ** (1 / p)


def grad_norm(u, p):
    _check_p(p)
    g = gradient(u).magnitude()[u.domain.occupancy]
    return float(np.sum(u.domain.h ** u.domain.dim * g**p)) ** (1 / p)


def w1p_norm(u, p):
    """``(sum h^d (|u|^p + |grad u|^p))^(1/p)`` over interior voxels."""
    _check_p(p)
    return float(lp_norm(u, p) ** p + grad_norm(u, p) ** p) ** (1 / p)


# ---------------------------------------------------------------------------
# Example cut functions on the wireframe
# ---------------------------------------------------------------------------


def ramp_bounds(N):
    """``(z_a, z_b)``: ``u_N`` ramps from 0 to 1 on ``[z_a, z_b]``."""
    s = 2.0 ** (-(N - 1))
    z0 = layer_height(N - 1)
    return z0 + 0.25 * s, z0 + 0.75 * s


def cut_function(N):
    """Closed form of ``u_N``: 0 below ``z_a``, ``2^N (z - z_a)`` on the ramp, 1 above."""
    za, _ = ramp_bounds(N)

    def f(P):
        P = as_points(P, 3)
        return np.clip(2.0**N * (P[:, 2] - za), 0.0, 1.0)

    return f


def cut_uN(params, N, vox=None):
    if not 1 <= N <= params.layers:
        raise DomainError(f"N={N} outside 1..{params.layers}")
    f = cut_function(N)
    if vox is None:
        return GridFunction(None, None, f, f"u_{N}")
    return GridFunction.from_function(vox, f, f"u_{N}")


def analytic_uN_energy(params, N, p):
    """``(2^(N-1)+1)^2 2^-N 2^(pN) pi r_N^2``: the z-gradient energy in the vertical tubes."""
    if N < 1:
        raise DomainError("N >= 1 required")
    return (2 ** (N - 1) + 1) ** 2 * 2.0 ** (-N) * 2.0 ** (p * N) * math.pi * params.radius(N) ** 2


@dataclass
class EnergyTrend:
    energies: list
    growing: bool
    detail: str


def energy_trend(params, p, N_max=None):
    """Analytic energies over ``N`` and whether they fail to tend to 0."""
    N_max = params.layers if N_max is None else N_max
    E = [analytic_uN_energy(params, N, p) for N in range(1, N_max + 1)]
    if params.default_schedule:
        growing = not nonuniqueness_criterion(params, p).holds
        detail = "2^((p+1)N) r_N^2 -> 0 fails (p > 2c-1)" if growing else "2^((p+1)N) r_N^2 -> 0"
    else:
        growing = len(E) >= 2 and E[-1] >= E[0]
        detail = "trend over explicit radii"
    return EnergyTrend(E, growing, detail)


@dataclass
class EnergyComparison:
    N: int
    p: float
    h: float
    numeric: float
    analytic: float

    @property
    def relative_gap(self):
        return abs(self.numeric - self.analytic) / self.analytic


def ramp_slab_bbox(params, N, h):
    za, zb = ramp_bounds(N)
    r = params.radius(N)
    return (np.array([-r - 2 * h, -r - 2 * h, za - 2 * h]),
            np.array([1 + r + 2 * h, 1 + r + 2 * h, zb + 2 * h]))


def numeric_uN_energy(params, N, p, h=None, budget=DEFAULT_VOXEL_BUDGET):
    """``sum h^3 |d_z u_N|^p`` over voxels of the layer-``N`` vertical tubes.

    Evaluated on the slab around the ramp (``u_N`` is constant elsewhere).
    """
    r = params.radius(N)
    h = r / 4 if h is None else h
    if h > r / 4 * (1 + 1e-12):
        raise ResolutionError(f"h={h:.3g} > r_N/4={r / 4:.3g}: vertical tubes under-resolved")
    dom = ImplicitDomain(WireframeNode(params), {"type": "wireframe", "c": params.c, "layers": params.layers})
    vox = voxelize(dom, h, bbox=ramp_slab_bbox(params, N, h), budget=budget)
    u = cut_uN(params, N, vox)
    dz = gradient(u).components[..., 2]
    occ = vox.occupancy
    idx = np.argwhere(occ)
    C = vox.centers(idx)
    in_tube = vertical_distance(C, N) < r
    e = float(np.sum(h**3 * np.abs(dz[occ][in_tube]) ** p))
    return EnergyComparison(N, p, h, e, analytic_uN_energy(params, N, p))


def boundary_trace_sample(u, samples):
    """Closed-form values of ``u`` at boundary samples."""
    if getattr(u, "closed_form", None) is None:
        raise UnsupportedOperationError("boundary traces need a closed-form evaluator")
    pts = np.array([getattr(s, "point", s) for s in samples], dtype=float)
    return u.evaluate(pts)


# ---------------------------------------------------------------------------
# Witness sequences
# ---------------------------------------------------------------------------


@dataclass
class WitnessReport:
    domain: str
    p: float
    n: int
    lp_norm: float
    grad_norm: float
    w1p_norm: float
    trace_dev: float
    target: str


@dataclass
class WitnessSequence:
    domain: str
    p: float
    reports: list
    certifying: bool
    target: str
    detail: str
    growing_term: str | None = None
    extra: dict = field(default_factory=dict)


def _wire_sum(params, k_from, weight_power, k_max=None):
    """``sum_{k >= k_from} r_k^w H^1(W_k)`` (default schedule: summed to float precision)."""
    if not params.default_schedule:
        ks = range(k_from, params.layers + 1)
        return sum(params.radius(k) ** weight_power * float(wire_length(k)) for k in ks)
    # H^1(W_k) = 2(2^k+1) + 2^-(k-1)(2^(k-1)+1)^2 = 2^k (5/2 + 4 2^-k + 2^(1-2k))
    total = 0.0
    k = k_from
    while True:
        lg = weight_power * (-params.c * k - 2 * math.log2(k)) + k + math.log2(2.5 + 4.0 * 2.0**-k + 2.0 ** (1 - 2 * k))
        term = 2.0**lg if lg > -1074 else 0.0
        total += term
        if (term <= 1e-17 * total and k > k_from + 8) or k > k_from + 100_000:
            break
        k += 1
    return total


def wireframe_witness(params, p, n_max=4):
    """Closed-form tube-model norms of ``u_1..u_n_max`` against ``phi = 1_S``.

    Tubes are modelled as cylinders ``pi r_k^2 L`` / ``2 pi r_k L`` (junction
    overlaps and end caps neglected).  Layers above the modelled depth follow
    the radius schedule, i.e. the infinite domain.
    """
    crit = nonuniqueness_criterion(params, p)
    reports = []
    for N in range(1, n_max + 1):
        r = default_radius(params.c, N) if params.default_schedule else params.radius(N)
        s = 2.0 ** (-(N - 1))
        m = (2 ** (N - 1) + 1) ** 2
        horiz = 2 * (2**N + 1)
        vol_above = _wire_sum(params, N + 1, 2) * math.pi
        surf_above = _wire_sum(params, N + 1, 1) * 2 * math.pi
        lp_p = vol_above + math.pi * r**2 * (horiz + m * s * (0.5 / (p + 1) + 0.25))
        grad_p = m * 2.0 ** (-N) * 2.0 ** (p * N) * math.pi * r**2
        dev = surf_above + 2 * math.pi * r * (horiz + m * s * 0.5)
        reports.append(WitnessReport("wireframe", p, N, lp_p ** (1 / p), grad_p ** (1 / p),
                                     (lp_p + grad_p) ** (1 / p), dev, "1_S"))
    w = [rep.w1p_norm for rep in reports]
    dv = [rep.trace_dev for rep in reports]
    decreasing = all(b < a for a, b in zip(w, w[1:])) and all(b < a for a, b in zip(dv, dv[1:]))
    if crit.holds and crit.exact:
        certifying, detail, growing = True, "2^((p+1)N) r_N^2 -> 0 (p <= 2c-1): ||u_N||_{1,p} -> 0, trace -> 1_S", None
    elif crit.holds:
        certifying, detail, growing = decreasing, "trend over explicit radii", None
    else:
        certifying = False
        detail = "gradient energy does not vanish: p > 2c-1"
        growing = "grad: (2^(N-1)+1)^2 2^-N 2^(pN) pi r_N^2 ~ 2^((p+1)N) r_N^2"
    return WitnessSequence("wireframe", p, reports, certifying, "1_S (top square, area 1)", detail,
                           growing, {"criterion": crit.status, "observed_decreasing": decreasing})


def sampled_wireframe_trace_deviation(params, N, per_layer=20_000, seed=0):
    """Monte Carlo ``int_{dOmega} |u_N - 1_S|`` over the modelled layers.

    Points are drawn uniformly on the cylinder surfaces of layers ``N..layers``;
    points inside another tube (not on the boundary) are discarded.
    """
    from .wireframe import layer_segments

    dom_node = WireframeNode(params)
    f = cut_function(N)
    rng = np.random.default_rng(seed)
    total = 0.0
    for k in range(N, params.layers + 1):
        r = params.radius(k)
        segs = np.array([[[float(c) for c in a], [float(c) for c in b]] for a, b in layer_segments(k)])
        A, B = segs[:, 0], segs[:, 1]
        L = np.linalg.norm(B - A, axis=1)
        pick = rng.choice(len(L), size=per_layer, p=L / L.sum())
        t = rng.random(per_layer)
        th = 2 * np.pi * rng.random(per_layer)
        d = (B - A)[pick] / L[pick, None]
        e1 = np.where(np.abs(d[:, 2:3]) > 0.5, np.array([[1.0, 0, 0]]), np.array([[0, 0, 1.0]]))
        e1 = e1 - np.sum(e1 * d, axis=1, keepdims=True) * d
        e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
        e2 = np.cross(d, e1)
        P = A[pick] + t[:, None] * (B - A)[pick] + r * (np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2)
        on_boundary = dom_node.value(P) > -1e-6 * r
        area = 2 * np.pi * r * L.sum()
        total += area / per_layer * float(np.sum(np.abs(f(P[on_boundary]))))
    return total


def forest_witness(ratio, p, n_max=4, columns=None):
    """``u_n = 1`` on disks of columns ``k >= n``: closed-form geometric sums.

    ``||u_n||_p^p = sum_{k>=n} 2^k pi rho_k^2``, ``grad u_n = 0``;
    ``int |u_n - 1_seg| = sum_{k>=n} 2^k 2 pi rho_k`` (the circles).
    """
    reports = []
    for n in range(1, n_max + 1):
        if columns is None:
            area = math.pi * ratio**2 * 8.0 ** (-n) * 8 / 7
            circ = 2 * math.pi * ratio * 2.0 ** (-n) * 2
        else:
            area = sum(2**k * math.pi * (ratio * 4.0**-k) ** 2 for k in range(n, columns + 1))
            circ = sum(2**k * 2 * math.pi * ratio * 4.0**-k for k in range(n, columns + 1))
        reports.append(WitnessReport("forest", p, n, area ** (1 / p), 0.0, area ** (1 / p), circ,
                                     "1_segment"))
    w = [r.w1p_norm for r in reports]
    ok = all(b < a for a, b in zip(w, w[1:]))
    return WitnessSequence("forest", p, reports, ok, "1 on {0} x [0,1] (length 1)",
                           "disjoint components: u_n locally constant, norms geometric", None,
                           {"ratio": ratio})


def witness_sequence(spec, p, n_max=4):
    """Witness sequence for a wireframe or forest construction.

    Any other domain (in particular connected planar ones) is refused: no
    explicit construction is available.
    """
    _check_p(p)
    from .planar import ForestNode

    root = spec.root if isinstance(spec, ImplicitDomain) else spec
    if isinstance(spec, dict):
        kind = spec.get("type")
        if kind == "wireframe":
            root = WireframeParams(spec["c"], spec.get("layers", n_max),
                                   None if spec.get("radii") is None else tuple(spec["radii"]))
        elif kind == "forest":
            return forest_witness(float(spec.get("ratio", 0.25)), p, n_max)
    if isinstance(root, WireframeNode):
        root = root.params
    if isinstance(root, WireframeParams):
        return wireframe_witness(root, p, n_max)
    if isinstance(root, ForestNode):
        return forest_witness(root.ratio, p, n_max)
    raise PreconditionError("witness sequences exist only for the wireframe and forest constructions")


__all__ = [
    "GridFunction", "GradientField", "gradient", "lp_norm", "grad_norm", "w1p_norm",
    "cut_uN", "cut_function", "ramp_bounds", "analytic_uN_energy", "energy_trend",
    "numeric_uN_energy", "EnergyComparison", "boundary_trace_sample", "WitnessReport",
    "WitnessSequence", "wireframe_witness", "forest_witness", "witness_sequence",
    "sampled_wireframe_trace_deviation", "TOP_HEIGHT",
]
