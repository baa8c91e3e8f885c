"""Stacked dyadic wireframe domain and its closed-form analytics.

Layer ``N`` (``N >= 1``) sits at height ``L_N = 2(1 - 2^-N)`` and carries a
square grid of spacing ``2^-N`` over the unit square.  Vertical connectors
of length ``2^-(N-1)`` join the layer ``N-1`` grid points (spacing
``2^-(N-1)``) to layer ``N``.  The domain is the union over ``N`` of the open
``r_N``-neighbourhoods of the layer-``N`` wires (connectors plus grid); the
wire tubes shrink so fast that the domain has density zero along the top
square ``S = [0,1]^2 x {2}``.

The criteria below are decided from the exponents of the governing series
(``sum 2^(a k) k^b`` converges iff ``a < 0`` or ``a = 0, b < -1``), using
exact rational arithmetic on the float inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError
from .geometry import Node

TOP_HEIGHT = 2.0


def layer_height(N):
    """``L_N = sum_{k<N} 2^-k = 2(1 - 2^-N)``."""
    return 2.0 * (1.0 - 2.0 ** (-N))


def default_radius(c, k):
    return 2.0 ** (-c * k) / k**2


def wire_length(N):
    """Closed-form length of the layer-``N`` wire set (a Fraction)."""
    return 2 * (2**N + 1) + Fraction(1, 2 ** (N - 1)) * (2 ** (N - 1) + 1) ** 2


@dataclass(frozen=True)
class WireframeParams:
    c: float
    layers: int
    radii: tuple | None = None

    def __post_init__(self):
        if not self.c >= 1:
            raise ValueError(f"growth exponent c must be >= 1, got {self.c}")
        if not isinstance(self.layers, int) or self.layers < 1:
            raise ValueError("layers must be an integer >= 1")
        if self.radii is not None:
            r = tuple(float(v) for v in self.radii)
            if len(r) < self.layers:
                raise ValueError(f"radii has {len(r)} entries, need {self.layers}")
            if any(v < 0 or not math.isfinite(v) for v in r):
                raise ValueError("radii must be finite and >= 0")
            object.__setattr__(self, "radii", r)

    @property
    def overlapping_layers(self):
        """Layers whose open tubes around parallel wires ``2^-N`` apart meet.

        Analytic formulas stay meaningful for such parameters; only building
        the domain (``WireframeNode``) requires disjoint tubes.
        """
        return [N for N in range(1, self.layers + 1) if 2 * self.radius(N) > 2.0 ** (-N)]

    @property
    def default_schedule(self):
        return self.radii is None

    def radius(self, k):
        if k < 1:
            raise DomainError("layer index k must be >= 1")
        if self.radii is not None:
            if k > len(self.radii):
                raise DomainError(f"layer {k} beyond explicit radii ({len(self.radii)})")
            return self.radii[k - 1]
        return default_radius(self.c, k)

    def scene(self):
        node = {"type": "wireframe", "c": self.c, "layers": self.layers}
        if self.radii is not None:
            node["radii"] = list(self.radii)
        return node


def radii(params, k):
    """Tube radius of layer ``k``; ``k`` beyond ``params.layers`` is a range error."""
    if k > params.layers:
        raise DomainError(f"k={k} exceeds layers={params.layers}")
    return params.radius(k)


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


def layer_segments(N):
    """Exact (Fraction) endpoints of every wire segment of layer ``N``."""
    n = 2**N
    s = Fraction(1, n)
    zN = 2 - Fraction(2, n)
    zP = 2 - Fraction(2, 2 ** (N - 1))
    segs = []
    for i in range(n + 1):
        for j in range(n):
            segs.append(((i * s, j * s, zN), (i * s, (j + 1) * s, zN)))
            segs.append(((j * s, i * s, zN), ((j + 1) * s, i * s, zN)))
    sp = Fraction(1, 2 ** (N - 1))
    for i in range(2 ** (N - 1) + 1):
        for j in range(2 ** (N - 1) + 1):
            segs.append(((i * sp, j * sp, zP), (i * sp, j * sp, zN)))
    return segs


def _nearest_line(x, spacing, count):
    k = np.clip(np.rint(x / spacing), 0, count)
    return x - k * spacing


def layer_distance(P, N):
    """Exact distance from points ``(n, 3)`` to the closed layer-``N`` wires."""
    x, y, z = P[:, 0], P[:, 1], P[:, 2]
    n = 2**N
    s = 1.0 / n
    zN = layer_height(N)
    zP = layer_height(N - 1)
    out_y = np.maximum(0.0, np.maximum(-y, y - 1.0))
    out_x = np.maximum(0.0, np.maximum(-x, x - 1.0))
    dz = z - zN
    # grid lines x = i s (running along y) and y = j s (running along x)
    d_lines_y = np.hypot(np.hypot(_nearest_line(x, s, n), out_y), dz)
    d_lines_x = np.hypot(np.hypot(_nearest_line(y, s, n), out_x), dz)
    sp = 2.0 * s
    m = n // 2
    dzv = np.maximum(0.0, np.maximum(zP - z, z - zN))
    d_vert = np.hypot(np.hypot(_nearest_line(x, sp, m), _nearest_line(y, sp, m)), dzv)
    return np.minimum(np.minimum(d_lines_y, d_lines_x), d_vert)


def vertical_distance(P, N):
    """Distance to the layer-``N`` vertical connectors only."""
    s = 2.0 ** (-(N - 1))
    m = 2 ** (N - 1)
    dzv = np.maximum(0.0, np.maximum(layer_height(N - 1) - P[:, 2], P[:, 2] - layer_height(N)))
    return np.hypot(np.hypot(_nearest_line(P[:, 0], s, m), _nearest_line(P[:, 1], s, m)), dzv)


class WireframeNode(Node):
    """Union over layers of open ``r_N``-tubes around the layer-``N`` wires.

    Each layer is treated as one primitive: ``r_N - dist`` bounds the
    interior distance from below, ``dist - r_N`` is exact outside.
    """

    dim = 3

    def __init__(self, params):
        if any(params.radius(N) <= 0 for N in range(1, params.layers + 1)):
            raise ValueError("wireframe tubes need positive radii")
        bad = params.overlapping_layers
        if bad:
            N = bad[0]
            raise ValueError(
                f"tubes overlap at layer {N}: 2 r_N = {2 * params.radius(N):.6g} > 2^-N")
        self.params = params

    def _layer_values(self, P):
        return np.array([layer_distance(P, N) - self.params.radius(N)
                         for N in range(1, self.params.layers + 1)])

    def value(self, P):
        return self._layer_values(P).min(axis=0)

    def lb(self, P):
        vals = self._layer_values(P)
        inside = vals < 0
        lb_in = np.where(inside, -vals, np.inf).min(axis=0)
        return np.where(inside.any(axis=0), lb_in, vals.min(axis=0))

    def bbox(self):
        rmax = max(self.params.radius(N) for N in range(1, self.params.layers + 1))
        top = layer_height(self.params.layers) + self.params.radius(self.params.layers)
        return (np.array([-rmax, -rmax, -self.params.radius(1)]),
                np.array([1 + rmax, 1 + rmax, top]))


# ---------------------------------------------------------------------------
# Closed-form analytics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    """Boolean outcome plus provenance; ``holds is None`` means inapplicable."""

    holds: bool | None
    exact: bool = True
    detail: str = ""

    def __bool__(self):
        return bool(self.holds)

    @property
    def status(self):
        if self.holds is None:
            return "inapplicable"
        return ("true" if self.holds else "false") if self.exact else (
            "trend-true" if self.holds else "trend-false")


def _frac(v):
    return v if isinstance(v, Fraction) else Fraction(v)


def series_converges(a, b):
    """Does ``sum_k 2^(a k) k^b`` converge?"""
    return a < 0 or (a == 0 and b < -1)


def sequence_vanishes(a, b):
    """Does ``2^(a N) N^b`` tend to zero?"""
    return a < 0 or (a == 0 and b < 0)


def _log_trend_decreasing(terms):
    terms = np.asarray(terms, dtype=float)
    if np.all(terms == 0):
        return True
    if np.any(terms <= 0):
        positive = terms[terms > 0]
        return positive.size < 2 or positive[-1] < positive[0]
    tail = np.log2(terms[-max(3, len(terms) // 2):])
    if tail.size < 2:
        return bool(terms[-1] < terms[0])
    slope = np.polyfit(np.arange(tail.size), tail, 1)[0]
    return bool(slope < 0)


def area_bound_partial(params, K):
    """Partial sums of ``sum_k 2^k r_k`` (boundary-area bound) up to ``K``."""
    if K > params.layers:
        raise DomainError(f"K={K} exceeds layers={params.layers}")
    terms = [2.0**k * params.radius(k) for k in range(1, K + 1)]
    sums = list(np.cumsum(terms)) if terms else []
    if params.default_schedule:
        # 2^k 2^(-ck) k^-2 = 2^((1-c)k) k^-2
        flag = Verdict(series_converges(1 - _frac(params.c), -2), True,
                       "ratio 2^(1-c) with k^-2 correction")
    else:
        flag = Verdict(_log_trend_decreasing(terms), False, "trend over explicit radii")
    return [float(s) for s in sums], flag


def nonuniqueness_criterion(params, p):
    """Does ``2^((p+1)N) r_N^2 -> 0``?  Default schedule: iff ``p <= 2c - 1``."""
    if params.default_schedule:
        # 2^((p+1)N) 2^(-2cN) N^-4
        a = _frac(p) + 1 - 2 * _frac(params.c)
        return Verdict(sequence_vanishes(a, -4), True, "2^((p+1-2c)N) N^-4")
    terms = [2.0 ** ((p + 1) * N) * params.radius(N) ** 2 for N in range(1, params.layers + 1)]
    return Verdict(_log_trend_decreasing(terms), False, "trend of 2^((p+1)N) r_N^2")


def alpha_3d(p):
    return (p - 3) / (p - 1)


def uniqueness_criterion(params, p):
    """Is ``sum_k 2^-k r_k^(alpha-1)`` finite for ``alpha = (p-3)/(p-1)``?

    Needs ``p > 3`` (the Hoelder-type estimate in the weighted metric);
    otherwise the verdict is inapplicable.  Default schedule: iff ``p > 2c+1``.
    """
    if not p > 3:
        return Verdict(None, True, "requires p > 3")
    if params.default_schedule:
        pf, cf = _frac(p), _frac(params.c)
        one_minus_alpha = Fraction(2) / (pf - 1)
        # 2^-k (2^(-ck) k^-2)^(alpha-1) = 2^((-1 + c(1-alpha))k) k^(2(1-alpha))
        a = -1 + cf * one_minus_alpha
        b = 2 * one_minus_alpha
        return Verdict(series_converges(a, b), True, "2^((2c/(p-1)-1)k) k^(4/(p-1))")
    al = alpha_3d(p)
    terms = [2.0 ** (-k) * params.radius(k) ** (al - 1) for k in range(1, params.layers + 1)]
    return Verdict(_log_trend_decreasing(terms), False, "trend of 2^-k r_k^(alpha-1)")


@dataclass(frozen=True)
class P0Window:
    lo: float
    hi: float
    above_three: bool

    def __contains__(self, p):
        return self.lo <= p <= self.hi


def p0_window(params):
    """Interval ``[2c-1, 2c+1]`` known to contain the uniqueness switch."""
    lo, hi = 2 * params.c - 1, 2 * params.c + 1
    return P0Window(lo, hi, lo > 3)


def trace_integrability(params, p, q):
    """Is ``sum_k 2^k r_k k^q 2^(-(p-1)q k/p) r_k^(-2q/p)`` finite?

    Sufficient for every function to have a trace in ``L^q`` off ``S``.
    Meaningful only for ``3 < p <= 2c - 1``.
    """
    if not (p > 3 and p <= 2 * params.c - 1):
        return Verdict(None, True, "requires 3 < p <= 2c-1")
    if not params.default_schedule:
        terms = [k**q * 2.0 ** ((1 - (p - 1) * q / p) * k) * params.radius(k) ** (1 - 2 * q / p)
                 for k in range(1, params.layers + 1)]
        return Verdict(_log_trend_decreasing(terms), False, "trend of integrability series")
    pf, qf, cf = _frac(p), _frac(q), _frac(params.c)
    # r_k^(1-2q/p) = 2^(-c(1-2q/p)k) k^(-2(1-2q/p))
    a = 1 - (pf - 1) * qf / pf - cf * (1 - 2 * qf / pf)
    b = qf - 2 * (1 - 2 * qf / pf)
    return Verdict(series_converges(a, b), True, "(2c-p+1)q < (c-1)p")


def _nearest_multiple(x, spacing, count):
    k = x / spacing
    lo = math.floor(k)
    # ties go to the smaller coordinate (lexicographic smallest grid point)
    idx = lo if k - lo <= 0.5 else lo + 1
    return min(max(idx, 0), count) * spacing


def grid_point_sequence(params, z, N_max):
    """Nearest layer-``N`` grid vertex to ``z`` in ``S`` for ``N = 0..N_max``."""
    z = tuple(float(v) for v in z)
    x, y = z[0], z[1]
    if not (0 <= x <= 1 and 0 <= y <= 1) or (len(z) == 3 and z[2] != TOP_HEIGHT):
        raise DomainError(f"z={z} is not in the closed top square")
    pts = []
    for N in range(N_max + 1):
        s = 2.0 ** (-N)
        pts.append((_nearest_multiple(x, s, 2**N), _nearest_multiple(y, s, 2**N), layer_height(N)))
    return np.array(pts)


def increment_estimate(params, p, N):
    """``(2^-N r_N^(-2/(p-1)), N 2^-N r_N^(-2/(p-1)))``: one step and root-to-layer."""
    if not p > 3:
        raise DomainError("increment estimate requires p > 3")
    if N == 0:
        return 0.0, 0.0
    # the default schedule extends past the modelled layers
    r = default_radius(params.c, N) if params.default_schedule else params.radius(N)
    single = 2.0 ** (-N) * r ** (-2.0 / (p - 1))
    return single, N * single
