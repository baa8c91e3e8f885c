"""Upper bounds for the relative p-capacity by discrete constrained minimization.

``E(u) = sum h^d (|u|^p + |grad u|^p)`` over interior voxels with ``u = 1``
clamped on voxels within ``delta`` of the target samples.  Every returned
value is an upper bound on the discrete capacity at dilation ``delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.linalg import spsolve
from scipy.spatial import cKDTree

from .errors import DomainError, PreconditionError
from .sobolev import GridFunction, w1p_norm


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 20_000
    window: int = 50
    rel_tol: float = 1e-6
    armijo: float = 1e-4
    step_min: float = 1e-12
    step_max: float = 1e12


@dataclass
class CapacityEstimate:
    target: str
    p: float
    h: float
    delta: float
    value: float
    converged: bool
    iterations: int
    energy_log: list = field(repr=False)
    clamped: int = 0
    u: np.ndarray | None = field(default=None, repr=False)
    label: str = "upper bound at dilation delta"


def gradient_matrix(vox):
    """Sparse ``G`` with ``(G u)[i, axis]`` the discrete gradient of ``sobolev.gradient``.

    Rows are ``axis * n + i``; columns index interior voxels in C order.
    """
    occ = vox.occupancy
    n = int(occ.sum())
    node = np.full(occ.shape, -1, dtype=np.int64)
    node[occ] = np.arange(n)
    rows, cols, vals = [], [], []
    for ax in range(vox.dim):
        fwd = np.full(occ.shape, -1, dtype=np.int64)
        bwd = np.full(occ.shape, -1, dtype=np.int64)
        a = [slice(None)] * vox.dim
        b = [slice(None)] * vox.dim
        a[ax], b[ax] = slice(0, -1), slice(1, None)
        a, b = tuple(a), tuple(b)
        fwd[a] = node[b]
        bwd[b] = node[a]
        me = node[occ]
        f = fwd[occ]
        bk = bwd[occ]
        use_f = f >= 0
        use_b = ~use_f & (bk >= 0)
        r = ax * n + me
        # forward: (u_f - u_i)/h ; backward: (u_i - u_b)/h
        rows += [r[use_f], r[use_f], r[use_b], r[use_b]]
        cols += [f[use_f], me[use_f], me[use_b], bk[use_b]]
        vals += [np.full(use_f.sum(), 1 / vox.h), np.full(use_f.sum(), -1 / vox.h),
                 np.full(use_b.sum(), 1 / vox.h), np.full(use_b.sum(), -1 / vox.h)]
    G = coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                   shape=(vox.dim * n, n))
    return csr_matrix(G)


def _target_points(A, dim):
    if A is None:
        return np.zeros((0, dim))
    P = np.asarray(A, dtype=float)
    if P.size == 0:
        return np.zeros((0, dim))
    return P.reshape(-1, dim)


def clamp_mask(vox, A, delta):
    """Interior voxels whose centers lie within ``delta`` of a target sample."""
    C = vox.centers(np.argwhere(vox.occupancy))
    P = _target_points(A, vox.dim)
    if P.shape[0] == 0:
        return np.zeros(C.shape[0], dtype=bool)
    d, _ = cKDTree(P).query(C, distance_upper_bound=delta * (1 + 1e-12))
    return np.isfinite(d)


class _Energy:
    def __init__(self, vox, p):
        self.G = gradient_matrix(vox)
        self.n = int(vox.occupancy.sum())
        self.d = vox.dim
        self.w = vox.h**vox.dim
        self.p = p

    def grad_mag(self, u):
        g = (self.G @ u).reshape(self.d, self.n)
        return g, np.sqrt(np.sum(g * g, axis=0))

    def value(self, u):
        _, m = self.grad_mag(u)
        return self.w * float(np.sum(np.abs(u) ** self.p) + np.sum(m**self.p))

    def value_grad(self, u):
        p = self.p
        g, m = self.grad_mag(u)
        E = self.w * float(np.sum(np.abs(u) ** p) + np.sum(m**p))
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(m > 0, m ** (p - 2), 0.0)
        du = p * np.abs(u) ** (p - 1) * np.sign(u)
        dg = self.G.T @ (p * (g * s).ravel())
        return E, self.w * (du + dg)


def _spg(energy, u0, fixed, cfg):
    """Spectral projected gradient with monotone Armijo backtracking on ``[0,1]``."""

    def project(v):
        v = np.clip(v, 0.0, 1.0)
        v[fixed] = 1.0
        return v

    u = project(u0.copy())
    E, g = energy.value_grad(u)
    log = [E]
    step = 1.0 / max(1e-300, float(np.abs(g).max())) if np.any(g) else 1.0
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        trial = project(u - step * g)
        d = trial - u
        gd = float(g @ d)
        if gd >= 0 or not np.any(d):
            converged = True
            it -= 1
            break
        lam = 1.0
        while True:
            cand = u + lam * d
            Ec = energy.value(cand)
            if Ec <= E + cfg.armijo * lam * gd or lam < 1e-12:
                break
            lam *= 0.5
        if Ec > E:
            converged = True
            it -= 1
            break
        Ec, gc = energy.value_grad(cand)
        s = cand - u
        y = gc - g
        sy = float(s @ y)
        step = min(cfg.step_max, max(cfg.step_min, float(s @ s) / sy)) if sy > 0 else cfg.step_max
        u, E, g = cand, Ec, gc
        log.append(E)
        if len(log) > cfg.window:
            ref = log[-cfg.window - 1]
            if ref <= 0 or (ref - E) / ref < cfg.rel_tol:
                converged = True
                break
    return u, log, converged, it


def relcap_upper(vox, A, p, delta, config=SolverConfig(), target="samples"):
    if not 1 < p < math.inf:
        raise DomainError(f"capacity needs p in (1, inf), got {p}")
    if delta < 2 * vox.h * (1 - 1e-12):
        raise DomainError(f"delta={delta} < 2h={2 * vox.h}")
    n = vox.interior_count
    if n == 0:
        return CapacityEstimate(target, p, vox.h, delta, 0.0, True, 0, [0.0], 0, np.zeros(0))
    fixed = clamp_mask(vox, A, delta)
    energy = _Energy(vox, p)
    u0 = fixed.astype(float)
    u, log, converged, it = _spg(energy, u0, fixed, config)
    gf = GridFunction.from_values(vox, _scatter(vox, u))
    value = w1p_norm(gf, p) ** p
    return CapacityEstimate(target, p, vox.h, delta, float(value), converged, it, log,
                            int(fixed.sum()), u)


def _scatter(vox, u):
    out = np.zeros(vox.shape)
    out[vox.occupancy] = u
    return out


def direct_p2_capacity(vox, A, delta):
    """Exact minimizer for ``p = 2`` by one sparse solve.

    ``I + G^T G`` is an M-matrix (``G^T G`` is a weighted graph Laplacian),
    so the unconstrained solution with ``u = 1`` on the clamp already lies
    in ``[0, 1]``: the obstacle constraint is inactive.
    """
    fixed = clamp_mask(vox, A, delta)
    n = vox.interior_count
    G = gradient_matrix(vox)
    K = (csr_matrix((np.ones(n), (np.arange(n), np.arange(n))), shape=(n, n)) + G.T @ G).tocsr()
    u = np.zeros(n)
    u[fixed] = 1.0
    free = ~fixed
    if free.any() and fixed.any():
        rhs = -(K[free][:, fixed] @ u[fixed])
        u[free] = spsolve(K[free][:, free].tocsc(), rhs)
    value = vox.h**vox.dim * float(u @ (K @ u))
    return value, u


@dataclass
class MonotonicityReport:
    value_a: float
    value_b: float
    tolerance: float
    ok: bool
    status: str  # "ok" | "solver-failure"


def relcap_monotonicity_check(vox, A, B, p, delta, config=SolverConfig()):
    PA = _target_points(A, vox.dim)
    PB = _target_points(B, vox.dim)
    if PA.shape[0]:
        if PB.shape[0] == 0:
            raise PreconditionError("A is not a subset of B")
        d, _ = cKDTree(PB).query(PA)
        if np.any(d > 1e-12):
            raise PreconditionError("A-samples must be a subset of B-samples")
    a = relcap_upper(vox, PA, p, delta, config, "A")
    b = relcap_upper(vox, PB, p, delta, config, "B")
    tol = 1e-3 * max(a.value, b.value) + 1e-12
    ok = a.value <= b.value + tol
    return MonotonicityReport(a.value, b.value, tol, ok, "ok" if ok else "solver-failure")


def target_from_description(desc, vox):
    """Target samples from ``{"points": [...]}`` or ``{"region": node}``.

    A region contributes the centers of all grid voxels inside it.
    """
    from .geometry import parse_node

    if "points" in desc:
        return np.asarray(desc["points"], dtype=float).reshape(-1, vox.dim)
    if "region" in desc:
        node = parse_node(desc["region"], "$.region")
        C = vox.centers(np.argwhere(np.ones(vox.shape, dtype=bool)))
        return C[node.contains(C)]
    raise PreconditionError("set description needs 'points' or 'region'")
