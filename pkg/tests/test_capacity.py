import math

import numpy as np
import pytest

from gmt_trace_lab import capacity as cp
from gmt_trace_lab.errors import DomainError, PreconditionError
from gmt_trace_lab.geometry import build_domain, voxelize
from gmt_trace_lab.sobolev import GridFunction, gradient, w1p_norm

BOX = build_domain({"type": "box", "min": [-1, -1], "max": [1, 1]})


def grid(h=1 / 16):
    return voxelize(BOX, h, bbox=([-1, -1], [1, 1]))


def ball_points(vox, rho, center=(0.0, 0.0)):
    C = vox.centers()
    return C[np.linalg.norm(C - np.asarray(center), axis=1) < rho]


def test_gradient_matrix_matches_gradient():
    vox = grid(1 / 8)
    rng = np.random.default_rng(0)
    vals = rng.normal(size=vox.shape)
    u = GridFunction.from_values(vox, vals)
    G = cp.gradient_matrix(vox)
    g = (G @ u.interior_values()).reshape(vox.dim, -1).T
    assert np.allclose(g, gradient(u).components[vox.occupancy])


def test_empty_target_is_zero():
    est = cp.relcap_upper(grid(), [], 2, 2 / 16)
    assert est.value == 0 and est.converged


def test_whole_domain_target():
    vox = grid()
    est = cp.relcap_upper(vox, vox.centers(), 2, 2 * vox.h)
    assert est.clamped == vox.interior_count
    assert math.isclose(est.value, vox.volume(), rel_tol=1e-12)
    assert abs(est.value - 4) <= 4 * 4 * vox.h


@pytest.mark.parametrize("p", [2, 3])
def test_feasibility_and_monotone_log(p):
    vox = grid()
    A = ball_points(vox, 0.2)
    est = cp.relcap_upper(vox, A, p, 2 * vox.h)
    fixed = cp.clamp_mask(vox, A, 2 * vox.h)
    assert np.all(est.u[fixed] == 1.0)
    assert np.all((est.u >= 0) & (est.u <= 1))
    assert all(b <= a for a, b in zip(est.energy_log, est.energy_log[1:]))
    vals = np.zeros(vox.shape)
    vals[vox.occupancy] = est.u
    assert math.isclose(est.value, w1p_norm(GridFunction.from_values(vox, vals), p) ** p, rel_tol=1e-9)
    assert est.value >= 0 and est.converged


def test_p2_matches_direct_solve():
    vox = grid()
    A = ball_points(vox, 0.2)
    est = cp.relcap_upper(vox, A, 2, 2 * vox.h)
    direct, _ = cp.direct_p2_capacity(vox, A, 2 * vox.h)
    assert abs(est.value - direct) / direct < 1e-4


def test_refinement_stable():
    vals = []
    for h in (1 / 16, 1 / 32):
        vox = grid(h)
        A = ball_points(vox, 0.25)
        vals.append(cp.direct_p2_capacity(vox, A, 0.125)[0])
    assert abs(vals[1] - vals[0]) / vals[0] < 0.1


def test_preconditions():
    vox = grid()
    with pytest.raises(DomainError):
        cp.relcap_upper(vox, [], 1, 2 * vox.h)
    with pytest.raises(DomainError):
        cp.relcap_upper(vox, [], math.inf, 2 * vox.h)
    with pytest.raises(DomainError):
        cp.relcap_upper(vox, [], 2, vox.h)


def test_unconverged_flagged():
    vox = grid()
    A = ball_points(vox, 0.2)
    est = cp.relcap_upper(vox, A, 2, 2 * vox.h, cp.SolverConfig(max_iter=3))
    assert not est.converged and est.iterations == 3 and est.value > 0


def test_monotonicity_check():
    vox = grid()
    small, big = ball_points(vox, 0.15), ball_points(vox, 0.4)
    assert cp.relcap_monotonicity_check(vox, small, big, 2, 2 * vox.h).ok
    same = cp.relcap_monotonicity_check(vox, small, small, 2, 2 * vox.h)
    assert same.ok and abs(same.value_a - same.value_b) <= same.tolerance
    empty = cp.relcap_monotonicity_check(vox, [], big, 2, 2 * vox.h)
    assert empty.value_a == 0 <= empty.value_b
    with pytest.raises(PreconditionError):
        cp.relcap_monotonicity_check(vox, big, small, 2, 2 * vox.h)


def test_target_from_description():
    vox = grid()
    P = cp.target_from_description({"points": [[0, 0], [0.5, 0.5]]}, vox)
    assert P.shape == (2, 2)
    R = cp.target_from_description({"region": {"type": "ball", "center": [0, 0], "radius": 0.3}}, vox)
    assert np.all(np.linalg.norm(R, axis=1) < 0.3) and len(R) > 0
    with pytest.raises(PreconditionError):
        cp.target_from_description({}, vox)
