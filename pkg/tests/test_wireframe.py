from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gmt_trace_lab import wireframe as wf
from gmt_trace_lab.errors import DomainError
from gmt_trace_lab.wireframe import WireframeParams


def P(c, layers=4, radii=None):
    return WireframeParams(c, layers, radii)


def test_radii_values():
    assert wf.radii(P(5), 1) == 1 / 32
    assert wf.radii(P(5), 2) == 1 / 4096
    assert wf.radii(P(2, 3), 3) == pytest.approx(1 / 576, rel=1e-15)
    with pytest.raises(DomainError):
        wf.radii(P(5, 2), 3)
    assert wf.radii(P(5, 2, radii=(0.1, 0.01)), 2) == 0.01


def test_layer_heights():
    assert wf.layer_height(0) == 0
    assert [wf.layer_height(N) for N in (1, 2, 3)] == [1.0, 1.5, 1.75]


def test_wire_length_matches_segments_exactly():
    for N in range(1, 7):
        total = Fraction(0)
        for a, b in wf.layer_segments(N):
            d = [bi - ai for ai, bi in zip(a, b)]
            nz = [x for x in d if x != 0]
            assert len(nz) == 1
            total += abs(nz[0])
        assert total == wf.wire_length(N)
        assert wf.wire_length(N) == 2 * (2**N + 1) + Fraction(1, 2 ** (N - 1)) * (2 ** (N - 1) + 1) ** 2


def test_tube_overlap_rejected():
    params = WireframeParams(1, 2)  # r_1 = 1/2: 2 r_1 > 1/2
    assert params.overlapping_layers == [1]  # r_2 = 1/16
    with pytest.raises(ValueError, match="layer 1"):
        wf.WireframeNode(params)
    assert WireframeParams(2, 3).overlapping_layers == []  # r_1 = 1/4 is tangent
    wf.WireframeNode(WireframeParams(2, 3))


def test_area_bound_partial():
    sums, flag = wf.area_bound_partial(P(5, 3), 3)
    oracle = 2 / 32 + 4 / 4096 + 8 * 2.0**-15 / 9
    assert sums[-1] == pytest.approx(oracle, rel=1e-14)
    assert abs(sums[-1] - 0.0636) < 1e-4
    assert flag.holds
    # c = 1 is admissible: sum 1/k^2 converges
    assert wf.area_bound_partial(WireframeParams(1.0, 1), 1)[1].holds
    zero = P(2, 2, radii=(0.0, 0.0))
    s, f = wf.area_bound_partial(zero, 2)
    assert s == [0.0, 0.0] and f.holds


def test_nonuniqueness_criterion_examples():
    assert wf.nonuniqueness_criterion(P(5), 9).holds is True
    assert wf.nonuniqueness_criterion(P(5), 10).holds is False
    assert wf.nonuniqueness_criterion(P(2), 3).holds is True


def test_uniqueness_criterion_examples():
    assert wf.uniqueness_criterion(P(5), 12).holds is True
    assert wf.uniqueness_criterion(P(5), 11).holds is False
    assert wf.uniqueness_criterion(P(2), 6).holds is True
    assert wf.uniqueness_criterion(P(2), 3).status == "inapplicable"


def test_explicit_radii_give_trend_verdicts():
    p = P(5, 4, radii=tuple(wf.default_radius(5, k) for k in range(1, 5)))
    v = wf.nonuniqueness_criterion(p, 9)
    assert v.exact is False and v.status.startswith("trend")


def test_p0_window():
    w = wf.p0_window(P(5))
    assert (w.lo, w.hi) == (9, 11) and w.above_three
    assert (wf.p0_window(P(3)).lo, wf.p0_window(P(3)).hi) == (5, 7)
    w2 = wf.p0_window(P(2))
    assert (w2.lo, w2.hi) == (3, 5) and not w2.above_three


def test_trace_integrability_examples():
    p = P(5)
    assert wf.trace_integrability(p, 9, 9).holds
    assert not wf.trace_integrability(p, 9, 18).holds
    assert wf.trace_integrability(p, 9, 17.5).holds
    assert wf.trace_integrability(p, 12, 2).status == "inapplicable"
    assert wf.trace_integrability(p, 3, 2).status == "inapplicable"


@pytest.mark.parametrize("c", [1.5, 2, 3, 5, 7])
def test_criteria_consistency(c):
    params = P(c)
    ps = np.linspace(3, 4 * c, 41)[1:]
    nonu = [p for p in ps if wf.nonuniqueness_criterion(params, p).holds]
    uniq = [p for p in ps if wf.uniqueness_criterion(params, p).holds]
    for p in ps:
        n = wf.nonuniqueness_criterion(params, p).holds
        u = wf.uniqueness_criterion(params, p).holds
        assert not (n and u)
        if p > 2 * c + 1:
            assert u
        if 3 < p <= 2 * c - 1:
            assert n
    win = wf.p0_window(params)
    step = ps[1] - ps[0]
    if nonu:
        # the largest grid p below the threshold may sit up to one step under it
        assert win.lo - step - 1e-12 <= max(nonu) <= win.hi
    if uniq:
        assert win.lo <= min(uniq) <= win.hi + (ps[1] - ps[0])


@given(st.floats(1, 40), st.floats(1, 40))
def test_trace_integrability_monotone_in_q(q1, q2):
    params = P(5)
    lo, hi = sorted((q1, q2))
    if not wf.trace_integrability(params, 9, lo).holds:
        assert not wf.trace_integrability(params, 9, hi).holds


@given(st.floats(4, 6), st.floats(1, 12))
def test_trace_integrability_monotone_in_c(p, q):
    # the criterion is monotone in c; its direction depends on the sign of
    # 2q - p, so only require that the verdict switches at most once
    results = [wf.trace_integrability(P(c), p, q).holds for c in (3.5, 4, 5, 7)]
    switches = sum(a != b for a, b in zip(results, results[1:]))
    assert switches <= 1, results


def test_grid_point_sequence():
    params = P(5, 6)
    xs = wf.grid_point_sequence(params, (0, 0, 2), 5)
    assert np.allclose(xs[:, :2], 0) and np.allclose(xs[:, 2], [wf.layer_height(N) for N in range(6)])
    xs = wf.grid_point_sequence(params, (0.5, 0.5, 2), 5)
    assert np.allclose(xs[1:, :2], 0.5)
    z = np.array([1 / 3, 1 / 3, 2])
    xs = wf.grid_point_sequence(params, z, 6)
    d = np.linalg.norm(xs - z, axis=1)
    for N in range(7):
        assert d[N] <= np.sqrt(2) * 2.0 ** (-N - 1) + (2 - wf.layer_height(N)) + 1e-12
    assert np.all(np.diff(d[2:]) < 0)
    with pytest.raises(DomainError):
        wf.grid_point_sequence(params, (1.5, 0, 2), 3)


def test_increment_estimate():
    params = P(5, 8)
    for N in range(1, 8):
        s, cum = wf.increment_estimate(params, 13, N)
        assert s == pytest.approx(2.0 ** (-N / 6) * N ** (1 / 3), rel=1e-12)
        assert cum == pytest.approx(N * s)
        s9, _ = wf.increment_estimate(params, 9, N)
        assert s9 == pytest.approx(2.0 ** (N / 4) * N ** 0.5, rel=1e-12)
    assert wf.increment_estimate(params, 13, 0) == (0.0, 0.0)
    inc13 = [wf.increment_estimate(params, 13, N)[0] for N in range(3, 9)]
    inc9 = [wf.increment_estimate(params, 9, N)[0] for N in range(1, 9)]
    assert all(b < a for a, b in zip(inc13, inc13[1:]))
    assert all(b > a for a, b in zip(inc9, inc9[1:]))
