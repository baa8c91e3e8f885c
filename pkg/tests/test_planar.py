import math

import numpy as np
import pytest

from gmt_trace_lab import planar as pl
from gmt_trace_lab.errors import DomainError, PreconditionError
from gmt_trace_lab.geometry import build_domain, voxelize
from gmt_trace_lab.measures import perimeter_estimate
from gmt_trace_lab.scenes import builtin_scene


def dom(name):
    return build_domain(builtin_scene(name))


def test_disk_curve():
    cs = pl.extract_curves(voxelize(dom("disk"), 1 / 256))
    assert len(cs.curves) == 1 and cs.parent == [None]
    assert abs(cs.total_length - 2 * math.pi) / (2 * math.pi) < 0.02


def test_annulus_nesting():
    cs = pl.extract_curves(voxelize(dom("annulus"), 1 / 128))
    assert len(cs.curves) == 2
    outer = int(np.argmax(cs.lengths))
    inner = 1 - outer
    assert cs.inside(inner, outer) and not cs.inside(outer, inner)
    assert cs.parent[outer] is None


def test_two_disks_no_containment():
    cs = pl.extract_curves(voxelize(dom("two-disks"), 1 / 64))
    assert len(cs.curves) == 2 and cs.parent == [None, None]


def test_slit_curve_survives():
    cs = pl.extract_curves(voxelize(dom("slit"), 1 / 128, anchor=(0.5, 0.5)))
    assert len(cs.curves) == 2
    inner = int(np.argmin(cs.lengths))
    assert cs.inside(inner, 1 - inner)
    assert abs(cs.lengths[inner] - 1.0) < 0.05


@pytest.mark.parametrize("name,h", [("disk", 1 / 128), ("annulus", 1 / 128), ("two-disks", 1 / 64)])
def test_length_matches_perimeter(name, h):
    vox = voxelize(dom(name), h)
    total = pl.extract_curves(vox).total_length
    per = perimeter_estimate(vox).normal_corrected
    assert abs(total - per) / per < 0.02


def test_extract_curves_needs_2d():
    with pytest.raises(DomainError):
        pl.extract_curves(voxelize(dom("ball"), 1 / 8))


def test_sample_curves_on_curve():
    cs = pl.extract_curves(voxelize(dom("disk"), 1 / 64))
    P = pl.sample_curves(cs, 200, seed=1)
    assert P.shape == (200, 2)
    assert np.allclose(np.linalg.norm(P, axis=1), 1, atol=2 / 64)
    assert np.array_equal(P, pl.sample_curves(cs, 200, seed=1))


def test_survey_disk():
    s = pl.density_survey_2d(dom("disk"), n_samples=60, h=1 / 128, mc_samples=2000)
    assert s.fraction_near == 1.0 and set(s.verdicts) == {"near-1/2"}
    assert s.components == 1


def test_survey_slit():
    slit = dom("slit")
    s = pl.density_survey_2d(slit, n_samples=120, h=1 / 128, mc_samples=2000, anchor=(0.5, 0.5))
    P = np.array(s.points)
    on_slit = (np.abs(P[:, 1] - 0.5) < 1e-6) & (P[:, 0] > 0.26) & (P[:, 0] < 0.74)
    outer = (np.min(np.c_[P, 1 - P], axis=1) < 1e-6)
    V = np.array(s.verdicts)
    assert on_slit.sum() > 10 and outer.sum() > 40
    assert np.all(V[on_slit] == "near-1")
    assert np.mean(V[outer] == "near-1/2") > 0.95


@pytest.mark.parametrize("name", ["disk", "unit-square", "annulus", "cusp"])
def test_survey_soundness_no_density_zero(name):
    s = pl.density_survey_2d(dom(name), n_samples=40, h=1 / 128, mc_samples=2000)
    # isolated cusp tips aside, no sample is certified density-0
    assert sum(f < 0.1 for f in s.finest) <= 1


def test_survey_refuses_disconnected():
    with pytest.raises(PreconditionError, match="connected"):
        pl.density_survey_2d(dom("two-disks"), n_samples=10, h=1 / 64)
    with pytest.raises(PreconditionError):
        pl.density_survey_2d(pl.forest_domain(4), n_samples=10, h=1 / 256)


def test_random_disk_union_connected_and_seeded():
    a = pl.random_disk_union(20, seed=0)
    b = pl.random_disk_union(20, seed=0)
    assert a.description == b.description
    assert len(a.description["children"]) == 20
    assert pl.connected_components(voxelize(a, 1 / 128)) == 1


def test_forest_construction():
    f = pl.forest_domain(3)
    node = f.root
    assert node.columns == 3
    assert 0 < node.total_area() < 1
    # infinite-column area: pi a^2 sum 2^k 16^-k = pi a^2 / 7
    assert node.total_area(1, 60) == pytest.approx(math.pi * 0.25**2 / 7)
    assert node.total_circle_length(1, 60) == pytest.approx(2 * math.pi * 0.25)
    centers = [(2.0**-k, (j + 0.5) * 2.0**-k, pl.forest_radius(0.25, k))
               for k in range(1, 4) for j in range(2**k)]
    for i, (x1, y1, r1) in enumerate(centers):
        for x2, y2, r2 in centers[i + 1:]:
            assert math.hypot(x1 - x2, y1 - y2) > r1 + r2


def test_forest_overlap_error_names_pair():
    with pytest.raises(ValueError, match="column 1"):
        pl.forest_domain(3, ratio=1.0)


def test_forest_segment_in_boundary():
    f = pl.forest_domain(12)
    ys = np.linspace(0, 1, 50)
    for k in (4, 8, 12):
        # the nearest column-k disk to (0, y) is within 2^-k + 2^-(k+1)
        C = np.c_[np.full(2**k, 2.0**-k), (np.arange(2**k) + 0.5) * 2.0**-k]
        d = np.min(np.hypot(C[None, :, 0], C[None, :, 1] - ys[:, None]), axis=1)
        assert np.all(d <= 1.5 * 2.0**-k + 1e-12)
        assert np.all(f.contains(C))
    assert not f.contains(np.c_[np.zeros(50), ys]).any()
