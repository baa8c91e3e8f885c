"""Shipped example scenes (also written to ``scenes/*.json``)."""

from __future__ import annotations

import json
from pathlib import Path

from .errors import PreconditionError
from .geometry import build_domain


def _cusp():
    # {0 < x < 1} minus two disks tangent to the x-axis at the origin:
    # near 0 the region is |y| < x^2 + O(x^4).
    return {"type": "intersection", "children": [
        {"type": "box", "min": [0, -1], "max": [1, 1]},
        {"type": "complement", "child": {"type": "ball", "center": [0, 0.5], "radius": 0.5}},
        {"type": "complement", "child": {"type": "ball", "center": [0, -0.5], "radius": 0.5}},
    ]}


def _nested_frames(levels=8):
    """Connected planar domain with density 0 at the boundary point 0.

    The upper half box minus closed inverted-U frames
    ``2^-k-1 + e_k <= |x|_inf <= 2^-k - e_k, y >= e_k`` (``e_k = 4^-k / 4``).
    The thin channels between the frames all open into the strip
    ``0 < y < e_k``, so the domain stays connected while the frames fill
    almost all of every small half-ball around 0.
    """
    holes = []
    for k in range(1, levels + 1):
        a, b, e = 2.0 ** (-k - 1), 2.0 ** (-k), 4.0 ** (-k) / 4
        lo, hi = a + e, b - e
        for box in ({"min": [-hi, e], "max": [-lo, hi]},
                    {"min": [lo, e], "max": [hi, hi]},
                    {"min": [-hi, lo], "max": [hi, hi]}):
            holes.append({"type": "complement", "child": {"type": "box", **box}})
    return {"type": "intersection",
            "children": [{"type": "box", "min": [-1, 0], "max": [1, 1]}] + holes}


BUILTIN = {
    "halfspace": {"type": "halfspace", "normal": [0, 0, 1], "offset": 0},
    "upper-halfspace": {"type": "halfspace", "normal": [0, 0, -1], "offset": 0},
    "quadrant": {"type": "intersection", "children": [
        {"type": "halfspace", "normal": [-1, 0], "offset": 0},
        {"type": "halfspace", "normal": [0, -1], "offset": 0}]},
    "cusp": _cusp(),
    "disk": {"type": "ball", "center": [0, 0], "radius": 1},
    "ball": {"type": "ball", "center": [0, 0, 0], "radius": 1},
    "unit-square": {"type": "box", "min": [0, 0], "max": [1, 1]},
    "unit-cube": {"type": "box", "min": [0, 0, 0], "max": [1, 1, 1]},
    "slit": {"type": "intersection", "children": [
        {"type": "box", "min": [0, 0], "max": [1, 1]},
        {"type": "complement", "child": {"type": "box", "min": [0.25, 0.5], "max": [0.75, 0.5]}}]},
    "annulus": {"type": "intersection", "children": [
        {"type": "ball", "center": [0, 0], "radius": 1},
        {"type": "complement", "child": {"type": "ball", "center": [0, 0], "radius": 0.5}}]},
    "two-disks": {"type": "union", "children": [
        {"type": "ball", "center": [-1, 0], "radius": 0.5},
        {"type": "ball", "center": [1, 0], "radius": 0.5}]},
    "wireframe-c5": {"type": "wireframe", "c": 5, "layers": 4},
    "wireframe-c2": {"type": "wireframe", "c": 2, "layers": 3},
    "forest": {"type": "forest", "columns": 8, "ratio": 0.25},
    "nested-frames": _nested_frames(),
}

# zero-thickness features are only resolved when voxel centers lie on them
ANCHORS = {"slit": [0.5, 0.5]}


def builtin_scene(name):
    if name == "disk-union-20":
        from .planar import random_disk_union

        return {"domain": random_disk_union(20, seed=0).description}
    if name not in BUILTIN:
        raise PreconditionError(f"unknown builtin scene {name!r}; known: {sorted(BUILTIN) + ['disk-union-20']}")
    scene = {"domain": BUILTIN[name]}
    if name in ANCHORS:
        scene["anchor"] = ANCHORS[name]
    return scene


def builtin_names():
    return sorted(BUILTIN) + ["disk-union-20"]


def load_scene(ref):
    """``builtin:<name>`` or a JSON file path -> (scene dict, domain)."""
    if isinstance(ref, str) and ref.startswith("builtin:"):
        scene = builtin_scene(ref.split(":", 1)[1])
    else:
        p = Path(ref)
        if not p.exists():
            raise FileNotFoundError(f"scene file not found: {p}")
        try:
            scene = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise PreconditionError(f"{p}: invalid JSON ({exc})") from None
    return scene, build_domain(scene)


def write_scene_files(directory):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name in builtin_names():
        (d / f"{name}.json").write_text(json.dumps(builtin_scene(name), indent=2) + "\n")
