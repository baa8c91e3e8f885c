"""Command-line front end.

Exit codes: 0 success, 2 precondition/input error, 3 resource error,
64 usage error (unknown flags, bad values).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import reports
from .errors import GmtError, PreconditionError, ResourceError

EXIT_OK, EXIT_PRECONDITION, EXIT_RESOURCE, EXIT_USAGE = 0, 2, 3, 64


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# Argument helpers
# ---------------------------------------------------------------------------


def floats(text):
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def points(text):
    """``x,y[,z];x,y[,z];...``"""
    return [floats(p) for p in text.split(";") if p.strip()]


def pairs(text):
    """``x1,y1,z1:x2,y2,z2;...``"""
    out = []
    for item in text.split(";"):
        if not item.strip():
            continue
        a, _, b = item.partition(":")
        if not b:
            raise argparse.ArgumentTypeError(f"pair {item!r} needs 'x:y'")
        out.append((floats(a), floats(b)))
    return out


def box(text):
    """``lo1,lo2[,lo3]:hi1,hi2[,hi3]``"""
    lo, _, hi = text.partition(":")
    if not hi:
        raise argparse.ArgumentTypeError("bbox needs 'lo:hi'")
    return np.array(floats(lo)), np.array(floats(hi))


def _common(p, scene=True):
    if scene:
        p.add_argument("--scene", required=True, help="scene JSON path or builtin:<name>")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, help="output directory (default: JSON on stdout)")
    p.add_argument("--csv", action="store_true", help="print the CSV table instead of JSON")
    p.add_argument("--voxel-budget", type=int, default=2**28)


def _radii(args):
    from .measures import dyadic_radii

    if args.radii:
        return tuple(args.radii)
    return dyadic_radii(args.jmin, args.jmax)


def _radii_flags(p, jmin=1, jmax=10):
    p.add_argument("--radii", type=floats)
    p.add_argument("--jmin", type=int, default=jmin)
    p.add_argument("--jmax", type=int, default=jmax)
    p.add_argument("--samples", type=int, default=10_000, help="Monte Carlo samples per radius")


def build_parser():
    ap = Parser(prog="gmt-trace-lab", description="Numerical geometric measure theory workbench.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("voxelize", help="voxelize a scene and report volume/perimeter")
    _common(p)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--bbox", type=box)

    p = sub.add_parser("density", help="multiscale density at a point")
    _common(p)
    p.add_argument("--point", type=floats, required=True)
    _radii_flags(p)
    p.add_argument("--tolerance", type=float, default=0.02)

    p = sub.add_parser("classify", help="classify boundary samples by density")
    _common(p)
    p.add_argument("--h", type=float, default=1 / 64, help="grid for drawing boundary samples")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--points", type=points, help="explicit boundary points instead of sampling")
    p.add_argument("--bbox", type=box)
    _radii_flags(p)
    p.add_argument("--tolerance", type=float, default=0.02)

    p = sub.add_parser("geodesic", help="d_alpha distances on the voxel graph")
    _common(p)
    p.add_argument("--h", type=float, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--alpha", type=float)
    g.add_argument("--p", type=float, help="alpha = (p-d)/(p-1)")
    p.add_argument("--pairs", type=pairs, help="'x:y;x:y' point pairs")
    p.add_argument("--random", type=int, default=0, help="number of seeded random pairs")
    p.add_argument("--connectivity", type=int)
    p.add_argument("--bbox", type=box)

    p = sub.add_parser("wireframe-report", help="closed-form wireframe analytics")
    _common(p, scene=False)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--layers", type=int, default=4)
    p.add_argument("--p", type=floats, required=True)
    p.add_argument("--q", type=floats, default=[])

    p = sub.add_parser("witness", help="nonuniqueness witness sequence")
    _common(p, scene=False)
    p.add_argument("--domain", choices=["wireframe", "forest"])
    p.add_argument("--scene")
    p.add_argument("--c", type=float, default=5)
    p.add_argument("--layers", type=int, default=4)
    p.add_argument("--ratio", type=float, default=0.25)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--n-max", type=int, default=4)

    p = sub.add_parser("survey2d", help="planar boundary density survey")
    _common(p)
    p.add_argument("--h", type=float, default=1 / 512)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--tolerance", type=float, default=0.1)
    p.add_argument("--bbox", type=box)
    _radii_flags(p, 4, 12)

    p = sub.add_parser("capacity", help="relative p-capacity upper bound")
    _common(p)
    p.add_argument("--set", dest="set_path", required=True, type=Path)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--delta", type=float)
    p.add_argument("--max-iter", type=int, default=20_000)
    p.add_argument("--bbox", type=box)

    p = sub.add_parser("rough-trace", help="rough trace u*(z) of a grid function")
    _common(p)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--u", required=True,
                   help="const:<c> | linear:<a1>,<a2>[,<a3>] | step:<axis>:<t> (1 where x_axis < t)")
    p.add_argument("--point", type=floats, required=True)
    p.add_argument("--levels", type=int, default=32)
    p.add_argument("--samples", type=int, default=4096)
    p.add_argument("--bbox", type=box)
    return ap


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _load(args):
    from .scenes import load_scene

    scene, dom = load_scene(args.scene)
    # optional scene key: a point that must be a voxel center (slits)
    args.anchor = scene.get("anchor") if isinstance(scene, dict) else None
    return scene, dom


def _emit(args, kind, payload, tables):
    """``tables``: list of (suffix, header, rows); the first is the primary CSV."""
    doc = reports.envelope(kind, payload)
    if args.out:
        reports.write_text(args.out / f"{kind}.json", reports.dumps(doc))
        for suffix, header, rows in tables:
            name = f"{kind}.csv" if not suffix else f"{kind}-{suffix}.csv"
            reports.write_text(args.out / name, reports.csv_text(header, rows))
    elif args.csv and tables:
        sys.stdout.write(reports.csv_text(tables[0][1], tables[0][2]))
    else:
        sys.stdout.write(reports.dumps(doc))


def cmd_voxelize(args):
    from .geometry import voxelize
    from .measures import perimeter_estimate

    scene, dom = _load(args)
    vox = voxelize(dom, args.h, bbox=args.bbox, anchor=args.anchor, budget=args.voxel_budget)
    per = perimeter_estimate(vox)
    dist = vox.distance[vox.occupancy]
    payload = {
        "h": vox.h, "origin": vox.origin, "shape": list(vox.shape), "interior_count": vox.interior_count,
        "volume": vox.volume(),
        "distance_min": float(dist.min()) if dist.size else None,
        "distance_max": float(dist.max()) if dist.size else None,
        "perimeter": {"face_count": per.face_count, "normal_corrected": per.normal_corrected},
    }
    header = ["h", "nx", "ny", "nz", "interior_count", "volume", "face_count", "normal_corrected"]
    shape = list(vox.shape) + [1] * (3 - vox.dim)
    rows = [[vox.h, *shape, vox.interior_count, vox.volume(), per.face_count, per.normal_corrected]]
    _emit(args, "voxelize", payload, [("", header, rows)])


def cmd_density(args):
    from .measures import density_at

    _, dom = _load(args)
    rep = density_at(dom, args.point, _radii(args), args.samples, args.seed, args.tolerance)
    _emit(args, "density", reports.density_json(rep), [("", *reports.density_table(rep))])


def cmd_classify(args):
    from .geometry import boundary_samples
    from .measures import classify_boundary

    _, dom = _load(args)
    samples = args.points if args.points else boundary_samples(
        dom, args.h, args.n, args.seed, bbox=args.bbox, anchor=args.anchor, budget=args.voxel_budget)
    if not samples:
        raise PreconditionError("no boundary samples found")
    cls = classify_boundary(dom, samples, _radii(args), args.tolerance, args.samples, args.seed,
                            workers=args.workers)
    _emit(args, "classify", reports.classification_json(cls), [("", *reports.classification_table(cls))])


def cmd_geodesic(args):
    from .geometry import voxelize
    from .metric import alpha_from_p, build_graph, d_alpha_many

    _, dom = _load(args)
    alpha = args.alpha if args.alpha is not None else alpha_from_p(args.p, dom.dim)
    vox = voxelize(dom, args.h, bbox=args.bbox, anchor=args.anchor, budget=args.voxel_budget)
    g = build_graph(vox, alpha, args.connectivity)
    prs = list(args.pairs or [])
    if args.random:
        rng = np.random.default_rng(args.seed)
        C = g.centers()
        for a, b in rng.integers(0, g.n_nodes, size=(args.random, 2)):
            prs.append((C[a].tolist(), C[b].tolist()))
    if not prs:
        raise PreconditionError("no point pairs given (--pairs or --random)")
    d = d_alpha_many(g, prs)
    rows = []
    for (x, y), dv in zip(prs, d):
        e = float(np.linalg.norm(np.subtract(x, y)))
        rows.append([x, y, alpha, dv, e, dv / e if e > 0 else 0.0])
    payload = {"alpha": alpha, "h": args.h, "connectivity": g.connectivity, "nodes": g.n_nodes,
               "edges": g.n_edges, "rows": [dict(zip(reports.GEODESIC_HEADER, r)) for r in rows]}
    _emit(args, "geodesic", payload, [("", reports.GEODESIC_HEADER, rows)])


def wireframe_report(c, layers, ps, qs):
    from . import wireframe as wf
    from .sobolev import analytic_uN_energy

    params = wf.WireframeParams(c, layers)
    crit = []
    for p in ps:
        nu = wf.nonuniqueness_criterion(params, p)
        un = wf.uniqueness_criterion(params, p)
        crit.append({"p": p, "nonunique": nu.holds, "unique": un.holds,
                     "nonunique_status": nu.status, "unique_status": un.status})
    integ = []
    for p in ps:
        for q in qs:
            v = wf.trace_integrability(params, p, q)
            integ.append({"p": p, "q": q, "integrable": v.holds, "status": v.status})
    win = wf.p0_window(params)
    energies = [{"p": p, "N": N, "energy": analytic_uN_energy(params, N, p)}
                for p in ps for N in range(1, layers + 1)]
    inc = []
    for p in ps:
        if p > 3:
            for N in range(0, layers + 1):
                s, cum = wf.increment_estimate(params, p, N)
                inc.append({"p": p, "N": N, "single": s, "cumulative": cum})
    sums, flag = wf.area_bound_partial(params, layers)
    payload = {
        "c": c, "layers": layers,
        "radii": [params.radius(k) for k in range(1, layers + 1)],
        "layer_heights": [wf.layer_height(N) for N in range(0, layers + 1)],
        "wire_lengths": [float(wf.wire_length(N)) for N in range(1, layers + 1)],
        "area_bound_partial_sums": sums, "area_bound_summable": flag.holds,
        "criteria": crit, "integrability": integ,
        "p0_window": {"lo": win.lo, "hi": win.hi, "above_three": win.above_three},
        "energies": energies, "increments": inc,
    }
    tables = [
        ("", ["p", "nonunique", "unique"], [[r["p"], r["nonunique_status"], r["unique_status"]] for r in crit]),
        ("integrability", ["p", "q", "integrable"], [[r["p"], r["q"], r["status"]] for r in integ]),
        ("energies", ["p", "N", "energy"], [[r["p"], r["N"], r["energy"]] for r in energies]),
        ("increments", ["p", "N", "single", "cumulative"],
         [[r["p"], r["N"], r["single"], r["cumulative"]] for r in inc]),
    ]
    return payload, tables


def cmd_wireframe_report(args):
    payload, tables = wireframe_report(args.c, args.layers, args.p, args.q)
    _emit(args, "wireframe-report", payload, tables)


def cmd_witness(args):
    from .sobolev import witness_sequence
    from .wireframe import WireframeParams

    if args.scene:
        _, dom = _load(args)
        spec = dom
    elif args.domain == "wireframe":
        spec = WireframeParams(args.c, max(args.layers, args.n_max))
    elif args.domain == "forest":
        spec = {"type": "forest", "ratio": args.ratio}
    else:
        raise UsageError("witness needs --domain or --scene")
    seq = witness_sequence(spec, args.p, args.n_max)
    payload = reports.clean(seq)
    _emit(args, "witness", payload, [("", *reports.witness_table(seq))])


def cmd_survey2d(args):
    from .planar import density_survey_2d

    _, dom = _load(args)
    s = density_survey_2d(dom, args.n, _radii(args), args.h, args.tolerance, args.seed,
                          args.samples, bbox=args.bbox, anchor=args.anchor, workers=args.workers)
    payload = {k: v for k, v in reports.clean(s).items() if k != "reports"}
    _emit(args, "survey2d", payload, [("", *reports.survey_table(s))])


def cmd_capacity(args):
    from .capacity import SolverConfig, relcap_upper, target_from_description
    from .geometry import voxelize

    _, dom = _load(args)
    if not args.set_path.exists():
        raise FileNotFoundError(f"set file not found: {args.set_path}")
    try:
        desc = json.loads(args.set_path.read_text())
    except json.JSONDecodeError as exc:
        raise PreconditionError(f"{args.set_path}: invalid JSON ({exc})") from None
    vox = voxelize(dom, args.h, bbox=args.bbox, anchor=args.anchor, budget=args.voxel_budget)
    A = target_from_description(desc, vox)
    delta = args.delta if args.delta is not None else 2 * args.h
    est = relcap_upper(vox, A, args.p, delta, SolverConfig(max_iter=args.max_iter),
                       target=str(args.set_path))
    payload = reports.clean(est)
    payload["energy_log"] = reports.clean(est.energy_log)
    rows = [[i, e] for i, e in enumerate(est.energy_log)]
    _emit(args, "capacity", payload, [("", ["iteration", "energy"], rows)])


def parse_function(spec, dim):
    kind, _, rest = spec.partition(":")
    try:
        if kind == "const":
            c = float(rest)
            return lambda P: np.full(P.shape[0], c)
        if kind == "linear":
            a = np.array(floats(rest))
            if a.size != dim:
                raise UsageError(f"linear needs {dim} coefficients")
            return lambda P: P @ a
        if kind == "step":
            ax, _, t = rest.partition(":")
            ax, t = int(ax), float(t)
            return lambda P: (P[:, ax] < t).astype(float)
    except ValueError:
        pass
    raise UsageError(f"bad --u specification {spec!r}")


def cmd_rough_trace(args):
    from .geometry import voxelize
    from .measures import rough_trace
    from .sobolev import GridFunction

    _, dom = _load(args)
    vox = voxelize(dom, args.h, bbox=args.bbox, anchor=args.anchor, budget=args.voxel_budget)
    u = GridFunction.from_function(vox, parse_function(args.u, dom.dim), args.u)
    rep = rough_trace(u, args.point, levels=args.levels, n_samples=args.samples, seed=args.seed)
    _emit(args, "rough-trace", reports.clean(rep), [("", *reports.rough_trace_table(rep))])


COMMANDS = {
    "voxelize": cmd_voxelize, "density": cmd_density, "classify": cmd_classify,
    "geodesic": cmd_geodesic, "wireframe-report": cmd_wireframe_report, "witness": cmd_witness,
    "survey2d": cmd_survey2d, "capacity": cmd_capacity, "rough-trace": cmd_rough_trace,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"gmt-trace-lab: usage error: {exc}\n")
        return EXIT_USAGE
    except (ResourceError, MemoryError) as exc:
        sys.stderr.write(f"gmt-trace-lab: resource error: {exc}\n")
        return EXIT_RESOURCE
    except FileNotFoundError as exc:
        sys.stderr.write(f"gmt-trace-lab: {exc}\n")
        return EXIT_PRECONDITION
    except GmtError as exc:
        sys.stderr.write(f"gmt-trace-lab: {type(exc).__name__}: {exc}\n")
        return EXIT_PRECONDITION
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
