"""JSON envelopes and RFC-4180 CSV tables for every report type."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from pathlib import Path

import numpy as np

SCHEMA = "gmt-trace-lab/1"


def clean(obj):
    """JSON-safe copy: numpy -> python, non-finite floats -> strings."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: clean(getattr(obj, f.name)) for f in dataclasses.fields(obj) if f.repr}
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def envelope(kind, payload):
    return {"schema": SCHEMA, "kind": kind, **clean(payload)}


def dumps(doc):
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n"


def fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(fmt(x) for x in v)
    return str(v)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def _coord_header(d):
    return ["x", "y", "z"][:d]


def density_table(rep):
    d = len(rep.point)
    header = _coord_header(d) + ["radius", "fraction", "std_error"]
    rows = [list(rep.point) + [r, f, s] for r, f, s in zip(rep.radii, rep.fractions, rep.std_errors)]
    return header, rows


def density_json(rep):
    doc = clean(rep)
    doc["verdict_text"] = rep.verdict_text
    return doc


def classification_table(cls):
    d = len(cls.points[0]) if cls.points else 2
    header = _coord_header(d) + ["label", "f_finest"]
    return header, [list(p) + [lab, f] for p, lab, f in zip(cls.points, cls.labels, cls.finest)]


def classification_json(cls):
    doc = clean(cls)
    doc["summary"] = cls.fractions()
    return doc


def witness_table(seq):
    header = ["domain", "p", "n", "lp_norm", "grad_norm", "w1p_norm", "trace_dev"]
    rows = [[r.domain, r.p, r.n, r.lp_norm, r.grad_norm, r.w1p_norm, r.trace_dev] for r in seq.reports]
    return header, rows


GEODESIC_HEADER = ["x", "y", "alpha", "d_alpha", "euclid", "ratio"]

SURVEY_HEADER = ["x", "y", "f_finest", "verdict"]


def survey_table(s):
    return SURVEY_HEADER, [[p[0], p[1], f, v] for p, f, v in zip(s.points, s.finest, s.verdicts)]


def rough_trace_table(rep):
    header = ["threshold", "member"]
    return header, [[t, "indeterminate" if m is None else m] for t, m in zip(rep.thresholds, rep.membership)]
