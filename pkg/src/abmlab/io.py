"""File formats: JSON with exact floats, trajectory and density CSV, SVG figures."""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .configurations import LINE, DensityProfile, DiscreteConfig, Torus

__all__ = [
    "FORMAT_VERSION",
    "dumps",
    "write_json",
    "read_json",
    "config_to_dict",
    "config_from_dict",
    "profile_to_dict",
    "profile_from_dict",
    "trajectory_csv",
    "read_trajectory_csv",
    "density_csv",
    "grid_csv",
    "spacetime_svg",
    "density_svg",
    "MAX_SEGMENTS",
]

FORMAT_VERSION = 1
MAX_SEGMENTS = 100_000


def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        # JSON has no literal for these; keep them readable and parseable by Python
        return json.dumps(x)
    s = format(x, ".17g")
    # keep a float literal so -0.0 and integral values survive a JSON round trip
    return s if any(c in s for c in ".e") else s + ".0"


def _encode(obj, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," + pad if indent else ", "
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [json.dumps(str(k)) + ": " + _encode(v, indent, level + 1) for k, v in obj.items()]
        return "{" + pad + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, 0, 0) for v in obj) + "]"
        return "[" + pad + sep.join(_encode(v, indent, level + 1) for v in obj) + end + "]"
    if hasattr(obj, "to_dict"):
        return _encode(obj.to_dict(), indent, level)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written in 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _domain_dict(domain):
    return "line" if domain == LINE else {"torus": float(domain.circumference)}


def _domain_from(d):
    if d in (None, "line"):
        return LINE
    return Torus(float(d["torus"]))


def config_to_dict(x: DiscreteConfig) -> dict:
    return {"format_version": FORMAT_VERSION, "domain": _domain_dict(x.domain),
            "positions": [float(p) for p in x.positions]}


def config_from_dict(d: dict) -> DiscreteConfig:
    return DiscreteConfig(np.asarray(d["positions"], dtype=float), _domain_from(d.get("domain")))


def profile_to_dict(u: DensityProfile) -> dict:
    return {"format_version": FORMAT_VERSION, **u.to_dict()}


def profile_from_dict(d: dict) -> DensityProfile:
    return DensityProfile.from_dict(d)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence], kind: str) -> str:
    buf = _io.StringIO()
    buf.write(f"# abmlab {kind} format_version={FORMAT_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def trajectory_csv(states) -> str:
    """CSV text with columns ``time, particle_count, positions`` (semicolon-joined)."""
    rows = []
    for s in states:
        pos = np.asarray(getattr(s, "positions", s.interfaces.positions if hasattr(s, "interfaces") else s))
        rows.append([float(s.time), int(pos.size), ";".join(_fmt_float(float(p)) for p in pos)])
    return _csv_text(["time", "particle_count", "positions"], rows, "trajectory")


def read_trajectory_csv(text: str) -> list[tuple[float, np.ndarray]]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        pos = np.array([float(v) for v in row["positions"].split(";") if v], dtype=float)
        if pos.size != int(row["particle_count"]):
            raise ValueError("particle_count does not match positions")
        out.append((float(row["time"]), pos))
    return out


DENSITY_COLUMNS = ["x", "t", "epsilon", "estimate", "std_error", "replicas", "route"]


def density_csv(rows: Iterable[dict]) -> str:
    return _csv_text(DENSITY_COLUMNS, ([r[c] for c in DENSITY_COLUMNS] for r in rows), "density")


def grid_csv(rows: Sequence[dict], columns: Sequence[str] | None = None, kind: str = "grid") -> str:
    rows = list(rows)
    cols = list(columns) if columns else (list(rows[0].keys()) if rows else [])
    return _csv_text(cols, ([r.get(c, "") for c in cols] for r in rows), kind)


def _svg_header(width: float, height: float) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect x="0" y="0" width="{width:.0f}" height="{height:.0f}" fill="white"/>',
    ]


def spacetime_svg(frames, domain=LINE, window=None, shaded: bool = False, width: int = 800, height: int = 600,
                  max_segments: int = MAX_SEGMENTS) -> str:
    """Space-time diagram: space horizontal, time increasing downwards.

    Parameters
    ----------
    frames : sequence of (time, positions, ids) or (time, positions, ids, left_color)
        Snapshots of one run; particles are joined across frames by id.
    shaded : bool
        Shade the regions of colour 1, using the colour left of the first
        particle stored as the fourth entry of every frame.
    max_segments : int
        Frames are decimated uniformly until the segment count fits.
    """
    frames = list(frames)
    if window is None:
        if isinstance(domain, Torus):
            window = (0.0, float(domain.circumference))
        else:
            allpos = np.concatenate([np.asarray(f[1], float) for f in frames]) if frames else np.empty(0)
            window = (float(allpos.min()) - 1, float(allpos.max()) + 1) if allpos.size else (-1.0, 1.0)
    lo, hi = window
    t_max = max((f[0] for f in frames), default=1.0) or 1.0

    def seg_count(fs):
        return sum(min(len(a[1]), len(b[1])) for a, b in zip(fs, fs[1:]))

    stride = 1
    keep = frames
    while len(keep) > 2 and seg_count(keep) > max_segments:
        stride += 1
        keep = frames[::stride]
        if keep[-1] is not frames[-1]:
            keep = keep + [frames[-1]]
    frames = keep

    def X(x):
        return (float(x) - lo) / (hi - lo) * width

    def Y(t):
        return float(t) / t_max * height

    out = _svg_header(width, height)
    if shaded:
        out.append('<g fill="#b9cbe6" stroke="none">')
        for k in range(len(frames) - 1):
            t0, pos = frames[k][0], np.asarray(frames[k][1], float)
            t1 = frames[k + 1][0]
            edges = [lo, *[p for p in pos if lo < p < hi], hi]
            n_before = int(np.searchsorted(pos, lo, side="right"))
            c = (int(frames[k][3]) + n_before) % 2
            for a, b in zip(edges[:-1], edges[1:]):
                if c == 1 and b > a:
                    out.append(f'<rect x="{X(a):.2f}" y="{Y(t0):.2f}" width="{X(b) - X(a):.2f}" '
                               f'height="{max(Y(t1) - Y(t0), 0.01):.2f}"/>')
                c = 1 - c
        out.append("</g>")
    out.append('<g fill="none" stroke="black" stroke-width="0.8">')
    paths: dict[int, list[list[tuple[float, float]]]] = {}
    circ = float(domain.circumference) if isinstance(domain, Torus) else None
    for fr in frames:
        t, pos, ids = fr[0], fr[1], fr[2]
        for p, i in zip(np.asarray(pos, float), np.asarray(ids, int)):
            runs = paths.setdefault(int(i), [[]])
            cur = runs[-1]
            if cur and circ is not None and abs(p - cur[-1][1]) > circ / 2:
                runs.append([])
                cur = runs[-1]
            cur.append((t, p))
    for i in sorted(paths):
        for run in paths[i]:
            if len(run) < 2:
                continue
            pts = " ".join(f"{X(p):.2f},{Y(t):.2f}" for t, p in run)
            out.append(f'<polyline points="{pts}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def density_svg(curves: dict, reference=None, width: int = 640, height: int = 400) -> str:
    """Density-versus-x plot.

    ``curves`` maps a label to ``(x, estimate, std_error)`` arrays; markers
    carry error bars of one standard error.  ``reference`` is an optional
    ``(x, y)`` pair drawn as a line.
    """
    xs = [np.asarray(v[0], float) for v in curves.values()]
    ys = [np.asarray(v[1], float) + np.asarray(v[2], float) for v in curves.values()]
    if reference is not None:
        xs.append(np.asarray(reference[0], float))
        ys.append(np.asarray(reference[1], float))
    allx = np.concatenate(xs) if xs else np.array([0.0, 1.0])
    ally = np.concatenate(ys) if ys else np.array([0.0, 1.0])
    x0, x1 = float(allx.min()), float(allx.max())
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    y1 = float(max(ally.max(), 1e-12)) * 1.1
    m = 40

    def X(x):
        return m + (x - x0) / (x1 - x0) * (width - 2 * m)

    def Y(y):
        return height - m - y / y1 * (height - 2 * m)

    out = _svg_header(width, height)
    out.append(f'<line x1="{m}" y1="{height - m}" x2="{width - m}" y2="{height - m}" stroke="black"/>')
    out.append(f'<line x1="{m}" y1="{m}" x2="{m}" y2="{height - m}" stroke="black"/>')
    out.append(f'<text x="{m}" y="{m - 8}" font-size="11">max {y1 / 1.1:.4g}</text>')
    if reference is not None:
        pts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(*reference))
        out.append(f'<polyline points="{pts}" fill="none" stroke="#c03030" stroke-width="1.2"/>')
    palette = ["#1f4e9c", "#2e8b57", "#8a4f9e", "#b8860b"]
    for k, (label, (x, y, se)) in enumerate(curves.items()):
        col = palette[k % len(palette)]
        out.append(f'<g stroke="{col}" fill="{col}">')
        for a, b, s in zip(np.asarray(x, float), np.asarray(y, float), np.asarray(se, float)):
            out.append(f'<line x1="{X(a):.2f}" y1="{Y(b - s):.2f}" x2="{X(a):.2f}" y2="{Y(b + s):.2f}"/>')
            out.append(f'<circle cx="{X(a):.2f}" cy="{Y(b):.2f}" r="2.5"/>')
        out.append(f'<text x="{width - m - 150}" y="{m + 14 * (k + 1)}" font-size="11" stroke="none">{label}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
