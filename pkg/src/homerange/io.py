"""File formats: trajectory/track CSV, bitmap masks, density and polyline CSV, SVG, JSON config."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from pathlib import Path

import numpy as np

from .density import DensityField
from .geometry import RegionMask
from .simulator import Trajectory

FLOAT_FMT = "{:.17g}"


class ConfigError(ValueError):
    """Validation failure with a file/line location."""


# --------------------------------------------------------------------------
# trajectory CSV


def trajectory_to_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    for k in sorted(traj.meta):
        buf.write(f"# {k}={traj.meta[k]}\n")
    buf.write("step,time,x,y,on\n")
    f = FLOAT_FMT.format
    for s, t, (x, y), on in zip(traj.steps.tolist(), traj.times.tolist(), traj.points.tolist(), traj.on_flags.tolist()):
        buf.write(f"{s},{f(t)},{f(x)},{f(y)},{int(on)}\n")
    return buf.getvalue()


def write_trajectory(traj: Trajectory, path) -> Path:
    path = Path(path)
    path.write_text(trajectory_to_csv(traj))
    return path


def _parse_meta(value: str):
    for conv in (int, float):
        try:
            return conv(value)
        except ValueError:
            pass
    return value


def ingest_track(path) -> Trajectory:
    """Read a ``step,time,x,y,on`` or ``time,x,y`` CSV; raw timestamps are kept as-is."""
    path = Path(path)
    text = path.read_text()
    meta, body = {}, []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            if k:
                meta[k.strip()] = _parse_meta(v.strip())
        elif line.strip():
            body.append((lineno, line))
    if not body:
        raise ValueError(f"{path}: empty track file")
    header = [h.strip() for h in body[0][1].split(",")]
    if header == ["step", "time", "x", "y", "on"]:
        full = True
    elif header == ["time", "x", "y"]:
        full = False
    else:
        raise ValueError(f"{path}:{body[0][0]}: header must be 'step,time,x,y,on' or 'time,x,y', got {body[0][1]!r}")
    steps, times, xs, ys, ons = [], [], [], [], []
    for lineno, line in body[1:]:
        row = next(csv.reader([line]))
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(v) for v in row]
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"{path}:{lineno}: non-finite value in {line!r}")
        if full:
            s, t, x, y, on = vals
            if on not in (0.0, 1.0):
                raise ValueError(f"{path}:{lineno}: 'on' must be 0 or 1")
            steps.append(int(s))
            ons.append(bool(on))
        else:
            t, x, y = vals
            steps.append(len(steps))
            ons.append(True)
        if times and t < times[-1]:
            raise ValueError(f"{path}:{lineno}: timestamps not sorted ({t} after {times[-1]})")
        times.append(t)
        xs.append(x)
        ys.append(y)
    if not times:
        raise ValueError(f"{path}: no data rows")
    return Trajectory(
        np.column_stack([xs, ys]).astype(float), np.asarray(times), np.asarray(ons, dtype=bool), meta,
        np.asarray(steps, dtype=int),
    )


def rescale_unit_diameter(points: np.ndarray) -> tuple[np.ndarray, dict]:
    """Affine map sending the cloud to diameter 1 with its bounding box at the origin."""
    from scipy.spatial import ConvexHull

    pts = np.asarray(points, dtype=float)
    if len(pts) >= 3:
        try:
            v = pts[ConvexHull(pts).vertices]
        except Exception:
            v = pts
    else:
        v = pts
    diam = float(np.sqrt(((v[:, None] - v[None]) ** 2).sum(-1)).max())
    if diam == 0:
        raise ValueError("cannot rescale a cloud of coincident points")
    lo = pts.min(axis=0)
    return (pts - lo) / diam, {"offset": lo.tolist(), "scale": 1.0 / diam}


# --------------------------------------------------------------------------
# other CSV / text outputs


def write_mask(mask: RegionMask, path) -> Path:
    path = Path(path)
    path.write_text(mask.to_text())
    return path


def read_mask(path) -> RegionMask:
    return RegionMask.from_text(Path(path).read_text())


def density_to_csv(field: DensityField) -> str:
    X, Y = field.grid.mesh()
    f = FLOAT_FMT.format
    rows = ["x,y,value"]
    rows += [f"{f(x)},{f(y)},{f(v)}" for x, y, v in zip(X.ravel().tolist(), Y.ravel().tolist(), field.values.ravel().tolist())]
    return "\n".join(rows) + "\n"


def polylines_to_csv(polylines) -> str:
    f = FLOAT_FMT.format
    rows = ["loop_id,x,y"]
    for k, pl in enumerate(polylines):
        rows += [f"{k},{f(x)},{f(y)}" for x, y in np.asarray(pl).tolist()]
    return "\n".join(rows) + "\n"


def read_polylines_csv(text: str) -> list[np.ndarray]:
    loops: dict = {}
    for row in list(csv.reader(io.StringIO(text)))[1:]:
        loops.setdefault(int(row[0]), []).append((float(row[1]), float(row[2])))
    return [np.array(loops[k]) for k in sorted(loops)]


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


# --------------------------------------------------------------------------
# SVG

_SVG_PX = 300.0


class _Canvas:
    def __init__(self, bbox, pad=0.05):
        x0, y0, x1, y1 = bbox
        w, h = max(x1 - x0, 1e-12), max(y1 - y0, 1e-12)
        self.x0, self.y1 = x0 - pad * w, y1 + pad * h
        self.scale = _SVG_PX / max(w, h)
        self.width = (1 + 2 * pad) * w * self.scale
        self.height = (1 + 2 * pad) * h * self.scale

    def xy(self, x, y):
        return f"{(x - self.x0) * self.scale:.3f},{(self.y1 - y) * self.scale:.3f}"

    def wrap(self, body: list[str]) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width:.3f}" height="{self.height:.3f}" '
            f'viewBox="0 0 {self.width:.3f} {self.height:.3f}">'
        )
        return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *body, "</svg>"]) + "\n"


def _runs(flags):
    """(start, stop, flag) for maximal runs of equal flags."""
    flags = np.asarray(flags, dtype=bool)
    if len(flags) == 0:
        return []
    cuts = np.flatnonzero(flags[1:] != flags[:-1]) + 1
    starts = np.concatenate([[0], cuts])
    stops = np.concatenate([cuts, [len(flags)]])
    return [(int(a), int(b), bool(flags[a])) for a, b in zip(starts, stops)]


def svg_trajectory(traj: Trajectory, extra_polylines=()) -> str:
    pts = traj.points
    boxes = [pts] + [np.asarray(p) for p in extra_polylines]
    allp = np.vstack(boxes)
    cv = _Canvas((*allp.min(0), *allp.max(0)))
    body = []
    for a, b, on in _runs(traj.on_flags):
        seg = pts[a : min(b + 1, len(pts))]
        colour = "black" if on else "red"
        coords = " ".join(cv.xy(x, y) for x, y in seg.tolist())
        body.append(f'<polyline class="{"on" if on else "off"}" fill="none" stroke="{colour}" stroke-width="0.5" points="{coords}"/>')
    body += _paths(cv, extra_polylines, "blue")
    return cv.wrap(body)


def _paths(cv, polylines, colour):
    out = []
    for pl in polylines:
        pl = np.asarray(pl)
        d = "M " + " L ".join(cv.xy(x, y) for x, y in pl.tolist()) + " Z"
        out.append(f'<path fill="none" stroke="{colour}" stroke-width="1" d="{d}"/>')
    return out


def svg_polylines(polylines, points=None) -> str:
    allp = np.vstack([np.asarray(p) for p in polylines] + ([np.asarray(points)] if points is not None else []))
    cv = _Canvas((*allp.min(0), *allp.max(0)))
    body = []
    if points is not None:
        for x, y in np.asarray(points).tolist():
            cx, cy = cv.xy(x, y).split(",")
            body.append(f'<circle cx="{cx}" cy="{cy}" r="0.6" fill="black"/>')
    body += _paths(cv, polylines, "blue")
    return cv.wrap(body)


def svg_density(field: DensityField, polylines=()) -> str:
    g = field.grid
    cv = _Canvas(g.bounds(), pad=0.0)
    vmax = float(field.values.max()) or 1.0
    size = g.spacing * cv.scale
    body = []
    for j in range(g.ny):
        for i in range(g.nx):
            v = field.values[j, i]
            if v <= 0:
                continue
            level = int(round(255 * (1 - v / vmax)))
            x = (g.origin[0] + i * g.spacing - g.spacing / 2 - cv.x0) * cv.scale
            y = (cv.y1 - (g.origin[1] + j * g.spacing + g.spacing / 2)) * cv.scale
            body.append(f'<rect x="{x:.3f}" y="{y:.3f}" width="{size:.3f}" height="{size:.3f}" fill="rgb({level},{level},{level})"/>')
    body += _paths(cv, polylines, "red")
    return cv.wrap(body)


def emit_svg(payload, path, **kw) -> Path:
    """Render a Trajectory, a list of polylines, or a DensityField to a standalone SVG file."""
    if isinstance(payload, Trajectory):
        if len(payload) == 0:
            raise ValueError("empty trajectory")
        text = svg_trajectory(payload, **kw)
    elif isinstance(payload, DensityField):
        text = svg_density(payload, **kw)
    else:
        payload = list(payload)
        if not payload:
            raise ValueError("nothing to render")
        text = svg_polylines(payload, **kw)
    path = Path(path)
    path.write_text(text)
    return path


# --------------------------------------------------------------------------
# config


def _locate(text: str, key: str) -> int:
    needle = f'"{key}"'
    for lineno, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return lineno
    return 1


def load_config(path) -> dict:
    """Parse a JSON run config; JSON syntax errors carry their line number."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: config file not found")
    text = path.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}:1: top level must be an object")
    cfg["_source"] = str(path)
    cfg["_text"] = text
    validate_config(cfg)
    return cfg


def config_error(cfg: dict, key: str, msg: str) -> ConfigError:
    src = cfg.get("_source", "<config>")
    line = _locate(cfg.get("_text", ""), key)
    return ConfigError(f"{src}:{line}: {key}: {msg}")


def validate_config(cfg: dict) -> None:
    """Check every numeric constraint of the downstream types before any work starts."""
    sim = cfg.get("simulation", {})
    checks = [
        (sim, "h", lambda v: v > 0, "must be > 0"),
        (sim, "n_steps", lambda v: int(v) == v and v >= 1, "must be an integer >= 1"),
        (sim, "seed", lambda v: int(v) == v and v >= 0, "must be a non-negative integer"),
    ]
    sch = cfg.get("schedule", {})
    checks += [
        (sch, "delta1_steps", lambda v: int(v) == v and v >= 1, "must be an integer >= 1"),
        (sch, "delta2_steps", lambda v: int(v) == v and v >= 0, "must be an integer >= 0"),
    ]
    est = cfg.get("estimators", {})
    checks += [
        (est, "r", lambda v: v > 0, "must be > 0"),
        (est, "bandwidth", lambda v: v > 0, "must be > 0"),
        (est, "spacing", lambda v: v > 0, "must be > 0"),
        (est, "kernel", lambda v: v in ("gaussian", "epanechnikov"), "must be 'gaussian' or 'epanechnikov'"),
        (est, "levels", lambda v: all(x > 0 for x in v), "levels must be positive"),
    ]
    exp = cfg.get("experiment", {})
    checks += [
        (exp, "reps", lambda v: int(v) == v and v >= 1, "must be an integer >= 1"),
        (exp, "n_steps", lambda v: int(v) == v and v >= 1, "must be an integer >= 1"),
        (exp, "h_values", lambda v: len(v) > 0 and all(x > 0 for x in v), "must be a non-empty list of positives"),
        (exp, "delta1_steps", lambda v: len(v) > 0 and all(x >= 1 for x in v), "must be a non-empty list of integers >= 1"),
        (exp, "delta2_steps", lambda v: len(v) > 0 and all(x >= 0 for x in v), "must be a non-empty list of integers >= 0"),
    ]
    for section, key, ok, msg in checks:
        if key in section:
            try:
                good = ok(section[key])
            except (TypeError, ValueError):
                good = False
            if not good:
                raise config_error(cfg, key, msg)
    inp = cfg.get("input")
    if inp is not None:
        base = Path(cfg.get("_source", ".")).parent
        p = Path(inp) if Path(inp).is_absolute() else base / inp
        if not p.exists():
            raise config_error(cfg, "input", f"file {p} does not exist")
        cfg["input"] = str(p)
    dom = cfg.get("domain")
    if dom is not None:
        from .geometry import domain_from_spec

        try:
            domain_from_spec(dom)
        except (KeyError, ValueError, TypeError) as exc:
            raise config_error(cfg, "domain", f"invalid domain: {exc}") from None
    start = sim.get("start")
    if start is not None:
        from .geometry import domain_from_spec, study_domain

        d = domain_from_spec(dom) if dom else study_domain()
        if not d.contains(float(start[0]), float(start[1])):
            raise config_error(cfg, "start", f"start point {start} is outside the domain")


def output_dir(cli_value=None, cfg=None) -> Path:
    out = cli_value or (cfg or {}).get("output_dir") or os.environ.get("HOMERANGE_OUT") or "out"
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p
