"""Equilateral-triangle spectrum: barycentric projection of 3-component
probability vectors, 2-D Gaussian kernel density estimation with
highest-density-region contour levels at 25/50/75% of mass, and
deterministic SVG / delimited-text emission."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError
from .tasks import StateLabel, state_label

TEXT_FORMAT = "moodsig.spectrum/1"

VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]])

DEFAULT_LEVELS = (0.25, 0.5, 0.75)

# darkest red for the densest (25%) region, per the figure convention
_CONTOUR_COLORS = {0.25: "#99000d", 0.5: "#de2d26", 0.75: "#fcae91"}
_POINT_PALETTE = ("#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2")


@dataclass(frozen=True)
class SimplexPoint:
    probs: np.ndarray
    xy: np.ndarray


def simplex_project(probs):
    """Barycentric map onto the triangle (0,0), (1,0), (0.5, sqrt(3)/2)."""
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (3,):
        raise ValueError("need a 3-vector")
    if (probs < 0).any():
        raise ValueError("probabilities must be nonnegative")
    total = probs.sum()
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {total}, not 1")
    probs = probs / total
    return SimplexPoint(probs=probs, xy=probs @ VERTICES)


def true_proportions(record, instrument):
    """Observed frequency of (NoAnswer, Normal, Elevated) over the record."""
    if record.n_weeks < 1:
        raise InsufficientDataError("record has no weeks")
    counts = np.zeros(3)
    for obs in record.weeks:
        counts[state_label(instrument.score_of(obs), instrument)] += 1
    return counts / record.n_weeks


def _inside_triangle(x, y, tol=1e-9):
    # barycentric sign tests against the three edges
    s = VERTICES[2][1]
    return (y >= -tol) & (s * x - 0.5 * y >= -tol * s) & (s * (1 - x) - 0.5 * y >= -tol * s)


@dataclass(frozen=True)
class DensityGrid:
    """Node-centered density over the triangle's bounding box.

    density[iy, ix] pairs with (xs[ix], ys[iy]); nodes outside the triangle
    hold density 0 and are excluded from mass normalization. thresholds map
    each contour level to the density value whose superlevel set encloses
    that fraction of the inside mass; contours hold the marching-squares
    polylines at those thresholds."""

    xs: np.ndarray
    ys: np.ndarray
    density: np.ndarray
    inside: np.ndarray
    bandwidth: tuple[float, float]
    thresholds: dict[float, float]
    contours: dict[float, tuple[np.ndarray, ...]]


def _scott_bandwidth(xy):
    n = xy.shape[0]
    sd = xy.std(axis=0)
    h = n ** (-1.0 / 6.0) * sd
    return tuple(float(max(v, 1e-3)) for v in h)


def kde2d(points, bandwidth=None, resolution=200, levels=DEFAULT_LEVELS):
    """Gaussian KDE of projected points, masked to the triangle.

    bandwidth: None for Scott's rule (n^(-1/6) per-axis std, floored at
    1e-3), a scalar, or an (hx, hy) pair."""
    if len(points) < 2:
        raise InsufficientDataError("kde2d needs at least 2 points")
    xy = np.array([p.xy for p in points])
    if bandwidth is None:
        hx, hy = _scott_bandwidth(xy)
    elif np.isscalar(bandwidth):
        hx = hy = float(bandwidth)
    else:
        hx, hy = (float(b) for b in bandwidth)
    if hx <= 0 or hy <= 0:
        raise ValueError("bandwidth must be positive")

    xs = np.linspace(0.0, 1.0, resolution)
    ys = np.linspace(0.0, VERTICES[2][1], resolution)
    inside = _inside_triangle(xs[None, :], ys[:, None])
    norm = 1.0 / (len(points) * 2.0 * np.pi * hx * hy)
    density = np.zeros((resolution, resolution))
    dx2 = ((xs[:, None] - xy[None, :, 0]) / hx) ** 2
    for iy in range(resolution):
        dy2 = ((ys[iy] - xy[:, 1]) / hy) ** 2
        density[iy] = norm * np.exp(-0.5 * (dx2 + dy2[None, :])).sum(axis=1)
    density[~inside] = 0.0

    thresholds = _mass_thresholds(density, inside, levels)
    contours = {
        lv: _marching_squares(xs, ys, density, thresholds[lv]) for lv in levels
    }
    return DensityGrid(
        xs=xs,
        ys=ys,
        density=density,
        inside=inside,
        bandwidth=(hx, hy),
        thresholds=thresholds,
        contours=contours,
    )


def _mass_thresholds(density, inside, levels):
    vals = np.sort(density[inside])[::-1]
    cum = np.cumsum(vals)
    total = cum[-1]
    out = {}
    for lv in levels:
        k = int(np.searchsorted(cum, lv * total, side="left"))
        out[lv] = float(vals[min(k, len(vals) - 1)])
    return out


def contour_mass_fraction(grid, level):
    """Fraction of inside mass in the superlevel set of the level's threshold."""
    t = grid.thresholds[level]
    inside_vals = grid.density[grid.inside]
    return float(inside_vals[inside_vals >= t].sum() / inside_vals.sum())


def _interp(p1, v1, p2, v2, t):
    s = 0.5 if v2 == v1 else (t - v1) / (v2 - v1)
    return (p1[0] + s * (p2[0] - p1[0]), p1[1] + s * (p2[1] - p1[1]))


def _marching_squares(xs, ys, Z, t):
    """Iso-contour polylines of Z at value t, as (k, 2) xy arrays."""
    ny, nx = Z.shape
    above = Z >= t
    # cells whose corners disagree are the only ones that can hold segments
    cell = above[:-1, :-1] | above[:-1, 1:] | above[1:, :-1] | above[1:, 1:]
    cell &= ~(above[:-1, :-1] & above[:-1, 1:] & above[1:, :-1] & above[1:, 1:])
    segments = []
    for iy, ix in zip(*np.nonzero(cell)):
        bl = (xs[ix], ys[iy]), Z[iy, ix]
        br = (xs[ix + 1], ys[iy]), Z[iy, ix + 1]
        tl = (xs[ix], ys[iy + 1]), Z[iy + 1, ix]
        tr = (xs[ix + 1], ys[iy + 1]), Z[iy + 1, ix + 1]
        case = (
            1 * (bl[1] >= t) + 2 * (br[1] >= t) + 4 * (tr[1] >= t) + 8 * (tl[1] >= t)
        )
        bottom = _interp(bl[0], bl[1], br[0], br[1], t)
        right = _interp(br[0], br[1], tr[0], tr[1], t)
        top = _interp(tl[0], tl[1], tr[0], tr[1], t)
        left = _interp(bl[0], bl[1], tl[0], tl[1], t)
        if case in (1, 14):
            segments.append((left, bottom))
        elif case in (2, 13):
            segments.append((bottom, right))
        elif case in (3, 12):
            segments.append((left, right))
        elif case in (4, 11):
            segments.append((right, top))
        elif case in (6, 9):
            segments.append((bottom, top))
        elif case in (7, 8):
            segments.append((left, top))
        elif case in (5, 10):
            center_above = (bl[1] + br[1] + tl[1] + tr[1]) / 4.0 >= t
            if (case == 5) == center_above:
                segments.append((left, top))
                segments.append((bottom, right))
            else:
                segments.append((left, bottom))
                segments.append((right, top))
    return _chain_segments(segments)


def _chain_segments(segments):
    """Join shared endpoints into polylines, deterministically."""

    def key(p):
        return (round(p[0], 9), round(p[1], 9))

    by_end = {}
    for i, (a, b) in enumerate(segments):
        by_end.setdefault(key(a), []).append(i)
        by_end.setdefault(key(b), []).append(i)
    used = [False] * len(segments)
    polylines = []
    for start in range(len(segments)):
        if used[start]:
            continue
        used[start] = True
        a, b = segments[start]
        chain = [a, b]
        for _ in range(2):
            # extend forward from the current tail, then flip and repeat
            while True:
                tail = key(chain[-1])
                nxt = next((j for j in by_end.get(tail, ()) if not used[j]), None)
                if nxt is None:
                    break
                used[nxt] = True
                a2, b2 = segments[nxt]
                chain.append(b2 if key(a2) == tail else a2)
            chain.reverse()
        polylines.append(np.array(chain))
    return tuple(polylines)


def _fmt(v):
    return repr(float(v))


def emit_plot(grid, points, base_path, point_labels=None,
              vertex_labels=("V1", "V2", "V3"), metadata=None):
    """Write `<base>.svg` (self-contained graphic) and `<base>.txt`
    (exact-round-trip delimited data); returns the two paths.

    metadata key/value strings are embedded in both files (text `meta` lines,
    SVG comments). Both files are byte-identical across reruns for identical
    inputs."""
    base = str(base_path)
    if point_labels is None:
        point_labels = [""] * len(points)
    if len(point_labels) != len(points):
        raise ValueError("point_labels length mismatch")
    metadata = dict(metadata or {})
    svg_path, txt_path = base + ".svg", base + ".txt"
    with open(txt_path, "w") as fh:
        fh.write(_plot_text(grid, points, point_labels, vertex_labels, metadata))
    with open(svg_path, "w") as fh:
        fh.write(_plot_svg(grid, points, point_labels, vertex_labels, metadata))
    return svg_path, txt_path


def _plot_text(grid, points, point_labels, vertex_labels, metadata):
    lines = [f"format\t{TEXT_FORMAT}"]
    for k in sorted(metadata):
        lines.append(f"meta\t{k}\t{metadata[k]}")
    lines.append("vertices\t" + "\t".join(vertex_labels))
    lines.append(f"bandwidth\t{_fmt(grid.bandwidth[0])}\t{_fmt(grid.bandwidth[1])}")
    lines.append(f"xs\t{len(grid.xs)}\t" + "\t".join(_fmt(v) for v in grid.xs))
    lines.append(f"ys\t{len(grid.ys)}\t" + "\t".join(_fmt(v) for v in grid.ys))
    for lv in sorted(grid.thresholds):
        lines.append(f"threshold\t{_fmt(lv)}\t{_fmt(grid.thresholds[lv])}")
    for iy in range(grid.density.shape[0]):
        lines.append(
            f"density\t{iy}\t" + "\t".join(_fmt(v) for v in grid.density[iy])
        )
        lines.append(
            f"inside\t{iy}\t" + "\t".join(str(int(v)) for v in grid.inside[iy])
        )
    for lv in sorted(grid.contours):
        for poly in grid.contours[lv]:
            coords = "\t".join(_fmt(v) for xy in poly for v in xy)
            lines.append(f"contour\t{_fmt(lv)}\t{len(poly)}\t{coords}")
    for p, label in zip(points, point_labels):
        vals = "\t".join(_fmt(v) for v in p.probs) + "\t" + "\t".join(
            _fmt(v) for v in p.xy
        )
        lines.append(f"point\t{label}\t{vals}")
    return "\n".join(lines) + "\n"


def read_plot_text(path):
    """Parse a `<base>.txt` spectrum file back into plain arrays."""
    out = {"thresholds": {}, "contours": [], "points": [], "meta": {}}
    density_rows, inside_rows = {}, {}
    with open(path) as fh:
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            tag = parts[0]
            if tag == "format":
                if parts[1] != TEXT_FORMAT:
                    raise ValueError(f"unsupported spectrum format {parts[1]!r}")
            elif tag == "meta":
                out["meta"][parts[1]] = parts[2]
            elif tag == "vertices":
                out["vertices"] = tuple(parts[1:])
            elif tag == "bandwidth":
                out["bandwidth"] = (float(parts[1]), float(parts[2]))
            elif tag in ("xs", "ys"):
                out[tag] = np.array([float(v) for v in parts[2:]])
            elif tag == "threshold":
                out["thresholds"][float(parts[1])] = float(parts[2])
            elif tag == "density":
                density_rows[int(parts[1])] = [float(v) for v in parts[2:]]
            elif tag == "inside":
                inside_rows[int(parts[1])] = [bool(int(v)) for v in parts[2:]]
            elif tag == "contour":
                k = int(parts[2])
                vals = [float(v) for v in parts[3 : 3 + 2 * k]]
                out["contours"].append(
                    (float(parts[1]), np.array(vals).reshape(k, 2))
                )
            elif tag == "point":
                vals = [float(v) for v in parts[2:7]]
                out["points"].append(
                    (parts[1], np.array(vals[:3]), np.array(vals[3:5]))
                )
    out["density"] = np.array([density_rows[i] for i in sorted(density_rows)])
    out["inside"] = np.array([inside_rows[i] for i in sorted(inside_rows)])
    return out


_SVG_W, _SVG_H, _MARGIN = 720, 660, 48


def _to_px(x, y):
    scale = (_SVG_W - 2 * _MARGIN) / 1.0
    px = _MARGIN + x * scale
    py = _SVG_H - _MARGIN - y * scale
    return px, py


def _plot_svg(grid, points, point_labels, vertex_labels, metadata):
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" '
        f'height="{_SVG_H}" viewBox="0 0 {_SVG_W} {_SVG_H}">',
    ]
    for k in sorted(metadata):
        parts.append(f"<!-- {k}: {metadata[k]} -->")
    parts.append(f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>')
    dmax = grid.density.max()
    if dmax > 0:
        dx = grid.xs[1] - grid.xs[0] if len(grid.xs) > 1 else 0.01
        dy = grid.ys[1] - grid.ys[0] if len(grid.ys) > 1 else 0.01
        scale = (_SVG_W - 2 * _MARGIN) / 1.0
        w = dx * scale
        h = dy * scale
        parts.append('<g stroke="none" fill="#2b5f9e">')
        for iy in range(grid.density.shape[0]):
            alphas = np.round(0.85 * grid.density[iy] / dmax, 3)
            ix = 0
            n = len(alphas)
            while ix < n:
                a = alphas[ix]
                j = ix
                while j + 1 < n and alphas[j + 1] == a:
                    j += 1
                if a >= 0.005:
                    x0, y0 = _to_px(grid.xs[ix] - dx / 2, grid.ys[iy] + dy / 2)
                    parts.append(
                        f'<rect x="{x0:.2f}" y="{y0:.2f}" '
                        f'width="{w * (j - ix + 1):.2f}" height="{h:.2f}" '
                        f'fill-opacity="{a}"/>'
                    )
                ix = j + 1
        parts.append("</g>")
    for lv in sorted(grid.contours):
        color = _CONTOUR_COLORS.get(lv, "#de2d26")
        parts.append(f'<g fill="none" stroke="{color}" stroke-width="2">')
        for poly in grid.contours[lv]:
            coords = " ".join(
                f"{px:.2f},{py:.2f}" for px, py in (_to_px(x, y) for x, y in poly)
            )
            parts.append(f'<polyline points="{coords}"/>')
        parts.append("</g>")
    tri = " ".join(f"{px:.2f},{py:.2f}" for px, py in (_to_px(*v) for v in VERTICES))
    parts.append(f'<polygon points="{tri}" fill="none" stroke="#333333" stroke-width="2"/>')

    color_of = {}
    for label in point_labels:
        if label not in color_of:
            color_of[label] = _POINT_PALETTE[len(color_of) % len(_POINT_PALETTE)]
    parts.append('<g stroke="#222222" stroke-width="0.6">')
    for p, label in zip(points, point_labels):
        px, py = _to_px(p.xy[0], p.xy[1])
        parts.append(
            f'<circle cx="{px:.2f}" cy="{py:.2f}" r="4" '
            f'fill="{color_of[label]}" fill-opacity="0.85"/>'
        )
    parts.append("</g>")
    anchors = [("end", 12, 16), ("start", -12, 16), ("middle", 0, -10)]
    for (vx, vy), lab, (anchor, ox, oy) in zip(VERTICES, vertex_labels, anchors):
        px, py = _to_px(vx, vy)
        parts.append(
            f'<text x="{px + ox:.2f}" y="{py + oy:.2f}" text-anchor="{anchor}" '
            f'font-family="Helvetica,Arial,sans-serif" font-size="16" '
            f'fill="#111111">{lab}</text>'
        )
    legend_y = _MARGIN
    for label, color in color_of.items():
        if not label:
            continue
        parts.append(
            f'<circle cx="{_SVG_W - 150:.2f}" cy="{legend_y:.2f}" r="5" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{_SVG_W - 138:.2f}" y="{legend_y + 5:.2f}" '
            f'font-family="Helvetica,Arial,sans-serif" font-size="14" '
            f'fill="#111111">{label}</text>'
        )
        legend_y += 22
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
