"""Deterministic CSV + standalone SVG heatmaps with a marginal dendrogram."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from mention_lab.xeval.cluster import Merge, average_linkage, impute_absent
from mention_lab.xeval.cross import CrossMatrix

CELL = 22
LABEL_W = 190
DENDRO_H = 70
SEQ_LOW = (247, 251, 255)
SEQ_HIGH = (8, 48, 107)
DIV_LOW = (33, 102, 172)
DIV_MID = (247, 247, 247)
DIV_HIGH = (178, 24, 43)


def _fmt(v: float) -> str:
    return "" if not np.isfinite(v) else f"{v:.6f}"


def _mix(a, b, t):
    return tuple(int(round(a[k] + (b[k] - a[k]) * t)) for k in range(3))


def _color(v, lo, hi, diverging):
    if diverging:
        bound = max(abs(lo), abs(hi)) or 1.0
        t = max(min(v / bound, 1.0), -1.0)
        rgb = _mix(DIV_MID, DIV_HIGH, t) if t >= 0 else _mix(DIV_MID, DIV_LOW, -t)
    else:
        t = 0.0 if hi <= lo else (v - lo) / (hi - lo)
        rgb = _mix(SEQ_LOW, SEQ_HIGH, t)
    return "#%02x%02x%02x" % rgb


def write_csv(path, row_labels, col_labels, values) -> None:
    lines = [",".join(["project", *(_csv_field(c) for c in col_labels)])]
    for label, row in zip(row_labels, values):
        lines.append(",".join([_csv_field(label), *(_fmt(v) for v in row)]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _csv_field(text: str) -> str:
    text = str(text)
    if any(ch in text for ch in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def _dendrogram_paths(merges: list[Merge], order: list[int], x0: float, y_base: float, height: float) -> list[str]:
    """Elbow segments for a dendrogram drawn above columns laid out in ``order``."""
    if not merges:
        return []
    n = len(order)
    pos = {leaf: x0 + (k + 0.5) * CELL for k, leaf in enumerate(order)}
    top = max(m.height for m in merges) or 1.0
    level = {leaf: 0.0 for leaf in range(n)}
    out = []
    for idx, m in enumerate(merges):
        node = n + idx
        h = m.height
        xl, xr = pos[m.left], pos[m.right]
        yl = y_base - height * level[m.left] / top
        yr = y_base - height * level[m.right] / top
        yh = y_base - height * h / top
        out.append(f'<path d="M{xl:.2f},{yl:.2f}V{yh:.2f}H{xr:.2f}V{yr:.2f}" fill="none" stroke="#444" stroke-width="1"/>')
        pos[node] = (xl + xr) / 2.0
        level[node] = h
    return out


def render_svg(row_labels, col_labels, values, merges, order_cols, title: str, diverging: bool = False) -> str:
    """SVG text; cells are value-coloured, absent cells hatched, dendrogram above the columns."""
    values = np.asarray(values, dtype=float)
    nr, nc = values.shape
    finite = values[np.isfinite(values)]
    lo = float(finite.min()) if finite.size else 0.0
    hi = float(finite.max()) if finite.size else 1.0
    width = LABEL_W + nc * CELL + 20
    top = 30 + DENDRO_H
    height = top + nr * CELL + LABEL_W
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        '<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" '
        'patternTransform="rotate(45)"><rect width="6" height="6" fill="#fff"/>'
        '<line x1="0" y1="0" x2="0" y2="6" stroke="#999" stroke-width="2"/></pattern></defs>',
        f'<text x="{LABEL_W}" y="18" font-size="13">{escape(title)}</text>',
        f'<text x="{width - 10}" y="18" text-anchor="end">range {lo:.3f} .. {hi:.3f}</text>',
    ]
    parts.extend(_dendrogram_paths(merges, order_cols, LABEL_W, top - 4, DENDRO_H - 10))
    for i in range(nr):
        y = top + i * CELL
        parts.append(f'<text x="{LABEL_W - 6}" y="{y + CELL * 0.7:.1f}" text-anchor="end">{escape(str(row_labels[i]))}</text>')
        for j in range(nc):
            v = values[i, j]
            x = LABEL_W + j * CELL
            if np.isfinite(v):
                fill = _color(v, lo, hi, diverging)
                parts.append(f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}">'
                             f'<title>{escape(str(row_labels[i]))} / {escape(str(col_labels[j]))}: {v:.4f}</title></rect>')
            else:
                parts.append(f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="url(#hatch)">'
                             f'<title>{escape(str(row_labels[i]))} / {escape(str(col_labels[j]))}: absent</title></rect>')
    base = top + nr * CELL + 6
    for j in range(nc):
        x = LABEL_W + (j + 0.5) * CELL
        parts.append(f'<text x="{x:.1f}" y="{base}" transform="rotate(90 {x:.1f} {base})">'
                     f'{escape(str(col_labels[j]))}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def export_heatmap(matrix: CrossMatrix, order: list[int] | None, path) -> tuple[Path, Path]:
    """Write ``<path>.csv`` and ``<path>.svg`` for a symmetric cross-project matrix."""
    path = Path(path)
    if path.suffix in (".csv", ".svg"):
        path = path.with_suffix("")
    if not path.parent.is_dir():
        raise OSError(f"cannot write heatmap: {path.parent} is not a directory")
    if order is None:
        order = matrix.dendrogram_order or list(range(len(matrix.projects)))
    if len(matrix.projects) >= 2:
        # cluster in display order so merge leaf ids coincide with column positions
        _, merges = average_linkage(matrix.distances()[np.ix_(order, order)],
                                    [matrix.projects[k] for k in order])
    else:
        merges = []
    labels = [matrix.projects[k] for k in order]
    vals = matrix.values[np.ix_(order, order)]
    csv_path, svg_path = path.with_suffix(".csv"), path.with_suffix(".svg")
    write_csv(csv_path, labels, labels, vals)
    title = "mean MAE (count component)" if matrix.metric == "mean_mae" else "mean AUC (zero component)"
    svg_path.write_text(render_svg(labels, labels, vals, merges, list(range(len(order))), title), encoding="utf-8")
    return csv_path, svg_path


def export_coefficients(projects, names, values, path, title: str) -> tuple[Path, Path]:
    """Projects x coefficients heatmap; rows ordered by average-linkage clustering (Euclidean)."""
    path = Path(path)
    if not path.parent.is_dir():
        raise OSError(f"cannot write heatmap: {path.parent} is not a directory")
    values = np.asarray(values, dtype=float)
    n = len(projects)
    if n >= 2:
        filled = impute_absent(values)
        diff = filled[:, None, :] - filled[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
        order, _ = average_linkage(dist, projects)
    else:
        order = list(range(n))
    labels = [projects[k] for k in order]
    vals = values[order] if n else values
    csv_path, svg_path = path.with_suffix(".csv"), path.with_suffix(".svg")
    write_csv(csv_path, labels, names, vals)
    svg_path.write_text(render_svg(labels, names, vals, [], list(range(len(names))), title, diverging=True),
                        encoding="utf-8")
    return csv_path, svg_path
