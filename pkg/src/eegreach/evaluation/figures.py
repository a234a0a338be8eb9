"""Standalone SVG 1.1 figures and the plain-text accuracy table.

Everything is written with fixed number formatting and no timestamps so
repeated runs produce byte-identical files.
"""
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from ..dataset import CLASS_NAMES

COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")
HEADER = ('<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
          '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
          'width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">\n')


def _doc(w, h, body):
    return HEADER.format(w=w, h=h) + "".join(body) + "</svg>\n"


def _text(x, y, s, size=12, anchor="start", extra=""):
    return (f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" '
            f'text-anchor="{anchor}"{extra}>{escape(str(s))}</text>\n')


def _write(path, text):
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path


def roc_svg(curves, title="One-vs-rest ROC"):
    """Six curves, the chance diagonal and a legend of per-class AUCs."""
    w, h, left, top, size = 640, 440, 60, 40, 340
    px = lambda v: left + v * size
    py = lambda v: top + (1.0 - v) * size
    body = [_text(w / 2, 24, title, 16, "middle"),
            f'<rect x="{left}" y="{top}" width="{size}" height="{size}" '
            'fill="none" stroke="black"/>\n',
            f'<line x1="{px(0):.2f}" y1="{py(0):.2f}" x2="{px(1):.2f}" y2="{py(1):.2f}" '
            'stroke="gray" stroke-dasharray="4 4"/>\n']
    for v in np.linspace(0, 1, 6):
        body.append(_text(px(v), top + size + 16, f"{v:.1f}", 10, "middle"))
        body.append(_text(left - 6, py(v) + 4, f"{v:.1f}", 10, "end"))
    body.append(_text(px(0.5), top + size + 34, "false positive rate", 12, "middle"))
    body.append(_text(16, py(0.5), "true positive rate", 12, "middle",
                      f' transform="rotate(-90 16 {py(0.5):.2f})"'))
    for i, c in enumerate(curves):
        color = COLORS[i % len(COLORS)]
        if c.defined:
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(c.fpr, c.tpr))
            body.append(f'<polyline class="roc" data-class="{c.cls}" points="{pts}" '
                        f'fill="none" stroke="{color}" stroke-width="1.5"/>\n')
        name = CLASS_NAMES[c.cls] if c.cls < len(CLASS_NAMES) else str(c.cls)
        label = f"{c.cls} {name}: AUC {c.auc:.3f}" if c.defined else f"{c.cls} {name}: undefined"
        y = top + 14 + 18 * i
        body.append(f'<line x1="{left + size + 20}" y1="{y - 4}" x2="{left + size + 40}" '
                    f'y2="{y - 4}" stroke="{color}" stroke-width="2"/>\n')
        body.append(_text(left + size + 46, y, label, 12,
                          extra=f' class="auc" data-class="{c.cls}" data-auc="{c.auc!r}"'))
    return _doc(w, h, body)


def _heat(v):
    """White to dark blue; text switches to white on dark cells."""
    if not np.isfinite(v):
        return "#dddddd", "black"
    r = int(round(255 * (1 - 0.85 * v)))
    g = int(round(255 * (1 - 0.6 * v)))
    return f"#{r:02x}{g:02x}ff", "white" if v > 0.55 else "black"


def confusion_svg(cm, title="Confusion matrix (row-normalised)"):
    norm = cm.normalized
    n = len(norm)
    cell, left, top = 56, 120, 60
    w, h = left + n * cell + 30, top + n * cell + 70
    body = [_text(w / 2, 24, title, 16, "middle")]
    for i in range(n):
        name = CLASS_NAMES[i] if i < len(CLASS_NAMES) else str(i)
        body.append(_text(left - 8, top + i * cell + cell / 2 + 4, name, 12, "end"))
        body.append(_text(left + i * cell + cell / 2, top + n * cell + 18, name, 11, "middle"))
        for j in range(n):
            v = norm[i, j]
            fill, ink = _heat(v)
            x, y = left + j * cell, top + i * cell
            body.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" '
                        'stroke="white"/>\n')
            s = f"{v:.2f}" if np.isfinite(v) else "n/a"
            body.append(_text(x + cell / 2, y + cell / 2 + 4, s, 12, "middle",
                              f' class="cell" fill="{ink}"'))
    body.append(_text(left + n * cell / 2, top + n * cell + 44, "predicted", 12, "middle"))
    body.append(_text(left - 8, top - 10, "true", 12, "end"))
    return _doc(w, h, body)


def table_text(grid, columns):
    """Fixed-width model x column accuracy grid (``grid`` maps model -> values)."""
    width = max(12, max(len(m) for m in grid) + 2)
    head = "model".ljust(width) + "".join(c.rjust(9) for c in columns)
    lines = [head, "-" * len(head)]
    for model, values in grid.items():
        lines.append(model.ljust(width) + "".join(f"{v:9.4f}" for v in values))
    return "\n".join(lines) + "\n"


def table_svg(grid, columns, title="Classification accuracy"):
    cw, rh, left, top = 72, 26, 130, 56
    w = left + cw * len(columns) + 20
    h = top + rh * (len(grid) + 1) + 20
    body = [_text(w / 2, 24, title, 16, "middle")]
    for j, c in enumerate(columns):
        body.append(_text(left + j * cw + cw / 2, top, c, 12, "middle", ' font-weight="bold"'))
    for i, (model, values) in enumerate(grid.items()):
        y = top + rh * (i + 1)
        body.append(_text(left - 10, y, model, 12, "end"))
        for j, v in enumerate(values):
            body.append(_text(left + j * cw + cw / 2, y, f"{v:.3f}", 12, "middle"))
    body.append(f'<line x1="{left - 120}" y1="{top + 8}" x2="{w - 10}" y2="{top + 8}" '
                'stroke="black"/>\n')
    return _doc(w, h, body)


def render_figures(metrics, out_dir, grid=None, columns=None):
    """Write ``roc.svg``, ``confusion.svg`` and, when a grid is given, ``table.svg``/``table.txt``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [_write(out / "roc.svg", roc_svg(metrics.curves, f"One-vs-rest ROC ({metrics.model})")),
             _write(out / "confusion.svg",
                    confusion_svg(metrics.confusion, f"Confusion matrix ({metrics.model})"))]
    if grid is not None:
        paths.append(_write(out / "table.svg", table_svg(grid, columns)))
        paths.append(_write(out / "table.txt", table_text(grid, columns)))
    return paths
