"""Deterministic SVG heatmaps of simulation grids.

One file per (model, instruction, N): thresholds run top to bottom
(strictest first), non-passing proportion left to right, every populated
cell is annotated with its mean R^2 to two decimals. The color scale is
fixed: R^2 is clamped to [0, 1] and interpolated through red (0.0),
near-white (0.5), blue (1.0). Empty cells are hatched. Output is plain
generated text, byte-identical for identical input.
"""

from __future__ import annotations

from pathlib import Path

from .io_utils import atomic_write_text


class SchemaMismatch(ValueError):
    """The CSV does not follow the heatmap export schema."""


_STOPS = ((0.0, (202, 0, 32)), (0.5, (247, 247, 247)), (1.0, (5, 113, 176)))

CELL_W = 56
CELL_H = 30
MARGIN_LEFT = 74
MARGIN_TOP = 56
MARGIN_RIGHT = 16
MARGIN_BOTTOM = 16


def color_for(r2: float) -> tuple[int, int, int]:
    t = min(max(r2, 0.0), 1.0)
    for (t0, c0), (t1, c1) in zip(_STOPS, _STOPS[1:]):
        if t <= t1:
            frac = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            return tuple(round(a + (b - a) * frac) for a, b in zip(c0, c1))
    return _STOPS[-1][1]


def _text_color(rgb: tuple[int, int, int]) -> str:
    luminance = (0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]) / 255.0
    return "#000000" if luminance > 0.5 else "#ffffff"


def _fmt_t(value: float) -> str:
    return f"{value:g}"


def render_group_svg(
    model: str,
    instruction: str,
    n: int,
    t_values: list[float],
    x_values: list[int],
    cells: dict[tuple[float, int], float | None],
    comments: tuple[str, ...] = (),
) -> str:
    width = MARGIN_LEFT + CELL_W * len(x_values) + MARGIN_RIGHT
    height = MARGIN_TOP + CELL_H * len(t_values) + MARGIN_BOTTOM
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
    ]
    for comment in comments:
        parts.append(f"<!-- {comment} -->")
    parts.append(
        "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\">"
        "<rect width=\"6\" height=\"6\" fill=\"#e8e8e8\"/>"
        "<line x1=\"0\" y1=\"6\" x2=\"6\" y2=\"0\" stroke=\"#b0b0b0\" stroke-width=\"1\"/>"
        "</pattern></defs>"
    )
    parts.append(f'<rect width="{width}" height="{height}" fill="#ffffff"/>')
    parts.append(
        f'<text x="{width / 2:.1f}" y="16" font-family="sans-serif" font-size="13" '
        f'text-anchor="middle">{model} / {instruction} / N={n}</text>'
    )
    parts.append(
        f'<text x="{MARGIN_LEFT + CELL_W * len(x_values) / 2:.1f}" y="32" '
        'font-family="sans-serif" font-size="11" text-anchor="middle">X (% non-passing)</text>'
    )
    parts.append(
        f'<text x="14" y="{MARGIN_TOP + CELL_H * len(t_values) / 2:.1f}" '
        'font-family="sans-serif" font-size="11" text-anchor="middle" '
        f'transform="rotate(-90 14 {MARGIN_TOP + CELL_H * len(t_values) / 2:.1f})">'
        "T (threshold)</text>"
    )
    for col, x in enumerate(x_values):
        cx = MARGIN_LEFT + col * CELL_W + CELL_W / 2
        parts.append(
            f'<text x="{cx:.1f}" y="{MARGIN_TOP - 6}" font-family="sans-serif" '
            f'font-size="10" text-anchor="middle">{x}</text>'
        )
    for row, t in enumerate(t_values):
        cy = MARGIN_TOP + row * CELL_H + CELL_H / 2 + 3
        parts.append(
            f'<text x="{MARGIN_LEFT - 8}" y="{cy:.1f}" font-family="sans-serif" '
            f'font-size="10" text-anchor="end">{_fmt_t(t)}</text>'
        )
    for row, t in enumerate(t_values):
        for col, x in enumerate(x_values):
            px = MARGIN_LEFT + col * CELL_W
            py = MARGIN_TOP + row * CELL_H
            value = cells.get((t, x))
            if value is None:
                parts.append(
                    f'<rect x="{px}" y="{py}" width="{CELL_W}" height="{CELL_H}" '
                    'fill="url(#hatch)" stroke="#ffffff" stroke-width="1"/>'
                )
                continue
            rgb = color_for(value)
            parts.append(
                f'<rect x="{px}" y="{py}" width="{CELL_W}" height="{CELL_H}" '
                f'fill="rgb({rgb[0]},{rgb[1]},{rgb[2]})" stroke="#ffffff" stroke-width="1"/>'
            )
            parts.append(
                f'<text x="{px + CELL_W / 2:.1f}" y="{py + CELL_H / 2 + 3.5:.1f}" '
                f'font-family="sans-serif" font-size="10" text-anchor="middle" '
                f'fill="{_text_color(rgb)}">{value:.2f}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_heatmap(grid_csv: str | Path, out_dir: str | Path) -> list[Path]:
    """Render one SVG per (model, instruction, N) found in the CSV."""
    from .simulation import heatmap_from_csv_lines

    lines = Path(grid_csv).read_text(encoding="utf-8").splitlines()
    grid = heatmap_from_csv_lines(lines)
    out_dir = Path(out_dir)

    groups: dict[tuple[str, str, int], dict[tuple[float, int], float | None]] = {}
    for (model, instruction, n, t, x), cell in grid.cells.items():
        groups.setdefault((model, instruction, n), {})[(t, x)] = cell.mean_r2

    from . import __version__

    written = []
    for (model, instruction, n) in sorted(groups):
        svg = render_group_svg(
            model,
            instruction,
            n,
            list(grid.t_values),
            list(grid.x_values),
            groups[(model, instruction, n)],
            comments=(f"generated-by=prescreen {__version__}", f"seed={grid.seed}"),
        )
        path = out_dir / f"heatmap_{model}_{instruction}_N{n}.svg"
        atomic_write_text(path, svg)
        written.append(path)
    return written
