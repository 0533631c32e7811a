"""Contribution-versus-step line charts as standalone SVG."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

WIDTH, HEIGHT = 900, 480
LEFT, RIGHT, TOP, BOTTOM = 70, 140, 50, 60


def _ticks(hi: float, count: int = 5) -> list[float]:
    return [hi * k / count for k in range(count + 1)]


def trajectory_svg(
    snapshots: Sequence[tuple[Sequence[int], Sequence[float]]],
    title: str = "contributions per step",
) -> str:
    """One polyline per player id; a player absent for some steps gets separate segments."""
    plot_w = WIDTH - LEFT - RIGHT
    plot_h = HEIGHT - TOP - BOTTOM
    last_step = max(len(snapshots) - 1, 1)
    top = max((x for _, xs in snapshots for x in xs), default=0.0)
    top = top * 1.05 if top > 0 else 1.0

    def sx(t: int) -> float:
        return LEFT + plot_w * t / last_step

    def sy(x: float) -> float:
        return TOP + plot_h * (1.0 - x / top)

    segments: dict[int, list[list[tuple[float, float]]]] = {}
    present_before: set[int] = set()
    for t, (ids, xs) in enumerate(snapshots):
        for pid, x in zip(ids, xs):
            runs = segments.setdefault(pid, [])
            if pid not in present_before:
                runs.append([])
            runs[-1].append((sx(t), sy(x)))
        present_before = set(ids)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.1f}" y="28" font-size="16" text-anchor="middle" '
        f'font-family="sans-serif">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP + plot_h}" x2="{LEFT + plot_w}" y2="{TOP + plot_h}" stroke="#000"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + plot_h}" stroke="#000"/>',
    ]
    for v in _ticks(top):
        y = sy(v)
        parts.append(f'<line x1="{LEFT - 4}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="#000"/>')
        parts.append(f'<text x="{LEFT - 8}" y="{y + 4:.2f}" font-size="11" text-anchor="end" '
                     f'font-family="sans-serif">{v:.3g}</text>')
    for k in range(6):
        t = round(last_step * k / 5)
        x = sx(t)
        parts.append(f'<line x1="{x:.2f}" y1="{TOP + plot_h}" x2="{x:.2f}" y2="{TOP + plot_h + 4}" stroke="#000"/>')
        parts.append(f'<text x="{x:.2f}" y="{TOP + plot_h + 18}" font-size="11" text-anchor="middle" '
                     f'font-family="sans-serif">{t}</text>')
    parts.append(f'<text x="{LEFT + plot_w / 2:.1f}" y="{HEIGHT - 15}" font-size="13" text-anchor="middle" '
                 f'font-family="sans-serif">step</text>')
    parts.append(f'<text transform="translate(20,{TOP + plot_h / 2:.1f}) rotate(-90)" font-size="13" '
                 f'text-anchor="middle" font-family="sans-serif">contribution</text>')

    for n, pid in enumerate(sorted(segments)):
        colour = PALETTE[n % len(PALETTE)]
        for run in segments[pid]:
            if len(run) == 1:
                x, y = run[0]
                parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2" fill="{colour}"/>')
                continue
            pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in run)
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        ly = TOP + 16 * n
        lx = LEFT + plot_w + 15
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 26}" y="{ly + 4}" font-size="11" font-family="sans-serif">'
                     f'player {pid}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_trajectory_svg(path, snapshots, title: str = "contributions per step") -> None:
    Path(path).write_text(trajectory_svg(snapshots, title), encoding="utf-8")
