"""Deterministic SVG court diagrams with one colored trajectory per player."""

from __future__ import annotations

from xml.sax.saxutils import escape

from .geometry import CourtModel

PALETTE = (
    "#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
)

SCALE = 50.0  # px per meter
MARGIN = 1.0  # meters drawn around the court
LEGEND_W = 3.0  # meters


def color_for(player_id: int) -> str:
    return PALETTE[player_id % len(PALETTE)]


def _f(v: float) -> str:
    return f"{v:.3f}"


def polylines_from_rows(rows, bindings=None) -> dict[int, list[tuple[float, float]]]:
    """Group trajectory rows into per-id point lists, ordered by frame.

    ``bindings`` maps ``(frame_index, track_id)`` to a player id and rows
    without a binding are dropped; without ``bindings`` the track id is used.
    """
    lines: dict[int, list[tuple[int, float, float]]] = {}
    for frame, tid, x, y, _state in rows:
        pid = tid if bindings is None else bindings.get((frame, tid))
        if pid is None:
            continue
        lines.setdefault(pid, []).append((frame, x, y))
    return {pid: [(x, y) for _, x, y in sorted(pts)] for pid, pts in sorted(lines.items())}


def court_svg(lines: dict[int, list[tuple[float, float]]], court: CourtModel | None = None, title="trajectories") -> str:
    court = court or CourtModel()
    w_m = court.width + 2 * MARGIN
    h_m = court.length + 2 * MARGIN
    vw, vh = (w_m + LEGEND_W) * SCALE, h_m * SCALE

    def sx(x):
        x = min(max(x, -MARGIN), court.width + MARGIN)
        return (x + MARGIN) * SCALE

    def sy(y):
        y = min(max(y, -MARGIN), court.length + MARGIN)
        return (court.length - y + MARGIN) * SCALE

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_f(vw)} {_f(vh)}" '
        f'width="{_f(vw)}" height="{_f(vh)}">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0.000" y="0.000" width="{_f(vw)}" height="{_f(vh)}" fill="#ffffff"/>',
        f'<rect class="court" x="{_f(sx(0))}" y="{_f(sy(court.length))}" '
        f'width="{_f(court.width * SCALE)}" height="{_f(court.length * SCALE)}" '
        'fill="#e8f3e8" stroke="#2f4f2f" stroke-width="2"/>',
        f'<line class="net" x1="{_f(sx(0))}" y1="{_f(sy(court.net_y))}" '
        f'x2="{_f(sx(court.width))}" y2="{_f(sy(court.net_y))}" stroke="#333333" stroke-width="3"/>',
    ]
    # axis ticks every meter along both court edges
    for i in range(int(court.width) + 1):
        out.append(
            f'<text class="tick" x="{_f(sx(i))}" y="{_f(sy(0) + 16)}" font-size="10" '
            f'text-anchor="middle">{i}</text>'
        )
    for j in range(int(court.length) + 1):
        out.append(
            f'<text class="tick" x="{_f(sx(0) - 6)}" y="{_f(sy(j) + 3)}" font-size="10" '
            f'text-anchor="end">{j}</text>'
        )
    out.append(
        f'<text x="{_f(sx(court.width / 2))}" y="{_f(vh - 6)}" font-size="11" '
        'text-anchor="middle">x (m)</text>'
    )
    for k, (pid, pts) in enumerate(sorted(lines.items())):
        if not pts:
            continue
        color = color_for(pid)
        if len(pts) == 1:
            pts = pts * 2
        coords = " ".join(f"{_f(sx(x))},{_f(sy(y))}" for x, y in pts)
        out.append(
            f'<polyline class="player" data-id="{pid}" points="{coords}" fill="none" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        lx, ly = pts[-1]
        out.append(f'<circle cx="{_f(sx(lx))}" cy="{_f(sy(ly))}" r="4" fill="{color}"/>')
        ty = (MARGIN + 0.5 * k) * SCALE
        tx = (w_m + 0.2) * SCALE
        out.append(f'<rect x="{_f(tx)}" y="{_f(ty - 8)}" width="10.000" height="10.000" fill="{color}"/>')
        out.append(
            f'<text x="{_f(tx + 14)}" y="{_f(ty + 1)}" font-size="12">{escape("player " + str(pid))}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def polyline_points(svg_text: str) -> dict[int, list[tuple[float, float]]]:
    """Parse polylines back out of an emitted SVG (SVG pixel coordinates)."""
    import xml.etree.ElementTree as ET

    root = ET.fromstring(svg_text)
    res = {}
    for el in root.iter("{http://www.w3.org/2000/svg}polyline"):
        pts = [tuple(map(float, p.split(","))) for p in el.get("points").split()]
        res[int(el.get("data-id"))] = pts
    return res


def to_world(px: float, py: float, court: CourtModel | None = None) -> tuple[float, float]:
    court = court or CourtModel()
    return px / SCALE - MARGIN, court.length + MARGIN - py / SCALE


__all__ = ["PALETTE", "color_for", "court_svg", "polylines_from_rows", "polyline_points", "to_world"]
