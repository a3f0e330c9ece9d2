"""Text and SVG renderings of execution traces.

Each cell is three characters wide: color initial, shape code, marker.
The shape code is uppercase for attended objects; the marker is ``*`` on
the fixation cell, ``h`` under the hand and ``+`` where both coincide.
"""
from __future__ import annotations

import math

from .emulator import ExecResult, VmState
from .world import Scene

SHAPE_CODE = {"square": "s", "circle": "c", "triangle": "t", "star": "x"}
COLOR_CODE = {"red": "r", "green": "g", "blue": "b", "yellow": "y"}
LEGEND = "legend: r/g/b/y color, s=square c=circle t=triangle x=star, uppercase=attended, *=fixation h=hand +=both"


def _marker(state: VmState, pos) -> str:
    fix = state is not None and state.parsed and state.fixation == pos
    hand = state is not None and state.parsed and state.hand == pos
    if fix and hand:
        return "+"
    return "*" if fix else "h" if hand else " "


def render_grid(scene: Scene, state: VmState = None) -> str:
    attended = set()
    if state is not None and state.attended_index is not None:
        a = state.attended_object
        if a is not None:
            attended.add(a.id)
    by_pos = {o.pos: o for o in scene.objects}
    lines = ["   " + "".join(f"{x:<3d}" for x in range(scene.width)).rstrip()]
    for y in range(scene.height):
        cells = []
        for x in range(scene.width):
            o = by_pos.get((x, y))
            if o is None:
                body = ".."
            else:
                code = SHAPE_CODE[o.shape]
                body = COLOR_CODE[o.color] + (code.upper() if o.id in attended else code)
            cells.append(body + _marker(state, (x, y)))
        lines.append(f"{y:<3d}" + "".join(cells).rstrip())
    return "\n".join(lines)


def hand_row(state: VmState) -> str:
    held = "-" if state.held is None else str(state.held)
    return f"H hand=({state.hand.x},{state.hand.y}) held={held} fixation=({state.fixation.x},{state.fixation.y})"


def render_frame(n: int, step, state: VmState) -> str:
    return f"step {n}: {step}\n{render_grid(state.working, state)}\n{hand_row(state)}"


def render_trace(result: ExecResult, legend: bool = True) -> str:
    """Numbered frames, one per executed instruction, plus a final
    diagnostic line when execution stopped on an error."""
    parts = [LEGEND] if legend else []
    for n, t in enumerate(result.trace, 1):
        parts.append(render_frame(n, t.instruction, t.state))
    if not result.ok:
        parts.append(f"error at instruction {result.error_index}: {result.error_kind}: {result.message}")
    return "\n\n".join(parts) + "\n"


_FILL = {"red": "#d62728", "green": "#2ca02c", "blue": "#1f77b4", "yellow": "#e6c229"}


def _shape_svg(shape, cx, cy, r, fill, stroke):
    if shape == "square":
        return (f'<rect x="{cx - r}" y="{cy - r}" width="{2 * r}" height="{2 * r}" '
                f'fill="{fill}" stroke="{stroke}" stroke-width="3"/>')
    if shape == "circle":
        return f'<circle cx="{cx}" cy="{cy}" r="{r}" fill="{fill}" stroke="{stroke}" stroke-width="3"/>'
    if shape == "triangle":
        pts = f"{cx},{cy - r} {cx - r},{cy + r} {cx + r},{cy + r}"
        return f'<polygon points="{pts}" fill="{fill}" stroke="{stroke}" stroke-width="3"/>'
    pts = []
    for k in range(10):
        rad = r if k % 2 == 0 else r * 0.45
        ang = math.pi / 2 + k * math.pi / 5
        pts.append(f"{cx + rad * math.cos(ang):.1f},{cy - rad * math.sin(ang):.1f}")
    return f'<polygon points="{" ".join(pts)}" fill="{fill}" stroke="{stroke}" stroke-width="3"/>'


def render_svg(state: VmState, cell: int = 32) -> str:
    """One frame as SVG: attended object outlined in blue, fixation as a red X."""
    scene = state.working
    w, h = scene.width * cell, scene.height * cell
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
           f'<rect width="{w}" height="{h}" fill="white" stroke="#999"/>']
    att = state.attended_object
    for o in scene.objects:
        cx, cy = o.x * cell + cell // 2, o.y * cell + cell // 2
        stroke = "#1f9bff" if att is not None and att.id == o.id else "none"
        out.append(_shape_svg(o.shape, cx, cy, cell // 2 - 5, _FILL[o.color], stroke))
    if state.parsed:
        fx, fy = state.fixation.x * cell, state.fixation.y * cell
        out.append(f'<path d="M{fx + 6},{fy + 6} L{fx + cell - 6},{fy + cell - 6} '
                   f'M{fx + cell - 6},{fy + 6} L{fx + 6},{fy + cell - 6}" stroke="red" stroke-width="2"/>')
        hx, hy = state.hand.x * cell, state.hand.y * cell
        out.append(f'<rect x="{hx + 1}" y="{hy + 1}" width="{cell - 2}" height="{cell - 2}" '
                   f'fill="none" stroke="black" stroke-dasharray="4 2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
