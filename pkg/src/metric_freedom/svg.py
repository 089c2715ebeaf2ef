"""Hand-assembled SVG: scatter with fit line, and a budget heatmap.

Output is a pure function of the inputs. Coordinates are printed with fixed
precision and there are no external references.
"""

from __future__ import annotations

from html import escape
from typing import Sequence

WIDTH, HEIGHT = 480, 360
PAD = 50
GREY = "#bdbdbd"


def _f(v: float) -> str:
    return f"{v:.2f}"


def _open(w: int, h: int) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>',
    ]


def _span(vals: Sequence[float]) -> tuple[float, float]:
    lo, hi = min(vals), max(vals)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def scatter_svg(
    xs: Sequence[float],
    ys: Sequence[float],
    line: tuple[float, float] | None = None,
    xlabel: str = "F",
    ylabel: str = "lift_norm",
    title: str = "",
) -> str:
    """Scatter plot; ``line`` is (slope, intercept) drawn across the x range."""
    x0, x1 = _span(xs)
    y0, y1 = _span(ys)
    pw, ph = WIDTH - 2 * PAD, HEIGHT - 2 * PAD

    def px(x):
        return PAD + (x - x0) / (x1 - x0) * pw

    def py(y):
        return HEIGHT - PAD - (y - y0) / (y1 - y0) * ph

    out = _open(WIDTH, HEIGHT)
    out.append(
        f'<rect x="{PAD}" y="{PAD}" width="{pw}" height="{ph}" fill="none" stroke="#000000"/>'
    )
    for x, y in zip(xs, ys):
        out.append(f'<circle cx="{_f(px(x))}" cy="{_f(py(y))}" r="4" fill="#1f77b4"/>')
    if line is not None:
        m, b = line
        out.append(
            f'<line x1="{_f(px(x0))}" y1="{_f(py(m * x0 + b))}" x2="{_f(px(x1))}" '
            f'y2="{_f(py(m * x1 + b))}" stroke="#d62728" stroke-width="1.5"/>'
        )
    out.append(
        f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-size="12">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text x="14" y="{HEIGHT / 2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {HEIGHT / 2:.0f})">{escape(ylabel)}</text>'
    )
    if title:
        out.append(
            f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" font-size="13">'
            f"{escape(title)}</text>"
        )
    for v, lab in ((x0, _f(x0)), (x1, _f(x1))):
        out.append(f'<text x="{_f(px(v))}" y="{HEIGHT - PAD + 14}" text-anchor="middle" font-size="10">{lab}</text>')
    for v, lab in ((y0, _f(y0)), (y1, _f(y1))):
        out.append(f'<text x="{PAD - 4}" y="{_f(py(v))}" text-anchor="end" font-size="10">{lab}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _shade(v: float, lo: float, hi: float) -> str:
    # white (low) to dark blue (high)
    t = 0.0 if hi == lo else (v - lo) / (hi - lo)
    t = min(1.0, max(0.0, t))
    r = round(255 - t * (255 - 8))
    g = round(255 - t * (255 - 48))
    b = round(255 - t * (255 - 107))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(
    M_list: Sequence[int],
    N_list: Sequence[int],
    values: dict[tuple[int, int], float | None],
    operating_point: tuple[int, int] | None = (6, 6),
    title: str = "F_hat by (M, N)",
) -> str:
    """Rows are M, columns are N. Missing values (N < 3, degenerate) render grey."""
    cell = 36
    w = PAD + cell * len(N_list) + 20
    h = PAD + cell * len(M_list) + 40
    present = [v for v in values.values() if v is not None]
    lo, hi = (min(present), max(present)) if present else (0.0, 1.0)
    out = _open(w, h)
    out.append(f'<text x="{w / 2:.0f}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>')
    for j, N in enumerate(N_list):
        out.append(
            f'<text x="{PAD + cell * j + cell / 2:.0f}" y="{PAD - 6}" text-anchor="middle" font-size="10">N={N}</text>'
        )
    for i, M in enumerate(M_list):
        y = PAD + cell * i
        out.append(
            f'<text x="{PAD - 6}" y="{y + cell / 2 + 4:.0f}" text-anchor="end" font-size="10">M={M}</text>'
        )
        for j, N in enumerate(N_list):
            x = PAD + cell * j
            v = values.get((M, N))
            fill = GREY if v is None else _shade(v, lo, hi)
            out.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" stroke="#ffffff"/>'
            )
            if v is not None:
                ink = "#ffffff" if _shade(v, lo, hi) < "#80" else "#000000"
                out.append(
                    f'<text x="{x + cell / 2:.0f}" y="{y + cell / 2 + 4:.0f}" text-anchor="middle" '
                    f'font-size="9" fill="{ink}">{v:.2f}</text>'
                )
    if operating_point is not None and operating_point[0] in M_list and operating_point[1] in N_list:
        i, j = M_list.index(operating_point[0]), N_list.index(operating_point[1])
        out.append(
            f'<rect x="{PAD + cell * j}" y="{PAD + cell * i}" width="{cell}" height="{cell}" '
            f'fill="none" stroke="#d62728" stroke-width="3"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
