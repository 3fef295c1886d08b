"""Hand-emitted SVG figures (polylines and rects only, no dependencies).

Output is a pure function of the inputs: fixed-precision coordinates,
LF-joined, no timestamps — identical input gives byte-identical files.
Long series are stride-downsampled to keep files viewable; regime shading
is drawn as translucent rects behind the curves (green = upper well /
up-regime, red = lower well / down-regime, gray = in between).
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["render_two_panel", "render_hmm_figure", "label_color"]

_COLORS = {1: "#2ca02c", -1: "#d62728", 0: "#bbbbbb"}
_MAX_POINTS = 4000


def label_color(label: int) -> str:
    return _COLORS[int(label)]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if not (hi > lo):
        return [lo]
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for m in (1.0, 2.0, 5.0, 10.0):
        if raw <= m * mag:
            step = m * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _stride(n: int) -> int:
    return max(1, -(-n // _MAX_POINTS))


class _Panel:
    """One plot area; collects shapes, handles data->pixel mapping."""

    def __init__(self, x, y, w, h, xlim, ylim):
        self.x, self.y, self.w, self.h = x, y, w, h
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if not self.x1 > self.x0:
            self.x1 = self.x0 + 1.0
        if not self.y1 > self.y0:
            self.y0, self.y1 = self.y0 - 1.0, self.y1 + 1.0
        self.parts: list[str] = []

    def px(self, v: float) -> float:
        return self.x + (v - self.x0) / (self.x1 - self.x0) * self.w

    def py(self, v: float) -> float:
        return self.y + self.h - (v - self.y0) / (self.y1 - self.y0) * self.h

    def shade(self, spans) -> None:
        for t0, t1, lab in spans:
            a = self.px(max(t0, self.x0))
            b = self.px(min(t1, self.x1))
            if b <= a:
                continue
            self.parts.append(
                f'<rect x="{_fmt(a)}" y="{_fmt(self.y)}" width="{_fmt(b - a)}"'
                f' height="{_fmt(self.h)}" fill="{label_color(lab)}"'
                f' fill-opacity="0.25" stroke="none"/>'
            )

    def polyline(self, xs, ys, color="#1f77b4", width=1.0) -> None:
        pts = " ".join(f"{_fmt(self.px(a))},{_fmt(self.py(b))}" for a, b in zip(xs, ys))
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}"'
            f' stroke-width="{width}"/>'
        )

    def frame(self, xlabel: str, ylabel: str) -> None:
        self.parts.append(
            f'<rect x="{_fmt(self.x)}" y="{_fmt(self.y)}" width="{_fmt(self.w)}"'
            f' height="{_fmt(self.h)}" fill="none" stroke="#333333"/>'
        )
        for tx in _nice_ticks(self.x0, self.x1):
            px = self.px(tx)
            yb = self.y + self.h
            self.parts.append(
                f'<line x1="{_fmt(px)}" y1="{_fmt(yb)}" x2="{_fmt(px)}"'
                f' y2="{_fmt(yb + 4)}" stroke="#333333"/>'
            )
            self.parts.append(
                f'<text x="{_fmt(px)}" y="{_fmt(yb + 16)}" font-size="10"'
                f' text-anchor="middle" fill="#333333">{tx:.6g}</text>'
            )
        for ty in _nice_ticks(self.y0, self.y1, target=4):
            py = self.py(ty)
            self.parts.append(
                f'<line x1="{_fmt(self.x - 4)}" y1="{_fmt(py)}" x2="{_fmt(self.x)}"'
                f' y2="{_fmt(py)}" stroke="#333333"/>'
            )
            self.parts.append(
                f'<text x="{_fmt(self.x - 7)}" y="{_fmt(py + 3)}" font-size="10"'
                f' text-anchor="end" fill="#333333">{ty:.6g}</text>'
            )
        self.parts.append(
            f'<text x="{_fmt(self.x + self.w / 2)}" y="{_fmt(self.y + self.h + 30)}"'
            f' font-size="11" text-anchor="middle" fill="#111111">{xlabel}</text>'
        )
        self.parts.append(
            f'<text x="{_fmt(self.x - 40)}" y="{_fmt(self.y + self.h / 2)}"'
            f' font-size="11" text-anchor="middle" fill="#111111"'
            f' transform="rotate(-90 {_fmt(self.x - 40)} {_fmt(self.y + self.h / 2)})"'
            f">{ylabel}</text>"
        )


def _document(width: int, height: int, parts: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}"'
        f' height="{height}" viewBox="0 0 {width} {height}">'
    )
    bg = f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>'
    return "\n".join([head, bg, *parts, "</svg>"]) + "\n"


def _merge_spans(t: np.ndarray, labels: np.ndarray, t_end: float):
    """Constant-label runs [(t0, t1, label), ...] over step-function labels."""
    if len(t) == 0:
        return []
    change = np.nonzero(np.diff(labels))[0]
    starts = np.concatenate(([0], change + 1))
    spans = []
    for i, s in enumerate(starts):
        hi = t[starts[i + 1]] if i + 1 < len(starts) else t_end
        spans.append((float(t[s]), float(hi), int(labels[s])))
    return spans


def render_two_panel(
    t: np.ndarray,
    eta_frac: np.ndarray,
    price: np.ndarray,
    labels: np.ndarray,
    t_end: float | None = None,
) -> str:
    """Two stacked panels over a common time axis: group-+1 fraction on
    top, price below, both shaded by the current well label."""
    t = np.asarray(t, dtype=np.float64)
    eta_frac = np.asarray(eta_frac, dtype=np.float64)
    price = np.asarray(price, dtype=np.float64)
    labels = np.asarray(labels)
    if not (len(t) == len(eta_frac) == len(price) == len(labels)):
        raise ValueError("t, eta_frac, price, labels must have equal length")
    if len(t) == 0:
        return _document(760, 560, ['<text x="380" y="280" font-size="12"'
                                    ' text-anchor="middle">empty trajectory</text>'])
    if t_end is None:
        t_end = float(t[-1])
    step = _stride(len(t))
    ts, ef, pr = t[::step], eta_frac[::step], price[::step]
    spans = _merge_spans(t, labels, t_end)
    if len(spans) > 2 * _MAX_POINTS:
        spans = _merge_spans(ts, labels[::step], t_end)
    xlim = (float(t[0]), float(t_end))
    top = _Panel(70, 30, 650, 210, xlim, (0.0, 1.0))
    top.shade(spans)
    top.polyline(ts, ef, color="#1f77b4")
    top.frame("t (days)", "share in group +1")
    p0, p1 = float(np.min(pr)), float(np.max(pr))
    bot = _Panel(70, 300, 650, 210, xlim, (p0, p1))
    bot.shade(spans)
    bot.polyline(ts, pr, color="#111111")
    bot.frame("t (days)", "price S(t)")
    return _document(760, 560, top.parts + bot.parts)


def render_hmm_figure(hidden: np.ndarray, price: np.ndarray) -> str:
    """Accumulated price path of a regime-switching walk, shaded by the
    hidden regime (one symbol per unit step; price has n+1 points)."""
    hidden = np.asarray(hidden)
    price = np.asarray(price, dtype=np.float64)
    n = len(hidden)
    if len(price) != n + 1:
        raise ValueError("price must have one more point than hidden")
    steps = np.arange(n + 1, dtype=np.float64)
    stride = _stride(n + 1)
    xs, ys = steps[::stride], price[::stride]
    spans = _merge_spans(steps[:n], hidden, float(n))
    if len(spans) > 2 * _MAX_POINTS:
        spans = _merge_spans(steps[:n:stride], hidden[::stride], float(n))
    panel = _Panel(70, 30, 650, 330, (0.0, float(n)),
                   (float(np.min(price)), float(np.max(price))))
    panel.shade(spans)
    panel.polyline(xs, ys, color="#111111")
    panel.frame("step n", "accumulated price S_n")
    return _document(760, 420, panel.parts)
