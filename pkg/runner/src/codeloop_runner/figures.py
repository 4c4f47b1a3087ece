"""Capture the current matplotlib figure as size-capped, metadata-free SVG.

The runner never imports matplotlib itself: capture only engages when the
candidate already did. Oversize figures get one rasterized re-render at low
dpi; if that is still over the cap the figure is reported as omitted.
"""

from __future__ import annotations

import io
import re
import sys
from typing import Any

RETRY_DPI = 50

_METADATA_RE = re.compile(r"<metadata>.*?</metadata>\s*", re.DOTALL)
_COMMENT_RE = re.compile(r"<!--.*?-->\s*", re.DOTALL)


def _render_svg(fig, dpi: float | None = None) -> str:
    import matplotlib

    matplotlib.rcParams["svg.hashsalt"] = "codeloop-runner"
    buf = io.BytesIO()
    kwargs: dict[str, Any] = {
        "format": "svg",
        "metadata": {"Date": None, "Creator": None, "Format": None, "Type": None},
    }
    if dpi is not None:
        kwargs["dpi"] = dpi
    fig.savefig(buf, **kwargs)
    svg = buf.getvalue().decode("utf-8")
    svg = _METADATA_RE.sub("", svg)
    svg = _COMMENT_RE.sub("", svg)
    return svg


def _rasterize(fig) -> None:
    for ax in fig.axes:
        for artist in ax.get_children():
            try:
                artist.set_rasterized(True)
            except AttributeError:
                continue


def render_figure(fig, cfg: dict) -> tuple[str | None, str | None]:
    """(svg, warning); svg is None when rendering failed or stayed oversize."""
    cap_bytes = int(cfg.get("svg_cap_kib", 200)) * 1024
    try:
        svg = _render_svg(fig)
    except Exception as exc:  # noqa: BLE001 - render failure is a warning, not a crash
        return None, f"figure render failed: {type(exc).__name__}: {exc}"
    if len(svg.encode("utf-8")) <= cap_bytes:
        return svg, None
    try:
        _rasterize(fig)
        svg = _render_svg(fig, dpi=RETRY_DPI)
    except Exception as exc:  # noqa: BLE001
        return None, f"figure downsample failed: {type(exc).__name__}: {exc}"
    if len(svg.encode("utf-8")) <= cap_bytes:
        return svg, None
    return None, f"figure omitted: exceeds {cfg.get('svg_cap_kib', 200)} KiB even after downsampling"


def capture_current_figure(cfg: dict) -> tuple[str | None, str | None]:
    """SVG of pyplot's current figure, or (None, warning|None) when absent."""
    plt = sys.modules.get("matplotlib.pyplot")
    if plt is None:
        return None, None
    if not plt.get_fignums():
        return None, None
    return render_figure(plt.gcf(), cfg)
