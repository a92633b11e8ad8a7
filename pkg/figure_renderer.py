import logging
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402

import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)
logging.getLogger("matplotlib.font_manager").setLevel(logging.ERROR)

CURVE_COLOR = "#4878A8"
DASHED_COLOR = "#E57A5A"
MARGIN = 0.05
FRAME_INCHES = 3.0


@dataclass(frozen=True)
class Frame:
    """One drawing: a point sequence plus the edges to draw dashed"""

    label: str
    points: np.ndarray
    dashed_edges: Tuple[int, ...] = ()
    show_vertices: bool = False


class FigureRenderer:
    """Renders reconstructed curves and polylines to deterministic SVG files"""

    def __init__(self, stroke_width: float = 1.5, columns: int = 4):
        if stroke_width <= 0:
            raise ValueError("stroke width must be positive")
        if columns < 1:
            raise ValueError("montage needs at least one column")
        self.stroke_width = stroke_width
        self.columns = columns
        matplotlib.rcParams["svg.hashsalt"] = "curvefamily"
        matplotlib.rcParams["svg.fonttype"] = "none"

    @staticmethod
    def common_limits(frames: Sequence[Frame]) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        """Shared square window around every frame with a 5% margin."""
        stacked = np.vstack([f.points for f in frames])
        lo, hi = stacked.min(axis=0), stacked.max(axis=0)
        center = (lo + hi) / 2
        half = max(float((hi - lo).max()) / 2, 1e-9) * (1 + 2 * MARGIN)
        return (center[0] - half, center[0] + half), (center[1] - half, center[1] + half)

    def _draw(self, ax, frame: Frame, limits) -> None:
        points = frame.points
        dashed = set(frame.dashed_edges)
        if dashed:
            for e in range(points.shape[0] - 1):
                segment = points[e:e + 2]
                if e in dashed:
                    ax.plot(segment[:, 0], segment[:, 1], color=DASHED_COLOR, lw=self.stroke_width, ls="--")
                else:
                    ax.plot(segment[:, 0], segment[:, 1], color=CURVE_COLOR, lw=self.stroke_width)
        else:
            ax.plot(points[:, 0], points[:, 1], color=CURVE_COLOR, lw=self.stroke_width)
        if frame.show_vertices:
            ax.plot(points[:, 0], points[:, 1], "o", color=CURVE_COLOR, ms=2.5 * self.stroke_width)
        ax.set_xlim(*limits[0])
        ax.set_ylim(*limits[1])
        ax.set_aspect("equal")
        ax.set_axis_off()
        ax.set_title(frame.label, fontsize=9)

    def _save(self, fig: Figure, path: str) -> str:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
        logger.debug("wrote %s", path)
        return path

    def render_frames(self, frames: Sequence[Frame], out_dir: str, stem: str = "frame") -> List[str]:
        """One SVG per frame, all drawn in the same window."""
        if not frames:
            raise ValueError("nothing to render")
        limits = self.common_limits(frames)
        paths = []
        for index, frame in enumerate(frames):
            fig = Figure(figsize=(FRAME_INCHES, FRAME_INCHES))
            self._draw(fig.add_subplot(1, 1, 1), frame, limits)
            paths.append(self._save(fig, os.path.join(out_dir, f"{stem}_{index:03d}.svg")))
        return paths

    def render_montage(self, frames: Sequence[Frame], path: str, columns: Optional[int] = None) -> str:
        if not frames:
            raise ValueError("nothing to render")
        columns = min(columns or self.columns, len(frames))
        rows = -(-len(frames) // columns)
        limits = self.common_limits(frames)
        fig = Figure(figsize=(FRAME_INCHES * columns, FRAME_INCHES * rows))
        for index, frame in enumerate(frames):
            self._draw(fig.add_subplot(rows, columns, index + 1), frame, limits)
        return self._save(fig, path)
