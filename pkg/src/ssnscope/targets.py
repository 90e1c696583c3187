"""Built-in ground-truth maps: resolution target and low-contrast phantoms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ParameterError
from .imaging import ProbeSpot, ScanConfig, TransmittanceMap, effective_transmittance

__all__ = [
    "LineGroup",
    "resolution_target_layout",
    "make_resolution_target",
    "make_glyph_phantom",
    "make_letter_patch",
]

DEFAULT_LINE_ETA = 0.05      # deposited metal lines are nearly opaque
DEFAULT_TARGET_MARGIN = 10.0  # um between groups, decouples neighbouring dips


@dataclass(frozen=True)
class LineGroup:
    """One line pair of the resolution target: two opaque lines of equal
    width separated by a gap of the same width."""

    width_um: float
    x_start_um: float

    @property
    def line1_range(self) -> Tuple[float, float]:
        return (self.x_start_um, self.x_start_um + self.width_um)

    @property
    def gap_range(self) -> Tuple[float, float]:
        return (self.x_start_um + self.width_um,
                self.x_start_um + 2 * self.width_um)

    @property
    def line2_range(self) -> Tuple[float, float]:
        return (self.x_start_um + 2 * self.width_um,
                self.x_start_um + 3 * self.width_um)


def resolution_target_layout(line_widths_um: Sequence[float],
                             margin_um: float = DEFAULT_TARGET_MARGIN,
                             ) -> Tuple[List[LineGroup], float]:
    """Group positions for the given widths, plus the total target width."""
    if any(w <= 0 for w in line_widths_um):
        raise ParameterError("line widths must be positive")
    groups = []
    x = margin_um
    for width in line_widths_um:
        groups.append(LineGroup(width_um=float(width), x_start_um=x))
        x += 3 * width + margin_um
    return groups, x


def make_resolution_target(line_widths_um: Sequence[float], pitch_um: float,
                           line_eta: float = DEFAULT_LINE_ETA,
                           background_eta: float = 1.0,
                           margin_um: float = DEFAULT_TARGET_MARGIN,
                           height_um: float = 12.0) -> TransmittanceMap:
    """Parallel line pairs on a transparent background, one pair per width.

    The grid pitch must resolve the smallest width with at least 4 cells.
    Use :func:`resolution_target_layout` with the same arguments to get the
    group geometry for :func:`ssnscope.imaging.resolution_metric`.
    """
    if line_widths_um and pitch_um > min(line_widths_um) / 4:
        raise ParameterError(
            f"pitch {pitch_um} um too coarse for a {min(line_widths_um)} um "
            "line (need >= 4 cells per line)")
    groups, total_width = resolution_target_layout(line_widths_um, margin_um)
    if not groups:
        total_width = 2 * margin_um
    n_cols = max(1, round(total_width / pitch_um))
    n_rows = max(1, round(height_um / pitch_um))
    grid = np.full((n_rows, n_cols), float(background_eta))
    centers = (np.arange(n_cols) + 0.5) * pitch_um
    for group in groups:
        for lo, hi in (group.line1_range, group.line2_range):
            grid[:, (centers >= lo) & (centers < hi)] = line_eta
    return TransmittanceMap(grid, pitch_um)


def make_glyph_phantom(width_um: float = 300.0, height_um: float = 150.0,
                       pitch_um: float = 0.5, background_eta: float = 0.95,
                       contrast: float = 0.02,
                       marker_eta: float = DEFAULT_LINE_ETA) -> TransmittanceMap:
    """Low-contrast engraved-figure phantom with opaque locator markers.

    Glyph-like strokes (ring, bars, diagonal) sit ``contrast`` below the
    background transmittance; small high-contrast markers in two corners
    mimic deposited-metal alignment features.
    """
    n_rows = max(1, round(height_um / pitch_um))
    n_cols = max(1, round(width_um / pitch_um))
    grid = np.full((n_rows, n_cols), float(background_eta))
    y, x = np.mgrid[0:n_rows, 0:n_cols]
    x_um = (x + 0.5) * pitch_um
    y_um = (y + 0.5) * pitch_um
    feature = background_eta - contrast

    # ring glyph
    cx, cy = 0.30 * width_um, 0.50 * height_um
    radius = 0.18 * height_um
    ring = np.abs(np.hypot(x_um - cx, y_um - cy) - radius) < 0.05 * height_um
    grid[ring] = feature
    # T-shaped glyph
    bar = ((np.abs(y_um - 0.30 * height_um) < 0.04 * height_um)
           & (np.abs(x_um - 0.55 * width_um) < 0.08 * width_um))
    stem = ((np.abs(x_um - 0.55 * width_um) < 0.015 * width_um)
            & (y_um > 0.30 * height_um) & (y_um < 0.75 * height_um))
    grid[bar | stem] = feature
    # diagonal stroke
    diag = (np.abs((y_um - 0.25 * height_um)
                   - 0.8 * (x_um - 0.70 * width_um)) < 0.03 * height_um) \
        & (x_um > 0.70 * width_um) & (x_um < 0.92 * width_um)
    grid[diag] = feature
    # opaque corner markers
    marker = 0.04 * min(width_um, height_um)
    grid[(x_um < marker) & (y_um < marker)] = marker_eta
    grid[(x_um > width_um - marker) & (y_um > height_um - marker)] = marker_eta
    return TransmittanceMap(grid, pitch_um)


def make_letter_patch(width_px: int = 14, height_px: int = 26,
                      step_um: float = 2.0, pitch_um: float = 0.5,
                      spot: Optional[ProbeSpot] = None,
                      mean_target: float = 0.911,
                      background_eta: float = 0.95,
                      stroke_eta: float = 0.82) -> TransmittanceMap:
    """Letter-like patch sized for a ``width_px x height_px`` scan at
    ``step_um``, adjusted so the spot-blurred transmittance seen by that scan
    averages exactly ``mean_target``.

    A vertical stem with a bowl (roughly an 'a') provides spatial structure;
    a uniform offset then pins the scanned mean, which is exact because the
    effective transmittance is linear in the map values.
    """
    spot = spot or ProbeSpot.from_fwhm(3.0)
    width_um = width_px * step_um
    height_um = height_px * step_um
    n_rows = max(1, round(height_um / pitch_um))
    n_cols = max(1, round(width_um / pitch_um))
    grid = np.full((n_rows, n_cols), float(background_eta))
    y, x = np.mgrid[0:n_rows, 0:n_cols]
    x_um = (x + 0.5) * pitch_um
    y_um = (y + 0.5) * pitch_um

    stem = ((np.abs(x_um - 0.68 * width_um) < 0.10 * width_um)
            & (y_um > 0.15 * height_um) & (y_um < 0.85 * height_um))
    bowl = (np.hypot((x_um - 0.45 * width_um) / 1.1,
                     y_um - 0.62 * height_um) < 0.22 * height_um) \
        & (np.hypot((x_um - 0.45 * width_um) / 1.1,
                    y_um - 0.62 * height_um) > 0.10 * height_um)
    grid[stem | bowl] = stroke_eta

    tmap = TransmittanceMap(grid, pitch_um)
    config = ScanConfig(step_um=step_um, width_px=width_px, height_px=height_px)
    effective = [effective_transmittance(tmap, spot, config.pixel_center(r, c))
                 for r in range(height_px) for c in range(width_px)]
    offset = mean_target - float(np.mean(effective))
    adjusted = grid + offset
    if adjusted.min() < 0.0 or adjusted.max() > 1.0:
        raise ParameterError("mean_target pushes the patch outside [0, 1]")
    return TransmittanceMap(adjusted, pitch_um)
