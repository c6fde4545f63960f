"""Illumination-invariant road color model over concentric-sphere RGB bins.

Pixels are binned by the Euclidean norm of their RGB vector, so a surface
whose color varies mostly in brightness (shadowed vs sunlit road) populates a
sequence of bins whose means trace a line through RGB space. Occupied bins get
an empirical mean and scalar variance from the bootstrap pixels; a total
least squares line through the occupied means, weighted by bin population,
extrapolates a mean for every empty bin. A Gaussian around each bin mean then
scores any pixel's road likelihood, and neighboring scores combine into the
pairwise capacities of the segmentation CRF.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .crf import PairwiseField
from .errors import ModelUnderdetermined

DEFAULT_BIN_WIDTH = 16.0
VARIANCE_FLOOR = 25.0
MIN_BOOTSTRAP_PIXELS = 500
_MAX_NORM = 255.0 * math.sqrt(3.0)
_GRAY = np.array([1.0, 1.0, 1.0]) / math.sqrt(3.0)


def n_bins(bin_width: float) -> int:
    return int(math.floor(_MAX_NORM / bin_width)) + 1


def bin_index(rgb, bin_width: float = DEFAULT_BIN_WIDTH):
    """Concentric-sphere shell index: floor(|rgb| / bin_width).

    Accepts a single RGB triple or an array of shape (..., 3); returns int64
    of the leading shape.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    v = np.asarray(rgb, dtype=np.float64)
    norms = np.sqrt(np.sum(v * v, axis=-1))
    return np.floor(norms / bin_width).astype(np.int64)


@dataclass(frozen=True)
class ColorLinesModel:
    """Per-bin color statistics plus the fitted color line.

    Arrays are indexed by bin; occupied marks bins that received bootstrap
    pixels, the rest carry line-extrapolated means and the average occupied
    variance.
    """

    bin_width: float
    occupied: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    counts: np.ndarray
    line_dir: np.ndarray
    line_anchor: np.ndarray

    def __post_init__(self):
        k = len(self.occupied)
        if not (self.means.shape == (k, 3) and self.variances.shape == (k,)
                and self.counts.shape == (k,)):
            raise ValueError("inconsistent per-bin array shapes")
        if (self.variances <= 0).any():
            raise ValueError("variances must be positive")
        if abs(float(self.line_dir @ self.line_dir) - 1.0) > 1e-9:
            raise ValueError("line direction must be unit length")


def _fit_line(means: np.ndarray, weights: np.ndarray):
    """Count-weighted total-least-squares 3D line through bin means."""
    w = weights / weights.sum()
    anchor = w @ means
    centered = means - anchor
    cov = (centered * w[:, None]).T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    direction = eigvecs[:, -1]
    proj = float(direction @ anchor)
    if proj < 0 or (proj == 0 and direction.sum() < 0):
        direction = -direction
    return direction, anchor


def _line_point_at_radius(anchor, direction, radius):
    """Point on the line closest to |x| = radius, preferring the outward root."""
    ad = float(anchor @ direction)
    disc = ad * ad - float(anchor @ anchor) + radius * radius
    if disc >= 0:
        s = -ad + math.sqrt(disc)
    else:
        s = -ad  # line misses the sphere: take its closest approach to origin
    return anchor + s * direction


def build_model(image, bootstrap_mask, bin_width: float = DEFAULT_BIN_WIDTH,
                variance_floor: float = VARIANCE_FLOOR) -> ColorLinesModel:
    """Fit the color model from pixels the bootstrap mask labels road."""
    img = np.asarray(image)
    mask = np.asarray(bootstrap_mask, dtype=bool)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 image, got shape {img.shape}")
    if mask.shape != img.shape[:2]:
        raise ValueError("image and mask dimensions disagree")
    if variance_floor <= 0:
        raise ValueError("variance_floor must be positive")

    px = img[mask].astype(np.float64)
    if px.shape[0] < MIN_BOOTSTRAP_PIXELS:
        raise ModelUnderdetermined(
            f"bootstrap mask has {px.shape[0]} pixels, "
            f"need {MIN_BOOTSTRAP_PIXELS}")

    nb = n_bins(bin_width)
    k = bin_index(px, bin_width)
    counts = np.bincount(k, minlength=nb)
    occupied = counts > 0

    sums = np.zeros((nb, 3))
    for c in range(3):
        sums[:, c] = np.bincount(k, weights=px[:, c], minlength=nb)
    sumsq = np.bincount(k, weights=np.sum(px * px, axis=1), minlength=nb)

    means = np.zeros((nb, 3))
    variances = np.full(nb, variance_floor)
    occ = np.nonzero(occupied)[0]
    means[occ] = sums[occ] / counts[occ, None]
    raw_var = sumsq[occ] / counts[occ] - np.sum(means[occ] ** 2, axis=1)
    variances[occ] = np.maximum(np.maximum(raw_var, 0.0), variance_floor)

    if len(occ) >= 2:
        line_dir, line_anchor = _fit_line(means[occ], counts[occ].astype(np.float64))
    else:
        line_anchor = np.zeros(3)
        m = means[occ[0]]
        norm = float(np.linalg.norm(m))
        line_dir = m / norm if norm > 0 else _GRAY.copy()
    # eigh can return a near-unit vector; renormalize for the invariant
    line_dir = line_dir / np.linalg.norm(line_dir)

    avg_var = float(variances[occ].mean())
    for kk in np.nonzero(~occupied)[0]:
        means[kk] = _line_point_at_radius(line_anchor, line_dir,
                                          (kk + 0.5) * bin_width)
        variances[kk] = avg_var

    return ColorLinesModel(bin_width=float(bin_width), occupied=occupied,
                           means=means, variances=variances, counts=counts,
                           line_dir=line_dir, line_anchor=line_anchor)


@dataclass(frozen=True)
class RoadScoreMap:
    """Per-pixel road/non-road scores; the two channels sum to one."""

    p_road: np.ndarray
    p_nonroad: np.ndarray

    def __post_init__(self):
        a, b = self.p_road, self.p_nonroad
        if a.ndim != 2 or a.shape != b.shape:
            raise ValueError("score planes must be equal-shape HxW arrays")
        if (a < 0).any() or (a > 1).any() or (b < 0).any() or (b > 1).any():
            raise ValueError("scores must lie in [0, 1]")
        if np.abs(a + b - 1.0).max() > 1e-9:
            raise ValueError("scores must sum to one per pixel")

    @property
    def height(self) -> int:
        return self.p_road.shape[0]

    @property
    def width(self) -> int:
        return self.p_road.shape[1]


def road_scores(image, model: ColorLinesModel) -> RoadScoreMap:
    """Gaussian road likelihood of every pixel against its bin's statistics."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 image, got shape {img.shape}")
    rgb = img.astype(np.float64)
    k = bin_index(rgb, model.bin_width)
    mean = model.means[k]
    var = model.variances[k]
    dsq = np.sum((rgb - mean) ** 2, axis=-1)
    p_road = np.exp(-dsq / (2.0 * var))
    return RoadScoreMap(p_road=p_road, p_nonroad=1.0 - p_road)


def edge_capacities(scores: RoadScoreMap) -> PairwiseField:
    """Agreement capacity per 4-neighbor edge: high when both pixels lean the
    same way, low across likely road boundaries."""
    pr, pn = scores.p_road, scores.p_nonroad
    right = pr[:, :-1] * pr[:, 1:] + pn[:, :-1] * pn[:, 1:]
    down = pr[:-1, :] * pr[1:, :] + pn[:-1, :] * pn[1:, :]
    return PairwiseField(right=np.clip(right, 0.0, 1.0),
                         down=np.clip(down, 0.0, 1.0))


def save_model_json(path, model: ColorLinesModel) -> None:
    """Debug dump of the per-bin statistics and the fitted line."""
    obj = {
        "bin_width": model.bin_width,
        "bins": [{
            "occupied": bool(model.occupied[k]),
            "mean": [float(x) for x in model.means[k]],
            "variance": float(model.variances[k]),
            "count": int(model.counts[k]),
        } for k in range(len(model.occupied))],
        "line": {"direction": [float(x) for x in model.line_dir],
                 "anchor": [float(x) for x in model.line_anchor]},
    }
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
