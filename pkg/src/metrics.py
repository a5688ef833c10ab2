################################
# Miva Desk I2V Adapter Suite  #
# metrics.py                   #
# Copyright 2026               #
# The Miva Desk Authors        #
################################

# **********
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to
# deal in the Software without restriction, including without limitation the
# rights to use, copy, modify, merge, publish, distribute, sublicense, and/or
# sell copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in
# all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING
# FROM, OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS
# IN THE SOFTWARE.
# **********

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from einops import rearrange

from check import DimensionError, NumericError, TrackError
from logmanager import LOG
from synthdata import segment_generated

METRICS = [
    "temporal_flickering",
    "motion_intensity",
    "motion_smoothness",
    "consistency",
    "displacement_x",
    "displacement_y",
]


def _check_video(frames: torch.Tensor, minimum: int = 2, unit_range: bool = False) -> None:
    if frames.dim() != 4:
        raise DimensionError("metrics: expected (F, C, H, W), got {0}".format(tuple(frames.shape)))
    if frames.shape[0] < minimum:
        raise DimensionError("metrics: need at least {0} frames, got {1}".format(minimum, frames.shape[0]))
    if not bool(torch.isfinite(frames).all()):
        raise NumericError("metrics: non-finite pixels")
    if unit_range and (bool((frames < 0).any()) or bool((frames > 1).any())):
        raise NumericError("metrics: pixels outside [0, 1]")


def temporal_flickering(frames: torch.Tensor) -> float:
    """100·(1 − mean |frame_{i+1} − frame_i|), in [0, 100] for pixels in [0, 1]."""
    _check_video(frames, unit_range=True)
    return float(100.0 * (1.0 - (frames[1:] - frames[:-1]).abs().mean()))


def motion_intensity(frames: torch.Tensor) -> float:
    """Mean absolute difference of consecutive frames, over pairs and pixels."""
    _check_video(frames)
    return float((frames[1:] - frames[:-1]).abs().mean())


def motion_smoothness(frames: torch.Tensor) -> float:
    """100·(1 − mean |frame_i − (frame_{i−1} + frame_{i+1})/2|) over interior frames."""
    _check_video(frames, minimum=3, unit_range=True)
    midpoint = (frames[:-2] + frames[2:]) / 2.0
    return float(100.0 * (1.0 - (frames[1:-1] - midpoint).abs().mean()))


@dataclass
class CentroidTrack:
    """Subject centroids per frame, in pixel coordinates with pixel centres at +0.5.

    Attributes:
        centroids: (x, y) per frame, None where the mask is empty.
        displacement: Last centroid minus first, over frames with a centroid.
    """

    centroids: List[Optional[Tuple[float, float]]]
    displacement: Tuple[float, float]


def centroid_track(
    frames: torch.Tensor, segmenter: Callable[[torch.Tensor], torch.Tensor] = segment_generated
) -> CentroidTrack:
    """Track the segmented subject's centroid.

    Raises:
        TrackError: If fewer than half the frames have a nonempty mask.
    """
    _check_video(frames, minimum=1)
    centroids = []  # type: List[Optional[Tuple[float, float]]]
    for frame in frames:
        mask = segmenter(frame)[0]
        area = float(mask.sum())
        if area <= 0:
            centroids.append(None)
            continue
        ys, xs = torch.meshgrid(
            torch.arange(mask.shape[0], dtype=torch.float64) + 0.5,
            torch.arange(mask.shape[1], dtype=torch.float64) + 0.5,
            indexing="ij",
        )
        weights = mask.to(torch.float64)
        centroids.append((float((xs * weights).sum()) / area, float((ys * weights).sum()) / area))

    found = [c for c in centroids if c is not None]
    if not found or 2 * len(found) < len(centroids):
        raise TrackError("centroid track: subject found in {0} of {1} frames".format(len(found), len(centroids)))
    return CentroidTrack(centroids, (found[-1][0] - found[0][0], found[-1][1] - found[0][1]))


def consistency_score(frames: torch.Tensor, patch: int = 8) -> float:
    """100·mean cosine similarity of consecutive frames' patch-mean features, in [−100, 100].

    Features are the per-patch channel means, flattened. Pairs with a zero-norm feature are skipped with a warning.
    """
    _check_video(frames)
    if frames.shape[-1] % patch or frames.shape[-2] % patch:
        raise DimensionError("consistency: {0} is not divisible by patch {1}".format(tuple(frames.shape[-2:]), patch))
    features = rearrange(frames.to(torch.float64), "f c (h p1) (w p2) -> f (c h w) (p1 p2)", p1=patch, p2=patch)
    features = features.mean(dim=-1)
    scores = []
    for a, b in zip(features[:-1], features[1:]):
        norm = float(a.norm() * b.norm())
        if norm == 0.0:
            LOG.msg("WARNING", "Metrics", "consistency_score", "zero-norm feature, pair skipped")
            continue
        scores.append(float(a @ b) / norm)
    if not scores:
        raise NumericError("consistency: every frame pair has a zero-norm feature")
    return 100.0 * float(np.mean(scores))


@dataclass
class MetricReport:
    """Per-video metric values and their aggregate over a batch.

    Attributes:
        rows: One dict of metric values per video.
    """

    rows: List[Dict[str, float]] = field(default_factory=list)

    def add(self, values: Dict[str, float]) -> None:
        for key, value in values.items():
            if not np.isfinite(value):
                raise NumericError("metric report: {0} is not finite".format(key))
        self.rows.append(dict(values))

    def aggregate(self) -> Dict[str, Tuple[float, float]]:
        """Metric name to (mean, std) over the videos that have it."""
        keys = sorted({key for row in self.rows for key in row})
        result = {}
        for key in keys:
            values = np.array([row[key] for row in self.rows if key in row])
            result[key] = (float(values.mean()), float(values.std()))
        return result


def evaluate_video(frames: torch.Tensor, track: bool = True, patch: int = 8) -> Dict[str, float]:
    """Every metric for one video. Tracking metrics are left out when the subject cannot be tracked."""
    frames = frames.clamp(0.0, 1.0)
    values = {
        "temporal_flickering": temporal_flickering(frames),
        "motion_intensity": motion_intensity(frames),
        "consistency": consistency_score(frames, patch),
    }
    if frames.shape[0] >= 3:
        values["motion_smoothness"] = motion_smoothness(frames)
    if track:
        try:
            values["displacement_x"], values["displacement_y"] = centroid_track(frames).displacement
        except TrackError as e:
            LOG.msg("WARNING", "Metrics", "evaluate_video", e)
    return values


def region_motion_intensity(frames: torch.Tensor, rows: Sequence[int]) -> float:
    """motion_intensity restricted to a band of rows [start, stop)."""
    return motion_intensity(frames[:, :, rows[0] : rows[1]])


# Net centroid displacement (axis, sign) a video of the pattern should show, and the pixels it must cover.
PATTERN_DIRECTIONS = {
    "translate_right": ("displacement_x", 1.0),
    "translate_up": ("displacement_y", -1.0),
    "fall_dots": ("displacement_y", 1.0),
}
MIN_DISPLACEMENT = 2.0


def follows_pattern(values: Dict[str, float], pattern: str, minimum: float = MIN_DISPLACEMENT) -> Optional[bool]:
    """Whether evaluated metrics show the pattern's net motion; None for patterns without a direction."""
    if pattern not in PATTERN_DIRECTIONS:
        return None
    key, sign = PATTERN_DIRECTIONS[pattern]
    if key not in values:
        return False
    return sign * values[key] >= minimum
