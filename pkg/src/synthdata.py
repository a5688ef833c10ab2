################################
# Miva Desk I2V Adapter Suite  #
# synthdata.py                 #
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

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import torch
from torch.nn import functional as F

from check import DimensionError
from logmanager import LOG

MOTION_PATTERNS = ["translate_right", "translate_up", "bounce", "expand", "fall_dots", "rotate_bar"]
CAMERA_MOTIONS = ["zoom_in", "zoom_out", "pan_left", "pan_right"]
PATTERN_NAMES = MOTION_PATTERNS + CAMERA_MOTIONS

# Subjects are drawn in this colour. Backgrounds keep channel 0 low so segmentation is a fixed threshold.
SUBJECT_COLOR = (1.0, 0.2, 0.2)
SIGNATURE_THRESHOLD = 0.5

_DEFAULTS = {
    "translate_right": (2.0, 10),
    "translate_up": (2.0, 10),
    "bounce": (3.0, 8),
    "expand": (2.0, 4),
    "fall_dots": (3.0, 3),
    "rotate_bar": (2.0, 24),
}


@dataclass(frozen=True)
class MotionPattern:
    """A synthetic motion pattern.

    Attributes:
        name: One of MOTION_PATTERNS.
        speed: Pixels per frame; for rotate_bar the speed of the bar's tips, for expand the ring's radial speed.
        size: Square side, dot side, starting ring radius, or bar length.
        color: Subject colour.
        dots: Number of dots for fall_dots.
    """

    name: str
    speed: float = 2.0
    size: int = 10
    color: Tuple[float, float, float] = SUBJECT_COLOR
    dots: int = 4

    @classmethod
    def named(cls, name: str) -> "MotionPattern":
        if name not in _DEFAULTS:
            raise DimensionError("motion pattern: unknown pattern {0!r}".format(name))
        speed, size = _DEFAULTS[name]
        return cls(name, speed, size)


def background(rows: int, cols: int) -> np.ndarray:
    """(3, H, W) background: channel 0 flat and low, gradients in channels 1 and 2."""
    y = np.linspace(0.0, 1.0, rows)[:, None] * np.ones((1, cols))
    x = np.ones((rows, 1)) * np.linspace(0.0, 1.0, cols)[None, :]
    return np.stack([np.full((rows, cols), 0.1), 0.2 + 0.5 * y, 0.2 + 0.5 * x])


def _reflect(p: float, lo: float, hi: float) -> float:
    span = hi - lo
    if span <= 0:
        return lo
    q = (p - lo) % (2 * span)
    return lo + (q if q <= span else 2 * span - q)


def _square(rows: int, cols: int, x: int, y: int, side: int) -> np.ndarray:
    support = np.zeros((rows, cols), dtype=bool)
    support[max(y, 0) : max(y + side, 0), max(x, 0) : max(x + side, 0)] = True
    return support


def _supports(pattern: MotionPattern, rng: np.random.Generator, frames: int, rows: int, cols: int) -> List[np.ndarray]:
    """Per-frame boolean subject support."""
    name, speed, size = pattern.name, pattern.speed, pattern.size
    yy, xx = np.mgrid[0:rows, 0:cols] + 0.5
    travel = int(math.ceil(speed * (frames - 1)))

    if name in ("translate_right", "translate_up"):
        if size + travel > (cols if name == "translate_right" else rows):
            raise DimensionError("render: {0} at speed {1} leaves the frame in {2} frames".format(name, speed, frames))
        if name == "translate_right":
            x0 = int(rng.integers(0, cols - size - travel + 1))
            y0 = int(rng.integers(0, rows - size + 1))
            return [_square(rows, cols, x0 + int(round(speed * k)), y0, size) for k in range(frames)]
        x0 = int(rng.integers(0, cols - size + 1))
        y0 = int(rng.integers(travel, rows - size + 1))
        return [_square(rows, cols, x0, y0 - int(round(speed * k)), size) for k in range(frames)]

    if name == "bounce":
        x0 = int(rng.integers(0, cols - size + 1))
        y0 = float(rng.integers(0, rows - size + 1))
        return [
            _square(rows, cols, x0, int(round(_reflect(y0 + speed * k, 0, rows - size))), size) for k in range(frames)
        ]

    if name == "expand":
        cy, cx = float(rng.uniform(0.3, 0.7) * rows), float(rng.uniform(0.3, 0.7) * cols)
        distance = np.hypot(yy - cy, xx - cx)
        return [np.abs(distance - (size + speed * k)) <= 1.0 for k in range(frames)]

    if name == "fall_dots":
        starts = [(int(rng.integers(0, cols - size + 1)), int(rng.integers(0, rows // 2))) for _ in range(pattern.dots)]
        supports = []
        for k in range(frames):
            support = np.zeros((rows, cols), dtype=bool)
            for x0, y0 in starts:
                y = y0 + int(round(speed * k))
                if y < rows:
                    support |= _square(rows, cols, x0, y, size)
            supports.append(support)
        return supports

    if name == "rotate_bar":
        half = size / 2.0
        if size > min(rows, cols):
            raise DimensionError("render: bar of length {0} does not fit {1}×{2}".format(size, rows, cols))
        cy = float(rng.uniform(half, rows - half))
        cx = float(rng.uniform(half, cols - half))
        theta0 = float(rng.uniform(0.0, math.pi))
        omega = speed / half
        supports = []
        for k in range(frames):
            theta = theta0 + omega * k
            dx, dy = math.cos(theta), math.sin(theta)
            along = (xx - cx) * dx + (yy - cy) * dy
            across = -(xx - cx) * dy + (yy - cy) * dx
            supports.append((np.abs(along) <= half) & (np.abs(across) <= 1.5))
        return supports

    raise DimensionError("render: unknown pattern {0!r}".format(name))


def render_pattern(
    pattern: MotionPattern, seed: int, frames: int = 16, rows: int = 64, cols: int = 64
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Render a clip and its exact subject masks.

    Args:
        pattern: What moves and how.
        seed: Sets the starting position (and phase, for rotate_bar).
        frames: F'.
        rows, cols: Frame size.

    Returns:
        video (F', 3, H, W) in [0, 1] and masks (F', 1, H, W) in {0, 1}.

    Raises:
        DimensionError: If the subject cannot fit the frame.
    """
    if pattern.size < 1 or pattern.size > min(rows, cols):
        raise DimensionError("render: subject size {0} does not fit {1}×{2}".format(pattern.size, rows, cols))
    rng = np.random.default_rng(seed)
    supports = _supports(pattern, rng, frames, rows, cols)
    bg = background(rows, cols)
    color = np.asarray(pattern.color)[:, None, None]
    video = np.stack([np.where(s[None], color, bg) for s in supports])
    masks = np.stack([s[None].astype(np.float64) for s in supports])
    return torch.tensor(video, dtype=torch.float32), torch.tensor(masks, dtype=torch.float32)


def segment_generated(frame: torch.Tensor, threshold: float = SIGNATURE_THRESHOLD) -> torch.Tensor:
    """Binary subject mask (1, H, W) of a (3, H, W) frame: channel 0 exceeds both others by the threshold."""
    if frame.dim() != 3 or frame.shape[0] != 3:
        raise DimensionError("segment: expected (3, H, W), got {0}".format(tuple(frame.shape)))
    excess = frame[0] - torch.maximum(frame[1], frame[2])
    return (excess >= threshold).to(torch.float32)[None]


def render_scene(seed: int, size: int = 96) -> torch.Tensor:
    """A (3, size, size) synthetic still for camera-motion clips: a gradient with a few flat rectangles."""
    rng = np.random.default_rng(seed)
    image = background(size, size)
    for _ in range(6):
        h, w = rng.integers(size // 8, size // 3, size=2)
        y, x = rng.integers(0, size - h), rng.integers(0, size - w)
        color = rng.uniform(0.0, 0.9, size=3) * np.array([0.4, 1.0, 1.0])
        image[:, y : y + h, x : x + w] = color[:, None, None]
    return torch.tensor(image, dtype=torch.float32)


def _crop_resize(image: torch.Tensor, y: float, x: float, side: float, target: int) -> torch.Tensor:
    top, left, extent = int(round(y)), int(round(x)), int(round(side))
    if top < 0 or left < 0 or top + extent > image.shape[1] or left + extent > image.shape[2]:
        raise DimensionError(
            "camera clip: crop {0}+{2}, {1}+{2} exceeds {3}".format(top, left, extent, tuple(image.shape[1:]))
        )
    crop = image[:, top : top + extent, left : left + extent]
    if extent == target:
        return crop.clone()
    return F.interpolate(crop[None], size=(target, target), mode="bilinear", align_corners=False)[0]


def camera_clip(
    image: torch.Tensor,
    motion: str,
    frames: int,
    target: int,
    start: Tuple[float, float],
    stride: float,
    scale: Tuple[float, float] = (1.0, 1.0),
) -> torch.Tensor:
    """One camera-motion clip (F', 3, target, target) cut from an image.

    Args:
        image: (3, S, S) source.
        motion: One of CAMERA_MOTIONS.
        frames: F'.
        target: Output side.
        start: (y, x) of the first crop's top-left corner; zooms centre their crops and ignore it.
        stride: Pan step in pixels per frame.
        scale: For zooms, the crop side at the first and last frame as fractions of the image side.
    """
    side_full = image.shape[1]
    out = []
    for k in range(frames):
        if motion in ("pan_left", "pan_right"):
            shift = stride * k if motion == "pan_right" else -stride * k
            out.append(_crop_resize(image, start[0], start[1] + shift, target, target))
        elif motion in ("zoom_in", "zoom_out"):
            a, b = scale if motion == "zoom_in" else scale[::-1]
            side = side_full * (a + (b - a) * k / max(frames - 1, 1))
            corner = (side_full - side) / 2.0
            out.append(_crop_resize(image, corner, corner, side, target))
        else:
            raise DimensionError("camera clip: unknown motion {0!r}".format(motion))
    return torch.stack(out)


def make_camera_clips(
    image: torch.Tensor, motion: str, count: int = 5, frames: int = 16, target: int = 64, seed: int = 0
) -> List[torch.Tensor]:
    """`count` randomly placed camera-motion clips from one image.

    Zooms move between the full image and a centred crop of 60-80% of it. Pans slide a target-sized crop by a
    random stride that keeps it inside the image.

    Raises:
        DimensionError: If the image is not larger than the target.
    """
    side = image.shape[1]
    if image.dim() != 3 or image.shape[1] != image.shape[2] or side <= target:
        raise DimensionError(
            "camera clips: need a square image larger than {0}, got {1}".format(target, tuple(image.shape))
        )
    rng = np.random.default_rng(seed)
    clips = []
    for _ in range(count):
        if motion in ("pan_left", "pan_right"):
            max_stride = (side - target) / max(frames - 1, 1)
            stride = float(rng.uniform(0.5, 1.0) * max_stride)
            span = stride * (frames - 1)
            y = float(rng.integers(0, side - target + 1))
            x = float(rng.uniform(0, side - target - span)) + (0 if motion == "pan_right" else span)
            clips.append(camera_clip(image, motion, frames, target, (y, x), stride))
        else:
            shrink = float(rng.uniform(0.6, 0.8))
            clips.append(camera_clip(image, motion, frames, target, (0.0, 0.0), 0.0, (1.0, shrink)))
    return clips


@dataclass
class Clip:
    """A rendered clip.

    Attributes:
        video: (F', 3, H, W).
        masks: (F', 1, H, W) subject masks, or None for camera-motion clips.
        pattern: Pattern name.
        seed: Seed it was rendered from.
    """

    video: torch.Tensor
    masks: Optional[torch.Tensor]
    pattern: str
    seed: int = 0


@dataclass
class MotionPatternDataset:
    """Few-shot training clips of one or more patterns."""

    clips: List[Clip] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.clips)

    @property
    def patterns(self) -> List[str]:
        return sorted({clip.pattern for clip in self.clips})

    @property
    def has_masks(self) -> bool:
        return bool(self.clips) and all(clip.masks is not None for clip in self.clips)

    def merged(self, other: "MotionPatternDataset") -> "MotionPatternDataset":
        return MotionPatternDataset(self.clips + other.clips)

    def sample_window(
        self, rng: np.random.Generator, frames: int
    ) -> Tuple[torch.Tensor, Optional[torch.Tensor], str]:
        """A random contiguous F-frame window of a random clip: (video, masks or None, pattern)."""
        if not self.clips:
            raise DimensionError("dataset: no clips")
        clip = self.clips[int(rng.integers(0, len(self.clips)))]
        length = clip.video.shape[0]
        if length < frames:
            raise DimensionError("dataset: clip of {0} frames is shorter than {1}".format(length, frames))
        start = int(rng.integers(0, length - frames + 1))
        masks = clip.masks[start : start + frames] if clip.masks is not None else None
        return clip.video[start : start + frames], masks, clip.pattern


def pattern_dataset(
    name: str, clips: int = 10, frames: int = 16, size: int = 64, seed: int = 0, pattern: Optional[MotionPattern] = None
) -> MotionPatternDataset:
    """Render `clips` clips of a motion pattern, seeded seed·1000 + i."""
    if not 8 <= clips <= 16:
        LOG.msg("WARNING", "SynthData", "pattern_dataset", "few-shot datasets hold 8 to 16 clips, got", clips)
    pattern = pattern or MotionPattern.named(name)
    dataset = MotionPatternDataset()
    for i in range(clips):
        clip_seed = seed * 1000 + i
        video, masks = render_pattern(pattern, clip_seed, frames, size, size)
        dataset.clips.append(Clip(video, masks, name, clip_seed))
    return dataset


def camera_dataset(
    motion: str, scenes: int = 20, count: int = 5, frames: int = 16, size: int = 64, seed: int = 0
) -> MotionPatternDataset:
    """Camera-motion clips: `count` clips from each of `scenes` synthetic stills. No subject masks."""
    if motion not in CAMERA_MOTIONS:
        raise DimensionError("camera dataset: unknown motion {0!r}".format(motion))
    dataset = MotionPatternDataset()
    for i in range(scenes):
        scene_seed = seed * 1000 + i
        image = render_scene(scene_seed, size + size // 2)
        for clip in make_camera_clips(image, motion, count, frames, size, scene_seed):
            dataset.clips.append(Clip(clip, None, motion, scene_seed))
    return dataset


def make_dataset(
    name: str, clips: int = 10, frames: int = 16, size: int = 64, seed: int = 0, scenes: int = 20
) -> MotionPatternDataset:
    """Motion-pattern or camera-motion dataset by name."""
    if name in CAMERA_MOTIONS:
        return camera_dataset(name, scenes, 5, frames, size, seed)
    return pattern_dataset(name, clips, frames, size, seed)
