from dataclasses import replace

import numpy as np
import pytest
import torch

from check import DimensionError
from metrics import centroid_track
from synthdata import (
    CAMERA_MOTIONS,
    MOTION_PATTERNS,
    MotionPattern,
    camera_clip,
    camera_dataset,
    make_camera_clips,
    make_dataset,
    pattern_dataset,
    render_pattern,
    render_scene,
    segment_generated,
)


@pytest.mark.parametrize("name", MOTION_PATTERNS)
def test_render_shapes_and_ranges(name):
    video, masks = render_pattern(MotionPattern.named(name), 3, 8, 64, 64)
    assert video.shape == (8, 3, 64, 64)
    assert masks.shape == (8, 1, 64, 64)
    assert float(video.min()) >= 0.0 and float(video.max()) <= 1.0
    assert set(masks.unique().tolist()) <= {0.0, 1.0}


def test_render_is_seeded():
    a = render_pattern(MotionPattern.named("bounce"), 5)
    b = render_pattern(MotionPattern.named("bounce"), 5)
    c = render_pattern(MotionPattern.named("bounce"), 6)
    assert torch.equal(a[0], b[0]) and torch.equal(a[1], b[1])
    assert not torch.equal(a[1], c[1])


def test_masks_match_segmentation():
    video, masks = render_pattern(MotionPattern.named("translate_up"), 0, 4, 32, 32)
    for frame, mask in zip(video, masks):
        assert torch.equal(segment_generated(frame), mask)


def test_translate_right_moves_at_its_speed():
    video, _ = render_pattern(MotionPattern.named("translate_right"), 2, 16, 64, 64)
    dx, dy = centroid_track(video).displacement
    assert dx == pytest.approx(2.0 * 15)
    assert dy == pytest.approx(0.0)


def test_translate_up_moves_up():
    video, _ = render_pattern(MotionPattern.named("translate_up"), 2, 16, 64, 64)
    dx, dy = centroid_track(video).displacement
    assert dx == pytest.approx(0.0)
    assert dy == pytest.approx(-2.0 * 15)


def test_render_rejects_impossible_clips():
    with pytest.raises(DimensionError):
        render_pattern(MotionPattern.named("translate_right"), 0, 16, 16, 16)
    with pytest.raises(DimensionError):
        render_pattern(MotionPattern("bounce", size=40), 0, 4, 32, 32)
    with pytest.raises(DimensionError):
        MotionPattern.named("spiral")


def test_speed_sets_displacement():
    slow = replace(MotionPattern.named("translate_right"), speed=1.0)
    video, _ = render_pattern(slow, 0, 9, 32, 32)
    assert centroid_track(video).displacement[0] == pytest.approx(8.0)


def test_pattern_dataset(capsys):
    dataset = pattern_dataset("bounce", clips=8, frames=8, size=32, seed=2)
    assert len(dataset) == 8
    assert dataset.patterns == ["bounce"]
    assert dataset.has_masks
    assert [clip.seed for clip in dataset.clips] == [2000 + i for i in range(8)]
    assert capsys.readouterr().out == ""

    pattern_dataset("bounce", clips=2, frames=8, size=32)
    assert "8 to 16 clips" in capsys.readouterr().out


def test_sample_window():
    dataset = pattern_dataset("fall_dots", clips=8, frames=8, size=32)
    video, masks, pattern = dataset.sample_window(np.random.default_rng(0), 4)
    assert video.shape == (4, 3, 32, 32) and masks.shape == (4, 1, 32, 32)
    assert pattern == "fall_dots"
    with pytest.raises(DimensionError):
        dataset.sample_window(np.random.default_rng(0), 9)


def test_render_scene():
    image = render_scene(4, 48)
    assert image.shape == (3, 48, 48)
    assert torch.equal(image, render_scene(4, 48))
    # Channel 0 stays below the subject threshold everywhere.
    assert float(segment_generated(image).sum()) == 0.0


@pytest.mark.parametrize("motion", CAMERA_MOTIONS)
def test_camera_clips(motion):
    image = render_scene(0, 48)
    clips = make_camera_clips(image, motion, count=3, frames=6, target=32, seed=1)
    assert len(clips) == 3
    for clip in clips:
        assert clip.shape == (6, 3, 32, 32)
        assert not torch.equal(clip[0], clip[-1])


def test_pan_right_shifts_content():
    image = render_scene(0, 48)
    clip = camera_clip(image, "pan_right", 3, 32, (0.0, 0.0), 4.0)
    assert torch.equal(clip[1][:, :, :28], clip[0][:, :, 4:])


def test_zoom_starts_from_full_image():
    image = render_scene(0, 64)
    clip = camera_clip(image, "zoom_in", 4, 32, (0.0, 0.0), 0.0, (1.0, 0.5))
    assert clip.shape == (4, 3, 32, 32)
    assert torch.equal(clip[-1], image[:, 16:48, 16:48])


def test_camera_clip_errors():
    image = render_scene(0, 32)
    with pytest.raises(DimensionError):
        make_camera_clips(image, "pan_left", target=32)
    with pytest.raises(DimensionError):
        camera_clip(image, "tilt", 2, 16, (0.0, 0.0), 1.0)


def test_camera_dataset_has_no_masks():
    dataset = camera_dataset("zoom_out", scenes=2, count=2, frames=4, size=16)
    assert len(dataset) == 4
    assert not dataset.has_masks
    assert dataset.patterns == ["zoom_out"]
    with pytest.raises(DimensionError):
        camera_dataset("spin")


def test_make_dataset_dispatches():
    assert make_dataset("pan_left", frames=4, size=16, scenes=1).patterns == ["pan_left"]
    assert make_dataset("expand", clips=8, frames=4, size=32).has_masks
