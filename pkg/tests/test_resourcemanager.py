import os
import types

import pytest
import torch

import filetype
from logmanager import LOG
from resourcemanager import ResourceManager
from synthdata import MotionPatternDataset, camera_dataset, pattern_dataset


@pytest.fixture
def resource(tiny_config):
    miva = types.SimpleNamespace(log=LOG, config=types.SimpleNamespace(config=tiny_config))
    return ResourceManager(miva)


def test_dataset_directory(resource, tmp_path):
    dataset = pattern_dataset("fall_dots", clips=8, frames=4, size=16).merged(
        camera_dataset("pan_left", scenes=1, count=1, frames=4, size=16)
    )
    directory = str(tmp_path / "data")
    assert resource.write_dataset(dataset, directory)
    assert resource.outputs == [directory]
    masks = sorted(os.listdir(os.path.join(directory, "clip_000_masks")))
    assert masks == ["mask_{0:03d}.png".format(i) for i in range(4)]
    assert not os.path.exists(os.path.join(directory, "clip_008_masks"))

    loaded = resource.request_dataset(directory)
    assert len(loaded) == 9
    assert loaded.patterns == ["fall_dots", "pan_left"]
    assert torch.equal(loaded.clips[3].video, dataset.clips[3].video)
    assert torch.equal(loaded.clips[3].masks, dataset.clips[3].masks)
    assert loaded.clips[8].masks is None
    assert loaded.clips[3].seed == dataset.clips[3].seed
    config = filetype.read_embedded_config(os.path.join(directory, "clip_000.mivv"))
    assert config == resource.miva.config.config.to_dict()


def test_dataset_mask_count_mismatch(resource, tmp_path, capsys):
    directory = str(tmp_path / "data")
    resource.write_dataset(pattern_dataset("fall_dots", clips=8, frames=4, size=16), directory)
    os.remove(os.path.join(directory, "clip_002_masks", "mask_003.png"))
    assert resource.request_dataset(directory) is None
    assert "3 mask frames for 4 video frames" in capsys.readouterr().out


def test_missing_files(resource, tmp_path, capsys):
    assert resource.request_dataset(str(tmp_path / "nowhere")) is None
    assert resource.request_image(str(tmp_path / "nowhere.png")) is None
    assert resource.request_video(str(tmp_path / "nowhere.mivv")) is None
    assert resource.request_image("") is None
    out = capsys.readouterr().out
    assert "could not load dataset" in out and "bad argument" in out
    assert not resource.write_dataset(MotionPatternDataset(), str(tmp_path / "empty"))


def test_image_and_mask(resource, tmp_path):
    path = str(tmp_path / "mask.png")
    mask = torch.zeros(1, 8, 8)
    mask[0, 2:6, 2:6] = 1.0
    filetype.write_png(path, mask)
    assert resource.request_image(path).shape == (3, 8, 8)
    assert torch.equal(resource.request_mask(path), mask)
    assert resource.request_video(path).shape == (1, 3, 8, 8)


def test_writers_remember_outputs(resource, tmp_path):
    video_path = str(tmp_path / "out.mivv")
    frames = torch.rand(2, 3, 4, 4, generator=torch.Generator().manual_seed(0))
    assert resource.write_video(video_path, frames, pattern="bounce")
    video = filetype.VideoFile.read(video_path)
    assert video.metadata["pattern"] == "bounce"
    assert video.metadata["config"]["seed"] == resource.miva.config.config["seed"]

    assert resource.write_frames(str(tmp_path / "frames"), frames)
    csv_path = str(tmp_path / "metrics.csv")
    assert resource.write_csv(csv_path, ["video", "x"], [["a", 1]])
    assert not resource.write_csv(csv_path, [], [])
    assert resource.outputs[0] == video_path
    assert resource.outputs[-1] == csv_path
    assert len(resource.outputs) == 4
