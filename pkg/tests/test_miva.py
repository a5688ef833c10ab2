import os
import struct
import types

import pytest
import torch

import filetype
from databasemanager import DatabaseManager
from logmanager import LOG
from miva import dispatch
from synthdata import MotionPattern, render_pattern

SETTINGS = [
    "frames=4",
    "image_size=16",
    "token_dim=16",
    "diffusion_steps=100",
    "ddim_steps=10",
    "mask_steps=all",
    "clip_frames=8",
    "clips=8",
    "iters=3",
    "base_iters=3",
]


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("MIVA_SEED", raising=False)
    yield tmp_path
    torch.use_deterministic_algorithms(False)


def run(*argv, ledger="miva.ledger"):
    flags = []
    for setting in SETTINGS + ["ledger=" + ledger]:
        flags += ["--set", setting]
    return dispatch(list(argv) + flags)


def test_usage_errors(workspace, capsys):
    assert dispatch(["bogus"]) == 2
    assert dispatch(["animate", "--base", "base.miva", "--out", "out.mivv"]) == 2
    assert dispatch(["selftest", "--set", "frames"]) == 2
    assert "--set expects key=value" in capsys.readouterr().out


def test_bad_config_value(workspace, capsys):
    assert dispatch(["selftest", "--set", "frames=1"]) == 1
    assert "FATAL" in capsys.readouterr().out


def test_failed_run_is_recorded(workspace):
    assert run("eval", "--video", "missing.mivv") == 1
    ledger = DatabaseManager(types.SimpleNamespace(log=LOG), "miva.ledger")
    record = ledger["run-0000"]
    assert record["command"] == "eval"
    assert record["status"] == 1


def test_make_data_rejects_unknown_pattern(workspace):
    assert run("make-data", "--pattern", "spiral", "--out", "data") == 1
    assert not os.path.exists("data")


def test_full_workflow(workspace, capsys):
    assert run("make-data", "--pattern", "fall_dots", "--out", "dots") == 0
    assert run("make-data", "--pattern", "bounce", "--out", "bounce", "--clips", "9") == 0
    assert len(os.listdir("bounce")) == 1 + 2 * 9

    assert run("pretrain-base", "--data", "dots", "--data", "bounce", "--out", "base.miva", "--loss-csv", "b.csv") == 0
    _, columns, rows = filetype.read_csv("b.csv")
    assert columns == ["iteration", "loss"] and len(rows) == 3

    assert run("train-miva", "--data", "dots", "--base", "base.miva", "--out", "dots.miva", "--masked") == 0
    assert run("train-miva", "--data", "bounce", "--base", "base.miva", "--out", "bounce.miva") == 0
    assert filetype.CheckpointFile.read("dots.miva").metadata["kind"] == "mmiva"

    video, masks = render_pattern(MotionPattern.named("fall_dots"), 7, 4, 16, 16)
    filetype.write_png("image.png", video[0])
    filetype.write_png("mask.png", masks[0])

    common = ["--image", "image.png", "--base", "base.miva", "--out", "out.mivv"]
    assert run("animate", *common, "--adapter", "dots.miva", "--mask", "mask.png", "--mask-out", "masks") == 0
    out = filetype.VideoFile.read("out.mivv")
    assert out.frames.shape == (4, 3, 16, 16)
    assert out.metadata["pattern"] == "fall_dots"
    assert out.metadata["timing"]["mask_computations"] == 10
    assert len(os.listdir("masks")) == 4

    # A masked adapter without its subject mask is a runtime failure.
    assert run("animate", *common, "--adapter", "dots.miva") == 1

    stack = ["--adapter", "bounce.miva:0.5", "--adapter", "dots.miva:0.5"]
    assert run("compose", *common, *stack, "--mask", "mask.png") == 0
    assert filetype.VideoFile.read("out.mivv").metadata["pattern"] == "bounce,fall_dots"

    capsys.readouterr()
    assert run("eval", "--video", "out.mivv", "--pattern", "fall_dots") == 0
    printed = capsys.readouterr().out
    assert "video,consistency," in printed
    assert ",pattern,follows_pattern" in printed

    assert run("eval", "--video", "out.mivv", "--out", "metrics.csv") == 0
    config, columns, rows = filetype.read_csv("metrics.csv")
    assert config["image_size"] == 16
    assert columns[0] == "video" and "temporal_flickering" in columns
    assert rows[0][0] == "out.mivv"

    ledger = DatabaseManager(types.SimpleNamespace(log=LOG), "miva.ledger")
    commands = [ledger[key]["command"] for key in ledger.keys()]
    assert commands == [
        "make-data",
        "make-data",
        "pretrain-base",
        "train-miva",
        "train-miva",
        "animate",
        "animate",
        "compose",
        "eval",
        "eval",
    ]
    assert ledger["run-0005"]["outputs"][0] == "out.mivv"
    assert "base_hash" in ledger["run-0002"]
    assert ledger["run-0003"]["parameters"]["mask_stream"] > 0
    assert [ledger[key]["status"] for key in ledger.keys()][6] == 1


def test_verbose_run_echoes_the_config(workspace, capsys):
    assert run("eval", "--video", "missing.mivv", "--verbose") == 1
    out = capsys.readouterr().out
    assert "INFO: Config: frames = 4" in out
    assert "INFO: Config: ledger = miva.ledger" in out


def test_eval_of_a_cut_off_video_fails_cleanly(workspace, capsys):
    with open("cut.mivv", "wb") as f:
        f.write(b"MIVV" + struct.pack("<4I", 1, 1, 1, 3) + b"\x01")
    assert run("eval", "--video", "cut.mivv") == 1
    assert "truncated header" in capsys.readouterr().out
