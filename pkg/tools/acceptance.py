#!/bin/env python3
################################
# Miva Desk I2V Adapter Suite  #
# acceptance.py                #
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

import argparse
import os
import sys
import time
from typing import Callable, List, Optional, Tuple

SRC = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "src")
sys.path.insert(0, SRC)
os.environ.setdefault("PYGAME_HIDE_SUPPORT_PROMPT", "true")
os.environ.setdefault("SDL_VIDEODRIVER", "dummy")

import numpy as np
import torch
from tqdm import tqdm

import filetype
import metrics
from check import TrackError
from miva import dispatch
from synthdata import SUBJECT_COLOR, MotionPattern, background, render_pattern

VERSION = "Miva Desk Acceptance Runner Alpha-0.1.0"

# Patterns the base is pretrained on.
BASE_PATTERNS = ["translate_right", "translate_up", "bounce", "fall_dots"]

# Reduced settings for a smoke run; the numbers it reports are not acceptance results.
QUICK = ["base_iters=200", "iters=100", "ddim_steps=20", "mask_steps=0:16:4", "clips=8"]


class Runner:
    """Runs commands through the CLI inside one work directory and collects verdicts.

    Attributes:
        work: Work directory; every artifact and the ledger go here.
        settings: --set assignments added to every command.
        results: (item, passed, detail) in the order they were checked.
    """

    def __init__(self, work: str, settings: List[str]):
        self.work = work
        self.settings = settings
        self.results = []  # type: List[Tuple[str, bool, str]]
        os.makedirs(work, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.work, name)

    def cli(self, *argv: str) -> int:
        flags = ["--set", "ledger=" + self.path("acceptance.ledger")]
        for setting in self.settings:
            flags += ["--set", setting]
        # Flags go right after the command so a command's own --set comes last and wins.
        return dispatch([argv[0]] + flags + list(argv[1:]))

    def must(self, *argv: str) -> None:
        status = self.cli(*argv)
        if status != 0:
            print("[0] FATAL: Acceptance: {0} exited with status {1}".format(" ".join(argv[:1]), status))
            raise SystemExit(1)

    def check(self, item: str, fn: Callable[[], Tuple[bool, str]]) -> None:
        start = time.perf_counter()
        passed, detail = fn()
        line = "{0} {1}: {2} ({3:.0f}s)".format("PASS" if passed else "FAIL", item, detail, time.perf_counter() - start)
        print(line)
        self.results.append((item, passed, detail))

    @staticmethod
    def frames(path: str) -> torch.Tensor:
        return filetype.VideoFile.read(path).frames


def x_displacement(frames: torch.Tensor) -> Optional[float]:
    try:
        return metrics.centroid_track(frames.clamp(0.0, 1.0)).displacement[0]
    except TrackError:
        return None


def composed_scene(size: int, seed: int) -> Tuple[torch.Tensor, torch.Tensor]:
    """A square in the upper half and a few dots in the lower half, with the dots' subject mask."""
    rng = np.random.default_rng(seed)
    image = background(size, size)
    mask = np.zeros((1, size, size))
    side = size // 6
    y, x = int(rng.integers(2, size // 2 - side - 2)), int(rng.integers(0, size // 3))
    image[:, y : y + side, x : x + side] = np.asarray(SUBJECT_COLOR)[:, None, None]
    for _ in range(4):
        dy, dx = int(rng.integers(size // 2 + 2, size - 6)), int(rng.integers(0, size - 4))
        image[:, dy : dy + 3, dx : dx + 3] = np.asarray(SUBJECT_COLOR)[:, None, None]
        mask[:, dy : dy + 3, dx : dx + 3] = 1.0
    return torch.tensor(image, dtype=torch.float32), torch.tensor(mask, dtype=torch.float32)


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description=VERSION)
    parser.add_argument("--work", default="acceptance", metavar="<dir>", help="work directory")
    parser.add_argument("--images", type=int, default=10, metavar="<n>", help="held-out images")
    parser.add_argument("--seeds", type=int, default=10, metavar="<n>", help="sampling seeds per image")
    parser.add_argument("--quick", action="store_true", help="reduced iterations for a smoke run")
    parser.add_argument("--set", dest="set", action="append", default=[], metavar="<key=value>", help="extra setting")
    args = parser.parse_args(argv)

    runner = Runner(args.work, (QUICK if args.quick else []) + args.set)
    p = runner.path

    # Properties: init transparency, CA factorization, gradients, formulas, reduction, parameter budget.
    runner.check("properties", lambda: (runner.cli("selftest") == 0, "selftest exit status"))

    for pattern in BASE_PATTERNS:
        if not os.path.exists(p(pattern)):
            runner.must("make-data", "--pattern", pattern, "--out", p(pattern))
    if not os.path.exists(p("base.miva")):
        data = [flag for pattern in BASE_PATTERNS for flag in ("--data", p(pattern))]
        runner.must("pretrain-base", *data, "--out", p("base.miva"), "--loss-csv", p("base_loss.csv"))
    if not os.path.exists(p("right.miva")):
        runner.must("train-miva", "--data", p("translate_right"), "--base", p("base.miva"), "--out", p("right.miva"))
    if not os.path.exists(p("dots.miva")):
        runner.must(
            "train-miva", "--data", p("fall_dots"), "--base", p("base.miva"), "--out", p("dots.miva"), "--masked"
        )

    config = filetype.read_embedded_config(p("base.miva"))
    size, frames = config["image_size"], config["frames"]

    def acquisition() -> Tuple[bool, str]:
        runs, moved = 0, 0
        jobs = [(i, s) for i in range(args.images) for s in range(args.seeds)]
        for i, seed in tqdm(jobs, desc="acquisition"):
            image = p("heldout_{0:02d}.png".format(i))
            if not os.path.exists(image):
                video, _ = render_pattern(MotionPattern.named("translate_right"), 90000 + i, frames, size, size)
                filetype.write_png(image, video[0])
            out = p("right_{0:02d}_{1:02d}.mivv".format(i, seed))
            runner.must(
                "animate",
                "--image",
                image,
                "--base",
                p("base.miva"),
                "--adapter",
                p("right.miva"),
                "--seed",
                str(seed),
                "--out",
                out,
            )
            dx = x_displacement(runner.frames(out))
            runs += 1
            moved += dx is not None and dx >= metrics.MIN_DISPLACEMENT
        detail = "{0} of {1} runs move right by ≥ {2} px".format(moved, runs, metrics.MIN_DISPLACEMENT)
        return moved >= 0.8 * runs, detail

    def composition() -> Tuple[bool, str]:
        good = 0
        half = size // 2
        for seed in range(args.seeds):
            image, mask = composed_scene(size, seed)
            filetype.write_png(p("scene.png"), image)
            filetype.write_png(p("scene_mask.png"), mask)
            out = p("composed_{0:02d}.mivv".format(seed))
            stack = ["--adapter", p("right.miva") + ":0.5", "--adapter", p("dots.miva") + ":0.5"]
            scene = ["--image", p("scene.png"), "--base", p("base.miva"), "--mask", p("scene_mask.png")]
            runner.must("compose", *scene, *stack, "--seed", str(seed), "--out", out)
            video = runner.frames(out).clamp(0.0, 1.0)
            dx = x_displacement(video[:, :, :half])
            lower = metrics.region_motion_intensity(video, (half, size))
            good += dx is not None and dx >= metrics.MIN_DISPLACEMENT and lower > 0.0
        return good >= 0.7 * args.seeds, "{0} of {1} seeds show both motions".format(good, args.seeds)

    def acceleration() -> Tuple[bool, str]:
        image, mask = composed_scene(size, 0)
        filetype.write_png(p("accel.png"), image)
        filetype.write_png(p("accel_mask.png"), mask)
        common = ["--image", p("accel.png"), "--base", p("base.miva"), "--adapter", p("dots.miva")]
        common += ["--mask", p("accel_mask.png")]
        runner.must("animate", *common, "--out", p("accel_sparse.mivv"))
        runner.must("animate", *common, "--out", p("accel_full.mivv"), "--set", "mask_steps=all")
        sparse = filetype.VideoFile.read(p("accel_sparse.mivv"))
        full = filetype.VideoFile.read(p("accel_full.mivv"))

        def total(video: filetype.VideoFile) -> float:
            return video.metadata["timing"]["video_seconds"] + video.metadata["timing"]["mask_seconds"]

        speedup = total(full) / max(total(sparse), 1e-9)
        mae = float((sparse.frames[-1] - full.frames[-1]).abs().mean() / full.frames[-1].abs().mean().clamp_min(1e-9))
        detail = "speedup {0:.2f}×, final-frame relative MAE {1:.2%}".format(speedup, mae)
        return speedup >= 1.3 and mae <= 0.05, detail

    def reproducibility() -> Tuple[bool, str]:
        original = p("right_00_00.mivv")
        if not os.path.exists(original):
            return False, "no acquisition video to reproduce"
        again = p("reproduced.mivv")
        inputs = ["--image", p("heldout_00.png"), "--base", p("base.miva"), "--adapter", p("right.miva")]
        runner.must("animate", "--from-artifact", original, *inputs, "--seed", "0", "--out", again)
        same = torch.equal(filetype.VideoFile.read(original).frames, filetype.VideoFile.read(again).frames)
        return same, "bitwise identical" if same else "frames differ"

    runner.check("motion acquisition", acquisition)
    runner.check("multi-pattern composition", composition)
    runner.check("mask acceleration", acceleration)
    runner.check("reproducibility", reproducibility)

    failed = [item for item, passed, _ in runner.results if not passed]
    print("{0} of {1} acceptance items passed".format(len(runner.results) - len(failed), len(runner.results)))
    return 1 if failed else 0


# Running as a standalone program.
if __name__ == "__main__":
    sys.exit(main())
