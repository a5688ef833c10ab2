################################
# Miva Desk I2V Adapter Suite  #
# resourcemanager.py           #
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

import json
import os
from typing import Any, Dict, List, Optional, Sequence, TYPE_CHECKING

import torch

from check import CHECK, CheckFailure, FormatError, MivaError
import filetype
from synthdata import Clip, MotionPatternDataset

if TYPE_CHECKING:  # Avoid circular import.
    from miva import Miva


class ResourceManager:
    """The Resource Manager

    Reads and writes the files the commands work on: images, subject masks, MIVV videos, PNG sequences, CSV reports,
    and dataset directories. Every file written is remembered so the run ledger can list it.

    A dataset directory holds an index.json, one clip_NNN.mivv video per clip, and for clips with subject masks a
    clip_NNN_masks directory of mask_NNN.png frames.

    Attributes:
        miva: Base class instance.
        outputs: Paths written during this run, in order.
    """

    def __init__(self, miva: "Miva"):
        """ResourceManager class initializer.

        Args:
            miva: Base class instance.
        """
        self.miva = miva
        self.outputs = []  # type: List[str]

    def __config(self) -> Dict[str, Any]:
        return self.miva.config.config.to_dict()

    def request_image(self, filename: str) -> Optional[torch.Tensor]:
        """Retrieve a PNG image as a (3, H, W) tensor in [0, 1].

        Returns:
            The image if succeeded, None if failed.
        """
        # Input Check
        try:
            CHECK(filename, str, _min=1)
        except CheckFailure as e:
            self.miva.log.msg("ERROR", "Resource", "request_image", "bad argument", e)
            return None

        try:
            image = filetype.ImageFile.from_path(filename)
        except (MivaError, OSError) as e:
            self.miva.log.msg("ERROR", "Resource", "request_image", "could not load image", filename, e)
            return None
        self.miva.log.info("Resource", "loaded image", filename, "{0}×{1}".format(image.width, image.height))
        return image.tensor

    def request_mask(self, filename: str) -> Optional[torch.Tensor]:
        """Retrieve a PNG subject mask as a (1, H, W) confidence map.

        Returns:
            The mask if succeeded, None if failed.
        """
        # Input Check
        try:
            CHECK(filename, str, _min=1)
        except CheckFailure as e:
            self.miva.log.msg("ERROR", "Resource", "request_mask", "bad argument", e)
            return None

        try:
            mask = filetype.ImageFile.from_path(filename).mask()
        except (MivaError, OSError) as e:
            self.miva.log.msg("ERROR", "Resource", "request_mask", "could not load mask", filename, e)
            return None
        self.miva.log.info("Resource", "loaded mask", filename)
        return mask

    def request_video(self, filename: str) -> Optional[torch.Tensor]:
        """Retrieve the frames of a MIVV video, or of a single PNG, as (F, C, H, W).

        Returns:
            The frames if succeeded, None if failed.
        """
        # Input Check
        try:
            CHECK(filename, str, _min=1)
        except CheckFailure as e:
            self.miva.log.msg("ERROR", "Resource", "request_video", "bad argument", e)
            return None

        try:
            frames = filetype.load_frames(filename)
        except (MivaError, OSError, ValueError) as e:
            self.miva.log.msg("ERROR", "Resource", "request_video", "could not load video", filename, e)
            return None
        self.miva.log.info("Resource", "loaded video", filename, tuple(frames.shape))
        return frames

    def request_dataset(self, directory: str) -> Optional[MotionPatternDataset]:
        """Retrieve a dataset directory written by write_dataset.

        Returns:
            The dataset if succeeded, None if failed.
        """
        # Input Check
        try:
            CHECK(directory, str, _min=1)
        except CheckFailure as e:
            self.miva.log.msg("ERROR", "Resource", "request_dataset", "bad argument", e)
            return None

        try:
            index = filetype.load_json(os.path.join(directory, "index.json"), "dataset")
            dataset = MotionPatternDataset()
            for entry in index["clips"]:
                video = filetype.VideoFile.read(os.path.join(directory, entry["video"])).frames
                masks = None
                if entry["masks"] is not None:
                    masks = self.__read_masks(os.path.join(directory, entry["masks"]), video.shape[0])
                dataset.clips.append(Clip(video, masks, entry["pattern"], entry.get("seed", 0)))
        except (MivaError, OSError, ValueError, KeyError) as e:
            self.miva.log.msg("ERROR", "Resource", "request_dataset", "could not load dataset", directory, e)
            return None
        self.miva.log.info("Resource", "loaded dataset", directory, len(dataset), "clips", dataset.patterns)
        return dataset

    @staticmethod
    def __read_masks(directory: str, frames: int) -> torch.Tensor:
        names = sorted(name for name in os.listdir(directory) if name.endswith(".png"))
        if len(names) != frames:
            raise FormatError("{0}: {1} mask frames for {2} video frames".format(directory, len(names), frames))
        return torch.stack([filetype.ImageFile.from_path(os.path.join(directory, name)).mask() for name in names])

    def write_dataset(self, dataset: MotionPatternDataset, directory: str) -> bool:
        """Write a dataset directory, with the producing config in its index and in every video.

        Returns:
            True if succeeded, False if failed.
        """
        # Input Check
        try:
            CHECK(directory, str, _min=1)
            CHECK(len(dataset), int, _min=1)
        except CheckFailure as e:
            self.miva.log.msg("ERROR", "Resource", "write_dataset", "bad argument", e)
            return False

        config = self.__config()
        entries = []
        try:
            os.makedirs(directory, exist_ok=True)
            for i, clip in enumerate(dataset.clips):
                name = "clip_{0:03d}".format(i)
                metadata = {"config": config, "pattern": clip.pattern}
                filetype.VideoFile(clip.video, metadata).write(os.path.join(directory, name + ".mivv"))
                masks = None
                if clip.masks is not None:
                    masks = name + "_masks"
                    filetype.write_png_sequence(os.path.join(directory, masks), clip.masks, "mask")
                entries.append({"video": name + ".mivv", "masks": masks, "pattern": clip.pattern, "seed": clip.seed})
            index = {"pattern": ",".join(dataset.patterns), "config": config, "clips": entries}
            with open(os.path.join(directory, "index.json"), "w") as f:
                json.dump(index, f, indent=2)
        except (MivaError, OSError) as e:
            self.miva.log.msg("ERROR", "Resource", "write_dataset", "could not write dataset", directory, e)
            return False
        self.outputs.append(directory)
        self.miva.log.info("Resource", "wrote dataset", directory, len(entries), "clips")
        return True

    def write_video(self, filename: str, frames: torch.Tensor, **metadata: Any) -> bool:
        """Write frames as a MIVV video carrying the config and any extra metadata.

        Returns:
            True if succeeded, False if failed.
        """
        # Input Check
        try:
            CHECK(filename, str, _min=1)
        except CheckFailure as e:
            self.miva.log.msg("ERROR", "Resource", "write_video", "bad argument", e)
            return False

        metadata["config"] = self.__config()
        try:
            filetype.VideoFile(frames, metadata).write(filename)
        except (MivaError, OSError) as e:
            self.miva.log.msg("ERROR", "Resource", "write_video", "could not write video", filename, e)
            return False
        self.outputs.append(filename)
        self.miva.log.info("Resource", "wrote video", filename)
        return True

    def write_frames(self, directory: str, frames: torch.Tensor, prefix: str = "frame") -> bool:
        """Write frames or masks as an 8-bit PNG sequence.

        Returns:
            True if succeeded, False if failed.
        """
        # Input Check
        try:
            CHECK(directory, str, _min=1)
            CHECK(prefix, str, _min=1)
        except CheckFailure as e:
            self.miva.log.msg("ERROR", "Resource", "write_frames", "bad argument", e)
            return False

        try:
            paths = filetype.write_png_sequence(directory, frames, prefix)
        except (MivaError, OSError) as e:
            self.miva.log.msg("ERROR", "Resource", "write_frames", "could not write frames", directory, e)
            return False
        self.outputs.extend(paths)
        self.miva.log.info("Resource", "wrote frames", directory, len(paths))
        return True

    def write_csv(self, filename: str, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> bool:
        """Write a CSV report headed by the config.

        Returns:
            True if succeeded, False if failed.
        """
        # Input Check
        try:
            CHECK(filename, str, _min=1)
            CHECK(list(columns), list, _min=1)
        except CheckFailure as e:
            self.miva.log.msg("ERROR", "Resource", "write_csv", "bad argument", e)
            return False

        try:
            filetype.write_csv(filename, self.__config(), columns, rows)
        except OSError as e:
            self.miva.log.msg("ERROR", "Resource", "write_csv", "could not write csv", filename, e)
            return False
        self.outputs.append(filename)
        self.miva.log.info("Resource", "wrote csv", filename)
        return True
