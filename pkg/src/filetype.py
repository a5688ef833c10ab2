################################
# Miva Desk I2V Adapter Suite  #
# filetype.py                  #
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

import csv
import io
import json
import os
import struct
from typing import Any, Dict, List, Optional, Sequence, Tuple

import jsonschema
import numpy as np
import pygame as pg
import torch

from __schema__ import _SCHEMA
from check import DimensionError, FormatError

CHECKPOINT_MAGIC = b"MIVA1"
VIDEO_MAGIC = b"MIVV"


class BytesStream:
    """A file-like object that wraps a bytes object, for PyGame loaders that want a file."""

    def __init__(self, data: bytes):
        self.__data = data
        self.__pos = 0

    def read(self, num: int = -1) -> bytes:
        start = self.__pos
        end = len(self.__data) if num < 0 else min(start + num, len(self.__data))
        self.__pos = end
        return self.__data[start:end]

    def seek(self, offset: int, whence: int = 0) -> int:
        if whence == 0:
            self.__pos = offset
        elif whence == 1:
            self.__pos += offset
        else:
            self.__pos = offset + len(self.__data)
        self.__pos = max(0, min(len(self.__data), self.__pos))
        return self.__pos

    def tell(self) -> int:
        return self.__pos

    def close(self) -> None:
        pass


def _validate(metadata: Dict[str, Any], schema: str, path: str) -> None:
    try:
        jsonschema.validate(metadata, _SCHEMA[schema])
    except jsonschema.ValidationError as e:
        raise FormatError("{0}: bad {1} metadata: {2}".format(path, schema, e.message)) from None


def _read_magic(stream: BytesStream, magic: bytes, path: str) -> None:
    if stream.read(len(magic)) != magic:
        raise FormatError("{0}: not a {1} container".format(path, magic.decode("ascii")))


def _read_metadata(stream: BytesStream, path: str) -> Dict[str, Any]:
    """Read a u32-length-prefixed JSON block."""
    raw = stream.read(4)
    if len(raw) != 4:
        raise FormatError("{0}: truncated header".format(path))
    (length,) = struct.unpack("<I", raw)
    try:
        return json.loads(stream.read(length).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError("{0}: unreadable metadata: {1}".format(path, e)) from None


def _read_header(stream: BytesStream, magic: bytes, path: str) -> Dict[str, Any]:
    _read_magic(stream, magic, path)
    return _read_metadata(stream, path)


def _metadata_block(metadata: Dict[str, Any]) -> bytes:
    block = json.dumps(metadata, sort_keys=True).encode("utf-8")
    return struct.pack("<I", len(block)) + block


def _floats(array: Any) -> bytes:
    if torch.is_tensor(array):
        array = array.detach().cpu().numpy()
    return np.ascontiguousarray(array, dtype="<f4").tobytes()


class ImageFile:
    """A single PNG image, held as a (3, H, W) float tensor in [0, 1].

    Attributes:
        tensor: The pixels.
        width, height: Image size.
    """

    def __init__(self, data: bytes, filename: str = "image.png"):
        """ImageFile class initializer.

        Args:
            data: Encoded image bytes.
            filename: Name hint for the decoder.
        """
        try:
            surface = pg.image.load(BytesStream(data), filename)
        except pg.error as e:
            raise FormatError("{0}: PyGame: {1}".format(filename, e)) from None
        pixels = pg.surfarray.array3d(surface)  # (W, H, 3)
        self.tensor = torch.tensor(pixels.transpose(2, 1, 0) / 255.0, dtype=torch.float32)
        self.width, self.height = surface.get_width(), surface.get_height()

    @classmethod
    def from_path(cls, path: str) -> "ImageFile":
        with open(path, "rb") as f:
            return cls(f.read(), os.path.basename(path))

    def mask(self) -> torch.Tensor:
        """The image read as a single-channel confidence map (1, H, W): the mean of its channels."""
        return self.tensor.mean(dim=0, keepdim=True)


def write_png(path: str, image: torch.Tensor) -> None:
    """Write a (3, H, W) or (1, H, W) tensor in [0, 1] as an 8-bit PNG. Values outside are clipped."""
    if image.dim() != 3 or image.shape[0] not in (1, 3):
        raise DimensionError("png: expected (1|3, H, W), got {0}".format(tuple(image.shape)))
    pixels = (image.detach().cpu().clamp(0.0, 1.0) * 255.0).round().to(torch.uint8).numpy()
    pixels = np.repeat(pixels, 3, axis=0) if pixels.shape[0] == 1 else pixels
    pg.image.save(pg.surfarray.make_surface(pixels.transpose(2, 1, 0)), path)


def write_png_sequence(directory: str, frames: torch.Tensor, prefix: str = "frame") -> List[str]:
    """Write (F, 1|3, H, W) frames as <prefix>_000.png, <prefix>_001.png, ... and return the paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i in range(frames.shape[0]):
        path = os.path.join(directory, "{0}_{1:03d}.png".format(prefix, i))
        write_png(path, frames[i])
        paths.append(path)
    return paths


class VideoFile:
    """A MIVV video container.

    Layout: the magic "MIVV", u32 F, H, W, C, a u32-length-prefixed JSON metadata block, then the frames as
    little-endian float32 in F×H×W×C order. All integers are little-endian.

    Attributes:
        frames: (F, C, H, W) tensor.
        metadata: The JSON metadata, always carrying the producing config.
    """

    def __init__(self, frames: torch.Tensor, metadata: Dict[str, Any]):
        if frames.dim() != 4:
            raise DimensionError("video: expected (F, C, H, W), got {0}".format(tuple(frames.shape)))
        self.frames = frames
        self.metadata = metadata

    @classmethod
    def read(cls, path: str) -> "VideoFile":
        with open(path, "rb") as f:
            stream = BytesStream(f.read())
        _read_magic(stream, VIDEO_MAGIC, path)
        raw = stream.read(16)
        if len(raw) != 16:
            raise FormatError("{0}: truncated header".format(path))
        frames, height, width, channels = struct.unpack("<4I", raw)
        metadata = _read_metadata(stream, path)
        _validate(metadata, "video", path)

        count = frames * height * width * channels
        data = stream.read(4 * count)
        if len(data) != 4 * count:
            raise FormatError("{0}: expected {1} floats, found {2}".format(path, count, len(data) // 4))
        array = np.frombuffer(data, dtype="<f4").reshape(frames, height, width, channels)
        return cls(torch.tensor(array.transpose(0, 3, 1, 2).copy()), metadata)

    def write(self, path: str) -> None:
        _validate(self.metadata, "video", path)
        frames, channels, height, width = self.frames.shape
        with open(path, "wb") as f:
            f.write(VIDEO_MAGIC)
            f.write(struct.pack("<4I", frames, height, width, channels))
            f.write(_metadata_block(self.metadata))
            f.write(_floats(self.frames.detach().cpu().permute(0, 2, 3, 1)))


class CheckpointFile:
    """A MIVA1 checkpoint container, for base models and adapters alike.

    Layout: the magic "MIVA1", a u32-length-prefixed UTF-8 JSON metadata block, then the named arrays as
    little-endian float32, concatenated in the order the metadata's "arrays" list gives.

    Attributes:
        metadata: kind, model description, config, ranks, pattern, base hash, and the array index.
        arrays: Name to tensor.
    """

    def __init__(self, metadata: Dict[str, Any], arrays: Dict[str, torch.Tensor]):
        self.metadata = dict(metadata)
        self.arrays = arrays
        self.metadata["arrays"] = [{"name": name, "shape": list(arrays[name].shape)} for name in arrays]

    @classmethod
    def read(cls, path: str) -> "CheckpointFile":
        with open(path, "rb") as f:
            stream = BytesStream(f.read())
        metadata = _read_header(stream, CHECKPOINT_MAGIC, path)
        _validate(metadata, "checkpoint", path)

        arrays = {}
        for entry in metadata["arrays"]:
            count = int(np.prod(entry["shape"], dtype=np.int64))
            data = stream.read(4 * count)
            if len(data) != 4 * count:
                raise FormatError("{0}: array {1} is truncated".format(path, entry["name"]))
            arrays[entry["name"]] = torch.tensor(np.frombuffer(data, dtype="<f4").reshape(entry["shape"]).copy())
        if stream.read(1):
            raise FormatError("{0}: trailing bytes after the last array".format(path))
        return cls(metadata, arrays)

    def write(self, path: str) -> None:
        _validate(self.metadata, "checkpoint", path)
        with open(path, "wb") as f:
            f.write(CHECKPOINT_MAGIC)
            f.write(_metadata_block(self.metadata))
            for name in self.arrays:
                f.write(_floats(self.arrays[name]))


def format_csv(config: Dict[str, Any], columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    """CSV text whose leading `# key = value` comment lines hold the producing config."""
    lines = ["# {0} = {1}".format(key, json.dumps(config[key])) for key in sorted(config)]
    body = io.StringIO()
    writer = csv.writer(body, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return "".join(line + "\n" for line in lines) + body.getvalue()


def write_csv(path: str, config: Dict[str, Any], columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    with open(path, "w") as f:
        f.write(format_csv(config, columns, rows))


def read_csv(path: str) -> Tuple[Dict[str, Any], List[str], List[List[str]]]:
    """Read a CSV written by write_csv: (config header, column names, rows as strings)."""
    config = {}
    columns = []  # type: List[str]
    rows = []
    body = []
    with open(path, newline="") as f:
        for line in f:
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                config[key.strip()] = json.loads(value.strip())
            else:
                body.append(line)
    for record in csv.reader(body):
        if not columns:
            columns = record
        elif record:
            rows.append(record)
    return config, columns, rows


def read_embedded_config(path: str) -> Dict[str, Any]:
    """The config recorded in a checkpoint, video, or CSV artifact.

    Raises:
        FormatError: If the file is none of these.
    """
    with open(path, "rb") as f:
        head = f.read(len(CHECKPOINT_MAGIC))
    if head == CHECKPOINT_MAGIC:
        return dict(CheckpointFile.read(path).metadata["config"])
    if head.startswith(VIDEO_MAGIC):
        return dict(VideoFile.read(path).metadata["config"])
    if head.startswith(b"#"):
        return read_csv(path)[0]
    raise FormatError("{0}: no embedded config".format(path))


def load_frames(path: str) -> torch.Tensor:
    """Frames of a MIVV video, or a single PNG as a one-frame video."""
    if path.lower().endswith(".png"):
        return ImageFile.from_path(path).tensor[None]
    return VideoFile.read(path).frames


def arrays_of(module: torch.nn.Module) -> Dict[str, torch.Tensor]:
    """A module's state dict, detached, in a stable order."""
    state = module.state_dict()
    return {name: state[name].detach().cpu() for name in sorted(state)}


def check_arrays(expected: Dict[str, torch.Tensor], found: Dict[str, torch.Tensor]) -> List[str]:
    """Names and shapes that differ between two array maps, as readable lines."""
    problems = []
    for name in sorted(set(expected) | set(found)):
        if name not in found:
            problems.append("{0}: missing".format(name))
        elif name not in expected:
            problems.append("{0}: unexpected".format(name))
        elif tuple(expected[name].shape) != tuple(found[name].shape):
            problems.append(
                "{0}: shape {1} != expected {2}".format(name, tuple(found[name].shape), tuple(expected[name].shape))
            )
    return problems


def load_json(path: str, schema: Optional[str] = None) -> Dict[str, Any]:
    with open(path) as f:
        data = json.load(f)
    if schema:
        _validate(data, schema, path)
    return data
