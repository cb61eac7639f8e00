"""IDX reader for MNIST-style files and the shift-augmented multi-view set."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IdxFormatError, InvalidArgument
from .model import MultiViewDataset

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
DIRECTIONS = ("left", "right", "up", "down")
VIEW_ORDER = ("original",) + DIRECTIONS

# Conventional file names; gzipped variants are tried as well.
MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass(frozen=True)
class ImageSet:
    pixels: np.ndarray
    labels: np.ndarray
    height: int = 28
    width: int = 28

    @property
    def count(self) -> int:
        return self.pixels.shape[0]

    def images(self) -> np.ndarray:
        return self.pixels.reshape(self.count, self.height, self.width)

    def subset(self, index) -> "ImageSet":
        return ImageSet(self.pixels[index], self.labels[index], self.height, self.width)


def _read_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _parse_header(raw: bytes, path, expected_magic: int, ndims: int):
    header_len = 4 * (1 + ndims)
    if len(raw) < header_len:
        raise IdxFormatError(f"{path}: header truncated ({len(raw)} bytes)")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic != expected_magic:
        raise IdxFormatError(f"{path}: bad magic number 0x{magic:08x}, expected 0x{expected_magic:08x}")
    dims = struct.unpack(">" + "I" * ndims, raw[4:header_len])
    payload = raw[header_len:]
    expected = int(np.prod(dims))
    if len(payload) < expected:
        raise IdxFormatError(f"{path}: payload truncated, expected {expected} bytes for dims {dims}, got {len(payload)}")
    return dims, np.frombuffer(payload, dtype=np.uint8, count=expected)


def read_idx(images_path, labels_path) -> ImageSet:
    (count, rows, cols), pixels = _parse_header(_read_bytes(images_path), images_path, IMAGE_MAGIC, 3)
    (n_labels,), labels = _parse_header(_read_bytes(labels_path), labels_path, LABEL_MAGIC, 1)
    if n_labels != count:
        raise IdxFormatError(f"count mismatch: {images_path} has {count} images, {labels_path} has {n_labels} labels")
    if labels.size and labels.max() > 9:
        raise IdxFormatError(f"{labels_path}: label value {int(labels.max())} outside 0..9")
    return ImageSet(pixels.reshape(count, rows * cols) / 255.0, labels.astype(np.int64), rows, cols)


def write_idx(images_path, labels_path, images: np.ndarray, labels) -> None:
    """Write uint8 images (count x rows x cols) and labels in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    count, rows, cols = images.shape
    Path(images_path).write_bytes(struct.pack(">IIII", IMAGE_MAGIC, count, rows, cols) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">II", LABEL_MAGIC, labels.size) + labels.tobytes())


def find_split(directory, split: str):
    """Locate the (images, labels) pair for ``split`` in ``directory``."""
    directory = Path(directory)
    found = []
    for stem in MNIST_FILES[split]:
        for candidate in (stem, stem + ".gz", stem.replace("-idx", ".idx")):
            if (directory / candidate).exists():
                found.append(directory / candidate)
                break
        else:
            raise FileNotFoundError(f"{directory}: no {stem}[.gz] file")
    return tuple(found)


def load_split(directory, split: str) -> ImageSet:
    return read_idx(*find_split(directory, split))


def _shift(images: np.ndarray, direction: str, px: int) -> np.ndarray:
    if direction not in DIRECTIONS:
        raise InvalidArgument(f"unknown shift direction {direction!r}")
    rows, cols = images.shape[-2:]
    if not 0 <= px <= min(rows, cols) - 1:
        raise InvalidArgument(f"shift must lie in 0..{min(rows, cols) - 1}, got {px}")
    if px == 0:
        return images.copy()
    out = np.zeros_like(images)
    if direction == "left":
        out[..., :, :-px] = images[..., :, px:]
    elif direction == "right":
        out[..., :, px:] = images[..., :, :-px]
    elif direction == "up":
        out[..., :-px, :] = images[..., px:, :]
    else:
        out[..., px:, :] = images[..., :-px, :]
    return out


def shift_image(image, direction: str, px: int) -> np.ndarray:
    """Translate a 2-D image by ``px`` pixels, zero-filling the vacated border."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise InvalidArgument("shift_image expects a 2-D image")
    return _shift(image, direction, px)


def build_multiview(images: ImageSet, px: int = 2) -> MultiViewDataset:
    """Five views per image: original, left, right, up and down shifts."""
    stack = images.images()
    views = [stack] + [_shift(stack, direction, px) for direction in DIRECTIONS]
    data = np.stack(views, axis=1).reshape(images.count, len(VIEW_ORDER), images.height * images.width)
    return MultiViewDataset(data)
