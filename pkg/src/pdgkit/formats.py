"""On-disk raster and tensor formats.

Three formats live here: 8-bit PNG rasters (images and 0/255 masks), PFM
depth maps (little-endian float32, meters), and the raw tensor container
used for every dense export:

    magic  b"PDGT"
    dims   4 x uint32 little-endian (frames, height, width, channels)
    data   float32 little-endian, C order
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InputError, TensorFormatError

TENSOR_MAGIC = b"PDGT"


def read_image(path) -> np.ndarray:
    """Load an 8-bit RGB PNG as (H, W, 3) uint8."""
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except FileNotFoundError:
        raise InputError(f"image file not found: {path}") from None


def write_image(path, image: np.ndarray) -> None:
    arr = np.asarray(image, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {arr.shape}")
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def read_mask(path) -> np.ndarray:
    """Load an 8-bit 0/255 PNG mask as (H, W) bool."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"))
    except FileNotFoundError:
        raise InputError(f"mask file not found: {path}") from None
    return arr >= 128


def write_mask(path, mask: np.ndarray) -> None:
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def read_depth_pfm(path) -> np.ndarray:
    """Read a grayscale PFM into (H, W) float32, row 0 at the top."""
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        raise InputError(f"depth file not found: {path}") from None
    try:
        header, rest = raw.split(b"\n", 1)
        if header.strip() != b"Pf":
            raise ValueError(f"not a grayscale PFM (header {header!r})")
        dims, rest = rest.split(b"\n", 1)
        w, h = (int(x) for x in dims.split())
        scale_line, data = rest.split(b"\n", 1)
        scale = float(scale_line)
        dtype = "<f4" if scale < 0 else ">f4"
        flat = np.frombuffer(data, dtype=dtype, count=h * w)
        if flat.size != h * w:
            raise ValueError("truncated PFM payload")
    except (ValueError, struct.error) as exc:
        raise InputError(f"malformed PFM file {path}: {exc}") from None
    # PFM stores rows bottom-to-top.
    return flat.reshape(h, w)[::-1].astype(np.float32)


def write_depth_pfm(path, depth: np.ndarray) -> None:
    arr = np.asarray(depth, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError(f"expected (H, W) depth, got {arr.shape}")
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(arr[::-1].astype("<f4").tobytes())


def read_depth_png(path, depth_scale: float) -> np.ndarray:
    """Read a 16-bit PNG depth map, scaled to meters by ``depth_scale``."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("I"), dtype=np.float64)
    except FileNotFoundError:
        raise InputError(f"depth file not found: {path}") from None
    return (arr * float(depth_scale)).astype(np.float32)


def write_tensor(path, data: np.ndarray) -> None:
    arr = np.ascontiguousarray(data, dtype=np.float32)
    if arr.ndim != 4:
        raise ValueError(f"raw tensors are 4-D (frames, H, W, C), got {arr.shape}")
    with open(path, "wb") as f:
        f.write(TENSOR_MAGIC)
        f.write(struct.pack("<4I", *arr.shape))
        f.write(arr.astype("<f4").tobytes())


def read_tensor(path) -> np.ndarray:
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        raise TensorFormatError(f"tensor file not found: {path}") from None
    if len(raw) < 20 or raw[:4] != TENSOR_MAGIC:
        raise TensorFormatError(f"{path} is not a raw tensor file (bad magic)")
    dims = struct.unpack("<4I", raw[4:20])
    expected = 20 + 4 * int(np.prod(dims))
    if len(raw) != expected:
        raise TensorFormatError(
            f"{path}: payload size {len(raw) - 20} does not match dims {dims}"
        )
    return np.frombuffer(raw[20:], dtype="<f4").reshape(dims).copy()
