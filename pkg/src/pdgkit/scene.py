"""Measured scene substrate: image, depth, camera, part masks, and depth lifting.

Pixel convention: (row, col), origin at the top-left, pixel centers at
integer coordinates. Depth values of 0 or NaN are invalid.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import formats
from .errors import (
    DimensionMismatchError,
    InvalidDepthError,
    ManifestError,
    MaskOverlapError,
)
from .graph import RigidTransform, _frozen

SCENE_MANIFEST_FIELDS = {"version", "image", "depth", "depth_scale", "camera", "masks", "tools"}


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera with an optional world-to-camera extrinsic."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    extrinsic: RigidTransform | None = None

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width) or not (0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")
        if self.extrinsic is None:
            object.__setattr__(self, "extrinsic", RigidTransform.identity())
        if not self.extrinsic.is_orthonormal():
            raise ValueError("extrinsic rotation must be orthonormal with det +1")

    def to_dict(self) -> dict:
        d = {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }
        ext = self.extrinsic
        if not (np.array_equal(ext.rotation, np.eye(3)) and not ext.translation.any()):
            d["extrinsic"] = {
                "rotation": ext.rotation.tolist(),
                "translation": ext.translation.tolist(),
            }
        return d

    @staticmethod
    def from_dict(d: dict) -> "CameraModel":
        ext = None
        if "extrinsic" in d:
            ext = RigidTransform(
                np.asarray(d["extrinsic"]["rotation"], dtype=np.float64),
                np.asarray(d["extrinsic"]["translation"], dtype=np.float64),
            )
        return CameraModel(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            width=int(d["width"]),
            height=int(d["height"]),
            extrinsic=ext,
        )


@dataclass(frozen=True)
class PointSet:
    """A lifted point cloud with per-point source pixels and colors."""

    positions: np.ndarray  # (N, 3) float64, world frame
    pixel_origin: np.ndarray  # (N, 2) int32, (row, col)
    colors: np.ndarray  # (N, 3) uint8

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        org = np.asarray(self.pixel_origin, dtype=np.int32).reshape(-1, 2)
        col = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
        if not (len(pos) == len(org) == len(col)):
            raise ValueError("positions, pixel_origin, colors must have equal length")
        object.__setattr__(self, "positions", _frozen(pos))
        object.__setattr__(self, "pixel_origin", _frozen(org))
        object.__setattr__(self, "colors", _frozen(col))

    def __len__(self) -> int:
        return len(self.positions)


def valid_depth(depth: np.ndarray) -> np.ndarray:
    d = np.asarray(depth)
    return np.isfinite(d) & (d > 0)


def unproject(depth: np.ndarray, camera: CameraModel, mask: np.ndarray,
              image: np.ndarray | None = None) -> PointSet:
    """Lift masked depth pixels into a world-frame point cloud.

    Each masked pixel (r, c) with depth d maps to
    ``d * ((c - cx)/fx, (r - cy)/fy, 1)`` in the camera frame, then through
    the inverse extrinsic. Colors are copied from ``image`` when given.
    """
    depth = np.asarray(depth, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if depth.shape != mask.shape:
        raise DimensionMismatchError(f"depth {depth.shape} vs mask {mask.shape}")
    if depth.shape != (camera.height, camera.width):
        raise DimensionMismatchError(
            f"depth {depth.shape} does not match camera {(camera.height, camera.width)}"
        )
    rows, cols = np.nonzero(mask)
    d = depth[rows, cols]
    bad = ~valid_depth(d)
    if bad.any():
        pixels = list(zip(rows[bad][:10].tolist(), cols[bad][:10].tolist()))
        raise InvalidDepthError(
            f"{int(bad.sum())} masked pixel(s) have invalid depth, first: {pixels}"
        )
    x = d * (cols - camera.cx) / camera.fx
    y = d * (rows - camera.cy) / camera.fy
    cam_points = np.stack([x, y, d], axis=1)
    world = camera.extrinsic.inverse().apply(cam_points)
    if image is not None:
        colors = np.asarray(image, dtype=np.uint8)[rows, cols]
    else:
        colors = np.zeros((len(rows), 3), dtype=np.uint8)
    return PointSet(world, np.stack([rows, cols], axis=1), colors)


def project(points: np.ndarray, camera: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """Pinhole projection of world points to per-point (row, col, depth).

    Returns ``(rcd, valid)``; points at or behind the camera plane are
    flagged invalid rather than projected.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cam = camera.extrinsic.apply(pts)
    z = cam[:, 2]
    valid = z > 0
    rcd = np.zeros((len(pts), 3), dtype=np.float64)
    zs = np.where(valid, z, 1.0)
    rcd[:, 0] = camera.fy * cam[:, 1] / zs + camera.cy
    rcd[:, 1] = camera.fx * cam[:, 0] / zs + camera.cx
    rcd[:, 2] = z
    rcd[~valid] = 0.0
    return rcd, valid


@dataclass(frozen=True)
class Scene:
    """Validated measured scene: all rasters share the camera's H x W."""

    image: np.ndarray  # (H, W, 3) uint8
    depth: np.ndarray  # (H, W) float32, meters
    camera: CameraModel
    part_masks: dict[str, np.ndarray]  # id -> (H, W) bool

    def __post_init__(self):
        img = np.asarray(self.image, dtype=np.uint8)
        dep = np.asarray(self.depth, dtype=np.float32)
        hw = (self.camera.height, self.camera.width)
        if img.shape != hw + (3,):
            raise DimensionMismatchError(f"image {img.shape} does not match camera {hw}")
        if dep.shape != hw:
            raise DimensionMismatchError(f"depth {dep.shape} does not match camera {hw}")
        masks = {}
        occupied = np.zeros(hw, dtype=bool)
        for part_id, m in dict(self.part_masks).items():
            m = np.asarray(m, dtype=bool)
            if m.shape != hw:
                raise DimensionMismatchError(
                    f"mask {part_id!r} {m.shape} does not match camera {hw}"
                )
            overlap = occupied & m
            if overlap.any():
                r, c = np.argwhere(overlap)[0]
                raise MaskOverlapError(
                    f"mask {part_id!r} overlaps another part at pixel ({r}, {c})"
                )
            occupied |= m
            invalid = m & ~valid_depth(dep)
            if invalid.any():
                pix = [tuple(p) for p in np.argwhere(invalid)[:10].tolist()]
                raise InvalidDepthError(
                    f"mask {part_id!r} covers {int(invalid.sum())} pixel(s) with invalid depth,"
                    f" first: {pix}"
                )
            masks[part_id] = _frozen(m)
        object.__setattr__(self, "image", _frozen(img))
        object.__setattr__(self, "depth", _frozen(dep))
        object.__setattr__(self, "part_masks", masks)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.camera.height, self.camera.width)

    def lift_part(self, part_id: str) -> PointSet:
        return unproject(self.depth, self.camera, self.part_masks[part_id], self.image)


def load_scene(manifest_path) -> Scene:
    """Load and validate a scene from its JSON manifest.

    Relative paths resolve against the manifest's directory. The optional
    ``tools`` field is a free-form hook recording how external estimators
    produced the files; the loader ignores its content.
    """
    manifest_path = Path(manifest_path)
    try:
        raw = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ManifestError(f"scene manifest not found: {manifest_path}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"scene manifest is not valid JSON: {exc}") from None
    unknown = set(raw) - SCENE_MANIFEST_FIELDS
    if unknown:
        raise ManifestError(f"unknown scene manifest fields: {sorted(unknown)}")
    for key in ("image", "depth", "camera", "masks"):
        if key not in raw:
            raise ManifestError(f"scene manifest missing required field {key!r}")

    base = manifest_path.parent
    image = formats.read_image(base / raw["image"])
    depth_path = base / raw["depth"]
    if str(raw["depth"]).lower().endswith(".pfm"):
        depth = formats.read_depth_pfm(depth_path)
    else:
        if "depth_scale" not in raw:
            raise ManifestError("PNG depth requires a depth_scale field (meters per unit)")
        depth = formats.read_depth_png(depth_path, raw["depth_scale"])
    try:
        camera_raw = json.loads((base / raw["camera"]).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ManifestError(f"camera file not found: {base / raw['camera']}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"camera file is not valid JSON: {exc}") from None
    camera = CameraModel.from_dict(camera_raw)
    masks = {pid: formats.read_mask(base / p) for pid, p in dict(raw["masks"]).items()}
    return Scene(image=image, depth=depth, camera=camera, part_masks=masks)


def _safe_name(part_id: str, taken: set[str]) -> str:
    name = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in part_id) or "part"
    candidate, i = name, 1
    while candidate in taken:
        candidate = f"{name}_{i}"
        i += 1
    taken.add(candidate)
    return candidate


def save_scene(scene: Scene, out_dir, manifest_name: str = "scene.json") -> Path:
    """Write a scene plus its manifest into ``out_dir``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    formats.write_image(out / "image.png", scene.image)
    formats.write_depth_pfm(out / "depth.pfm", scene.depth)
    (out / "camera.json").write_text(
        json.dumps(scene.camera.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (out / "masks").mkdir(exist_ok=True)
    taken: set[str] = set()
    mask_entries = {}
    for part_id, mask in scene.part_masks.items():
        rel = f"masks/{_safe_name(part_id, taken)}.png"
        formats.write_mask(out / rel, mask)
        mask_entries[part_id] = rel
    manifest = {
        "version": 1,
        "image": "image.png",
        "depth": "depth.pfm",
        "camera": "camera.json",
        "masks": mask_entries,
    }
    path = out / manifest_name
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
