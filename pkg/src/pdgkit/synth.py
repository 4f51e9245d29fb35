"""Synthetic ground-truth scenes: textured fronto-parallel rectangles at known depths.

The generator is the oracle substrate for everything downstream: image,
depth, masks, and the matching graph are analytically exact by construction.

Spec schema (JSON):

    {
      "width": 128, "height": 96,
      "seed": 7,
      "background_depth": 5.0,
      "camera": {"fx": 100, "fy": 100, "cx": 63.5, "cy": 47.5},   # optional
      "parts": [
        {"id": "slab",
         "rect": [row0, col0, row1, col1],          # half-open extents
         "depth": 2.0,
         "texture_seed": 11,                         # optional
         "motion": {"parent": "__static__", "kind": "translation",
                    "axis": [1, 0, 0], "center": [0, 0, 0],
                    "range": [-0.5, 0.5], "target": 0.2}}          # motion optional
      ]
    }
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SynthSpecError
from .graph import PDG, STATIC_ROOT, MotionEdge, PartNode, Pose
from .scene import CameraModel, PointSet, Scene, unproject


@dataclass(frozen=True)
class SynthResult:
    scene: Scene
    pdg: PDG
    target: Pose
    # Full background plane, including pixels hidden under parts at rest.
    # The generator knows the occluded texture analytically; a measured scene
    # never could, so this lives here and not on Scene.
    amodal_background: PointSet


def _camera_from_spec(spec: dict, width: int, height: int) -> CameraModel:
    cam = spec.get("camera", {})
    return CameraModel(
        fx=float(cam.get("fx", width)),
        fy=float(cam.get("fy", width)),
        cx=float(cam.get("cx", (width - 1) / 2)),
        cy=float(cam.get("cy", (height - 1) / 2)),
        width=width,
        height=height,
    )


def _texture(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.integers(0, 256, size=shape, dtype=np.uint8)


def synth_scene(spec: dict) -> SynthResult:
    """Build an analytically exact scene plus its ground-truth graph and target pose."""
    width = int(spec.get("width", 128))
    height = int(spec.get("height", 96))
    bg_depth = float(spec.get("background_depth", 5.0))
    seed = int(spec.get("seed", 0))
    camera = _camera_from_spec(spec, width, height)

    rng = np.random.default_rng(seed)
    bg_image = _texture(rng, (height, width, 3))
    image = bg_image.copy()
    depth = np.full((height, width), bg_depth, dtype=np.float32)

    parts = spec.get("parts", [])
    ids = [p.get("id") for p in parts]
    if len(set(ids)) != len(ids) or any(not i for i in ids):
        raise SynthSpecError("part ids must be unique and non-empty")

    # Visible-surface pass: nearest rectangle owns each pixel.
    owner = np.full((height, width), -1, dtype=np.int32)
    for i, part in enumerate(parts):
        r0, c0, r1, c1 = (int(v) for v in part["rect"])
        if not (0 <= r0 < r1 <= height and 0 <= c0 < c1 <= width):
            raise SynthSpecError(f"part {ids[i]!r} rect {part['rect']} outside {height}x{width}")
        d = float(part["depth"])
        if d <= 0:
            raise SynthSpecError(f"part {ids[i]!r} depth must be positive")
        if d >= bg_depth:
            raise SynthSpecError(f"part {ids[i]!r} at depth {d} is hidden behind the background")
        region = np.zeros((height, width), dtype=bool)
        region[r0:r1, c0:c1] = True
        tie = region & (depth == d) & (owner >= 0)
        if tie.any():
            other = ids[int(owner[tie][0])]
            raise SynthSpecError(f"parts {ids[i]!r} and {other!r} overlap at equal depth {d}")
        win = region & (d < depth)
        depth[win] = d
        owner[win] = i
        part_rng = np.random.default_rng(part.get("texture_seed", seed + 1 + i))
        image[win] = _texture(part_rng, (int(win.sum()), 3))

    masks = {ids[i]: owner == i for i in range(len(parts))}
    for i, part in enumerate(parts):
        if not masks[ids[i]].any():
            raise SynthSpecError(f"part {ids[i]!r} is fully occluded")
    scene = Scene(image=image, depth=depth, camera=camera, part_masks=masks)

    nodes, edges, target = [], [], {}
    for i, part in enumerate(parts):
        motion = part.get("motion")
        cloud = scene.lift_part(ids[i])
        nodes.append(
            PartNode(
                id=ids[i],
                movable=motion is not None,
                points=cloud.positions,
                pixel_origin=cloud.pixel_origin,
                colors=cloud.colors,
                footprint=masks[ids[i]],
            )
        )
        if motion is not None:
            lo, hi = (float(v) for v in motion["range"])
            edges.append(
                MotionEdge(
                    parent=str(motion.get("parent", STATIC_ROOT)),
                    child=ids[i],
                    kind=str(motion["kind"]),
                    axis=np.asarray(motion["axis"], dtype=np.float64),
                    center=np.asarray(motion.get("center", (0.0, 0.0, 0.0)), dtype=np.float64),
                    range=(lo, hi),
                )
            )
            target[ids[i]] = float(motion.get("target", hi))

    pdg = PDG(nodes=tuple(nodes), edges=tuple(edges))
    amodal = unproject(
        np.full((height, width), bg_depth, dtype=np.float32),
        camera,
        np.ones((height, width), dtype=bool),
        bg_image,
    )
    return SynthResult(scene=scene, pdg=pdg, target=Pose(target), amodal_background=amodal)


def background_cloud(scene: Scene):
    """Lift every pixel not owned by a part; skips invalid-depth pixels."""
    occupied = np.zeros(scene.shape, dtype=bool)
    for m in scene.part_masks.values():
        occupied |= m
    from .scene import valid_depth

    free = ~occupied & valid_depth(scene.depth)
    return unproject(scene.depth, scene.camera, free, scene.image)


def load_synth_spec(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
