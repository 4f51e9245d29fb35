"""Compile orchestration shared by the CLI and the HTTP service.

A compile takes (scene, document, target pose, frames, easing) and produces
the tracking video, the disocclusion volume, and per-pair ground-truth flow,
then writes them in the fixed export layout:

    compile_manifest.json
    input_image.png
    track_0000.png ...      tracking.pdgt   (1+T, H, W, 3)
    mask_0000.png ...       disocclusion.pdgt (1+T, H, W, 1)
    flow.pdgt (T, H, W, 2)  flow_valid.pdgt (T, H, W, 1)
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import formats
from .document import PdgDocument, bind_document, validate_document
from .errors import GraphValidationError
from .graph import PDG, Pose, clamp_pose, validate_pdg
from .motion import (
    DisocclusionMask,
    FlowField,
    MotionTimeline,
    TrackingVideo,
    disocclusion_from_tracking,
    ground_truth_flow,
    interpolate_timeline,
    render_tracking,
    transform_clouds,
)
from .scene import PointSet, Scene, unproject, valid_depth

COMPILE_MANIFEST = "compile_manifest.json"


def static_cloud(scene: Scene, pdg: PDG) -> PointSet:
    """Everything that does not move: unclaimed valid-depth pixels plus
    footprints of non-movable nodes."""
    free = valid_depth(scene.depth)
    for node in pdg.nodes:
        if node.movable and node.footprint is not None:
            free &= ~node.footprint
    return unproject(scene.depth, scene.camera, free, scene.image)


@dataclass(frozen=True)
class CompileResult:
    scene: Scene
    pdg: PDG
    pose: Pose  # clamped target
    timeline: MotionTimeline
    tracking: TrackingVideo
    disocclusion: DisocclusionMask
    flows: tuple[FlowField, ...]
    palette: str


def compile_motion(scene: Scene, pdg: PDG, target: Pose, frames: int,
                   easing: str = "linear", palette: str = "position") -> CompileResult:
    violations = validate_pdg(pdg)
    if violations:
        raise GraphValidationError(violations)
    target = clamp_pose(pdg, target)
    timeline = interpolate_timeline(pdg, target, frames=frames, easing=easing)
    clouds = transform_clouds(pdg, timeline)
    background = static_cloud(scene, pdg)
    tracking = render_tracking(clouds, pdg, background, scene.camera, palette=palette)
    disocclusion = disocclusion_from_tracking(tracking)
    flows = tuple(ground_truth_flow(tracking, t) for t in range(frames))
    return CompileResult(
        scene=scene,
        pdg=pdg,
        pose=target,
        timeline=timeline,
        tracking=tracking,
        disocclusion=disocclusion,
        flows=flows,
        palette=palette,
    )


def compile_document(scene: Scene, document: PdgDocument, target: Pose, frames: int,
                     easing: str = "linear", palette: str = "position",
                     base_dir=".") -> CompileResult:
    diagnostics = validate_document(document, base_dir)
    if diagnostics:
        raise GraphValidationError(diagnostics)
    pdg = bind_document(document, scene, base_dir)
    return compile_motion(scene, pdg, target, frames, easing=easing, palette=palette)


def write_compile(result: CompileResult, out_dir, timestamp: str | None = None) -> Path:
    """Write the full export layout; returns the manifest path.

    Output bytes are a pure function of the inputs; ``timestamp`` is the one
    optional non-deterministic manifest field and is off by default.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    frames = result.tracking.frames
    n, h, w, _ = frames.shape
    formats.write_image(out / "input_image.png", result.scene.image)
    for t in range(n):
        formats.write_image(out / f"track_{t:04d}.png", frames[t])
        formats.write_mask(out / f"mask_{t:04d}.png", result.disocclusion.volume[t])
    formats.write_tensor(out / "tracking.pdgt", frames.astype(np.float32))
    formats.write_tensor(
        out / "disocclusion.pdgt", result.disocclusion.volume[..., None].astype(np.float32)
    )
    flow = np.stack([f.data for f in result.flows]).astype(np.float32)
    flow_valid = np.stack([f.valid for f in result.flows])[..., None].astype(np.float32)
    formats.write_tensor(out / "flow.pdgt", flow)
    formats.write_tensor(out / "flow_valid.pdgt", flow_valid)

    manifest = {
        "version": 1,
        "frames": n - 1,
        "width": w,
        "height": h,
        "easing": result.timeline.easing,
        "palette": result.palette,
        "pose": dict(result.pose.params),
        "artifacts": {
            "input_image": "input_image.png",
            "tracking_tensor": "tracking.pdgt",
            "disocclusion_tensor": "disocclusion.pdgt",
            "flow_tensor": "flow.pdgt",
            "flow_valid_tensor": "flow_valid.pdgt",
            "tracking_frames": f"track_%04d.png (0..{n - 1})",
            "mask_frames": f"mask_%04d.png (0..{n - 1})",
        },
    }
    if timestamp is not None:
        manifest["timestamp"] = timestamp
    path = out / COMPILE_MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


@dataclass(frozen=True)
class CompiledInputs:
    """Compile outputs reloaded from disk, as the bundle and metrics steps see them."""

    manifest: dict
    input_image: np.ndarray
    tracking: np.ndarray  # (1+T, H, W, 3) float32
    disocclusion: DisocclusionMask
    flows: tuple[FlowField, ...]


def read_compile(compile_dir) -> CompiledInputs:
    base = Path(compile_dir)
    manifest = json.loads((base / COMPILE_MANIFEST).read_text(encoding="utf-8"))
    tracking = formats.read_tensor(base / "tracking.pdgt")
    vol = formats.read_tensor(base / "disocclusion.pdgt")[..., 0] > 0.5
    flow = formats.read_tensor(base / "flow.pdgt")
    flow_valid = formats.read_tensor(base / "flow_valid.pdgt")[..., 0] > 0.5
    flows = tuple(
        FlowField(data=flow[t].astype(np.float64), valid=flow_valid[t])
        for t in range(flow.shape[0])
    )
    return CompiledInputs(
        manifest=manifest,
        input_image=formats.read_image(base / "input_image.png"),
        tracking=tracking,
        disocclusion=DisocclusionMask(volume=vol),
        flows=flows,
    )
