"""Latent-space conditioning: pseudo/edit videos, mask downsampling, the
masked composite, the piecewise denoising schedule, and bundle export.

Shapes follow the backbone's VAE arithmetic: a (1+T, H, W, C) video maps to
a (1+T/4, H/8, W/8, 16) latent, frame 0 standing alone and each latent frame
k >= 1 covering video frames 4k-3..4k. The real VAE, denoiser, and text
encoder are external; a fixed seeded linear encoder stands in so every
composite rule is testable at desk scale, and the exported bundle carries
everything a real backend needs to re-encode.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import formats
from .errors import ChecksumError, ManifestError
from .graph import _frozen
from .motion import DisocclusionMask

TEMPORAL_GROUP = 4
SPATIAL_FACTOR = 8
LATENT_CHANNELS = 16

DEFAULT_TOTAL_STEPS = 50
DEFAULT_REPLACE_STEPS = 35

USE_COMPOSITE = "use-composite"
USE_SOURCE = "use-source"

# Seed of the reference encoder's fixed RGB -> 16 channel lift (see README).
REFERENCE_ENCODER_SEED = 20_240_311
REFERENCE_ENCODER_ID = "reference-linear-v1"

BUNDLE_MANIFEST = "bundle.json"


def _check_video_dims(shape, what: str) -> None:
    frames, h, w = shape[0], shape[1], shape[2]
    if (frames - 1) % TEMPORAL_GROUP != 0:
        raise ValueError(f"{what}: frame count {frames} is not 1 + 4k")
    if h % SPATIAL_FACTOR or w % SPATIAL_FACTOR:
        raise ValueError(f"{what}: spatial dims {h}x{w} must be divisible by {SPATIAL_FACTOR}")


def latent_shape(video_shape) -> tuple[int, int, int, int]:
    frames, h, w = video_shape[0], video_shape[1], video_shape[2]
    return (
        1 + (frames - 1) // TEMPORAL_GROUP,
        h // SPATIAL_FACTOR,
        w // SPATIAL_FACTOR,
        LATENT_CHANNELS,
    )


@dataclass(frozen=True)
class LatentTensor:
    """(1+T/4, H/8, W/8, 16) feature tensor with a provenance tag."""

    data: np.ndarray
    provenance: str = "source"  # source | edit | composite

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float32)
        if d.ndim != 4 or d.shape[3] != LATENT_CHANNELS:
            raise ValueError(f"expected (F, h, w, {LATENT_CHANNELS}) latent, got {d.shape}")
        if not np.isfinite(d).all():
            raise ValueError("latent entries must be finite")
        if self.provenance not in ("source", "edit", "composite"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "data", _frozen(d))

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class LatentMask:
    """(1+T/4, H/8, W/8, 1) binary mask; latent frame 0 is always empty."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 4 or d.shape[3] != 1:
            raise ValueError(f"expected (F, h, w, 1) mask, got {d.shape}")
        if not np.isin(d, (0, 1)).all():
            raise ValueError("latent mask entries must be 0 or 1")
        if d[0].any():
            raise ValueError("latent mask frame 0 must be all zeros")
        object.__setattr__(self, "data", _frozen(d.astype(np.float32)))

    @property
    def shape(self):
        return self.data.shape

    def as_bool(self) -> np.ndarray:
        return self.data[..., 0] > 0.5


@dataclass(frozen=True)
class ScheduleDecision:
    step: int
    total: int
    replace: int
    outcome: str

    @property
    def use_composite(self) -> bool:
        return self.outcome == USE_COMPOSITE


def build_pseudo_video(image: np.ndarray, frames: int) -> np.ndarray:
    """Zero-padded pseudo video: the input image at frame 0, zeros after."""
    if frames < 1:
        raise ValueError(f"frames must be >= 1, got {frames}")
    img = np.asarray(image, dtype=np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {img.shape}")
    video = np.zeros((frames + 1,) + img.shape, dtype=np.uint8)
    video[0] = img
    return video


def build_edit_video(edited_frame: np.ndarray, frames: int) -> np.ndarray:
    """Uniform replication of the edited last frame into all 1+T frames."""
    if frames < 1:
        raise ValueError(f"frames must be >= 1, got {frames}")
    img = np.asarray(edited_frame, dtype=np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {img.shape}")
    return np.broadcast_to(img, (frames + 1,) + img.shape).copy()


def downsample_mask(mask: DisocclusionMask) -> LatentMask:
    """Max-pool the pixel mask to latent resolution.

    A latent cell is set iff any covered pixel-frame in its 8 x 8 x (1 or 4)
    block is set, so no revealed pixel's influence is dropped.
    """
    vol = mask.volume
    _check_video_dims(vol.shape, "disocclusion mask")
    frames, h, w = vol.shape
    lf, lh, lw, _ = latent_shape(vol.shape)

    spatial = vol.reshape(frames, lh, SPATIAL_FACTOR, lw, SPATIAL_FACTOR).any(axis=(2, 4))
    out = np.zeros((lf, lh, lw, 1), dtype=np.float32)
    out[0, :, :, 0] = spatial[0]
    if lf > 1:
        grouped = spatial[1:].reshape(lf - 1, TEMPORAL_GROUP, lh, lw).any(axis=1)
        out[1:, :, :, 0] = grouped
    return LatentMask(out)


def composite(source: LatentTensor, edit: LatentTensor, mask: LatentMask) -> LatentTensor:
    """Masked blend: mask * edit + (1 - mask) * source, cell-exact for binary masks."""
    if source.shape != edit.shape:
        raise ValueError(f"latent shapes differ: {source.shape} vs {edit.shape}")
    if mask.shape[:3] != source.shape[:3]:
        raise ValueError(f"mask shape {mask.shape} does not match latent {source.shape}")
    sel = mask.as_bool()[..., None]
    return LatentTensor(np.where(sel, edit.data, source.data), provenance="composite")


def schedule_conditioning(step: int, total: int = DEFAULT_TOTAL_STEPS,
                          replace: int = DEFAULT_REPLACE_STEPS) -> ScheduleDecision:
    """Which conditioning to feed at denoising step ``step`` (counted N..1).

    The composite replaces the source for the first ``replace`` of ``total``
    steps, i.e. exactly when step > total - replace.
    """
    if not (0 <= replace <= total):
        raise ValueError(f"replace steps {replace} must lie in [0, {total}]")
    if not (1 <= step <= total):
        raise ValueError(f"step {step} must lie in [1, {total}]")
    outcome = USE_COMPOSITE if step > total - replace else USE_SOURCE
    return ScheduleDecision(step=step, total=total, replace=replace, outcome=outcome)


def apply_zero_rule(latent: LatentTensor, mask: LatentMask) -> LatentTensor:
    """Zero non-first-frame features outside the disocclusion regions.

    Mirrors the backbone's conditioning convention: only frame 0 carries the
    full image features; later frames keep features solely where the mask
    lets the edit through. Idempotent.
    """
    if mask.shape[:3] != latent.shape[:3]:
        raise ValueError(f"mask shape {mask.shape} does not match latent {latent.shape}")
    keep = mask.as_bool()[..., None]
    out = np.where(keep, latent.data, 0.0).astype(np.float32)
    out[0] = latent.data[0]
    return LatentTensor(out, provenance=latent.provenance)


def _channel_lift() -> np.ndarray:
    rng = np.random.default_rng(REFERENCE_ENCODER_SEED)
    return rng.standard_normal((3, LATENT_CHANNELS))


_LIFT = _channel_lift()


def reference_encode(video: np.ndarray, provenance: str = "source") -> LatentTensor:
    """Deterministic linear stand-in for the frozen VAE encoder.

    Frame 0 passes alone and each later group of 4 frames is averaged;
    spatial blocks of 8 x 8 are mean-pooled; RGB lifts to 16 channels through
    a fixed seeded linear map. Linearity makes composite algebra exact.
    """
    v = np.asarray(video, dtype=np.float64)
    if v.ndim != 4 or v.shape[3] != 3:
        raise ValueError(f"expected (1+T, H, W, 3) video, got {v.shape}")
    _check_video_dims(v.shape, "video")
    frames, h, w, _ = v.shape
    lf, lh, lw, _ = latent_shape(v.shape)

    pooled = v.reshape(frames, lh, SPATIAL_FACTOR, lw, SPATIAL_FACTOR, 3).mean(axis=(2, 4))
    grouped = np.zeros((lf, lh, lw, 3), dtype=np.float64)
    grouped[0] = pooled[0]
    if lf > 1:
        grouped[1:] = pooled[1:].reshape(lf - 1, TEMPORAL_GROUP, lh, lw, 3).mean(axis=1)
    return LatentTensor((grouped @ _LIFT).astype(np.float32), provenance=provenance)


@dataclass(frozen=True)
class ConditioningBundle:
    """Loaded bundle contents; see ``export_bundle`` for the directory layout."""

    manifest: dict
    input_image: np.ndarray
    edited_frame: np.ndarray
    tracking: np.ndarray  # (1+T, H, W, 3) float32
    disocclusion: np.ndarray  # (1+T, H, W, 1) float32
    latent_mask: LatentMask
    latent_source: LatentTensor
    latent_edit: LatentTensor
    latent_composite: LatentTensor

    @property
    def prompt_combined(self) -> str:
        return self.manifest["prompts"]["combined"]


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def export_bundle(input_image: np.ndarray, edited_frame: np.ndarray,
                  tracking_frames: np.ndarray, mask: DisocclusionMask,
                  prompt: str, prompt_new: str, out_dir,
                  total_steps: int = DEFAULT_TOTAL_STEPS,
                  replace_steps: int = DEFAULT_REPLACE_STEPS,
                  encoder_id: str = REFERENCE_ENCODER_ID) -> Path:
    """Write the checksummed conditioning bundle a diffusion backend consumes.

    Contains the pixel-space inputs (image, edited last frame, tracking
    video, disocclusion mask), the latent mask, the schedule constants, the
    concatenated prompt, and, for the built-in reference encoder, the source,
    edit, and composite latents with the zero rule already applied to the
    composite. Returns the manifest path.
    """
    image = np.asarray(input_image, dtype=np.uint8)
    edited = np.asarray(edited_frame, dtype=np.uint8)
    if image.shape != edited.shape:
        raise ValueError(f"edited frame {edited.shape} does not match image {image.shape}")
    frames = tracking_frames.shape[0] - 1
    if tracking_frames.shape[1:3] != image.shape[:2]:
        raise ValueError("tracking video does not match image dimensions")
    if mask.volume.shape != tracking_frames.shape[:3]:
        raise ValueError("disocclusion mask does not match tracking video")
    if not (0 <= replace_steps <= total_steps):
        raise ValueError(f"replace steps {replace_steps} must lie in [0, {total_steps}]")

    latent_mask = downsample_mask(mask)
    source = reference_encode(build_pseudo_video(image, frames), provenance="source")
    edit = reference_encode(build_edit_video(edited, frames), provenance="edit")
    composed = apply_zero_rule(composite(source, edit, latent_mask), latent_mask)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    formats.write_image(out / "input_image.png", image)
    formats.write_image(out / "edited_last_frame.png", edited)
    formats.write_tensor(out / "tracking.pdgt", np.asarray(tracking_frames, dtype=np.float32))
    formats.write_tensor(out / "disocclusion.pdgt", mask.volume[..., None].astype(np.float32))
    formats.write_tensor(out / "latent_mask.pdgt", latent_mask.data)
    formats.write_tensor(out / "latent_source.pdgt", source.data)
    formats.write_tensor(out / "latent_edit.pdgt", edit.data)
    formats.write_tensor(out / "latent_composite.pdgt", composed.data)

    artifacts = {}
    for name in ("input_image.png", "edited_last_frame.png", "tracking.pdgt",
                 "disocclusion.pdgt", "latent_mask.pdgt", "latent_source.pdgt",
                 "latent_edit.pdgt", "latent_composite.pdgt"):
        artifacts[name] = {"path": name, "sha256": _sha256(out / name)}

    manifest = {
        "version": 1,
        "prompts": {
            "source": prompt,
            "edit": prompt_new,
            "combined": f"{prompt} {prompt_new}".strip(),
        },
        "total_steps": total_steps,
        "replace_steps": replace_steps,
        "encoder_id": encoder_id,
        "zero_rule_applied": True,
        "artifacts": artifacts,
    }
    path = out / BUNDLE_MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_bundle(bundle_dir) -> ConditioningBundle:
    """Load and checksum-verify a bundle directory; tampering raises."""
    base = Path(bundle_dir)
    path = base / BUNDLE_MANIFEST
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ManifestError(f"bundle manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"bundle manifest is not valid JSON: {exc}") from None
    for name, entry in manifest.get("artifacts", {}).items():
        target = base / entry["path"]
        if not target.exists():
            raise ManifestError(f"bundle artifact missing: {target}")
        digest = _sha256(target)
        if digest != entry["sha256"]:
            raise ChecksumError(f"checksum mismatch for {name}: {digest} != {entry['sha256']}")
    return ConditioningBundle(
        manifest=manifest,
        input_image=formats.read_image(base / "input_image.png"),
        edited_frame=formats.read_image(base / "edited_last_frame.png"),
        tracking=formats.read_tensor(base / "tracking.pdgt"),
        disocclusion=formats.read_tensor(base / "disocclusion.pdgt"),
        latent_mask=LatentMask(formats.read_tensor(base / "latent_mask.pdgt")),
        latent_source=LatentTensor(formats.read_tensor(base / "latent_source.pdgt"), "source"),
        latent_edit=LatentTensor(formats.read_tensor(base / "latent_edit.pdgt"), "edit"),
        latent_composite=LatentTensor(
            formats.read_tensor(base / "latent_composite.pdgt"), "composite"
        ),
    )
