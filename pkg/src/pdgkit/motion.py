"""Motion compilation: pose timelines, transformed clouds, tracking video,
disocclusion masks, and ground-truth optical flow.

Rendering is deterministic point splatting with a z-buffer: strictly nearer
depth wins; equal depths resolve to the lower node id (the static scene
participates under ``STATIC_ROOT``), then to the lower point index. A point
covers its nearest pixel (round half up).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import ndimage

from .errors import UnknownNodeError
from .graph import PDG, STATIC_ROOT, Pose, _frozen, forward_kinematics
from .scene import CameraModel, PointSet, project

DEFAULT_FRAMES = 48  # motion frames T; videos carry 1 + T frames

EASINGS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "linear": lambda u: u,
    "smoothstep": lambda u: u * u * (3.0 - 2.0 * u),
}

_CLOSE_STRUCT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class MotionTimeline:
    """Per-frame poses for frames 0..T; frame 0 is always the zero pose."""

    poses: tuple[Pose, ...]
    easing: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        if not self.poses:
            raise ValueError("timeline needs at least frame 0")
        if any(v != 0.0 for v in self.poses[0].params.values()):
            raise ValueError("timeline frame 0 must be the zero pose")

    @property
    def frame_count(self) -> int:
        return len(self.poses)

    @property
    def motion_frames(self) -> int:
        return len(self.poses) - 1


def interpolate_timeline(pdg: PDG, target: Pose, frames: int = DEFAULT_FRAMES,
                         easing: str = "linear") -> MotionTimeline:
    """Ramp from rest to ``target`` over ``frames`` motion frames.

    Frame t scales every target parameter by ``s(t / frames)`` where ``s``
    is the easing curve; parameters therefore stay within range whenever the
    clamped target does.
    """
    if frames < 1:
        raise ValueError(f"frames must be >= 1, got {frames}")
    if easing not in EASINGS:
        raise ValueError(f"unknown easing {easing!r}; choose from {sorted(EASINGS)}")
    from .graph import clamp_pose

    target = clamp_pose(pdg, target)
    curve = EASINGS[easing]
    poses = []
    for t in range(frames + 1):
        s = float(curve(np.float64(t) / frames))
        poses.append(Pose({k: v * s for k, v in target.params.items()}))
    return MotionTimeline(poses=tuple(poses), easing=easing)


def transform_clouds(pdg: PDG, timeline: MotionTimeline) -> list[dict[str, np.ndarray]]:
    """Apply forward kinematics to every node's rest points, per frame."""
    out = []
    for pose in timeline.poses:
        world = forward_kinematics(pdg, pose)
        frame = {}
        for node in pdg.nodes:
            if node.points is not None:
                frame[node.id] = world[node.id].apply(node.points)
        out.append(frame)
    return out


@dataclass(frozen=True)
class TrackingVideo:
    """Color-coded trajectory render plus the raw correspondences behind it.

    ``winner`` maps each pixel to the combined point index that won the
    z-buffer (-1 when unhit); ``point_movable``/``point_local`` decode a
    combined index into the static cloud or the per-node movable arrays.
    """

    frames: np.ndarray  # (1+T, H, W, 3) uint8
    winner: np.ndarray  # (1+T, H, W) int32
    point_movable: np.ndarray  # (P,) bool per combined point
    point_local: np.ndarray  # (P,) int32 index into static or movable arrays
    point_node: np.ndarray  # (P,) int32 index into node_ids, -1 for static
    node_ids: tuple[str, ...]  # movable node ids
    movable_rcd: np.ndarray  # (1+T, M, 3) float64 (row, col, depth)
    movable_valid: np.ndarray  # (1+T, M) bool
    static_rcd: np.ndarray  # (S, 3) float64, fixed camera
    static_valid: np.ndarray  # (S,) bool

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames.shape[1:3]


@dataclass(frozen=True)
class DisocclusionMask:
    """Evolving binary mask of dynamically revealed pixels; frame 0 is empty."""

    volume: np.ndarray  # (1+T, H, W) bool

    def __post_init__(self):
        vol = np.asarray(self.volume, dtype=bool)
        if vol.ndim != 3:
            raise ValueError(f"expected (1+T, H, W) volume, got {vol.shape}")
        if vol[0].any():
            raise ValueError("disocclusion frame 0 must be all zeros")
        object.__setattr__(self, "volume", _frozen(vol))


@dataclass(frozen=True)
class FlowField:
    """Per-pixel (dcol, drow) displacement in pixels plus a validity mask."""

    data: np.ndarray  # (H, W, 2) float64
    valid: np.ndarray  # (H, W) bool

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        v = np.asarray(self.valid, dtype=bool)
        if d.ndim != 3 or d.shape[2] != 2 or v.shape != d.shape[:2]:
            raise ValueError(f"inconsistent flow shapes {d.shape} / {v.shape}")
        if not np.isfinite(d[v]).all():
            raise ValueError("flow must be finite where valid")
        object.__setattr__(self, "data", _frozen(d))
        object.__setattr__(self, "valid", _frozen(v))

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.data[..., 0], self.data[..., 1])


def _nearest_pixel(rcd: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r = np.floor(rcd[:, 0] + 0.5).astype(np.int64)
    c = np.floor(rcd[:, 1] + 0.5).astype(np.int64)
    return r, c


def _splat_winner(rcd: np.ndarray, valid: np.ndarray, height: int, width: int) -> np.ndarray:
    """Winner-take-all z-buffer; input order is the tie-break order."""
    r, c = _nearest_pixel(rcd)
    ok = valid & (r >= 0) & (r < height) & (c >= 0) & (c < width)
    cand = np.flatnonzero(ok)
    winner = np.full(height * width, -1, dtype=np.int32)
    if len(cand):
        pix = r[cand] * width + c[cand]
        order = np.lexsort((cand, rcd[cand, 2], pix))
        pix_sorted = pix[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = pix_sorted[1:] != pix_sorted[:-1]
        winner[pix_sorted[first]] = cand[order][first].astype(np.int32)
    return winner.reshape(height, width)


def _position_palette(rest_positions: np.ndarray) -> np.ndarray:
    lo = rest_positions.min(axis=0)
    hi = rest_positions.max(axis=0)
    span = hi - lo
    span[span == 0] = 1.0
    unit = (rest_positions - lo) / span
    return np.clip(np.floor(unit * 255.0 + 0.5), 0, 255).astype(np.uint8)


class _RenderSetup:
    """Canonical combined point ordering shared by every frame of a render."""

    def __init__(self, clouds0: Mapping[str, np.ndarray], pdg: PDG,
                 static_cloud: PointSet, camera: CameraModel, palette: str):
        groups = [(STATIC_ROOT, None)]
        for nid in sorted(pdg.movable_ids()):
            if nid not in clouds0:
                raise UnknownNodeError(f"clouds are missing movable node {nid!r}")
            groups.append((nid, pdg.node(nid)))
        groups.sort(key=lambda g: g[0])

        self.camera = camera
        self.node_ids = tuple(nid for nid, node in groups if node is not None)
        node_rank = {nid: i for i, nid in enumerate(self.node_ids)}

        sizes, kinds, nodes_of, colors, rest = [], [], [], [], []
        for nid, node in groups:
            if node is None:
                n = len(static_cloud)
                colors.append(static_cloud.colors)
                rest.append(static_cloud.positions)
                kinds.append(np.zeros(n, dtype=bool))
                nodes_of.append(np.full(n, -1, dtype=np.int32))
            else:
                n = len(node.points)
                colors.append(node.colors)
                rest.append(node.points)
                kinds.append(np.ones(n, dtype=bool))
                nodes_of.append(np.full(n, node_rank[nid], dtype=np.int32))
            sizes.append(n)
        self.point_movable = np.concatenate(kinds)
        self.point_node = np.concatenate(nodes_of)
        rest_all = np.concatenate(rest)
        self.total = len(rest_all)
        if self.total == 0:
            raise ValueError("nothing to render: empty scene")

        # Local index within the static cloud or within the movable flat arrays.
        self.point_local = np.zeros(self.total, dtype=np.int32)
        self.point_local[~self.point_movable] = np.arange((~self.point_movable).sum())
        self.point_local[self.point_movable] = np.arange(self.point_movable.sum())
        self._movable_slices = {}
        offset = 0
        for nid, node in groups:
            if node is not None:
                n = len(node.points)
                self._movable_slices[nid] = slice(offset, offset + n)
                offset += n
        self.movable_count = offset

        if palette == "position":
            self.colors = _position_palette(rest_all)
        elif palette == "image":
            self.colors = np.concatenate(colors)
        else:
            raise ValueError(f"unknown palette {palette!r}")

        static_rcd, static_ok = project(static_cloud.positions, camera)
        self.static_rcd = static_rcd
        self.static_valid = static_ok

    def frame_arrays(self, cloud_t: Mapping[str, np.ndarray]):
        """Project one frame's movable clouds; returns combined rcd/valid plus movable slices."""
        movable_rcd = np.zeros((self.movable_count, 3), dtype=np.float64)
        movable_ok = np.zeros(self.movable_count, dtype=bool)
        for nid, sl in self._movable_slices.items():
            rcd, ok = project(cloud_t[nid], self.camera)
            movable_rcd[sl] = rcd
            movable_ok[sl] = ok
        rcd = np.zeros((self.total, 3), dtype=np.float64)
        valid = np.zeros(self.total, dtype=bool)
        rcd[~self.point_movable] = self.static_rcd
        valid[~self.point_movable] = self.static_valid
        rcd[self.point_movable] = movable_rcd
        valid[self.point_movable] = movable_ok
        return rcd, valid, movable_rcd, movable_ok


def render_tracking(clouds: Sequence[Mapping[str, np.ndarray]], pdg: PDG,
                    static_cloud: PointSet, camera: CameraModel,
                    palette: str = "position") -> TrackingVideo:
    """Splat static plus movable points for every frame.

    With the default ``position`` palette each point's color encodes its rest
    position normalized to the rest scene bounding box (x to R, y to G, z to
    B), so colors are identity-stable along trajectories. The ``image``
    palette keeps source pixel colors, which re-renders the scene content.
    """
    setup = _RenderSetup(clouds[0], pdg, static_cloud, camera, palette)
    h, w = camera.height, camera.width
    n_frames = len(clouds)

    frames = np.zeros((n_frames, h, w, 3), dtype=np.uint8)
    winners = np.zeros((n_frames, h, w), dtype=np.int32)
    movable_rcd = np.zeros((n_frames, setup.movable_count, 3), dtype=np.float64)
    movable_valid = np.zeros((n_frames, setup.movable_count), dtype=bool)

    for t, cloud_t in enumerate(clouds):
        rcd, valid, m_rcd, m_ok = setup.frame_arrays(cloud_t)
        winner = _splat_winner(rcd, valid, h, w)
        hit = winner >= 0
        frames[t][hit] = setup.colors[winner[hit]]
        winners[t] = winner
        movable_rcd[t] = m_rcd
        movable_valid[t] = m_ok

    return TrackingVideo(
        frames=frames,
        winner=winners,
        point_movable=setup.point_movable,
        point_local=setup.point_local,
        point_node=setup.point_node,
        node_ids=setup.node_ids,
        movable_rcd=movable_rcd,
        movable_valid=movable_valid,
        static_rcd=setup.static_rcd,
        static_valid=setup.static_valid,
    )


def close_footprint(mask: np.ndarray) -> np.ndarray:
    """1-px morphological closing; fills splat pinholes without eroding borders."""
    dilated = ndimage.binary_dilation(mask, structure=_CLOSE_STRUCT, border_value=0)
    return ndimage.binary_erosion(dilated, structure=_CLOSE_STRUCT, border_value=1)


def _movable_coverage(tracking: TrackingVideo, t: int) -> np.ndarray:
    """Union of per-node closed visible footprints at frame t."""
    winner = tracking.winner[t]
    hit = winner >= 0
    node_map = np.full(winner.shape, -1, dtype=np.int32)
    node_map[hit] = tracking.point_node[winner[hit]]
    coverage = np.zeros(winner.shape, dtype=bool)
    for i in range(len(tracking.node_ids)):
        footprint = node_map == i
        if footprint.any():
            coverage |= close_footprint(footprint)
    return coverage


def disocclusion_from_tracking(tracking: TrackingVideo) -> DisocclusionMask:
    """Pixels covered by movable parts at rest but vacated at frame t."""
    n = tracking.frame_count
    rest = _movable_coverage(tracking, 0)
    volume = np.zeros((n,) + tracking.shape, dtype=bool)
    for t in range(1, n):
        volume[t] = rest & ~_movable_coverage(tracking, t)
    return DisocclusionMask(volume=volume)


def compute_disocclusion(clouds: Sequence[Mapping[str, np.ndarray]], pdg: PDG,
                         static_cloud: PointSet, camera: CameraModel) -> DisocclusionMask:
    tracking = render_tracking(clouds, pdg, static_cloud, camera)
    return disocclusion_from_tracking(tracking)


def ground_truth_flow(tracking: TrackingVideo, t: int) -> FlowField:
    """Flow between frames t and t+1 from the winning point at each pixel.

    Movable winners advect by the difference of their projections; static
    winners have zero flow with validity true (the camera is fixed); unhit
    pixels and points lost behind the camera are invalid.
    """
    if not (0 <= t < tracking.frame_count - 1):
        raise ValueError(f"t must be in [0, {tracking.frame_count - 2}], got {t}")
    winner = tracking.winner[t]
    h, w = winner.shape
    data = np.zeros((h, w, 2), dtype=np.float64)
    valid = np.zeros((h, w), dtype=bool)

    hit = winner >= 0
    idx = winner[hit]
    is_movable = tracking.point_movable[idx]

    static_pix = np.zeros_like(hit)
    static_pix[hit] = ~is_movable
    valid[static_pix] = True

    movable_pix = np.zeros_like(hit)
    movable_pix[hit] = is_movable
    local = tracking.point_local[idx[is_movable]]
    ok = tracking.movable_valid[t, local] & tracking.movable_valid[t + 1, local]
    delta = tracking.movable_rcd[t + 1, local] - tracking.movable_rcd[t, local]
    rows, cols = np.nonzero(movable_pix)
    data[rows[ok], cols[ok], 0] = delta[ok, 1]  # dcol
    data[rows[ok], cols[ok], 1] = delta[ok, 0]  # drow
    valid[rows[ok], cols[ok]] = True
    return FlowField(data=data, valid=valid)
