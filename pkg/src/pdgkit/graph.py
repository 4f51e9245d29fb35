"""Proxy dynamic graph: part nodes, 1-DoF motion edges, poses, forward kinematics.

The graph is a kinematic forest rooted at an implicit static node
(``STATIC_ROOT``). Every edge carries a single scalar parameter; a pose maps
child-node ids to parameter values, and forward kinematics composes edge
transforms parent-first along each root-to-node path.

All types are immutable values; all operations are pure functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from .errors import GraphValidationError, ParamRangeError, UnknownNodeError

STATIC_ROOT = "__static__"

TRANSLATION = "translation"
ROTATION = "rotation"

UNIT_AXIS_TOL = 1e-9
ORTHONORMAL_TOL = 1e-9


def _as_vec3(value, name: str) -> np.ndarray:
    v = np.asarray(value, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {v.shape}")
    return v


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def rodrigues(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation matrix for a right-handed rotation by ``angle`` radians about a unit axis."""
    ax = np.asarray(axis, dtype=np.float64)
    k = np.array(
        [
            [0.0, -ax[2], ax[1]],
            [ax[2], 0.0, -ax[0]],
            [-ax[1], ax[0], 0.0],
        ]
    )
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid motion: ``p -> rotation @ p + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if t.shape != (3,):
            raise ValueError(f"translation must be a 3-vector, got {t.shape}")
        object.__setattr__(self, "rotation", _frozen(r))
        object.__setattr__(self, "translation", _frozen(t))

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self`` after ``other``: (self.compose(other))(p) == self(other(p))."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        if p.ndim == 1:
            return self.rotation @ p + self.translation
        return p @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))

    def is_orthonormal(self, tol: float = ORTHONORMAL_TOL) -> bool:
        r = self.rotation
        return (
            np.allclose(r.T @ r, np.eye(3), atol=tol)
            and abs(np.linalg.det(r) - 1.0) <= tol
        )


@dataclass(frozen=True)
class PartNode:
    """A graph node: a part's 3D point cloud plus its 2D footprint at rest.

    Geometry fields are optional so that a document can be validated before a
    scene is bound; a node used for cloud transforms must carry all of them.
    """

    id: str
    movable: bool = True
    points: np.ndarray | None = None  # (N, 3) float64, meters, camera frame at rest
    pixel_origin: np.ndarray | None = None  # (N, 2) int32, (row, col) source pixels
    colors: np.ndarray | None = None  # (N, 3) uint8
    footprint: np.ndarray | None = None  # (H, W) bool

    def __post_init__(self):
        if self.points is not None:
            object.__setattr__(
                self, "points", _frozen(np.asarray(self.points, dtype=np.float64))
            )
        if self.pixel_origin is not None:
            object.__setattr__(
                self,
                "pixel_origin",
                _frozen(np.asarray(self.pixel_origin, dtype=np.int32)),
            )
        if self.colors is not None:
            object.__setattr__(
                self, "colors", _frozen(np.asarray(self.colors, dtype=np.uint8))
            )
        if self.footprint is not None:
            object.__setattr__(
                self, "footprint", _frozen(np.asarray(self.footprint, dtype=bool))
            )

    @property
    def bound(self) -> bool:
        return (
            self.points is not None
            and self.pixel_origin is not None
            and self.colors is not None
            and self.footprint is not None
        )


@dataclass(frozen=True)
class MotionEdge:
    """A 1-DoF joint between ``parent`` and ``child``.

    ``kind`` is ``translation`` (param in meters along ``axis``) or
    ``rotation`` (param in radians, right-handed about the line through
    ``center`` along ``axis``). ``range`` is a closed interval that must
    admit the rest parameter 0.
    """

    parent: str
    child: str
    kind: str
    axis: np.ndarray
    center: np.ndarray
    range: tuple[float, float]

    def __post_init__(self):
        if self.kind not in (TRANSLATION, ROTATION):
            raise ValueError(f"unknown motion kind {self.kind!r}")
        object.__setattr__(self, "axis", _frozen(_as_vec3(self.axis, "axis")))
        object.__setattr__(self, "center", _frozen(_as_vec3(self.center, "center")))
        lo, hi = self.range
        object.__setattr__(self, "range", (float(lo), float(hi)))

    def clamp(self, param: float) -> float:
        lo, hi = self.range
        return min(max(float(param), lo), hi)


@dataclass(frozen=True)
class PDG:
    """Kinematic forest of part nodes and motion edges, rooted at ``STATIC_ROOT``."""

    nodes: tuple[PartNode, ...]
    edges: tuple[MotionEdge, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))

    @cached_property
    def node_map(self) -> dict[str, PartNode]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def parent_edge(self) -> dict[str, MotionEdge]:
        """First incoming edge per child (validation flags duplicates)."""
        out: dict[str, MotionEdge] = {}
        for e in self.edges:
            out.setdefault(e.child, e)
        return out

    def node(self, node_id: str) -> PartNode:
        try:
            return self.node_map[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def movable_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes if n.movable)


@dataclass(frozen=True)
class Pose:
    """Scalar parameter per posed edge, keyed by the edge's child node id."""

    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "params", {str(k): float(v) for k, v in dict(self.params).items()}
        )

    @staticmethod
    def zero() -> "Pose":
        return Pose({})

    def get(self, node_id: str) -> float:
        return self.params.get(node_id, 0.0)


@dataclass(frozen=True)
class Violation:
    """One broken invariant: a machine-checkable code plus the offending subject."""

    code: str
    subject: str
    detail: str

    def __str__(self) -> str:
        return f"{self.code} [{self.subject}]: {self.detail}"


def _structural_violations(pdg: PDG) -> list[Violation]:
    out: list[Violation] = []
    seen_ids: set[str] = set()
    for n in pdg.nodes:
        if n.id == STATIC_ROOT:
            out.append(Violation("reserved-id", n.id, "node id collides with the static root"))
        if n.id in seen_ids:
            out.append(Violation("duplicate-node", n.id, "node id appears more than once"))
        seen_ids.add(n.id)

    incoming: dict[str, int] = {}
    for i, e in enumerate(pdg.edges):
        subject = f"{e.parent}->{e.child}"
        if e.child == e.parent:
            out.append(Violation("self-edge", subject, "child equals parent"))
        if e.parent != STATIC_ROOT and e.parent not in seen_ids:
            out.append(Violation("unknown-endpoint", subject, f"parent {e.parent!r} is not a node"))
        if e.child not in seen_ids or e.child == STATIC_ROOT:
            out.append(Violation("unknown-endpoint", subject, f"child {e.child!r} is not a node"))
        norm = float(np.linalg.norm(e.axis))
        if abs(norm - 1.0) > UNIT_AXIS_TOL:
            out.append(Violation("non-unit-axis", subject, f"|axis| = {norm!r}"))
        lo, hi = e.range
        if not (lo <= 0.0 <= hi):
            out.append(Violation("bad-range", subject, f"range [{lo}, {hi}] must contain 0"))
        node = pdg.node_map.get(e.child)
        if node is not None and not node.movable:
            out.append(Violation("immovable-child", subject, "edge child is not movable"))
        incoming[e.child] = incoming.get(e.child, 0) + 1

    for child, count in incoming.items():
        if count > 1:
            out.append(Violation("multi-parent", child, f"{count} incoming edges"))

    out.extend(_cycle_violations(pdg))
    return out


def _cycle_violations(pdg: PDG) -> list[Violation]:
    children: dict[str, list[str]] = {}
    for e in pdg.edges:
        children.setdefault(e.parent, []).append(e.child)

    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n.id: WHITE for n in pdg.nodes}
    color[STATIC_ROOT] = WHITE
    cycles: list[Violation] = []

    def visit(u: str, stack: list[str]):
        color[u] = GRAY
        stack.append(u)
        for v in children.get(u, ()):
            if color.get(v, WHITE) == GRAY:
                loop = stack[stack.index(v):] + [v]
                cycles.append(Violation("cycle", "->".join(loop), "edges form a cycle"))
            elif color.get(v, WHITE) == WHITE:
                visit(v, stack)
        stack.pop()
        color[u] = BLACK

    for node_id in list(color):
        if color[node_id] == WHITE:
            visit(node_id, [])
    return cycles


def _geometry_violations(pdg: PDG) -> list[Violation]:
    out: list[Violation] = []
    shape = None
    occupied = None
    for n in pdg.nodes:
        arrays = (n.points, n.pixel_origin, n.colors)
        present = [a for a in arrays if a is not None]
        if present:
            lengths = {len(a) for a in present}
            if len(present) < 3 or len(lengths) != 1:
                out.append(Violation("point-arrays", n.id, "points, pixel_origin, colors must align"))
                continue
            if lengths == {0}:
                out.append(Violation("empty-cloud", n.id, "node has no points"))
                continue
        if n.footprint is not None:
            if shape is None:
                shape = n.footprint.shape
                occupied = np.zeros(shape, dtype=bool)
            elif n.footprint.shape != shape:
                out.append(
                    Violation("footprint-shape", n.id, f"footprint {n.footprint.shape} != {shape}")
                )
                continue
            overlap = occupied & n.footprint
            if overlap.any():
                r, c = np.argwhere(overlap)[0]
                out.append(
                    Violation("footprint-overlap", n.id, f"overlaps another footprint at pixel ({r}, {c})")
                )
            occupied |= n.footprint
            if n.pixel_origin is not None and len(n.pixel_origin):
                rr, cc = n.pixel_origin[:, 0], n.pixel_origin[:, 1]
                inside = (
                    (rr >= 0)
                    & (rr < shape[0])
                    & (cc >= 0)
                    & (cc < shape[1])
                )
                ok = np.zeros(len(rr), dtype=bool)
                ok[inside] = n.footprint[rr[inside], cc[inside]]
                if not ok.all():
                    bad = int(np.flatnonzero(~ok)[0])
                    out.append(
                        Violation(
                            "origin-outside-footprint",
                            n.id,
                            f"pixel_origin[{bad}] = {tuple(n.pixel_origin[bad])} not in footprint",
                        )
                    )
    return out


def validate_pdg(pdg: PDG) -> list[Violation]:
    """Check every graph invariant; an empty list means the graph is well formed.

    Structural invariants (forest shape, unit axes, ranges admitting 0) are
    always checked; geometry invariants only where nodes carry geometry.
    """
    return _structural_violations(pdg) + _geometry_violations(pdg)


def edge_transform(edge: MotionEdge, param: float) -> RigidTransform:
    """Rigid transform of ``edge`` at parameter value ``param``.

    Translation edges slide by ``param * axis``; rotation edges rotate by
    ``param`` radians about the line through ``center`` along ``axis``.
    """
    param = float(param)
    lo, hi = edge.range
    if not (lo <= param <= hi):
        raise ParamRangeError(
            f"param {param} outside range [{lo}, {hi}] of edge {edge.parent}->{edge.child}"
        )
    if edge.kind == TRANSLATION:
        return RigidTransform(np.eye(3), param * edge.axis)
    r = rodrigues(edge.axis, param)
    return RigidTransform(r, edge.center - r @ edge.center)


def clamp_pose(pdg: PDG, pose: Pose) -> Pose:
    """Clamp every parameter into its edge's range; idempotent."""
    parents = pdg.parent_edge
    out = {}
    for node_id, value in pose.params.items():
        edge = parents.get(node_id)
        if edge is None:
            raise UnknownNodeError(f"pose names {node_id!r}, which has no incoming edge")
        out[node_id] = edge.clamp(value)
    return Pose(out)


def forward_kinematics(pdg: PDG, pose: Pose) -> dict[str, RigidTransform]:
    """World transform per node: composition of edge transforms, parent-first.

    Nodes without a pose entry use the rest parameter 0; the static root is
    the identity and is not included in the result.
    """
    structural = _structural_violations(pdg)
    if structural:
        raise GraphValidationError(structural)
    for node_id in pose.params:
        if node_id not in pdg.parent_edge:
            raise UnknownNodeError(f"pose names {node_id!r}, which has no incoming edge")

    world: dict[str, RigidTransform] = {STATIC_ROOT: RigidTransform.identity()}

    def resolve(node_id: str) -> RigidTransform:
        if node_id in world:
            return world[node_id]
        edge = pdg.parent_edge.get(node_id)
        if edge is None:
            t = RigidTransform.identity()
        else:
            t = resolve(edge.parent).compose(edge_transform(edge, pose.get(node_id)))
        world[node_id] = t
        return t

    for n in pdg.nodes:
        resolve(n.id)
    del world[STATIC_ROOT]
    return world
