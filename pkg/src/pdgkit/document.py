"""PDG and pose document formats (UTF-8 JSON, fixed field names).

Document example:

    {
      "version": 1,
      "nodes": [
        {"id": "door", "movable": true, "footprint_path": "masks/door.png",
         "points_path": "door_points.npz"}
      ],
      "edges": [
        {"parent": "__static__", "child": "door", "kind": "rotation",
         "axis": [0, 0, 1], "center": [0.1, 0.0, 2.0], "range": [-1.57, 0]}
      ]
    }

``points_path`` is optional and names an .npz with arrays ``points`` (N, 3),
``pixel_origin`` (N, 2), ``colors`` (N, 3); without it, points are lifted
from the scene depth under the footprint. Unknown fields are rejected.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import formats
from .errors import DocumentError, InputError
from .graph import PDG, MotionEdge, PartNode, Pose, Violation, validate_pdg
from .scene import Scene, unproject

DOCUMENT_VERSION = 1
_TOP_FIELDS = {"version", "nodes", "edges"}
_NODE_FIELDS = {"id", "movable", "footprint_path", "points_path"}
_EDGE_FIELDS = {"parent", "child", "kind", "axis", "center", "range"}


@dataclass(frozen=True)
class NodeEntry:
    id: str
    movable: bool
    footprint_path: str
    points_path: str | None = None


@dataclass(frozen=True)
class PdgDocument:
    nodes: tuple[NodeEntry, ...]
    edges: tuple[MotionEdge, ...]
    version: int = DOCUMENT_VERSION


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise DocumentError(f"unknown field(s) in {where}: {sorted(unknown)}")


def parse_pdg_document(raw: dict) -> PdgDocument:
    if not isinstance(raw, dict):
        raise DocumentError("document root must be a JSON object")
    _reject_unknown(raw, _TOP_FIELDS, "document")
    for key in ("version", "nodes", "edges"):
        if key not in raw:
            raise DocumentError(f"document missing required field {key!r}")
    if raw["version"] != DOCUMENT_VERSION:
        raise DocumentError(f"unsupported document version {raw['version']!r}")

    nodes = []
    for i, entry in enumerate(raw["nodes"]):
        if not isinstance(entry, dict):
            raise DocumentError(f"nodes[{i}] must be an object")
        _reject_unknown(entry, _NODE_FIELDS, f"nodes[{i}]")
        for key in ("id", "movable", "footprint_path"):
            if key not in entry:
                raise DocumentError(f"nodes[{i}] missing required field {key!r}")
        nodes.append(
            NodeEntry(
                id=str(entry["id"]),
                movable=bool(entry["movable"]),
                footprint_path=str(entry["footprint_path"]),
                points_path=str(entry["points_path"]) if entry.get("points_path") else None,
            )
        )

    edges = []
    for i, entry in enumerate(raw["edges"]):
        if not isinstance(entry, dict):
            raise DocumentError(f"edges[{i}] must be an object")
        _reject_unknown(entry, _EDGE_FIELDS, f"edges[{i}]")
        for key in _EDGE_FIELDS:
            if key not in entry:
                raise DocumentError(f"edges[{i}] missing required field {key!r}")
        try:
            lo, hi = (float(v) for v in entry["range"])
            edges.append(
                MotionEdge(
                    parent=str(entry["parent"]),
                    child=str(entry["child"]),
                    kind=str(entry["kind"]),
                    axis=np.asarray(entry["axis"], dtype=np.float64),
                    center=np.asarray(entry["center"], dtype=np.float64),
                    range=(lo, hi),
                )
            )
        except (TypeError, ValueError) as exc:
            raise DocumentError(f"edges[{i}] is malformed: {exc}") from None
    return PdgDocument(nodes=tuple(nodes), edges=tuple(edges), version=int(raw["version"]))


def load_pdg_document(path) -> PdgDocument:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"document not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"document is not valid JSON: {exc}") from None
    return parse_pdg_document(raw)


def document_to_dict(doc: PdgDocument) -> dict:
    return {
        "version": doc.version,
        "nodes": [
            {
                "id": n.id,
                "movable": n.movable,
                "footprint_path": n.footprint_path,
                **({"points_path": n.points_path} if n.points_path else {}),
            }
            for n in doc.nodes
        ],
        "edges": [
            {
                "parent": e.parent,
                "child": e.child,
                "kind": e.kind,
                "axis": list(e.axis),
                "center": list(e.center),
                "range": list(e.range),
            }
            for e in doc.edges
        ],
    }


def save_pdg_document(doc: PdgDocument, path) -> None:
    Path(path).write_text(
        json.dumps(document_to_dict(doc), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _load_points_npz(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        with np.load(path) as data:
            return (
                np.asarray(data["points"], dtype=np.float64),
                np.asarray(data["pixel_origin"], dtype=np.int32),
                np.asarray(data["colors"], dtype=np.uint8),
            )
    except FileNotFoundError:
        raise InputError(f"points file not found: {path}") from None
    except KeyError as exc:
        raise DocumentError(f"points file {path} missing array {exc}") from None


def validate_document(doc: PdgDocument, base_dir) -> list[Violation]:
    """Structural diagnostics plus footprint checks where mask files resolve.

    This is the single validation path shared by the CLI and the service;
    it builds whatever graph geometry the document makes reachable and runs
    ``validate_pdg`` on it.
    """
    return validate_pdg(structural_pdg(doc, base_dir))


def structural_pdg(doc: PdgDocument, base_dir) -> PDG:
    """Graph with footprints (and precomputed points) loaded, no scene binding."""
    base = Path(base_dir)
    nodes = []
    for entry in doc.nodes:
        footprint = None
        mask_path = base / entry.footprint_path
        if mask_path.exists():
            footprint = formats.read_mask(mask_path)
        points = origin = colors = None
        if entry.points_path:
            points, origin, colors = _load_points_npz(base / entry.points_path)
        nodes.append(
            PartNode(
                id=entry.id,
                movable=entry.movable,
                points=points,
                pixel_origin=origin,
                colors=colors,
                footprint=footprint,
            )
        )
    return PDG(nodes=tuple(nodes), edges=doc.edges)


def bind_document(doc: PdgDocument, scene: Scene, base_dir) -> PDG:
    """Resolve every node against the scene: load footprints, lift points.

    Precomputed points files win over depth lifting when present.
    """
    base = Path(base_dir)
    nodes = []
    for entry in doc.nodes:
        mask_path = base / entry.footprint_path
        if not mask_path.exists():
            raise InputError(f"footprint file not found: {mask_path}")
        footprint = formats.read_mask(mask_path)
        if footprint.shape != scene.shape:
            raise DocumentError(
                f"node {entry.id!r} footprint {footprint.shape} does not match scene {scene.shape}"
            )
        if entry.points_path:
            points, origin, colors = _load_points_npz(base / entry.points_path)
        else:
            cloud = unproject(scene.depth, scene.camera, footprint, scene.image)
            points, origin, colors = cloud.positions, cloud.pixel_origin, cloud.colors
        nodes.append(
            PartNode(
                id=entry.id,
                movable=entry.movable,
                points=points,
                pixel_origin=origin,
                colors=colors,
                footprint=footprint,
            )
        )
    return PDG(nodes=tuple(nodes), edges=doc.edges)


def save_points_npz(path, points, pixel_origin, colors) -> None:
    np.savez(
        path,
        points=np.asarray(points, dtype=np.float64),
        pixel_origin=np.asarray(pixel_origin, dtype=np.int32),
        colors=np.asarray(colors, dtype=np.uint8),
    )


def load_pose(path) -> Pose:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"pose document not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"pose document is not valid JSON: {exc}") from None
    _reject_unknown(raw, {"version", "params"}, "pose document")
    if "params" not in raw or not isinstance(raw["params"], dict):
        raise DocumentError("pose document requires a params object")
    return Pose(raw["params"])


def save_pose(pose: Pose, path) -> None:
    Path(path).write_text(
        json.dumps({"version": 1, "params": dict(pose.params)}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def pdg_to_document(pdg: PDG, footprint_paths: dict[str, str],
                    points_paths: dict[str, str] | None = None) -> PdgDocument:
    """Document view of an in-memory graph, given the on-disk raster paths."""
    points_paths = points_paths or {}
    nodes = tuple(
        NodeEntry(
            id=n.id,
            movable=n.movable,
            footprint_path=footprint_paths[n.id],
            points_path=points_paths.get(n.id),
        )
        for n in pdg.nodes
    )
    return PdgDocument(nodes=nodes, edges=pdg.edges)
