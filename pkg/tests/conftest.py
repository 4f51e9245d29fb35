from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pdgkit.graph import PDG, STATIC_ROOT, MotionEdge, PartNode
from pdgkit.synth import synth_scene


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def slide_spec(width=128, height=96, target=0.2, rng_seed=5):
    """A textured square at depth 2 over a background plane at depth 5 that
    slides along +x; fx=100 and depth 2 make 0.2 m exactly 10 px."""
    return {
        "width": width,
        "height": height,
        "seed": rng_seed,
        "background_depth": 5.0,
        "camera": {"fx": 100.0, "fy": 100.0, "cx": (width - 1) / 2, "cy": (height - 1) / 2},
        "parts": [
            {
                "id": "slab",
                "rect": [28, 44, 68, 84],
                "depth": 2.0,
                "motion": {
                    "parent": STATIC_ROOT,
                    "kind": "translation",
                    "axis": [1.0, 0.0, 0.0],
                    "center": [0.0, 0.0, 0.0],
                    "range": [-1.0, 1.0],
                    "target": target,
                },
            }
        ],
    }


@pytest.fixture
def slide_scene():
    return synth_scene(slide_spec())


def simple_chain() -> PDG:
    """root -> a (rotate about z) -> b (translate along x)."""
    points = np.array([[0.5, 0.0, 2.0], [1.0, 0.5, 2.0], [0.0, 1.0, 2.5]])
    nodes = (
        PartNode("a", points=points, pixel_origin=np.zeros((3, 2), np.int32),
                 colors=np.zeros((3, 3), np.uint8)),
        PartNode("b", points=points + 0.25, pixel_origin=np.zeros((3, 2), np.int32),
                 colors=np.zeros((3, 3), np.uint8)),
    )
    edges = (
        MotionEdge(STATIC_ROOT, "a", "rotation", (0.0, 0.0, 1.0), (0.0, 0.0, 0.0), (-3.2, 3.2)),
        MotionEdge("a", "b", "translation", (1.0, 0.0, 0.0), (0.0, 0.0, 0.0), (-2.0, 2.0)),
    )
    return PDG(nodes, edges)


@pytest.fixture
def chain_pdg():
    return simple_chain()


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\n[ACCEPTANCE] {name}: {outcome}", flush=True)
