from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdgkit.errors import GraphValidationError, ParamRangeError, UnknownNodeError
from pdgkit.graph import (
    PDG,
    ROTATION,
    STATIC_ROOT,
    TRANSLATION,
    MotionEdge,
    PartNode,
    Pose,
    RigidTransform,
    clamp_pose,
    edge_transform,
    forward_kinematics,
    validate_pdg,
)

from oracles import apply_homogeneous, fk_matrices, random_forest, random_pose


def two_node_chain():
    nodes = (PartNode("a"), PartNode("b"))
    edges = (
        MotionEdge(STATIC_ROOT, "a", TRANSLATION, (1, 0, 0), (0, 0, 0), (-1.0, 1.0)),
        MotionEdge("a", "b", TRANSLATION, (0, 1, 0), (0, 0, 0), (-1.0, 1.0)),
    )
    return PDG(nodes, edges)


class TestValidate:
    def test_clean_chain_has_no_violations(self):
        assert validate_pdg(two_node_chain()) == []

    def test_non_unit_axis_reported(self):
        pdg = PDG(
            (PartNode("a"),),
            (MotionEdge(STATIC_ROOT, "a", TRANSLATION, (0, 0, 2), (0, 0, 0), (-1, 1)),),
        )
        codes = [v.code for v in validate_pdg(pdg)]
        assert codes == ["non-unit-axis"]

    def test_two_cycle_reported(self):
        pdg = PDG(
            (PartNode("a"), PartNode("b")),
            (
                MotionEdge("b", "a", TRANSLATION, (1, 0, 0), (0, 0, 0), (-1, 1)),
                MotionEdge("a", "b", TRANSLATION, (1, 0, 0), (0, 0, 0), (-1, 1)),
            ),
        )
        assert "cycle" in [v.code for v in validate_pdg(pdg)]

    def test_range_must_admit_rest(self):
        pdg = PDG(
            (PartNode("a"),),
            (MotionEdge(STATIC_ROOT, "a", TRANSLATION, (1, 0, 0), (0, 0, 0), (0.5, 1.0)),),
        )
        assert [v.code for v in validate_pdg(pdg)] == ["bad-range"]

    def test_multi_parent_reported(self):
        pdg = PDG(
            (PartNode("a"), PartNode("b")),
            (
                MotionEdge(STATIC_ROOT, "b", TRANSLATION, (1, 0, 0), (0, 0, 0), (-1, 1)),
                MotionEdge("a", "b", TRANSLATION, (1, 0, 0), (0, 0, 0), (-1, 1)),
            ),
        )
        assert "multi-parent" in [v.code for v in validate_pdg(pdg)]

    def test_unknown_endpoint_and_self_edge(self):
        pdg = PDG(
            (PartNode("a"),),
            (
                MotionEdge("ghost", "a", TRANSLATION, (1, 0, 0), (0, 0, 0), (-1, 1)),
                MotionEdge("a", "a", TRANSLATION, (1, 0, 0), (0, 0, 0), (-1, 1)),
            ),
        )
        codes = {v.code for v in validate_pdg(pdg)}
        assert {"unknown-endpoint", "self-edge"} <= codes

    def test_immovable_child_reported(self):
        pdg = PDG(
            (PartNode("a", movable=False),),
            (MotionEdge(STATIC_ROOT, "a", TRANSLATION, (1, 0, 0), (0, 0, 0), (-1, 1)),),
        )
        assert "immovable-child" in [v.code for v in validate_pdg(pdg)]

    def test_footprint_overlap_names_pixel(self):
        fp = np.zeros((4, 4), dtype=bool)
        fp[1, 1] = True
        n1 = PartNode("a", footprint=fp)
        n2 = PartNode("b", footprint=fp)
        violations = validate_pdg(PDG((n1, n2), ()))
        assert [v.code for v in violations] == ["footprint-overlap"]
        assert "(1, 1)" in violations[0].detail

    def test_origin_outside_footprint(self):
        fp = np.zeros((4, 4), dtype=bool)
        fp[0, 0] = True
        node = PartNode(
            "a",
            points=np.zeros((1, 3)),
            pixel_origin=np.array([[2, 2]]),
            colors=np.zeros((1, 3), np.uint8),
            footprint=fp,
        )
        assert [v.code for v in validate_pdg(PDG((node,), ()))] == ["origin-outside-footprint"]

    CORRUPTIONS = ("non-unit-axis", "bad-range", "cycle", "multi-parent", "unknown-endpoint")

    @given(st.integers(0, 2**32 - 1), st.sampled_from(CORRUPTIONS))
    @settings(max_examples=60, deadline=None)
    def test_corruptions_detected_exactly(self, seed, corruption):
        rng = np.random.default_rng(seed)
        pdg = random_forest(rng)
        assert validate_pdg(pdg) == []
        edges = list(pdg.edges)
        if not edges:
            return
        i = int(rng.integers(0, len(edges)))
        e = edges[i]
        if corruption == "non-unit-axis":
            edges[i] = MotionEdge(e.parent, e.child, e.kind, e.axis * 3.0, e.center, e.range)
        elif corruption == "bad-range":
            edges[i] = MotionEdge(e.parent, e.child, e.kind, e.axis, e.center, (0.5, 1.0))
        elif corruption == "cycle":
            edges.append(MotionEdge(e.child, e.parent, e.kind, e.axis, e.center, e.range))
            if e.parent == STATIC_ROOT:
                return  # reversing a root edge makes an unknown endpoint instead
        elif corruption == "multi-parent":
            edges.append(MotionEdge(e.parent, e.child, TRANSLATION, (1, 0, 0), (0, 0, 0), (-1, 1)))
        elif corruption == "unknown-endpoint":
            edges[i] = MotionEdge("missing-node", e.child, e.kind, e.axis, e.center, e.range)
        codes = {v.code for v in validate_pdg(PDG(pdg.nodes, tuple(edges)))}
        assert corruption in codes


class TestEdgeTransform:
    def test_translation_definition(self):
        edge = MotionEdge(STATIC_ROOT, "a", TRANSLATION, (1, 0, 0), (0, 0, 0), (-1, 1))
        t = edge_transform(edge, 0.5)
        assert np.array_equal(t.rotation, np.eye(3))
        assert np.allclose(t.translation, [0.5, 0, 0])

    def test_quarter_turn_about_z(self):
        edge = MotionEdge(STATIC_ROOT, "a", ROTATION, (0, 0, 1), (0, 0, 0), (-4, 4))
        t = edge_transform(edge, np.pi / 2)
        assert np.allclose(t.apply(np.array([1.0, 0.0, 0.0])), [0, 1, 0], atol=1e-12)

    def test_rotation_about_offset_center(self):
        # Derived via translate(-center) . rotate . translate(center):
        # (2,0,0) -> (1,0,0) -> (-1,0,0) -> (0,0,0).
        edge = MotionEdge(STATIC_ROOT, "a", ROTATION, (0, 0, 1), (1, 0, 0), (-4, 4))
        t = edge_transform(edge, np.pi)
        got = t.apply(np.array([2.0, 0.0, 0.0]))
        assert np.allclose(got, [0.0, 0.0, 0.0], atol=1e-12)
        # and against the homogeneous-matrix composition, numerically
        from oracles import edge_matrix

        m = edge_matrix(edge, np.pi)
        assert np.allclose(apply_homogeneous(m, np.array([[2.0, 0.0, 0.0]]))[0], got, atol=1e-12)

    def test_out_of_range_param_raises(self):
        edge = MotionEdge(STATIC_ROOT, "a", TRANSLATION, (1, 0, 0), (0, 0, 0), (-1, 1))
        with pytest.raises(ParamRangeError, match=r"\[-1.0, 1.0\]"):
            edge_transform(edge, 2.0)

    def test_zero_param_is_exact_identity(self):
        edge = MotionEdge(STATIC_ROOT, "a", ROTATION, (0, 1, 0), (3, 2, 1), (-1, 1))
        t = edge_transform(edge, 0.0)
        assert np.array_equal(t.rotation, np.eye(3))
        assert not t.translation.any()


class TestForwardKinematics:
    def test_empty_pose_is_identity_everywhere(self, chain_pdg):
        world = forward_kinematics(chain_pdg, Pose.zero())
        for t in world.values():
            assert np.array_equal(t.rotation, np.eye(3))
            assert np.abs(t.translation).max() <= 1e-12

    def test_child_rides_parent(self):
        pdg = two_node_chain()
        world = forward_kinematics(pdg, Pose({"a": 1.0}))
        assert np.allclose(world["b"].translation, [1, 0, 0])
        assert np.array_equal(world["b"].rotation, np.eye(3))

    def test_chain_matches_homogeneous_oracle(self, chain_pdg):
        pose = Pose({"a": np.pi / 2, "b": 1.0})
        world = forward_kinematics(chain_pdg, pose)
        oracle = fk_matrices(chain_pdg, pose)
        p = np.array([[1.0, 0.0, 0.0], [0.3, -0.2, 1.5]])
        for nid in ("a", "b"):
            expected = apply_homogeneous(oracle[nid], p)
            assert np.allclose(world[nid].apply(p), expected, atol=1e-9)

    def test_unknown_pose_key_raises(self, chain_pdg):
        with pytest.raises(UnknownNodeError):
            forward_kinematics(chain_pdg, Pose({"nope": 0.1}))

    def test_invalid_graph_raises(self):
        pdg = PDG(
            (PartNode("a"),),
            (MotionEdge(STATIC_ROOT, "a", TRANSLATION, (0, 0, 2), (0, 0, 0), (-1, 1)),),
        )
        with pytest.raises(GraphValidationError):
            forward_kinematics(pdg, Pose.zero())

    def test_random_forests_match_oracle(self, rng):
        for _ in range(50):
            pdg = random_forest(rng)
            pose = random_pose(rng, pdg)
            world = forward_kinematics(pdg, pose)
            oracle = fk_matrices(pdg, pose)
            for node in pdg.nodes:
                got = world[node.id].apply(node.points)
                expected = apply_homogeneous(oracle[node.id], node.points)
                assert np.abs(got - expected).max() < 1e-9

    def test_transforms_preserve_pairwise_distances(self, rng):
        for _ in range(25):
            pdg = random_forest(rng)
            pose = random_pose(rng, pdg)
            world = forward_kinematics(pdg, pose)
            for node in pdg.nodes:
                before = np.linalg.norm(node.points[:, None] - node.points[None], axis=-1)
                moved = world[node.id].apply(node.points)
                after = np.linalg.norm(moved[:, None] - moved[None], axis=-1)
                assert np.allclose(after, before, rtol=1e-9, atol=1e-12)

    def test_inverse_order_returns_to_rest(self, rng):
        from pdgkit.graph import RigidTransform

        for _ in range(25):
            pdg = random_forest(rng)
            pose = random_pose(rng, pdg)
            parent_of = {e.child: e for e in pdg.edges}
            world = forward_kinematics(pdg, pose)
            for node in pdg.nodes:
                chain = []
                cursor = node.id
                while cursor in parent_of:
                    chain.append(parent_of[cursor])
                    cursor = parent_of[cursor].parent
                inverse = RigidTransform.identity()
                for edge in chain:  # child-to-root order inverts the composition
                    lo, hi = edge.range
                    mirrored = MotionEdge(edge.parent, edge.child, edge.kind,
                                          edge.axis, edge.center, (-hi, -lo))
                    inverse = inverse.compose(edge_transform(mirrored, -pose.get(edge.child)))
                restored = inverse.apply(world[node.id].apply(node.points))
                assert np.abs(restored - node.points).max() < 1e-9


class TestClampPose:
    def test_upper_clamp(self, chain_pdg):
        assert clamp_pose(chain_pdg, Pose({"b": 2.5})).params["b"] == 2.0

    def test_interior_fixed_point(self, chain_pdg):
        assert clamp_pose(chain_pdg, Pose({"a": 0.3})).params["a"] == 0.3

    def test_unknown_key_raises(self, chain_pdg):
        with pytest.raises(UnknownNodeError):
            clamp_pose(chain_pdg, Pose({"ghost": 0.0}))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_idempotent(self, seed):
        rng = np.random.default_rng(seed)
        pdg = random_forest(rng)
        raw = Pose({e.child: float(rng.normal(scale=5.0)) for e in pdg.edges})
        once = clamp_pose(pdg, raw)
        twice = clamp_pose(pdg, once)
        assert once.params == twice.params
        for child, value in once.params.items():
            lo, hi = next(e.range for e in pdg.edges if e.child == child)
            assert lo <= value <= hi


class TestRigidTransform:
    def test_compose_then_apply_equals_apply_twice(self, rng):
        for _ in range(10):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            a = RigidTransform(
                np.asarray(
                    __import__("scipy.spatial.transform", fromlist=["Rotation"])
                    .Rotation.from_rotvec(axis * rng.uniform(-3, 3))
                    .as_matrix()
                ),
                rng.normal(size=3),
            )
            b = RigidTransform(np.eye(3), rng.normal(size=3))
            p = rng.normal(size=(4, 3))
            assert np.allclose(a.compose(b).apply(p), a.apply(b.apply(p)), atol=1e-12)

    def test_inverse_roundtrip(self, rng):
        t = RigidTransform(np.eye(3), np.array([1.0, -2.0, 3.0]))
        p = rng.normal(size=(5, 3))
        assert np.allclose(t.inverse().apply(t.apply(p)), p, atol=1e-12)
