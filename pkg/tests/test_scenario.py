"""Scenario schema, round-trips, bundled domains, and solution documents."""

import json
import math

import numpy as np
import pytest

from mdplan.dynamics import ControlBounds, PlanarHolonomic
from mdplan.geometry import BoundingModel, Pose, Rect, Sphere
from mdplan.planner import PlannerConfig, Weights, plan, sum_planning_cost
from mdplan.refinement import RefinementConfig, refine
from mdplan.scenario import (
    BUILTIN_NAMES,
    Obstacle,
    RobotSpec,
    Scenario,
    SchemaError,
    build_solution_document,
    builtin,
    canonical_json,
    covering_spheres,
    load_scenario,
    load_scenario_file,
    parse_solution_document,
    recompute_summary,
    save_scenario,
    save_scenario_file,
)


def disc_obstacle(oid, x, y, r, mobility="translate"):
    return Obstacle(
        id=oid,
        pose=Pose(x, y, 0.0),
        bounding=BoundingModel((Sphere((0, 0), r),)),
        mobility=mobility,
        shape=Sphere((0, 0), r),
    )


def tiny_scenario():
    """A puck in a gap between fixed fence discs; displacing it is the only way through."""
    robot = RobotSpec(
        model=PlanarHolonomic(dt=0.1, bounds=ControlBounds.symmetric((1.0, 1.0, 1.0))),
        bounding=BoundingModel((Sphere((0, 0), 0.1),)),
        shape=(Sphere((0, 0), 0.1),),
    )
    fence = tuple(
        disc_obstacle(f"post_{i}", 1.5, y, 0.45, mobility="fixed")
        for i, y in enumerate((-1.65, -0.75, 0.75, 1.65))
    )
    return Scenario(
        name="tiny",
        robot=robot,
        start=Pose(0.0, 0.0, 0.0),
        goal=Pose(3.0, 0.0, 0.0),
        obstacles=fence + (disc_obstacle("puck", 1.5, 0.0, 0.3),),
        weights=Weights(m_g=(4.0, 4.0, 0.2)),
        world_bounds=(-1.0, -2.5, 4.0, 2.5),
    )


# -- model invariants ------------------------------------------------------


def test_movable_default_costs():
    ob = disc_obstacle("a", 0, 0, 0.5)
    assert ob.displacement_cost == 1.0
    wall = disc_obstacle("w", 5, 5, 0.5, mobility="fixed")
    assert wall.displacement_cost == 0.0


def test_fixed_obstacle_rejects_displacement_cost():
    with pytest.raises(ValueError, match="displacement cost"):
        Obstacle(
            id="w",
            pose=Pose(0, 0, 0),
            bounding=BoundingModel((Sphere((0, 0), 1.0),)),
            mobility="fixed",
            displacement_cost=2.0,
        )


def test_obstacle_rejects_unknown_mobility():
    with pytest.raises(ValueError, match="mobility"):
        disc_obstacle("a", 0, 0, 0.5, mobility="slide")


def test_bounding_must_enclose_rect_shape():
    with pytest.raises(ValueError, match="enclose"):
        Obstacle(
            id="r",
            pose=Pose(0, 0, 0),
            bounding=BoundingModel((Sphere((0, 0), 0.5),)),
            shape=Rect((0, 0), (1.0, 0.2), 0.0),
        )


def test_bounding_must_enclose_circle_shape():
    with pytest.raises(ValueError, match="enclose"):
        Obstacle(
            id="c",
            pose=Pose(0, 0, 0),
            bounding=BoundingModel((Sphere((0, 0), 0.4),)),
            shape=Sphere((0.2, 0.0), 0.3),
        )


def test_scenario_rejects_duplicate_ids():
    s = tiny_scenario()
    with pytest.raises(ValueError, match="duplicate"):
        Scenario(
            name="dup",
            robot=s.robot,
            start=s.start,
            goal=s.goal,
            obstacles=(disc_obstacle("a", 1, 1, 0.2), disc_obstacle("a", 2, 1, 0.2)),
            world_bounds=s.world_bounds,
        )


def test_scenario_rejects_start_outside_bounds():
    s = tiny_scenario()
    with pytest.raises(ValueError, match="outside world_bounds"):
        Scenario(
            name="oob",
            robot=s.robot,
            start=Pose(-5.0, 0.0, 0.0),
            goal=s.goal,
            world_bounds=s.world_bounds,
        )


def test_scenario_rejects_start_on_fixed_obstacle():
    s = tiny_scenario()
    with pytest.raises(ValueError, match="fixed obstacle"):
        Scenario(
            name="pinned",
            robot=s.robot,
            start=s.start,
            goal=s.goal,
            obstacles=(disc_obstacle("w", 0.2, 0.0, 0.5, mobility="fixed"),),
            world_bounds=s.world_bounds,
        )


def test_start_on_movable_obstacle_is_allowed():
    s = tiny_scenario()
    sc = Scenario(
        name="soft",
        robot=s.robot,
        start=s.start,
        goal=s.goal,
        obstacles=(disc_obstacle("m", 0.2, 0.0, 0.5),),
        world_bounds=s.world_bounds,
    )
    assert sc.movable()[0].id == "m"


def test_without_obstacles_strips_only_obstacles():
    s = builtin("l_corridor")
    bare = s.without_obstacles()
    assert bare.obstacles == ()
    assert bare.robot == s.robot and bare.goal == s.goal


# -- covering spheres ------------------------------------------------------


def test_covering_spheres_contains_corners():
    rng = np.random.default_rng(7)
    for _ in range(50):
        hx, hy = rng.uniform(0.05, 3.0, size=2)
        model = covering_spheres((hx, hy))
        for cx in (-hx, hx):
            for cy in (-hy, hy):
                assert any(
                    math.hypot(cx - s.center[0], cy - s.center[1]) <= s.radius + 1e-9
                    for s in model.spheres
                )


def test_covering_spheres_segment_override():
    model = covering_spheres((2.0, 0.25), segments=16)
    assert len(model.spheres) == 16
    # Finer chains hug the long faces more tightly.
    assert model.spheres[0].radius < covering_spheres((2.0, 0.25)).spheres[0].radius + 1e-12


# -- JSON round-trips ------------------------------------------------------


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_builtin_round_trip_identity(name):
    s = builtin(name)
    doc = json.loads(canonical_json(save_scenario(s)))
    assert load_scenario(doc) == s


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_builtin_canonical_bytes_stable(name):
    a = canonical_json(save_scenario(builtin(name)))
    b = canonical_json(save_scenario(builtin(name)))
    assert a == b


def test_round_trip_preserves_all_config_fields():
    s = tiny_scenario()
    s2 = load_scenario(save_scenario(s))
    assert s2 == s
    assert s2.planner == s.planner
    assert s2.refinement == s.refinement
    assert s2.weights == s.weights


def test_load_applies_config_defaults_when_sections_omitted():
    doc = save_scenario(tiny_scenario())
    del doc["weights"], doc["planner"], doc["refinement"]
    s = load_scenario(doc)
    assert s.planner == PlannerConfig()
    assert s.refinement == RefinementConfig()
    assert s.weights == Weights()


def test_scenario_file_round_trip(tmp_path):
    path = tmp_path / "scene.json"
    s = builtin("rotation_blocks")
    save_scenario_file(s, path)
    assert load_scenario_file(path) == s


def test_invalid_json_file_reports_path(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(SchemaError, match="invalid JSON"):
        load_scenario_file(path)


# -- schema rejection ------------------------------------------------------


def test_unknown_top_level_key_rejected():
    doc = save_scenario(tiny_scenario())
    doc["extra"] = 1
    with pytest.raises(SchemaError, match="scenario: unknown key 'extra'"):
        load_scenario(doc)


def test_unknown_obstacle_key_names_path():
    doc = save_scenario(tiny_scenario())
    doc["obstacles"][0]["color"] = "red"
    with pytest.raises(SchemaError, match=r"scenario\.obstacles\[0\]: unknown key 'color'"):
        load_scenario(doc)


def test_bad_sphere_radius_names_path():
    doc = save_scenario(tiny_scenario())
    doc["obstacles"][0]["bounding"][0]["radius"] = 0.0
    with pytest.raises(SchemaError, match=r"scenario\.obstacles\[0\]\.bounding\[0\]"):
        load_scenario(doc)


def test_bool_is_not_a_number():
    doc = save_scenario(tiny_scenario())
    doc["obstacles"][0]["weight"] = True
    with pytest.raises(SchemaError, match="expected number"):
        load_scenario(doc)


def test_missing_required_key_rejected():
    doc = save_scenario(tiny_scenario())
    del doc["obstacles"][0]["pose"]
    with pytest.raises(SchemaError, match="missing key 'pose'"):
        load_scenario(doc)


def test_unknown_model_kind_rejected():
    doc = save_scenario(tiny_scenario())
    doc["robot"]["model"]["kind"] = "ackermann"
    with pytest.raises(SchemaError, match=r"robot\.model\.kind"):
        load_scenario(doc)


def test_bad_weights_vector_length_rejected():
    doc = save_scenario(tiny_scenario())
    doc["weights"]["m_g"] = [1.0, 2.0]
    with pytest.raises(SchemaError, match=r"weights\.m_g"):
        load_scenario(doc)


def test_unknown_mobility_rejected_with_path():
    doc = save_scenario(tiny_scenario())
    doc["obstacles"][0]["mobility"] = "hover"
    with pytest.raises(SchemaError, match=r"obstacles\[0\]"):
        load_scenario(doc)


# -- bundled domains -------------------------------------------------------


def test_ias_has_35_movable_discs():
    s = builtin("ias")
    movable = s.movable()
    assert len(movable) == 35
    assert all(isinstance(ob.shape, Sphere) for ob in movable)
    assert all(ob.mobility == "translate" for ob in movable)


def test_ias_seed_rejitters_layout():
    base = builtin("ias")
    assert builtin("ias", seed=0) == base
    moved = builtin("ias", seed=1)
    assert moved != base
    # Same structure, different jitter.
    assert [ob.id for ob in moved.obstacles] == [ob.id for ob in base.obstacles]


def test_rotation_blocks_has_two_rotating_rects():
    s = builtin("rotation_blocks")
    rotating = [ob for ob in s.obstacles if ob.mobility == "rotate"]
    assert len(rotating) == 2
    assert all(isinstance(ob.shape, Rect) for ob in rotating)
    assert len(s.robot.bounding.spheres) == 1
    fixed = [ob for ob in s.obstacles if ob.mobility == "fixed"]
    assert len(fixed) == 2


def test_sofa_has_movable_rectangles():
    s = builtin("sofa")
    movable = s.movable()
    assert len(movable) >= 4
    assert all(isinstance(ob.shape, Rect) for ob in movable)


def test_l_corridor_robot_is_three_sphere_l_shape():
    s = builtin("l_corridor")
    assert len(s.robot.bounding.spheres) == 3
    assert len(s.robot.shape) == 2


def test_unknown_builtin_rejected():
    with pytest.raises(ValueError, match="unknown builtin"):
        builtin("warehouse")


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_builtin_movable_obstacles_initially_disjoint_from_robot_start(name):
    # Start overlap with fixed bodies is rejected by construction; movable
    # bodies may legally overlap each other (rotation_blocks wedges), but
    # none may sit on the start pose.
    from mdplan.geometry import place_body, sphere_overlap

    s = builtin(name)
    start_spheres = place_body(s.start, s.robot.bounding)
    for ob in s.obstacles:
        world = place_body(ob.pose, ob.bounding)
        d = min(sphere_overlap(a, b) for a in start_spheres for b in world)
        assert d >= -1e-9, f"{ob.id} overlaps the start pose"


# -- solution documents ----------------------------------------------------


@pytest.fixture(scope="module")
def tiny_solution():
    s = tiny_scenario()
    res = plan(s)
    ref = refine(
        res.trajectory,
        s.obstacles,
        dict(res.required),
        s.refinement,
        s.robot.bounding,
        overlap_model=s.planner.overlap_model,
        planning_cost=sum_planning_cost(res),
    )
    return s, res, ref


def test_solution_document_round_trip(tiny_solution):
    s, res, ref = tiny_solution
    doc = json.loads(canonical_json(build_solution_document(s, res, ref)))
    sol = parse_solution_document(doc)
    assert sol.scenario == s
    assert sol.trajectory == list(res.trajectory)
    assert np.array_equal(sol.controls, np.asarray(res.controls))
    assert sol.overlaps == res.overlaps
    assert set(sol.displacements) == set(ref.displacements)
    assert sol.displacements["puck"] == ref.displacements["puck"]
    assert sol.required["puck"].magnitude == res.required["puck"].magnitude


def test_solution_summary_recomputable(tiny_solution):
    s, res, ref = tiny_solution
    doc = build_solution_document(s, res, ref)
    sol = parse_solution_document(doc)
    redone = recompute_summary(sol)
    for key, value in doc["summary"].items():
        assert redone[key] == pytest.approx(value, abs=1e-9), key


def test_solution_rejects_unknown_key(tiny_solution):
    s, res, ref = tiny_solution
    doc = build_solution_document(s, res, ref)
    doc["notes"] = "hi"
    with pytest.raises(SchemaError, match="unknown key 'notes'"):
        parse_solution_document(doc)


def test_solution_rejects_reordered_trajectory(tiny_solution):
    s, res, ref = tiny_solution
    doc = build_solution_document(s, res, ref)
    doc["trajectory"][3][3] = 7
    with pytest.raises(SchemaError, match="out of order"):
        parse_solution_document(doc)


def test_solution_rejects_duplicate_displacement(tiny_solution):
    s, res, ref = tiny_solution
    doc = build_solution_document(s, res, ref)
    doc["displacements"].append(dict(doc["displacements"][0]))
    with pytest.raises(SchemaError, match="duplicate obstacle"):
        parse_solution_document(doc)


def test_tampered_summary_detected_by_recompute(tiny_solution):
    s, res, ref = tiny_solution
    doc = build_solution_document(s, res, ref)
    doc["summary"]["sum_displacement"] += 0.25
    sol = parse_solution_document(doc)
    redone = recompute_summary(sol)
    assert redone["sum_displacement"] != pytest.approx(sol.summary["sum_displacement"])
