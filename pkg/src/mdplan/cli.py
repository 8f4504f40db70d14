"""Command-line front end: plan and refine scenarios, check solutions, sweep weights.

Three subcommands:

  plan      run both phases on a scenario, write solution.json and
            report.json (optionally before.svg / after.svg)
  validate  independently re-check a stored solution document
  sweep     re-run planning across obstacle-weight scales and print a
            tab-separated comparison table

Exit codes: 0 ok, 1 validation found violations, 2 usage, 3 I/O or
schema error, 4 planner failure, 5 refinement failure. Solution
documents are byte-deterministic for a fixed scenario and seed; SVG
output is deterministic too (fixed hash salt, no timestamps).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .dynamics import dynamics_residual
from .geometry import Pose, Rect, Sphere, place_body, place_shape, wrap_angle
from .planner import (
    OVERLAP_MODELS,
    PlanningError,
    PlanResult,
    plan,
    sum_planning_cost,
)
from .refinement import RefinementExhausted, RefinementResult, refine, validate
from .scenario import (
    BUILTIN_NAMES,
    Scenario,
    SchemaError,
    SolutionDocument,
    build_solution_document,
    builtin,
    canonical_json,
    load_scenario_file,
    parse_solution_document,
    recompute_summary,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_PLANNER = 4
EXIT_REFINEMENT = 5

OUT_DIR_ENV = "MDPLAN_OUT_DIR"

# Residual above this means the stored trajectory does not follow the
# stored controls under the scenario's dynamics model (condition 1).
RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class RunReport:
    """The per-run numbers quoted on stdout and saved to report.json."""

    scenario: str
    sum_required: float
    sum_displacement: float
    displaced_count: int
    total_cost: float
    wall_time: float
    converged: bool

    def to_doc(self) -> dict:
        return dataclasses.asdict(self)

    def lines(self) -> list[str]:
        return [
            f"scenario:           {self.scenario}",
            f"sum required (y):   {self.sum_required:.4f}",
            f"sum displacement (d): {self.sum_displacement:.4f}",
            f"displaced count:    {self.displaced_count}",
            f"total cost (C):     {self.total_cost:.4f}",
            f"wall time:          {self.wall_time:.2f} s",
            f"converged:          {self.converged}",
        ]


def run_pipeline(scenario: Scenario) -> tuple[PlanResult, RefinementResult, dict, RunReport]:
    """Both phases plus the artifacts; raises PlanningError / RefinementExhausted."""
    t0 = time.perf_counter()
    result = plan(scenario)
    refined = refine(
        result.trajectory,
        scenario.obstacles,
        dict(result.required),
        scenario.refinement,
        scenario.robot.bounding,
        overlap_model=scenario.planner.overlap_model,
        planning_cost=sum_planning_cost(result),
    )
    wall = time.perf_counter() - t0
    doc = build_solution_document(scenario, result, refined)
    report = RunReport(
        scenario=scenario.name,
        sum_required=doc["summary"]["sum_required"],
        sum_displacement=doc["summary"]["sum_displacement"],
        displaced_count=doc["summary"]["displaced_count"],
        total_cost=doc["summary"]["total_cost"],
        wall_time=wall,
        converged=doc["summary"]["converged"],
    )
    return result, refined, doc, report


# ---------------------------------------------------------------------------
# scenario loading and weight overrides


def _parse_weight_overrides(pairs: list[str]) -> dict[str, object]:
    overrides: dict[str, object] = {}
    for pair in pairs:
        key, sep, raw = pair.partition("=")
        if not sep or not key:
            raise ValueError(f"--weights expects k=v, got {pair!r}")
        values = [float(v) for v in raw.split(",")]
        overrides[key] = tuple(values) if len(values) > 1 else values[0]
    return overrides


def _apply_overrides(scenario: Scenario, overrides: dict[str, object]) -> Scenario:
    if not overrides:
        return scenario
    valid = {f.name for f in dataclasses.fields(scenario.weights)}
    unknown = set(overrides) - valid
    if unknown:
        raise ValueError(f"unknown weight field(s): {', '.join(sorted(unknown))}")
    return dataclasses.replace(
        scenario, weights=dataclasses.replace(scenario.weights, **overrides)
    )


class UsageError(Exception):
    pass


def _load_scenario_arg(args) -> Scenario:
    if (args.scenario is None) == (args.builtin is None):
        raise UsageError("pass exactly one of a scenario path or --builtin")
    if args.builtin is not None:
        scenario = builtin(args.builtin, seed=args.seed)
    else:
        scenario = load_scenario_file(args.scenario)
    scenario = _apply_overrides(scenario, _parse_weight_overrides(args.weights))
    if getattr(args, "overlap_model", None):
        scenario = dataclasses.replace(
            scenario,
            planner=dataclasses.replace(scenario.planner, overlap_model=args.overlap_model),
        )
    return scenario


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_DIR_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# SVG rendering


def _setup_matplotlib():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "mdplan"
    import matplotlib.pyplot as plt

    return plt


def _draw_outline(ax, pose: Pose, obstacle, color: str, alpha: float, fill: bool, z: int):
    from matplotlib.patches import Circle, Polygon

    if obstacle.shape is not None:
        shape = place_shape(pose, obstacle.shape)
        if isinstance(shape, Rect):
            ax.add_patch(
                Polygon(shape.corners(), closed=True, facecolor=color if fill else "none",
                        edgecolor=color, alpha=alpha, zorder=z)
            )
        else:
            ax.add_patch(
                Circle(shape.center, shape.radius, facecolor=color if fill else "none",
                       edgecolor=color, alpha=alpha, zorder=z)
            )
    else:
        for s in place_body(pose, obstacle.bounding):
            ax.add_patch(
                Circle(s.center, s.radius, facecolor=color if fill else "none",
                       edgecolor=color, alpha=alpha, zorder=z)
            )


def _draw_robot(ax, pose: Pose, scenario: Scenario, color: str, alpha: float):
    from matplotlib.patches import Circle, Polygon

    parts = scenario.robot.shape or scenario.robot.bounding.spheres
    for part in parts:
        shape = place_shape(pose, part)
        if isinstance(shape, Rect):
            ax.add_patch(Polygon(shape.corners(), closed=True, facecolor=color,
                                 edgecolor=color, alpha=alpha, zorder=6))
        else:
            ax.add_patch(Circle(shape.center, shape.radius, facecolor=color,
                                edgecolor=color, alpha=alpha, zorder=6))


def render_svg(
    scenario: Scenario,
    trajectory: list[Pose],
    displaced: dict[str, Pose] | None,
    path: Path,
) -> None:
    """One frame of the world. `displaced` None draws original poses only;
    otherwise displaced obstacles get a highlight fill with originals ghosted."""
    plt = _setup_matplotlib()
    fig, ax = plt.subplots(figsize=(8.0, 6.0))
    for ob in scenario.obstacles:
        base = "#777777" if ob.mobility == "fixed" else "#c8a165"
        final = displaced.get(ob.id, ob.pose) if displaced else ob.pose
        moved = displaced is not None and _pose_differs(final, ob.pose)
        if moved:
            _draw_outline(ax, ob.pose, ob, base, 0.25, fill=False, z=2)
            _draw_outline(ax, final, ob, "#00b7c3", 0.9, fill=True, z=4)
        else:
            _draw_outline(ax, final, ob, base, 0.85, fill=True, z=3)
    xs = [p.x for p in trajectory]
    ys = [p.y for p in trajectory]
    ax.plot(xs, ys, color="#b03030", linewidth=1.5, zorder=5)
    _draw_robot(ax, trajectory[0], scenario, "#2060b0", 0.9)
    ax.plot([scenario.goal.x], [scenario.goal.y], marker="*", markersize=12,
            color="#2060b0", zorder=6)
    xmin, ymin, xmax, ymax = scenario.world_bounds
    ax.set_xlim(xmin, xmax)
    ax.set_ylim(ymin, ymax)
    ax.set_aspect("equal")
    ax.set_title(scenario.name)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _pose_differs(a: Pose, b: Pose) -> bool:
    return (
        math.hypot(a.x - b.x, a.y - b.y) > 1e-12
        or abs(wrap_angle(a.theta - b.theta)) > 1e-12
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_plan(args) -> int:
    try:
        scenario = _load_scenario_arg(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, SchemaError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    out = _out_dir(args)
    try:
        result, refined, doc, report = run_pipeline(scenario)
    except PlanningError as e:
        print(f"planner failure: {e}", file=sys.stderr)
        return EXIT_PLANNER
    except RefinementExhausted as e:
        print(f"refinement failure: {e}", file=sys.stderr)
        return EXIT_REFINEMENT

    written = []
    solution_path = out / "solution.json"
    solution_path.write_text(canonical_json(doc), encoding="utf-8")
    written.append(solution_path)
    report_path = out / "report.json"
    report_path.write_text(canonical_json(report.to_doc()), encoding="utf-8")
    written.append(report_path)
    if args.svg:
        displaced = {oid: d.realized_pose for oid, d in refined.displacements.items()}
        before = out / "before.svg"
        after = out / "after.svg"
        render_svg(scenario, list(result.trajectory), None, before)
        render_svg(scenario, list(result.trajectory), displaced, after)
        written += [before, after]

    for line in report.lines():
        print(line)
    print("wrote: " + " ".join(str(p) for p in written))
    return EXIT_OK


def _check_solution(doc: SolutionDocument) -> list[str]:
    """All feasibility violations in a stored solution, as messages."""
    problems = []
    sc = doc.scenario

    # Condition 1: the trajectory must follow the dynamics model from the
    # scenario start and end inside the goal tolerance.
    if _pose_differs(doc.trajectory[0], sc.start):
        problems.append("condition 1: trajectory does not start at the scenario start pose")
    try:
        residual = dynamics_residual(sc.robot.model, doc.trajectory, doc.controls)
        if residual > RESIDUAL_TOL:
            problems.append(f"condition 1: dynamics residual {residual:.3e} exceeds {RESIDUAL_TOL}")
    except ValueError as e:
        problems.append(f"condition 1: {e}")
    goal_err = math.hypot(
        doc.trajectory[-1].x - sc.goal.x, doc.trajectory[-1].y - sc.goal.y
    )
    if goal_err > sc.planner.goal_tol_pos + 1e-12:
        problems.append(f"condition 1: final pose misses the goal by {goal_err:.4f}")

    # Conditions 2 and 3: displaced obstacles clear of each other and of the
    # swept robot, via the shared validator at its finer time resolution.
    poses = {oid: spec.realized_pose for oid, spec in doc.displacements.items()}
    report = validate(
        sc.obstacles,
        poses,
        doc.trajectory,
        sc.robot.bounding,
        time_substeps=sc.refinement.validation_substeps,
        tol=sc.refinement.tolerance,
        overlap_model=sc.planner.overlap_model,
    )
    for v in report.violations:
        where = f" at step {v.time_index}" if v.time_index is not None else ""
        kind = "condition 3" if v.kind == "robot_obstacle" else "condition 2"
        problems.append(f"{kind}: {v.a} overlaps {v.b} by {v.depth:.4f}{where}")

    # Refinement arithmetic and the quoted summary must match the parts.
    delta = sc.refinement.delta
    for oid, spec in doc.displacements.items():
        y = doc.required[oid].magnitude if oid in doc.required else 0.0
        if spec.magnitude < y - 1e-9:
            problems.append(f"displacement: {oid} final {spec.magnitude} below required {y}")
        steps = (spec.magnitude - y) / delta
        if abs(steps - round(steps)) > 1e-6:
            problems.append(f"displacement: {oid} is not an integral number of increments")
    redone = recompute_summary(doc)
    for key, value in redone.items():
        stated = doc.summary[key]
        if isinstance(value, bool):
            ok = value == stated
        else:
            ok = math.isclose(value, stated, rel_tol=1e-9, abs_tol=1e-9)
        if not ok:
            problems.append(f"summary: {key} stated {stated} but recomputed {value}")
    return problems


def cmd_validate(args) -> int:
    try:
        with open(args.solution, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        doc = parse_solution_document(raw)
    except OSError as e:
        print(f"error: cannot read {args.solution}: {e}", file=sys.stderr)
        return EXIT_IO
    except (json.JSONDecodeError, SchemaError) as e:
        print(f"error: malformed solution document: {e}", file=sys.stderr)
        return EXIT_IO
    problems = _check_solution(doc)
    if problems:
        for p in problems:
            print(f"VIOLATION {p}")
        print(f"invalid: {len(problems)} violation(s)")
        return EXIT_INVALID
    print("valid: dynamics, obstacle separation, and summary all check out")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        scenario = _load_scenario_arg(args)
        scales = [float(v) for v in args.weight_scale.split(",") if v != ""]
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, SchemaError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    if len(scales) < 2:
        print("error: --weight-scale needs at least two comma-separated factors",
              file=sys.stderr)
        return EXIT_USAGE
    out = _out_dir(args)

    rows = []
    worst = EXIT_OK
    for i, scale in enumerate(scales):
        scaled = dataclasses.replace(
            scenario,
            weights=dataclasses.replace(
                scenario.weights, m_i_scale=scenario.weights.m_i_scale * scale
            ),
        )
        try:
            _, _, doc, report = run_pipeline(scaled)
        except PlanningError as e:
            rows.append((scale, None, f"planner failure: {e}"))
            worst = worst or EXIT_PLANNER
            continue
        except RefinementExhausted as e:
            rows.append((scale, None, f"refinement failure: {e}"))
            worst = worst or EXIT_REFINEMENT
            continue
        path = out / f"sweep_{i:02d}_scale_{scale:g}.json"
        path.write_text(canonical_json(doc), encoding="utf-8")
        rows.append((scale, report, str(path)))

    print("scale\tsum_required\tsum_displacement\tdisplaced_count\ttotal_cost\tstatus")
    for scale, report, note in rows:
        if report is None:
            print(f"{scale:g}\tnan\tnan\tnan\tnan\t{note}")
        else:
            print(
                f"{scale:g}\t{report.sum_required:.6f}\t{report.sum_displacement:.6f}"
                f"\t{report.displaced_count}\t{report.total_cost:.6f}\tok"
            )
    return worst


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdplan",
        description="Plan minimum-displacement paths through movable obstacles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scenario_args(p):
        p.add_argument("scenario", nargs="?", help="scenario JSON file")
        p.add_argument("--builtin", choices=BUILTIN_NAMES, help="use a bundled scenario")
        p.add_argument("--seed", type=int, default=None, help="layout seed for builtins")
        p.add_argument("--out", default=None,
                       help=f"output directory (default ${OUT_DIR_ENV} or cwd)")
        p.add_argument("--weights", action="append", default=[], metavar="K=V",
                       help="override a weight field, e.g. m_i_scale=10 or m_g=4,4,0.2")

    p_plan = sub.add_parser("plan", help="plan and refine, writing artifacts")
    add_scenario_args(p_plan)
    p_plan.add_argument("--svg", action="store_true",
                        help="also write before.svg and after.svg")
    p_plan.add_argument("--overlap-model", choices=OVERLAP_MODELS, default=None,
                        help="override the robot-obstacle overlap model")
    p_plan.set_defaults(func=cmd_plan)

    p_val = sub.add_parser("validate", help="re-check a stored solution document")
    p_val.add_argument("solution", help="solution JSON file")
    p_val.set_defaults(func=cmd_validate)

    p_sweep = sub.add_parser("sweep", help="compare obstacle-weight scales")
    add_scenario_args(p_sweep)
    p_sweep.add_argument("--weight-scale", required=True, metavar="A,B,...",
                         help="comma-separated m_i_scale factors (at least two)")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
