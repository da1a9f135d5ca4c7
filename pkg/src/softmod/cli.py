"""Command line interface.

Subcommands: sample, augment, optimize, simulate, dataset, evaluate.
Data goes to JSON/JSONL files (or stdout for the line-oriented
commands); report-style commands render SVG figures next to the data.

Exit codes: 0 success, 1 file/IO problems, 2 usage errors, 3 domain
errors (bad scripts, bad configuration, empty budgets), 4 numeric
failures (non-finite states or gradients). Outputs carry no timestamps
so identical invocations write identical bytes.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import datagen, design_lang as dl, metrics, render
from .config import Settings, parse_grid, parse_span
from .controller import (
    TaskSpec,
    completion_step,
    init_plan,
    optimize,
    plan_from_json,
    progress_score,
)
from .mesher import build_mesh
from .simulator import Flat, SimulationError, Stairs, rollout

CLI_VERSION = 1


def _dump_json(path: Path, obj: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _emit_rows(out_path, header: dict, rows: list[dict]) -> None:
    """JSONL to a file when requested, otherwise to stdout."""
    if out_path:
        path = Path(out_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        datagen.write_jsonl(path, header, rows)
        print(f"wrote {len(rows)} rows to {path}", file=sys.stderr)
    else:
        print(datagen.dump_line(header))
        for row in rows:
            print(datagen.dump_line(row))


def _header(command: str, sim, **extra) -> dict:
    head = {"kind": "header", "version": CLI_VERSION, "command": command,
            "sim": dataclasses.asdict(sim)}
    head.update(extra)
    return head


def _read_design(path) -> dl.GridDesign:
    text = Path(path).read_text(encoding="utf-8")
    return dl.execute(dl.parse(text))


def _parse_stairs(text: str) -> Stairs:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(
            "stairs spec is 'width,height,n_steps,x_start', "
            f"got {text!r}")
    return Stairs(step_width=float(parts[0]), step_height=float(parts[1]),
                  n_steps=int(parts[2]), x_start=float(parts[3]))


def _task_from_args(args, settings: Settings) -> TaskSpec:
    stairs = _parse_stairs(args.stairs) if args.stairs else None
    if args.objective == "downstairs":
        terrain = stairs if stairs is not None else Stairs()
        distance = settings.get("distance", round(terrain.end_x, 1))
    else:
        terrain = stairs if stairs is not None else Flat()
        distance = settings.get("distance", 4.0)
    return TaskSpec(args.objective, terrain, distance=distance)


def _seed_for(seed: int, index: int) -> int:
    return int(np.random.SeedSequence((seed, index)).generate_state(1)[0])


def cmd_sample(args) -> int:
    settings = Settings.load(args.config, {
        "seed": args.seed, "count": args.count,
        "grid": parse_grid(args.grid) if args.grid else None,
        "blocks": parse_span(args.blocks) if args.blocks else None,
    })
    seed = settings.get("seed", 0)
    count = settings.get("count", 10)
    grid = settings.get("grid", (6, 6))
    blocks = settings.get("blocks", (3, 8))
    rows = []
    for i in range(count):
        design = dl.sample_design(grid, blocks, _seed_for(seed, i))
        rows.append({
            "kind": "design",
            "id": f"d{i:05d}",
            "design": dl.serialize(design),
            "canonical_key": dl.canonical_key(design).decode("ascii"),
            "blocks": design.block_count,
        })
    header = {"kind": "header", "version": CLI_VERSION, "command": "sample",
              "seed": seed, "grid": list(grid), "blocks": list(blocks)}
    _emit_rows(args.out, header, rows)
    return 0


def cmd_augment(args) -> int:
    settings = Settings.load(args.config,
                             {"seed": args.seed, "k": args.k})
    design = _read_design(args.design)
    seed = settings.get("seed", 0)
    k = settings.get("k", 5)
    scripts = dl.bfs_augment(design, k=k, seed=seed)
    rows = [{"kind": "augment", "index": i, "design": dl.to_text(s)}
            for i, s in enumerate(scripts)]
    header = {"kind": "header", "version": CLI_VERSION, "command": "augment",
              "seed": seed, "k": k,
              "canonical_key": dl.canonical_key(design).decode("ascii")}
    _emit_rows(args.out, header, rows)
    return 0


def cmd_optimize(args) -> int:
    settings = Settings.load(args.config, {
        "seed": args.seed, "budget": args.budget, "n_steps": args.n_steps,
        "distance": args.distance,
    })
    sim = settings.sim_config()
    seed = settings.get("seed", 0)
    budget = settings.get("budget", 150)
    task = _task_from_args(args, settings)
    design = _read_design(args.design)
    mesh = build_mesh(design)

    result = optimize(mesh, task, seed=seed, budget=budget, config=sim)
    scale = settings.get("long_horizon_scale", metrics.LONG_HORIZON_SCALE)
    long_sim = dataclasses.replace(sim, n_steps=sim.n_steps * scale)
    traj = rollout(mesh, task.terrain, result.plan, long_sim)
    step = completion_step(task, traj.com_x)

    out = Path(args.out)
    _dump_json(out / "result.json", {
        "header": _header("optimize", sim, seed=seed, budget=budget,
                          task=task.to_json_dict(),
                          long_horizon_scale=scale),
        "plan": result.plan.to_json_dict(),
        "loss_history": result.loss_history,
        "best_iteration": result.best_iteration,
        "progress": float(progress_score(task, traj.com_x)),
        "completion_time": None if step is None else step * sim.dt,
    })
    render.render_loss_curve(result.loss_history, out / "loss_curve.svg")
    print(f"wrote {out / 'result.json'} and loss_curve.svg", file=sys.stderr)
    return 0


def _load_plan(path):
    if path is None:
        return None
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if "plan" in obj:
        obj = obj["plan"]
    return plan_from_json(obj)


def cmd_simulate(args) -> int:
    settings = Settings.load(args.config, {
        "seed": args.seed, "n_steps": args.n_steps, "stride": args.stride,
    })
    sim = settings.sim_config()
    seed = settings.get("seed", 0)
    stride = settings.get("stride", 256)
    design = _read_design(args.design)
    mesh = build_mesh(design)
    terrain = _parse_stairs(args.stairs) if args.stairs else Flat()
    plan = _load_plan(args.plan)
    if plan is None:
        plan = init_plan(mesh.n_actuators, seed=seed, dt=sim.dt)

    traj = rollout(mesh, terrain, plan, sim, record_positions=True)
    out = Path(args.out)
    _dump_json(out / "trajectory.json", {
        "header": _header("simulate", sim, seed=seed,
                          terrain=terrain.to_json_dict(), stride=stride),
        "plan": plan.to_json_dict(),
        "com_track": [[float(x), float(y)] for x, y in traj.com_track],
        "final_positions": traj.final_positions.tolist(),
        "final_velocities": traj.final_velocities.tolist(),
    })
    signals = plan.signals(sim.n_steps, sim.dt)
    paths = render.render_frames(mesh, traj, terrain, signals,
                                 out / "frames", stride)
    print(f"wrote {out / 'trajectory.json'} and {len(paths)} frames",
          file=sys.stderr)
    return 0


def cmd_dataset(args) -> int:
    settings = Settings.load(args.config, {
        "seed": args.seed, "budget": args.budget,
        "n_records": args.n_records, "n_pairs": args.n_pairs,
        "grid": parse_grid(args.grid) if args.grid else None,
        "blocks": parse_span(args.blocks) if args.blocks else None,
        "workers": args.workers,
    })
    sim = settings.sim_config()
    dataset_config = datagen.DatasetConfig(
        n_records=settings.get("n_records", 200),
        seed=settings.get("seed", 0),
        grid=settings.get("grid", (6, 6)),
        blocks=settings.get("blocks", (3, 8)),
        budget=settings.get("budget", 150),
        long_horizon_scale=settings.get("long_horizon_scale", 5),
    )
    n_pairs = settings.get("n_pairs", dataset_config.n_records)
    workers = settings.workers()

    def progress(done: int, total: int) -> None:
        if done % 25 == 0 or done == total:
            print(f"records {done}/{total}", file=sys.stderr)

    records = datagen.build_records(dataset_config, sim,
                                    progress_cb=progress, workers=workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = datagen.header_dict(dataset_config, sim)
    datagen.write_jsonl(out / "records.jsonl", header,
                        [r.to_json_dict() for r in records])
    datagen.write_jsonl(out / "clm.jsonl", header,
                        datagen.render_clm(records, dataset_config.seed))
    datagen.write_jsonl(
        out / "compare.jsonl", header,
        datagen.sample_compare_pairs(records, dataset_config.seed, n_pairs))
    render.render_dataset_summary(records, out / "summary.svg")
    print(f"wrote records/clm/compare JSONL and summary.svg under {out}",
          file=sys.stderr)
    return 0


def _load_generated(path) -> list[metrics.GenRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            if obj.get("kind") in ("header", "clm", "compare"):
                continue
            records.append(metrics.record_from_json(obj))
    return records


def _load_sim_results(path) -> dict[str, metrics.SimOutcome]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return {rid: metrics.outcome_from_json(entry)
            for rid, entry in obj.items()}


def cmd_evaluate(args) -> int:
    settings = Settings.load(args.config, {
        "seed": args.seed, "budget": args.budget, "n_steps": args.n_steps,
        "grid": parse_grid(args.grid) if args.grid else None,
    })
    sim = settings.sim_config()
    seed = settings.get("seed", 0)
    budget = settings.get("budget", 150)
    grid = settings.get("grid", metrics.EVAL_GRID)
    scale = settings.get("long_horizon_scale", metrics.LONG_HORIZON_SCALE)

    generated = _load_generated(args.generated)
    _, train_rows = datagen.read_jsonl(args.train)
    train_keys = datagen.collect_canonical_keys(train_rows)
    sim_results = (_load_sim_results(args.sim_results)
                   if args.sim_results else None)

    report = metrics.evaluate(generated, train_keys, seed=seed,
                              budget=budget, config=sim,
                              sim_results=sim_results, grid=grid,
                              horizon_scale=scale)
    out = Path(args.out)
    _dump_json(out / "report.json", {
        "header": _header("evaluate", sim, seed=seed, budget=budget,
                          grid=list(grid), n_generated=len(generated),
                          n_train_keys=len(train_keys),
                          long_horizon_scale=scale,
                          sim_results=bool(sim_results)),
        "report": report.to_json_dict(),
    })
    render.render_metrics_report(report, out / "metrics.svg")
    print(f"wrote {out / 'report.json'} and metrics.svg", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softmod",
        description="Soft modular robot design language, simulation, "
                    "datasets, and metrics.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("sample", help="sample random legal designs")
    common(p)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--grid", help="bounding box, e.g. 6x6")
    p.add_argument("--blocks", help="block count range, e.g. 3-8")
    p.add_argument("--out", help="output JSONL (default stdout)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("augment",
                       help="alternative linearizations of one design")
    common(p)
    p.add_argument("--design", required=True, help="script text file")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out", help="output JSONL (default stdout)")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("optimize", help="optimize a gait for one design")
    common(p)
    p.add_argument("--design", required=True)
    p.add_argument("--objective", default="uni",
                   choices=("uni", "back_forth", "downstairs"))
    p.add_argument("--distance", type=float, default=None)
    p.add_argument("--stairs", help="width,height,n_steps,x_start")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--n-steps", type=int, default=None, dest="n_steps")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate", help="roll out a design and dump frames")
    common(p)
    p.add_argument("--design", required=True)
    p.add_argument("--plan", help="plan JSON (bare or optimize result)")
    p.add_argument("--stairs", help="width,height,n_steps,x_start")
    p.add_argument("--n-steps", type=int, default=None, dest="n_steps")
    p.add_argument("--stride", type=int, default=None,
                   help="frame every this many steps")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dataset", help="synthesize a training corpus")
    common(p)
    p.add_argument("--n-records", type=int, default=None, dest="n_records")
    p.add_argument("--n-pairs", type=int, default=None, dest="n_pairs")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--grid")
    p.add_argument("--blocks")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("evaluate", help="score generated designs")
    common(p)
    p.add_argument("--generated", required=True,
                   help="JSONL of designs to score")
    p.add_argument("--train", required=True,
                   help="records.jsonl the corpus was trained on")
    p.add_argument("--sim-results", dest="sim_results",
                   help="JSON mapping id -> measured outcome; skips "
                        "simulation")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--n-steps", type=int, default=None, dest="n_steps")
    p.add_argument("--grid")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)
    return parser


def _fail(exc: Exception) -> None:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
          file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (dl.DesignError, ValueError) as exc:
        _fail(exc)
        return 3
    except SimulationError as exc:
        _fail(exc)
        return 4
    except OSError as exc:
        _fail(exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
