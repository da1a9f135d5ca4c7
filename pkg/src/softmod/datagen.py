"""Training-corpus synthesis: scripted designs with measured gaits.

Each record samples a legal design, optimizes a sinusoid gait for a
sampled task, and measures completion on a long rollout. Records render
into two prompt styles: plain generation prompts (instruction ->
script) and binary comparisons (two scripts, which completes faster).

Everything is deterministic in (config, seed): per-record randomness
comes from a seed sequence keyed by record index, so records do not
depend on build order, and reruns write byte-identical files.
"""

from __future__ import annotations

import dataclasses
import json
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from . import design_lang as dl
from .controller import TaskSpec, completion_step, optimize, progress_score
from .mesher import build_mesh
from .simulator import Flat, SimConfig, Stairs, rollout

DATASET_VERSION = 1

# Distance menus are small so comparison pairs share an exact task.
DISTANCE_MENU = {
    "uni": (2.0, 3.0, 4.0, 5.0, 6.0),
    "back_forth": (1.0, 1.5, 2.0, 2.5),
}

STAIRS_MENU = (
    Stairs(step_width=1.5, step_height=0.4, n_steps=3, x_start=2.0),
    Stairs(step_width=2.0, step_height=0.5, n_steps=3, x_start=2.0),
    Stairs(step_width=1.5, step_height=0.5, n_steps=4, x_start=3.0),
    Stairs(step_width=2.0, step_height=0.4, n_steps=4, x_start=3.0),
)

TASK_WEIGHTS = {"uni": 0.5, "back_forth": 0.25, "downstairs": 0.25}

TASK_PHRASES = {
    "uni": "unidirectional locomotion",
    "back_forth": "back-and-forth locomotion",
    "downstairs": "stair-descending locomotion",
}


@dataclass(frozen=True)
class DatasetConfig:
    n_records: int = 200
    seed: int = 0
    grid: tuple[int, int] = (6, 6)
    blocks: tuple[int, int] = (3, 8)
    budget: int = 150
    long_horizon_scale: int = 5

    def __post_init__(self) -> None:
        if self.n_records < 1:
            raise ValueError("n_records must be >= 1")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.long_horizon_scale < 1:
            raise ValueError("long_horizon_scale must be >= 1")

    def to_json_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "seed": self.seed,
            "grid": list(self.grid),
            "blocks": list(self.blocks),
            "budget": self.budget,
            "long_horizon_scale": self.long_horizon_scale,
        }


@dataclass(frozen=True)
class DesignRecord:
    """One corpus entry: a task, a design script, and its measured gait."""

    id: str
    index: int
    task: TaskSpec
    design_text: str
    canonical_key: str
    blocks: int
    progress: float
    time_cost: float | None

    def to_json_dict(self) -> dict:
        return {
            "kind": "record",
            "id": self.id,
            "index": self.index,
            "task": self.task.to_json_dict(),
            "design": self.design_text,
            "canonical_key": self.canonical_key,
            "blocks": self.blocks,
            "progress": self.progress,
            "time_cost": self.time_cost,
        }


def design_record_from_json(obj: dict) -> DesignRecord:
    from .controller import task_from_json

    time_cost = obj.get("time_cost")
    return DesignRecord(
        id=str(obj["id"]),
        index=int(obj["index"]),
        task=task_from_json(obj["task"]),
        design_text=str(obj["design"]),
        canonical_key=str(obj["canonical_key"]),
        blocks=int(obj["blocks"]),
        progress=float(obj["progress"]),
        time_cost=None if time_cost is None else float(time_cost),
    )


def draw_task(rng: np.random.Generator) -> TaskSpec:
    names = tuple(TASK_WEIGHTS)
    weights = np.array([TASK_WEIGHTS[n] for n in names])
    objective = names[int(rng.choice(len(names), p=weights / weights.sum()))]
    if objective == "downstairs":
        stairs = STAIRS_MENU[int(rng.integers(len(STAIRS_MENU)))]
        # The predicate is clearing the last step edge, so the rendered
        # distance is that edge's x coordinate.
        return TaskSpec(objective, stairs, distance=round(stairs.end_x, 1))
    menu = DISTANCE_MENU[objective]
    return TaskSpec(objective, Flat(),
                    distance=menu[int(rng.integers(len(menu)))])


def build_record(config: DatasetConfig, sim_config: SimConfig,
                 index: int) -> DesignRecord:
    """Sample, optimize, and measure record `index`. Order-independent."""
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence((config.seed, index))))
    task = draw_task(rng)
    design_seed = int(rng.integers(2 ** 31))
    ctrl_seed = int(rng.integers(2 ** 31))
    lin_seed = int(rng.integers(2 ** 31))

    design = dl.sample_design(config.grid, config.blocks, design_seed)
    mesh = build_mesh(design)
    result = optimize(mesh, task, seed=ctrl_seed, budget=config.budget,
                      config=sim_config)
    long_config = dataclasses.replace(
        sim_config, n_steps=sim_config.n_steps * config.long_horizon_scale)
    traj = rollout(mesh, task.terrain, result.plan, long_config)
    step = completion_step(task, traj.com_x)

    # One uniformly drawn linearization, not always the canonical one.
    script = dl.bfs_augment(design, k=1, seed=lin_seed)[0]
    return DesignRecord(
        id=f"r{index:05d}",
        index=index,
        task=task,
        design_text=dl.to_text(script),
        canonical_key=dl.canonical_key(design).decode("ascii"),
        blocks=design.block_count,
        progress=float(progress_score(task, traj.com_x)),
        time_cost=None if step is None else step * sim_config.dt,
    )


def build_records(config: DatasetConfig, sim_config: SimConfig | None = None,
                  progress_cb=None, workers: int = 1) -> list[DesignRecord]:
    """Build all records; `workers` > 1 fans indices across processes.

    Records are keyed by index, so the parallel result is identical to
    the sequential one.
    """
    sim_config = sim_config or SimConfig()
    records = []
    if workers <= 1:
        for index in range(config.n_records):
            records.append(build_record(config, sim_config, index))
            if progress_cb is not None:
                progress_cb(index + 1, config.n_records)
        return records

    from concurrent.futures import ProcessPoolExecutor
    from functools import partial

    chunk = max(1, config.n_records // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        worker = partial(build_record, config, sim_config)
        for record in pool.map(worker, range(config.n_records),
                               chunksize=chunk):
            records.append(record)
            if progress_cb is not None:
                progress_cb(len(records), config.n_records)
    return records


def _format_distance(distance: float) -> str:
    return f"{distance:g}"


def env_phrase(terrain) -> str:
    if isinstance(terrain, Stairs):
        return (f"a staircase of {terrain.n_steps} steps, each "
                f"{terrain.step_width:g} long and "
                f"{terrain.step_height:g} deep")
    return "a flat plane"


def _blocks_clause(constraint: dict | None) -> str:
    if constraint is None:
        return ""
    kind = "at most" if constraint["kind"] == "at_most" else "at least"
    return f" using {kind} {constraint['blocks']} blocks"


def clm_prompt(task: TaskSpec, constraint: dict | None) -> str:
    return (f"Design a soft modular robot to achieve "
            f"{TASK_PHRASES[task.objective]} over a distance of "
            f"{_format_distance(task.distance)} within "
            f"{env_phrase(task.terrain)}{_blocks_clause(constraint)}.")


def render_clm(records: list[DesignRecord], seed: int) -> list[dict]:
    """One generation prompt per record, block clause included half the
    time with a bound the paired design actually satisfies."""
    rows = []
    for record in records:
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((seed, record.index, 101))))
        constraint = None
        if rng.random() < 0.5:
            margin = int(rng.integers(0, 3))
            if rng.random() < 0.5:
                constraint = {"kind": "at_most",
                              "blocks": record.blocks + margin}
            else:
                constraint = {"kind": "at_least",
                              "blocks": max(1, record.blocks - margin)}
        rows.append({
            "kind": "clm",
            "id": f"clm-{record.id}",
            "record": record.id,
            "prompt": clm_prompt(record.task, constraint),
            "completion": record.design_text,
            "constraint": constraint,
        })
    return rows


def _pair_group_key(task: TaskSpec) -> tuple:
    terrain = task.terrain.to_json_dict()
    return (task.objective, task.distance,
            tuple(sorted(terrain.items())))


def compare_prompt(task: TaskSpec, text_a: str, text_b: str) -> str:
    return (f"Given the goal of achieving {TASK_PHRASES[task.objective]} "
            f"over a distance of {_format_distance(task.distance)} within "
            f"{env_phrase(task.terrain)}, which design is better?\n"
            f"(a)\n{text_a}\n(b)\n{text_b}")


def sample_compare_pairs(records: list[DesignRecord], seed: int,
                         n_pairs: int) -> list[dict]:
    """Binary-choice rows over completed records sharing an exact task.

    The faster completer wins; equal times favor (a). Sides are shuffled
    per pair so the answer key carries no positional bias.
    """
    groups: dict[tuple, list[DesignRecord]] = defaultdict(list)
    for record in records:
        if record.time_cost is not None:
            groups[_pair_group_key(record.task)].append(record)

    all_pairs = []
    for group_key in sorted(groups):
        members = groups[group_key]
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                all_pairs.append((members[i], members[j]))

    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence((seed, 202))))
    order = rng.permutation(len(all_pairs))[:n_pairs]
    rows = []
    for k, pair_index in enumerate(order):
        first, second = all_pairs[int(pair_index)]
        if rng.random() < 0.5:
            first, second = second, first
        answer = "(a)" if (second.time_cost is None
                           or first.time_cost <= second.time_cost) else "(b)"
        rows.append({
            "kind": "compare",
            "id": f"cmp-{k:05d}",
            "a": first.id,
            "b": second.id,
            "prompt": compare_prompt(first.task, first.design_text,
                                     second.design_text),
            "answer": answer,
        })
    return rows


def header_dict(config: DatasetConfig, sim_config: SimConfig) -> dict:
    return {
        "kind": "header",
        "version": DATASET_VERSION,
        "seed": config.seed,
        "config": config.to_json_dict(),
        "sim": dataclasses.asdict(sim_config),
    }


def dump_line(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_jsonl(path, header: dict, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_line(header) + "\n")
        for row in rows:
            fh.write(dump_line(row) + "\n")


def read_jsonl(path) -> tuple[dict, list[dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("kind") != "header":
        raise ValueError(f"{path}: missing header line")
    return lines[0], lines[1:]


def collect_canonical_keys(rows: list[dict]) -> frozenset[str]:
    return frozenset(row["canonical_key"] for row in rows
                     if row.get("kind") == "record")
