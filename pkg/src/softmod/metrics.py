"""Quality metrics for externally generated design scripts.

Five scores, each reported per task objective and pooled overall:

- syntax rate: fraction of records whose script parses, executes, and
  fits the evaluation grid.
- instruction following: among legal records whose prompt carried a
  block-count constraint, the fraction that satisfy it.
- progress: mean task-direction travel (block lengths) over simulated
  records, measured on a long rollout with an optimized controller.
- optimality: mean completion time in seconds over completers, paired
  with the completed fraction of simulated records.
- novelty: fraction of legal designs whose canonical key does not
  appear in the training set.

Denominators are pinned: a metric whose denominator is empty reports
None rather than 0. Illegal records are quarantined with reasons and
excluded from every denominator except the syntax rate's.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import design_lang as dl
from .controller import TaskSpec, completion_step, optimize, progress_score, task_from_json
from .mesher import build_mesh
from .simulator import SimConfig, rollout

# Bounding box (width, height in blocks) a legal design must fit.
EVAL_GRID = (6, 6)

# Progress and completion are measured on a rollout this many times
# longer than the optimization horizon.
LONG_HORIZON_SCALE = 5

DEFAULT_BUDGET = 150

CONSTRAINT_KINDS = ("at_most", "at_least")


@dataclass(frozen=True)
class BlocksConstraint:
    """Block-count bound a prompt imposed on the design."""

    kind: str
    blocks: int

    def __post_init__(self) -> None:
        if self.kind not in CONSTRAINT_KINDS:
            raise ValueError(f"unknown constraint kind: {self.kind!r}")
        if self.blocks < 1:
            raise ValueError("block bound must be >= 1")

    def satisfied_by(self, n_blocks: int) -> bool:
        if self.kind == "at_most":
            return n_blocks <= self.blocks
        return n_blocks >= self.blocks

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "blocks": self.blocks}


def constraint_from_json(obj: dict | None) -> BlocksConstraint | None:
    if obj is None:
        return None
    return BlocksConstraint(kind=str(obj["kind"]), blocks=int(obj["blocks"]))


@dataclass(frozen=True)
class GenRecord:
    """One externally produced design to score."""

    id: str
    task: TaskSpec
    design_text: str
    constraint: BlocksConstraint | None = None

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "task": self.task.to_json_dict(),
            "design": self.design_text,
            "constraint": None if self.constraint is None
            else self.constraint.to_json_dict(),
        }


def record_from_json(obj: dict) -> GenRecord:
    return GenRecord(
        id=str(obj["id"]),
        task=task_from_json(obj["task"]),
        design_text=str(obj["design"]),
        constraint=constraint_from_json(obj.get("constraint")),
    )


@dataclass
class DesignReview:
    """Static verdict on one record: legality, constraint, novelty."""

    record: GenRecord
    legal: bool
    reasons: tuple[str, ...]
    design: dl.GridDesign | None
    block_count: int | None
    compliant: bool | None
    unseen: bool | None


def review_record(record: GenRecord, train_keys, grid=EVAL_GRID
                  ) -> DesignReview:
    try:
        design = dl.execute(dl.parse(record.design_text))
    except dl.DesignError as exc:
        return DesignReview(record=record, legal=False, reasons=(str(exc),),
                            design=None, block_count=None, compliant=None,
                            unseen=None)
    verdict = dl.validate(design, grid)
    if not verdict.legal:
        return DesignReview(record=record, legal=False,
                            reasons=tuple(verdict.reasons), design=design,
                            block_count=len(design.cells), compliant=None,
                            unseen=None)
    n = len(design.cells)
    compliant = (None if record.constraint is None
                 else record.constraint.satisfied_by(n))
    key = dl.canonical_key(design).decode("ascii")
    return DesignReview(record=record, legal=True, reasons=(),
                        design=design, block_count=n, compliant=compliant,
                        unseen=key not in train_keys)


@dataclass(frozen=True)
class SimOutcome:
    """Long-rollout observables for one legal design."""

    progress: float
    completion_time: float | None

    def to_json_dict(self) -> dict:
        return {"progress": self.progress,
                "completion_time": self.completion_time}


def outcome_from_json(obj: dict) -> SimOutcome:
    time = obj.get("completion_time")
    return SimOutcome(progress=float(obj["progress"]),
                      completion_time=None if time is None else float(time))


def record_seed(seed: int, index: int) -> int:
    """Stable per-record controller seed, order-independent."""
    return int(np.random.SeedSequence((seed, index)).generate_state(1)[0])


def simulate_review(review: DesignReview, seed: int, budget: int,
                    config: SimConfig,
                    horizon_scale: int = LONG_HORIZON_SCALE) -> SimOutcome:
    """Optimize a gait at the task horizon, then measure on the long one."""
    assert review.design is not None
    task = review.record.task
    mesh = build_mesh(review.design)
    result = optimize(mesh, task, seed=seed, budget=budget, config=config)
    long_config = replace(config, n_steps=config.n_steps * horizon_scale)
    traj = rollout(mesh, task.terrain, result.plan, long_config)
    step = completion_step(task, traj.com_x)
    return SimOutcome(
        progress=float(progress_score(task, traj.com_x)),
        completion_time=None if step is None else step * config.dt,
    )


@dataclass(frozen=True)
class MetricBlock:
    """One scored group of records (a task objective, or everything)."""

    n_records: int
    n_legal: int
    n_constrained: int
    n_compliant: int
    n_simulated: int
    n_completed: int
    n_unseen: int
    syntax_rate: float | None
    instruction_following: float | None
    progress: float | None
    opt_mean_time: float | None
    opt_completion_rate: float | None
    novelty: float | None

    def to_json_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "n_legal": self.n_legal,
            "n_constrained": self.n_constrained,
            "n_compliant": self.n_compliant,
            "n_simulated": self.n_simulated,
            "n_completed": self.n_completed,
            "n_unseen": self.n_unseen,
            "syntax_rate": self.syntax_rate,
            "instruction_following": self.instruction_following,
            "progress": self.progress,
            "opt_mean_time": self.opt_mean_time,
            "opt_completion_rate": self.opt_completion_rate,
            "novelty": self.novelty,
        }


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


def summarize(reviews: list[DesignReview],
              outcomes: dict[str, SimOutcome]) -> MetricBlock:
    n_records = len(reviews)
    legal = [r for r in reviews if r.legal]
    constrained = [r for r in legal if r.compliant is not None]
    compliant = [r for r in constrained if r.compliant]
    unseen = [r for r in legal if r.unseen]
    simulated = [outcomes[r.record.id] for r in legal
                 if r.record.id in outcomes]
    completed = [o for o in simulated if o.completion_time is not None]
    progress = (None if not simulated
                else sum(o.progress for o in simulated) / len(simulated))
    mean_time = (None if not completed
                 else sum(o.completion_time for o in completed)
                 / len(completed))
    return MetricBlock(
        n_records=n_records,
        n_legal=len(legal),
        n_constrained=len(constrained),
        n_compliant=len(compliant),
        n_simulated=len(simulated),
        n_completed=len(completed),
        n_unseen=len(unseen),
        syntax_rate=_ratio(len(legal), n_records),
        instruction_following=_ratio(len(compliant), len(constrained)),
        progress=progress,
        opt_mean_time=mean_time,
        opt_completion_rate=_ratio(len(completed), len(simulated)),
        novelty=_ratio(len(unseen), len(legal)),
    )


TASK_ORDER = ("uni", "back_forth", "downstairs")


@dataclass(frozen=True)
class MetricReport:
    overall: MetricBlock
    per_task: dict[str, MetricBlock]
    quarantine: tuple[tuple[str, tuple[str, ...]], ...]

    def to_json_dict(self) -> dict:
        return {
            "overall": self.overall.to_json_dict(),
            "per_task": {
                name: block.to_json_dict()
                for name, block in self.per_task.items()
            },
            "quarantine": [
                {"id": rid, "reasons": list(reasons)}
                for rid, reasons in self.quarantine
            ],
        }


def evaluate(records: list[GenRecord], train_keys, seed: int = 0,
             budget: int = DEFAULT_BUDGET, config: SimConfig | None = None,
             sim_results: dict[str, SimOutcome] | None = None,
             grid=EVAL_GRID,
             horizon_scale: int = LONG_HORIZON_SCALE) -> MetricReport:
    """Score a batch of generated designs against a training corpus.

    When `sim_results` is given it supplies the rollout observables and
    no simulation runs; records missing from it simply stay out of the
    simulated pool. Otherwise every legal design is optimized and rolled
    out, seeded per record index so scores do not depend on batch order.
    """
    config = config or SimConfig()
    reviews = [review_record(rec, train_keys, grid) for rec in records]
    outcomes: dict[str, SimOutcome] = {}
    for index, review in enumerate(reviews):
        if not review.legal:
            continue
        if sim_results is not None:
            if review.record.id in sim_results:
                outcomes[review.record.id] = sim_results[review.record.id]
            continue
        outcomes[review.record.id] = simulate_review(
            review, seed=record_seed(seed, index), budget=budget,
            config=config, horizon_scale=horizon_scale)

    per_task = {}
    for objective in TASK_ORDER:
        group = [r for r in reviews if r.record.task.objective == objective]
        if group:
            per_task[objective] = summarize(group, outcomes)
    quarantine = tuple((r.record.id, r.reasons) for r in reviews
                       if not r.legal)
    return MetricReport(overall=summarize(reviews, outcomes),
                        per_task=per_task, quarantine=quarantine)
