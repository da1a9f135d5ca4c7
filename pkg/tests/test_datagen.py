"""Tests for corpus synthesis and prompt rendering."""

import numpy as np
import pytest

import softmod.datagen as datagen
import softmod.design_lang as dl
import softmod.simulator as simulator
from softmod.controller import TaskSpec

TINY_SIM = simulator.SimConfig(n_steps=300)
TINY_CONFIG = datagen.DatasetConfig(n_records=4, seed=5, blocks=(2, 4),
                                    budget=2, long_horizon_scale=2)


def fab(rid, index, task, cells, time_cost, progress=1.0):
    """Fabricated record: geometry is real, gait numbers are invented."""
    design = dl.GridDesign(frozenset(cells))
    return datagen.DesignRecord(
        id=rid, index=index, task=task,
        design_text=dl.serialize(design),
        canonical_key=dl.canonical_key(design).decode("ascii"),
        blocks=design.block_count, progress=progress, time_cost=time_cost)


def chain(n):
    return [(i, 0) for i in range(n)]


UNI2 = TaskSpec("uni", simulator.Flat(), distance=2.0)
UNI4 = TaskSpec("uni", simulator.Flat(), distance=4.0)
BF1 = TaskSpec("back_forth", simulator.Flat(), distance=1.0)


class TestDrawTask:
    def test_menus_and_weights(self):
        rng = np.random.Generator(np.random.PCG64(0))
        seen = {"uni": 0, "back_forth": 0, "downstairs": 0}
        for _ in range(400):
            task = datagen.draw_task(rng)
            seen[task.objective] += 1
            if task.objective == "downstairs":
                assert task.terrain in datagen.STAIRS_MENU
                assert task.distance == round(task.terrain.end_x, 1)
            else:
                assert isinstance(task.terrain, simulator.Flat)
                assert task.distance in datagen.DISTANCE_MENU[task.objective]
        assert all(count > 0 for count in seen.values())
        assert seen["uni"] == max(seen.values())

    def test_deterministic(self):
        a = [datagen.draw_task(np.random.Generator(np.random.PCG64(7)))
             for _ in range(1)]
        b = [datagen.draw_task(np.random.Generator(np.random.PCG64(7)))
             for _ in range(1)]
        assert a == b


@pytest.fixture(scope="module")
def records():
    return datagen.build_records(TINY_CONFIG, TINY_SIM)


class TestBuildRecords:
    def test_shape_and_ids(self, records):
        assert [r.id for r in records] == [f"r{i:05d}" for i in range(4)]
        assert [r.index for r in records] == [0, 1, 2, 3]

    def test_designs_parse_back(self, records):
        for record in records:
            design = dl.execute(dl.parse(record.design_text))
            assert dl.canonical_key(design).decode("ascii") == \
                record.canonical_key
            assert design.block_count == record.blocks
            assert TINY_CONFIG.blocks[0] <= record.blocks \
                <= TINY_CONFIG.blocks[1]

    def test_rebuild_is_identical(self, records):
        again = datagen.build_records(TINY_CONFIG, TINY_SIM)
        assert [r.to_json_dict() for r in again] == \
            [r.to_json_dict() for r in records]

    def test_records_are_order_independent(self, records):
        solo = datagen.build_record(TINY_CONFIG, TINY_SIM, 2)
        assert solo.to_json_dict() == records[2].to_json_dict()

    def test_progress_callback(self):
        calls = []
        config = datagen.DatasetConfig(n_records=2, seed=1, blocks=(2, 3),
                                       budget=1, long_horizon_scale=1)
        datagen.build_records(config, TINY_SIM,
                              progress_cb=lambda i, n: calls.append((i, n)))
        assert calls == [(1, 2), (2, 2)]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            datagen.DatasetConfig(n_records=0)
        with pytest.raises(ValueError):
            datagen.DatasetConfig(budget=0)


class TestJsonl:
    def test_round_trip_and_byte_identical(self, tmp_path):
        records = datagen.build_records(TINY_CONFIG, TINY_SIM)
        header = datagen.header_dict(TINY_CONFIG, TINY_SIM)
        rows = [r.to_json_dict() for r in records]
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        datagen.write_jsonl(p1, header, rows)
        datagen.write_jsonl(p2, header, rows)
        assert p1.read_bytes() == p2.read_bytes()
        got_header, got_rows = datagen.read_jsonl(p1)
        assert got_header == header
        assert got_rows == rows
        back = [datagen.design_record_from_json(row) for row in got_rows]
        assert back == records

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"kind":"record","id":"x"}\n')
        with pytest.raises(ValueError):
            datagen.read_jsonl(path)

    def test_collect_canonical_keys(self):
        records = [fab("a", 0, UNI2, chain(2), 1.0),
                   fab("b", 1, UNI2, chain(3), None)]
        rows = [r.to_json_dict() for r in records]
        rows.append({"kind": "clm", "id": "clm-a"})
        keys = datagen.collect_canonical_keys(rows)
        assert keys == {records[0].canonical_key, records[1].canonical_key}


def varied_records(n):
    tasks = [UNI2, UNI4, BF1,
             TaskSpec("downstairs", datagen.STAIRS_MENU[0],
                      distance=round(datagen.STAIRS_MENU[0].end_x, 1))]
    out = []
    for i in range(n):
        cells = chain(2 + i % 4)
        out.append(fab(f"r{i:05d}", i, tasks[i % len(tasks)], cells,
                       time_cost=float(1 + i % 5)))
    return out


class TestRenderClm:
    def test_rows_follow_records(self):
        records = varied_records(8)
        rows = datagen.render_clm(records, seed=3)
        assert len(rows) == 8
        for row, record in zip(rows, records):
            assert row["record"] == record.id
            assert row["completion"] == record.design_text
            assert datagen.TASK_PHRASES[record.task.objective] in row["prompt"]
            assert f"{record.task.distance:g}" in row["prompt"]

    def test_deterministic(self):
        records = varied_records(10)
        assert datagen.render_clm(records, seed=3) == \
            datagen.render_clm(records, seed=3)

    def test_constraints_consistent_with_design(self):
        records = varied_records(200)
        rows = datagen.render_clm(records, seed=11)
        n_with = 0
        for row, record in zip(rows, records):
            constraint = row["constraint"]
            if constraint is None:
                assert "using" not in row["prompt"]
                continue
            n_with += 1
            kind, bound = constraint["kind"], constraint["blocks"]
            if kind == "at_most":
                assert record.blocks <= bound
                assert f"using at most {bound} blocks" in row["prompt"]
            else:
                assert record.blocks >= bound
                assert f"using at least {bound} blocks" in row["prompt"]
        # clause flips a fair coin per record
        assert 0.3 < n_with / 200 < 0.7

    def test_completions_parse(self):
        for row in datagen.render_clm(varied_records(12), seed=0):
            dl.execute(dl.parse(row["completion"]))

    def test_stairs_environment_phrase(self):
        stairs = datagen.STAIRS_MENU[0]
        task = TaskSpec("downstairs", stairs, distance=round(stairs.end_x, 1))
        row = datagen.render_clm([fab("s", 0, task, chain(3), 1.0)], seed=0)[0]
        assert "staircase" in row["prompt"]
        assert f"{stairs.n_steps} steps" in row["prompt"]


class TestComparePairs:
    def completed_pool(self):
        # group A: uni d=2, times 1, 2, 3 + one non-completer
        # group B: uni d=4, times 5, 5 (tie)
        # group C: back_forth, lone record, can never pair
        return [
            fab("a0", 0, UNI2, chain(2), 1.0),
            fab("a1", 1, UNI2, chain(3), 2.0),
            fab("a2", 2, UNI2, chain(4), 3.0),
            fab("a3", 3, UNI2, chain(5), None),
            fab("b0", 4, UNI4, [(0, 0), (0, 1)], 5.0),
            fab("b1", 5, UNI4, [(0, 0), (1, 0), (1, 1)], 5.0),
            fab("c0", 6, BF1, chain(2), 1.0),
        ]

    def test_pair_structure(self):
        records = self.completed_pool()
        by_id = {r.id: r for r in records}
        rows = datagen.sample_compare_pairs(records, seed=0, n_pairs=100)
        # group A gives C(3,2)=3 pairs, group B gives 1, C gives 0.
        assert len(rows) == 4
        for row in rows:
            a, b = by_id[row["a"]], by_id[row["b"]]
            assert a.task == b.task
            assert a.time_cost is not None and b.time_cost is not None
            if row["answer"] == "(a)":
                assert a.time_cost <= b.time_cost
            else:
                assert b.time_cost < a.time_cost

    def test_tie_prefers_a(self):
        records = [fab("x", 0, UNI4, chain(2), 5.0),
                   fab("y", 1, UNI4, chain(3), 5.0)]
        for seed in range(6):
            rows = datagen.sample_compare_pairs(records, seed=seed, n_pairs=5)
            assert len(rows) == 1 and rows[0]["answer"] == "(a)"

    def test_n_pairs_cap(self):
        records = self.completed_pool()
        assert len(datagen.sample_compare_pairs(records, 0, 2)) == 2

    def test_deterministic(self):
        records = self.completed_pool()
        assert datagen.sample_compare_pairs(records, 9, 10) == \
            datagen.sample_compare_pairs(records, 9, 10)

    def test_prompt_scripts_parse_back(self):
        rows = datagen.sample_compare_pairs(self.completed_pool(), 1, 10)
        for row in rows:
            body = row["prompt"].split("\n(a)\n", 1)[1]
            text_a, text_b = body.split("\n(b)\n", 1)
            dl.execute(dl.parse(text_a))
            dl.execute(dl.parse(text_b))

    def test_sides_are_shuffled(self):
        # 12 distinct-time pairs: both answers should show up.
        records = [fab(f"r{i}", i, UNI2, chain(2 + i % 5), float(i + 1))
                   for i in range(8)]
        rows = datagen.sample_compare_pairs(records, seed=2, n_pairs=28)
        answers = {row["answer"] for row in rows}
        assert answers == {"(a)", "(b)"}
