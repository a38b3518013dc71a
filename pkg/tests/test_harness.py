import io
import json
import math

import numpy as np
import pytest

from banditlab import harness
from banditlab.abe import AbeParams
from banditlab.core import FeedbackGraph
from banditlab.harness import (
    CSV_HEADER,
    ExperimentConfig,
    emit,
    log_checkpoints,
    make_policy,
    read_csv_table,
    run_experiment,
    run_replications,
    run_sweep,
    summarize,
    verify_bounds,
    worker_count,
)


def config(**kw):
    base = dict(policy="abe", horizon=2000, means=(0.75, 0.5, 0.5), reps=6, seed=3, checkpoint_count=20)
    return ExperimentConfig(**(base | kw))


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(horizon=0), dict(reps=0), dict(checkpoint_count=1),
                                    dict(means=(0.5, 1.2)), dict(policy="greedy"),
                                    dict(means=None), dict(special_node=3),
                                    dict(checkpoints=(5, 3)), dict(checkpoints=(1, 5000))])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            config(**kw)

    def test_graph_size_must_match(self):
        with pytest.raises(ValueError, match="nodes"):
            config(graph=FeedbackGraph.edgeless(4))

    def test_checkpoints_log_spaced_and_end_at_horizon(self):
        cps = log_checkpoints(10**5, 100)
        assert cps[0] == 1 and cps[-1] == 10**5
        assert list(cps) == sorted(set(cps))
        assert 50 <= len(cps) <= 101
        assert log_checkpoints(7, 100) == (1, 2, 3, 4, 5, 6, 7)

    def test_special_node_instance_per_replication(self):
        cfg = config(means=None, special_node=6)
        specials = {cfg.instance(r).best_arm for r in range(40)}
        assert len(specials) > 1
        inst = cfg.instance(0)
        assert sorted(inst.means) == [0.5] * 5 + [0.75]
        assert cfg.instance(0) == inst

    def test_make_policy_rejects_unknown_params(self):
        from banditlab.core import RandomSource

        with pytest.raises(ValueError):
            make_policy("ucb1", 3, RandomSource(0), 100, {"eta": 1.0})


class TestExperiment:
    def test_best_arm_zero_regret(self):
        table = run_experiment(config(policy="fixed", policy_params={"arm": 0}))
        assert table.mean_regret == [0.0] * len(table.t)
        assert table.stderr_regret == [0.0] * len(table.t)

    def test_uniform_policy_linear_regret(self):
        T = 4000
        table = run_experiment(config(policy="uniform", means=(0.75, 0.5), horizon=T, reps=40))
        assert abs(table.mean_regret[-1] - 0.125 * T) <= 3 * table.stderr_regret[-1]

    def test_same_seed_bit_identical(self):
        a = run_experiment(config())
        b = run_experiment(config())
        assert a == b

    def test_different_seed_differs(self):
        assert run_experiment(config()).mean_regret != run_experiment(config(seed=4)).mean_regret

    def test_order_independent(self):
        cfg = config(policy="bge")
        ref = run_replications(cfg)
        shuffled = run_replications(cfg, order=[5, 2, 0, 4, 1, 3])
        assert np.array_equal(ref, shuffled)
        with pytest.raises(ValueError):
            run_replications(cfg, order=[0, 0, 1, 2, 3, 4])

    def test_worker_count_independent(self):
        cfg = config(policy="thompson")
        assert np.array_equal(run_replications(cfg, workers=1), run_replications(cfg, workers=3))

    def test_regret_monotone(self):
        cfg = config(policy="boltzmann")
        rows = run_replications(cfg)
        assert np.all(np.diff(rows, axis=1) >= 0)
        table = summarize(cfg, rows)
        assert all(s >= 0 for s in table.stderr_regret)
        assert np.all(np.diff(table.mean_regret) >= 0)

    def test_metadata(self):
        table = run_experiment(config(policy="bge-side"))
        assert table.metadata["bge_side_updates"] is True
        assert table.metadata["replication_streams"] == [[3, r] for r in range(6)]
        assert table.metadata["config"]["policy"] == "bge-side"

    def test_graph_run_uses_side_observations(self):
        base = dict(policy="abe-graph", means=(0.75,) + (0.5,) * 4, horizon=3000, reps=8,
                    policy_params={"c": 1.0, "alpha": 1.0})
        full = run_experiment(config(graph=FeedbackGraph.complete(5), **base))
        none = run_experiment(config(graph=FeedbackGraph.edgeless(5), **base))
        assert full.mean_regret[-1] < none.mean_regret[-1]


class Recorder:
    """Pulls a fixed arm and keeps every full reward vector it is shown."""

    name = "recorder"
    seen: dict[int, list] = {}

    def __init__(self, arm):
        self.arm = arm
        self.log = Recorder.seen.setdefault(arm, [])

    def select(self):
        return self.arm

    def update(self, obs):
        self.log.append({obs.pulled: obs.pulled_reward} | dict(obs.side))


def test_common_random_numbers(monkeypatch):
    Recorder.seen = {}
    monkeypatch.setattr(harness, "make_policy", lambda name, K, source, horizon, params:
                        Recorder(params["arm"]))
    for arm in (0, 2):
        cfg = config(policy="fixed", policy_params={"arm": arm}, graph=FeedbackGraph.complete(3),
                     reps=2, horizon=500)
        run_replications(cfg, workers=1)
    assert len(Recorder.seen[0]) == 1000
    assert Recorder.seen[0] == Recorder.seen[2]


class TestSweep:
    def test_three_tables_in_grid_order(self):
        grid = [(0.1, 0.7), (0.2, 0.5), (1.0, 1.0)]
        tables = run_sweep(grid, config())
        assert len(tables) == 3
        for (c, a), table in zip(grid, tables):
            assert table.metadata["config"]["policy_params"] == {"c": c, "alpha": a}
            assert table == run_experiment(config(policy_params={"c": c, "alpha": a}))

    def test_empty_grid(self):
        with pytest.raises(ValueError, match="empty"):
            run_sweep([], config())

    def test_needs_abe(self):
        with pytest.raises(ValueError):
            run_sweep([(1, 1)], config(policy="ucb1"))


class TestVerifyBounds:
    @pytest.mark.parametrize("c, alpha, K", [(1, 1, 5), (0.5, 0.5, 2)])
    def test_examples_clean(self, c, alpha, K):
        check = verify_bounds(AbeParams(c=c, alpha=alpha), K, 10**6)
        assert check.ok and check.violations == []
        assert check.steps_checked == 10**6

    def test_alpha_range(self):
        with pytest.raises(ValueError, match="alpha"):
            verify_bounds(AbeParams(c=1, alpha=1.5), 2, 100)


class TestEmit:
    def test_csv_header_and_round_trip(self):
        table = run_experiment(config(policy="exp3p"))
        buf = io.StringIO()
        emit(table, "csv", buf)
        text = buf.getvalue()
        assert text.splitlines()[0] == CSV_HEADER == "t,mean_regret,stderr_regret"
        back = read_csv_table(io.StringIO(text))
        assert back.rows() == table.rows()

    def test_jsonlines(self):
        table = run_experiment(config())
        buf = io.StringIO()
        emit(table, "jsonlines", buf)
        lines = [json.loads(line) for line in buf.getvalue().splitlines()]
        assert lines[0]["metadata"]["config"]["seed"] == 3
        assert len(lines) == len(table.t) + 1
        assert lines[-1]["t"] == 2000
        assert lines[-1]["mean_regret"] == table.mean_regret[-1]

    def test_bad_format(self):
        with pytest.raises(ValueError):
            emit(run_experiment(config(reps=1)), "xml", io.StringIO())

    def test_full_precision(self):
        table = harness.ResultTable([1], [1 / 3], [math.pi])
        buf = io.StringIO()
        emit(table, "csv", buf)
        assert read_csv_table(io.StringIO(buf.getvalue())).rows() == [(1, 1 / 3, math.pi)]


class TestWorkers:
    def test_env_caps(self, monkeypatch):
        monkeypatch.setenv("BANDITLAB_THREADS", "3")
        assert worker_count(10) == 3
        assert worker_count(2) == 2

    @pytest.mark.parametrize("raw", ["zero", "0"])
    def test_bad_env(self, monkeypatch, raw):
        monkeypatch.setenv("BANDITLAB_THREADS", raw)
        with pytest.raises(ValueError):
            worker_count(4)
