"""Replicated regret experiments, parameter sweeps and bound verification.

Every replication ``r`` draws from streams rooted at ``(seed, r)``:

* ``(seed, r, "instance")`` picks the special arm when one is requested,
* ``(seed, r, "env")`` draws the full reward vector every step,
* ``(seed, r, "policy")`` and ``(seed, r, "discovery")`` feed the policy.

Two policies run under the same seed therefore see identical rewards, and
results do not depend on how replications are spread over workers.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence, TextIO

import numpy as np

from banditlab import baselines
from banditlab.abe import ABE, AbeParams, ScheduleCheck, verify_schedule
from banditlab.core import (
    BanditInstance,
    BernoulliEnvironment,
    FeedbackGraph,
    Observation,
    Policy,
    RandomSource,
)
from banditlab.graph_abe import GraphABE

THREADS_ENV = "BANDITLAB_THREADS"
CSV_HEADER = "t,mean_regret,stderr_regret"

POLICY_NAMES = (
    "abe", "abe-graph", "boltzmann", "bge", "bge-side", "exp3p", "ucb1",
    "thompson", "tsn", "uniform", "fixed",
)


def make_policy(name: str, K: int, source: RandomSource, horizon: int,
                params: dict[str, Any] | None = None) -> Policy:
    """Build a policy by its configuration name.

    ``source`` is the replication's root stream; policies draw from its
    ``"policy"`` child (and ``"discovery"`` for graph ABE).
    """
    p = dict(params or {})
    rng = source.child("policy").generator()

    def abe_params() -> AbeParams:
        return AbeParams(c=p.pop("c", 0.1), alpha=p.pop("alpha", 0.7), eta=p.pop("eta", 1.0))

    if name == "abe":
        policy = ABE(K, abe_params(), rng)
    elif name == "abe-graph":
        policy = GraphABE(K, abe_params(), rng, source.child("discovery").generator())
    elif name == "boltzmann":
        policy = baselines.Boltzmann(K, rng, eta=p.pop("eta", 1.0),
                                     schedule=p.pop("schedule", "sqrt"),
                                     use_side=p.pop("side", False))
    elif name in ("bge", "bge-side"):
        side = p.pop("side", name == "bge-side")
        policy = baselines.BGE(K, rng, C=p.pop("C", 0.25), use_side=bool(side))
    elif name == "exp3p":
        policy = baselines.EXP3P(K, rng, horizon, eta=p.pop("eta", None),
                                 gamma=p.pop("gamma", None), beta=p.pop("beta", None),
                                 delta=p.pop("delta", 0.01))
    elif name == "ucb1":
        policy = baselines.UCB1(K, use_side=p.pop("side", False))
    elif name == "thompson":
        policy = baselines.Thompson(K, rng, use_side=p.pop("side", False))
    elif name == "tsn":
        policy = baselines.TSN(K, rng)
    elif name == "uniform":
        policy = baselines.UniformRandom(K, rng)
    elif name == "fixed":
        policy = baselines.FixedArm(K, int(p.pop("arm", 0)))
    else:
        raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")
    if p:
        raise ValueError(f"policy {name!r} does not take parameters {sorted(p)}")
    return policy


@dataclass(frozen=True)
class ExperimentConfig:
    """One replicated experiment.

    Exactly one of ``means`` and ``special_node`` must be set. With
    ``special_node=K`` every replication draws a fresh special arm with mean
    0.75 among ``K`` arms of mean 0.5.
    """

    policy: str
    horizon: int
    means: tuple[float, ...] | None = None
    special_node: int | None = None
    policy_params: dict[str, Any] = field(default_factory=dict)
    graph: FeedbackGraph | None = None
    graph_path: str | None = None
    reps: int = 50
    seed: int = 0
    checkpoint_count: int = 100
    checkpoints: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.checkpoint_count < 2:
            raise ValueError("need at least 2 checkpoints")
        if (self.means is None) == (self.special_node is None):
            raise ValueError("give exactly one of means and special_node")
        if self.means is not None:
            object.__setattr__(self, "means", tuple(float(m) for m in self.means))
            BanditInstance(self.means)
        elif self.special_node < 2:
            raise ValueError("special-node instances need at least 2 arms")
        if self.graph is not None and self.graph.node_count != self.arm_count:
            raise ValueError(
                f"graph has {self.graph.node_count} nodes but the instance has {self.arm_count} arms"
            )
        if self.checkpoints is not None:
            cps = tuple(int(t) for t in self.checkpoints)
            if not cps or list(cps) != sorted(set(cps)) or cps[0] < 1 or cps[-1] > self.horizon:
                raise ValueError("checkpoints must be strictly increasing within [1, horizon]")
            object.__setattr__(self, "checkpoints", cps)
        if self.policy not in POLICY_NAMES:
            raise ValueError(f"unknown policy {self.policy!r}; choose from {', '.join(POLICY_NAMES)}")

    @property
    def arm_count(self) -> int:
        return len(self.means) if self.means is not None else int(self.special_node)

    def checkpoint_times(self) -> tuple[int, ...]:
        if self.checkpoints is not None:
            return self.checkpoints
        return log_checkpoints(self.horizon, self.checkpoint_count)

    def instance(self, rep: int) -> BanditInstance:
        if self.means is not None:
            return BanditInstance(self.means)
        src = RandomSource(self.seed, (rep, "instance"))
        special = int(src.generator().integers(self.special_node))
        return BanditInstance.special_node(self.special_node, special)

    def echo(self) -> dict[str, Any]:
        d = asdict(self)
        d.pop("graph")
        d["graph_edges"] = None if self.graph is None else len(self.graph.edges)
        d["directed"] = None if self.graph is None else self.graph.directed
        d["checkpoints"] = list(self.checkpoint_times())
        return d


def log_checkpoints(horizon: int, count: int = 100) -> tuple[int, ...]:
    """About ``count`` log-spaced integer times from 1 to ``horizon`` inclusive."""
    pts = np.unique(np.round(np.geomspace(1, horizon, count)).astype(np.int64))
    return tuple(int(t) for t in pts) + (() if pts[-1] == horizon else (horizon,))


def run_replication(config: ExperimentConfig, rep: int) -> np.ndarray:
    """Cumulative pseudo-regret of replication ``rep`` at each checkpoint."""
    source = RandomSource(config.seed, (rep,))
    instance = config.instance(rep)
    K = instance.arm_count
    env = BernoulliEnvironment(instance, source.child("env").generator())
    policy = make_policy(config.policy, K, source, config.horizon, config.policy_params)
    adjacency = None if config.graph is None else config.graph.adjacency()
    gaps = instance.gaps
    counts = [0] * K
    checkpoints = config.checkpoint_times()
    out = np.empty(len(checkpoints))
    next_idx = 0
    next_t = checkpoints[0]
    select, update, step = policy.select, policy.update, env.step
    for t in range(1, config.horizon + 1):
        arm = select()
        rewards = step()
        if adjacency is None or not adjacency[arm]:
            obs = Observation(arm, rewards[arm])
        else:
            obs = Observation(arm, rewards[arm], tuple((v, rewards[v]) for v in adjacency[arm]))
        update(obs)
        counts[arm] += 1
        if t == next_t:
            total = 0.0
            for g, n in zip(gaps, counts):
                total += g * n
            out[next_idx] = total
            next_idx += 1
            if next_idx == len(checkpoints):
                break
            next_t = checkpoints[next_idx]
    return out


def worker_count(reps: int) -> int:
    raw = os.environ.get(THREADS_ENV)
    n = os.cpu_count() or 1
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be at least 1")
    return max(1, min(n, reps))


def _run_one(args: tuple[ExperimentConfig, int]) -> np.ndarray:
    return run_replication(*args)


def run_replications(config: ExperimentConfig, order: Sequence[int] | None = None,
                     workers: int | None = None) -> np.ndarray:
    """``(reps, checkpoints)`` regret matrix, rows indexed by replication."""
    reps = list(range(config.reps)) if order is None else list(order)
    if sorted(reps) != list(range(config.reps)):
        raise ValueError("order must be a permutation of the replication indices")
    workers = worker_count(config.reps) if workers is None else workers
    rows = np.empty((config.reps, len(config.checkpoint_times())))
    if workers <= 1:
        for r in reps:
            rows[r] = run_replication(config, r)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for r, row in zip(reps, pool.map(_run_one, [(config, r) for r in reps])):
                rows[r] = row
    return rows


@dataclass
class ResultTable:
    t: list[int]
    mean_regret: list[float]
    stderr_regret: list[float]
    metadata: dict[str, Any] = field(default_factory=dict)

    def rows(self) -> list[tuple[int, float, float]]:
        return list(zip(self.t, self.mean_regret, self.stderr_regret))


def summarize(config: ExperimentConfig, regrets: np.ndarray,
              extra: dict[str, Any] | None = None) -> ResultTable:
    mean = regrets.mean(axis=0)
    if regrets.shape[0] > 1:
        stderr = regrets.std(axis=0, ddof=1) / math.sqrt(regrets.shape[0])
    else:
        stderr = np.zeros_like(mean)
    meta = {
        "config": config.echo(),
        "replication_streams": [[config.seed, r] for r in range(config.reps)],
    }
    if config.policy in ("bge", "bge-side"):
        meta["bge_side_updates"] = bool(
            config.policy_params.get("side", config.policy == "bge-side")
        )
    meta.update(extra or {})
    return ResultTable(list(config.checkpoint_times()), mean.tolist(), stderr.tolist(), meta)


def run_experiment(config: ExperimentConfig) -> ResultTable:
    return summarize(config, run_replications(config))


DEFAULT_GRID = ((0.1, 0.7), (0.2, 0.5), (1.0, 1.0))


def run_sweep(grid: Sequence[tuple[float, float]], config: ExperimentConfig) -> list[ResultTable]:
    """Run ``config`` once per ``(c, alpha)``; all grid points share reward paths."""
    grid = list(grid)
    if not grid:
        raise ValueError("sweep grid is empty")
    if config.policy not in ("abe", "abe-graph"):
        raise ValueError("sweeps vary (c, alpha) and need policy abe or abe-graph")
    tables = []
    for c, alpha in grid:
        AbeParams(c=c, alpha=alpha)
        cfg = replace(config, policy_params={**config.policy_params, "c": c, "alpha": alpha})
        tables.append(run_experiment(cfg))
    return tables


def verify_bounds(params: AbeParams, K: int, t_max: int) -> ScheduleCheck:
    """Walk the schedule to ``t_max`` and check the three schedule bounds."""
    params.check_verifiable()
    return verify_schedule(params, K, t_max)


def check_report(check: ScheduleCheck) -> dict[str, Any]:
    return {
        "c": check.params.c,
        "alpha": check.params.alpha,
        "arms": check.K,
        "tmax": check.t_max,
        "steps_checked": check.steps_checked,
        "lower_bound_applicable_steps": check.lower_bound_applicable_steps,
        "violation_count": dict(check.violation_count),
        "violations": [v._asdict() for v in check.violations],
        "ok": check.ok,
    }


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _num(x: float) -> str:
    return f"{x:.17g}"


def emit(table: ResultTable, fmt: str, destination: str | Path | TextIO) -> None:
    """Write ``table`` as ``csv`` or ``jsonlines``.

    JSON lines start with a metadata record; each following line is one
    checkpoint. Floats carry 17 significant digits.
    """
    if fmt not in ("csv", "jsonlines"):
        raise ValueError(f"unknown format {fmt!r}")
    if isinstance(destination, (str, Path)):
        with open(destination, "w", newline="") as fh:
            emit(table, fmt, fh)
        return
    fh = destination
    if fmt == "csv":
        fh.write(CSV_HEADER + "\n")
        for t, m, s in table.rows():
            fh.write(f"{t},{_num(m)},{_num(s)}\n")
    else:
        fh.write(json.dumps({"metadata": table.metadata}, sort_keys=True) + "\n")
        for t, m, s in table.rows():
            fh.write(json.dumps({"t": t, "mean_regret": m, "stderr_regret": s}) + "\n")


def read_csv_table(source: str | Path | TextIO) -> ResultTable:
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            return read_csv_table(fh)
    lines = source.read().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"expected header {CSV_HEADER!r}")
    t, mean, se = [], [], []
    for line in lines[1:]:
        a, b, c = line.split(",")
        t.append(int(a))
        mean.append(float(b))
        se.append(float(c))
    return ResultTable(t, mean, se)


def emit_sweep(grid: Sequence[tuple[float, float]], tables: Sequence[ResultTable], fmt: str,
               destination: str | Path) -> None:
    """Sweep output: CSV rows are prefixed by ``c,alpha``; JSON lines keep one
    metadata record per grid point."""
    with open(destination, "w", newline="") as fh:
        if fmt == "csv":
            fh.write("c,alpha," + CSV_HEADER + "\n")
            for (c, a), table in zip(grid, tables):
                for t, m, s in table.rows():
                    fh.write(f"{_num(c)},{_num(a)},{t},{_num(m)},{_num(s)}\n")
        elif fmt == "jsonlines":
            for (c, a), table in zip(grid, tables):
                fh.write(json.dumps({"metadata": table.metadata, "c": c, "alpha": a},
                                    sort_keys=True) + "\n")
                for t, m, s in table.rows():
                    fh.write(json.dumps({"c": c, "alpha": a, "t": t, "mean_regret": m,
                                         "stderr_regret": s}) + "\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")
