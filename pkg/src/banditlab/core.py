"""Environments, feedback graphs, seeded randomness and regret bookkeeping.

Every policy in the package talks to the world through the small set of
types defined here: a :class:`BanditInstance` describing Bernoulli arms, an
optional :class:`FeedbackGraph` deciding which extra rewards are revealed,
and an :class:`Observation` carrying what the policy actually gets to see.
"""

from __future__ import annotations

import io
import math
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence, TextIO

import numpy as np

__all__ = [
    "BanditInstance",
    "BernoulliEnvironment",
    "FeedbackGraph",
    "GraphFormatError",
    "Observation",
    "Policy",
    "RandomSource",
    "RegretTrace",
    "UniformBuffer",
    "draw_rewards",
    "load_graph",
    "neighbors",
    "pseudo_regret_step",
]


@dataclass(frozen=True)
class BanditInstance:
    """Bernoulli arms with known means.

    Parameters
    ----------
    means : sequence of float
        Success probability of each arm, all in ``[0, 1]``.
    require_unique_best : bool, default False
        Reject instances whose maximum mean is attained by several arms.
        Regret bounds assume a unique optimal arm; plain simulation does not.
    """

    means: tuple[float, ...]
    require_unique_best: bool = False

    def __post_init__(self) -> None:
        means = tuple(float(m) for m in self.means)
        object.__setattr__(self, "means", means)
        if len(means) < 2:
            raise ValueError("a bandit instance needs at least 2 arms")
        for k, m in enumerate(means):
            if not (0.0 <= m <= 1.0):
                raise ValueError(f"mean of arm {k} is {m}, outside [0, 1]")
        if self.require_unique_best and means.count(max(means)) > 1:
            raise ValueError("the best arm is not unique")

    @property
    def arm_count(self) -> int:
        return len(self.means)

    @property
    def best_arm(self) -> int:
        # lowest index among maximisers
        return int(np.argmax(self.means))

    @property
    def best_mean(self) -> float:
        return self.means[self.best_arm]

    @property
    def gaps(self) -> tuple[float, ...]:
        best = self.best_mean
        return tuple(best - m for m in self.means)

    @property
    def has_unique_best(self) -> bool:
        return self.means.count(self.best_mean) == 1

    @classmethod
    def special_node(cls, arm_count: int, special: int, high: float = 0.75,
                     low: float = 0.5) -> "BanditInstance":
        """One arm with mean ``high`` and all others with mean ``low``."""
        if not 0 <= special < arm_count:
            raise ValueError(f"special arm {special} out of range for {arm_count} arms")
        means = [low] * arm_count
        means[special] = high
        return cls(tuple(means))


@dataclass(frozen=True)
class FeedbackGraph:
    """Side-observation structure over ``node_count`` arms.

    ``edges`` holds ordered pairs ``(u, v)`` meaning "pulling ``u`` reveals
    the reward of ``v``". Undirected graphs are stored symmetrised.
    """

    node_count: int
    edges: frozenset[tuple[int, int]] = frozenset()
    directed: bool = False
    _adjacency: tuple[tuple[int, ...], ...] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        if self.node_count < 1:
            raise ValueError("a graph needs at least one node")
        edges = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            for x in (u, v):
                if not 0 <= x < self.node_count:
                    raise ValueError(f"node {x} out of range [0, {self.node_count})")
            edges.add((u, v))
            if not self.directed:
                edges.add((v, u))
        object.__setattr__(self, "edges", frozenset(edges))
        adj: list[list[int]] = [[] for _ in range(self.node_count)]
        for u, v in edges:
            adj[u].append(v)
        object.__setattr__(
            self, "_adjacency", tuple(tuple(sorted(a)) for a in adj)
        )

    @classmethod
    def edgeless(cls, node_count: int) -> "FeedbackGraph":
        return cls(node_count)

    @classmethod
    def complete(cls, node_count: int) -> "FeedbackGraph":
        return cls(
            node_count,
            frozenset((u, v) for u in range(node_count) for v in range(node_count) if u != v),
        )

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[tuple[int, int]],
                   directed: bool = False) -> "FeedbackGraph":
        return cls(node_count, frozenset((int(u), int(v)) for u, v in edges), directed)

    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        """Sorted out-neighbour lists, one per node."""
        return self._adjacency


@dataclass(frozen=True)
class Observation:
    """What a policy sees after one pull."""

    pulled: int
    pulled_reward: float
    side: tuple[tuple[int, float], ...] = ()

    def __post_init__(self) -> None:
        arms = [a for a, _ in self.side]
        if self.pulled in arms:
            raise ValueError("the pulled arm cannot also be a side observation")
        if len(set(arms)) != len(arms):
            raise ValueError("side observations must use distinct arms")

    def observed_arms(self) -> tuple[int, ...]:
        return (self.pulled,) + tuple(a for a, _ in self.side)


def _stream_key(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError("stream identifiers must be non-negative")
    return int(part)


@dataclass(frozen=True)
class RandomSource:
    """A named, reproducible random stream.

    The stream is fully determined by ``(seed, stream)``. ``stream`` is a
    path of integers or strings; :meth:`child` extends the path, giving an
    independent stream (numpy ``SeedSequence`` spawn keys underneath).
    """

    seed: int
    stream: tuple[int | str, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def child(self, *parts: int | str) -> "RandomSource":
        return RandomSource(self.seed, self.stream + tuple(parts))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            int(self.seed), spawn_key=tuple(_stream_key(p) for p in self.stream)
        )
        return np.random.Generator(np.random.PCG64(seq))


def draw_rewards(instance: BanditInstance, rng: np.random.Generator) -> np.ndarray:
    """One full reward vector: an independent Bernoulli draw for every arm."""
    u = rng.random(instance.arm_count)
    return (u < np.asarray(instance.means)).astype(np.int8)


class BernoulliEnvironment:
    """Stream of full reward vectors, drawn in blocks for speed.

    Equivalent to calling :func:`draw_rewards` once per step on the same
    generator: a ``(block, K)`` uniform array consumes the stream in the same
    order as ``block`` calls of size ``K``.
    """

    def __init__(self, instance: BanditInstance, rng: np.random.Generator,
                 block: int = 2048) -> None:
        self.instance = instance
        self._rng = rng
        self._block = block
        self._means = np.asarray(instance.means)
        self._rows: list[list[int]] = []
        self._pos = 0

    def step(self) -> list[int]:
        if self._pos == len(self._rows):
            u = self._rng.random((self._block, self.instance.arm_count))
            self._rows = (u < self._means).astype(np.int8).tolist()
            self._pos = 0
        row = self._rows[self._pos]
        self._pos += 1
        return row


class UniformBuffer:
    """Uniform(0, 1) draws served from blocks of a numpy generator.

    The draw sequence does not depend on how calls are interleaved, so two
    buffers on equal generators produce equal sequences.
    """

    def __init__(self, rng: np.random.Generator, block: int = 4096) -> None:
        self._rng = rng
        self._block = block
        self._buf: list[float] = []
        self._pos = 0

    def uniform(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self._rng.random(self._block).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


class Policy(Protocol):
    """What the harness and the boosting loop expect from a bandit policy."""

    name: str

    def select(self) -> int: ...

    def update(self, obs: Observation) -> None: ...


def pseudo_regret_step(instance: BanditInstance, pulled: int) -> float:
    """Expected shortfall of pulling ``pulled`` instead of the best arm."""
    if not 0 <= pulled < instance.arm_count:
        raise IndexError(f"arm {pulled} out of range [0, {instance.arm_count})")
    return instance.best_mean - instance.means[pulled]


def neighbors(graph: FeedbackGraph, arm: int) -> frozenset[int]:
    if not 0 <= arm < graph.node_count:
        raise IndexError(f"arm {arm} out of range [0, {graph.node_count})")
    return frozenset(graph.adjacency()[arm])


class GraphFormatError(ValueError):
    """Malformed graph file; ``line`` is 1-based."""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


def load_graph(text: str | TextIO, node_count: int, directed: bool = False) -> FeedbackGraph:
    """Parse a whitespace separated ``u v`` edge list.

    Blank lines and lines starting with ``#`` are skipped. Node ids are
    0-based and must lie in ``[0, node_count)``.
    """
    stream = io.StringIO(text) if isinstance(text, str) else text
    edges = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(lineno, f"expected 'u v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(lineno, f"non-integer node id in {line!r}") from None
        if u == v:
            raise GraphFormatError(lineno, f"self-loop on node {u}")
        for x in (u, v):
            if not 0 <= x < node_count:
                raise GraphFormatError(lineno, f"node {x} out of range [0, {node_count})")
        edges.append((u, v))
    return FeedbackGraph.from_edges(node_count, edges, directed)


@dataclass
class RegretTrace:
    """Cumulative pseudo-regret sampled at increasing time steps."""

    checkpoints: list[tuple[int, float]] = field(default_factory=list)

    def record(self, t: int, cum_regret: float) -> None:
        if self.checkpoints:
            last_t, last_r = self.checkpoints[-1]
            if t <= last_t:
                raise ValueError("checkpoint times must be strictly increasing")
            if cum_regret < last_r:
                raise ValueError("cumulative regret cannot decrease")
        if cum_regret < 0 or math.isnan(cum_regret):
            raise ValueError("cumulative regret must be non-negative")
        self.checkpoints.append((int(t), float(cum_regret)))

    def times(self) -> list[int]:
        return [t for t, _ in self.checkpoints]

    def values(self) -> list[float]:
        return [r for _, r in self.checkpoints]


def regret_from_counts(gaps: Sequence[float], counts: Sequence[int]) -> float:
    """``sum_k gap_k * pulls_k``, accumulated in arm order."""
    total = 0.0
    for g, n in zip(gaps, counts):
        total += g * n
    return total
