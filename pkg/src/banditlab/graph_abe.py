"""ABE with side observations from an unknown feedback graph.

Pure-exploration phases replay a short exploration sequence ``xi``: arms
whose pulls, together with whatever those pulls reveal, cover every arm. The
sequence is found once, online, by pulling a uniformly random arm among
those not yet observed. The policy never reads the edge set. It only sees
which arms each pull revealed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from banditlab.abe import (
    AbeParams,
    AbeState,
    Phase,
    RegretBound,
    SoftmaxSampler,
    boltzmann_phase_length,
    exploration_repeats,
    regret_bound,
)
from banditlab.core import BanditInstance, FeedbackGraph, Observation

MAX_BRUTE_FORCE_NODES = 24


@dataclass(frozen=True)
class ExplorationSequence:
    """Arms pulled in every exploration pass and what each pull revealed."""

    xi: tuple[int, ...]
    covered: tuple[frozenset[int], ...]

    def __len__(self) -> int:
        return len(self.xi)

    def validate(self, K: int) -> None:
        if len(set(self.xi)) != len(self.xi):
            raise ValueError("exploration sequence repeats an arm")
        seen = set()
        for arm, cov in zip(self.xi, self.covered):
            seen.add(arm)
            seen |= cov
        if seen != set(range(K)):
            raise ValueError(f"exploration sequence misses arms {sorted(set(range(K)) - seen)}")


def _pick_uncovered(uncovered: set[int], rng: np.random.Generator) -> int:
    pool = sorted(uncovered)
    return pool[int(rng.integers(len(pool)))]


def discover_sequence(K: int, observe: Callable[[int], Iterable[int]],
                      rng: np.random.Generator) -> ExplorationSequence:
    """Build ``xi`` by repeated random pulls among not-yet-observed arms.

    ``observe(arm)`` pulls ``arm`` and returns the arms whose rewards were
    revealed (the pulled arm may or may not be included).
    """
    uncovered = set(range(K))
    xi: list[int] = []
    covered: list[frozenset[int]] = []
    while uncovered:
        arm = _pick_uncovered(uncovered, rng)
        seen = frozenset(observe(arm)) | {arm}
        xi.append(arm)
        covered.append(seen)
        uncovered -= seen
    return ExplorationSequence(tuple(xi), tuple(covered))


class GraphABE:
    """ABE on graph-structured feedback.

    Parameters
    ----------
    K : int
        Number of arms.
    params : AbeParams
    rng : numpy.random.Generator
        Boltzmann-phase draws.
    discovery_rng : numpy.random.Generator, optional
        Draws for building ``xi``. Defaults to ``rng``; pass a separate
        stream to keep the Boltzmann draws aligned with plain :class:`ABE`.
    xi : sequence of int, optional
        Use a known exploration sequence instead of discovering one.

    Notes
    -----
    Discovery runs as the first pass of the first non-empty pure phase, so
    that phase still lasts ``len(xi) * floor(c i**alpha)`` pulls. Every
    revealed reward, in either phase, updates the counts and means.
    """

    name = "abe-graph"

    def __init__(self, K: int, params: AbeParams, rng: np.random.Generator,
                 discovery_rng: np.random.Generator | None = None,
                 xi: Sequence[int] | None = None) -> None:
        if K < 1:
            raise ValueError("need at least one arm")
        self.params = params
        self.state = AbeState(K)
        self.pulls = [0] * K
        self.side_observations = 0
        self._sampler = SoftmaxSampler(rng)
        self._discovery_rng = rng if discovery_rng is None else discovery_rng
        self._uncovered = set(range(K))
        self._xi: list[int] = []
        self._covered: list[frozenset[int]] = []
        self._pending: int | None = None
        if xi is not None:
            xi = [int(a) for a in xi]
            if len(set(xi)) != len(xi) or not all(0 <= a < K for a in xi) or not xi:
                raise ValueError("xi must be a non-empty list of distinct arms")
            self._xi = xi
            self._covered = [frozenset() for _ in xi]
            self._uncovered = set()
        self._reps = exploration_repeats(1, params.c, params.alpha)
        self._skip_empty()

    @property
    def discovering(self) -> bool:
        return bool(self._uncovered)

    @property
    def sequence(self) -> ExplorationSequence | None:
        if self.discovering:
            return None
        return ExplorationSequence(tuple(self._xi), tuple(self._covered))

    @property
    def phase_length(self) -> int | None:
        """Length of the current phase; ``None`` while discovery is running."""
        s = self.state
        if s.phase is Phase.BOLTZMANN:
            return boltzmann_phase_length(s.outer, s.K)
        if self.discovering:
            return None
        return len(self._xi) * self._reps

    def _skip_empty(self) -> None:
        s = self.state
        while s.phase is Phase.PURE and self._reps == 0:
            s.phase = Phase.BOLTZMANN
            s.pos = 0

    def _advance_phase(self) -> None:
        s = self.state
        if s.phase is Phase.PURE:
            s.phase = Phase.BOLTZMANN
        else:
            s.phase = Phase.PURE
            s.outer += 1
            self._reps = exploration_repeats(s.outer, self.params.c, self.params.alpha)
        s.pos = 0
        self._skip_empty()

    def select(self) -> int:
        s = self.state
        if s.phase is Phase.PURE:
            if self.discovering:
                if self._pending is None:
                    self._pending = _pick_uncovered(self._uncovered, self._discovery_rng)
                return self._pending
            return self._xi[s.pos % len(self._xi)]
        return self._sampler.sample(s.means, self.params.eta * math.sqrt(s.t))

    def update(self, obs: Observation) -> None:
        s = self.state
        s.observe(obs.pulled, obs.pulled_reward)
        for arm, reward in obs.side:
            s.observe(arm, reward)
        self.pulls[obs.pulled] += 1
        self.side_observations += len(obs.side)
        s.t += 1
        s.pos += 1
        if s.phase is Phase.BOLTZMANN:
            if s.pos == boltzmann_phase_length(s.outer, s.K):
                self._advance_phase()
            return
        s.pure_counts[obs.pulled] += 1
        if self.discovering:
            if obs.pulled != self._pending:
                raise ValueError(
                    f"discovery expected a pull of arm {self._pending}, got {obs.pulled}"
                )
            seen = frozenset(obs.observed_arms())
            self._xi.append(obs.pulled)
            self._covered.append(seen)
            self._uncovered -= seen
            self._pending = None
            if self.discovering:
                return
        if s.pos == len(self._xi) * self._reps:
            self._advance_phase()


def brute_force_independence_number(graph: FeedbackGraph) -> int:
    """Largest edge-free vertex subset, by enumerating all ``2**K`` subsets."""
    if graph.directed:
        raise ValueError("independence number is only defined here for undirected graphs")
    K = graph.node_count
    if K > MAX_BRUTE_FORCE_NODES:
        raise ValueError(f"brute force limited to {MAX_BRUTE_FORCE_NODES} nodes, got {K}")
    masks = np.arange(1 << K, dtype=np.uint32)
    independent = np.ones(masks.shape, dtype=bool)
    for u, v in graph.edges:
        if u < v:
            both = ((masks >> np.uint32(u)) & (masks >> np.uint32(v)) & np.uint32(1)).astype(bool)
            independent &= ~both
    return int(np.bitwise_count(masks[independent]).max())


def graph_regret_bound(instance: BanditInstance, graph: FeedbackGraph, params: AbeParams,
                   T: int, xi: Sequence[int]) -> RegretBound:
    """Regret bound whose exploration term only counts sub-optimal arms in ``xi``."""
    if graph.directed:
        raise ValueError("the graph-feedback bound covers undirected graphs only")
    if graph.node_count != instance.arm_count:
        raise ValueError("graph and instance disagree on the number of arms")
    return regret_bound(instance, params, T, explored_arms=xi)
