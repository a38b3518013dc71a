"""Comparison policies.

All policies share the ``select() -> arm`` / ``update(obs)`` protocol and
break ties by the lowest arm index. Policies with a ``use_side`` flag learn
from side observations as well as from the pulled arm.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from banditlab.abe import SoftmaxSampler
from banditlab.core import Observation, UniformBuffer

GUMBEL_CLAMP = 1e-300


def _argmax(values) -> int:
    best = 0
    top = values[0]
    for k in range(1, len(values)):
        if values[k] > top:
            top = values[k]
            best = k
    return best


class _Empirical:
    """Per-arm observation counts and running means."""

    use_side = False

    def __init__(self, K: int) -> None:
        if K < 1:
            raise ValueError("need at least one arm")
        self.K = K
        self.t = 0
        self.counts = [0] * K
        self.means = [0.0] * K

    def _learn(self, arm: int, reward: float) -> None:
        n = self.counts[arm] + 1
        self.counts[arm] = n
        self.means[arm] += (reward - self.means[arm]) / n

    def update(self, obs: Observation) -> None:
        self._learn(obs.pulled, obs.pulled_reward)
        if self.use_side:
            for arm, reward in obs.side:
                self._learn(arm, reward)
        self.t += 1

    def _first_unseen(self) -> int | None:
        for k, n in enumerate(self.counts):
            if n == 0:
                return k
        return None


ETA_SCHEDULES: dict[str, Callable[[int], float]] = {
    "constant": lambda t: 1.0,
    "log": lambda t: math.log(t),
    "sqrt": lambda t: math.sqrt(t),
}


class Boltzmann(_Empirical):
    """Softmax over empirical means with inverse temperature ``eta * f(t)``."""

    name = "boltzmann"

    def __init__(self, K: int, rng: np.random.Generator, eta: float = 1.0,
                 schedule: str = "sqrt", use_side: bool = False) -> None:
        super().__init__(K)
        if eta < 0:
            raise ValueError("eta must be non-negative")
        if schedule not in ETA_SCHEDULES:
            raise ValueError(f"unknown schedule {schedule!r}; pick from {sorted(ETA_SCHEDULES)}")
        self.eta = eta
        self.schedule = schedule
        self.use_side = use_side
        self._rate = ETA_SCHEDULES[schedule]
        self._sampler = SoftmaxSampler(rng)

    def learning_rate(self, t: int) -> float:
        return self.eta * self._rate(t)

    def select(self) -> int:
        return self._sampler.sample(self.means, self.learning_rate(self.t + 1))


class BGE(_Empirical):
    """Boltzmann-Gumbel exploration.

    After one forced pull per arm, plays ``argmax_i mu_i + C * Z_i / sqrt(N_i)``
    with fresh standard Gumbel ``Z_i`` every step.
    """

    name = "bge"

    def __init__(self, K: int, rng: np.random.Generator, C: float = 0.25,
                 use_side: bool = False) -> None:
        super().__init__(K)
        if not C > 0:
            raise ValueError("C must be positive")
        self.C = C
        self.use_side = use_side
        self._uniforms = UniformBuffer(rng)

    def gumbel(self) -> float:
        u = max(self._uniforms.uniform(), GUMBEL_CLAMP)
        return -math.log(-math.log(u))

    def select(self) -> int:
        cold = self._first_unseen()
        if cold is not None:
            return cold
        C = self.C
        scores = [
            m + C * self.gumbel() / math.sqrt(n) for m, n in zip(self.means, self.counts)
        ]
        return _argmax(scores)


class EXP3P:
    """EXP3.P with biased importance-weighted gain estimates.

    ``p_i = (1 - gamma) * softmax(eta * G)_i + gamma / K`` where ``G`` sums
    the estimates ``(x_i 1{i pulled} + beta) / p_i``. Unset parameters take
    the tuned values for horizon ``n`` and confidence ``delta``:
    ``beta = sqrt(ln(K/delta) / (nK))``, ``eta = 0.95 sqrt(ln K / (nK))``,
    ``gamma = min(1, 1.05 sqrt(K ln K / n))``.
    """

    name = "exp3p"

    def __init__(self, K: int, rng: np.random.Generator, horizon: int,
                 eta: float | None = None, gamma: float | None = None,
                 beta: float | None = None, delta: float = 0.01) -> None:
        if K < 2:
            raise ValueError("EXP3.P needs at least two arms")
        if horizon < 1:
            raise ValueError("horizon must be positive")
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        n = horizon
        if beta is None:
            beta = min(1.0, math.sqrt(math.log(K / delta) / (n * K)))
        if eta is None:
            eta = 0.95 * math.sqrt(math.log(K) / (n * K))
        if gamma is None:
            gamma = min(1.0, 1.05 * math.sqrt(K * math.log(K) / n))
        if not 0 < gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
        if not 0 <= beta <= 1:
            raise ValueError(f"beta must lie in [0, 1], got {beta}")
        if not eta > 0:
            raise ValueError(f"eta must be positive, got {eta}")
        self.K = K
        self.eta, self.gamma, self.beta = eta, gamma, beta
        self.gains = np.zeros(K)
        self.t = 0
        self._uniforms = UniformBuffer(rng)
        self._p = self.probabilities()

    def probabilities(self) -> np.ndarray:
        z = self.eta * self.gains
        w = np.exp(z - z.max())
        return (1 - self.gamma) * w / w.sum() + self.gamma / self.K

    def select(self) -> int:
        self._p = p = self.probabilities()
        target = self._uniforms.uniform()
        arm = int(np.searchsorted(np.cumsum(p), target, side="right"))
        return min(arm, self.K - 1)

    def update(self, obs: Observation) -> None:
        p = self._p
        est = self.beta / p
        est[obs.pulled] += obs.pulled_reward / p[obs.pulled]
        self.gains += est
        self.t += 1


class UCB1(_Empirical):
    """``argmax mu_i + sqrt(2 ln t / N_i)`` after one pull per arm."""

    name = "ucb1"

    def __init__(self, K: int, use_side: bool = False) -> None:
        super().__init__(K)
        self.use_side = use_side

    def select(self) -> int:
        cold = self._first_unseen()
        if cold is not None:
            return cold
        bonus = 2 * math.log(max(self.t, 1))
        return _argmax([m + math.sqrt(bonus / n) for m, n in zip(self.means, self.counts)])


class Thompson:
    """Beta-Bernoulli Thompson sampling from ``Beta(1, 1)`` priors.

    Rewards in ``[0, 1]`` update ``(a, b)`` by ``(x, 1 - x)``. With
    ``use_side=True`` this is TS-N, which also updates on side observations.
    """

    name = "thompson"

    def __init__(self, K: int, rng: np.random.Generator, use_side: bool = False) -> None:
        if K < 1:
            raise ValueError("need at least one arm")
        self.K = K
        self.use_side = use_side
        self.a = np.ones(K)
        self.b = np.ones(K)
        self.t = 0
        self._rng = rng
        if use_side:
            self.name = "tsn"

    def select(self) -> int:
        return int(np.argmax(self._rng.beta(self.a, self.b)))

    def _learn(self, arm: int, reward: float) -> None:
        self.a[arm] += reward
        self.b[arm] += 1.0 - reward

    def update(self, obs: Observation) -> None:
        self._learn(obs.pulled, obs.pulled_reward)
        if self.use_side:
            for arm, reward in obs.side:
                self._learn(arm, reward)
        self.t += 1


def TSN(K: int, rng: np.random.Generator) -> Thompson:
    return Thompson(K, rng, use_side=True)


class UniformRandom:
    name = "uniform"

    def __init__(self, K: int, rng: np.random.Generator) -> None:
        self.K = K
        self._uniforms = UniformBuffer(rng)

    def select(self) -> int:
        return min(int(self._uniforms.uniform() * self.K), self.K - 1)

    def update(self, obs: Observation) -> None:
        pass


class FixedArm:
    name = "fixed"

    def __init__(self, K: int, arm: int = 0) -> None:
        if not 0 <= arm < K:
            raise ValueError(f"arm {arm} out of range")
        self.arm = arm

    def select(self) -> int:
        return self.arm

    def update(self, obs: Observation) -> None:
        pass
