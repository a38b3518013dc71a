"""ABE: Boltzmann exploration interleaved with round-robin exploration.

Each outer iteration ``i`` runs a short round-robin phase of
``K * floor(c * i**alpha)`` pulls followed by a Boltzmann phase of
``K * 2**i`` pulls, where arm ``k`` is drawn with probability proportional
to ``exp(eta * sqrt(t - 1) * r_k)``.

Besides the policy, the module carries closed-form bounds on the schedule
(outer iteration number, guaranteed exploration, exploration cost) and a
vectorised verifier that checks them at every step up to a horizon.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from banditlab.core import BanditInstance, Observation, UniformBuffer

INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class AbeParams:
    """``eta`` scales the inverse temperature, ``c`` and ``alpha`` the exploration."""

    c: float = 0.1
    alpha: float = 0.7
    eta: float = 1.0

    def __post_init__(self) -> None:
        for name in ("c", "alpha", "eta"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be a finite positive number, got {value}")

    def check_verifiable(self) -> None:
        """The schedule bounds are only proven for ``0 < alpha <= 1``."""
        if self.alpha > 1:
            raise ValueError(
                f"bound verification requires alpha in (0, 1], got {self.alpha}"
            )


class Phase(enum.Enum):
    PURE = "pure"
    BOLTZMANN = "boltzmann"


def _checked(n: int, what: str) -> int:
    if n > INT64_MAX:
        raise OverflowError(f"{what} {n} exceeds the 64-bit step counter")
    return n


def exploration_repeats(i: int, c: float, alpha: float) -> int:
    """``floor(c * i**alpha)``: round-robin passes in pure phase ``i``."""
    if i < 1:
        raise ValueError("outer iterations start at 1")
    return math.floor(c * i**alpha)


def pure_phase_length(i: int, params: AbeParams, K: int) -> int:
    return K * exploration_repeats(i, params.c, params.alpha)


def boltzmann_phase_length(i: int, K: int) -> int:
    if i < 1:
        raise ValueError("outer iterations start at 1")
    return _checked(K * 2**i, "Boltzmann phase length")


def cumulative_slots(i: int, params: AbeParams, K: int) -> int:
    """Total steps elapsed at the end of outer iteration ``i`` (0 for ``i = 0``)."""
    total = 0
    for k in range(1, i + 1):
        total += pure_phase_length(k, params, K) + boltzmann_phase_length(k, K)
    return _checked(total, "cumulative slot count")


class PhaseSpan(NamedTuple):
    outer: int
    phase: Phase
    start: int  # steps completed before the phase
    length: int


def iter_phases(params: AbeParams, K: int, pure_width: int | None = None) -> Iterator[PhaseSpan]:
    """Phases in execution order, including empty pure phases.

    ``pure_width`` is the number of pulls per exploration pass (``K`` for
    plain ABE, ``len(xi)`` on a feedback graph).
    """
    width = K if pure_width is None else pure_width
    start = 0
    i = 1
    while True:
        n = width * exploration_repeats(i, params.c, params.alpha)
        yield PhaseSpan(i, Phase.PURE, start, n)
        start += n
        n = boltzmann_phase_length(i, K)
        yield PhaseSpan(i, Phase.BOLTZMANN, start, n)
        start = _checked(start + n, "step counter")
        i += 1


def locate(t: int, params: AbeParams, K: int) -> PhaseSpan:
    """The phase that contains step ``t`` (1-based)."""
    if t < 1:
        raise ValueError("steps are numbered from 1")
    for span in iter_phases(params, K):
        if span.start < t <= span.start + span.length:
            return span
    raise AssertionError("unreachable")


def boltzmann_probs(r: Sequence[float], eta: float, t: int) -> np.ndarray:
    """Softmax of ``eta * sqrt(t - 1) * r`` with max-shift stabilisation."""
    if t < 1:
        raise ValueError("t must be at least 1")
    r = np.asarray(r, dtype=float)
    if not (np.all(np.isfinite(r)) and math.isfinite(eta)):
        raise ValueError("boltzmann_probs needs finite inputs")
    z = eta * math.sqrt(t - 1) * r
    z -= z.max()
    p = np.exp(z)
    return p / p.sum()


class SoftmaxSampler(UniformBuffer):
    """Inverse-CDF draws from ``softmax(scale * values)``, one uniform per draw."""

    def sample(self, values: Sequence[float], scale: float) -> int:
        top = max(values)
        exp = math.exp
        weights = [exp(scale * (v - top)) for v in values]
        target = self.uniform() * math.fsum(weights)
        acc = 0.0
        last = 0
        for k, w in enumerate(weights):
            if w > 0.0:
                acc += w
                last = k
                if target < acc:
                    return k
        return last


@dataclass
class AbeState:
    """Mutable bookkeeping of one ABE run."""

    K: int
    t: int = 0
    outer: int = 1
    phase: Phase = Phase.PURE
    pos: int = 0
    counts: list[int] = field(default_factory=list)
    means: list[float] = field(default_factory=list)
    pure_counts: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.counts:
            self.counts = [0] * self.K
        if not self.means:
            self.means = [0.0] * self.K
        if not self.pure_counts:
            self.pure_counts = [0] * self.K

    @property
    def outer_iterations_completed(self) -> int:
        return self.outer - 1

    def observe(self, arm: int, reward: float) -> None:
        n = self.counts[arm] + 1
        self.counts[arm] = n
        self.means[arm] += (reward - self.means[arm]) / n


class ABE:
    """ABE on plain bandit feedback.

    Parameters
    ----------
    K : int
        Number of arms.
    params : AbeParams
    rng : numpy.random.Generator
        Source of the Boltzmann draws. Pure phases use no randomness.
    pure_order : sequence of int, optional
        Cyclic arm order of the exploration passes; defaults to ``0..K-1``.
    """

    name = "abe"

    def __init__(self, K: int, params: AbeParams, rng: np.random.Generator,
                 pure_order: Sequence[int] | None = None) -> None:
        if K < 1:
            raise ValueError("need at least one arm")
        self.params = params
        self.state = AbeState(K)
        self.pure_order = list(range(K)) if pure_order is None else list(pure_order)
        if sorted(self.pure_order) != list(range(K)):
            raise ValueError("pure_order must be a permutation of the arms")
        self._sampler = SoftmaxSampler(rng)
        self._phase_len = self._length(self.state.outer, self.state.phase)
        self._skip_empty()

    def _length(self, outer: int, phase: Phase) -> int:
        if phase is Phase.PURE:
            return pure_phase_length(outer, self.params, self.state.K)
        return boltzmann_phase_length(outer, self.state.K)

    def _skip_empty(self) -> None:
        while self._phase_len == 0:
            self._advance_phase()

    def _advance_phase(self) -> None:
        s = self.state
        if s.phase is Phase.PURE:
            s.phase = Phase.BOLTZMANN
        else:
            s.phase = Phase.PURE
            s.outer += 1
        s.pos = 0
        self._phase_len = self._length(s.outer, s.phase)

    @property
    def phase_length(self) -> int:
        return self._phase_len

    def select(self) -> int:
        s = self.state
        if s.phase is Phase.PURE:
            return self.pure_order[s.pos % s.K]
        # the step about to run is t + 1, so the clock factor is sqrt(t)
        return self._sampler.sample(s.means, self.params.eta * math.sqrt(s.t))

    def update(self, obs: Observation) -> None:
        """Record the pulled arm's reward; side observations are ignored."""
        s = self.state
        s.observe(obs.pulled, obs.pulled_reward)
        if s.phase is Phase.PURE:
            s.pure_counts[obs.pulled] += 1
        s.t += 1
        s.pos += 1
        if s.pos == self._phase_len:
            self._advance_phase()
            self._skip_empty()


# ---------------------------------------------------------------------------
# Bounds on the deterministic schedule and on the regret
# ---------------------------------------------------------------------------


def _log_ratio(t: float, c: float, K: int) -> float:
    return math.log2(t / (2 * (1 + 2 * c) * K))


def outer_iter_bounds(t: int, params: AbeParams, K: int) -> tuple[float, float]:
    """``(log2(t / (2(1+2c)K)), log2(t/K + 2))`` bracketing the outer iteration of ``t``."""
    params.check_verifiable()
    if t < 1:
        raise ValueError("t must be at least 1")
    return _log_ratio(t, params.c, K), math.log2(t / K + 2)


def exploration_threshold(params: AbeParams) -> float:
    return (2 * (params.alpha + 1) / params.c) ** (1 / params.alpha)


def min_pure_pulls_bound(t: int, params: AbeParams, K: int) -> tuple[bool, float]:
    """Guaranteed pull count of every arm at a Boltzmann-phase step ``t``.

    Returns ``(applicable, bound)``; the bound is meaningful only when
    ``applicable`` is true.
    """
    params.check_verifiable()
    lr = _log_ratio(t, params.c, K)
    bound = params.c / 2 * max(lr, 0.0) ** (params.alpha + 1) / (params.alpha + 1)
    applicable = lr >= exploration_threshold(params) and locate(t, params, K).phase is Phase.BOLTZMANN
    return applicable, bound


def max_pure_pulls_bound(T: int, params: AbeParams, K: int) -> float:
    """Upper bound on any arm's pure-phase pulls up to horizon ``T``."""
    if T < 1:
        raise ValueError("T must be at least 1")
    a = params.alpha
    return params.c * (math.log2(T / K + 2) + 1) ** (a + 1) / (a + 1)


def gamma_k(gap: float, params: AbeParams) -> float:
    if not gap > 0:
        raise ValueError("gap must be positive")
    a = params.alpha
    return (16 * math.log(2) / gap**2 * 2 * (a + 1) / params.c) ** (1 / a)


def suboptimal_pick_bound(t: int, gap: float, params: AbeParams, K: int) -> tuple[bool, float]:
    """Bound on the Boltzmann-phase probability of a sub-optimal arm."""
    g = gamma_k(gap, params)
    c = params.c
    bound = math.exp(-params.eta * gap * math.sqrt(t) / 2) + 128 * (1 + 2 * c) ** 2 * K**2 / (gap * t) ** 2
    return _log_ratio(t, c, K) >= g, bound


def _pow2(x: float) -> float:
    try:
        return 2.0**x
    except OverflowError:
        return math.inf


class RegretBound(NamedTuple):
    explicit: float
    exploration: float
    burn_in: float
    tail: float
    note: str


TAIL_NOTE = (
    "tail term is sum_k [8/(eta^2 gap_k) + 128(1+2c)^2 K^2 pi^2/(6 gap_k)], an explicit "
    "stand-in for the O(c^2 K^2 / gap_k) term; its constant is derived here, not quoted"
)


def regret_bound(instance: BanditInstance, params: AbeParams, T: int,
                 explored_arms: Sequence[int] | None = None) -> RegretBound:
    """Explicit regret bound; ``explored_arms`` limits the exploration term."""
    params.check_verifiable()
    if not instance.has_unique_best:
        raise ValueError("regret bounds need a unique best arm")
    K = instance.arm_count
    c, a, eta = params.c, params.alpha, params.eta
    best = instance.best_arm
    explored = set(range(K) if explored_arms is None else explored_arms)
    log_term = (math.log2(T / K + 2) + 1) ** (a + 1) / (a + 1)
    exploration = burn_in = tail = 0.0
    for k, gap in enumerate(instance.gaps):
        if k == best:
            continue
        if k in explored:
            exploration += c * gap * log_term
        burn_in += 2 * (1 + 2 * c) * K * _pow2(gamma_k(gap, params)) * gap
        tail += 8 / (eta**2 * gap) + 128 * (1 + 2 * c) ** 2 * K**2 * math.pi**2 / (6 * gap)
    return RegretBound(exploration + burn_in + tail, exploration, burn_in, tail, TAIL_NOTE)


def bandit_regret_bound(instance: BanditInstance, params: AbeParams, T: int) -> RegretBound:
    return regret_bound(instance, params, T)


# ---------------------------------------------------------------------------
# Step-by-step verification of the schedule bounds
# ---------------------------------------------------------------------------


class Violation(NamedTuple):
    t: int
    check: str
    actual: float
    bound: float


@dataclass
class ScheduleCheck:
    params: AbeParams
    K: int
    t_max: int
    steps_checked: int = 0
    lower_bound_applicable_steps: int = 0
    violation_count: dict[str, int] = field(
        default_factory=lambda: {"outer_iteration": 0, "min_pure_pulls": 0, "max_pure_pulls": 0}
    )
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(self.violation_count.values())


def verify_schedule(params: AbeParams, K: int, t_max: int, *,
                    allow_unverified: bool = False, keep: int = 100) -> ScheduleCheck:
    """Check the three schedule bounds at every step ``1..t_max``.

    * outer_iteration: ``log2(t/(2(1+2c)K)) <= i_t <= log2(t/K + 2)``.
    * min_pure_pulls: in a Boltzmann phase past the threshold, every arm's pure
      pulls so far (a lower bound on its total pulls before step ``t``)
      reach ``c/2 * L**(alpha+1) / (alpha+1)``.
    * max_pure_pulls: the largest per-arm pure-phase pull count up to ``t`` stays
      below ``c * (log2(t/K + 2) + 1)**(alpha+1) / (alpha+1)``.

    Only pass ``allow_unverified=True`` to probe ``alpha > 1``, where the
    bounds are not expected to hold.
    """
    if not allow_unverified:
        params.check_verifiable()
    if K < 1 or t_max < 1:
        raise ValueError("K and t_max must be positive")
    c, a = params.c, params.alpha
    report = ScheduleCheck(params, K, t_max)
    threshold = exploration_threshold(params)
    scale = 2 * (1 + 2 * c) * K
    pure_before = 0  # per-arm pure pulls completed before the current outer iteration

    def flag(check: str, mask: np.ndarray, ts: np.ndarray, actual, bound) -> None:
        n = int(mask.sum())
        if not n:
            return
        report.violation_count[check] += n
        room = keep - len(report.violations)
        if room <= 0:
            return
        idx = np.flatnonzero(mask)[:room]
        act = np.broadcast_to(actual, ts.shape)
        bnd = np.broadcast_to(bound, ts.shape)
        report.violations.extend(
            Violation(int(ts[j]), check, float(act[j]), float(bnd[j])) for j in idx
        )

    for span in iter_phases(params, K):
        if span.start >= t_max:
            break
        if span.length == 0:
            continue
        end = min(span.start + span.length, t_max)
        ts = np.arange(span.start + 1, end + 1, dtype=np.int64)
        tf = ts.astype(float)
        lr = np.log2(tf / scale)
        hi = np.log2(tf / K + 2)
        flag("outer_iteration", lr > span.outer, ts, float(span.outer), lr)
        flag("outer_iteration", hi < span.outer, ts, float(span.outer), hi)

        reps = exploration_repeats(span.outer, c, a)
        if span.phase is Phase.PURE:
            offset = ts - span.start
            pure_max = pure_before + (offset + K - 1) // K
        else:
            pure_max = np.full(ts.shape, pure_before + reps)
            applicable = lr >= threshold
            report.lower_bound_applicable_steps += int(applicable.sum())
            low = c / 2 * np.where(applicable, lr, 0.0) ** (a + 1) / (a + 1)
            # beginning-of-step form: pulls before t are pulls by the phase start
            flag("min_pure_pulls", applicable & (pure_max < low), ts, pure_max, low)
            pure_before += reps
        upper = c * (hi + 1) ** (a + 1) / (a + 1)
        flag("max_pure_pulls", pure_max > upper, ts, pure_max, upper)
        report.steps_checked += len(ts)
    return report
