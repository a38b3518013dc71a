"""Discrete AdaBoost.MH with decision stumps and bandit-chosen feature subsets.

Each round a bandit policy picks one block of features. The best stump on
that block is added to the strong learner, and the policy is paid
``min(1, -ln sqrt(1 - gamma))`` for the stump's edge ``gamma``.

Stumps output ``+1`` when ``x_j >= b`` and ``-1`` otherwise, so a base
learner is ``h(x) = alpha * v * phi(x)`` with ``phi`` in ``{-1, +1}``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from banditlab.core import Observation, Policy

GAMMA_CAP = 1.0 - 1e-12
EXP_CAP = 700.0


@dataclass(frozen=True)
class LabeledDataset:
    """``n`` samples, ``d`` real features, integer labels in ``[0, L)``."""

    X: np.ndarray
    labels: np.ndarray
    L: int

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("X must be a non-empty 2-D array")
        if labels.shape != (X.shape[0],):
            raise ValueError("need exactly one label per sample")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        if self.L < 1 or labels.min() < 0 or labels.max() >= self.L:
            raise ValueError(f"labels must lie in [0, {self.L})")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def y(self) -> np.ndarray:
        """``(n, L)`` matrix with ``+1`` at the true label and ``-1`` elsewhere."""
        y = -np.ones((self.n, self.L))
        y[np.arange(self.n), self.labels] = 1.0
        return y


def load_csv(path: str | Path, n_labels: int | None = None) -> LabeledDataset:
    """Header line, then rows of ``d`` features followed by an integer label."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: line {lineno} has {len(row)} fields, expected {len(header)}")
            try:
                rows.append([float(v) for v in row[:-1]] + [int(row[-1])])
            except ValueError:
                raise ValueError(f"{path}: line {lineno} is not numeric") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.array(rows, dtype=float)
    labels = arr[:, -1].astype(np.int64)
    L = int(labels.max()) + 1 if n_labels is None else n_labels
    return LabeledDataset(arr[:, :-1], labels, L)


def save_csv(data: LabeledDataset, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j}" for j in range(data.d)] + ["label"])
        for x, lab in zip(data.X, data.labels):
            w.writerow([repr(float(v)) for v in x] + [int(lab)])


@dataclass(frozen=True)
class Stump:
    feature: int
    threshold: float
    votes: tuple[int, ...]
    alpha: float = 0.0
    gamma: float = 0.0

    def output(self, X: np.ndarray) -> np.ndarray:
        return np.where(X[:, self.feature] >= self.threshold, 1.0, -1.0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        """``(n, L)`` matrix of ``alpha * v_l * phi(x)``."""
        return self.alpha * np.outer(self.output(X), self.votes)


@dataclass
class StrongLearner:
    stumps: list[Stump] = field(default_factory=list)

    def decision(self, X: np.ndarray, L: int) -> np.ndarray:
        F = np.zeros((X.shape[0], L))
        for s in self.stumps:
            F += s.predict(X)
        return F


def stump_output(stump: Stump, x: Sequence[float]) -> int:
    return 1 if x[stump.feature] >= stump.threshold else -1


def init_weights(data: LabeledDataset, scheme: str = "asymmetric") -> np.ndarray:
    """Starting weights summing to one.

    ``asymmetric`` gives ``1/(2n)`` to each true-label entry and
    ``1/(2n(L-1))`` to the others, the weighting under which the margin loss
    telescopes. ``uniform`` gives ``1/(nL)`` everywhere.
    """
    if data.L < 2:
        raise ValueError("boosting needs at least two labels")
    n, L = data.n, data.L
    if scheme == "uniform":
        return np.full((n, L), 1.0 / (n * L))
    if scheme != "asymmetric":
        raise ValueError(f"unknown weight scheme {scheme!r}")
    w = np.full((n, L), 1.0 / (2 * n * (L - 1)))
    w[np.arange(n), data.labels] = 1.0 / (2 * n)
    return w


def edge(w: np.ndarray, feature: int, threshold: float, votes: Sequence[int],
         data: LabeledDataset) -> float:
    phi = np.where(data.X[:, feature] >= threshold, 1.0, -1.0)
    return float(np.sum(w * np.asarray(votes, dtype=float)[None, :] * phi[:, None] * data.y))


def base_coefficient(gamma: float) -> float:
    g = min(max(gamma, -GAMMA_CAP), GAMMA_CAP)
    return 0.5 * math.log((1 + g) / (1 - g))


def edge_reward(gamma: float) -> float:
    g = min(gamma, GAMMA_CAP)
    return min(1.0, max(0.0, -0.5 * math.log1p(-g)))


def best_stump(features: Sequence[int], w: np.ndarray, data: LabeledDataset) -> Stump:
    """Exhaustive search over ``features`` and all distinct split points.

    Candidate thresholds for a feature are ``-inf`` (every sample votes
    ``+1``) followed by midpoints of consecutive distinct sorted values. For
    each candidate the vote of label ``l`` is the sign of that label's
    weighted correlation (``+1`` on zero), which maximises the edge. Ties go
    to the earliest feature in ``features``, then the lowest threshold.
    """
    if len(features) == 0:
        raise ValueError("feature subset is empty")
    wy = w * data.y
    total = wy.sum(axis=0)
    best = (-math.inf, None, None, None)
    for j in features:
        x = data.X[:, j]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        lower = np.cumsum(wy[order], axis=0)[:-1]
        split = np.flatnonzero(xs[:-1] < xs[1:])
        # row 0 is the -inf sentinel
        corr = np.vstack([total[None, :], total[None, :] - 2 * lower[split]])
        score = np.abs(corr).sum(axis=1)
        k = int(np.argmax(score))
        if score[k] > best[0]:
            if k == 0:
                b = -math.inf
            else:
                lo, hi = xs[split[k - 1]], xs[split[k - 1] + 1]
                b = 0.5 * (lo + hi)
                if not lo < b <= hi:
                    b = hi
            best = (float(score[k]), j, b, corr[k])
    _, j, b, corr = best
    votes = tuple(1 if c >= 0 else -1 for c in corr)
    gamma = edge(w, j, b, votes, data)
    return Stump(int(j), float(b), votes, base_coefficient(gamma), gamma)


def update_weights(w: np.ndarray, stump: Stump, data: LabeledDataset) -> tuple[np.ndarray, float]:
    """Reweight by ``exp(-h_l(x) y_l)`` and renormalise; returns ``(w, Z)``."""
    margin = stump.alpha * np.outer(stump.output(data.X), stump.votes) * data.y
    w = w * np.exp(-margin)
    Z = float(w.sum())
    return w / Z, Z


def margin_loss_scores(F: np.ndarray, data: LabeledDataset) -> tuple[float, bool]:
    """Exponential margin loss of scores ``F``; flag set if exponents were capped."""
    n, L = data.n, data.L
    expo = -F * data.y
    saturated = bool(np.any(np.abs(expo) > EXP_CAP))
    e = np.exp(np.clip(expo, -EXP_CAP, EXP_CAP))
    pos = data.y > 0
    loss = (e[pos].sum() + e[~pos].sum() / (L - 1)) / (2 * n)
    return float(loss), saturated


def margin_loss(f: StrongLearner, data: LabeledDataset) -> float:
    return margin_loss_scores(f.decision(data.X, data.L), data)[0]


def hamming_error_scores(F: np.ndarray, data: LabeledDataset) -> float:
    """Fraction of (sample, label) entries with ``F_l * y_l <= 0``."""
    return float(np.mean(F * data.y <= 0))


def one_error_scores(F: np.ndarray, data: LabeledDataset) -> float:
    """Fraction of samples whose top-scoring label (lowest index on ties) is wrong."""
    return float(np.mean(np.argmax(F, axis=1) != data.labels))


def hamming_error(f: StrongLearner, data: LabeledDataset) -> float:
    return hamming_error_scores(f.decision(data.X, data.L), data)


def one_error(f: StrongLearner, data: LabeledDataset) -> float:
    return one_error_scores(f.decision(data.X, data.L), data)


def partition_features(d: int, K: int) -> list[np.ndarray]:
    """``K`` contiguous, disjoint feature blocks whose sizes differ by at most one."""
    if not 1 <= K <= d:
        raise ValueError(f"need 1 <= K <= d, got K={K}, d={d}")
    return [np.asarray(b) for b in np.array_split(np.arange(d), K)]


class RoundResult(NamedTuple):
    stump: Stump
    reward: float
    subset: int
    Z: float


def boost_round(policy: Policy, partition: Sequence[Sequence[int]], w: np.ndarray,
                data: LabeledDataset) -> tuple[RoundResult, np.ndarray]:
    """One bandit-guided round; returns the result and the new weights."""
    subset = policy.select()
    stump = best_stump(partition[subset], w, data)
    reward = edge_reward(stump.gamma)
    policy.update(Observation(subset, reward))
    w, Z = update_weights(w, stump, data)
    return RoundResult(stump, reward, subset, Z), w


class RoundRecord(NamedTuple):
    round: int
    subset: int
    gamma: float
    reward: float
    train_loss: float
    train_err: float
    test_err: float


ROUND_FIELDS = RoundRecord._fields


@dataclass
class BoostingResult:
    learner: StrongLearner
    records: list[RoundRecord]
    normalizers: list[float]
    saturated: bool = False


def run_boosting(train: LabeledDataset, policy: Policy, partition: Sequence[Sequence[int]],
                 rounds: int, test: LabeledDataset | None = None,
                 weights: str = "asymmetric") -> BoostingResult:
    """Run ``rounds`` bandit-guided AdaBoost.MH rounds.

    Error columns are one-errors; ``test_err`` is NaN without a test set.
    """
    if rounds < 1:
        raise ValueError("rounds must be positive")
    if test is not None and (test.d != train.d or test.L != train.L):
        raise ValueError("train and test sets disagree on features or labels")
    w = init_weights(train, weights)
    learner = StrongLearner()
    F = np.zeros((train.n, train.L))
    G = None if test is None else np.zeros((test.n, test.L))
    records, zs = [], []
    saturated = False
    for r in range(1, rounds + 1):
        res, w = boost_round(policy, partition, w, train)
        learner.stumps.append(res.stump)
        zs.append(res.Z)
        F += res.stump.predict(train.X)
        loss, sat = margin_loss_scores(F, train)
        saturated |= sat
        test_err = math.nan
        if G is not None:
            G += res.stump.predict(test.X)
            test_err = one_error_scores(G, test)
        records.append(RoundRecord(r, res.subset, res.stump.gamma, res.reward, loss,
                                   one_error_scores(F, train), test_err))
    return BoostingResult(learner, records, zs, saturated)


def write_rounds(records: Sequence[RoundRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(ROUND_FIELDS) + "\n")
        for rec in records:
            fh.write(",".join(_fmt(v) for v in rec) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


# ---------------------------------------------------------------------------
# Synthetic datasets
# ---------------------------------------------------------------------------


def separable_dataset(n: int = 500, L: int = 3, informative: int = 10, noise: int = 10,
                      seed: int = 0) -> LabeledDataset:
    """Classes are disjoint intervals of a latent value.

    Each informative feature is the latent value plus jitter smaller than
    the gap between classes, so any single one of them separates the
    classes with ``L - 1`` thresholds. The remaining features are pure noise.
    """
    rng = np.random.default_rng(seed)
    labels = rng.integers(L, size=n)
    gap = 0.1  # empty fraction at each end of a class interval
    z = (labels + gap + rng.random(n) * (1 - 2 * gap)) / L
    jitter = rng.uniform(-0.5, 0.5, size=(n, informative)) * gap / L
    X = np.hstack([z[:, None] + jitter, rng.random((n, noise))])
    return LabeledDataset(X, labels, L)


def gaussian_dataset(n: int = 300, L: int = 4, d: int = 8, spread: float = 1.5,
                     seed: int = 0) -> LabeledDataset:
    """Overlapping isotropic Gaussian blobs, one per class."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=spread, size=(L, d))
    labels = rng.integers(L, size=n)
    return LabeledDataset(centers[labels] + rng.normal(size=(n, d)), labels, L)


def random_label_dataset(n: int = 200, L: int = 3, d: int = 6, seed: int = 0) -> LabeledDataset:
    """Features carry no information about the labels."""
    rng = np.random.default_rng(seed)
    return LabeledDataset(rng.random((n, d)), rng.integers(L, size=n), L)
