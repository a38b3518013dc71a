import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from banditlab.baselines import BGE, EXP3P, TSN, UCB1, Boltzmann, FixedArm, Thompson, UniformRandom
from banditlab.core import Observation, RandomSource

N_DRAWS = 100_000


def three_sigma(p, n=N_DRAWS):
    return 3 * math.sqrt(p * (1 - p) / n)


def frequencies(policy, K, n=N_DRAWS):
    return np.bincount([policy.select() for _ in range(n)], minlength=K) / n


def bernoulli_run(policy, means, steps, seed):
    rng = np.random.default_rng(seed)
    pulls = []
    for _ in range(steps):
        a = policy.select()
        pulls.append(a)
        policy.update(Observation(a, int(rng.random() < means[a])))
    return pulls


class TestBoltzmann:
    def test_equal_means_uniform(self):
        pol = Boltzmann(4, RandomSource(0).generator())
        pol.means = [0.4] * 4
        pol.t = 99
        assert np.all(np.abs(frequencies(pol, 4) - 0.25) <= three_sigma(0.25))

    def test_zero_rate_uniform(self):
        pol = Boltzmann(3, RandomSource(1).generator(), eta=0.0)
        pol.means = [1.0, 0.0, 0.5]
        pol.t = 50
        assert np.all(np.abs(frequencies(pol, 3) - 1 / 3) <= three_sigma(1 / 3))

    def test_large_rate_is_greedy(self):
        pol = Boltzmann(3, RandomSource(2).generator(), eta=1e6, schedule="constant")
        pol.means = [0.2, 0.9, 0.5]
        assert all(pol.select() == 1 for _ in range(1000))

    @pytest.mark.parametrize("schedule, t, expected", [("constant", 9, 2.0), ("log", 9, 2 * math.log(9)),
                                                       ("sqrt", 9, 6.0)])
    def test_schedules(self, schedule, t, expected):
        assert Boltzmann(2, RandomSource(0).generator(), eta=2.0, schedule=schedule).learning_rate(t) \
            == pytest.approx(expected)

    def test_rejects_unknown_schedule(self):
        with pytest.raises(ValueError):
            Boltzmann(2, RandomSource(0).generator(), schedule="cubic")

    def test_side_updates_optional(self):
        for use_side, counts in ((False, [1, 0]), (True, [1, 1])):
            pol = Boltzmann(2, RandomSource(0).generator(), use_side=use_side)
            pol.update(Observation(0, 1, ((1, 0),)))
            assert pol.counts == counts


class TestBGE:
    def test_default_constant(self):
        assert BGE(2, RandomSource(0).generator()).C == 0.25

    def test_cold_start(self):
        pol = BGE(4, RandomSource(0).generator())
        assert bernoulli_run(pol, [0.5] * 4, 4, 0) == [0, 1, 2, 3]

    def test_equal_state_symmetric(self):
        pol = BGE(2, RandomSource(3).generator())
        pol.means, pol.counts = [0.5, 0.5], [10, 10]
        f = frequencies(pol, 2)
        assert abs(f[0] - 0.5) <= three_sigma(0.5)

    def test_gumbel_max_logistic_law(self):
        # scale C / sqrt(N) = 1, mean gap 1: P(arm 0) = 1 / (1 + e^-1)
        pol = BGE(2, RandomSource(4).generator(), C=1.0)
        pol.means, pol.counts = [1.0, 0.0], [1, 1]
        p = 1 / (1 + math.exp(-1))
        assert p == pytest.approx(0.7311, abs=1e-4)
        assert abs(frequencies(pol, 2)[0] - p) <= three_sigma(p)

    def test_logistic_law_other_scale(self):
        pol = BGE(2, RandomSource(5).generator(), C=0.5)
        pol.means, pol.counts = [0.6, 0.4], [4, 4]
        beta = 0.5 / 2
        p = 1 / (1 + math.exp(-0.2 / beta))
        assert abs(frequencies(pol, 2)[0] - p) <= three_sigma(p)

    def test_gumbel_moments(self):
        pol = BGE(2, RandomSource(6).generator())
        z = np.array([pol.gumbel() for _ in range(N_DRAWS)])
        # mean is the Euler-Mascheroni constant, variance pi^2 / 6
        assert abs(z.mean() - 0.5772156649) < 3 * math.pi / math.sqrt(6 * N_DRAWS)
        assert z.var() == pytest.approx(math.pi**2 / 6, rel=0.03)


class TestEXP3P:
    def test_uniform_start(self):
        pol = EXP3P(5, RandomSource(0).generator(), horizon=1000)
        assert np.allclose(pol.probabilities(), 0.2, atol=1e-15)

    def test_full_mixing_stays_uniform(self):
        pol = EXP3P(3, RandomSource(1).generator(), horizon=1000, gamma=1.0)
        bernoulli_run(pol, [0.9, 0.1, 0.5], 500, 1)
        assert np.allclose(pol.probabilities(), 1 / 3, atol=1e-15)

    def test_probability_floor_and_normalisation(self):
        pol = EXP3P(4, RandomSource(2).generator(), horizon=5000)
        rng = np.random.default_rng(2)
        for _ in range(5000):
            a = pol.select()
            p = pol.probabilities()
            assert np.all(p >= pol.gamma / 4 - 1e-15)
            assert abs(p.sum() - 1) < 1e-12
            pol.update(Observation(a, int(rng.random() < [0.2, 0.4, 0.6, 0.8][a])))

    def test_tuned_defaults(self):
        pol = EXP3P(4, RandomSource(0).generator(), horizon=10_000, delta=0.01)
        n, K = 10_000, 4
        assert pol.beta == pytest.approx(math.sqrt(math.log(K / 0.01) / (n * K)))
        assert pol.eta == pytest.approx(0.95 * math.sqrt(math.log(K) / (n * K)))
        assert pol.gamma == pytest.approx(1.05 * math.sqrt(K * math.log(K) / n))

    def test_learns_best_arm(self):
        pol = EXP3P(2, RandomSource(3).generator(), horizon=20_000)
        bernoulli_run(pol, [0.9, 0.1], 20_000, 3)
        assert pol.probabilities()[0] > 0.9

    @pytest.mark.parametrize("kw", [dict(gamma=0.0), dict(gamma=1.5), dict(beta=-0.1), dict(eta=0.0),
                                    dict(delta=1.0), dict(horizon=0)])
    def test_parameter_errors(self, kw):
        args = dict(horizon=100) | kw
        with pytest.raises(ValueError):
            EXP3P(3, RandomSource(0).generator(), **args)

    def test_single_arm_rejected(self):
        with pytest.raises(ValueError):
            EXP3P(1, RandomSource(0).generator(), horizon=10)


class TestUCB1:
    def test_tie_break_lowest_index(self):
        pol = UCB1(3)
        pol.means, pol.counts, pol.t = [0.5, 0.5, 0.5], [2, 2, 2], 6
        assert pol.select() == 0

    def test_cold_start_then_index(self):
        pol = UCB1(3)
        assert bernoulli_run(pol, [0.1, 0.5, 0.9], 3, 0) == [0, 1, 2]
        pol.means, pol.counts, pol.t = [0.2, 0.8, 0.5], [5, 5, 5], 15
        assert pol.select() == 1

    def test_bonus_favours_rare_arm(self):
        pol = UCB1(2)
        pol.means, pol.counts, pol.t = [0.6, 0.5], [100, 2], 102
        assert pol.select() == 1


class TestThompson:
    def test_concentrates_on_best_arm(self):
        picks = []
        for rep in range(50):
            pol = Thompson(2, RandomSource(7, (rep,)).generator())
            bernoulli_run(pol, [0.75, 0.5], 10_000 - 1, rep)
            picks.append(pol.select() == 0)
        assert np.mean(picks) > 0.9

    def test_tsn_complete_graph_posteriors(self):
        pol = TSN(3, RandomSource(8).generator())
        assert pol.name == "tsn"
        rng = np.random.default_rng(8)
        t = 400
        for _ in range(t):
            a = pol.select()
            x = (rng.random(3) < [0.3, 0.5, 0.7]).astype(int)
            pol.update(Observation(a, int(x[a]), tuple((k, int(x[k])) for k in range(3) if k != a)))
        assert np.array_equal(pol.a + pol.b - 2, np.full(3, t))

    def test_plain_thompson_ignores_side(self):
        pol = Thompson(2, RandomSource(0).generator())
        pol.update(Observation(0, 1, ((1, 1),)))
        assert pol.a.tolist() == [2, 1]


class TestSimple:
    def test_uniform(self):
        f = frequencies(UniformRandom(4, RandomSource(9).generator()), 4)
        assert np.all(np.abs(f - 0.25) <= three_sigma(0.25))

    def test_fixed(self):
        pol = FixedArm(3, arm=2)
        assert {pol.select() for _ in range(10)} == {2}
        with pytest.raises(ValueError):
            FixedArm(3, arm=3)


FACTORIES = {
    "boltzmann": lambda rng: Boltzmann(4, rng),
    "bge": lambda rng: BGE(4, rng),
    "exp3p": lambda rng: EXP3P(4, rng, horizon=2000),
    "thompson": lambda rng: Thompson(4, rng),
    "uniform": lambda rng: UniformRandom(4, rng),
}


@pytest.mark.parametrize("name", sorted(FACTORIES))
def test_same_seed_same_actions(name):
    runs = [bernoulli_run(FACTORIES[name](RandomSource(12, ("p",)).generator()), [0.2, 0.4, 0.6, 0.8],
                          2000, 5) for _ in range(2)]
    assert runs[0] == runs[1]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=8), st.integers(0, 10**5))
def test_exp3p_distribution_proper(rewards, seed):
    K = len(rewards)
    pol = EXP3P(K, RandomSource(seed).generator(), horizon=200)
    for _ in range(50):
        a = pol.select()
        pol.update(Observation(a, rewards[a]))
        p = pol.probabilities()
        assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-12
