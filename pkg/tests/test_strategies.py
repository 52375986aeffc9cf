import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activeq.agent import QNetwork
from activeq.environment import ActionSet
from activeq.numerics import Mlp
from activeq.strategies import (
    Policy,
    binary_entropy,
    select_epsilon_greedy,
    select_greedy_q,
    select_random,
    select_uncertainty,
)


def action_set(scores, indices=None, rng=None):
    scores = np.asarray(scores, dtype=float)
    rng = rng or np.random.default_rng(0)
    feats = np.column_stack([scores, rng.uniform(0, 2, scores.size), rng.uniform(0, 2, scores.size)])
    idx = np.arange(scores.size) * 3 + 5 if indices is None else np.asarray(indices)
    return ActionSet(idx, feats)


def score_qnet(v_size=4, enc=2):
    """Q(s, a) = a[0]: the head passes the action score straight through."""
    encoder = Mlp([v_size, enc], [np.zeros((enc, v_size))], [np.zeros(enc)], output_activation="sigmoid")
    w = np.zeros((1, enc + 3))
    w[0, enc] = 1.0
    head = Mlp([enc + 3, 1], [w], [np.zeros(1)])
    return QNetwork(encoder, head)


def test_random_singleton_and_frequencies():
    rng = np.random.default_rng(0)
    assert select_random(action_set([0.3], [42]), rng) == 42
    acts = action_set(np.linspace(0, 1, 10))
    draws = [select_random(acts, rng) for _ in range(10_000)]
    _, counts = np.unique(draws, return_counts=True)
    assert counts.size == 10
    assert np.all((counts / 10_000 >= 0.07) & (counts / 10_000 <= 0.13))


def test_random_is_reproducible():
    acts = action_set(np.linspace(0, 1, 20))
    a = [select_random(acts, np.random.default_rng(3)) for _ in range(5)]
    b = [select_random(acts, np.random.default_rng(3)) for _ in range(5)]
    assert a == b


def test_uncertainty_examples():
    acts = action_set([0.9, 0.55, 0.2], [10, 11, 12])
    assert select_uncertainty(acts) == 11
    assert select_uncertainty(action_set([0.1, 0.5, 0.51], [1, 2, 3])) == 2


def test_uncertainty_ties_go_to_lowest_index():
    assert select_uncertainty(action_set([0.4, 0.6, 0.9], [7, 8, 9])) == 7


def test_entropy_oracle_agrees_with_distance_shortcut():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        p = rng.uniform(0.001, 0.999, int(rng.integers(1, 30)))
        h = [-(x * np.log(x) + (1 - x) * np.log(1 - x)) for x in p]
        assert int(np.argmax(h)) == int(np.argmin(np.abs(p - 0.5)))


def test_binary_entropy_edges():
    np.testing.assert_array_equal(binary_entropy([0.0, 1.0]), [0.0, 0.0])
    assert binary_entropy(0.5) == pytest.approx(np.log(2))


def test_empty_action_set_rejected():
    empty = ActionSet(np.array([], dtype=int), np.zeros((0, 3)))
    for call in (lambda: select_random(empty, np.random.default_rng(0)), lambda: select_uncertainty(empty)):
        with pytest.raises(ValueError, match="empty"):
            call()


def test_greedy_with_score_identity_picks_max_score():
    qnet = score_qnet()
    acts = action_set([0.2, 0.95, 0.4, 0.7], [3, 6, 9, 12])
    assert select_greedy_q(qnet, np.zeros(4), acts) == 6


def test_greedy_ignoring_actions_picks_lowest_index():
    qnet = score_qnet()
    qnet.head.weights[0][:] = 0.0
    qnet.head.biases[0][:] = -4.0
    assert select_greedy_q(qnet, np.full(4, 0.5), action_set([0.2, 0.9, 0.4], [4, 8, 15])) == 4


def test_greedy_is_shift_invariant():
    rng = np.random.default_rng(2)
    qnet = QNetwork.init(6, rng)
    s = np.sort(rng.uniform(size=6))
    acts = action_set(rng.uniform(size=25), rng=rng)
    before = select_greedy_q(qnet, s, acts)
    qnet.head.biases[-1] += 17.0
    assert select_greedy_q(qnet, s, acts) == before


def test_epsilon_extremes():
    rng = np.random.default_rng(4)
    qnet = QNetwork.init(6, rng)
    s = np.sort(rng.uniform(size=6))
    acts = action_set(rng.uniform(size=12), rng=rng)
    greedy = select_greedy_q(qnet, s, acts)
    assert all(select_epsilon_greedy(qnet, s, acts, 0.0, rng) == greedy for _ in range(50))
    draws = [select_epsilon_greedy(qnet, s, acts, 1.0, rng) for _ in range(6000)]
    assert len(set(draws)) == 12
    with pytest.raises(ValueError):
        select_epsilon_greedy(qnet, s, acts, 1.5, rng)


def test_epsilon_half_greedy_frequency():
    qnet = score_qnet()
    acts = action_set([0.1, 0.3, 0.9, 0.5, 0.2])
    rng = np.random.default_rng(5)
    greedy = select_greedy_q(qnet, np.zeros(4), acts)
    hits = sum(select_epsilon_greedy(qnet, np.zeros(4), acts, 0.5, rng) == greedy for _ in range(10_000))
    assert hits / 10_000 == pytest.approx(0.5 + 0.5 / 5, abs=0.02)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 40))
def test_every_selector_returns_offered_index(seed, n):
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(1000, n, replace=False))
    acts = ActionSet(idx, np.column_stack([rng.uniform(size=n), rng.uniform(0, 2, (n, 2))]))
    qnet = QNetwork.init(5, rng)
    s = np.sort(rng.uniform(size=5))
    offered = set(idx.tolist())
    assert select_random(acts, rng) in offered
    assert select_uncertainty(acts) in offered
    assert select_greedy_q(qnet, s, acts) in offered
    assert select_epsilon_greedy(qnet, s, acts, 0.3, rng) in offered


def test_policy_dispatch_and_validation():
    with pytest.raises(ValueError, match="unknown policy"):
        Policy("oracle")
    with pytest.raises(ValueError, match="Q-network"):
        Policy("learned_q")
    acts = action_set([0.9, 0.48, 0.2], [1, 2, 3])
    assert Policy("uncertainty").select(None, acts) == 2
    assert Policy("learned_q", score_qnet()).select(np.zeros(4), acts) == 1
    with pytest.raises(ValueError, match="rng"):
        Policy("random").select(None, acts)
    assert Policy("random").stochastic and not Policy("uncertainty").stochastic
