import numpy as np
import pytest

from spanvi import Mdp


def random_mdp(n: int, m: int, seed: int, gamma: float | None = None) -> Mdp:
    """Dense random MDP, independent of the package's fixture generator.

    All transition entries are positive, so every policy's chain is ergodic;
    handy as a neutral instance for oracle cross-checks.
    """
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.1, 1.0, size=(m, n, n))
    p /= p.sum(axis=2, keepdims=True)
    r = rng.uniform(0.0, 1.0, size=(n, m))
    return Mdp(transitions=p, rewards=r, gamma=gamma)


@pytest.fixture
def dense_mdp():
    return random_mdp(6, 3, seed=123, gamma=0.9)
