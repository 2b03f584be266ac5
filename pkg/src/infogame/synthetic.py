"""Random and hand-built Gaussian sensing games for tests and demos."""
from __future__ import annotations

import numpy as np

from .game import SensingGame
from .gaussian import GaussianEngine, JointGaussian


def random_joint_gaussian(rng: np.random.Generator, sizes, n_verif: int, latent: int | None = None,
                          verification_is_state: bool = False) -> tuple[JointGaussian, list[list[int]]]:
    """Low-rank-plus-diagonal covariance over sensing points and V.

    A few shared latent factors make sensing points redundant with each
    other across agents, which is what makes coordination matter.
    """
    sizes = [int(s) for s in sizes]
    n_sense = sum(sizes)
    n = n_sense if verification_is_state else n_sense + n_verif
    k = int(latent if latent is not None else rng.integers(2, 5))
    a = rng.normal(size=(n, k))
    cov = a @ a.T / k + np.diag(rng.uniform(0.01, 0.2, size=n))
    cov = 0.5 * (cov + cov.T)
    sensing = np.arange(n_sense)
    verification = sensing.copy() if verification_is_state else np.arange(n_sense, n)
    noise = rng.uniform(0.05, 0.5, size=n_sense)
    regions, start = [], 0
    for s in sizes:
        regions.append(list(range(start, start + s)))
        start += s
    return JointGaussian(cov, sensing, verification, noise), regions


def random_instance(rng: np.random.Generator, agents=(2, 3), actions=(3, 6), n_verif=(1, 3),
                    verification_is_state: bool = False) -> tuple[JointGaussian, list[list[int]]]:
    """Draw agent count, region sizes and |V| uniformly from the inclusive ranges."""
    n_agents = int(rng.integers(agents[0], agents[1] + 1))
    sizes = rng.integers(actions[0], actions[1] + 1, size=n_agents)
    nv = int(rng.integers(n_verif[0], n_verif[1] + 1))
    return random_joint_gaussian(rng, sizes, nv, verification_is_state=verification_is_state)


def random_game(rng: np.random.Generator, agents=(2, 3), actions=(3, 6), n_verif=(1, 3),
                verification_is_state: bool = False) -> SensingGame:
    jg, regions = random_instance(rng, agents, actions, n_verif, verification_is_state)
    return SensingGame(GaussianEngine(jg), regions)


def small_state_game(rng: np.random.Generator, max_vars: int = 8) -> SensingGame:
    """V = X instance with at most ``max_vars`` variables, for submodularity checks."""
    n_agents = int(rng.integers(2, 4))
    sizes = [2] * n_agents
    spare = max_vars - sum(sizes)
    for _ in range(int(rng.integers(0, spare + 1))):
        sizes[int(rng.integers(n_agents))] += 1
    jg, regions = random_joint_gaussian(rng, sizes, 0, verification_is_state=True)
    return SensingGame(GaussianEngine(jg), regions)


def cycling_game(eps: float = 1e-3, noise: float = 0.01) -> SensingGame:
    """Two agents that each see two copies of the same pair of sources.

    V = 1.2*A + B.  Each agent can measure A or B; A alone is worth more, so
    local greedy puts both agents on A.  Simultaneous best response then
    flips both to B, then both back to A, forever.  The Nash equilibria are
    the mixed pairs (A, B) and (B, A).
    """
    # variables: A, B, V, agent0 {A-copy, B-copy}, agent1 {A-copy, B-copy}
    mix = np.zeros((7, 2))
    mix[0] = [1.0, 0.0]
    mix[1] = [0.0, 1.0]
    mix[2] = [1.2, 1.0]
    mix[3] = mix[5] = [1.0, 0.0]
    mix[4] = mix[6] = [0.0, 1.0]
    cov = mix @ mix.T + eps * np.eye(7)
    jg = JointGaussian(cov, sensing=[3, 4, 5, 6], verification=[2], noise=noise)
    return SensingGame(GaussianEngine(jg), [[0, 1], [2, 3]])
