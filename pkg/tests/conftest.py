import numpy as np
import pytest

from mecopt import beamforming as bf


def random_delivery_instance(seed, num_bs=3, num_ue=5, nt=4, nr=2,
                             power=1.5, backhaul=1e3, link_prob=0.55):
    """Normalized-scale delivery instance with a capped random association."""
    rng = np.random.default_rng(seed)
    beta = rng.uniform(0.2, 2.0, size=(num_ue, num_bs))
    h = (rng.standard_normal((num_ue, num_bs, nr, nt))
         + 1j * rng.standard_normal((num_ue, num_bs, nr, nt))) / np.sqrt(2)
    assoc = (rng.uniform(size=(num_bs, num_ue)) < link_prob).astype(int)
    for k in range(num_ue):
        if assoc[:, k].sum() == 0:
            assoc[rng.integers(num_bs), k] = 1
    for j in range(num_bs):
        while assoc[j].sum() > nt:
            assoc[j, rng.choice(np.flatnonzero(assoc[j]))] = 0
    problem = bf.build_delivery_problem(
        beta, h, 1.0, assoc, np.full(num_bs, power),
        np.full(num_bs, backhaul))
    return problem, rng


def scalar_delivery_instance(beta=0.7, power=2.0, noise=0.9, seed=3):
    """Single BS, single UE, scalar channel."""
    rng = np.random.default_rng(seed)
    h = (rng.standard_normal((1, 1, 1, 1))
         + 1j * rng.standard_normal((1, 1, 1, 1))) / np.sqrt(2)
    problem = bf.build_delivery_problem(
        np.array([[beta]]), h, noise, np.array([[1]]), np.array([power]),
        np.array([100.0]))
    return problem, h, rng


@pytest.fixture
def rng():
    return np.random.default_rng(0)
