"""Cross-check the precoder block against an interior-point solve.

cvxpy is not a package dependency; these tests are skipped where it is
missing. They pin the consensus ADMM and the projected-gradient oracle used
in the acceptance suite against a third, structurally different solver.
"""

import warnings

import numpy as np
import pytest

cp = pytest.importorskip("cvxpy")

from mecopt import beamforming as bf
from conftest import random_delivery_instance


def cvxpy_solve(problem, m, weights):
    """min sum_k w_k eps_k over the per-BS power balls, complex QCQP."""
    g = cp.Variable((problem.num_links, problem.nt), complex=True)
    terms = []
    for k in np.flatnonzero(problem.served):
        own = np.flatnonzero(problem.own[k])
        others = np.flatnonzero(~problem.own[k])
        coherent = np.sqrt(weights[k])
        for l in own:
            coherent = coherent - cp.conj(m[k, l]) @ g[l]
        terms.append(cp.square(cp.abs(coherent)))
        for l in others:
            terms.append(cp.square(cp.abs(cp.conj(m[k, l]) @ g[l])))
    constraints = []
    for j in range(problem.num_bs):
        links = problem.links_of_bs[j]
        if links.size:
            constraints.append(
                cp.sum_squares(g[links]) <= problem.power_max[j])
    prob = cp.Problem(cp.Minimize(cp.sum(terms)), constraints)
    prob.solve()
    return prob.value


def quadratic_objective(problem, m, w, g):
    t = np.einsum("kla,la->kl", m.conj(), g)
    value = 0.0
    for k in np.flatnonzero(problem.served):
        own = problem.own[k]
        value += abs(np.sqrt(w[k]) - t[k, own].sum()) ** 2 \
            + float(np.sum(np.abs(t[k, ~own]) ** 2))
    return value


@pytest.mark.parametrize("seed", range(5))
def test_admm_matches_interior_point(seed):
    problem, rng = random_delivery_instance(seed, num_bs=2, num_ue=3, nt=3)
    state = bf.initial_state(problem, rng)
    bf._refresh_receivers(problem, state)
    bf._refresh_weights(problem, state)
    m = bf._filter_channels(problem, state)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        x, _ = bf.admm_solve(problem, state, np.zeros(problem.num_links),
                             tol=1e-6, max_iter=4000)
    f_admm = quadratic_objective(problem, m, state.weights, x)
    f_cvx = cvxpy_solve(problem, m, state.weights)
    assert f_admm == pytest.approx(f_cvx, rel=2e-3, abs=1e-6)
