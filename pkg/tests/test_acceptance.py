"""Acceptance suite: one test per release criterion, one PASS line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the report lines.
The trend criteria reuse the experiment harness at desk scale and dominate
the runtime (a few minutes total).
"""

import itertools
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest

from mecopt import beamforming as bf
from mecopt import caching
from mecopt import evaluation as ev
from mecopt import network as net
from mecopt import popularity as pop


def report(name, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    print(f"[{tag}] {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def clustered_instance(seed, num_clusters, num_bs, num_ue, nt=4, nr=2,
                       power=1.5):
    """Random normalized-scale instance with block (per-cluster) links."""
    rng = np.random.default_rng(seed)
    beta = rng.uniform(0.1, 2.0, size=(num_ue, num_bs))
    h = (rng.standard_normal((num_ue, num_bs, nr, nt))
         + 1j * rng.standard_normal((num_ue, num_bs, nr, nt))) / np.sqrt(2)
    cluster_of_bs = np.arange(num_bs) % num_clusters
    cluster_of_ue = np.arange(num_ue) % num_clusters
    assoc = np.zeros((num_bs, num_ue), dtype=int)
    for k in range(num_ue):
        same = np.flatnonzero(cluster_of_bs == cluster_of_ue[k])
        picks = rng.choice(same, size=min(len(same),
                                          1 + int(rng.integers(2))),
                           replace=False)
        assoc[picks, k] = 1
    for j in range(num_bs):
        while assoc[j].sum() > nt:
            assoc[j, rng.choice(np.flatnonzero(assoc[j]))] = 0
    for k in range(num_ue):
        if assoc[:, k].sum() == 0:
            same = np.flatnonzero(cluster_of_bs == cluster_of_ue[k])
            assoc[same[0], k] = 1
    problem = bf.build_delivery_problem(
        beta, h, 1.0, assoc, np.full(num_bs, power),
        np.full(num_bs, 1e3))
    return problem, rng


def acceptance_experiment(seed, **kwargs):
    network = net.NetworkConfig(bs_density=5.0, area_radius=0.6,
                                ue_per_bs=2, num_clusters=2, nt=4, nr=2,
                                shadowing_sigma=8.0)
    defaults = dict(network=network, num_files=20, zipf_gamma=0.56,
                    realizations=10, caching_mode="greedy", total_ue=10,
                    snr_override_db=10.0, wmmse_max_outer=150,
                    admm_max_iter=150, cache_grid=(1.0, 2.0, 4.0, 8.0),
                    snr_grid_db=(0.0, 5.0, 10.0, 15.0, 20.0),
                    ue_grid=(4, 6, 8, 10), seed=seed)
    defaults.update(kwargs)
    return ev.ExperimentConfig(**defaults)


class TestSolverCriteria:
    def test_wmmse_monotonicity_100_instances(self):
        start = time.perf_counter()
        worst = np.inf
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for seed in range(100):
                rng0 = np.random.default_rng(seed)
                clusters = 1 + seed % 2
                num_bs = int(rng0.integers(clusters, 5))
                num_ue = int(rng0.integers(2, 7))
                problem, rng = clustered_instance(seed, clusters,
                                                  max(num_bs, clusters),
                                                  num_ue)
                solution = bf.wmmse_solve(problem, rng, tol=1e-4,
                                          max_outer=30, admm_max_iter=150)
                surr = [row[1] for row in solution.trace]
                for a, b in zip(surr, surr[1:]):
                    worst = min(worst, b - a)
        elapsed = time.perf_counter() - start
        report("WMMSE surrogate non-decreasing on 100 instances",
               worst >= -1e-8 and elapsed < 120,
               f"min step {worst:.2e}, {elapsed:.1f}s")

    def test_mmse_receiver_beats_random_probes(self):
        worst = np.inf
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for seed in range(50):
                problem, rng = clustered_instance(seed + 500, 1 + seed % 2,
                                                  3, 4)
                state = bf.initial_state(problem, rng)
                y_all = bf._rx_signals(problem, state.precoders())
                probes = rng.standard_normal((1000, problem.nr)) \
                    + 1j * rng.standard_normal((1000, problem.nr))
                probes /= np.linalg.norm(probes, axis=1)[:, None]
                for k in range(problem.num_users):
                    u, _ = bf.mmse_receiver(problem, state, k)
                    own = problem.own[k]
                    proj_u = np.abs(y_all[k].conj() @ u) ** 2
                    best = proj_u[own].sum() / (proj_u[~own].sum()
                                                + problem.noise_power)
                    proj = np.abs(probes.conj() @ y_all[k].T) ** 2
                    sinr_probes = proj[:, own].sum(axis=1) / (
                        proj[:, ~own].sum(axis=1) + problem.noise_power)
                    worst = min(worst, best - sinr_probes.max())
        report("MMSE receiver beats 1000 random probes on 50 instances",
               worst >= -1e-9, f"worst margin {worst:.2e}")

    def test_admm_matches_centralized(self):
        worst_gap, worst_res = 0.0, 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for seed in range(20):
                problem, rng = clustered_instance(seed + 900, 1 + seed % 2,
                                                  2 + seed % 2, 3)
                state = bf.initial_state(problem, rng)
                bf._refresh_receivers(problem, state)
                bf._refresh_weights(problem, state)
                weights = np.zeros(problem.num_links)
                x, residuals = bf.admm_solve(problem, state, weights,
                                             tol=1e-5, max_iter=3000)
                m = bf._filter_channels(problem, state)
                f_admm = _quadratic_objective(problem, m, state.weights, x)
                f_pg = _projected_gradient(problem, m, state.weights,
                                           state.precoders())
                gap = abs(f_admm - f_pg) / max(abs(f_pg), 1e-12)
                worst_gap = max(worst_gap, gap)
                worst_res = max(worst_res, residuals[-1])
        report("ADMM within 1e-3 of centralized solve on 20 instances",
               worst_gap <= 1e-3 and worst_res < 1e-4,
               f"worst gap {worst_gap:.2e}, worst residual {worst_res:.2e}")


def _quadratic_objective(problem, m, w, g):
    t = np.einsum("kla,la->kl", m.conj(), g)
    value = 0.0
    for k in np.flatnonzero(problem.served):
        own = problem.own[k]
        value += abs(np.sqrt(w[k]) - t[k, own].sum()) ** 2 \
            + float(np.sum(np.abs(t[k, ~own]) ** 2))
    return value


def _projected_gradient(problem, m, w, g0, iters=6000):
    """Centralized oracle: projected gradient with backtracking."""
    served = problem.served
    g = g0.copy()

    def grad(g):
        t = np.einsum("kla,la->kl", m.conj(), g)
        out = np.zeros_like(g)
        for k in np.flatnonzero(served):
            own = problem.own[k]
            err = np.sqrt(w[k]) - t[k, own].sum()
            out[own] += -m[k, own] * err
            out[~own] += m[k, ~own] * t[k, ~own][:, None]
        return out

    def project(g):
        out = g.copy()
        for j in range(problem.num_bs):
            links = problem.links_of_bs[j]
            if not links.size:
                continue
            total = np.sum(np.abs(out[links]) ** 2)
            if total > problem.power_max[j]:
                out[links] *= np.sqrt(problem.power_max[j] / total)
        return out

    g = project(g)
    best = _quadratic_objective(problem, m, w, g)
    step = 0.5 / max(np.sum(np.abs(m) ** 2) ** 0.5, 1e-9)
    for _ in range(iters):
        cand = project(g - step * grad(g))
        val = _quadratic_objective(problem, m, w, cand)
        if val < best - 1e-15:
            g, best = cand, val
            step *= 1.05
        else:
            step *= 0.6
            if step < 1e-14:
                break
    return best


class TestCacheCriteria:
    def test_cache_solvers_match_exhaustive(self):
        rng = np.random.default_rng(0)
        checked = 0
        for _ in range(220):
            num_files = int(rng.integers(1, 13))
            mu = rng.integers(0, 256, size=(1, num_files)) / 64.0
            equal_sizes = bool(rng.integers(2))
            if equal_sizes:
                sizes = np.ones(num_files, dtype=int)
            else:
                sizes = rng.integers(1, 6, size=num_files)
            cap = int(rng.integers(0, int(sizes.sum()) + 2))
            knap = caching.knapsack_placement(mu, [cap], sizes)
            best_val = _exhaustive_best(mu[0], cap, sizes)
            assert float(mu[0] @ knap[:, 0]) == best_val
            if equal_sizes:
                greedy = caching.greedy_placement(mu, [float(cap)],
                                                  sizes.astype(float))
                assert float(mu[0] @ greedy[:, 0]) == best_val
            checked += 1
        report("greedy/knapsack equal exhaustive enumeration",
               checked >= 200, f"{checked} instances")

    def test_sca_gradient_finite_differences(self):
        cfg = acceptance_experiment(0, num_files=5, sca_samples=4,
                                    tradeoff=0.6)
        root = np.random.SeedSequence(3)
        s1, s2, s3, s4 = root.spawn(4)
        topo = net.generate_topology(cfg.network, np.random.default_rng(s1))
        topo = ev._trim_ues(topo, 8)
        beta = net.sample_large_scale(topo, cfg.network,
                                      np.random.default_rng(s2))
        sigma2 = net.noise_power(cfg.network)
        power = ev._power_per_bs(cfg, beta, sigma2)
        prefs = pop.sample_preferences(pop.Catalog(num_files=5), topo.num_ue,
                                       cfg.zipf_gamma, 1.0,
                                       np.random.default_rng(s3))
        mask = ev.cluster_link_mask(topo)
        ref = ev._reference_association(cfg, beta, power, sigma2, mask)
        problem = ev.build_sca_problem(cfg, topo, beta / sigma2, 1.0, power,
                                       prefs, ref,
                                       np.full(topo.num_bs, 2.0),
                                       np.ones(5), np.random.default_rng(s4))
        rng = np.random.default_rng(17)
        step, worst = 1e-5, 0.0
        for point in range(20):
            placement = rng.uniform(0.1, 0.9, size=(5, topo.num_bs))
            cluster = point % 2
            grad = caching.sca_gradient(problem, placement, cluster)
            cols = np.flatnonzero(problem.cluster_of_bs == cluster)
            fd = np.zeros_like(grad)
            for n in range(5):
                for ci, j in enumerate(cols):
                    up, down = placement.copy(), placement.copy()
                    up[n, j] += step
                    down[n, j] -= step
                    fd[n, ci] = (
                        caching.other_cluster_utility(problem, up, cluster)
                        - caching.other_cluster_utility(problem, down,
                                                        cluster)) / (2 * step)
            scale = max(np.max(np.abs(fd)), 1e-12)
            worst = max(worst, float(np.max(np.abs(grad - fd)) / scale))
        report("SCA gradient matches finite differences at 20 points",
               worst < 1e-4, f"worst relative error {worst:.2e}")


def _exhaustive_best(mu_row, capacity, sizes):
    best = 0.0
    for r in range(len(mu_row) + 1):
        for subset in itertools.combinations(range(len(mu_row)), r):
            if sum(sizes[i] for i in subset) > capacity:
                continue
            value = 0.0
            for i in subset:
                value += mu_row[i]
            best = max(best, value)
    return best


class TestAlgebraicCriteria:
    def test_bs_popularity_rows_and_loop_equality(self):
        rng = np.random.default_rng(1)
        worst_row = 0.0
        for _ in range(1000):
            num_users = int(rng.integers(1, 10))
            num_files = int(rng.integers(1, 10))
            num_bs = int(rng.integers(1, 7))
            probs = rng.uniform(size=(num_users, num_files))
            probs /= probs.sum(axis=1, keepdims=True)
            q = rng.uniform(0.1, 4.0, size=num_users)
            d = rng.integers(0, 2, size=(num_bs, num_users))
            prefs = pop.PreferenceMatrix(probs=probs, request_rates=q)
            got = pop.bs_popularity(prefs, d)
            want = np.zeros((num_bs, num_files))
            for j in range(num_bs):
                den = 0.0
                for k in range(num_users):
                    den += d[j, k] * q[k]
                if den > 0:
                    for n in range(num_files):
                        acc = 0.0
                        for k in range(num_users):
                            acc += d[j, k] * (q[k] * probs[k, n])
                        want[j, n] = acc / den
            assert np.array_equal(got, want)
            served = d.sum(axis=1) > 0
            if served.any():
                worst_row = max(worst_row, float(np.max(np.abs(
                    got[served].sum(axis=1) - 1.0))))
        report("per-BS popularity rows sum to 1 and equal the scalar loop",
               worst_row <= 1e-12, f"worst row error {worst_row:.2e}")

    def test_trace_identity_binary_instances(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            num_users = int(rng.integers(1, 10))
            num_files = int(rng.integers(1, 10))
            num_bs = int(rng.integers(1, 7))
            probs = rng.integers(0, 2,
                                 size=(num_users, num_files)).astype(float)
            placement = rng.integers(0, 2,
                                     size=(num_files, num_bs)).astype(float)
            d = rng.integers(0, 2, size=(num_bs, num_users)).astype(float)
            got = caching.total_backhaul_savings(probs, placement, d)
            acc = 0.0
            for k in range(num_users):
                for n in range(num_files):
                    for j in range(num_bs):
                        acc += probs[k, n] * placement[n, j] * d[j, k]
            assert got == acc
        report("trace form equals the triple sum on 1000 binary instances",
               True)


class TestTrendCriteria:
    def test_cache_size_trend_and_lambda_endpoints(self):
        start = time.perf_counter()
        verdicts = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for seed in (0, 1, 2):
                result = ev.run_sweep(acceptance_experiment(seed), "cache")
                savings = [row["mean_savings"] for row in result.rows]
                verdicts.append(all(b >= a - 1e-12
                                    for a, b in zip(savings, savings[1:])))
        # endpoint behavior of the tradeoff on the last run's metrics
        tput = result.rows[-1]["mean_throughput"]
        save = result.rows[-1]["mean_savings"]
        low = ev.weighted_objective(tput, save, 1e-12)
        high = ev.weighted_objective(tput, save, 1.0 - 1e-12)
        endpoints_ok = (abs(low - save) < 1e-6 * max(1.0, abs(save))
                        and abs(high - tput) < 1e-6 * max(1.0, abs(tput)))
        elapsed = time.perf_counter() - start
        report("mean savings non-decreasing over cache grid on every seed",
               all(verdicts) and endpoints_ok and elapsed < 600,
               f"seeds {verdicts}, endpoints {endpoints_ok}, "
               f"{elapsed:.0f}s")

    def test_snr_and_ue_trends(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            snr_rows = ev.run_sweep(acceptance_experiment(0), "snr").rows
            ue_rows = ev.run_sweep(acceptance_experiment(0), "ue").rows
        self._snr_rows, self._ue_rows = snr_rows, ue_rows
        tput_snr = [row["mean_throughput"] for row in snr_rows]
        tput_ue = [row["mean_throughput"] for row in ue_rows]
        snr_ok = all(b > a for a, b in zip(tput_snr, tput_snr[1:]))
        ue_ok = all(b >= a for a, b in zip(tput_ue, tput_ue[1:]))
        report("mean sum-rate strictly increasing in SNR",
               snr_ok, " -> ".join(f"{t:.2f}" for t in tput_snr))
        report("mean sum-rate non-decreasing in UE count",
               ue_ok, " -> ".join(f"{t:.2f}" for t in tput_ue))
        iters = [row["max_outer_iters"] for row in snr_rows + ue_rows]
        report("outer-iteration counts recorded and below 200 on all "
               "sweep points", all(0 < it < 200 for it in iters),
               f"max {max(iters)}")


class TestDeterminism:
    def test_cli_run_byte_identical(self, tmp_path):
        config = tmp_path / "exp.cfg"
        config.write_text(
            "bs_density = 5.0\narea_radius = 0.5\nue_per_bs = 1\n"
            "num_clusters = 2\nnt = 4\nnr = 2\nnum_files = 10\n"
            "realizations = 2\ncaching_mode = greedy\ncache_size = 3.0\n"
            "snr_override_db = 10.0\nwmmse_max_outer = 40\n"
            "admm_max_iter = 120\nseed = 7\n")
        outputs = []
        for run_dir in ("a", "b"):
            out = tmp_path / run_dir
            code = subprocess.run(
                [sys.executable, "-m", "mecopt.cli", "run", "--config",
                 str(config), "--out", str(out)],
                capture_output=True, text=True).returncode
            assert code == 0
            outputs.append({name.name: name.read_bytes()
                            for name in sorted(out.glob("*.csv"))})
        same = outputs[0] == outputs[1] and len(outputs[0]) >= 3
        report("mec-opt run twice yields byte-identical CSVs", same,
               f"{len(outputs[0])} files compared")
