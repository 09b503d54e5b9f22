"""Long-term cache placement.

Exact per-BS solvers (greedy for equal file sizes, 0/1-knapsack DP for
general sizes) plus the stochastic parallel successive-convex-approximation
best-response loop for the relaxed placement problem. Placements are global
(F, B) matrices; per-cluster blocks are column slices.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2.0)
MAX_DP_CELLS = 10_000_000


def user_cache_view(placement: np.ndarray, assoc: np.ndarray,
                    ue: int) -> np.ndarray:
    """Placement as seen by one UE: column j survives iff BS j serves it."""
    return placement * np.asarray(assoc)[None, :, ue]


def is_downloadable(placement: np.ndarray, assoc: np.ndarray,
                    ue: int, file: int) -> bool:
    """True iff some serving BS of the UE caches the file."""
    return bool((np.asarray(assoc)[:, ue] * placement[file, :]).sum() > 0)


def total_backhaul_savings(prefs_probs: np.ndarray, placement: np.ndarray,
                           assoc: np.ndarray) -> float:
    """Tr(Pbar C D): expected fraction of requests served from cache.

    Evaluated with an unoptimized einsum so the contraction accumulates in
    the same order as the scalar triple sum.
    """
    return float(np.einsum("kn,nj,jk->", np.asarray(prefs_probs, dtype=float),
                           np.asarray(placement, dtype=float),
                           np.asarray(assoc, dtype=float), optimize=False))


def check_capacity(placement: np.ndarray, capacities: np.ndarray,
                   sizes: np.ndarray, tol: float = 0.0) -> bool:
    """Per-BS capacity constraint sum_n C[n, j] * l_n <= s_j."""
    used = np.asarray(sizes, dtype=float) @ np.asarray(placement, dtype=float)
    return bool(np.all(used <= np.asarray(capacities, dtype=float) + tol))


def greedy_placement(mu_file: np.ndarray, capacities: np.ndarray,
                     sizes: np.ndarray) -> np.ndarray:
    """Cache the floor(s/l) largest-savings files per BS (equal sizes only).

    Ties broken toward the lower file index.
    """
    mu_file = np.asarray(mu_file, dtype=float)   # (B, F)
    sizes = np.asarray(sizes, dtype=float)
    if not np.all(sizes == sizes[0]):
        raise ValueError("greedy placement requires equal file sizes; "
                         "use knapsack_placement")
    num_bs, num_files = mu_file.shape
    placement = np.zeros((num_files, num_bs), dtype=int)
    for j in range(num_bs):
        budget = int(np.floor(capacities[j] / sizes[0]))
        order = np.lexsort((np.arange(num_files), -mu_file[j]))
        placement[order[:min(budget, num_files)], j] = 1
    return placement


def knapsack_placement(mu_file: np.ndarray, capacities, sizes) -> np.ndarray:
    """Exact per-BS 0/1 knapsack via DP over integer capacity.

    Among value-optimal selections the lexicographically smallest index
    set is returned. Sizes and capacities must be positive integers (bits
    quantized at the declared granularity).
    """
    mu_file = np.asarray(mu_file, dtype=float)
    sizes = [int(s) for s in np.asarray(sizes)]
    capacities = [int(c) for c in np.asarray(capacities)]
    if any(s <= 0 for s in sizes):
        raise ValueError("file sizes must be positive integers")
    if any(c < 0 for c in capacities):
        raise ValueError("capacities must be nonnegative integers")
    num_bs, num_files = mu_file.shape
    placement = np.zeros((num_files, num_bs), dtype=int)
    for j in range(num_bs):
        cap = capacities[j]
        if (cap + 1) * (num_files + 1) > MAX_DP_CELLS:
            raise ValueError(
                f"knapsack DP table for BS {j} would need "
                f"{(cap + 1) * (num_files + 1)} cells; coarsen the bit "
                f"granularity")
        # best[i][c]: optimal value using files i..F-1 with capacity c
        best = np.zeros((num_files + 1, cap + 1))
        for i in range(num_files - 1, -1, -1):
            best[i] = best[i + 1]
            if sizes[i] <= cap:
                take = mu_file[j, i] + best[i + 1, :cap - sizes[i] + 1]
                best[i, sizes[i]:] = np.maximum(best[i + 1, sizes[i]:], take)
        c = cap
        for i in range(num_files):
            if sizes[i] > c:
                continue
            take = mu_file[j, i] + best[i + 1, c - sizes[i]]
            skip = best[i + 1, c]
            # lexicographic tie-break on the sorted index tuple: on a value
            # tie the earlier index wins unless the alternative is stopping
            # entirely (the empty completion is lexicographically smallest)
            if take > skip or (take == skip and skip > 0):
                placement[i, j] = 1
                c -= sizes[i]
    return placement


def random_placement(capacities, sizes, num_files: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Baseline: fill each cache with uniformly chosen files (first fit)."""
    sizes = np.asarray(sizes, dtype=float)
    num_bs = len(capacities)
    placement = np.zeros((num_files, num_bs), dtype=int)
    for j in range(num_bs):
        left = float(capacities[j])
        for n in rng.permutation(num_files):
            if sizes[n] <= left:
                placement[n, j] = 1
                left -= sizes[n]
    return placement


# ---------------------------------------------------------------------------
# Stochastic parallel SCA over the relaxed placement polytope
# ---------------------------------------------------------------------------

@dataclass
class ScaProblem:
    """Frozen data the placement epoch optimizes against.

    Expectations over channels are replaced by the mean over a fixed sample
    set of per-link receive-side outer products, so every surrogate is
    deterministic. phi[s, k, l] is the (nr, nr) PSD matrix
    p_tx(l) * beta[k, bs(l)] * (H v)(H v)^H for sample s, receiver k and
    active link l.
    """

    prefs_probs: np.ndarray        # (K, F)
    link_ue: np.ndarray            # (L,) served UE per active link
    link_bs: np.ndarray            # (L,) BS per active link
    link_cluster: np.ndarray       # (L,) cluster of the link
    cluster_of_ue: np.ndarray      # (K,)
    cluster_of_bs: np.ndarray      # (B,)
    phi: np.ndarray                # (S, K, L, nr, nr) complex
    noise_power: float
    mu_file: np.ndarray            # (B, F) savings weights
    capacities: np.ndarray         # (B,)
    sizes: np.ndarray              # (F,)
    tradeoff: float                # lambda

    @property
    def num_users(self) -> int:
        return self.prefs_probs.shape[0]

    @property
    def num_files(self) -> int:
        return self.prefs_probs.shape[1]

    @property
    def num_bs(self) -> int:
        return self.mu_file.shape[0]

    @property
    def num_samples(self) -> int:
        return self.phi.shape[0]

    def link_weights(self, placement: np.ndarray) -> np.ndarray:
        """W[l, n] = pbar[ue(l), n]^2 * C[n, bs(l)] per active link."""
        p2 = self.prefs_probs[self.link_ue] ** 2          # (L, F)
        return p2 * placement[:, self.link_bs].T           # (L, F)

    def to_state(self, placement: np.ndarray, tau: float) -> "ScaState":
        return ScaState(relaxed=np.asarray(placement, dtype=float).copy(),
                        tau=tau)


@dataclass
class ScaState:
    """Current relaxed placement iterate and the proximal constant."""

    relaxed: np.ndarray            # (F, B) in the capacity polytope
    tau: float = 1.0
    iteration: int = 0

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be >= 0")


def _own_link_mask(problem: ScaProblem) -> np.ndarray:
    """(K, L) bool: link l carries user k's own signal."""
    return problem.link_ue[None, :] == np.arange(problem.num_users)[:, None]


def _signal_and_interference(problem: ScaProblem, placement: np.ndarray):
    """M and N = sigma^2 I + T - M per (sample, user, file), (nr, nr) each."""
    w = problem.link_weights(placement)                        # (L, F)
    own = _own_link_mask(problem)                              # (K, L)
    total = np.einsum("sklab,ln->sknab", problem.phi, w)       # (S,K,F,2,2)
    own_part = np.einsum("sklab,kl,ln->sknab", problem.phi, own.astype(float),
                         w)
    nr = problem.phi.shape[-1]
    eye = np.eye(nr)
    noise = problem.noise_power * eye
    return own_part, noise + total - own_part


def _logdet_ratio(m: np.ndarray, n: np.ndarray) -> np.ndarray:
    """log2 det(I + M N^-1) = log2 det(N+M) - log2 det(N), batched."""
    return (_logdet_psd(n + m) - _logdet_psd(n)) / LN2


def _logdet_psd(a: np.ndarray) -> np.ndarray:
    sign, logdet = np.linalg.slogdet(a)
    return logdet.real


def cluster_throughput_term(problem: ScaProblem, placement: np.ndarray,
                            clusters=None) -> float:
    """Sample-averaged sum over users of pbar-weighted log2-det rates."""
    m, n = _signal_and_interference(problem, placement)
    rate = _logdet_ratio(m, n)                                  # (S, K, F)
    per_user_file = rate.mean(axis=0)                           # (K, F)
    if clusters is not None:
        keep = np.isin(problem.cluster_of_ue, clusters)
        per_user_file = per_user_file[keep]
        probs = problem.prefs_probs[keep]
    else:
        probs = problem.prefs_probs
    return float(np.sum(probs * per_user_file))


def linear_savings_term(problem: ScaProblem, placement: np.ndarray,
                        clusters=None) -> float:
    mu = problem.mu_file
    if clusters is not None:
        keep = np.isin(problem.cluster_of_bs, clusters)
        return float(np.sum(mu[keep] * placement[:, keep].T))
    return float(np.sum(mu * placement.T))


def sca_objective_sample(problem: ScaProblem, placement: np.ndarray,
                         clusters=None) -> float:
    """Sampled utility O: lambda * throughput term + (1-lambda) * savings.

    `clusters` restricts the sum to the named clusters (needed for the
    other-cluster utility f_i); default is the whole network.
    """
    lam = problem.tradeoff
    value = (1.0 - lam) * linear_savings_term(problem, placement, clusters)
    if lam > 0:
        value += lam * cluster_throughput_term(problem, placement, clusters)
    return value


def other_cluster_utility(problem: ScaProblem, placement: np.ndarray,
                          cluster: int) -> float:
    """f_i: total sampled utility of every cluster except `cluster`."""
    others = [c for c in range(int(problem.cluster_of_bs.max()) + 1)
              if c != cluster]
    if not others:
        return 0.0
    return sca_objective_sample(problem, placement, clusters=others)


def sca_gradient(problem: ScaProblem, placement: np.ndarray,
                 cluster: int) -> np.ndarray:
    """Exact gradient of the sampled f_i w.r.t. cluster i's relaxed entries.

    C_i only enters other clusters' rates through their interference
    covariance, so the partial for entry (n, j) is the sample mean of
    pbar[k, n] * tr[((N+M)^-1 - N^-1) dN/dC_i(n, j)] / ln 2 summed over
    receivers k outside the cluster, with dN/dC_i(n, j) the pbar^2-weighted
    outer products of BS j's served-user links.
    """
    own_cols = np.flatnonzero(problem.cluster_of_bs == cluster)
    grad = np.zeros((problem.num_files, problem.num_bs))
    if problem.tradeoff == 0:
        return grad[:, own_cols]
    outside = problem.cluster_of_ue != cluster
    if not np.any(outside):
        return grad[:, own_cols]
    m, n = _signal_and_interference(problem, placement)
    delta = np.linalg.inv(n + m) - np.linalg.inv(n)     # (S, K, F, nr, nr)
    # e[s, k, f, l] = tr(delta[s, k, f] @ phi[s, k, l])
    e = np.einsum("skfab,sklba->skfl", delta, problem.phi).real
    p2 = problem.prefs_probs[problem.link_ue] ** 2       # (L, F)
    # per-receiver pbar weights, restricted to receivers outside the cluster
    pk = problem.prefs_probs * outside[:, None]          # (K, F)
    contrib = np.einsum("kf,skfl,lf->fl", pk, e, p2) / problem.num_samples
    own_links = problem.link_cluster == cluster
    for l in np.flatnonzero(own_links):
        grad[:, problem.link_bs[l]] += contrib[:, l]
    return problem.tradeoff * grad[:, own_cols] / LN2


def project_capacity_box(values: np.ndarray, capacity: float,
                         sizes: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Euclidean projection onto {0 <= c <= 1, sizes . c <= capacity}."""
    sizes = np.asarray(sizes, dtype=float)
    clipped = np.clip(values, 0.0, 1.0)
    if sizes @ clipped <= capacity + tol:
        return clipped
    lo, hi = 0.0, float(max(np.max(values / sizes), 0.0) + 1.0)
    for _ in range(200):
        nu = 0.5 * (lo + hi)
        c = np.clip(values - nu * sizes, 0.0, 1.0)
        used = sizes @ c
        if used > capacity:
            lo = nu
        else:
            hi = nu
        if hi - lo < tol:
            break
    return np.clip(values - hi * sizes, 0.0, 1.0)


def _project_cluster(problem: ScaProblem, cluster_placement: np.ndarray,
                     cols: np.ndarray) -> np.ndarray:
    out = np.empty_like(cluster_placement)
    for idx, j in enumerate(cols):
        out[:, idx] = project_capacity_box(cluster_placement[:, idx],
                                           problem.capacities[j],
                                           problem.sizes)
    return out


def sca_best_response(problem: ScaProblem, state: ScaState, cluster: int,
                      grad_norm_tol: float = 1e-6,
                      max_iters: int = 500) -> np.ndarray:
    """Maximize the strongly concave per-cluster surrogate over the polytope.

    Surrogate: O_i(C_i) + <C_i, f_i'(Cbar)> - tau/2 ||C_i - Cbar_i||^2 with
    the interference covariance frozen at Cbar. Solved by projected gradient
    ascent with backtracking to the stated projected-gradient tolerance.
    """
    if state.tau <= 0:
        raise ValueError("best response needs tau > 0 for strong concavity")
    cols = np.flatnonzero(problem.cluster_of_bs == cluster)
    base = state.relaxed.copy()
    lin = sca_gradient(problem, base, cluster)                # f_i'(Cbar)
    lin = lin + (1.0 - problem.tradeoff) * problem.mu_file[cols].T
    users = np.flatnonzero(problem.cluster_of_ue == cluster)
    own = _own_link_mask(problem)
    # frozen interference: N at Cbar, restricted to this cluster's receivers
    _, n_bar = _signal_and_interference(problem, base)
    n_frozen = n_bar[:, users]                                # (S, Ki, F, ...)
    probs_i = problem.prefs_probs[users]
    cluster_links = np.flatnonzero(problem.link_cluster == cluster)
    phi_i = problem.phi[:, users][:, :, cluster_links]        # (S,Ki,Li,...)
    own_i = own[users][:, cluster_links].astype(float)        # (Ki, Li)
    p2_i = problem.prefs_probs[problem.link_ue[cluster_links]] ** 2  # (Li,F)
    bs_of_link = problem.link_bs[cluster_links]
    col_of_bs = {j: idx for idx, j in enumerate(cols)}
    link_col = np.array([col_of_bs[j] for j in bs_of_link], dtype=int)
    lam, tau, ns = problem.tradeoff, state.tau, problem.num_samples

    def signal(c_i):
        w = p2_i * c_i[:, link_col].T                          # (Li, F)
        return np.einsum("sklab,kl,lf->skfab", phi_i, own_i, w)

    def value_and_grad(c_i):
        m = signal(c_i)
        val = float(np.sum(lin * c_i)) - 0.5 * tau * float(
            np.sum((c_i - base[:, cols]) ** 2))
        grad = lin - tau * (c_i - base[:, cols])
        if lam > 0:
            rate = _logdet_ratio(m, n_frozen)                  # (S, Ki, F)
            val += lam * float(np.sum(probs_i * rate.mean(axis=0)))
            inv = np.linalg.inv(n_frozen + m)
            e = np.einsum("skfab,sklba->skfl", inv, phi_i).real
            g = np.einsum("kf,skfl,kl,lf->fl", probs_i, e, own_i, p2_i) / ns
            gd = np.zeros_like(c_i)
            for li, col in enumerate(link_col):
                gd[:, col] += g[:, li]
            grad = grad + lam * gd / LN2
        return val, grad

    c = _project_cluster(problem, base[:, cols], cols)
    step = 1.0
    pg_norm = np.inf
    val, grad = value_and_grad(c)
    for _ in range(max_iters):
        while True:
            cand = _project_cluster(problem, c + step * grad, cols)
            cand_val, cand_grad = value_and_grad(cand)
            # Armijo on the concave surrogate
            if cand_val >= val + 1e-4 * float(np.sum(grad * (cand - c))) \
                    or step < 1e-12:
                break
            step *= 0.5
        pg_norm = float(np.linalg.norm(cand - c))
        c, val, grad = cand, cand_val, cand_grad
        step = min(step * 2.0, 1e6)
        if pg_norm < grad_norm_tol:
            break
    else:
        warnings.warn(f"best response for cluster {cluster} stopped at "
                      f"max_iters with projected step {pg_norm:.2e}")
    return c


def round_placement(relaxed: np.ndarray, capacities, sizes) -> np.ndarray:
    """Largest relaxed value first under capacity, ties by file index."""
    relaxed = np.asarray(relaxed, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    num_files, num_bs = relaxed.shape
    out = np.zeros_like(relaxed, dtype=int)
    for j in range(num_bs):
        order = np.lexsort((np.arange(num_files), -relaxed[:, j]))
        left = float(capacities[j])
        for n in order:
            if sizes[n] <= left:
                out[n, j] = 1
                left -= sizes[n]
    return out


def sca_solve(problem: ScaProblem, initial: np.ndarray, tau: float = 1.0,
              step0: float = 0.5, update_tol: float = 1e-3,
              max_outer: int = 50, trace_path=None) -> np.ndarray:
    """Jacobi loop of parallel per-cluster best responses, then rounding.

    All clusters respond to the shared iterate, which then moves by the
    diminishing step gamma_t = step0 / (1 + t). Returns a feasible binary
    placement; the relaxed trace can be written as CSV for convergence
    plots.
    """
    state = ScaState(relaxed=np.asarray(initial, dtype=float).copy(), tau=tau)
    clusters = range(int(problem.cluster_of_bs.max()) + 1)
    trace = []
    for t in range(max_outer):
        responses = {i: sca_best_response(problem, state, i)
                     for i in clusters}
        gamma = step0 / (1.0 + t)
        delta = 0.0
        for i in clusters:
            cols = np.flatnonzero(problem.cluster_of_bs == i)
            move = gamma * (responses[i] - state.relaxed[:, cols])
            state.relaxed[:, cols] += move
            delta = max(delta, float(np.abs(move).max()))
        state.iteration = t + 1
        trace.append((t, sca_objective_sample(problem, state.relaxed), gamma,
                      delta))
        if delta < update_tol:
            break
    if trace_path is not None:
        with open(trace_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "surrogate_value", "step", "update_inf"])
            for row in trace:
                w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])
    rounded = round_placement(state.relaxed, problem.capacities, problem.sizes)
    assert check_capacity(rounded, problem.capacities, problem.sizes), \
        "rounded placement violates capacity"
    return rounded
