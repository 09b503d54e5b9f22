"""Mixed-timescale orchestration, metrics, and Monte-Carlo sweeps.

One run = one popularity epoch: the cache placement is computed once
against the channel statistics (a fixed sample set), then every channel
realization gets its own request profile, association, and delivery solve.
Per-realization randomness comes from spawned seed sequences so results
are reproducible and order independent.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import association as assoc_mod
from . import beamforming as bf
from . import caching
from . import network as net
from . import popularity as pop

SWEEP_AXES = ("lambda", "snr", "ue", "cache")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs: network, popularity, solver knobs, grids."""

    network: net.NetworkConfig = field(default_factory=net.NetworkConfig)
    tradeoff: float = 0.5               # lambda in (0, 1)
    num_files: int = 20
    zipf_gamma: float = 0.56
    heterogeneity: float = 0.5
    cache_size: float = 4.0             # per-BS capacity in file-size units
    caching_mode: str = "greedy"        # greedy|knapsack|sca|random|none
    rate_threshold: float = 1.0         # admission threshold, bits/s/Hz
    backhaul_capacity: float = 200.0    # per BS, bits/s/Hz
    realizations: int = 10
    realizations_per_block: int = 1     # large-scale fading block length
    epochs: int = 1                     # placement re-trigger count
    cache_grid: tuple = (1.0, 2.0, 4.0, 8.0)
    snr_grid_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)
    ue_grid: tuple = (4, 6, 8, 10)
    lambda_grid: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    sca_samples: int = 20
    sca_tau: float = 1.0
    sca_step0: float = 0.5
    sca_max_outer: int = 20
    wmmse_tol: float = 1e-2
    wmmse_max_outer: int = 150
    admm_rho: float = 1.0
    admm_tol: float = 1e-4
    admm_max_iter: int = 200
    gate_by_cache: bool = False         # paper-literal delivery gating
    snr_override_db: float = None       # set by the SNR sweep
    total_ue: int = None                # set by the UE sweep
    workers: int = 1                    # parallel realization solves
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.tradeoff < 1.0:
            raise ValueError("tradeoff must lie strictly in (0, 1)")
        if self.realizations < 1:
            raise ValueError("need at least one realization")
        if self.realizations_per_block < 1 or self.epochs < 1:
            raise ValueError("block length and epochs must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        for name in ("cache_grid", "snr_grid_db", "ue_grid", "lambda_grid"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must not be empty")
        if self.caching_mode not in ("greedy", "knapsack", "sca", "random",
                                     "none"):
            raise ValueError(f"unknown caching mode {self.caching_mode!r}")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        raw = net.read_flat_config(path)
        known = {f.name for f in dataclasses.fields(net.NetworkConfig)} \
            | {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        network = net.NetworkConfig.from_file(path)
        kwargs = {"network": network}
        for f in dataclasses.fields(cls):
            if f.name == "network" or f.name not in raw:
                continue
            val = raw[f.name]
            if f.name in ("cache_grid", "snr_grid_db", "lambda_grid"):
                kwargs[f.name] = tuple(float(x) for x in val.split(","))
            elif f.name == "ue_grid":
                kwargs[f.name] = tuple(int(x) for x in val.split(","))
            elif f.name == "caching_mode":
                kwargs[f.name] = val
            elif f.name == "gate_by_cache":
                kwargs[f.name] = val.lower() in ("1", "true", "yes")
            elif f.name in ("num_files", "realizations",
                            "realizations_per_block", "epochs",
                            "sca_samples", "sca_max_outer",
                            "wmmse_max_outer", "admm_max_iter", "seed",
                            "total_ue", "workers"):
                kwargs[f.name] = int(val)
            else:
                kwargs[f.name] = float(val)
        return cls(**kwargs)

    def config_hash(self) -> str:
        payload = json.dumps(dataclasses.asdict(self), sort_keys=True,
                             default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class RealizationResult:
    """Metrics of one channel realization."""

    throughput: float
    savings: float
    weighted_objective: float
    max_backhaul_load: float
    backhaul_feasible: bool
    fetched_bits: float
    tx_power_w: float
    outer_iters: int
    converged: bool


@dataclass
class RunResult:
    """Placement plus per-realization results and their aggregates."""

    placement: np.ndarray
    realizations: list
    metrics: dict
    wall_time_s: float


@dataclass
class SweepResult:
    """One row per grid value with means over the run's realizations."""

    axis: str
    rows: list   # dicts keyed by the CSV schema below
    wall_time_s: float

    COLUMNS = ("sweep_value", "mean_weighted_objective",
               "std_weighted_objective", "mean_throughput", "std_throughput",
               "mean_savings", "std_savings", "mean_backhaul_load",
               "mean_fetched_bits", "mean_tx_power_w", "mean_outer_iters",
               "max_outer_iters", "realizations")


def weighted_objective(throughput: float, savings: float,
                       tradeoff: float) -> float:
    """lambda * throughput + (1 - lambda) * savings.

    Endpoints 0 and 1 are allowed here for diagnostics even though run
    configs keep lambda strictly inside (0, 1).
    """
    if not 0.0 <= tradeoff <= 1.0:
        raise ValueError("tradeoff must lie in [0, 1]")
    return tradeoff * throughput + (1.0 - tradeoff) * savings


def network_cost(fetched_bits: float, tx_power_w: float, weights,
                 baseline_cost: float = None) -> float:
    """Weighted sum of cloud-fetched traffic and transmit power.

    With a baseline cost the result is normalized by it (the no-cache
    reference run).
    """
    w1, w2 = weights
    if w1 < 0 or w2 < 0:
        raise ValueError("cost weights must be nonnegative")
    cost = w1 * fetched_bits + w2 * tx_power_w
    if baseline_cost is not None:
        if baseline_cost <= 0:
            raise ValueError("baseline cost must be positive")
        cost = cost / baseline_cost
    return cost


def cluster_link_mask(topo: net.Topology) -> np.ndarray:
    """(B, K) bool: BS and UE belong to the same cluster."""
    return topo.cluster_of_bs[:, None] == topo.cluster_of_ue[None, :]


def _trim_ues(topo: net.Topology, total: int) -> net.Topology:
    """Keep the first `total` UEs; prefixes nest across sweep points."""
    if total is None or total >= topo.num_ue:
        return topo
    if total < 1:
        raise ValueError("total_ue must be >= 1")
    return net.Topology(bs_positions=topo.bs_positions,
                        ue_positions=topo.ue_positions[:total],
                        cluster_of_bs=topo.cluster_of_bs,
                        cluster_of_ue=topo.cluster_of_ue[:total],
                        parent_bs=topo.parent_bs[:total])


def _power_per_bs(cfg: ExperimentConfig, beta: np.ndarray,
                  sigma2: float) -> np.ndarray:
    """Per-BS budget in watts; the SNR sweep rescales it.

    The SNR knob sets the median best-link receive SNR at full power and
    full array gain to the target, which keeps the mapping monotone in the
    target for a fixed instance.
    """
    num_bs = beta.shape[1]
    if cfg.snr_override_db is None:
        return np.full(num_bs, cfg.network.tx_power_max)
    nt_nr = cfg.network.nt * cfg.network.nr
    ref_gain = float(np.median(beta.max(axis=1))) * nt_nr
    power = sigma2 * 10.0 ** (cfg.snr_override_db / 10.0) / ref_gain
    return np.full(num_bs, power)


def _reference_association(cfg: ExperimentConfig, beta: np.ndarray,
                           power: np.ndarray, sigma2: float,
                           mask: np.ndarray) -> np.ndarray:
    """Epoch association from large-scale statistics only.

    Uses E||H||_F^2 = nt * nr in place of a realization so the placement
    epoch is deterministic given the large-scale block.
    """
    nt_nr = cfg.network.nt * cfg.network.nr
    snr = power[None, :] * beta * nt_nr / sigma2
    rates = np.log2(1.0 + snr).T
    rates = np.where(mask, rates, -np.inf)
    return assoc_mod.threshold_association(rates, cfg.rate_threshold,
                                           max_per_bs=cfg.network.nt)


def _matched_filter(h: np.ndarray) -> np.ndarray:
    """Dominant right singular vector of one (nr, nt) channel."""
    _, _, vh = np.linalg.svd(h)
    v = vh[0].conj()
    pivot = v[np.argmax(np.abs(v))]
    return v * (pivot.conj() / abs(pivot))


def build_sca_problem(cfg: ExperimentConfig, topo: net.Topology,
                      beta: np.ndarray, sigma2: float, power: np.ndarray,
                      prefs: pop.PreferenceMatrix, ref_assoc: np.ndarray,
                      capacities: np.ndarray, sizes: np.ndarray,
                      rng: np.random.Generator) -> caching.ScaProblem:
    """Sample channels and reference beamformers for the placement epoch.

    Reference delivery variables: the epoch association, matched-filter
    beamformers per serving link, equal power split per BS.
    """
    link_bs, link_ue = np.nonzero(ref_assoc)
    num_links = link_bs.size
    p_link = np.zeros(num_links)
    for j in range(topo.num_bs):
        links = np.flatnonzero(link_bs == j)
        if links.size:
            p_link[links] = power[j] / links.size
    nr = cfg.network.nr
    phi = np.zeros((cfg.sca_samples, topo.num_ue, num_links, nr, nr),
                   dtype=complex)
    for s in range(cfg.sca_samples):
        h = net.sample_small_scale(topo, cfg.network, rng)
        v = np.stack([_matched_filter(h[link_ue[l], link_bs[l]])
                      for l in range(num_links)]) if num_links else \
            np.zeros((0, cfg.network.nt), dtype=complex)
        for l in range(num_links):
            y = h[:, link_bs[l]] @ v[l]                      # (K, nr)
            y = y * np.sqrt(p_link[l] * beta[:, link_bs[l]])[:, None]
            phi[s, :, l] = np.einsum("ka,kb->kab", y, y.conj())
    mu_file = ref_assoc.astype(float) @ prefs.probs          # (B, F)
    return caching.ScaProblem(
        prefs_probs=prefs.probs, link_ue=link_ue, link_bs=link_bs,
        link_cluster=topo.cluster_of_bs[link_bs],
        cluster_of_ue=topo.cluster_of_ue, cluster_of_bs=topo.cluster_of_bs,
        phi=phi, noise_power=sigma2, mu_file=mu_file, capacities=capacities,
        sizes=sizes, tradeoff=cfg.tradeoff)


def compute_placement(cfg: ExperimentConfig, topo: net.Topology,
                      beta: np.ndarray, sigma2: float, power: np.ndarray,
                      prefs: pop.PreferenceMatrix, ref_assoc: np.ndarray,
                      capacities: np.ndarray, sizes: np.ndarray,
                      rng: np.random.Generator,
                      sca_trace_path=None) -> np.ndarray:
    """Placement epoch: delegate to the configured caching solver."""
    mu_file = ref_assoc.astype(float) @ prefs.probs
    if cfg.caching_mode == "none":
        return np.zeros((cfg.num_files, topo.num_bs), dtype=int)
    if cfg.caching_mode == "random":
        return caching.random_placement(capacities, sizes, cfg.num_files, rng)
    if cfg.caching_mode == "greedy":
        return caching.greedy_placement(mu_file, capacities, sizes)
    if cfg.caching_mode == "knapsack":
        return caching.knapsack_placement(mu_file, capacities.astype(int),
                                          sizes.astype(int))
    problem = build_sca_problem(cfg, topo, beta, sigma2, power, prefs,
                                ref_assoc, capacities, sizes, rng)
    start = caching.greedy_placement(mu_file, capacities, sizes).astype(float)
    return caching.sca_solve(problem, start, tau=cfg.sca_tau,
                             step0=cfg.sca_step0,
                             max_outer=cfg.sca_max_outer,
                             trace_path=sca_trace_path)


def run_realization(cfg: ExperimentConfig, topo: net.Topology,
                    beta: np.ndarray, sigma2: float, power: np.ndarray,
                    prefs: pop.PreferenceMatrix, placement: np.ndarray,
                    mask: np.ndarray, bh: assoc_mod.BackhaulConfig,
                    rng: np.random.Generator,
                    sample_topo: net.Topology = None) -> RealizationResult:
    """Short-term stage: association, delivery, metric accumulation.

    `sample_topo` (the untrimmed topology) keeps the channel draws
    identical for shared UEs across UE-count sweep points; rows beyond the
    trimmed user set are discarded.
    """
    h = net.sample_small_scale(sample_topo or topo, cfg.network, rng)
    h = h[:topo.num_ue]
    requests = pop.sample_request_profile(prefs, rng)
    rates_proxy = np.zeros((topo.num_bs, topo.num_ue))
    for j in range(topo.num_bs):
        gain = np.sum(np.abs(h[:, j]) ** 2, axis=(1, 2))
        rates_proxy[j] = np.log2(1.0 + power[j] * beta[:, j] * gain / sigma2)
    rates_proxy = np.where(mask, rates_proxy, -np.inf)
    base = assoc_mod.threshold_association(rates_proxy, cfg.rate_threshold,
                                           max_per_bs=cfg.network.nt)
    current = assoc_mod.content_aware_association(
        prefs.probs, placement, base, rates_proxy,
        max_per_bs=cfg.network.nt)
    gate = (placement, requests) if cfg.gate_by_cache else (None, None)
    # scale noise to 1 for solver conditioning; SINRs are invariant
    problem = bf.build_delivery_problem(
        beta / sigma2, h, 1.0, current, power,
        np.full(topo.num_bs, cfg.backhaul_capacity),
        placement=gate[0], requests=gate[1])
    solution = bf.wmmse_solve(problem, rng, tol=cfg.wmmse_tol,
                              max_outer=cfg.wmmse_max_outer,
                              rho=cfg.admm_rho, admm_tol=cfg.admm_tol,
                              admm_max_iter=cfg.admm_max_iter)
    tput = float(solution.rates.sum())
    savings = caching.total_backhaul_savings(prefs.probs, placement, current)
    load, feasible = assoc_mod.backhaul_load(current, solution.rates, bh)
    hit = placement[requests, :].T                      # (B, K)
    fetched = float(np.sum(current * (1 - hit)
                           * solution.rates[None, :]))
    return RealizationResult(
        throughput=tput, savings=savings,
        weighted_objective=weighted_objective(tput, savings, cfg.tradeoff),
        max_backhaul_load=float(load.max()) if load.size else 0.0,
        backhaul_feasible=bool(feasible.all()),
        fetched_bits=fetched,
        tx_power_w=float(solution.power_use.sum()),
        outer_iters=solution.outer_iters,
        converged=solution.converged)


def _realization_job(args):
    """Picklable wrapper: one short-term solve from its seed sequence."""
    (cfg, topo, beta, sigma2, power, prefs, placement, mask, bh, child,
     topo_full) = args
    return run_realization(cfg, topo, beta, sigma2, power, prefs, placement,
                           mask, bh, np.random.default_rng(child),
                           sample_topo=topo_full)


def mixed_timescale_solve(cfg: ExperimentConfig,
                          sca_trace_path=None) -> RunResult:
    """Placement per popularity epoch, delivery per channel realization.

    Large-scale fading is redrawn every `realizations_per_block`
    realizations; each epoch re-samples the preference matrix and re-runs
    the placement stage against the statistics of its first block. With
    several epochs the SCA trace path gets a per-epoch suffix.
    """
    t0 = time.perf_counter()
    root = np.random.SeedSequence(cfg.seed)
    topo_seq, shadow_seq, prefs_seq, epoch_seq, real_seq = root.spawn(5)
    topo_full = net.generate_topology(cfg.network,
                                      np.random.default_rng(topo_seq))
    topo = _trim_ues(topo_full, cfg.total_ue)
    sigma2 = net.noise_power(cfg.network)
    catalog = pop.Catalog(num_files=cfg.num_files)
    sizes = catalog.file_sizes
    capacities = np.full(topo.num_bs, cfg.cache_size)
    mask = cluster_link_mask(topo)
    bh = assoc_mod.BackhaulConfig(
        capacities=np.full(topo.num_bs, cfg.backhaul_capacity))
    shadow_rng = np.random.default_rng(shadow_seq)
    prefs_children = prefs_seq.spawn(cfg.epochs)
    epoch_children = epoch_seq.spawn(cfg.epochs)
    real_children = real_seq.spawn(cfg.epochs * cfg.realizations)
    num_blocks = -(-cfg.realizations // cfg.realizations_per_block)
    results = []
    placement = None
    for epoch in range(cfg.epochs):
        # draw over the full topology and trim, so shared UEs see the same
        # preferences and fading across UE-count sweep points
        prefs_full = pop.sample_preferences(
            catalog, topo_full.num_ue, cfg.zipf_gamma, cfg.heterogeneity,
            np.random.default_rng(prefs_children[epoch]))
        prefs = pop.PreferenceMatrix(
            probs=prefs_full.probs[:topo.num_ue],
            request_rates=prefs_full.request_rates[:topo.num_ue])
        betas = [net.sample_large_scale(topo_full, cfg.network,
                                        shadow_rng)[:topo.num_ue]
                 for _ in range(num_blocks)]
        power = _power_per_bs(cfg, betas[0], sigma2)
        ref_assoc = _reference_association(cfg, betas[0], power, sigma2,
                                           mask)
        trace_path = sca_trace_path
        if trace_path is not None and cfg.epochs > 1:
            trace_path = f"{trace_path}.epoch{epoch}"
        placement = compute_placement(
            cfg, topo, betas[0], sigma2, power, prefs, ref_assoc,
            capacities, sizes, np.random.default_rng(epoch_children[epoch]),
            sca_trace_path=trace_path)
        jobs = [(cfg, topo, betas[r // cfg.realizations_per_block], sigma2,
                 power, prefs, placement, mask, bh,
                 real_children[epoch * cfg.realizations + r], topo_full)
                for r in range(cfg.realizations)]
        if cfg.workers == 1:
            results.extend(_realization_job(job) for job in jobs)
        else:
            # independent pure solves; map preserves the realization order,
            # so the merge is keyed by index and worker count cannot change
            # the output
            import concurrent.futures

            with concurrent.futures.ProcessPoolExecutor(
                    max_workers=cfg.workers) as pool:
                results.extend(pool.map(_realization_job, jobs))
    metrics = _aggregate(results)
    return RunResult(placement=placement, realizations=results,
                     metrics=metrics,
                     wall_time_s=time.perf_counter() - t0)


def _aggregate(results: list) -> dict:
    def col(name):
        return np.array([getattr(r, name) for r in results], dtype=float)

    return {
        "mean_weighted_objective": float(col("weighted_objective").mean()),
        "std_weighted_objective": float(col("weighted_objective").std()),
        "mean_throughput": float(col("throughput").mean()),
        "std_throughput": float(col("throughput").std()),
        "mean_savings": float(col("savings").mean()),
        "std_savings": float(col("savings").std()),
        "mean_backhaul_load": float(col("max_backhaul_load").mean()),
        "mean_fetched_bits": float(col("fetched_bits").mean()),
        "mean_tx_power_w": float(col("tx_power_w").mean()),
        "mean_outer_iters": float(col("outer_iters").mean()),
        "max_outer_iters": int(col("outer_iters").max()),
        "realizations": len(results),
    }


def _axis_configs(cfg: ExperimentConfig, axis: str):
    """Grid of derived configs; UE sweeps share one topology draw."""
    if axis == "lambda":
        return [(v, replace(cfg, tradeoff=float(v)))
                for v in cfg.lambda_grid]
    if axis == "snr":
        return [(v, replace(cfg, snr_override_db=float(v)))
                for v in cfg.snr_grid_db]
    if axis == "cache":
        return [(v, replace(cfg, cache_size=float(v)))
                for v in cfg.cache_grid]
    if axis == "ue":
        # draw enough UEs for the largest grid point (B >= 1 always);
        # every point trims the same draw, so UE sets nest across points
        network = replace(cfg.network, ue_per_bs=max(cfg.ue_grid))
        return [(v, replace(cfg, network=network, total_ue=int(v)))
                for v in cfg.ue_grid]
    raise ValueError(f"unknown sweep axis {axis!r}; pick from {SWEEP_AXES}")


def run_sweep(cfg: ExperimentConfig, axis: str,
              csv_path=None) -> SweepResult:
    """One mixed-timescale run per grid value, common base seed.

    With csv_path set the CSV is rewritten after every grid point, so a
    failing point leaves the completed rows on disk before the error
    propagates (annotated with the failing value).
    """
    t0 = time.perf_counter()
    rows = []
    for value, point_cfg in _axis_configs(cfg, axis):
        try:
            run = mixed_timescale_solve(point_cfg)
        except Exception as exc:
            raise RuntimeError(
                f"sweep over {axis} failed at value {value} "
                f"({len(rows)} completed rows"
                + (f" flushed to {csv_path}" if csv_path else "")
                + f"): {exc}") from exc
        row = {"sweep_value": float(value)}
        row.update(run.metrics)
        rows.append(row)
        if csv_path is not None:
            write_sweep_csv(SweepResult(axis=axis, rows=rows,
                                        wall_time_s=0.0), csv_path)
    return SweepResult(axis=axis, rows=rows,
                       wall_time_s=time.perf_counter() - t0)


def write_sweep_csv(result: SweepResult, path) -> None:
    """Documented sweep schema; all values deterministic under the seed."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SweepResult.COLUMNS)
        for row in result.rows:
            w.writerow([_fmt(row[c]) for c in SweepResult.COLUMNS])


def write_run_csv(run: RunResult, path) -> None:
    """Per-realization metrics for one run."""
    cols = ("realization", "throughput", "savings", "weighted_objective",
            "max_backhaul_load", "backhaul_feasible", "fetched_bits",
            "tx_power_w", "outer_iters", "converged")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for idx, r in enumerate(run.realizations):
            w.writerow([idx] + [_fmt(getattr(r, c)) for c in cols[1:]])


def write_placement_csv(placement: np.ndarray, cluster_of_bs, path) -> None:
    """(cluster, bs_id, file_id, bit) rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cluster", "bs_id", "file_id", "bit"])
        for j in range(placement.shape[1]):
            for n in range(placement.shape[0]):
                w.writerow([int(cluster_of_bs[j]), j, n,
                            int(placement[n, j])])


def write_manifest(cfg: ExperimentConfig, path, extra: dict = None) -> None:
    """Run provenance: config hash, seed, versions, timing."""
    import scipy

    manifest = {
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "config": dataclasses.asdict(cfg),
        "versions": {"numpy": np.__version__, "scipy": scipy.__version__},
    }
    if extra:
        manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)


def _fmt(value):
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float):
        return repr(value)
    return value
