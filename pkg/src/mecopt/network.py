"""Network topology, clustering, and wireless channel generation.

All physical-layer constants live here and every dB/dBm quantity is
converted to linear units at the boundary; downstream math is linear.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields

import numpy as np

# 3GPP TR 36.814 macro pathloss, d in km
PATHLOSS_INTERCEPT_DB = 148.1
PATHLOSS_SLOPE_DB = 37.6


@dataclass(frozen=True)
class NetworkConfig:
    """Static network parameters (counts, powers, propagation constants)."""

    bs_density: float = 5.0          # BS per km^2
    area_radius: float = 1.0         # km, disc radius of the service area
    ue_per_bs: int = 2               # UEs dropped around each BS
    exclusion_radius: float = 0.035  # km, inner circle with no UEs
    num_clusters: int = 2            # M
    nt: int = 4                      # tx antennas per BS
    nr: int = 2                      # rx antennas per UE
    tx_power_dbm: float = 46.0       # per-BS budget
    noise_psd_dbm: float = -174.0    # dBm/Hz
    bandwidth_hz: float = 5e6
    pathloss_intercept: float = PATHLOSS_INTERCEPT_DB
    pathloss_slope: float = PATHLOSS_SLOPE_DB
    shadowing_sigma: float = 8.0     # dB
    seed: int = 0

    def __post_init__(self):
        if self.bs_density <= 0:
            raise ValueError("bs_density must be > 0")
        if not self.area_radius > self.exclusion_radius >= 0:
            raise ValueError("need area_radius > exclusion_radius >= 0")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be > 0")
        for name in ("ue_per_bs", "num_clusters", "nt", "nr"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def tx_power_max(self) -> float:
        """Per-BS transmit power budget in watts."""
        return dbm_to_watt(self.tx_power_dbm)

    @classmethod
    def from_file(cls, path) -> "NetworkConfig":
        """Load from a flat key=value text file (unknown keys ignored)."""
        raw = read_flat_config(path)
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, val in raw.items():
            if key in known:
                typ = cls.__dataclass_fields__[key].type
                kwargs[key] = int(val) if "int" in str(typ) else float(val)
        return cls(**kwargs)


@dataclass(frozen=True)
class Topology:
    """BS/UE positions (km) and the exact cluster partition of both."""

    bs_positions: np.ndarray        # (B, 2)
    ue_positions: np.ndarray        # (K, 2)
    cluster_of_bs: np.ndarray       # (B,) int
    cluster_of_ue: np.ndarray       # (K,) int
    parent_bs: np.ndarray           # (K,) int, BS each UE was dropped around

    @property
    def num_bs(self) -> int:
        return self.bs_positions.shape[0]

    @property
    def num_ue(self) -> int:
        return self.ue_positions.shape[0]

    @property
    def num_clusters(self) -> int:
        return int(self.cluster_of_bs.max()) + 1

    def bs_in_cluster(self, i: int) -> np.ndarray:
        """Global BS indices of cluster i (the set Q_i), sorted."""
        return np.flatnonzero(self.cluster_of_bs == i)

    def ue_in_cluster(self, i: int) -> np.ndarray:
        """Global UE indices of cluster i (the set I_i), sorted."""
        return np.flatnonzero(self.cluster_of_ue == i)

    def distances(self) -> np.ndarray:
        """UE-to-BS distance matrix in km, shape (K, B)."""
        diff = self.ue_positions[:, None, :] - self.bs_positions[None, :, :]
        return np.linalg.norm(diff, axis=2)

    def to_csv(self, path) -> None:
        """Export node table as CSV rows (id, x_km, y_km, cluster)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "x_km", "y_km", "cluster"])
            for j, (x, y) in enumerate(self.bs_positions):
                w.writerow([f"bs_{j}", repr(float(x)), repr(float(y)),
                            int(self.cluster_of_bs[j])])
            for k, (x, y) in enumerate(self.ue_positions):
                w.writerow([f"ue_{k}", repr(float(x)), repr(float(y)),
                            int(self.cluster_of_ue[k])])


@dataclass(frozen=True)
class ChannelRealization:
    """One small-scale draw on top of a large-scale block."""

    large_scale: np.ndarray   # (K, B) linear power gains beta
    small_scale: np.ndarray   # (K, B, nr, nt) complex
    noise_power: float        # sigma^2, watts

    def __post_init__(self):
        if np.any(self.large_scale <= 0):
            raise ValueError("large-scale gains must be positive")
        if not np.all(np.isfinite(self.small_scale)):
            raise ValueError("small-scale entries must be finite")
        if self.noise_power <= 0:
            raise ValueError("noise power must be positive")


def dbm_to_watt(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def db_to_linear(x_db) -> float:
    return 10.0 ** (np.asarray(x_db) / 10.0)


def pathloss_db(d, intercept: float = PATHLOSS_INTERCEPT_DB,
                slope: float = PATHLOSS_SLOPE_DB):
    """Distance-dependent pathloss in dB for d in km (d > 0)."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("pathloss undefined for d <= 0")
    return intercept + slope * np.log10(d)


def noise_power(cfg: NetworkConfig) -> float:
    """Thermal noise power sigma^2 in watts over the system bandwidth."""
    if cfg.bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    return dbm_to_watt(cfg.noise_psd_dbm + 10.0 * math.log10(cfg.bandwidth_hz))


def generate_topology(cfg: NetworkConfig, rng: np.random.Generator,
                      max_redraws: int = 100) -> Topology:
    """Drop BSs as a PPP over a disc and UEs uniformly around each BS.

    The Poisson BS count is redrawn until it reaches at least
    cfg.num_clusters (bounded retries); UEs land in the annulus
    [exclusion_radius, R_B] around their parent BS with
    R_B = 1/sqrt(pi * bs_density). Clusters come from k-means over BS
    positions; UEs inherit their parent's cluster.
    """
    mean_count = cfg.bs_density * math.pi * cfg.area_radius ** 2
    num_bs = 0
    for _ in range(max_redraws):
        num_bs = rng.poisson(mean_count)
        if num_bs >= cfg.num_clusters:
            break
    else:
        raise ValueError(
            f"could not draw >= {cfg.num_clusters} BSs in {max_redraws} tries "
            f"(mean PPP count {mean_count:.2f})")

    # uniform over the disc of radius area_radius
    r = cfg.area_radius * np.sqrt(rng.uniform(size=num_bs))
    th = rng.uniform(0.0, 2.0 * math.pi, size=num_bs)
    bs_pos = np.column_stack([r * np.cos(th), r * np.sin(th)])

    cell_radius = 1.0 / math.sqrt(math.pi * cfg.bs_density)
    if cell_radius <= cfg.exclusion_radius:
        raise ValueError("exclusion radius exceeds the per-BS cell radius")
    num_ue = num_bs * cfg.ue_per_bs
    # round-robin parents so UE-index prefixes stay balanced across BSs
    parent = np.tile(np.arange(num_bs), cfg.ue_per_bs)
    lo2, hi2 = cfg.exclusion_radius ** 2, cell_radius ** 2
    ru = np.sqrt(rng.uniform(size=num_ue) * (hi2 - lo2) + lo2)
    tu = rng.uniform(0.0, 2.0 * math.pi, size=num_ue)
    ue_pos = bs_pos[parent] + np.column_stack([ru * np.cos(tu),
                                               ru * np.sin(tu)])

    labels = _kmeans_labels(bs_pos, cfg.num_clusters, rng)
    return Topology(bs_positions=bs_pos, ue_positions=ue_pos,
                    cluster_of_bs=labels, cluster_of_ue=labels[parent],
                    parent_bs=parent)


def _kmeans_labels(points: np.ndarray, m: int,
                   rng: np.random.Generator, iters: int = 100) -> np.ndarray:
    """Lloyd k-means with farthest-point init; every cluster kept nonempty."""
    n = points.shape[0]
    if m == 1:
        return np.zeros(n, dtype=int)
    centers = [points[int(rng.integers(n))]]
    for _ in range(m - 1):
        d2 = np.min([np.sum((points - c) ** 2, axis=1) for c in centers],
                    axis=0)
        centers.append(points[int(np.argmax(d2))])
    centers = np.array(centers)
    labels = np.zeros(n, dtype=int)
    for _ in range(iters):
        d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d2, axis=1)
        for c in range(m):
            if not np.any(new_labels == c):
                # steal the point farthest from its assigned center
                worst = int(np.argmax(d2[np.arange(n), new_labels]))
                new_labels[worst] = c
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(m):
            centers[c] = points[labels == c].mean(axis=0)
    return labels


def sample_large_scale(topo: Topology, cfg: NetworkConfig,
                       rng: np.random.Generator) -> np.ndarray:
    """Draw the (K, B) matrix beta of linear gains for one large-scale block.

    beta = 10^(-PL(d)/10) * 10^(psi_dB/10) with psi_dB ~ N(0, sigma_sh^2),
    held constant across the small-scale draws of the block.
    """
    d = topo.distances()
    pl = pathloss_db(d, cfg.pathloss_intercept, cfg.pathloss_slope)
    shadow_db = rng.normal(0.0, cfg.shadowing_sigma, size=d.shape) \
        if cfg.shadowing_sigma > 0 else np.zeros_like(d)
    return db_to_linear(-pl + shadow_db)


def sample_small_scale(topo: Topology, cfg: NetworkConfig,
                       rng: np.random.Generator) -> np.ndarray:
    """Draw iid CN(0,1) fading, shape (K, B, nr, nt)."""
    shape = (topo.num_ue, topo.num_bs, cfg.nr, cfg.nt)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) \
        / math.sqrt(2.0)


def sample_channel(topo: Topology, cfg: NetworkConfig, beta: np.ndarray,
                   rng: np.random.Generator) -> ChannelRealization:
    """Bundle a fresh small-scale draw with a given large-scale block."""
    return ChannelRealization(large_scale=beta,
                              small_scale=sample_small_scale(topo, cfg, rng),
                              noise_power=noise_power(cfg))


def read_flat_config(path) -> dict:
    """Parse `key = value` lines; '#' starts a comment, blanks ignored."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            out[key] = val
    return out
