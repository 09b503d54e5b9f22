"""User association: threshold rule, content-aware filtering, backhaul load.

Association matrices are (B, K) binary with rows indexing BSs, matching the
distance matrix orientation transposed; the distance d(k, j) and the
association bit d(j, k) are distinct objects and never aliased.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ServingSets:
    """Dual views of an association matrix."""

    bs_of_ue: list   # B_{ik}: serving BS indices per UE
    ue_of_bs: list   # K_{ij}: served UE indices per BS

    @classmethod
    def from_matrix(cls, assoc: np.ndarray) -> "ServingSets":
        assoc = np.asarray(assoc)
        return cls(
            bs_of_ue=[np.flatnonzero(assoc[:, k]).tolist()
                      for k in range(assoc.shape[1])],
            ue_of_bs=[np.flatnonzero(assoc[j, :]).tolist()
                      for j in range(assoc.shape[0])],
        )

    def to_matrix(self, num_bs: int, num_ue: int) -> np.ndarray:
        out = np.zeros((num_bs, num_ue), dtype=int)
        for k, bss in enumerate(self.bs_of_ue):
            out[bss, k] = 1
        return out


@dataclass(frozen=True)
class BackhaulConfig:
    """Per-BS cloud link capacities in bits/s/Hz."""

    capacities: np.ndarray

    def __post_init__(self):
        cap = np.asarray(self.capacities, dtype=float)
        if np.any(cap <= 0):
            raise ValueError("backhaul capacities must be positive")
        object.__setattr__(self, "capacities", cap)


def link_rate_matrix(beta: np.ndarray, small_scale: np.ndarray,
                     tx_power_max: float, noise_power: float) -> np.ndarray:
    """Interference-free full-power proxy rate per (BS, UE) link.

    r[j, k] = log2(1 + P_max * beta[k, j] * ||H[k, j]||_F^2 / sigma^2).
    A cheap admission metric, monotone in channel quality; actual rates
    come from the delivery solver.
    """
    gain = np.sum(np.abs(small_scale) ** 2, axis=(2, 3))  # (K, B)
    snr = tx_power_max * beta * gain / noise_power
    return np.log2(1.0 + snr).T


def _enforce_cap(assoc: np.ndarray, rates: np.ndarray, cap: int) -> np.ndarray:
    """Drop links until every BS serves <= cap UEs.

    Drop order: links of multi-link UEs before a UE's last link, lowest
    proxy rate first, then highest UE index. Deterministic.
    """
    assoc = assoc.copy()
    for j in range(assoc.shape[0]):
        while assoc[j].sum() > cap:
            served = np.flatnonzero(assoc[j])
            multi = [k for k in served if assoc[:, k].sum() > 1]
            pool = multi if multi else list(served)
            drop = max(pool, key=lambda k: (-rates[j, k], k))
            assoc[j, drop] = 0
    return assoc


def threshold_association(rates: np.ndarray, threshold: float,
                          max_per_bs: int | None = None) -> np.ndarray:
    """Admit link (j, k) iff rates[j, k] >= threshold (ties admit).

    With max_per_bs set, the per-BS antenna cap is then enforced by
    dropping the lowest-rate links.
    """
    assoc = (rates >= threshold).astype(int)
    if max_per_bs is not None:
        assoc = _enforce_cap(assoc, rates, max_per_bs)
    return assoc


def savings_per_link(prefs_probs: np.ndarray, placement: np.ndarray) -> np.ndarray:
    """mu[j, k] = sum_n pbar[k, n] * C[n, j]: expected cache-hit mass."""
    return (placement.T @ prefs_probs.T)


def content_aware_association(prefs_probs: np.ndarray, placement: np.ndarray,
                              base: np.ndarray, rates: np.ndarray,
                              max_per_bs: int | None = None) -> np.ndarray:
    """Keep base links whose cache-hit incentive mu is positive.

    A UE stripped of every serving BS falls back to its highest-rate
    base-admitted link; no link absent from base is ever added. The
    per-BS cap is re-enforced afterwards.
    """
    base = np.asarray(base, dtype=int)
    mu = savings_per_link(prefs_probs, placement)
    assoc = base * (mu > 0)
    for k in range(base.shape[1]):
        if assoc[:, k].sum() == 0 and base[:, k].sum() > 0:
            candidates = np.flatnonzero(base[:, k])
            best = candidates[np.argmax(rates[candidates, k])]
            assoc[best, k] = 1
    if max_per_bs is not None:
        assoc = _enforce_cap(assoc, rates, max_per_bs)
    return assoc


def greedy_backhaul_repair(assoc: np.ndarray, rates_per_ue: np.ndarray,
                           mu: np.ndarray, bh: BackhaulConfig) -> np.ndarray:
    """Optional post-pass: drop smallest-mu links on overloaded BSs."""
    assoc = np.asarray(assoc, dtype=int).copy()
    for j in range(assoc.shape[0]):
        while assoc[j] @ rates_per_ue > bh.capacities[j] and assoc[j].any():
            served = np.flatnonzero(assoc[j])
            drop = min(served, key=lambda k: (mu[j, k], -k))
            assoc[j, drop] = 0
    return assoc


def backhaul_load(assoc: np.ndarray, rates_per_ue: np.ndarray,
                  bh: BackhaulConfig):
    """Per-BS load sum_{k in K_j} R_k and its feasibility flag."""
    rates_per_ue = np.asarray(rates_per_ue, dtype=float)
    if np.any(rates_per_ue < 0):
        raise ValueError("rates must be nonnegative")
    load = np.asarray(assoc, dtype=float) @ rates_per_ue
    return load, load <= bh.capacities


def association_to_csv(assoc: np.ndarray, path) -> None:
    """Write (bs_id, ue_id, bit) triples."""
    assoc = np.asarray(assoc, dtype=int)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bs_id", "ue_id", "bit"])
        for j in range(assoc.shape[0]):
            for k in range(assoc.shape[1]):
                w.writerow([j, k, int(assoc[j, k])])
