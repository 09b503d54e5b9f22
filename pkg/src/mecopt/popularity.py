"""Content catalog, per-user preferences, and per-BS aggregated popularity."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Catalog:
    """File directory: F files with sizes in bits."""

    num_files: int
    file_sizes: np.ndarray = None  # (F,), defaults to unit sizes

    def __post_init__(self):
        if self.num_files < 1:
            raise ValueError("need at least one file")
        sizes = self.file_sizes
        if sizes is None:
            sizes = np.ones(self.num_files)
        sizes = np.asarray(sizes, dtype=float)
        if sizes.shape != (self.num_files,) or np.any(sizes <= 0):
            raise ValueError("file_sizes must be F positive entries")
        object.__setattr__(self, "file_sizes", sizes)


@dataclass(frozen=True)
class PreferenceMatrix:
    """Row-stochastic request probabilities per UE plus request rates q."""

    probs: np.ndarray           # (K, F), rows sum to 1
    request_rates: np.ndarray   # (K,), positive

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        q = np.asarray(self.request_rates, dtype=float)
        if np.any(p < -ROW_SUM_TOL) or np.any(p > 1 + ROW_SUM_TOL):
            raise ValueError("preference entries must lie in [0, 1]")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise ValueError("preference rows must sum to 1")
        if q.shape != (p.shape[0],) or np.any(q <= 0):
            raise ValueError("request rates must be positive, one per UE")
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "request_rates", q)

    @property
    def num_users(self) -> int:
        return self.probs.shape[0]

    @property
    def num_files(self) -> int:
        return self.probs.shape[1]

    def to_csv(self, path) -> None:
        """Write (user_id, file_id, prob) triples."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["user_id", "file_id", "prob"])
            for k in range(self.num_users):
                for n in range(self.num_files):
                    w.writerow([k, n, repr(float(self.probs[k, n]))])

    @classmethod
    def from_csv(cls, path, request_rates=None) -> "PreferenceMatrix":
        """Read (user_id, file_id, prob) triples; missing pairs are 0."""
        triples = []
        with open(path) as fh:
            for row in csv.DictReader(fh):
                triples.append((int(row["user_id"]), int(row["file_id"]),
                                float(row["prob"])))
        if not triples:
            raise ValueError(f"no preference rows in {path}")
        num_users = max(t[0] for t in triples) + 1
        num_files = max(t[1] for t in triples) + 1
        probs = np.zeros((num_users, num_files))
        for k, n, p in triples:
            probs[k, n] = p
        if request_rates is None:
            request_rates = np.ones(num_users)
        return cls(probs=probs, request_rates=request_rates)


def zipf_pmf(num_files: int, gamma: float) -> np.ndarray:
    """Rank-based popularity p(i) = i^-gamma / sum_m m^-gamma, i = 1..F."""
    if num_files < 1:
        raise ValueError("need at least one file")
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    ranks = np.arange(1, num_files + 1, dtype=float)
    weights = ranks ** (-gamma)
    return weights / weights.sum()


def sample_preferences(catalog: Catalog, num_users: int, gamma: float,
                       heterogeneity: float, rng: np.random.Generator,
                       request_rates=None) -> PreferenceMatrix:
    """Per-user Zipf rows over user-specific rank permutations.

    heterogeneity 0 gives every user the identity permutation (shared
    popularity); 1 gives each user an independent uniform permutation;
    in between each user is permuted independently with that probability.
    """
    if not 0.0 <= heterogeneity <= 1.0:
        raise ValueError("heterogeneity must lie in [0, 1]")
    base = zipf_pmf(catalog.num_files, gamma)
    probs = np.tile(base, (num_users, 1))
    for k in range(num_users):
        if rng.uniform() < heterogeneity:
            probs[k] = base[rng.permutation(catalog.num_files)]
    if request_rates is None:
        request_rates = np.ones(num_users)
    return PreferenceMatrix(probs=probs, request_rates=request_rates)


def bs_popularity(prefs: PreferenceMatrix, assoc: np.ndarray) -> np.ndarray:
    """Aggregate user preferences into per-BS popularity rows.

    p[j, n] = sum_k d[j, k] q[k] pbar[k, n] / sum_k d[j, k] q[k]; a BS with
    no associated user gets the all-zeros row. The matrix product
    D diag(q) Pbar is accumulated one rank-one term (one user) at a time,
    which makes the result bit-identical to the scalar triple loop.
    """
    d = np.asarray(assoc, dtype=float)
    if d.shape[1] != prefs.num_users:
        raise ValueError("association columns must match the user count")
    weighted = prefs.request_rates[:, None] * prefs.probs     # q[k] * p[k, n]
    num = np.zeros((d.shape[0], prefs.num_files))
    den = np.zeros(d.shape[0])
    for k in range(prefs.num_users):
        num += d[:, k][:, None] * weighted[k][None, :]
        den += d[:, k] * prefs.request_rates[k]
    out = np.zeros_like(num)
    served = den > 0
    out[served] = num[served] / den[served, None]
    return out


def sample_request_profile(prefs: PreferenceMatrix,
                           rng: np.random.Generator) -> np.ndarray:
    """Draw one requested file index per user from its preference row."""
    cdf = np.cumsum(prefs.probs, axis=1)
    cdf[:, -1] = 1.0
    u = rng.uniform(size=prefs.num_users)
    return np.array([int(np.searchsorted(cdf[k], u[k], side="right"))
                     for k in range(prefs.num_users)]).clip(0, prefs.num_files - 1)
