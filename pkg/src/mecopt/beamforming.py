"""Short-term content delivery: SINR, WMMSE block descent, ADMM splitting.

One delivery instance conditions on a realized request per user: a link
(UE k, BS j) is active when the association bit is set and, if a placement
view is supplied, the BS caches the requested file. Beamformers are handled
internally as physical precoders g = sqrt(p) v so every per-BS power
constraint reads sum_l ||g_l||^2 <= P_max regardless of the power split;
the public state refactors back to unit-norm directions with separate
powers.

Receive filters: the state stores a unit-norm direction plus a complex
gain. The MSE identities (w * eps = 1 at the MMSE point) hold at gain *
direction, while the SINR of Eq.-style ratios is scale invariant, so the
unit-norm invariant costs nothing. `mmse_receiver` returns the direction
maximizing the delivered SINR (principal generalized eigenvector of the
signal and interference-plus-noise forms), which coincides with the
classic J^-1 h filter whenever a single BS carries the user's signal; the
block-descent solver uses the exact MSE minimizer J^-1 h internally so its
surrogate is provably non-decreasing.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

REWEIGHT_DELTA = 1e-6


@dataclass
class DeliveryProblem:
    """Channels, active links, and per-BS constraints for one realization."""

    link_ue: np.ndarray          # (L,) receiver of each active link
    link_bs: np.ndarray          # (L,) transmitting BS of each active link
    gains: np.ndarray            # (K, L, nr, nt): sqrt(beta) * H per pair
    noise_power: float
    power_max: np.ndarray        # (B,) watts
    backhaul: np.ndarray         # (B,) bits/s/Hz
    num_bs: int

    def __post_init__(self):
        self.num_users = self.gains.shape[0]
        self.num_links = self.gains.shape[1]
        self.own = (self.link_ue[None, :]
                    == np.arange(self.num_users)[:, None])  # (K, L)
        self.served = self.own.any(axis=1)                  # (K,)
        self.links_of_bs = [np.flatnonzero(self.link_bs == j)
                            for j in range(self.num_bs)]

    @property
    def nr(self) -> int:
        return self.gains.shape[2]

    @property
    def nt(self) -> int:
        return self.gains.shape[3]


@dataclass
class BeamformingState:
    """Unit-norm beamformers and filters with powers carried separately."""

    directions: np.ndarray       # (L, nt) unit norm
    powers: np.ndarray           # (L,) watts
    rx_dirs: np.ndarray          # (K, nr) unit norm
    rx_gains: np.ndarray         # (K,) complex MMSE scale
    weights: np.ndarray          # (K,) positive

    def precoders(self) -> np.ndarray:
        """Physical per-link precoders g = sqrt(p) v, shape (L, nt)."""
        return np.sqrt(self.powers)[:, None] * self.directions

    def rx_effective(self) -> np.ndarray:
        """Filters at the MMSE scale, gain * direction."""
        return self.rx_gains[:, None] * self.rx_dirs

    @classmethod
    def from_precoders(cls, g: np.ndarray, rx_dirs, rx_gains, weights):
        p = np.sum(np.abs(g) ** 2, axis=1)
        dirs = np.zeros_like(g)
        nz = p > 0
        dirs[nz] = g[nz] / np.sqrt(p[nz])[:, None]
        dirs[~nz, 0] = 1.0
        return cls(directions=dirs, powers=p, rx_dirs=rx_dirs,
                   rx_gains=rx_gains, weights=weights)


@dataclass
class AdmmState:
    """Consensus copies, cross-term copies, duals, and the penalty."""

    x: np.ndarray                # (L, nt) feasible copy of the precoders
    cross: np.ndarray            # (K, L) copies of m^H g
    z: np.ndarray                # (L, nt) duals for g = x
    lam: np.ndarray              # (K, L) duals for the cross terms
    rho: float

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("penalty rho must be positive")


@dataclass
class DeliverySolution:
    """Delivery outcome: final state, rates, loads, and iteration trace."""

    state: BeamformingState
    rates: np.ndarray            # (K,) bits/s/Hz at the realized request
    power_use: np.ndarray        # (B,) watts
    backhaul_use: np.ndarray     # (B,) bits/s/Hz actually served
    trace: list                  # (outer, surrogate, throughput, residual)
    outer_iters: int
    converged: bool
    served: np.ndarray           # (K,) bool


def build_delivery_problem(beta, small_scale, noise_power, assoc, power_max,
                           backhaul, placement=None,
                           requests=None) -> DeliveryProblem:
    """Assemble the active-link view of one channel realization.

    With both a placement and a request profile, link (k, j) is active iff
    the BS serves the UE and caches its requested file; otherwise every
    association link transmits.
    """
    assoc = np.asarray(assoc, dtype=int)
    num_bs, num_ue = assoc.shape
    pairs = []
    for j in range(num_bs):
        for k in range(num_ue):
            if not assoc[j, k]:
                continue
            if placement is not None and requests is not None \
                    and not placement[requests[k], j]:
                continue
            pairs.append((k, j))
    link_ue = np.array([p[0] for p in pairs], dtype=int)
    link_bs = np.array([p[1] for p in pairs], dtype=int)
    amp = np.sqrt(np.asarray(beta, dtype=float))
    # (K, L, nr, nt): sqrt(beta[k, bs(l)]) * H[k, bs(l)]
    gains = np.asarray(small_scale)[:, link_bs] \
        * amp[:, link_bs][:, :, None, None]
    return DeliveryProblem(link_ue=link_ue, link_bs=link_bs, gains=gains,
                           noise_power=float(noise_power),
                           power_max=np.asarray(power_max, dtype=float),
                           backhaul=np.asarray(backhaul, dtype=float),
                           num_bs=num_bs)


def initial_state(problem: DeliveryProblem,
                  rng: np.random.Generator) -> BeamformingState:
    """Random feasible point: unit directions, equal power split per BS."""
    nt, nr = problem.nt, problem.nr
    dirs = rng.standard_normal((problem.num_links, nt)) \
        + 1j * rng.standard_normal((problem.num_links, nt))
    norms = np.linalg.norm(dirs, axis=1)
    dirs = dirs / norms[:, None]
    powers = np.zeros(problem.num_links)
    for j in range(problem.num_bs):
        links = problem.links_of_bs[j]
        if links.size:
            powers[links] = problem.power_max[j] / links.size
    rx = np.zeros((problem.num_users, nr), dtype=complex)
    rx[:, 0] = 1.0
    return BeamformingState(directions=dirs, powers=powers, rx_dirs=rx,
                            rx_gains=np.ones(problem.num_users, dtype=complex),
                            weights=np.ones(problem.num_users))


def _rx_signals(problem: DeliveryProblem, g: np.ndarray) -> np.ndarray:
    """y[k, l] = gains[k, l] @ g[l]: per-receiver per-link signal vectors."""
    return np.einsum("klab,lb->kla", problem.gains, g)


def sinr(problem: DeliveryProblem, state: BeamformingState,
         ue: int) -> float:
    """Delivered SINR of one UE at the state's receive direction.

    Numerator: incoherent sum of per-serving-BS squared projections;
    denominator: receive-direction quadratic form of interference outer
    products plus noise. Scale invariant in the filter.
    """
    y = _rx_signals(problem, state.precoders())[ue]       # (L, nr)
    u = state.rx_dirs[ue]
    proj = np.abs(y.conj() @ u) ** 2                      # (L,)
    own = problem.own[ue]
    signal = float(proj[own].sum())
    interf = float(proj[~own].sum())
    return signal / (interf + problem.noise_power * float(np.vdot(u, u).real))


def all_sinr(problem: DeliveryProblem, state: BeamformingState) -> np.ndarray:
    y = _rx_signals(problem, state.precoders())           # (K, L, nr)
    proj = np.abs(np.einsum("kla,ka->kl", y.conj(), state.rx_dirs)) ** 2
    norms = np.sum(np.abs(state.rx_dirs) ** 2, axis=1)
    signal = np.sum(proj * problem.own, axis=1)
    interf = np.sum(proj * ~problem.own, axis=1)
    return signal / (interf + problem.noise_power * norms)


def instantaneous_rate(sinr_value):
    """Spectral efficiency log2(1 + SINR), elementwise."""
    return np.log2(1.0 + np.asarray(sinr_value, dtype=float))


def average_rate(per_sample_rates, request_probs=None) -> float:
    """Mean rate over samples, optionally weighted over the request pmf.

    1-D input: plain mean. 2-D input (samples, files) with request_probs:
    per-file sample means combined with the request probabilities.
    """
    rates = np.asarray(per_sample_rates, dtype=float)
    if rates.ndim == 1:
        return float(rates.mean())
    if request_probs is None:
        raise ValueError("2-D rates need the request distribution")
    return float(np.asarray(request_probs, dtype=float) @ rates.mean(axis=0))


def throughput(problem: DeliveryProblem, state: BeamformingState) -> float:
    """Network sum rate in bits/s/Hz at the current state."""
    return float(instantaneous_rate(all_sinr(problem, state)).sum())


def mmse_receiver(problem: DeliveryProblem, state: BeamformingState,
                  ue: int):
    """SINR-optimal unit receive direction and its MMSE gain.

    Solves the generalized eigenproblem of (signal outer-product sum,
    interference-plus-noise covariance); with a single serving BS this is
    exactly the normalized J^-1 h filter. The returned gain rescales the
    direction to the MSE-optimal filter. Raises on an ill-conditioned
    covariance.
    """
    y = _rx_signals(problem, state.precoders())[ue]       # (L, nr)
    own = problem.own[ue]
    a = np.einsum("la,lb->ab", y[own], y[own].conj())
    b = np.einsum("la,lb->ab", y[~own], y[~own].conj()) \
        + problem.noise_power * np.eye(problem.nr)
    cond = np.linalg.cond(b)
    if not np.isfinite(cond) or cond > 1e14:
        raise np.linalg.LinAlgError(
            f"interference covariance of UE {ue} ill-conditioned "
            f"(cond ~ {cond:.2e})")
    if not own.any() or np.allclose(a, 0):
        direction = np.zeros(problem.nr, dtype=complex)
        direction[0] = 1.0
        return direction, 0.0 + 0.0j
    vals, vecs = scipy.linalg.eigh(a, b)
    direction = vecs[:, -1]
    direction = direction / np.linalg.norm(direction)
    # deterministic phase: largest component made real positive
    pivot = direction[np.argmax(np.abs(direction))]
    direction = direction * (pivot.conj() / abs(pivot))
    h = y[own].sum(axis=0)
    # MSE-optimal gain along the direction: coherent signal quadratic
    j_mat = np.outer(h, h.conj()) + b
    quad = float(np.einsum("a,ab,b->", direction.conj(), j_mat,
                           direction).real)
    gain = (np.vdot(direction, h) / quad) if quad > 0 else 0.0 + 0.0j
    return direction, gain


def _mse_min_filter(problem: DeliveryProblem, y_k: np.ndarray, own_k):
    """Raw MSE-minimizing filter J^-1 h, split into direction and gain.

    The own-signal block of J is the coherent outer product h h^H: the
    serving BSs transmit the same symbol, so their contributions add in
    amplitude inside the MSE.
    """
    h = y_k[own_k].sum(axis=0)
    j_mat = np.outer(h, h.conj()) \
        + np.einsum("la,lb->ab", y_k[~own_k], y_k[~own_k].conj()) \
        + problem.noise_power * np.eye(problem.nr)
    raw = np.linalg.solve(j_mat, h)
    norm = np.linalg.norm(raw)
    if norm == 0:
        direction = np.zeros(problem.nr, dtype=complex)
        direction[0] = 1.0
        return direction, 0.0 + 0.0j
    return raw / norm, norm


def mse(problem: DeliveryProblem, state: BeamformingState, ue: int) -> float:
    """Mean-square symbol error at the state's effective filter.

    Coherent signal mismatch plus interference powers plus noise leakage,
    evaluated at gain * direction so that the MMSE identities hold after a
    receiver update.
    """
    y = _rx_signals(problem, state.precoders())[ue]
    u_eff = state.rx_effective()[ue]
    own = problem.own[ue]
    coh = np.vdot(u_eff, y[own].sum(axis=0))
    interf = float(np.sum(np.abs(y[~own].conj() @ u_eff) ** 2))
    noise = problem.noise_power * float(np.vdot(u_eff, u_eff).real)
    return float(abs(1.0 - coh) ** 2 + interf + noise)


def all_mse(problem: DeliveryProblem, state: BeamformingState) -> np.ndarray:
    y = _rx_signals(problem, state.precoders())
    u_eff = state.rx_effective()
    proj = np.einsum("kla,ka->kl", y.conj(), u_eff)
    coh = np.sum(proj * problem.own, axis=1)
    interf = np.sum(np.abs(proj) ** 2 * ~problem.own, axis=1)
    noise = problem.noise_power * np.sum(np.abs(u_eff) ** 2, axis=1)
    return np.abs(1.0 - coh) ** 2 + interf + noise


def update_weights(problem: DeliveryProblem, state: BeamformingState,
                   ue: int) -> float:
    """WMMSE weight w = 1 / (1 - t) with t the effective signal term.

    t >= 1 is clamped just below 1 and flagged; at a fresh MMSE filter
    w equals 1/mse exactly.
    """
    y = _rx_signals(problem, state.precoders())[ue]
    u_eff = state.rx_effective()[ue]
    t = float(np.vdot(u_eff, y[problem.own[ue]].sum(axis=0)).real)
    if t >= 1.0:
        warnings.warn(f"signal term {t:.6f} >= 1 for UE {ue}; clamped")
        t = 1.0 - 1e-9
    return 1.0 / (1.0 - t)


def weighted_mse_sum(problem: DeliveryProblem, state: BeamformingState,
                     weights=None) -> float:
    """sum_k w_k eps_k over served users (the v-block objective)."""
    w = state.weights if weights is None else weights
    eps = all_mse(problem, state)
    return float(np.sum(w[problem.served] * eps[problem.served]))


def surrogate_value(problem: DeliveryProblem,
                    state: BeamformingState) -> float:
    """Block-descent surrogate sum_k (ln w_k - w_k eps_k + 1), served users."""
    eps = all_mse(problem, state)
    w = state.weights
    s = problem.served
    return float(np.sum(np.log(w[s]) - w[s] * eps[s] + 1.0))


# ---------------------------------------------------------------------------
# ADMM for the transmit-beamformer block
# ---------------------------------------------------------------------------

def _filter_channels(problem: DeliveryProblem,
                     state: BeamformingState) -> np.ndarray:
    """m[k, l] = sqrt(w_k) gains[k, l]^H u_eff_k, folded cross-term maps.

    Rows of unserved receivers are zeroed: their MSE is not part of the
    precoder objective, so interference toward them must not be penalized.
    """
    u_eff = state.rx_effective()
    m = np.einsum("klab,ka->klb", problem.gains.conj(), u_eff)
    m = np.sqrt(state.weights)[:, None, None] * m
    m[~problem.served] = 0.0
    return m


def _cross_terms(m: np.ndarray, g: np.ndarray) -> np.ndarray:
    """T[k, l] = m[k, l]^H g[l]."""
    return np.einsum("kla,la->kl", m.conj(), g)


def init_admm(problem: DeliveryProblem, state: BeamformingState,
              rho: float = 1.0) -> AdmmState:
    g = state.precoders()
    m = _filter_channels(problem, state)
    return AdmmState(x=g.copy(), cross=_cross_terms(m, g),
                     z=np.zeros_like(g),
                     lam=np.zeros((problem.num_users, problem.num_links),
                                  dtype=complex), rho=rho)


def admm_v_update(problem: DeliveryProblem, admm: AdmmState,
                  m: np.ndarray) -> np.ndarray:
    """Per-link unconstrained quadratic minimization, closed form.

    Solves (M_l + I) g_l = sum_k m[k,l] (X[k,l] - lam[k,l]/rho)
    + x_l - z_l/rho with M_l the filtered-channel Gram of link l; the
    identity block keeps the system positive definite for any rho > 0.
    """
    rhs = np.einsum("kla,kl->la", m,
                    admm.cross - admm.lam / admm.rho)
    rhs = rhs + admm.x - admm.z / admm.rho
    gram = np.einsum("kla,klb->lab", m, m.conj())
    systems = gram + np.eye(problem.nt)[None, :, :]
    return np.linalg.solve(systems, rhs[:, :, None])[:, :, 0]


def admm_cross_update(problem: DeliveryProblem, admm: AdmmState,
                      m: np.ndarray, g: np.ndarray,
                      weights: np.ndarray) -> np.ndarray:
    """Closed-form minimization over the cross-term copies.

    Interference copies decouple into scalars; each receiver's own-signal
    copies couple through the coherent sum and solve a rank-one-plus-
    diagonal system (Sherman-Morrison).
    """
    t = _cross_terms(m, g)
    rho = admm.rho
    new = (admm.lam + rho * t) / (2.0 + rho)
    for k in np.flatnonzero(problem.served):
        own = problem.own[k]
        n_own = int(own.sum())
        r = math.sqrt(weights[k]) + 0.5 * admm.lam[k, own] \
            + 0.5 * rho * t[k, own]
        scale = 2.0 / rho
        correction = scale * r.sum() / (1.0 + scale * n_own)
        new[k, own] = scale * (r - correction)
    return new


def project_bs_block(x0: np.ndarray, power_cap: float, bh_weights: np.ndarray,
                     bh_cap: float, tol: float = 1e-12,
                     max_rounds: int = 60) -> np.ndarray:
    """Project one BS's stacked link vectors onto its two quadratic balls.

    Plain power ball sum ||x_l||^2 <= P and weighted ball
    sum c_l ||x_l||^2 <= B. Both sets are centered, so a projection onto
    one that lands inside the other is already the intersection
    projection; Dykstra's alternating corrections handle the (rare) case
    of both balls active.
    """
    def power_of(y):
        return float(np.sum(np.abs(y) ** 2))

    def load_of(y):
        return float(np.sum(bh_weights * np.sum(np.abs(y) ** 2, axis=1)))

    def proj_power(y):
        total = power_of(y)
        if total <= power_cap + tol:
            return y
        if power_cap <= 0:
            return np.zeros_like(y)
        return y * math.sqrt(power_cap / total)

    def proj_backhaul(y):
        load = load_of(y)
        if load <= bh_cap + tol or load == 0:
            return y

        def scaled(t):
            return y / (1.0 + t * bh_weights)[:, None]

        lo, hi = 0.0, 1.0
        while load_of(scaled(hi)) > bh_cap and hi < 1e18:
            hi *= 2.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if load_of(scaled(mid)) > bh_cap:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-13 * max(1.0, hi):
                break
        return scaled(hi)

    if power_of(x0) <= power_cap + tol and load_of(x0) <= bh_cap + tol:
        return x0.copy()
    y = proj_power(x0)
    if load_of(y) <= bh_cap + tol:
        return y
    y = proj_backhaul(x0)
    if power_of(y) <= power_cap + tol:
        return y
    # both constraints active: Dykstra on the two exact projections
    x, p_corr, b_corr = x0.copy(), np.zeros_like(x0), np.zeros_like(x0)
    for _ in range(max_rounds):
        y = proj_power(x + p_corr)
        p_corr = x + p_corr - y
        x = proj_backhaul(y + b_corr)
        b_corr = y + b_corr - x
        if power_of(x) <= power_cap + 1e-10 \
                and load_of(x) <= bh_cap + 1e-10 \
                and np.max(np.abs(y - x)) < 1e-11:
            break
    return x


def admm_x_update(problem: DeliveryProblem, admm: AdmmState, g: np.ndarray,
                  bh_weights: np.ndarray) -> np.ndarray:
    """Per-BS constrained proximal step: project g + z/rho onto both balls."""
    target = g + admm.z / admm.rho
    x = target.copy()
    for j in range(problem.num_bs):
        links = problem.links_of_bs[j]
        if not links.size:
            continue
        x[links] = project_bs_block(target[links], problem.power_max[j],
                                    bh_weights[links], problem.backhaul[j])
    return x


def admm_dual_update(problem: DeliveryProblem, admm: AdmmState,
                     m: np.ndarray, g: np.ndarray) -> None:
    """z += rho (g - x); lam += rho (m^H g - X). In place."""
    admm.z = admm.z + admm.rho * (g - admm.x)
    admm.lam = admm.lam + admm.rho * (_cross_terms(m, g) - admm.cross)


def admm_solve(problem: DeliveryProblem, state: BeamformingState,
               bh_weights: np.ndarray, rho: float = 1.0, tol: float = 1e-4,
               max_iter: int = 400):
    """Consensus ADMM for the transmit-beamformer subproblem.

    Cycles the unconstrained precoder update, the (x, X) block, and the
    dual step until both primal residuals drop below tol. Returns the
    feasible consensus copy and the residual trace; non-convergence is
    reported, not raised.
    """
    m = _filter_channels(problem, state)
    admm = init_admm(problem, state, rho=rho)
    g = state.precoders()
    residuals = []
    for it in range(max_iter):
        g = admm_v_update(problem, admm, m)
        admm.cross = admm_cross_update(problem, admm, m, g, state.weights)
        admm.x = admm_x_update(problem, admm, g, bh_weights)
        admm_dual_update(problem, admm, m, g)
        r_consensus = float(np.max(np.abs(g - admm.x))) if g.size else 0.0
        r_cross = float(np.max(np.abs(_cross_terms(m, g) - admm.cross))) \
            if g.size else 0.0
        residual = max(r_consensus, r_cross)
        residuals.append(residual)
        if residual < tol:
            break
    else:
        if max_iter > 0 and residuals and residuals[-1] >= tol:
            warnings.warn(f"ADMM stopped at max_iter={max_iter} with "
                          f"residual {residuals[-1]:.2e}")
    return admm.x, residuals


# ---------------------------------------------------------------------------
# WMMSE outer loop
# ---------------------------------------------------------------------------

def _refresh_receivers(problem: DeliveryProblem,
                       state: BeamformingState) -> None:
    """Exact MSE-minimizing filters (direction + gain) for every user."""
    y = _rx_signals(problem, state.precoders())
    for k in range(problem.num_users):
        direction, gain = _mse_min_filter(problem, y[k], problem.own[k])
        state.rx_dirs[k] = direction
        state.rx_gains[k] = gain


def _refresh_weights(problem: DeliveryProblem,
                     state: BeamformingState) -> None:
    eps = all_mse(problem, state)
    eps = np.maximum(eps, 1e-12)
    new = np.ones_like(state.weights)
    new[problem.served] = 1.0 / eps[problem.served]
    state.weights = new


def wmmse_solve(problem: DeliveryProblem, rng: np.random.Generator,
                tol: float = 1e-2, max_outer: int = 100, rho: float = 1.0,
                admm_tol: float = 1e-4, admm_max_iter: int = 400,
                state: BeamformingState | None = None) -> DeliverySolution:
    """Block coordinate descent over receive filters, weights, precoders.

    Starts from a random feasible point, alternates the closed-form filter
    and weight updates with the ADMM precoder block, and stops once the
    network throughput moves less than tol between consecutive rounds. The
    precoder block is safeguarded: a candidate that would increase the
    weighted MSE sum is discarded, which keeps the surrogate non-decreasing
    even when ADMM is iteration-capped.
    """
    if state is None:
        state = initial_state(problem, rng)
    if not problem.num_links:
        zeros = np.zeros(problem.num_users)
        return DeliverySolution(state=state, rates=zeros,
                                power_use=np.zeros(problem.num_bs),
                                backhaul_use=np.zeros(problem.num_bs),
                                trace=[], outer_iters=0, converged=True,
                                served=problem.served)
    rates = np.zeros(problem.num_users)
    bh_weights = np.zeros(problem.num_links)  # no rate estimate yet
    trace = []
    prev_throughput = None
    converged = False
    last_residual = 0.0
    outer = 0
    for outer in range(1, max_outer + 1):
        _refresh_receivers(problem, state)
        _refresh_weights(problem, state)
        current_obj = weighted_mse_sum(problem, state)
        x_new, residuals = admm_solve(problem, state, bh_weights, rho=rho,
                                      tol=admm_tol, max_iter=admm_max_iter)
        last_residual = residuals[-1] if residuals else 0.0
        candidate = BeamformingState.from_precoders(
            x_new, state.rx_dirs.copy(), state.rx_gains.copy(),
            state.weights.copy())
        if weighted_mse_sum(problem, candidate) <= current_obj + 1e-12:
            state = candidate
        tput = throughput(problem, state)
        trace.append((outer, surrogate_value(problem, state), tput,
                      last_residual))
        if prev_throughput is not None \
                and abs(tput - prev_throughput) < tol:
            converged = True
            break
        prev_throughput = tput
        # reweighting for the backhaul ball: previous rates and precoders
        rates = instantaneous_rate(all_sinr(problem, state))
        g_norms = np.sum(np.abs(state.precoders()) ** 2, axis=1)
        bh_weights = rates[problem.link_ue] / (g_norms + REWEIGHT_DELTA)
    if not converged:
        warnings.warn(f"WMMSE stopped at max_outer={max_outer} without "
                      f"meeting the throughput tolerance {tol}")
    rates = instantaneous_rate(all_sinr(problem, state))
    rates[~problem.served] = 0.0
    g = state.precoders()
    power_use = np.zeros(problem.num_bs)
    backhaul_use = np.zeros(problem.num_bs)
    for j in range(problem.num_bs):
        links = problem.links_of_bs[j]
        if links.size:
            power_use[j] = float(np.sum(np.abs(g[links]) ** 2))
            backhaul_use[j] = float(rates[problem.link_ue[links]].sum())
    return DeliverySolution(state=state, rates=rates, power_use=power_use,
                            backhaul_use=backhaul_use, trace=trace,
                            outer_iters=outer, converged=converged,
                            served=problem.served)


def trace_to_csv(solution: DeliverySolution, path) -> None:
    """Write the outer-iteration trace as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["outer_iter", "surrogate", "throughput", "max_residual"])
        for row in solution.trace:
            w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])
