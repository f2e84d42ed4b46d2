"""Success probabilities with unsaturated, interacting queues.

Analytic side: the downlink fixed point under random scheduling (mean-field
activity probability) and the bipolar Lambert-W solution.  Simulation side:
a discrete-time network of FIFO queues with Bernoulli arrivals where a head
packet departs iff the per-slot SIR (fresh fading, current active set)
clears the threshold.
"""

import math
from typing import NamedTuple

import numpy as np

from .numerics import fixed_point_solve, gauss_2f1, lambert_w0
from . import simengine

__all__ = [
    "cell_size_pmf",
    "downlink_success",
    "bipolar_success",
    "simulate_queues",
    "QueueSolution",
]

_NU = 3.5  # Poisson-Voronoi cell-size shape parameter


class QueueSolution(NamedTuple):
    success: float
    activity: float
    converged: bool


def cell_size_pmf(n, ratio):
    """P[N_u = n]: negative-binomial cell-load approximation with shape 3.5.

    Normalizes to one over n >= 0; the fixed point sums from n >= 1 with the
    n >= 1 tail renormalized (the serving cell holds at least its own user).
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if ratio <= 0:
        raise ValueError("density ratio must be positive")
    nu = _NU
    log_p = (
        nu * math.log(nu)
        + math.lgamma(n + nu)
        - math.lgamma(n + 1)
        - math.lgamma(nu)
        + n * math.log(ratio)
        - (n + nu) * math.log(ratio + nu)
    )
    return math.exp(log_p)


def _mean_inverse_load(ratio, tail=1e-10):
    """sum_{n>=1} p(n)/n, renormalized over n >= 1."""
    p0 = cell_size_pmf(0, ratio)
    total = 0.0
    mass = 0.0
    n = 1
    while True:
        p = cell_size_pmf(n, ratio)
        total += p / n
        mass += p
        if mass >= (1.0 - p0) * (1.0 - tail) and p < tail:
            break
        n += 1
        if n > 100000:
            break
    return total / (1.0 - p0)


def downlink_success(xi_u, theta, alpha, ratio, damping=0.5, tol=1e-10):
    """Downlink success probability with random scheduling.

    Damped fixed-point iteration from P_s = 1 on
    P_s = 1/(1 - p_A + p_A F(theta)), p_A = min(xi_u / (P_s S), 1),
    where F is the downlink hypergeometric and S the renormalized mean
    inverse cell load.
    """
    if not (0.0 <= xi_u <= 1.0):
        raise ValueError("arrival probability must lie in [0, 1]")
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    delta = 2.0 / alpha
    if theta == 0.0 or xi_u == 0.0:
        return QueueSolution(1.0, 0.0 if xi_u == 0.0 else min(xi_u / _mean_inverse_load(ratio), 1.0), True)
    f = float(gauss_2f1(1.0, -delta, 1.0 - delta, -theta))
    s = _mean_inverse_load(ratio)

    def step(ps):
        p_a = min(xi_u / (max(ps, 1e-12) * s), 1.0)
        return 1.0 / (1.0 - p_a + p_a * f)

    res = fixed_point_solve(step, init=1.0, damping=damping, tol=tol)
    ps = res.value
    p_a = min(xi_u / (ps * s), 1.0)
    return QueueSolution(ps, p_a, res.converged)


def bipolar_success(xi, theta, alpha, density, r_t):
    """Bipolar success probability with infinite buffers.

    P_s = max{exp(W(-xi C)), exp(-C)} with
    C = lam pi r_t^2 theta^delta Gamma(1+delta) Gamma(1-delta); the W branch
    exists iff xi C <= 1/e, and the max picks the saturated branch exactly
    when the arrival rate exceeds the saturated service rate.
    """
    if not (0.0 <= xi <= 1.0):
        raise ValueError("arrival probability must lie in [0, 1]")
    delta = 2.0 / alpha
    c = (
        density
        * math.pi
        * r_t**2
        * theta**delta
        * math.gamma(1.0 + delta)
        * math.gamma(1.0 - delta)
    )
    saturated = math.exp(-c)
    if xi * c <= 1.0 / math.e:
        unsaturated = math.exp(lambert_w0(-xi * c))
        ps = max(unsaturated, saturated)
    else:
        ps = saturated
    p_a = min(xi / ps, 1.0) if xi > 0 else 0.0
    return QueueSolution(ps, p_a, True)


# ---------------------------------------------------------------------------
# Discrete-time queue simulation
# ---------------------------------------------------------------------------


def _torus_gains(tx, rx, half, alpha):
    """Path gains between all transmitters and receivers on the torus."""
    d = np.abs(tx[:, None, :] - rx[None, :, :])
    d = np.minimum(d, 2.0 * half - d)
    dist = np.hypot(d[..., 0], d[..., 1])
    with np.errstate(divide="ignore"):
        return np.where(dist > 0, dist**-alpha, np.inf)


def _simulate_bipolar_trial(rng, xi, theta, alpha, density, r_t, slots, warmup, n_target, measure):
    half = 0.5 * math.sqrt(n_target / density)
    n = rng.poisson(density * (2.0 * half) ** 2)
    tx = rng.random((n, 2)) * 2.0 * half - half
    ang = rng.random(n) * 2.0 * math.pi
    rx = tx + r_t * np.column_stack([np.cos(ang), np.sin(ang)])
    # tagged pair at the center (Slivnyak)
    tx = np.vstack([[0.0, 0.0], tx])
    rx = np.vstack([[r_t, 0.0], rx])
    rx = (rx + half) % (2.0 * half) - half
    n_tot = len(tx)
    gains = _torus_gains(tx, rx, half, alpha)  # (tx, rx)
    own = np.diag(gains).copy()
    # log factors of the fading-averaged success product, L[k, i] for tx k / rx i
    lg = np.log1p(theta * gains / own[None, :])
    own_lg = np.diag(lg).copy()
    queues = np.zeros(n_tot, dtype=np.int64)
    p_sum = np.zeros(n_tot)
    p_cnt = np.zeros(n_tot, dtype=np.int64)
    for t in range(slots):
        queues += rng.random(n_tot) < xi
        idx = np.flatnonzero(queues > 0)
        if len(idx) == 0:
            continue
        # conditional success probability of each active link given the
        # active set; successes are conditionally independent Bernoulli
        # (fading columns are disjoint across receivers)
        logs = lg[idx, :].sum(axis=0)[idx] - own_lg[idx]
        p = np.exp(-logs)
        queues[idx[rng.random(len(idx)) < p]] -= 1
        if t >= warmup:
            p_sum[idx] += p
            p_cnt[idx] += 1
    if measure == "tagged":
        return [p_sum[0] / p_cnt[0]] if p_cnt[0] else []
    seen = p_cnt > 0
    return list(p_sum[seen] / p_cnt[seen])


def _simulate_downlink_trial(rng, xi_u, theta, alpha, ratio, slots, warmup, n_bs_target, measure):
    lam_b = 1.0  # scale free: SIR depends on ratios of distances only
    half = 0.5 * math.sqrt(n_bs_target / lam_b)
    n_bs = max(rng.poisson(lam_b * (2.0 * half) ** 2), 2)
    bs = rng.random((n_bs, 2)) * 2.0 * half - half
    n_u = rng.poisson(lam_b * ratio * (2.0 * half) ** 2)
    users = rng.random((n_u, 2)) * 2.0 * half - half
    users = np.vstack([[0.0, 0.0], users])  # tagged user at the origin
    d = np.abs(users[:, None, :] - bs[None, :, :])
    d = np.minimum(d, 2.0 * half - d)
    dist = np.hypot(d[..., 0], d[..., 1])
    serving = np.argmin(dist, axis=1)
    gain_to_user = dist**-alpha  # (users, bs)
    own_gain = gain_to_user[np.arange(len(users)), serving]
    # log factors per (user, interfering BS)
    lg = np.log1p(theta * gain_to_user / own_gain[:, None])
    own_lg = lg[np.arange(len(users)), serving]
    queues = np.zeros(len(users), dtype=np.int64)
    members = [np.flatnonzero(serving == b) for b in range(n_bs)]
    p_sum = np.zeros(len(users))
    p_cnt = np.zeros(len(users), dtype=np.int64)
    for t in range(slots):
        queues += rng.random(len(users)) < xi_u
        # random scheduling: each BS picks one of its users uniformly
        scheduled = np.full(n_bs, -1)
        for b, mem in enumerate(members):
            if len(mem):
                scheduled[b] = mem[rng.integers(0, len(mem))]
        candidate = scheduled >= 0
        active = candidate & (queues[np.maximum(scheduled, 0)] > 0)
        idx_bs = np.flatnonzero(active)
        if len(idx_bs) == 0:
            continue
        rx_users = scheduled[idx_bs]
        logs = lg[np.ix_(rx_users, idx_bs)].sum(axis=1) - own_lg[rx_users]
        p = np.exp(-logs)
        queues[rx_users[rng.random(len(rx_users)) < p]] -= 1
        if t >= warmup:
            p_sum[rx_users] += p
            p_cnt[rx_users] += 1
    if measure == "tagged":
        return [p_sum[0] / p_cnt[0]] if p_cnt[0] else []
    seen = p_cnt > 0
    return list(p_sum[seen] / p_cnt[seen])


def simulate_queues(
    mode,
    xi,
    theta,
    alpha,
    cfg,
    density=None,
    ratio=None,
    r_t=None,
    slots=2500,
    warmup=500,
    n_target=128,
    measure="all",
):
    """Discrete-time interacting-queue simulation.

    mode 'bipolar' needs density and r_t; mode 'downlink' needs the user/BS
    density ratio.  The measured quantity per link is its long-run
    fading-averaged success probability on slots where it transmits;
    measure='all' averages the per-link values of every link in the window
    (exchangeability makes each one a sample of the typical link, which tames
    the heavy pattern-to-pattern tail), measure='tagged' keeps only the link
    conditioned at the origin.
    """
    if slots <= warmup:
        raise ValueError("slots must exceed the warmup period")
    probs = []
    for trial in range(cfg.trials):
        rng = simengine.seed_stream(cfg.master_seed, trial, 19)
        if mode == "bipolar":
            if density is None or r_t is None:
                raise ValueError("bipolar mode needs density and r_t")
            p = _simulate_bipolar_trial(
                rng, xi, theta, alpha, density, r_t, slots, warmup, n_target, measure
            )
        elif mode == "downlink":
            if ratio is None:
                raise ValueError("downlink mode needs the density ratio")
            p = _simulate_downlink_trial(
                rng, xi, theta, alpha, ratio, slots, warmup, n_target, measure
            )
        else:
            raise ValueError("mode must be 'bipolar' or 'downlink'")
        if p:
            probs.append(float(np.mean(p)))
    if not probs:
        raise ValueError("no link transmitted after warmup; increase slots or xi")
    return simengine.confidence(np.asarray(probs), cfg.master_seed)
