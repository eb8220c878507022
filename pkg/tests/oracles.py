"""Independent reference implementations used to pin expected test values.

Everything here deliberately avoids the production code paths: marginal
likelihoods come from numerical quadrature of the defining integrals,
segmentations from an exhaustive dynamic program without pruning, and
matchings from a bitmask search over all one-to-one pairings.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate


# ---------------------------------------------------------------------------
# marginal likelihoods by quadrature
# ---------------------------------------------------------------------------


def poisson_log_marginal_quadrature(
    data, alpha: float, rate: float, lam_hi: float = 200.0
) -> float:
    """log integral of prod Poisson(d | lam) * Gamma(lam | alpha, rate) d lam."""
    data = np.asarray(data, dtype=float)

    def log_integrand(lam: float) -> float:
        if lam <= 0:
            return -np.inf
        loglik = float(np.sum(data * math.log(lam) - lam - [math.lgamma(d + 1) for d in data]))
        logprior = (
            alpha * math.log(rate)
            - math.lgamma(alpha)
            + (alpha - 1) * math.log(lam)
            - rate * lam
        )
        return loglik + logprior

    # Peak-rescale so the integrand is O(1) where it matters.
    lam_hat = max((data.sum() + alpha - 1) / (len(data) + rate), 1e-6)
    log_peak = log_integrand(lam_hat)

    def scaled(lam: float) -> float:
        return math.exp(log_integrand(lam) - log_peak) if lam > 0 else 0.0

    value, _ = integrate.quad(scaled, 0.0, lam_hi, limit=200)
    return log_peak + math.log(value)


def gaussian_log_marginal_quadrature(
    data, mu0: float, kappa0: float, a0: float, b0: float
) -> float:
    """log double integral of the Gaussian likelihood under the
    Normal-Inverse-Gamma prior, over mean and log variance.

    Substituting var = e^w turns the heavy-tailed variance direction into a
    well-behaved bump, which plain adaptive quadrature integrates to full
    precision.
    """
    data = np.asarray(data, dtype=float)
    m = len(data)

    def log_integrand(mu: float, w: float) -> float:
        var = math.exp(w)
        loglik = -0.5 * m * math.log(2 * math.pi * var) - float(
            np.sum((data - mu) ** 2)
        ) / (2 * var)
        logprior_mu = (
            -0.5 * math.log(2 * math.pi * var / kappa0)
            - kappa0 * (mu - mu0) ** 2 / (2 * var)
        )
        logprior_var = (
            a0 * math.log(b0) - math.lgamma(a0) - (a0 + 1) * math.log(var) - b0 / var
        )
        # + w is the Jacobian of var = e^w.
        return loglik + logprior_mu + logprior_var + w

    ybar = float(data.mean())
    ssd = float(np.sum((data - ybar) ** 2))
    var_hat = max((b0 + 0.5 * ssd) / (a0 + m / 2 + 1), 1e-4)
    w_hat = math.log(var_hat)
    mu_hat = (kappa0 * mu0 + m * ybar) / (kappa0 + m)
    log_peak = log_integrand(mu_hat, w_hat)

    def scaled(mu: float, w: float) -> float:
        return math.exp(log_integrand(mu, w) - log_peak)

    def mu_halfwidth(w: float) -> float:
        # The conditional mean scale grows with the variance slice.
        return math.sqrt(math.exp(w) / (kappa0 + m)) * 14 + abs(ybar - mu0)

    value, _ = integrate.dblquad(
        scaled,
        w_hat - 26.0,
        w_hat + 26.0,
        lambda w: mu_hat - mu_halfwidth(w),
        lambda w: mu_hat + mu_halfwidth(w),
        epsabs=1e-13,
        epsrel=1e-10,
    )
    return log_peak + math.log(value)


# ---------------------------------------------------------------------------
# exhaustive segmentation
# ---------------------------------------------------------------------------


def rbf_cost_direct(values, s: int, t: int, gamma: float) -> float:
    """Plain double-loop kernel scatter, the slow-but-obvious version."""
    seg = np.asarray(values, dtype=float)[s:t]
    m = len(seg)
    if m == 1:
        return 0.0
    total = 0.0
    for i in range(m):
        for j in range(m):
            total += math.exp(-gamma * (seg[i] - seg[j]) ** 2)
    return m - total / m


def exhaustive_optimal_cost(values, beta: float, gamma: float, min_seg: int) -> float:
    """Unpruned optimal-partitioning DP over all split positions."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    # Vectorized Gram matrix is still an independent path from the
    # production incremental row updates.
    gram = np.exp(-gamma * (values[:, None] - values[None, :]) ** 2)
    padded = np.zeros((n + 1, n + 1))
    padded[1:, 1:] = np.cumsum(np.cumsum(gram, axis=0), axis=1)

    def cost(s: int, t: int) -> float:
        m = t - s
        block = padded[t, t] - padded[s, t] - padded[t, s] + padded[s, s]
        return m - block / m

    inf = float("inf")
    F = [inf] * (n + 1)
    F[0] = -beta
    for t in range(1, n + 1):
        for s in range(0, t - min_seg + 1):
            if F[s] == inf:
                continue
            c = F[s] + cost(s, t) + beta
            if c < F[t]:
                F[t] = c
    return F[n]


def exhaustive_constrained_cost(
    values, admissible: list[int], beta: float, gamma: float, min_seg: int
) -> float:
    """Brute force over every subset of the admissible split positions."""
    from itertools import combinations

    values = np.asarray(values, dtype=float)
    n = len(values)
    best = float("inf")
    points = sorted(i for i in admissible if 1 <= i <= n - 1)
    for k in range(len(points) + 1):
        for combo in combinations(points, k):
            bounds = [0, *combo, n]
            if any(b - a < min_seg for a, b in zip(bounds, bounds[1:])):
                continue
            total = sum(
                rbf_cost_direct(values, a, b, gamma)
                for a, b in zip(bounds, bounds[1:])
            ) + beta * k
            best = min(best, total)
    return best


# ---------------------------------------------------------------------------
# exhaustive margin matching
# ---------------------------------------------------------------------------


def max_matching_bruteforce(pred: list[int], truth: list[int], margin: int) -> int:
    """Maximum one-to-one matching cardinality by bitmask DP over truths."""
    nt = len(truth)
    memo: dict[tuple[int, int], int] = {}

    def go(i: int, used: int) -> int:
        if i == len(pred):
            return 0
        key = (i, used)
        if key in memo:
            return memo[key]
        best = go(i + 1, used)
        for j in range(nt):
            if used & (1 << j):
                continue
            if abs(pred[i] - truth[j]) <= margin:
                best = max(best, 1 + go(i + 1, used | (1 << j)))
        memo[key] = best
        return best

    return go(0, 0)
