"""Independent reference implementations used to check the package.

Everything here is written the slow, obvious way — explicit loops,
brute-force enumeration — deliberately sharing no code with the package
under test beyond numpy/scipy primitives.
"""

import itertools
import math

import numpy as np
from scipy.special import betaln, logsumexp


def set_partitions(n: int) -> list[np.ndarray]:
    """All partitions of n items as canonical label vectors (growth strings)."""
    out: list[np.ndarray] = []

    def rec(prefix: list, used: int):
        if len(prefix) == n:
            out.append(np.asarray(prefix, dtype=np.int64))
            return
        for c in range(used + 1):
            rec(prefix + [c], max(used, c + 1))

    rec([], 0)
    return out


def crp_log_prob_sequential(labels, gamma: float) -> float:
    """Log CRP probability via the literal one-customer-at-a-time product."""
    logp = 0.0
    counts: list[int] = []
    for lbl in np.asarray(labels, dtype=np.int64):
        denom = sum(counts) + gamma
        if lbl == len(counts):
            logp += math.log(gamma / denom)
            counts.append(1)
        else:
            logp += math.log(counts[lbl] / denom)
            counts[lbl] += 1
    return logp


def block_counts(data, labels, n_classes: int):
    """Observed link/non-link tallies per ordered class pair, by raw loops."""
    z = np.asarray(labels, dtype=np.int64)
    ones = [[0] * n_classes for _ in range(n_classes)]
    zeros = [[0] * n_classes for _ in range(n_classes)]
    for i in range(data.n_entities):
        for j in range(data.n_entities):
            if data.observed_mask[i, j]:
                if data.cells[i, j] == 1:
                    ones[z[i]][z[j]] += 1
                else:
                    zeros[z[i]][z[j]] += 1
    return ones, zeros


def marginal_loglik(data, labels, alpha: float) -> float:
    """Collapsed log-likelihood of the observed cells given a labeling."""
    z = np.asarray(labels, dtype=np.int64)
    k = int(z.max()) + 1 if z.size else 0
    ones, zeros = block_counts(data, z, k)
    total = 0.0
    for a in range(k):
        for b in range(k):
            total += betaln(alpha + ones[a][b], alpha + zeros[a][b]) - betaln(
                alpha, alpha
            )
    return float(total)


def exact_irm_partition_posterior(data, alpha: float, gamma: float) -> dict:
    """Posterior over all partitions by brute-force enumeration."""
    parts = set_partitions(data.n_entities)
    logw = np.asarray(
        [
            marginal_loglik(data, z, alpha) + crp_log_prob_sequential(z, gamma)
            for z in parts
        ]
    )
    probs = np.exp(logw - logsumexp(logw))
    probs = probs / probs.sum()
    return {tuple(int(v) for v in z): float(p) for z, p in zip(parts, probs)}


def exact_irm_predictive(data, cells, alpha: float, gamma: float) -> np.ndarray:
    """Exact posterior predictive link probability for each queried cell."""
    parts = set_partitions(data.n_entities)
    logw = np.asarray(
        [
            marginal_loglik(data, z, alpha) + crp_log_prob_sequential(z, gamma)
            for z in parts
        ]
    )
    weights = np.exp(logw - logsumexp(logw))
    weights = weights / weights.sum()
    preds = np.zeros(len(cells))
    for z, w in zip(parts, weights):
        k = int(z.max()) + 1
        ones, zeros = block_counts(data, z, k)
        for q, (r, c) in enumerate(cells):
            n1 = ones[z[r]][z[c]]
            n0 = zeros[z[r]][z[c]]
            preds[q] += w * (n1 + alpha) / (n1 + n0 + 2.0 * alpha)
    return preds


def stored_log_joint(data, system, labels) -> float:
    """Log p(labels, observed cells) under a frozen stored system."""
    z = np.asarray(labels, dtype=np.int64)
    logp = 0.0
    for i in range(data.n_entities):
        logp += math.log(system.class_probs[z[i]])
    for i in range(data.n_entities):
        for j in range(data.n_entities):
            if data.observed_mask[i, j]:
                eta = float(system.link_probs[z[i], z[j]])
                logp += math.log(eta) if data.cells[i, j] == 1 else math.log1p(-eta)
    return logp


def exact_stored_enumeration(data, system):
    """(assignment -> posterior prob, log evidence) over all m^n labelings."""
    m = system.link_probs.shape[0]
    n = data.n_entities
    live = [c for c in range(m) if system.class_probs[c] > 0.0]
    zs = [np.asarray(z, dtype=np.int64) for z in itertools.product(live, repeat=n)]
    logj = np.asarray([stored_log_joint(data, system, z) for z in zs])
    log_evidence = float(logsumexp(logj))
    probs = np.exp(logj - log_evidence)
    probs = probs / probs.sum()
    return {tuple(int(v) for v in z): float(p) for z, p in zip(zs, probs)}, log_evidence


def exact_stored_predictive(data, system, cells) -> np.ndarray:
    """Exact posterior predictive under one stored system, by enumeration."""
    posterior, _ = exact_stored_enumeration(data, system)
    preds = np.zeros(len(cells))
    for z, w in posterior.items():
        for q, (r, c) in enumerate(cells):
            preds[q] += w * float(system.link_probs[z[r], z[c]])
    return preds


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


# Truncated prior CDFs for the hyperparameter samplers. ---------------------

def truncated_power_cdf(x, lo: float = 1e-3, hi: float = 1e3):
    """CDF of the density proportional to a^(-5/2) truncated to [lo, hi]."""
    x = np.clip(np.asarray(x, dtype=np.float64), lo, hi)
    norm = lo ** (-1.5) - hi ** (-1.5)
    return (lo ** (-1.5) - x ** (-1.5)) / norm


def truncated_exp_cdf(x, lo: float = 1e-3, hi: float = 1e3):
    """CDF of the unit-rate exponential truncated to [lo, hi]."""
    x = np.clip(np.asarray(x, dtype=np.float64), lo, hi)
    norm = math.exp(-lo) - math.exp(-hi)
    return (np.exp(-lo) - np.exp(-x)) / norm
