"""Small hand-rolled instances and brute-force oracles shared by the test modules."""

import itertools

import numpy as np

from cubic_portfolio.instance import PortfolioInstance


def random_instance(rng, n, K, m=None, cubic_scale=1.0, sectors=False):
    """A random PSD-covariance instance with ``m`` distinct random triples (no sector structure)."""
    A = rng.normal(size=(n, n))
    cov = A @ A.T / n + 0.1 * np.eye(n)
    mu = rng.uniform(0.0, 1.0, size=n)
    if m is None:
        m = n
    all_triples = list(itertools.combinations(range(n), 3))
    pick = rng.choice(len(all_triples), size=min(m, len(all_triples)), replace=False)
    triples = np.array([all_triples[p] for p in sorted(pick)], dtype=np.int64).reshape(-1, 3)
    coeff = rng.exponential(cubic_scale, size=len(triples))
    return PortfolioInstance(n=n, K=K, covariance=cov, expected_return=mu, triples=triples,
                             cubic_coeff=coeff, sector_of=np.zeros(n, dtype=np.int64))


def hand_instance(cov, mu, triples=(), coeff=(), K=1):
    cov = np.asarray(cov, dtype=float)
    n = len(cov)
    return PortfolioInstance(n=n, K=K, covariance=cov, expected_return=np.asarray(mu, dtype=float),
                             triples=np.array(triples, dtype=np.int64).reshape(-1, 3),
                             cubic_coeff=np.asarray(coeff, dtype=float),
                             sector_of=np.zeros(n, dtype=np.int64))


def term_sum(instance, x):
    """Native objective by explicit loops over every term."""
    x = [float(v) for v in x]
    n = instance.n
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += instance.covariance[i, j] * x[i] * x[j]
    for i in range(n):
        total -= instance.expected_return[i] * x[i]
    for (i, j, k), c in zip(instance.triples.tolist(), instance.cubic_coeff):
        total += c * x[i] * x[j] * x[k]
    return total


def all_selections(n, K):
    for combo in itertools.combinations(range(n), K):
        sel = np.zeros(n, dtype=np.int8)
        sel[list(combo)] = 1
        yield sel


def all_states(n_bits):
    for bits in itertools.product((0, 1), repeat=n_bits):
        yield np.array(bits, dtype=np.int8)
