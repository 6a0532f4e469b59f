"""Brute-force reference computations shared by the test modules.

Everything here enumerates survivor chains exhaustively with exact binomial
probabilities, so it only scales to tiny cohorts and horizons.
"""

from math import comb

import numpy as np


def binom_pmf(n: int, k: int, p: float) -> float:
    return comb(n, k) * p**k * (1.0 - p) ** (n - k)


def enumerate_chains(l0: int, paths) -> list[tuple[float, tuple[int, ...]]]:
    """All ``(probability, (l_1..l_T))`` outcomes under an equal-weight path mixture."""
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    K, T = paths.shape
    out = []

    def walk(k, t, alive, prob, chain):
        if t == T:
            out.append((prob / K, tuple(chain)))
            return
        for nxt in range(alive + 1):
            pr = binom_pmf(alive, nxt, paths[k, t])
            if pr > 0.0:
                walk(k, t + 1, nxt, prob * pr, chain + [nxt])

    for k in range(K):
        walk(k, 0, l0, 1.0, [])
    return out


def chain_mean_cov(outcomes) -> tuple[np.ndarray, np.ndarray]:
    probs = np.array([p for p, _ in outcomes])
    chains = np.array([c for _, c in outcomes], dtype=float)
    mean = probs @ chains
    centred = chains - mean
    return mean, (centred * probs[:, None]).T @ centred


def mv(values, probs, gamma: float) -> float:
    values, probs = np.asarray(values, dtype=float), np.asarray(probs, dtype=float)
    m = probs @ values
    return float(m - 0.5 * gamma * (probs @ (values - m) ** 2))


def surpluses_by_hand(l0, lives, u, fixed, eta, rate, b0=0.0, s0=0.0) -> tuple[float, float]:
    """Plain-loop surplus recursion for one chain."""
    b, s = b0, s0
    for t in range(len(lives)):
        swap = u[t] * (lives[t] - (1.0 + eta) * fixed[t])
        b = b * (1.0 + rate) - lives[t] + swap
        s = s * (1.0 + rate) - swap
    return b, s


def subgame_perfect_path(l0, p_bench, p_prior, eta, rate, gamma, step=1e-3):
    """State-dependent equilibrium by backward induction over a hedge-ratio grid.

    At each ``(t, l)`` the current self picks ``u`` to maximise the mean-variance
    criterion of the remaining terminal cash, with later selves' choices held
    fixed. Conditional moments are exact binomial sums. Returns a dict
    ``u[(t, l)]`` over every reachable state with ``l > 0``.
    """
    T = len(p_bench)
    grid = np.round(np.arange(0.0, 1.0 + step / 2, step), 12)
    # mean and second moment of terminal cash accrued after time t, given l_t
    m1 = {(T, l): 0.0 for l in range(l0 + 1)}
    m2 = {(T, l): 0.0 for l in range(l0 + 1)}
    policy = {}
    for t in range(T - 1, -1, -1):
        acc = (1.0 + rate) ** (T - t - 1)
        pb, pl = p_bench[t], p_prior[t]
        for l in range(l0 + 1):
            outcomes = [(binom_pmf(l, n, pl), n) for n in range(l + 1)]
            best = None
            for u in grid if l > 0 else [0.0]:
                e1 = e2 = 0.0
                for pr, n in outcomes:
                    cash = acc * (-n + u * (n - (1.0 + eta) * pb * l))
                    e1 += pr * (cash + m1[(t + 1, n)])
                    e2 += pr * (cash**2 + 2 * cash * m1[(t + 1, n)] + m2[(t + 1, n)])
                value = e1 - 0.5 * gamma * (e2 - e1**2)
                if best is None or value > best[0] + 1e-12:
                    best = (value, u, e1, e2)
            _, u_best, m1[(t, l)], m2[(t, l)] = best
            if l > 0:
                policy[(t, l)] = u_best
    return policy, m1[(0, l0)], m2[(0, l0)]


def linear_functional_moments(l0: int, paths, weights) -> tuple[float, float]:
    """Exact mean and variance of ``sum_t weights[t] * l_{t+1}`` under a path mixture.

    Backward dynamic programme over the survivor count: for each time and count
    it stores the conditional first and second moments of the remaining sum.
    """
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    K, T = paths.shape
    counts = np.arange(l0 + 1)
    first = second = 0.0
    for k in range(K):
        m1 = np.zeros(l0 + 1)
        m2 = np.zeros(l0 + 1)
        for t in range(T - 1, -1, -1):
            n1, n2 = np.zeros(l0 + 1), np.zeros(l0 + 1)
            for l in counts:
                pmf = np.array([binom_pmf(int(l), int(n), paths[k, t]) for n in range(l + 1)])
                nxt = counts[: l + 1]
                cash = weights[t] * nxt
                n1[l] = pmf @ (cash + m1[: l + 1])
                n2[l] = pmf @ (cash**2 + 2 * cash * m1[: l + 1] + m2[: l + 1])
            m1, m2 = n1, n2
        first += m1[l0] / K
        second += m2[l0] / K
    return float(first), float(second - first**2)
