"""Independent oracles: exhaustive enumeration and plain-python sums.

Everything here is deliberately written against the definitions, not the
package code paths it checks: compositions come from stars-and-bars over
itertools.combinations, weights from a scalar loop, probabilities from
dictionaries over full configurations.
"""

import itertools
import math


def compositions(total, parts):
    """All ordered non-negative integer compositions via stars and bars."""
    for cut in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for c in cut:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 2 - prev)
        yield tuple(out)


def site_weight(alpha, k):
    """Stationary weight 1/a(k) with a(0)=1, a(k)=k**alpha."""
    return 1.0 if k == 0 else float(k) ** (-alpha)


def site_law(alpha, cutoff):
    """nu_{1,N} masses by direct scalar summation."""
    w = [site_weight(alpha, k) for k in range(cutoff + 1)]
    z = math.fsum(w)
    return [x / z for x in w], z


def site_moments(alpha, cutoff):
    """(mean, second moment) of nu_{1,N} by direct summation."""
    masses, _ = site_law(alpha, cutoff)
    mean = math.fsum(k * p for k, p in enumerate(masses))
    second = math.fsum(k * k * p for k, p in enumerate(masses))
    return mean, second


def brute_mu(alpha, N, L):
    """(configs, probabilities, Z_{N,L}) by exhaustive enumeration."""
    configs = list(compositions(N, L))
    weights = [math.prod(site_weight(alpha, k) for k in c) for c in configs]
    z = math.fsum(weights)
    return configs, [w / z for w in weights], z


def brute_sum_law(alpha, N, L):
    """P[sum of L iid nu_{1,N} sites = n] for n = 0..N, by enumeration."""
    masses, _ = site_law(alpha, N)
    out = []
    for n in range(N + 1):
        out.append(math.fsum(math.prod(masses[k] for k in c) for c in compositions(n, L)))
    return out


def brute_marginal(alpha, N, L):
    """mu_{N,L}[eta_1 = k] for k = 0..N."""
    configs, probs, _ = brute_mu(alpha, N, L)
    out = [0.0] * (N + 1)
    for c, p in zip(configs, probs):
        out[c[0]] += p
    return out


def brute_max_law(alpha, N, L):
    """Law of the maximum under mu_{N,L}."""
    configs, probs, _ = brute_mu(alpha, N, L)
    out = [0.0] * (N + 1)
    for c, p in zip(configs, probs):
        out[max(c)] += p
    return out


def brute_background_law(alpha, N, L, d):
    """Law of the first d coordinates after tie-split deletion of the max."""
    configs, probs, _ = brute_mu(alpha, N, L)
    out = {}
    for c, p in zip(configs, probs):
        m = max(c)
        ties = [i for i, k in enumerate(c) if k == m]
        for pos in ties:
            rest = c[:pos] + c[pos + 1 :]
            key = rest[:d]
            out[key] = out.get(key, 0.0) + p / len(ties)
    return out


def brute_events(alpha, N, L, B):
    """(E0, E1, E2) masses under nu^L with threshold eta_x >= B."""
    masses, _ = site_law(alpha, N)
    e = [0.0, 0.0, 0.0]
    for c in compositions(N, L):
        xi = sum(1 for k in c if k >= B)
        p = math.prod(masses[k] for k in c)
        e[min(xi, 2)] += p
    return e
