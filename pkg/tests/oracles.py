"""Independent reference computations used as test oracles.

Nothing here calls into the package's analytic path: the pair-number pmf,
routing and survival are re-derived from scratch and summed by brute force.
"""

import itertools
import math


def truncated_pmf(model, mu, kmax):
    if model == "thermal":
        exact = [mu**k / (1 + mu) ** (k + 1) for k in range(kmax)]
    else:
        exact = [math.exp(-mu) * mu**k / math.factorial(k) for k in range(kmax)]
    return exact + [1.0 - math.fsum(exact)]


def enumerate_cycle(n, pmf, eta_i, eta_s, eta_rt, dark=0.0, policy="first"):
    """Exact (p_herald, p_single, E[m], E[m(m-1)]) by summing over every
    pair-number tuple, herald outcome and surviving-photon count."""
    kmax = len(pmf) - 1
    p_herald = p_single = m1 = m2 = 0.0
    for ks in itertools.product(range(kmax + 1), repeat=n):
        w_k = math.prod(pmf[k] for k in ks)
        if w_k == 0:
            continue
        click = [1 - (1 - dark) * (1 - eta_i) ** k for k in ks]
        for bits in itertools.product((0, 1), repeat=n):
            w = w_k * math.prod(c if b else 1 - c for b, c in zip(bits, click))
            if w == 0 or not any(bits):
                continue
            p_herald += w
            heralded = [j for j, b in enumerate(bits, start=1) if b]
            j = heralded[0] if policy == "first" else heralded[-1]
            k = ks[j - 1]
            t = eta_s * eta_rt ** (n - j)
            for m in range(k + 1):
                pm = math.comb(k, m) * t**m * (1 - t) ** (k - m)
                if m >= 1:
                    p_single += w * pm
                m1 += w * pm * m
                m2 += w * pm * m * (m - 1)
    return p_herald, p_single, m1, m2


def herald_patterns(n):
    return itertools.product((0, 1), repeat=n)
