"""Independent reference implementations used by the unit and acceptance tests.

Each one follows the textbook definition directly (loops, dense solves) and
shares no code with the package. ``random_knots`` is a shared input generator.
"""
import itertools
import math

import numpy as np
from scipy.linalg import solve_banded


def lsq_oracle(x, window=11, order=3):
    """Per-sample normal-equations solve on the (possibly edge-truncated) window."""
    n, half = x.size, window // 2
    out = np.empty(n)
    for i in range(n):
        lo, hi = max(0, i - half), min(n, i + half + 1)
        if hi - lo <= order:  # only reachable for tiny windows
            lo, hi = (0, order + 1) if lo == 0 else (n - order - 1, n)
        t = np.arange(lo, hi) - i
        A = np.vander(t.astype(float), order + 1, increasing=True)
        coef = np.linalg.solve(A.T @ A, A.T @ x[lo:hi])
        out[i] = coef[0]
    return out



def natural_spline_oracle(y, factor):
    """Second-derivative (tridiagonal) formulation on unit knot spacing."""
    n = y.size
    ab = np.zeros((3, n))
    ab[1] = 4.0
    ab[0, 1:] = 1.0
    ab[2, :-1] = 1.0
    rhs = np.zeros(n)
    rhs[1:-1] = 6 * (y[2:] - 2 * y[1:-1] + y[:-2])
    ab[1, 0] = ab[1, -1] = 1.0
    ab[0, 1] = ab[2, -2] = 0.0
    M = solve_banded((1, 1), ab, rhs)
    t = np.arange((n - 1) * factor + 1) / factor
    k = np.minimum(t.astype(int), n - 2)
    a, b = k + 1 - t, t - k
    return (a * y[k] + b * y[k + 1]
            + ((a ** 3 - a) * M[k] + (b ** 3 - b) * M[k + 1]) / 6)



def direct_kde(samples, h, t):
    total = 0.0
    for v in samples:
        u = (t - v) / h
        total += math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)
    return total / (len(samples) * h)



def naive_triggers(stream, c):
    """Reference scan: explicit re-arm bookkeeping, one sample at a time."""
    out, armed, left = [], True, 0
    for i, s in enumerate(stream):
        if armed:
            if s > c.threshold:
                out.append(i)
                armed, left = False, c.inhibition_samples
        else:
            left -= 1
            if left == 0:
                armed = True
    return out



def conv_oracle(x, w, b, padding):
    cout, cin, k = w.shape
    xp = np.pad(x, ((0, 0), (padding, padding)))
    lout = xp.shape[1] - k + 1
    out = np.zeros((cout, lout))
    for o in range(cout):
        for t in range(lout):
            acc = b[o]
            for c in range(cin):
                for j in range(k):
                    acc += w[o, c, j] * xp[c, t + j]
            out[o, t] = acc
    return out



def auc_oracle(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    total = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a, b in itertools.product(pos, neg))
    return total / (len(pos) * len(neg))



def silhouette_oracle(x, labels):
    n = len(x)
    vals = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            vals.append(0.0)
            continue
        a = sum(np.linalg.norm(x[i] - x[j]) for j in own) / len(own)
        b = min(
            np.mean([np.linalg.norm(x[i] - x[j]) for j in range(n) if labels[j] == c])
            for c in set(labels) if c != labels[i])
        vals.append((b - a) / max(a, b) if max(a, b) > 0 else 0.0)
    return float(np.mean(vals))


def random_knots(rng, m=None):
    m = m or int(rng.integers(2, 12))
    t = np.cumsum(rng.uniform(0.01, 3, m))
    du = rng.uniform(0, 5, m - 1) * (rng.random(m - 1) > 0.3)
    u = np.r_[0, np.cumsum(du)] + rng.normal()
    return t, u
