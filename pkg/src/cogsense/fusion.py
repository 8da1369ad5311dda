"""Hard-decision cooperative baselines: OR, AND and K-out-of-N combining.

Local decisions are assumed independent across SUs, so the system-level
detection and false-alarm probabilities are binomial tails of the local
ones.
"""

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class FusionRule:
    """Declare the PU present when at least k of the N local decisions do;
    k=1 is OR, k=N is AND."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


def local_decision(energy, tau):
    """Single-SU threshold test; the boundary energy == tau decides idle."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    return 1 if energy > tau else -1


def fuse(decisions, rule):
    """Combine +1/-1 local decisions under the K-out-of-N rule."""
    decisions = list(decisions)
    if rule.k > len(decisions):
        raise ValueError(f"k={rule.k} exceeds the number of decisions ({len(decisions)})")
    votes = sum(1 for d in decisions if d == 1)
    return 1 if votes >= rule.k else -1


def _binomial_tail(p, n, k):
    if p <= 0.0:
        return 0.0 if k >= 1 else 1.0
    if p >= 1.0:
        return 1.0
    return sum(math.comb(n, j) * p**j * (1.0 - p) ** (n - j) for j in range(k, n + 1))


def fusion_system_curve(p_local_d, p_local_fa, n, k):
    """System (Pd, Pfa) for i.i.d. local probabilities under K-out-of-N."""
    if not (0.0 <= p_local_d <= 1.0 and 0.0 <= p_local_fa <= 1.0):
        raise ValueError("local probabilities must lie in [0, 1]")
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    return _binomial_tail(p_local_d, n, k), _binomial_tail(p_local_fa, n, k)
