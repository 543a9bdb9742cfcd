"""Independent reference computations used by the tests.

These deliberately avoid the package's own routines.
"""

import itertools
import math

import numpy as np


def clamp(x, lo=0.0, hi=1.0):
    return max(lo, min(hi, x))


def closest_points_clamped(p1, q1, p2, q2):
    """Closest points between two segments (clamped parametric search).

    Follows the classic case analysis: solve for the unconstrained minimum,
    clamp one parameter, recompute the other, clamp again. Returns (dist, s, t).
    """
    d1 = [q1[i] - p1[i] for i in range(3)]
    d2 = [q2[i] - p2[i] for i in range(3)]
    r = [p1[i] - p2[i] for i in range(3)]
    a = sum(x * x for x in d1)
    e = sum(x * x for x in d2)
    f = sum(d2[i] * r[i] for i in range(3))
    c = sum(d1[i] * r[i] for i in range(3))
    b = sum(d1[i] * d2[i] for i in range(3))
    denom = a * e - b * b
    if denom > 1e-12 * a * e:
        s = clamp((b * f - c * e) / denom)
    else:
        s = 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t = 0.0
        s = clamp(-c / a)
    elif t > 1.0:
        t = 1.0
        s = clamp((b - c) / a)
    c1 = [p1[i] + d1[i] * s for i in range(3)]
    c2 = [p2[i] + d2[i] * t for i in range(3)]
    return math.dist(c1, c2), s, t


def brute_force_crossings(elements, positions, tol=0.5, eps=1e-3):
    """O(n^2) count of element pairs meeting at interior points of both segments."""
    count = 0
    for (i, (a1, b1)), (j, (a2, b2)) in itertools.combinations(enumerate(elements), 2):
        if len({a1, b1, a2, b2}) < 4:
            continue
        dist, s, t = closest_points_clamped(positions[a1], positions[b1], positions[a2], positions[b2])
        if dist < tol and eps < s < 1 - eps and eps < t < 1 - eps:
            count += 1
    return count


def grid_pairs_chebyshev(shape, spacing, degree):
    """All node pairs of a regular grid within Chebyshev distance ``degree``,
    minus pairs whose segment passes through another grid node (gcd test)."""
    pts = list(itertools.product(*(range(n) for n in shape)))
    pairs = []
    for p, q in itertools.combinations(pts, 2):
        d = [abs(q[k] - p[k]) for k in range(3)]
        if max(d) > degree:
            continue
        if math.gcd(math.gcd(d[0], d[1]), d[2]) > 1:
            continue
        pairs.append((p, q))
    lengths = [math.sqrt(sum(((q[k] - p[k]) * spacing[k]) ** 2 for k in range(3))) for p, q in pairs]
    return pairs, lengths
