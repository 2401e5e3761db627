"""Exhaustive k=2 clustering oracle for the two-triplet representative case.

Run directly to print the frozen expectation:

    python3 tests/oracles/kmeans_oracle.py

Scans every 2-partition of the six points, scores each by the k-means
objective (sum of squared distances to part means), and reports the
representative of each part of the best partition: the member closest to
the part mean, ties by lowest index.
"""

from __future__ import annotations

from itertools import combinations

# Two well-separated triplets in 2-D; small asymmetries make every
# point-to-mean distance distinct so the representatives are unique.
POINTS: list[tuple[float, float]] = [
    (0.0, 0.0),
    (1.0, 0.2),
    (0.4, 1.0),  # triplet one
    (10.0, 10.0),
    (11.2, 10.1),
    (10.3, 11.4),  # triplet two
]


def _mean(part: list[int]) -> tuple[float, float]:
    xs = [POINTS[i][0] for i in part]
    ys = [POINTS[i][1] for i in part]
    return sum(xs) / len(xs), sum(ys) / len(ys)


def _sqdist(a: tuple[float, float], b: tuple[float, float]) -> float:
    return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2


def best_partition() -> tuple[float, list[list[int]], list[int]]:
    n = len(POINTS)
    best = None
    for size in range(1, n // 2 + 1):
        for combo in combinations(range(n), size):
            a = list(combo)
            b = [i for i in range(n) if i not in combo]
            cost = 0.0
            for part in (a, b):
                mu = _mean(part)
                cost += sum(_sqdist(POINTS[i], mu) for i in part)
            if best is None or cost < best[0]:
                reps = []
                for part in (a, b):
                    mu = _mean(part)
                    reps.append(min(part, key=lambda i: (_sqdist(POINTS[i], mu), i)))
                best = (cost, [a, b], reps)
    return best


if __name__ == "__main__":
    cost, parts, reps = best_partition()
    print(f"points: {POINTS}")
    print(f"optimal 2-partition: {parts} with cost {cost!r}")
    print(f"representatives (closest to part mean, ties by index): {sorted(reps)}")
