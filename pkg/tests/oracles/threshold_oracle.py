"""Brute-force Youden-J threshold oracles.

Run directly to print the frozen constants used by the test suite:

    python3 tests/oracles/threshold_oracle.py

Two scans are implemented with plain Python loops so they share nothing
with the library: the uniform-grid scan (strict predicate, first argmax)
and the exhaustive unique-values scan used as the continuum reference.
"""

from __future__ import annotations


def j_statistic(fg: list[float], bg: list[float], t: float) -> float:
    tpr = sum(1 for s in fg if s > t) / len(fg)
    fpr = sum(1 for s in bg if s > t) / len(bg)
    return tpr - fpr


def grid_scan(fg: list[float], bg: list[float], steps: int = 200) -> tuple[float, float, int]:
    """First grid index attaining the maximal J over t_i = i/(steps-1)."""
    best_i, best_j = 0, None
    for i in range(steps):
        t = i / (steps - 1)
        j = j_statistic(fg, bg, t)
        if best_j is None or j > best_j:
            best_i, best_j = i, j
    return best_i / (steps - 1), best_j, best_i


def exact_scan(fg: list[float], bg: list[float]) -> tuple[float, float]:
    """Maximal J over candidate thresholds {0} plus unique scores in [0,1].

    Scores are clipped into [0,1] first; J is a step function whose value
    on [0,1] changes only at score positions, so this scan attains the
    supremum over the whole interval.
    """
    candidates = sorted({0.0} | {min(max(s, 0.0), 1.0) for s in fg + bg})
    best_t, best_j = 0.0, None
    for t in candidates:
        j = j_statistic(fg, bg, t)
        if best_j is None or j > best_j:
            best_t, best_j = t, j
    return best_t, best_j


if __name__ == "__main__":
    fg, bg = [0.9, 0.8], [0.1, 0.3]
    t, j, idx = grid_scan(fg, bg)
    print(f"worked example fg={fg} bg={bg}:")
    print(f"  grid scan: t* = {idx}/199 = {t!r}, J = {j!r}")
    te, je = exact_scan(fg, bg)
    print(f"  exact scan: t* = {te!r}, J = {je!r}")
