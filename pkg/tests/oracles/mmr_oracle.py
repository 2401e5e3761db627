"""Exhaustive pick-order oracle for the MMR duplicate-skipping case.

Run directly to print the frozen expectation:

    python3 tests/oracles/mmr_oracle.py

Enumerates every ordered pick sequence of length 2 from the bank
{A, A-duplicate, B} and replays the greedy MMR rule by hand: first pick
maximizes raw relevance, later picks maximize relevance minus
lambda * max cosine to the already-picked set, ties to the lower index.
The greedy sequence must be the unique sequence the rule produces.
"""

from __future__ import annotations

from itertools import permutations

# Unit 2-D embeddings: A and its duplicate coincide; B is orthogonal.
EMBED = {0: (1.0, 0.0), 1: (1.0, 0.0), 2: (0.0, 1.0)}
# r_A > r_B > r_A - 1 so the duplicate's unit self-similarity (penalty
# lambda*1 with lambda=1) pushes it below B on the second pick.
RELEVANCE = {0: 0.9, 1: 0.9, 2: 0.5}
LAMBDA = 1.0


def dot(a: tuple[float, float], b: tuple[float, float]) -> float:
    return a[0] * b[0] + a[1] * b[1]


def greedy(max_picks: int = 2) -> list[int]:
    remaining = sorted(EMBED)
    picked: list[int] = []
    while remaining and len(picked) < max_picks:
        def score(j: int) -> float:
            if not picked:
                return RELEVANCE[j]
            penalty = max(dot(EMBED[j], EMBED[s]) for s in picked)
            return RELEVANCE[j] - LAMBDA * penalty

        best = max(remaining, key=lambda j: (score(j), -j))
        picked.append(best)
        remaining.remove(best)
    return picked


def verify_unique(expected: list[int]) -> None:
    """Check no other pick order satisfies the greedy optimality at each step."""
    for seq in permutations(EMBED, 2):
        seq = list(seq)
        if seq == expected:
            continue
        # A sequence is greedy-consistent iff each pick maximizes the rule.
        picked: list[int] = []
        consistent = True
        for choice in seq:
            remaining = [j for j in EMBED if j not in picked]

            def score(j: int) -> float:
                if not picked:
                    return RELEVANCE[j]
                return RELEVANCE[j] - LAMBDA * max(dot(EMBED[j], EMBED[s]) for s in picked)

            best = max(remaining, key=lambda j: (score(j), -j))
            if best != choice:
                consistent = False
                break
            picked.append(choice)
        if consistent:
            raise AssertionError(f"second greedy-consistent sequence found: {seq}")


if __name__ == "__main__":
    picks = greedy()
    verify_unique(picks)
    print(f"relevances: {RELEVANCE}, lambda = {LAMBDA}")
    print(f"unique greedy pick order: {picks}  (A then B, duplicate skipped)")
