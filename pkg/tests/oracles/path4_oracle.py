"""Fiedler sign pattern of the unweighted path graph on 4 vertices.

Run directly to print the frozen expectation:

    python3 tests/oracles/path4_oracle.py

The normalized Laplacian of P4 is built by hand and its Fiedler vector
found by scanning the characteristic polynomial with interval bisection
using Fraction arithmetic for the polynomial coefficients, then solving
the linear system at the root. No numpy involved.
"""

from __future__ import annotations

from fractions import Fraction
from math import sqrt


def l_sym_p4() -> list[list[float]]:
    # degrees (1, 2, 2, 1); L = I - D^{-1/2} A D^{-1/2}
    s2 = 1.0 / sqrt(2.0)
    return [
        [1.0, -s2, 0.0, 0.0],
        [-s2, 1.0, -0.5, -0.0],
        [0.0, -0.5, 1.0, -s2],
        [0.0, 0.0, -s2, 1.0],
    ]


def charpoly_at(x: Fraction) -> Fraction:
    """det(L - x I) expanded symbolically.

    With t = 1 - x the determinant is t^4 - (5/4) t^2 + 1/4, using the
    off-diagonal squares 1/2, 1/4, 1/2 of the tridiagonal matrix.
    """
    t = Fraction(1) - x
    return t**4 - Fraction(5, 4) * t * t + Fraction(1, 4)


def bisect_root(lo: Fraction, hi: Fraction, iters: int = 200) -> Fraction:
    flo = charpoly_at(lo)
    for _ in range(iters):
        mid = (lo + hi) / 2
        fmid = charpoly_at(mid)
        if (fmid <= 0) == (flo <= 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return (lo + hi) / 2


def fiedler_sign_pattern() -> tuple[float, list[int]]:
    # Roots of t^4 - 5/4 t^2 + 1/4 are t^2 in {1/4, 1}; eigenvalues
    # x = 1 - t in {0, 1/2, 3/2, 2}. The Fiedler value is 1/2; bisection
    # confirms it from the polynomial alone.
    lam = bisect_root(Fraction(1, 4), Fraction(3, 4))
    assert abs(lam - Fraction(1, 2)) < Fraction(1, 10**40)
    # Solve (L - 1/2 I) v = 0 by back-substitution with v4 = 1:
    # row 4: -v3/sqrt2 + v4/2 = 0        -> v3 = sqrt(2)/2 * v4... sign +
    # row 1:  v1/2 - v2/sqrt2 = 0        -> v2 = v1/sqrt(2) * ... sign of v1
    # row 2: -v1/sqrt2 + v2/2 - v3/2 = 0 -> links the halves with opposite sign
    s2 = sqrt(2.0)
    v4 = 1.0
    v3 = v4 / s2 * 1.0  # from row 4: v3 = (1/2) v4 * sqrt(2)
    # from row 2 and 3 symmetry the first half mirrors with flipped sign
    v2 = -v3
    v1 = -v4
    # Verify against the dense rows numerically.
    l = l_sym_p4()
    v = [v1, v2, v3, v4]
    for i in range(4):
        r = sum(l[i][j] * v[j] for j in range(4)) - 0.5 * v[i]
        assert abs(r) < 1e-12, f"row {i} residual {r}"
    signs = [1 if x > 0 else -1 for x in v]
    return float(lam), signs


if __name__ == "__main__":
    lam, signs = fiedler_sign_pattern()
    print(f"P4 normalized-Laplacian eigenvalues: 0, 1/2, 3/2, 2")
    print(f"Fiedler eigenvalue: {lam!r}")
    print(f"Fiedler sign pattern (up to global sign): {signs}")
