"""Degree-normalized Laplacian and the Fiedler eigenpair.

The iterative solver is a block LOBPCG with Rayleigh-Ritz on the
[X, R, P] subspace and re-orthonormalization each iteration. A dense
eigendecomposition doubles as the small-size path and as the oracle the
iterative solver is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConvergenceError, IsolatedVertexError
from .graph import AnchoredGraph, anchored_csr, anchored_dense

DENSE_ORACLE_LIMIT = 4096


@dataclass(frozen=True)
class Laplacian:
    """L_sym = I - D^{-1/2} W D^{-1/2} over the anchored graph."""

    size: int
    degrees: np.ndarray  # (size,) positive
    dense: np.ndarray | None = None  # (size, size) symmetric
    # CSR of the degree-scaled adjacency D^{-1/2} W D^{-1/2}.
    sparse: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def matmat(self, x: np.ndarray) -> np.ndarray:
        """Apply L_sym to a block of column vectors."""
        if self.dense is not None:
            return self.dense @ x
        indptr, indices, data = self.sparse
        return x - kernels.csr_matmat(data, indices, indptr, x)

    def to_dense(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        indptr, indices, data = self.sparse
        w_hat = np.zeros((self.size, self.size), dtype=np.float64)
        rows = np.repeat(np.arange(self.size, dtype=np.int64), np.diff(indptr))
        w_hat[rows, indices] = data
        out = np.eye(self.size) - w_hat
        return (out + out.T) * 0.5


@dataclass(frozen=True)
class SolverConfig:
    method: str = "lobpcg"  # lobpcg | dense
    k: int = 2
    tol: float = 1e-8
    max_iters: int = 200
    seed: int = 0
    rescale_generalized: bool = True
    # Implementation knobs: sizes below dense_cutoff solve densely, and
    # non-convergence falls back to dense unless allow_fallback is off.
    dense_cutoff: int = 512
    allow_fallback: bool = True
    jacobi_precond: bool = False

    def validate(self) -> None:
        if self.method not in ("lobpcg", "dense"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if self.k < 2:
            raise ValueError(f"k must be at least 2, got {self.k}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")


@dataclass(frozen=True)
class SpectralResult:
    lambda2: float
    fiedler: np.ndarray  # unit norm
    iterations: int
    residual: float  # ||L v - lambda v|| for the unit symmetric eigenvector
    diagnostics: dict = field(default_factory=dict)


def normalized_laplacian(g: AnchoredGraph, sparse: bool | None = None) -> Laplacian:
    """Form L_sym and the degree vector for the anchored graph.

    `sparse` defaults to the layout of the feature graph. Raises an
    isolated-vertex error when any degree is zero.
    """
    if sparse is None:
        sparse = g.is_sparse
    if sparse:
        indptr, indices, data = anchored_csr(g)
        n = g.size
        rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
        degrees = np.bincount(rows, weights=data, minlength=n)
        _check_degrees(degrees)
        dm12 = 1.0 / np.sqrt(degrees)
        scaled = data * dm12[rows] * dm12[indices]
        return Laplacian(size=n, degrees=degrees, sparse=(indptr, indices, scaled))
    w = anchored_dense(g)
    degrees = w.sum(axis=1)
    _check_degrees(degrees)
    dm12 = 1.0 / np.sqrt(degrees)
    l_sym = np.eye(w.shape[0]) - (dm12[:, None] * w) * dm12[None, :]
    l_sym = (l_sym + l_sym.T) * 0.5
    return Laplacian(size=w.shape[0], degrees=degrees, dense=l_sym)


def _check_degrees(degrees: np.ndarray) -> None:
    bad = np.flatnonzero(degrees <= 0)
    if bad.size:
        raise IsolatedVertexError(int(bad[0]))


def laplacian_from_dense(l_sym: np.ndarray, degrees: np.ndarray | None = None) -> Laplacian:
    """Wrap an explicit symmetric matrix; degrees default to ones."""
    l_sym = np.asarray(l_sym, dtype=np.float64)
    n = l_sym.shape[0]
    if degrees is None:
        degrees = np.ones(n)
    return Laplacian(size=n, degrees=np.asarray(degrees, dtype=np.float64), dense=l_sym)


def dense_eig_oracle(l: Laplacian) -> SpectralResult:
    """Full symmetric eigendecomposition; returns the second-smallest pair.

    Reference path for tests and the small-size/fallback route. The
    returned vector is the raw eigenvector of L_sym (no rescale).
    """
    if l.size > DENSE_ORACLE_LIMIT:
        raise ValueError(f"dense oracle limited to size {DENSE_ORACLE_LIMIT}, got {l.size}")
    mat = l.to_dense()
    vals, vecs = np.linalg.eigh(mat)
    lam = float(vals[1])
    v = vecs[:, 1]
    residual = float(np.linalg.norm(mat @ v - lam * v))
    return SpectralResult(
        lambda2=lam,
        fiedler=v,
        iterations=0,
        residual=residual,
        diagnostics={"method_used": "dense", "converged": True, "spectrum_edges": (float(vals[0]), float(vals[-1]))},
    )


def solve_fiedler(l: Laplacian, cfg: SolverConfig) -> SpectralResult:
    """Eigenpair with the second-smallest eigenvalue of L_sym.

    method="lobpcg" runs the iterative solver above `dense_cutoff`
    vertices; smaller problems and non-converged runs fall back to the
    dense path (flagged in diagnostics) unless `allow_fallback` is off,
    in which case non-convergence raises with the residual history.
    With `rescale_generalized` the returned vector is D^{-1/2} v_sym
    renormalized, the eigenvector of (D - W) v = lambda D v.
    """
    cfg.validate()
    if l.size < 3:
        raise ValueError(f"solver needs at least 3 vertices, got {l.size}")

    # The [X, R, P] subspace needs 3k independent directions.
    too_small_for_block = l.size < 3 * cfg.k + 1
    result: SpectralResult | None = None
    if cfg.method == "dense" or l.size < cfg.dense_cutoff or too_small_for_block:
        base = dense_eig_oracle(l)
        reason = "requested" if cfg.method == "dense" else "small-size"
        result = SpectralResult(
            lambda2=base.lambda2,
            fiedler=base.fiedler,
            iterations=0,
            residual=base.residual,
            diagnostics={**base.diagnostics, "fallback": False, "dense_reason": reason},
        )
    else:
        result = _lobpcg_smallest(l, cfg)
        if not result.diagnostics["converged"]:
            if not cfg.allow_fallback:
                raise ConvergenceError(
                    f"LOBPCG did not reach tol={cfg.tol} in {cfg.max_iters} iterations",
                    history=result.diagnostics["residual_history"],
                )
            base = dense_eig_oracle(l)
            result = SpectralResult(
                lambda2=base.lambda2,
                fiedler=base.fiedler,
                iterations=result.iterations,
                residual=base.residual,
                diagnostics={
                    **base.diagnostics,
                    "fallback": True,
                    "dense_reason": "non-convergence",
                    "residual_history": result.diagnostics["residual_history"],
                },
            )

    if cfg.rescale_generalized:
        v = result.fiedler / np.sqrt(l.degrees)
        v = v / np.linalg.norm(v)
        result = SpectralResult(
            lambda2=result.lambda2,
            fiedler=v,
            iterations=result.iterations,
            residual=result.residual,
            diagnostics={**result.diagnostics, "rescaled": True},
        )
    return result


def _orthonormalize(block: np.ndarray, against: np.ndarray | None = None) -> np.ndarray | None:
    """Project `block` against `against`, then whiten; drops rank-deficient
    directions. Returns None when nothing survives."""
    b, _ = _orthonormalize_tracked(block, None, against, None)
    return b


def _orthonormalize_tracked(
    block: np.ndarray,
    a_block: np.ndarray | None,
    against: np.ndarray | None,
    a_against: np.ndarray | None,
) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Orthonormalize `block`, applying identical column operations to its
    tracked A-product so no fresh operator application is needed."""
    b, ab = block, a_block
    for _ in range(2):  # twice is enough for orthogonality loss
        if against is not None:
            coef = against.T @ b
            b = b - against @ coef
            if ab is not None:
                ab = ab - a_against @ coef
        gram = b.T @ b
        w, u = np.linalg.eigh(gram)
        scale = w[-1] if w[-1] > 0 else 1.0
        keep = w > scale * 1e-12
        if not np.any(keep):
            return None, None
        t = u[:, keep] / np.sqrt(w[keep])
        b = b @ t
        if ab is not None:
            ab = ab @ t
    return b, ab


def _lobpcg_smallest(l: Laplacian, cfg: SolverConfig) -> SpectralResult:
    """Block LOBPCG for the k smallest eigenpairs of a symmetric operator."""
    n, k = l.size, cfg.k
    rng = np.random.default_rng(cfg.seed)
    x = _orthonormalize(rng.standard_normal((n, k)))
    if x is None or x.shape[1] < k:
        raise ValueError("degenerate random initial block")
    ax = l.matmat(x)
    # Rayleigh-Ritz inside the initial block.
    h = x.T @ ax
    theta, c = np.linalg.eigh((h + h.T) * 0.5)
    x, ax = x @ c, ax @ c

    if cfg.jacobi_precond:
        diag = np.diagonal(l.to_dense()).copy() if l.dense is not None else _sparse_diag(l)
        diag[np.abs(diag) < 1e-12] = 1.0
        inv_diag = 1.0 / diag
    else:
        inv_diag = None

    p = ap = None
    history: list[float] = []
    iterations = 0
    converged = False
    for it in range(cfg.max_iters + 1):
        r = ax - x * theta[None, :]
        residual = float(np.linalg.norm(r, axis=0).max())
        history.append(residual)
        iterations = it
        if residual <= cfg.tol:
            converged = True
            break
        if it == cfg.max_iters:
            break
        if inv_diag is not None:
            r = r * inv_diag[:, None]
        w = _orthonormalize(r, against=x)
        if w is None:
            break  # search space exhausted; stagnation
        aw = l.matmat(w)
        blocks, ablocks = [x, w], [ax, aw]
        if p is not None:
            basis = np.hstack([x, w])
            a_basis = np.hstack([ax, aw])
            pw, apw = _orthonormalize_tracked(p, ap, basis, a_basis)
            if pw is not None:
                blocks.append(pw)
                ablocks.append(apw)
        s = np.hstack(blocks)
        a_s = np.hstack(ablocks)
        h = s.T @ a_s
        vals, c = np.linalg.eigh((h + h.T) * 0.5)
        c_k = c[:, :k]
        theta = vals[:k]
        # Implicit CG direction: the non-X contribution to the new iterate.
        c_tail = c_k[k:, :]
        p = s[:, k:] @ c_tail
        ap = a_s[:, k:] @ c_tail
        x = s @ c_k
        ax = a_s @ c_k

    lam = float(theta[1])
    v = x[:, 1]
    v = v / np.linalg.norm(v)
    final_res = float(np.linalg.norm(l.matmat(v[:, None]).ravel() - lam * v))
    return SpectralResult(
        lambda2=lam,
        fiedler=v,
        iterations=iterations,
        residual=final_res,
        diagnostics={
            "method_used": "lobpcg",
            "converged": bool(converged),
            "fallback": False,
            "residual_history": history,
        },
    )


def _sparse_diag(l: Laplacian) -> np.ndarray:
    indptr, indices, data = l.sparse
    diag = np.ones(l.size)
    for i in range(l.size):
        row = slice(indptr[i], indptr[i + 1])
        hit = np.flatnonzero(indices[row] == i)
        if hit.size:
            diag[i] = 1.0 - data[indptr[i] + hit[0]]
    return diag
