"""Dirichlet eigenpairs, Morse indices and eigenfunction sphere points.

All eigenproblems are posed as the generalized symmetric pencil ``(A, W)``
with ``W = diag(weights)``, which is equivalent to the ``W``-self-adjoint
operator ``W^{-1} A``.  Three paths are used:

* 1D grids: ``W^{-1/2} K W^{-1/2}`` is tridiagonal, solved by LAPACK
  ``stebz``/``stein`` through :func:`scipy.linalg.eigh_tridiagonal`;
* fewer than :data:`DENSE_LIMIT` unknowns: dense ``eigh``;
* otherwise: shift-invert Lanczos (:func:`scipy.sparse.linalg.eigsh`).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .grid import Field, Grid

__all__ = [
    "EigenPair",
    "SpectralError",
    "dirichlet_eigs",
    "morse_index",
    "MorseResult",
    "yang_check",
    "eigen_sphere_points",
    "write_eigen_csv",
    "pencil_eigs",
]

DENSE_LIMIT = 3000
MORSE_MARGIN = 1e-8


class SpectralError(RuntimeError):
    """Eigen-solver failure or violated precondition."""


@dataclass
class EigenPair:
    k: int
    value: float
    vector: np.ndarray
    residual: float

    def field(self, grid: Grid) -> Field:
        return Field(grid, self.vector)


def _is_tridiagonal(grid: Grid) -> bool:
    return grid.domain.dim == 1


def pencil_eigs(grid: Grid, A: sp.spmatrix, count: int, vectors: bool = True):
    """Smallest ``count`` eigenpairs of ``A x = lam W x`` (``W`` diagonal).

    Returns ``(values, vectors)`` with ``W``-orthonormal columns (``vectors``
    is ``None`` when not requested).
    """
    w = grid.weights
    m = w.size
    if count < 1 or count >= m:
        raise SpectralError(f"count must be in [1, {m - 1}], got {count}")
    s = 1.0 / np.sqrt(w)
    if _is_tridiagonal(grid):
        A = sp.csr_matrix(A)
        d = A.diagonal() * s * s
        e = A.diagonal(1) * s[:-1] * s[1:]
        if vectors:
            vals, vecs = sla.eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1))
            return vals, vecs * s[:, None]
        vals = sla.eigh_tridiagonal(d, e, eigvals_only=True, select="i",
                                    select_range=(0, count - 1))
        return vals, None
    if m < DENSE_LIMIT:
        B = (sp.diags(s) @ A @ sp.diags(s)).toarray()
        if vectors:
            vals, vecs = sla.eigh(B, subset_by_index=(0, count - 1))
            return vals, vecs * s[:, None]
        return sla.eigh(B, eigvals_only=True, subset_by_index=(0, count - 1)), None
    return _sparse_pencil(grid, A, count, vectors)


def _sparse_pencil(grid, A, count, vectors, sigma=None):
    W = sp.diags(grid.weights)
    if sigma is None:
        # a safe lower bound for a positive-definite or shifted operator is
        # supplied by callers through ``sigma``; for K itself zero is fine
        sigma = 0.0
    v0 = np.ones(grid.size)
    try:
        res = eigsh(A.tocsc(), k=count, M=W, sigma=sigma, which="LM", v0=v0,
                    return_eigenvectors=vectors, tol=1e-13)
    except ArpackNoConvergence as exc:
        raise SpectralError(f"shift-invert Lanczos did not converge: {exc}") from None
    if vectors:
        vals, vecs = res
        order = np.argsort(vals)
        return vals[order], vecs[:, order]
    return np.sort(res), None


def _sign_normalize(vec: np.ndarray) -> np.ndarray:
    # first significant component positive; deterministic for golden outputs
    tol = 1e-8 * np.max(np.abs(vec))
    idx = int(np.argmax(np.abs(vec) > tol))
    return vec if vec[idx] > 0 else -vec


def dirichlet_eigs(grid: Grid, count: int) -> list[EigenPair]:
    """The ``count`` smallest Dirichlet eigenpairs of ``-Delta_h``.

    Eigenvectors are ``W``-orthonormal (``l2 = 1``); the first one is
    positive.  ``residual`` is ``||(-Delta_h) phi - lam phi||_w / lam``.
    """
    vals, vecs = pencil_eigs(grid, grid.K, count)
    w = grid.weights
    pairs = []
    for i in range(count):
        v = vecs[:, i]
        v = v / math.sqrt(np.dot(w * v, v))
        v = _sign_normalize(v)
        if i == 0:
            v = np.abs(v) if np.all(v >= -1e-12 * np.abs(v).max()) else v
        r = grid.apply_laplacian(v) - vals[i] * v
        res = math.sqrt(np.dot(w * r, r)) / vals[i]
        pairs.append(EigenPair(i + 1, float(vals[i]), v, float(res)))
    return pairs


@dataclass
class MorseResult:
    index: int
    borderline: int
    eigenvalues: np.ndarray

    def __int__(self):
        return self.index


def linearized_operator(grid: Grid, u: np.ndarray, lam: float, mu: float, p: float):
    """Stiffness form of ``-Delta_h + lam - p mu |u|^{p-1}``."""
    q = lam - p * mu * np.abs(u) ** (p - 1.0)
    return (grid.K + sp.diags(grid.weights * q)).tocsr(), q


def morse_index(grid: Grid, u, lam: float, mu: float, p: float,
                return_details: bool = False):
    """Number of negative eigenvalues of ``-Delta_h + lam - p mu |u|^{p-1}``.

    Eigenvalues within ``1e-8 * lambda_1`` of zero are not counted and are
    reported as ``borderline`` when ``return_details`` is true.
    """
    vals_u = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    if not np.all(np.isfinite(vals_u)):
        raise SpectralError("field has non-finite values")
    A, q = linearized_operator(grid, vals_u, lam, mu, p)
    eps = MORSE_MARGIN * grid.lambda1
    count = 4
    m = grid.size
    while True:
        count = min(count, m - 1)
        if _is_tridiagonal(grid) or m < DENSE_LIMIT:
            ev, _ = pencil_eigs(grid, A, count, vectors=False)
        else:
            # the shifted operator is bounded below by min(q)
            ev, _ = _sparse_pencil(grid, A, count, False, sigma=float(min(q.min(), 0.0)) - 1.0)
        if ev[-1] > eps or count == m - 1:
            break
        count *= 2
    neg = int(np.sum(ev < -eps))
    border = int(np.sum(np.abs(ev) <= eps))
    if return_details:
        return MorseResult(neg, border, ev)
    return neg


def yang_check(lam1: float, lam3: float, N: int) -> bool:
    """True iff ``lam3 <= (1 + N/4) 2^{2/N} lam1``."""
    if lam1 <= 0 or lam3 <= 0:
        raise ValueError("eigenvalues must be positive")
    bound = (1.0 + N / 4.0) * 2.0 ** (2.0 / N) * lam1
    return lam3 <= bound * (1.0 + 1e-15)


def eigen_sphere_points(pairs: Sequence[EigenPair], alpha: float, ell: int, x) -> np.ndarray:
    """Point ``sum_i x_i u_i`` of the sphere built from eigenfunctions.

    ``u_i = sqrt((lam_{l+i} - alpha)/(lam_{l+i} - lam_i)) phi_i
    + sqrt((alpha - lam_i)/(lam_{l+i} - lam_i)) phi_{l+i}``, so that for a
    unit vector ``x`` the result has ``l2 = 1`` and ``h1^2 = alpha``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    k = x.size
    if ell < k:
        raise ValueError(f"need ell >= k, got ell={ell}, k={k}")
    if len(pairs) < ell + k:
        raise ValueError(f"need at least {ell + k} eigenpairs, got {len(pairs)}")
    if not math.isclose(float(np.dot(x, x)), 1.0, rel_tol=1e-12):
        raise ValueError("x must be a unit vector")
    out = np.zeros_like(pairs[0].vector)
    for i in range(k):
        lo, hi = pairs[i].value, pairs[ell + i].value
        if not lo < alpha < hi:
            raise ValueError(f"alpha={alpha} outside ({lo}, {hi}) for i={i + 1}")
        a = math.sqrt((hi - alpha) / (hi - lo))
        b = math.sqrt((alpha - lo) / (hi - lo))
        out += x[i] * (a * pairs[i].vector + b * pairs[ell + i].vector)
    return out


def sphere_coefficients(lam_i: float, lam_li: float, alpha: float) -> tuple[float, float]:
    if not lam_i < alpha < lam_li:
        raise ValueError(f"alpha={alpha} outside ({lam_i}, {lam_li})")
    d = lam_li - lam_i
    return math.sqrt((lam_li - alpha) / d), math.sqrt((alpha - lam_i) / d)


def write_eigen_csv(path, pairs: Sequence[EigenPair], header: str | None = None) -> None:
    from .io import fmt

    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        wr = csv.writer(fh)
        wr.writerow(["k", "lambda", "residual"])
        for pr in pairs:
            wr.writerow([pr.k, fmt(pr.value), fmt(pr.residual)])
