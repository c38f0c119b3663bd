"""Shared numerical kernels: nonlinearity, level-set retraction, seeds,
warm-start dilation and bordered Newton solvers.

Notation used throughout: ``W = diag(grid.weights)``, ``K = grid.K``,
``g(u) = |u|^{p-1} u``, ``f(u) = sum(w |u|^{p+1})``.  The level set
``U_alpha`` is ``{u : u W u = 1, u K u = alpha}``.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .grid import Grid

__all__ = [
    "Infeasible",
    "NewtonFailure",
    "nonlin",
    "fsum",
    "l2sq",
    "h1sq",
    "normalize",
    "dual_residual",
    "mix_to_level",
    "retract",
    "bump_seed",
    "level_seed",
    "dilate",
    "newton_two_constraint",
    "newton_fixed_mu",
    "sign_normalize",
]


class Infeasible(ValueError):
    """Requested level is not reachable inside the given subspace."""


class NewtonFailure(RuntimeError):
    pass


def nonlin(u: np.ndarray, p: float) -> np.ndarray:
    return np.abs(u) ** (p - 1.0) * u


def fsum(grid: Grid, u: np.ndarray, p: float) -> float:
    return float(np.dot(grid.weights, np.abs(u) ** (p + 1.0)))


def l2sq(grid: Grid, u: np.ndarray) -> float:
    return float(np.dot(grid.weights * u, u))


def h1sq(grid: Grid, u: np.ndarray) -> float:
    return float(u @ (grid.K @ u))


def normalize(grid: Grid, u: np.ndarray) -> np.ndarray:
    return u / math.sqrt(l2sq(grid, u))


def sign_normalize(u: np.ndarray) -> np.ndarray:
    """Flip ``u`` so that its largest-magnitude value is positive."""
    return -u if u[int(np.argmax(np.abs(u)))] < 0 else u


def dual_residual(grid: Grid, u: np.ndarray, lam: float, mu: float, p: float) -> float:
    """``||K u + lam W u - mu W g(u)||_{H^{-1}} / ||u||_{H^1_0}``."""
    r = grid.K @ u + grid.weights * (lam * u - mu * nonlin(u, p))
    return math.sqrt(max(float(r @ grid.solve(r)), 0.0) / h1sq(grid, u))


def mix_to_level(grid: Grid, u: np.ndarray, d: np.ndarray, alpha: float) -> np.ndarray:
    """Closest point to ``u`` in ``span{u, d}`` with ``l2 = 1`` and ``h1^2 = alpha``.

    Solves the 2x2 pencil restricted to the span; raises :class:`Infeasible`
    when ``alpha`` lies outside its Ritz values.
    """
    w = grid.weights
    B = np.column_stack([u, d])
    Wg = B.T @ (w[:, None] * B)
    Kg = B.T @ (grid.K @ B)
    # W-orthonormalize the span, then diagonalize K on it
    ev, U = np.linalg.eigh(Wg)
    if ev[0] <= 1e-14 * ev[1]:
        raise Infeasible("directions are linearly dependent")
    T = U / np.sqrt(ev)
    th, V = np.linalg.eigh(T.T @ Kg @ T)
    C = T @ V  # coefficients of W-orthonormal Ritz vectors in the (u, d) basis
    lo, hi = th
    if not (lo <= alpha <= hi):
        raise Infeasible(f"level {alpha:g} outside Ritz range [{lo:g}, {hi:g}]")
    if hi - lo <= 1e-15 * hi:
        c2 = 0.5
    else:
        c2 = (alpha - lo) / (hi - lo)
    c = np.array([math.sqrt(max(1.0 - c2, 0.0)), math.sqrt(max(c2, 0.0))])
    # components of u (coefficient vector e1) along the Ritz vectors
    proj = C.T @ Wg[:, 0]
    signs = np.where(proj < 0, -1.0, 1.0)
    coef = C @ (signs * c)
    return coef[0] * u + coef[1] * d


def retract(grid: Grid, u: np.ndarray, alpha: float) -> np.ndarray:
    """Map ``u`` onto ``U_alpha`` by mixing with a smoother or rougher companion."""
    un = normalize(grid, u)
    rq = h1sq(grid, un)
    if rq > alpha:
        d = grid.solve(grid.weights * un)
    else:
        d = grid.apply_laplacian(un)
    try:
        return mix_to_level(grid, un, d, alpha)
    except Infeasible:
        # one more Krylov direction usually suffices
        d2 = grid.solve(grid.weights * d) if rq > alpha else grid.apply_laplacian(d)
        return mix_to_level(grid, un, d2, alpha)


def bump_seed(grid: Grid, alpha: float, center=None, odd: bool = False) -> np.ndarray:
    """Gaussian (or odd Gaussian-derivative) bump narrow enough to exceed level ``alpha``."""
    N = grid.dim
    c = grid.domain.center if center is None else np.asarray(center, dtype=float)
    sigma = 0.8 * math.sqrt(N / (2.0 * alpha))
    x = grid.coords - c
    r2 = np.sum(x * x, axis=1)
    u = np.exp(-r2 / (2.0 * sigma ** 2))
    if odd:
        u = u * x[:, 0] / sigma
    return normalize(grid, u)


def power_seed(grid: Grid, alpha: float, low: np.ndarray) -> np.ndarray:
    """``sign(low) |low|^m``, normalized, with ``m`` doubled until the field
    lies above level ``alpha``.

    The bumps sit at the extrema of ``low``, which for the first odd
    eigenfunction are the centres of the two symmetric halves.
    """
    a = np.abs(low) / np.abs(low).max()
    m = 2.0
    while True:
        u = normalize(grid, np.sign(low) * a ** m)
        if h1sq(grid, u) > 1.5 * alpha or m >= 4096:
            return u
        m *= 2.0


def level_seed(grid: Grid, alpha: float, low: np.ndarray, odd: bool = False,
               center=None) -> np.ndarray:
    """Point of ``U_alpha`` mixing a low-energy field ``low`` with a bump.

    ``low`` should have Rayleigh quotient below ``alpha`` (``phi_1`` or the
    first odd eigenfunction).
    """
    if odd and center is None:
        bump = power_seed(grid, alpha, low)
    else:
        bump = bump_seed(grid, alpha, center=center, odd=odd)
    try:
        u = mix_to_level(grid, bump, normalize(grid, low), alpha)
    except Infeasible:
        u = retract(grid, bump, alpha)
    return sign_normalize(u)


def dilate(grid: Grid, u: np.ndarray, scale: float, center=None) -> np.ndarray:
    """``scale^{N/2} u(c + scale (x - c))`` about the peak of ``|u|`` (or ``center``)."""
    if center is None:
        center = grid.coords[int(np.argmax(np.abs(u)))]
    pts = center + scale * (grid.coords - center)
    return grid.interpolate(u, pts) * scale ** (grid.dim / 2.0)


def _bordered_factor(grid, u, lam, mu, p, cols, rows):
    H = grid.K + sp.diags(grid.weights * (lam - p * mu * np.abs(u) ** (p - 1.0)))
    m = len(cols)
    C = sp.csr_matrix(np.column_stack(cols))
    R = sp.csr_matrix(np.vstack(rows))
    J = sp.bmat([[H, C], [R, sp.csr_matrix((m, m))]], format="csc")
    return splu(J)


def _weak_residual(grid, u, r):
    return math.sqrt(max(float(r @ grid.solve(r)), 0.0) / max(h1sq(grid, u), 1e-300))


def _bordered_newton(grid, u, lam, mu, p, alpha, tol, max_iter):
    # shared loop: alpha=None fixes mu and drops the gradient constraint.
    # Iterates are ranked by their weak residual; near-zero modes (translations
    # of a concentrated bump) make late steps noisy, so the best one is kept.
    w = grid.weights
    u = u.copy()
    best = None
    for it in range(1, max_iter + 1):
        Wu = w * u
        Ku = grid.K @ u
        Wg = w * nonlin(u, p)
        r = Ku + lam * Wu - mu * Wg
        cons = [0.5 * (u @ Wu - 1.0)]
        if alpha is not None:
            cons.append(0.5 * (u @ Ku - alpha) / alpha)
        res = _weak_residual(grid, u, r) + sum(abs(c) for c in cons)
        if best is None or res < best[0]:
            best = (res, u.copy(), lam, mu, it)
        if res <= tol:
            break
        if it > 3 and res > 1e3 * best[0]:
            break
        if alpha is None:
            cols, rows = [Wu], [Wu]
            F = np.concatenate([r, cons])
        else:
            cols, rows = [Wu, -Wg], [Wu, Ku / alpha]
            F = np.concatenate([r, cons])
        try:
            lu = _bordered_factor(grid, u, lam, mu, p, cols, rows)
        except RuntimeError as exc:
            raise NewtonFailure(f"singular bordered Jacobian: {exc}") from None
        dx = lu.solve(-F)
        if not np.all(np.isfinite(dx)):
            raise NewtonFailure("non-finite Newton update")
        m = len(cols)
        u = u + dx[:-m]
        lam += dx[-m]
        if alpha is not None:
            mu += dx[-1]
    res, u, lam, mu, it = best
    if res > max(1e3 * tol, 1e-9):
        raise NewtonFailure(f"Newton stalled at residual {res:.3g}")
    return u, lam, mu, it


def newton_two_constraint(grid: Grid, u: np.ndarray, lam: float, mu: float, p: float,
                          alpha: float, tol: float = 1e-13, max_iter: int = 25):
    """Newton on ``K u + lam W u = mu W g(u)``, ``uWu = 1``, ``uKu = alpha``.

    Unknowns are ``(u, lam, mu)``.  Returns ``(u, lam, mu, iterations)``;
    raises :class:`NewtonFailure` when the weak residual stays above
    ``max(1e3 * tol, 1e-9)``.
    """
    return _bordered_newton(grid, u, lam, mu, p, alpha, tol, max_iter)


def newton_fixed_mu(grid: Grid, u: np.ndarray, lam: float, mu: float, p: float,
                    tol: float = 1e-13, max_iter: int = 25):
    """Newton on ``K u + lam W u = mu W g(u)``, ``uWu = 1`` for fixed ``mu``.

    Unknowns are ``(u, lam)``; returns ``(u, lam, iterations)``.
    """
    u, lam, _, it = _bordered_newton(grid, u, lam, mu, p, None, tol, max_iter)
    return u, lam, it
