"""Maximization of ``f(u) = int |u|^{p+1}`` on the two-constraint level set
``U_alpha = {||u||_2 = 1, ||grad u||_2^2 = alpha}`` and branch continuation.

At a critical point the Lagrange condition reads
``-Delta u + lam u = mu |u|^{p-1} u``; testing with ``u`` gives the
multiplier identity ``alpha + lam = mu f(u)``.

The ascent runs in the ``H^1_0`` metric: the gradient of ``f`` is
represented by ``z = K^{-1} (p+1) W g(u)`` and projected ``K``-orthogonally
against the constraint normals ``K^{-1} W u`` and ``u``.  Steps follow
Barzilai-Borwein with Armijo backtracking and are mapped back onto
``U_alpha`` by an exact two-dimensional retraction.  Near convergence a
bordered Newton solve on ``(u, lam, mu)`` finishes the job.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _ops
from .grid import Field, Grid
from .soliton import rho_from_mu
from .spectral import dirichlet_eigs, morse_index

__all__ = [
    "CriticalPoint",
    "Branch",
    "SolverError",
    "recover_multipliers",
    "maximize_on_level",
    "multistart",
    "MultistartResult",
    "continue_branch",
    "antisym_lower_bound_M3",
    "write_branch_csv",
]


class SolverError(RuntimeError):
    """Infeasible level, failed projection or exhausted iterations."""

    def __init__(self, message, alpha=None):
        super().__init__(message if alpha is None else f"alpha={alpha:.17g}: {message}")
        self.alpha = alpha


@dataclass
class CriticalPoint:
    u: Field = field(repr=False)
    alpha: float
    lam: float
    mu: float
    f: float
    residual: float
    morse: Optional[int] = None
    iterations: int = 0
    p: float = 0.0

    @property
    def rho(self) -> float:
        return rho_from_mu(self.mu, self.p) if self.mu > 0 else float("nan")

    @property
    def identity_defect(self) -> float:
        """Relative defect of ``alpha + lam = mu f``."""
        return abs(self.alpha + self.lam - self.mu * self.f) / max(abs(self.alpha), abs(self.mu * self.f))

    def row(self) -> dict:
        return {
            "alpha": self.alpha,
            "lambda": self.lam,
            "mu": self.mu,
            "rho": self.rho,
            "f": self.f,
            "morse": -1 if self.morse is None else self.morse,
            "residual": self.residual,
        }


@dataclass
class Branch:
    p: float
    grid: Grid = field(repr=False)
    points: list = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def column(self, name: str) -> np.ndarray:
        return np.array([pt.row()[name] for pt in self.points], dtype=float)

    @property
    def alphas(self) -> np.ndarray:
        return self.column("alpha")

    @property
    def rhos(self) -> np.ndarray:
        return self.column("rho")


def recover_multipliers(grid: Grid, u, p: float):
    """Least-squares multipliers for ``-Delta_h u = -lam u + mu g(u)``.

    The projection is taken in the weighted inner product, so testing the
    remainder with ``u`` gives ``alpha + lam = mu f`` to round-off.
    Returns ``(lam, mu, residual)`` with the residual measured in the
    discrete ``H^{-1}`` norm relative to ``||u||_{H^1_0}``.
    """
    v = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    w = grid.weights
    g = _ops.nonlin(v, p)
    Av = grid.apply_laplacian(v)
    # Au ~ a*(-u) + b*g  with W-inner products
    G = np.array([[np.dot(w * v, v), -np.dot(w * v, g)],
                  [-np.dot(w * g, v), np.dot(w * g, g)]])
    rhs = np.array([-np.dot(w * v, Av), np.dot(w * g, Av)])
    det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
    if abs(det) <= 1e-12 * abs(G[0, 0] * G[1, 1]):
        raise SolverError("Gram matrix of u and |u|^{p-1}u is singular")
    lam, mu = np.linalg.solve(G, rhs)
    return float(lam), float(mu), _ops.dual_residual(grid, v, float(lam), float(mu), p)


def _projected_gradient(grid, u, p):
    """K-metric projected gradient of f on U_alpha and the multipliers (a, b)."""
    w = grid.weights
    g = _ops.nonlin(u, p)
    fval = float(np.dot(w * g, u))
    z = grid.solve((p + 1.0) * w * g)
    wu = grid.solve(w * u)
    alpha = _ops.h1sq(grid, u)
    G = np.array([[np.dot(wu, w * u), 1.0], [1.0, alpha]])
    rhs = np.array([np.dot(z, w * u), (p + 1.0) * fval])
    a, b = np.linalg.solve(G, rhs)
    v = z - a * wu - b * u
    return v, fval, a, b


def _knorm(grid, v):
    return math.sqrt(max(_ops.h1sq(grid, v), 0.0))


def _symmetrize(grid, u, symmetry):
    if symmetry == "odd":
        return 0.5 * (u - grid.reflect(u))
    return u


def _ascent(grid, u, p, alpha, symmetry, tol, max_iter, newton_switch):
    """BB/Armijo ascent; returns (u, fval, a, b, gradnorm, iterations)."""
    u = _symmetrize(grid, u, symmetry)
    u = _ops.retract(grid, u, alpha)
    v, fval, a, b = _projected_gradient(grid, u, p)
    v = _symmetrize(grid, v, symmetry)
    s = 1.0 / max(_knorm(grid, v) / max(fval, 1e-300), 1.0)
    s = min(s, 0.1 * math.sqrt(alpha) / max(_knorm(grid, v), 1e-300))
    it = 0
    gnorm = _knorm(grid, v)
    while it < max_iter:
        it += 1
        gnorm = _knorm(grid, v)
        if gnorm <= tol * fval or gnorm <= newton_switch * fval:
            break
        gsq = gnorm ** 2
        # Armijo backtracking on the retracted point
        for _ in range(40):
            cand = _symmetrize(grid, u + s * v, symmetry)
            try:
                cand = _ops.retract(grid, cand, alpha)
            except _ops.Infeasible:
                s *= 0.5
                continue
            fc = _ops.fsum(grid, cand, p)
            if fc >= fval + 1e-4 * s * gsq or s < 1e-14:
                break
            s *= 0.5
        v_new, f_new, a, b = _projected_gradient(grid, cand, p)
        v_new = _symmetrize(grid, v_new, symmetry)
        du = cand - u
        dv = v_new - v
        dudv = float(du @ (grid.K @ dv))
        duu = _ops.h1sq(grid, du)
        u, v, fval = cand, v_new, f_new
        # BB1 for ascent: s = <du,du>/(-<du,dv>)
        s = duu / -dudv if dudv < 0 else 2.0 * s
        s = min(max(s, 1e-12), 1e6)
    return u, fval, a, b, gnorm, it


def _finish(grid, u, p, alpha, symmetry, tol, max_iter, polish, label_alpha):
    u, fval, a, b, gnorm, iters = _ascent(grid, u, p, alpha, symmetry, tol, max_iter,
                                         1e-4 if polish else 0.0)
    if abs(b) < 1e-300:
        raise SolverError("degenerate multiplier", label_alpha)
    lam, mu = a / b, (p + 1.0) / b
    if polish:
        try:
            un, ln, mn, nit = _ops.newton_two_constraint(grid, u, lam, mu, p, alpha)
            un = _symmetrize(grid, un, symmetry)
            un = _ops.retract(grid, un, alpha)
            fn = _ops.fsum(grid, un, p)
            if mn > 0 and fn >= fval - 1e-9 * fval:
                u, fval = un, fn
                iters += nit
            else:
                raise _ops.NewtonFailure("Newton left the ascent basin")
        except _ops.NewtonFailure:
            u, fval, a, b, gnorm, more = _ascent(grid, u, p, alpha, symmetry, tol,
                                                 max_iter, 0.0)
            iters += more
            if gnorm > tol * fval * 1e3:
                raise SolverError(f"ascent stalled at gradient {gnorm / fval:.3g}", label_alpha)
    else:
        if gnorm > tol * fval:
            raise SolverError(f"max iterations reached, gradient {gnorm / fval:.3g}", label_alpha)
    return u, fval, iters


def maximize_on_level(grid: Grid, p: float, alpha: float, init=None, *,
                      symmetry: str | None = None, tol: float = 1e-9,
                      max_iter: int = 20000, polish: bool = True,
                      compute_morse: bool = True, seed: int = 0,
                      max_restarts: int = 3) -> CriticalPoint:
    """Ascent to a critical point of ``f`` on ``U_alpha`` with ``mu > 0``.

    ``init`` may be a :class:`Field`, an array or ``None`` (a bump mixed with
    ``phi_1`` onto the level).  ``symmetry="odd"`` restricts the search to
    fields odd under the grid's reflection.
    """
    lam1 = grid.lambda1
    if not alpha > lam1:
        raise SolverError(f"level must exceed lambda_1={lam1:.17g}", alpha)
    if symmetry not in (None, "odd"):
        raise ValueError(f"unknown symmetry {symmetry!r}")
    rng = np.random.default_rng(seed)
    if init is None:
        u0 = _default_seed(grid, alpha, symmetry)
    else:
        u0 = np.array(init.values if isinstance(init, Field) else init, dtype=float)
    for attempt in range(max_restarts + 1):
        u, fval, iters = _finish(grid, u0, p, alpha, symmetry, tol, max_iter, polish, alpha)
        lam, mu, res = recover_multipliers(grid, u, p)
        if mu > 0:
            break
        # reject and restart from a perturbed positive bump
        base = _default_seed(grid, alpha, symmetry)
        u0 = base * (1.0 + 0.1 * rng.standard_normal(base.size))
    else:
        raise SolverError("only critical points with mu <= 0 were found", alpha)
    u = _ops.sign_normalize(u)
    morse = morse_index(grid, u, lam, mu, p) if compute_morse else None
    return CriticalPoint(Field(grid, u), float(alpha), lam, mu, float(fval), res, morse,
                         iters, float(p))


@dataclass
class MultistartResult:
    best: CriticalPoint
    spread: float
    converged: int
    attempted: int


def multistart(grid: Grid, p: float, alpha: float, starts: int = 8, *, seed: int = 0,
               tol: float = 1e-9, max_iter: int = 3000,
               compute_morse: bool = True) -> MultistartResult:
    """Ascents from the default seed and from bumps at random interior centres.

    ``spread = (max f - min f) / max f`` over the converged starts is an
    uncertainty measure for the maximum.  Off-centre bumps drift back along
    an almost flat translation direction, so each start gets ``max_iter``
    iterations and starts that do not converge are skipped.
    """
    if starts < 1:
        raise ValueError("starts must be >= 1")
    rng = np.random.default_rng(seed)
    d = grid.boundary_distance(grid.coords)
    inner = np.nonzero(d >= 0.3 * d.max())[0]
    phi1 = dirichlet_eigs(grid, 1)[0].vector
    found = []
    for i in range(starts):
        init = None
        if i > 0:
            init = _ops.level_seed(grid, alpha, phi1, center=grid.coords[rng.choice(inner)])
        try:
            found.append(maximize_on_level(grid, p, alpha, init, tol=tol, max_iter=max_iter,
                                           compute_morse=False, seed=seed + i))
        except SolverError:
            continue
    if not found:
        raise SolverError("no start converged", alpha)
    fs = np.array([pt.f for pt in found])
    best = found[int(np.argmax(fs))]
    if compute_morse:
        best.morse = morse_index(grid, best.u.values, best.lam, best.mu, p)
    return MultistartResult(best, float((fs.max() - fs.min()) / fs.max()), len(found), starts)


def _odd_low(grid):
    pairs = dirichlet_eigs(grid, 4)
    for pr in pairs:
        v = pr.vector
        if np.linalg.norm(v + grid.reflect(v)) < 1e-6 * np.linalg.norm(v):
            return v, pr.value
    raise SolverError("no odd eigenfunction among the first four")


def _default_seed(grid, alpha, symmetry):
    if symmetry == "odd":
        low, lam_odd = _odd_low(grid)
        if not alpha > lam_odd:
            raise SolverError(f"odd level needs alpha > {lam_odd:.17g}", alpha)
        return _ops.level_seed(grid, alpha, low, odd=True)
    phi1 = dirichlet_eigs(grid, 1)[0].vector
    return _ops.level_seed(grid, alpha, phi1)


def continue_branch(grid: Grid, p: float, alpha_start: float, alpha_end: float,
                    steps: int, *, tol: float = 1e-9, compute_morse: bool = True,
                    init=None, callback=None, seed: int = 0) -> Branch:
    """Critical points on a geometric ``alpha`` schedule with dilation warm starts."""
    lam1 = grid.lambda1
    if not (lam1 < alpha_start < alpha_end):
        raise SolverError(f"need lambda_1={lam1:.6g} < alpha_start < alpha_end")
    if steps < 2:
        raise ValueError("steps must be >= 2")
    alphas = np.geomspace(alpha_start, alpha_end, steps)
    branch = Branch(float(p), grid)
    u = init
    prev_alpha = None
    for a in alphas:
        if u is not None and prev_alpha is not None:
            warm = _ops.dilate(grid, u, math.sqrt(a / prev_alpha))
            try:
                warm = _ops.retract(grid, warm, a)
            except _ops.Infeasible:
                warm = None
        else:
            warm = u
        try:
            pt = maximize_on_level(grid, p, a, warm, tol=tol, compute_morse=compute_morse,
                                   seed=seed)
        except SolverError as exc:
            raise SolverError(str(exc).split(": ", 1)[-1], a) from exc
        branch.points.append(pt)
        if callback is not None:
            callback(pt)
        u = pt.u.values
        prev_alpha = a
    return branch


def antisym_lower_bound_M3(grid: Grid, p: float, alpha: float, **kw) -> CriticalPoint:
    """Maximum of ``f`` over odd fields of ``U_alpha`` (needs ``alpha > lambda_3``).

    The returned point's ``f`` bounds the genus-3 level from below.
    """
    if grid.domain.kind not in ("interval", "rectangle", "disk"):
        raise SolverError("domain has no reflection symmetry")
    if grid.domain.kind == "interval" and grid.n % 2:
        raise SolverError("interval grids need even n so the centre is a node")
    lam3 = dirichlet_eigs(grid, 3)[2].value
    if not alpha > lam3:
        raise SolverError(f"level must exceed lambda_3={lam3:.17g}", alpha)
    kw.setdefault("compute_morse", False)
    return maximize_on_level(grid, p, alpha, symmetry="odd", **kw)


def write_branch_csv(path, branch: Branch, header: str | None = None) -> None:
    from .io import fmt

    cols = ["alpha", "lambda", "mu", "rho", "f", "morse", "residual"]
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        wr = csv.writer(fh)
        wr.writerow(cols)
        for pt in branch:
            row = pt.row()
            wr.writerow([fmt(row[c]) for c in cols])
