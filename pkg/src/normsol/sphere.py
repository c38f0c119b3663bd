"""Local minimization of ``E_mu(u) = 1/2 ||grad u||^2 - mu/(p+1) ||u||_{p+1}^{p+1}``
on the unit ``L^2`` sphere inside the ball ``||grad u||^2 < alpha_cap``.

The descent is a Sobolev-preconditioned projected gradient: the ``H^1_0``
representative of ``grad E_mu`` is ``u - mu K^{-1} W g(u)``, projected
``K``-orthogonally to the sphere normal and followed by renormalization.
The cap is monitored rather than enforced: leaving the ball means the
multiplier ``mu`` is too large for a local minimum to exist there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _ops
from .grid import Field, Grid, measure
from .soliton import SolitonProfile, gn_constant, mu_hat_1, mu_hat_1_argmax, rho_from_mu
from .spectral import dirichlet_eigs, morse_index
from .twoconstraint import Branch, recover_multipliers

__all__ = [
    "MinimizerResult",
    "CapExceeded",
    "MinimizerError",
    "energy",
    "minimize_local",
    "admissible_mu_bound",
    "mu_hat_1_interval",
    "energy_sandwich",
    "level_upper_bound",
    "blowup_witness",
    "WitnessPoint",
]


class MinimizerError(RuntimeError):
    pass


class CapExceeded(MinimizerError):
    """The descent left the ball ``||grad u||^2 < alpha_cap``."""

    def __init__(self, result):
        super().__init__(f"h1sq={result.h1sq:.6g} exceeded alpha_cap={result.alpha_cap:.6g}")
        self.result = result


@dataclass
class MinimizerResult:
    u: Field = field(repr=False)
    p: float
    mu: float
    lam: float
    energy: float
    alpha_cap: float
    h1sq: float
    morse: int | None
    converged: bool
    hit_cap: bool
    residual: float
    iterations: int

    @property
    def rho(self) -> float:
        return rho_from_mu(self.mu, self.p)

    def record(self) -> dict:
        return {
            "p": self.p,
            "mu": self.mu,
            "rho": self.rho,
            "alpha_cap": self.alpha_cap,
            "h1sq": self.h1sq,
            "lambda": self.lam,
            "energy": self.energy,
            "morse": -1 if self.morse is None else self.morse,
            "hit_cap": self.hit_cap,
            "residual": self.residual,
            "iterations": self.iterations,
        }


def energy(grid: Grid, u, mu: float, p: float) -> float:
    v = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    return 0.5 * _ops.h1sq(grid, v) - mu / (p + 1.0) * _ops.fsum(grid, v, p)


def energy_sandwich(h1sq: float, mu: float, p: float, N: int, C_Np: float) -> tuple[float, float]:
    """Lower and upper bounds ``h/2 - mu C h^beta/(p+1)`` and ``h/2`` for unit-mass fields."""
    beta = N * (p - 1.0) / 4.0
    return 0.5 * h1sq - mu * C_Np / (p + 1.0) * h1sq ** beta, 0.5 * h1sq


def level_upper_bound(lam_k: float, mu: float, p: float, meas: float) -> float:
    """``lam_k/2 - mu/(p+1) |Omega|^{-(p-1)/2}``."""
    return 0.5 * lam_k - mu / (p + 1.0) * meas ** (-(p - 1.0) / 2.0)


def admissible_mu_bound(alpha: float, lam_k: float, M_estimate: float, meas: float,
                        p: float) -> float:
    """``(p+1)/2 (alpha - lam_k) / (M - |Omega|^{-(p-1)/2})``; ``inf`` when the
    denominator vanishes."""
    if not alpha > lam_k:
        raise ValueError(f"need alpha > lam_k, got {alpha} <= {lam_k}")
    floor = meas ** (-(p - 1.0) / 2.0)
    if M_estimate < floor:
        raise ValueError("M_estimate is below |Omega|^{-(p-1)/2}")
    if M_estimate == floor:
        return math.inf
    return 0.5 * (p + 1.0) * (alpha - lam_k) / (M_estimate - floor)


def mu_hat_1_interval(grid: Grid, p: float, C_Np: float, branch: Branch | None = None):
    """Two-sided estimate ``(lower, upper)`` of the first admissibility threshold.

    The lower end replaces ``M_{alpha,1}`` by its upper bound
    ``C alpha^beta``; the upper end uses ascent values of ``M_{alpha,1}``
    along ``branch`` (which are lower bounds) and is ``nan`` without a branch.
    """
    lam1 = grid.lambda1
    meas = measure(grid.domain)
    N = grid.dim
    lower = mu_hat_1(lam1, C_Np, meas, N, p)
    if branch is None or len(branch) == 0:
        return lower, float("nan")
    vals = [admissible_mu_bound(pt.alpha, lam1, pt.f, meas, p) for pt in branch if pt.alpha > lam1]
    return lower, max(vals)


def _sphere_gradient(grid, u, mu, p):
    w = grid.weights
    G = u - mu * grid.solve(w * _ops.nonlin(u, p))
    wu = grid.solve(w * u)
    c = float(np.dot(G, w * u)) / float(np.dot(wu, w * u))
    return G - c * wu


def minimize_local(grid: Grid, p: float, mu: float, alpha_cap: float | None = None,
                   init=None, *, C_Np: float | None = None, check_admissible: bool = True,
                   tol: float = 1e-8, max_iter: int = 50000, polish: bool = True,
                   raise_on_cap: bool = True) -> MinimizerResult:
    """Descend ``E_mu`` on the unit sphere from ``init`` (default ``phi_1``).

    ``alpha_cap`` defaults to the maximizer of the admissibility bound with
    ``M = C alpha^beta`` (needs ``C_Np`` for ``beta > 1``).  With
    ``check_admissible`` the run refuses ``mu`` above the lower threshold
    estimate.  Leaving the cap raises :class:`CapExceeded` (or returns a
    result flagged ``hit_cap`` when ``raise_on_cap`` is false).
    """
    if not mu > 0:
        raise MinimizerError(f"mu must be positive, got {mu}")
    lam1 = grid.lambda1
    N = grid.dim
    beta = N * (p - 1.0) / 4.0
    meas = measure(grid.domain)
    if alpha_cap is None:
        if beta > 1.0 + 1e-12:
            if C_Np is None:
                raise MinimizerError("C_Np is needed to choose the default cap")
            alpha_cap = mu_hat_1_argmax(lam1, C_Np, meas, N, p)
        else:
            alpha_cap = math.inf
    if not alpha_cap > lam1:
        raise MinimizerError(f"alpha_cap must exceed lambda_1={lam1:.6g}")
    if check_admissible and beta >= 1.0 - 1e-12:
        if C_Np is None:
            raise MinimizerError("C_Np is needed for the admissibility check")
        bound = mu_hat_1(lam1, C_Np, meas, N, p)
        if not mu < bound:
            raise MinimizerError(f"mu={mu:.6g} is not below the admissible bound {bound:.6g}")

    if init is None:
        u = dirichlet_eigs(grid, 1)[0].vector.copy()
    else:
        u = _ops.normalize(grid, np.array(init.values if isinstance(init, Field) else init,
                                          dtype=float))
    E = energy(grid, u, mu, p)
    v = _sphere_gradient(grid, u, mu, p)
    s = 1.0
    history = [E]
    it = 0
    converged = False
    hit = False
    lam = math.nan
    res = math.inf

    def _result(u, E, conv, hit, lam, res, it):
        h = _ops.h1sq(grid, u)
        return MinimizerResult(Field(grid, u), float(p), float(mu), float(lam), float(E),
                               float(alpha_cap), h, None, conv, hit, float(res), it)

    while it < max_iter:
        it += 1
        gsq = _ops.h1sq(grid, v)
        for _ in range(50):
            cand = _ops.normalize(grid, u - s * v)
            Ec = energy(grid, cand, mu, p)
            if Ec <= E - 1e-4 * s * gsq or s < 1e-14:
                break
            s *= 0.5
        v_new = _sphere_gradient(grid, cand, mu, p)
        du, dv = cand - u, v_new - v
        dudv = float(du @ (grid.K @ dv))
        s = _ops.h1sq(grid, du) / dudv if dudv > 0 else 2.0 * s
        s = min(max(s, 1e-12), 1e6)
        u, v, E = cand, v_new, Ec
        history.append(E)
        if _ops.h1sq(grid, u) >= alpha_cap:
            hit = True
            break
        gnorm = math.sqrt(max(_ops.h1sq(grid, v), 0.0))
        if polish and gnorm <= 1e-5 * math.sqrt(max(_ops.h1sq(grid, u), 1e-300)):
            lam0, _, _ = recover_multipliers(grid, u, p)
            try:
                un, ln, nit = _ops.newton_fixed_mu(grid, u, lam0, mu, p)
                un = _ops.normalize(grid, un)
                En = energy(grid, un, mu, p)
                if En <= E + 1e-12 * abs(E) and _ops.h1sq(grid, un) < alpha_cap:
                    u, E = un, En
                    history.append(E)
                    it += nit
                    v = _sphere_gradient(grid, u, mu, p)
            except _ops.NewtonFailure:
                polish = False
        if len(history) > 10:
            window = history[-11:]
            scale = max(abs(E), 1e-300)
            if max(window) - min(window) < 1e-12 * scale:
                lam, _, res = recover_multipliers(grid, u, p)
                if res < tol:
                    converged = True
                    break
    if hit:
        out = _result(u, E, False, True, math.nan, math.nan, it)
        if raise_on_cap:
            raise CapExceeded(out)
        return out
    if not converged:
        lam, _, res = recover_multipliers(grid, u, p)
        raise MinimizerError(f"no convergence in {max_iter} iterations (residual {res:.3g})")
    u = _ops.sign_normalize(u)
    # multipliers at fixed mu: lam from the Lagrange identity tested with u
    lam = mu * _ops.fsum(grid, u, p) - _ops.h1sq(grid, u)
    res = _ops.dual_residual(grid, u, lam, mu, p)
    out = _result(u, E, True, False, lam, res, it)
    out.morse = morse_index(grid, u, lam, mu, p)
    return out


@dataclass
class WitnessPoint:
    scale: float
    alpha: float
    energy: float
    gn_ratio: float


def _cutoff(grid: Grid) -> np.ndarray:
    kind = grid.domain.kind
    x = grid.coords
    if kind == "interval":
        a, b = grid.domain.params
        return np.sin(np.pi * (x[:, 0] - a) / (b - a))
    if kind == "rectangle":
        out = np.ones(grid.size)
        for i, L in enumerate(grid.domain.params):
            out *= np.sin(np.pi * x[:, i] / L)
        return out
    R = grid.domain.params[0]
    return np.cos(0.5 * np.pi * np.linalg.norm(x, axis=1) / R)


def blowup_witness(grid: Grid, p: float, n_scales: int, mu: float = 1.0,
                   profile: SolitonProfile | None = None, a0: float | None = None,
                   min_nodes: float = 10.0) -> list[WitnessPoint]:
    """Energies of normalized cutoff solitons ``eta(x) Z((x - x0)/a_n)``.

    ``a_n = a0 / 2^n``; scales with fewer than ``min_nodes`` grid spacings
    per ``a_n`` are dropped (the resolvable prefix is returned).
    """
    from .soliton import shoot_ground_state

    N = grid.dim
    if profile is None:
        profile = shoot_ground_state(N, p)
    beta = N * (p - 1.0) / 4.0
    center = grid.domain.center
    eta = _cutoff(grid)
    h = grid.spacing
    if a0 is None:
        a0 = _diameter(grid) / 40.0
    out = []
    for n in range(n_scales):
        a = a0 / 2.0 ** n
        if a / h < min_nodes:
            break
        r = np.linalg.norm(grid.coords - center, axis=1) / a
        u = _ops.normalize(grid, eta * profile.evaluate(r))
        al = _ops.h1sq(grid, u)
        E = energy(grid, u, mu, p)
        out.append(WitnessPoint(a, al, E, _ops.fsum(grid, u, p) / al ** beta))
    return out


def _diameter(grid: Grid) -> float:
    kind = grid.domain.kind
    if kind == "interval":
        a, b = grid.domain.params
        return b - a
    if kind == "rectangle":
        return min(grid.domain.params)
    return 2.0 * grid.domain.params[0]
