"""Concentration diagnostics along branches of normalized solutions.

As ``alpha -> infinity`` solutions concentrate at points ``P_i`` on the
scale ``eps = lam^{-1/2}``, and the rescaled profiles
``V(y) = eps^{2/(p-1)} U(eps y + P)`` (``U = mu^{1/(p-1)} u``) approach
copies of the ground state ``Z``.  The checks here are:

* ratio limits ``alpha/lam -> N(p-1)/(N+2-p(N-2))`` and
  ``f/alpha^beta -> C_{N,p} k^{-(p-1)/2}`` for ``k`` bumps;
* the trend of ``mu``: to ``+inf``, a finite limit or ``0`` according as
  ``p`` is below, at or above ``1 + 4/N``;
* bump locations, separations and exponential decay rates;
* whole-space Pohozaev identities for the rescaled profile.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _ops
from .grid import Field, Grid

__all__ = [
    "BumpSet",
    "BlowupReport",
    "DiagnosticsError",
    "bump_detect",
    "decay_fit",
    "pohozaev_check",
    "rescaled_norms",
    "richardson",
    "asymptotic_ratios",
    "alpha_lambda_limit",
    "THETA",
    "R_SUP",
]

THETA = 0.2
R_SUP = 5.0


class DiagnosticsError(ValueError):
    pass


@dataclass
class BumpSet:
    centers: np.ndarray
    heights: np.ndarray
    separations: np.ndarray
    boundary_distances: np.ndarray

    @property
    def count(self) -> int:
        return len(self.centers)

    @property
    def min_separation(self) -> float:
        return float(self.separations.min()) if self.separations.size else math.inf

    @property
    def min_boundary_distance(self) -> float:
        return float(self.boundary_distances.min()) if self.boundary_distances.size else math.nan


def _values(u):
    return u.values if isinstance(u, Field) else np.asarray(u, dtype=float)


def bump_detect(u: Field, lam: float, theta: float = THETA, r_sup: float = R_SUP) -> BumpSet:
    """Local maxima of ``|u|`` above ``theta * max|u|`` with non-maximum
    suppression inside radius ``r_sup / sqrt(lam)``.

    Separations (pairwise) and boundary distances are returned in units of
    ``lam^{-1/2}``.
    """
    if not lam > 0:
        raise DiagnosticsError("lam must be positive")
    grid = u.grid
    a = np.abs(_values(u))
    top = a.max()
    # neighbours are the off-diagonal entries of the stiffness pattern
    K = grid.K.tocsr()
    is_max = a >= theta * top
    rows = np.repeat(np.arange(grid.size), np.diff(K.indptr))
    cols = K.indices
    off = rows != cols
    bigger = np.zeros(grid.size, dtype=bool)
    np.logical_or.at(bigger, rows[off], a[cols[off]] > a[rows[off]])
    cand = np.nonzero(is_max & ~bigger)[0]
    cand = cand[np.argsort(-a[cand], kind="stable")]
    radius = r_sup / math.sqrt(lam)
    keep = []
    for i in cand:
        x = grid.coords[i]
        if all(np.linalg.norm(x - grid.coords[j]) > radius for j in keep):
            keep.append(i)
    centers = grid.coords[keep]
    sl = math.sqrt(lam)
    if len(keep) > 1:
        diff = centers[:, None, :] - centers[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        iu = np.triu_indices(len(keep), 1)
        seps = sl * dist[iu]
    else:
        seps = np.zeros(0)
    bdist = sl * grid.boundary_distance(centers) if keep else np.zeros(0)
    return BumpSet(centers, a[keep], seps, bdist)


def decay_fit(u: Field, lam: float, centers, window=(1e-8, 1e-2), min_decades: float = 3.0,
              min_points: int = 8) -> float:
    """Rate ``gamma`` in ``|u| ~ exp(-gamma sqrt(lam) d)``, ``d`` the distance
    to the nearest center, fitted where ``|u|/max|u|`` lies in ``window``."""
    if not lam > 0:
        raise DiagnosticsError("lam must be positive")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.size == 0:
        raise DiagnosticsError("at least one center is required")
    grid = u.grid
    a = np.abs(_values(u))
    top = a.max()
    mask = (a >= window[0] * top) & (a <= window[1] * top)
    if mask.sum() < min_points:
        raise DiagnosticsError("insufficient dynamic range")
    vals = a[mask]
    if math.log10(vals.max() / vals.min()) < min_decades:
        raise DiagnosticsError("insufficient dynamic range")
    pts = grid.coords[mask]
    d = np.min(np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=2), axis=1)
    x = -math.sqrt(lam) * d
    y = np.log(vals)
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def rescaled_norms(u: Field, lam: float, mu: float, p: float):
    """``(l2sq, gradsq, lp1)`` of ``V(y) = eps^{2/(p-1)} U(eps y)``, ``eps = lam^{-1/2}``."""
    grid = u.grid
    N = grid.dim
    v = _values(u)
    c = mu ** (1.0 / (p - 1.0))
    eps = lam ** -0.5
    e = 4.0 / (p - 1.0)
    l2 = eps ** (e - N) * c * c * _ops.l2sq(grid, v)
    gr = eps ** (e + 2.0 - N) * c * c * _ops.h1sq(grid, v)
    lp = eps ** (2.0 * (p + 1.0) / (p - 1.0) - N) * c ** (p + 1.0) * _ops.fsum(grid, v, p)
    return l2, gr, lp


def pohozaev_check(u: Field, lam: float, mu: float, p: float, centers=None,
                   max_boundary_effect: float = 0.01):
    """Relative residuals of the two Pohozaev identities for the rescaled profile.

    Raises :class:`DiagnosticsError` when ``exp(-sqrt(lam) d)`` exceeds
    ``max_boundary_effect`` for the bump closest to the boundary.
    """
    if not (lam > 0 and mu > 0):
        raise DiagnosticsError("need lam > 0 and mu > 0")
    grid = u.grid
    N = grid.dim
    if centers is None:
        centers = bump_detect(u, lam).centers
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    d = float(np.min(grid.boundary_distance(centers)))
    if math.exp(-math.sqrt(lam) * d) > max_boundary_effect:
        raise DiagnosticsError("domain too small relative to the concentration scale")
    l2, gr, lp = rescaled_norms(u, lam, mu, p)
    E = 0.5 * gr + 0.5 * l2 - lp / (p + 1.0)
    r1 = abs(lp - 2.0 * (p + 1.0) / (p - 1.0) * E) / lp
    r2 = abs(l2 - (N + 2.0 - p * (N - 2.0)) / (p - 1.0) * E) / l2
    return r1, r2


def richardson(t: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Two-term extrapolations to ``t = 0`` of ``r(t) ~ L + c t`` from consecutive pairs."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    return (r[1:] * t[:-1] - r[:-1] * t[1:]) / (t[:-1] - t[1:])


def alpha_lambda_limit(N: int, p: float) -> float:
    return N * (p - 1.0) / (N + 2.0 - p * (N - 2.0))


def _stable(ext: np.ndarray, rel: float = 0.02) -> bool:
    last = ext[-3:]
    ref = np.max(np.abs(last))
    return bool(len(last) == 3 and np.ptp(last) <= rel * ref)


@dataclass
class BlowupReport:
    N: int
    p: float
    rows: list = field(default_factory=list)
    alpha_lambda_limit: float = math.nan
    alpha_lambda_expected: float = math.nan
    alpha_lambda_stable: bool = False
    gn_ratio_limit: float = math.nan
    gn_ratio_expected: float = math.nan
    gn_ratio_stable: bool = False
    mu_slope: float = math.nan
    mu_trichotomy: str = ""
    mu_expected_trend: str = ""
    mu_limit: float = math.nan
    mu_limit_expected: float = math.nan
    mu_limit_stable: bool = False
    gamma_fit: float = math.nan
    bumps: int = 0

    def verdicts(self) -> dict:
        return {
            "alpha_lambda_limit": self.alpha_lambda_limit,
            "mu_trichotomy": self.mu_trichotomy,
            "gn_ratio_limit": self.gn_ratio_limit,
            "gamma_fit": self.gamma_fit,
        }

    def to_dict(self) -> dict:
        out = {
            "N": self.N,
            "p": self.p,
            "rows": self.rows,
            "verdicts": self.verdicts(),
            "expected": {
                "alpha_lambda_limit": self.alpha_lambda_expected,
                "mu_trichotomy": self.mu_expected_trend,
                "gn_ratio_limit": self.gn_ratio_expected,
                "mu_limit": self.mu_limit_expected,
            },
            "mu_slope": self.mu_slope,
            "mu_limit": self.mu_limit,
            "stable": {
                "alpha_lambda": self.alpha_lambda_stable,
                "gn_ratio": self.gn_ratio_stable,
                "mu_limit": self.mu_limit_stable,
            },
            "bumps": self.bumps,
        }
        return out


def asymptotic_ratios(branch, C_Np: float | None = None, Z_l2sq: float | None = None,
                      tail: int | None = None) -> BlowupReport:
    """Per-point concentration data and extrapolated limits along ``branch``.

    ``C_Np`` and ``Z_l2sq`` (ground-state constants) enable the predicted
    GN-ratio and critical ``mu`` limits.  Extrapolations use the last
    ``tail`` points (default: the upper half of the branch).
    """
    pts = list(branch)
    if len(pts) < 5:
        raise DiagnosticsError("branch too short: need at least 5 points")
    grid = pts[0].u.grid
    if max(pt.alpha for pt in pts) < 100.0 * grid.lambda1:
        raise DiagnosticsError("branch too short: need max alpha >= 100 lambda_1")
    N = grid.dim
    p = pts[0].p
    beta = N * (p - 1.0) / 4.0
    rep = BlowupReport(N, p)
    for pt in pts:
        row = {
            "alpha": pt.alpha,
            "lambda": pt.lam,
            "mu": pt.mu,
            "alpha_over_lambda": pt.alpha / pt.lam if pt.lam != 0 else math.nan,
            "gn_ratio": pt.f / pt.alpha ** beta,
            "morse": -1 if pt.morse is None else pt.morse,
        }
        if pt.lam > 0:
            bs = bump_detect(pt.u, pt.lam)
            row.update(bumps=bs.count, min_separation=bs.min_separation,
                       min_boundary_distance=bs.min_boundary_distance)
        rep.rows.append(row)
    m = len(pts) // 2 if tail is None else tail
    up = [pt for pt in pts[-m:] if pt.lam > 0]
    if len(up) < 4:
        raise DiagnosticsError("too few points with lambda > 0 in the upper branch")
    t = np.array([pt.lam ** -0.5 for pt in up])
    al = np.array([pt.alpha / pt.lam for pt in up])
    gn = np.array([pt.f / pt.alpha ** beta for pt in up])
    mus = np.array([pt.mu for pt in up])
    ext_al = richardson(t, al)
    ext_gn = richardson(t, gn)
    rep.alpha_lambda_limit = float(ext_al[-1])
    rep.alpha_lambda_stable = _stable(ext_al)
    rep.alpha_lambda_expected = alpha_lambda_limit(N, p)
    rep.gn_ratio_limit = float(ext_gn[-1])
    rep.gn_ratio_stable = _stable(ext_gn)
    last = up[-1]
    bs = bump_detect(last.u, last.lam)
    k = max(bs.count, 1)
    rep.bumps = bs.count
    if C_Np is not None:
        rep.gn_ratio_expected = C_Np * k ** (-(p - 1.0) / 2.0)
    lams = np.array([pt.lam for pt in up])
    slope = float(np.polyfit(np.log(lams), np.log(mus), 1)[0])
    rep.mu_slope = slope
    rep.mu_trichotomy = "+inf" if slope > 0.1 else ("0" if slope < -0.1 else "finite")
    pc = 1.0 + 4.0 / N
    rep.mu_expected_trend = "+inf" if p < pc - 1e-12 else ("finite" if abs(p - pc) <= 1e-12 else "0")
    if rep.mu_trichotomy == "finite":
        ext_mu = richardson(t, mus)
        rep.mu_limit = float(ext_mu[-1])
        rep.mu_limit_stable = _stable(ext_mu)
        if Z_l2sq is not None:
            rep.mu_limit_expected = (k * Z_l2sq) ** (2.0 / N)
    try:
        rep.gamma_fit = decay_fit(last.u, last.lam, bs.centers)
    except DiagnosticsError:
        rep.gamma_fit = math.nan
    return rep
