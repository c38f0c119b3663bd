"""Ground state soliton on R^N, the sharp Gagliardo-Nirenberg constant and
the explicit mass/multiplier thresholds built from it.

The ground state ``Z`` solves ``Z'' + (N-1)/r Z' - Z + Z^p = 0`` with
``Z'(0) = 0`` and ``Z -> 0``.  It is found by bisection on ``Z(0)``: too
large a start crosses zero, too small a start turns back up.  The radial ODE
is integrated by a compiled RK4 kernel; once ``Z`` has fallen below
``1e-5 Z(0)`` the nonlinearity is negligible and the profile is continued by
the decaying solution of the linear equation, ``r^{-nu} K_nu(r)`` with
``nu = (N-2)/2``, matched in value.  This avoids the exponential
instability of shooting deep into the tail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.integrate import simpson
from scipy.optimize import minimize_scalar
from scipy.special import kve

from .grid import ProblemParams

__all__ = [
    "SolitonProfile",
    "Constants",
    "ShootingError",
    "shoot_ground_state",
    "gn_constant",
    "thresholds",
    "mu_from_rho",
    "rho_from_mu",
    "mu_hat_1",
    "mu_hat_1_argmax",
    "admissible_expression",
    "constants_report",
    "sphere_area",
]

STEPS = 2 ** 17
SPLICE_LEVEL = 1e-5
TAIL_LEVEL = 1e-10


class ShootingError(RuntimeError):
    """Bracket not found or the requested tolerance is not reachable."""


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere in R^N (2 for N = 1)."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


@njit(cache=True)
def _integrate(z0, N, p, h, nsteps, zs, dzs):
    # Returns (kind, last index): kind 1 = crossed zero (start too high),
    # -1 = turned upward (start too low), 0 = reached the end of the mesh.
    # series start Z = z0 + a r^2 + b r^4 avoids the 1/r singularity
    a = (z0 - abs(z0) ** (p - 1.0) * z0) / (2.0 * N)
    b = (1.0 - p * abs(z0) ** (p - 1.0)) * a / (8.0 + 4.0 * N)
    zs[0] = z0
    dzs[0] = 0.0
    z = z0 + a * h * h + b * h ** 4
    dz = 2.0 * a * h + 4.0 * b * h ** 3
    zs[1] = z
    dzs[1] = dz
    r = h
    for i in range(1, nsteps):
        rh = r + 0.5 * h
        r1 = r + h
        k1z = dz
        k1d = -(N - 1) / r * dz + z - abs(z) ** (p - 1.0) * z
        z2 = z + 0.5 * h * k1z
        d2 = dz + 0.5 * h * k1d
        k2z = d2
        k2d = -(N - 1) / rh * d2 + z2 - abs(z2) ** (p - 1.0) * z2
        z3 = z + 0.5 * h * k2z
        d3 = dz + 0.5 * h * k2d
        k3z = d3
        k3d = -(N - 1) / rh * d3 + z3 - abs(z3) ** (p - 1.0) * z3
        z4 = z + h * k3z
        d4 = dz + h * k3d
        k4z = d4
        k4d = -(N - 1) / r1 * d4 + z4 - abs(z4) ** (p - 1.0) * z4
        z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
        dz += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        r = r1
        zs[i + 1] = z
        dzs[i + 1] = dz
        if z < 0.0:
            return 1, i + 1
        if dz > 0.0:
            return -1, i + 1
    return 0, nsteps


def _linear_tail(r, nu):
    """``r^{-nu} K_nu(r)`` and its derivative, scaled by ``e^{r}``."""
    return r ** (-nu) * kve(nu, r), -(r ** (-nu)) * kve(nu + 1.0, r)


@dataclass
class SolitonProfile:
    """Radial samples of the ground state on ``[0, r_max]``.

    ``r`` is uniform with ``STEPS + 1`` nodes; ``z`` and ``dz`` hold the
    profile and its derivative.
    """

    N: int
    p: float
    r_max: float
    r: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    dz: np.ndarray = field(repr=False)
    Z0: float = 0.0
    l2sq: float = 0.0
    gradsq: float = 0.0
    lp1: float = 0.0
    splice_radius: float = 0.0
    bracket_width: float = 0.0

    @property
    def energy(self) -> float:
        """``E(Z) = gradsq/2 + l2sq/2 - lp1/(p+1)``."""
        return 0.5 * self.gradsq + 0.5 * self.l2sq - self.lp1 / (self.p + 1.0)

    @property
    def beta(self) -> float:
        return self.N * (self.p - 1.0) / 4.0

    def evaluate(self, r) -> np.ndarray:
        """Profile at arbitrary radii (linear interpolation, zero beyond ``r_max``)."""
        r = np.abs(np.asarray(r, dtype=float))
        return np.interp(r, self.r, self.z, right=0.0)

    def pohozaev_residuals(self) -> tuple[float, float]:
        """Relative residuals of the two whole-space Pohozaev identities."""
        E, p, N = self.energy, self.p, self.N
        r1 = abs(self.lp1 - 2.0 * (p + 1.0) / (p - 1.0) * E) / self.lp1
        r2 = abs(self.l2sq - (N + 2.0 - p * (N - 2.0)) / (p - 1.0) * E) / self.l2sq
        return r1, r2

    def equation_residual(self) -> float:
        """Max of ``|Z'' + (N-1)/r Z' - Z + Z^p| / Z0`` by central differences."""
        h = self.r[1] - self.r[0]
        z, r = self.z, self.r
        d2 = (z[2:] - 2 * z[1:-1] + z[:-2]) / h ** 2
        d1 = (z[2:] - z[:-2]) / (2 * h)
        res = d2 + (self.N - 1) / r[1:-1] * d1 - z[1:-1] + np.abs(z[1:-1]) ** self.p
        return float(np.max(np.abs(res)) / self.Z0)

    @property
    def gn_constant(self) -> float:
        return gn_constant(self)


def _bisect(N, p, h, n, zs, dzs, max_iter=200):
    lo, hi = 1.0, 2.0
    for _ in range(60):
        if _integrate(hi, N, p, h, n, zs, dzs)[0] == 1:
            break
        lo = hi
        hi *= 2.0
    else:
        raise ShootingError(f"no super-shooting start found for N={N}, p={p}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        kind, _ = _integrate(mid, N, p, h, n, zs, dzs)
        if kind == 1:
            hi = mid
        else:
            lo = mid
    return lo, hi


def _build_profile(N, p, r_max):
    n = STEPS
    h = r_max / n
    zs = np.empty(n + 1)
    dzs = np.empty(n + 1)
    lo, hi = _bisect(N, p, h, n, zs, dzs)
    kind, last = _integrate(lo, N, p, h, n, zs, dzs)
    z0 = lo
    below = np.nonzero(zs[: last + 1] < SPLICE_LEVEL * z0)[0]
    if below.size == 0:
        raise ShootingError(f"profile did not decay to {SPLICE_LEVEL:g}*Z0 within r_max={r_max}")
    js = int(below[0])
    r = h * np.arange(n + 1)
    z = zs.copy()
    dz = dzs.copy()
    nu = (N - 2.0) / 2.0
    t_s, _ = _linear_tail(r[js], nu)
    tail_r = r[js:]
    t, dt = _linear_tail(tail_r, nu)
    scale = z[js] / t_s
    decay = np.exp(-(tail_r - r[js]))
    z[js:] = scale * t * decay
    dz[js:] = scale * dt * decay
    return r, z, dz, z0, hi - lo, r[js]


def shoot_ground_state(N: int, p: float, tol: float = 1e-10, r_max: float = 30.0,
                       max_doublings: int = 4) -> SolitonProfile:
    """Compute the positive radial ground state of ``-Delta Z + Z = Z^p`` on R^N.

    ``r_max`` is doubled until ``Z(r_max) < tol * Z(0)``; the RK4 step is
    ``r_max / 2**17``.
    """
    ProblemParams(N, p)
    for _ in range(max_doublings + 1):
        r, z, dz, z0, width, rs = _build_profile(N, float(p), float(r_max))
        if z[-1] < tol * z0 and z[-1] < 1e-8 * z0:
            break
        r_max *= 2.0
    else:
        raise ShootingError(f"tail above {tol:g}*Z0 even at r_max={r_max}")
    area = sphere_area(N)
    jac = area * r ** (N - 1)
    l2sq = simpson(jac * z * z, x=r)
    gradsq = simpson(jac * dz * dz, x=r)
    lp1 = simpson(jac * np.abs(z) ** (p + 1.0), x=r)
    return SolitonProfile(N, float(p), float(r[-1]), r, z, dz, z0, float(l2sq),
                          float(gradsq), float(lp1), float(rs), float(width))


def gn_constant(profile: SolitonProfile) -> float:
    """Gagliardo-Nirenberg quotient evaluated at the ground state."""
    p, b = profile.p, profile.beta
    return profile.lp1 / (profile.gradsq ** b * profile.l2sq ** (((p + 1.0) - 2.0 * b) / 2.0))


def mu_from_rho(rho: float, p: float) -> float:
    if not rho > 0:
        raise ValueError(f"mass must be positive, got {rho}")
    return rho ** ((p - 1.0) / 2.0)


def rho_from_mu(mu: float, p: float) -> float:
    if not mu > 0:
        raise ValueError(f"multiplier must be positive, got {mu}")
    return mu ** (2.0 / (p - 1.0))


@dataclass(frozen=True)
class Constants:
    """Explicit constants for one ``(N, p)`` pair.

    ``D_Np`` is only defined for ``beta >= 1`` and ``rho_star`` only for
    ``beta == 1``; otherwise they are ``None``.
    """

    N: int
    p: float
    C_Np: float
    beta: float
    D_Np: float | None
    rho_star: float | None
    rho1_lower: float
    rho3_lower: float


def _beta_class(beta: float) -> int:
    if abs(beta - 1.0) <= 1e-12:
        return 0
    return -1 if beta < 1.0 else 1


def thresholds(N: int, p: float, C_Np: float, lam1: float, lam3: float | None = None) -> Constants:
    """Mass thresholds from the sharp constant and the first/third eigenvalue."""
    ProblemParams(N, p)
    if not lam1 > 0:
        raise ValueError("lam1 must be positive")
    if lam3 is None:
        lam3 = lam1
    if lam3 < lam1:
        raise ValueError("lam3 must be >= lam1")
    if not C_Np > 0:
        raise ValueError("C_Np must be positive")
    beta = N * (p - 1.0) / 4.0
    cls = _beta_class(beta)
    base = (p + 1.0) / (2.0 * C_Np)
    expo = 2.0 / (p - 1.0) - N / 2.0
    if cls < 0:
        return Constants(N, p, C_Np, beta, None, None, math.inf, math.inf)
    if cls == 0:
        D = base ** (2.0 / (p - 1.0))
        rho_star = base ** (N / 2.0)
        return Constants(N, p, C_Np, 1.0, D, rho_star, rho_star, 2.0 * D)
    D = (base * (beta - 1.0) ** (beta - 1.0) / beta ** beta) ** (2.0 / (p - 1.0))
    return Constants(N, p, C_Np, beta, D, None, D * lam1 ** expo, 2.0 * D * lam3 ** expo)


def admissible_expression(alpha, lam1: float, M, measure: float, p: float):
    """``(p+1)/2 (alpha - lam1) / (M - |Omega|^{-(p-1)/2})``."""
    return 0.5 * (p + 1.0) * (alpha - lam1) / (M - measure ** (-(p - 1.0) / 2.0))


def _mu_hat_objective(lam1, C, measure, N, p):
    beta = N * (p - 1.0) / 4.0

    def f(t):
        a = math.exp(t)
        return -admissible_expression(a, lam1, C * a ** beta, measure, p)

    return f


def mu_hat_1_argmax(lam1: float, C_Np: float, measure: float, N: int, p: float) -> float:
    """Maximizing ``alpha`` of the admissibility bound with ``M = C alpha^beta``.

    Defined for ``beta > 1`` only.
    """
    beta = N * (p - 1.0) / 4.0
    if _beta_class(beta) <= 0:
        raise ValueError("the supremum is not attained for beta <= 1")
    f = _mu_hat_objective(lam1, C_Np, measure, N, p)
    guess = beta * lam1 / (beta - 1.0)
    # coarse log-scan to bracket the maximum, then golden section
    ts = np.linspace(math.log(lam1) + 1e-9, math.log(guess) + 8.0, 401)
    vals = np.array([f(t) for t in ts])
    i = int(np.clip(np.argmin(vals), 1, ts.size - 2))
    res = minimize_scalar(f, bracket=(ts[i - 1], ts[i], ts[i + 1]), method="golden",
                          options={"xtol": 1e-12})
    return math.exp(res.x)


def mu_hat_1(lam1: float, C_Np: float, measure: float, N: int, p: float) -> float:
    """Supremum over ``alpha > lam1`` of the admissibility bound with
    ``M_{alpha,1}`` replaced by ``C alpha^beta``.

    Infinite for ``beta < 1``; the limit ``(p+1)/(2C)`` for ``beta = 1``.
    """
    if not (lam1 > 0 and measure > 0):
        raise ValueError("lam1 and measure must be positive")
    beta = N * (p - 1.0) / 4.0
    cls = _beta_class(beta)
    if cls < 0:
        return math.inf
    if cls == 0:
        return (p + 1.0) / (2.0 * C_Np)
    a = mu_hat_1_argmax(lam1, C_Np, measure, N, p)
    return -_mu_hat_objective(lam1, C_Np, measure, N, p)(math.log(a))


def constants_report(profile: SolitonProfile, lam1: float, lam3: float, measure: float) -> dict:
    """Summary dictionary with the fields of the constants JSON report."""
    C = gn_constant(profile)
    cst = thresholds(profile.N, profile.p, C, lam1, lam3)
    return {
        "N": profile.N,
        "p": profile.p,
        "beta": cst.beta,
        "C_Np": C,
        "Z0": profile.Z0,
        "Z_l2sq": profile.l2sq,
        "D_Np": cst.D_Np,
        "rho_star": cst.rho_star,
        "rho1_lower": cst.rho1_lower,
        "rho3_lower": cst.rho3_lower,
        "mu_hat_1": mu_hat_1(lam1, C, measure, profile.N, profile.p),
    }
