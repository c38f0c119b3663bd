"""Nodal solutions by scaling and alternating-sign juxtaposition, and the
solvable-mass ladder for sector tilings of the ball.

If ``(u, lam)`` solves ``-Delta u + lam u = mu |u|^{p-1} u`` on a box ``R``,
then ``U(x) = (-1)^{m(x)} k^{2/(p-1)} u(k x - cell(x))`` solves the same
equation with ``k^2 lam`` on ``R`` when ``R`` is cut into ``k^N`` congruent
cells, ``m(x)`` being the parity of the cell index.  Its mass is
``k^{4/(p-1)}`` times the mass of ``u``.

On grids this is exact when the output grid is the input grid refined by
``k``: every cell then carries a copy of the input nodes, and the cell
interfaces are nodes where ``U`` vanishes.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv

from .grid import DomainSpec, Field, Grid, build_grid

__all__ = [
    "TilingSpec",
    "TilingError",
    "tile_rectangle",
    "sector_lambda1_bound",
    "bessel_zero",
    "mass_ladder",
    "ladder_exponent",
    "LadderRow",
    "Ladder",
    "write_ladder_csv",
    "MAX_TILED_NODES",
]

MAX_TILED_NODES = 4_000_000


class TilingError(ValueError):
    pass


@dataclass(frozen=True)
class TilingSpec:
    domain: DomainSpec
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise TilingError("k must be >= 1")

    @property
    def h(self) -> int:
        """Number of tiles: ``k^N`` for boxes, ``k`` sectors for the disk."""
        if self.domain.kind == "disk":
            return self.k
        return self.k ** self.domain.dim


def tile_rectangle(u: Field, lam: float, mu: float, p: float, k: int,
                   max_nodes: int = MAX_TILED_NODES) -> tuple[Field, float]:
    """Alternating-sign juxtaposition of ``k^N`` rescaled copies of ``u``.

    Returns the field on the input domain at resolution ``k * n`` and the
    new multiplier ``k^2 lam``; ``mu`` is unchanged.
    """
    grid = u.grid
    if grid.domain.kind not in ("interval", "rectangle"):
        raise TilingError(f"tiling needs an interval or rectangle, got {grid.domain.kind}")
    if int(k) != k or k < 1:
        raise TilingError(f"k must be a positive integer, got {k}")
    k = int(k)
    if k == 1:
        return Field(grid, u.values.copy()), lam
    n_new = k * grid.n
    m_new = n_new - 1
    N = grid.dim
    if m_new ** N > max_nodes:
        raise TilingError(f"tiled grid would have {m_new ** N} nodes (cap {max_nodes})")
    fine = build_grid(grid.domain, n_new)
    amp = k ** (2.0 / (p - 1.0))
    # per axis: fine node j (1..n_new-1) lies in cell c = j // n at local
    # node j - c*n; local node 0 is an interface (Dirichlet) node
    j = np.arange(1, n_new)
    cell = j // grid.n
    local = j - cell * grid.n
    on_interface = local == 0
    src = np.where(on_interface, 0, local - 1)
    sign = np.where(cell % 2 == 0, 1.0, -1.0)
    arr = u.values.reshape(grid.shape)
    if N == 1:
        out = amp * sign * arr[src]
        out[on_interface] = 0.0
    else:
        out = amp * arr[np.ix_(src, src)] * np.outer(sign, sign)
        out[on_interface, :] = 0.0
        out[:, on_interface] = 0.0
    return Field(fine, out.ravel()), k * k * lam


def bessel_zero(order: float, which: int = 1) -> float:
    """``which``-th positive zero of ``J_order`` by bracketing and Brent's method."""
    x = max(order, 0.0) + 0.5
    found = 0
    step = 0.1
    f_prev = jv(order, x)
    while True:
        x_next = x + step
        f_next = jv(order, x_next)
        if f_prev == 0.0:
            found += 1
            if found == which:
                return x
        elif f_prev * f_next < 0:
            found += 1
            if found == which:
                return brentq(lambda t: jv(order, t), x, x_next, xtol=1e-15)
        x, f_prev = x_next, f_next


def sector_lambda1_bound(k: int, N: int = 2) -> float:
    """First Dirichlet eigenvalue of the ball inscribed in a ``k``-sector of the unit ball."""
    if int(k) != k or k < 2:
        raise TilingError(f"need k >= 2, got {k}")
    if N < 2:
        raise TilingError(f"sector tilings need N >= 2, got {N}")
    s = math.sin(math.pi / k)
    j = bessel_zero(N / 2.0 - 1.0)
    return j * j * ((s + 1.0) / s) ** 2


def ladder_exponent(N: int, p: float) -> float:
    """Growth exponent ``(N-1)/(p-1) (1 + 4/(N-1) - p)`` of the sector ladder."""
    if N < 2:
        raise TilingError("the sector ladder needs N >= 2")
    return (N - 1.0) / (p - 1.0) * (1.0 + 4.0 / (N - 1.0) - p)


@dataclass
class LadderRow:
    k: int
    h_k: int
    lambda1_bound: float
    rho_lower: float
    cumulative_max: float


@dataclass
class Ladder:
    N: int
    p: float
    exponent: float
    verdict: str
    rows: list = field(default_factory=list)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def mass_ladder(N: int, p: float, D_Np: float, lambda1_bounds=None, k_max: int = 64,
                k_min: int = 2) -> Ladder:
    """Per-``k`` lower bounds ``h_k D lam_1(D_k)^{2/(p-1) - N/2}`` on solvable masses.

    ``lambda1_bounds`` maps ``k`` to an upper bound of ``lam_1(D_k)``
    (default :func:`sector_lambda1_bound`).  The verdict is ``"diverges"``
    when the growth exponent is positive and ``"inconclusive"`` otherwise.
    """
    expo = ladder_exponent(N, p)
    verdict = "diverges" if expo > 1e-12 else "inconclusive"
    ladder = Ladder(N, float(p), expo, verdict)
    power = 2.0 / (p - 1.0) - N / 2.0
    best = 0.0
    for k in range(k_min, k_max + 1):
        lb = lambda1_bounds[k] if lambda1_bounds is not None else sector_lambda1_bound(k, N)
        rho = k * D_Np * lb ** power
        best = max(best, rho)
        ladder.rows.append(LadderRow(k, k, lb, rho, best))
    return ladder


def write_ladder_csv(path, ladder: Ladder, header: str | None = None) -> None:
    from .io import fmt

    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        wr = csv.writer(fh)
        wr.writerow(["k", "h_k", "lambda1_bound", "rho_lower", "cumulative_max"])
        for r in ladder.rows:
            wr.writerow([r.k, r.h_k, fmt(r.lambda1_bound), fmt(r.rho_lower), fmt(r.cumulative_max)])
