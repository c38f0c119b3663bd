"""Domains, structured grids and the discrete Dirichlet Laplacian.

Every other module works with the pair ``(K, w)`` held by a :class:`Grid`:

* ``w`` are positive quadrature weights, one per interior node.  On boxes
  they are the trapezoid weights of the closed mesh restricted to interior
  nodes (boundary nodes carry zero values), so ``w`` matches the stencil and
  a rescaled copy of a grid is again a grid with the same local weights;
* ``K`` is the symmetric positive-definite stiffness matrix of the discrete
  Dirichlet form, so that ``u @ K @ u`` approximates ``int |grad u|^2``.

The discrete operator ``-Delta_h`` is ``W^{-1} K`` and is self-adjoint in the
weighted inner product ``<u, v>_w = sum(w * u * v)``.  Fields store interior
nodes only; the Dirichlet condition is implicit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import splu

__all__ = [
    "ProblemParams",
    "DomainSpec",
    "Grid",
    "Field",
    "build_grid",
    "measure",
    "norms",
    "GridError",
]

MIN_RESOLUTION = 8


class GridError(ValueError):
    """Invalid domain or grid request."""


@dataclass(frozen=True)
class ProblemParams:
    """Dimension ``N`` and exponent ``p`` of ``-Delta U + lam U = |U|^{p-1} U``."""

    N: int
    p: float

    def __post_init__(self):
        if self.N not in (1, 2, 3):
            raise GridError(f"dimension N must be 1, 2 or 3, got {self.N}")
        if not (self.p > 1.0 and math.isfinite(self.p)):
            raise GridError(f"exponent p must be finite and > 1, got {self.p}")
        if self.N >= 3 and self.p >= (self.N + 2) / (self.N - 2):
            raise GridError(f"p={self.p} is not Sobolev-subcritical for N={self.N}")

    @property
    def critical_exponent(self) -> float:
        return 1.0 + 4.0 / self.N

    @property
    def beta(self) -> float:
        return self.N * (self.p - 1.0) / 4.0

    @property
    def regime(self) -> str:
        pc = self.critical_exponent
        if abs(self.p - pc) <= 1e-12 * pc:
            return "critical"
        return "subcritical" if self.p < pc else "supercritical"


@dataclass(frozen=True)
class DomainSpec:
    """One of ``interval(a, b)``, ``rectangle(widths)`` or ``disk(radius)``.

    Rectangles have their lower corner at the origin; disks are centred at
    the origin.
    """

    kind: str
    params: tuple

    def __post_init__(self):
        kind, prm = self.kind, self.params
        if kind == "interval":
            if len(prm) != 2 or not prm[1] > prm[0]:
                raise GridError(f"interval needs a < b, got {prm}")
        elif kind == "rectangle":
            if len(prm) not in (1, 2) or min(prm) <= 0:
                raise GridError(f"rectangle needs positive widths, got {prm}")
        elif kind == "disk":
            if len(prm) != 1 or prm[0] <= 0:
                raise GridError(f"disk needs a positive radius, got {prm}")
        else:
            raise GridError(f"unsupported domain kind {kind!r}")
        object.__setattr__(self, "params", tuple(float(x) for x in prm))

    @classmethod
    def interval(cls, a: float, b: float) -> "DomainSpec":
        return cls("interval", (a, b))

    @classmethod
    def rectangle(cls, *widths: float) -> "DomainSpec":
        return cls("rectangle", tuple(widths))

    @classmethod
    def square(cls, side: float) -> "DomainSpec":
        return cls("rectangle", (side, side))

    @classmethod
    def disk(cls, radius: float) -> "DomainSpec":
        return cls("disk", (radius,))

    @classmethod
    def parse(cls, text: str) -> "DomainSpec":
        """Parse ``interval:0,pi``, ``square:1``, ``rectangle:2,3`` or ``disk:1``."""
        try:
            kind, _, rest = text.partition(":")
            vals = [_parse_number(t) for t in rest.split(",")] if rest else []
        except ValueError as exc:
            raise GridError(f"malformed domain {text!r}: {exc}") from None
        kind = kind.strip().lower()
        if kind == "square":
            if len(vals) != 1:
                raise GridError(f"malformed domain {text!r}")
            return cls.square(vals[0])
        if kind not in ("interval", "rectangle", "disk"):
            raise GridError(f"malformed domain {text!r}")
        return cls(kind, tuple(vals))

    def to_string(self) -> str:
        return f"{self.kind}:" + ",".join(repr(x) for x in self.params)

    @property
    def weight_sum(self) -> float:
        """Total quadrature weight including the boundary nodes."""
        return float(self.weights.sum()) + self.boundary_weight

    @property
    def dim(self) -> int:
        if self.kind == "interval":
            return 1
        if self.kind == "rectangle":
            return len(self.params)
        return 2

    @property
    def center(self) -> np.ndarray:
        if self.kind == "interval":
            return np.array([0.5 * (self.params[0] + self.params[1])])
        if self.kind == "rectangle":
            return 0.5 * np.asarray(self.params)
        return np.zeros(2)


def _parse_number(tok: str) -> float:
    """Parse a float, allowing a ``pi`` factor such as ``pi``, ``2pi`` or ``0.5*pi``."""
    tok = tok.strip().lower()
    if tok.endswith("pi"):
        coef = tok[:-2].rstrip("*").strip()
        if coef in ("", "+"):
            return math.pi
        if coef == "-":
            return -math.pi
        return float(coef) * math.pi
    return float(tok)


def measure(domain: DomainSpec) -> float:
    """Exact Lebesgue measure of ``domain``."""
    if domain.kind == "interval":
        a, b = domain.params
        return b - a
    if domain.kind == "rectangle":
        return float(np.prod(domain.params))
    return math.pi * domain.params[0] ** 2


def _stiffness_1d(m: int, h: float) -> sp.csr_matrix:
    main = np.full(m, 2.0 / h)
    off = np.full(m - 1, -1.0 / h)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _weights_1d(m: int, h: float) -> np.ndarray:
    return np.full(m, h)


class Grid:
    """Structured grid of interior nodes with weights and stiffness matrix.

    Attributes
    ----------
    domain : DomainSpec
    n : int
        Resolution per axis (number of cells for interval/rectangle axes;
        for the disk, ``n`` angular nodes and ``n // 2`` radial cells).
    shape : tuple of int
        Logical array shape of nodal values (row-major flattening).
    coords : ndarray, shape (size, dim)
        Cartesian node coordinates.
    weights : ndarray, shape (size,)
    K : scipy.sparse.csr_matrix
        Stiffness matrix of the discrete Dirichlet form.
    """

    def __init__(self, domain, n, shape, coords, weights, K, axes, boundary_weight=0.0):
        self.domain = domain
        # trapezoid weight carried by boundary nodes, where fields vanish
        self.boundary_weight = float(boundary_weight)
        self.n = n
        self.shape = shape
        self.coords = coords
        self.weights = weights
        self.K = K
        self.axes = axes  # per-axis node coordinates (r, theta for the disk)
        self._lu = None
        self._lambda1 = None

    def __repr__(self):
        return f"Grid({self.domain.to_string()}, n={self.n}, size={self.size})"

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def weight_sum(self) -> float:
        """Total quadrature weight including the boundary nodes."""
        return float(self.weights.sum()) + self.boundary_weight

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def laplacian(self) -> sp.csr_matrix:
        """Stiffness form of ``-Delta_h``: ``<u, -Delta_h v>_w = u @ K @ v``."""
        return self.K

    @property
    def spacing(self) -> float:
        """Smallest mesh spacing (radial spacing for the disk)."""
        if self.domain.kind == "disk":
            return float(self.axes[0][1] - self.axes[0][0])
        return float(min(ax[1] - ax[0] for ax in self.axes))

    def apply_laplacian(self, u: np.ndarray) -> np.ndarray:
        """Nodal values of ``-Delta_h u``."""
        return (self.K @ u) / self.weights

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.dot(self.weights * u, v))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``K x = rhs`` with a cached sparse factorization."""
        if self._lu is None:
            self._lu = splu(self.K.tocsc())
        return self._lu.solve(np.asarray(rhs, dtype=float))

    @property
    def lambda1(self) -> float:
        """First discrete Dirichlet eigenvalue (computed once)."""
        if self._lambda1 is None:
            from .spectral import dirichlet_eigs

            self._lambda1 = dirichlet_eigs(self, 1)[0].value
        return self._lambda1

    def reflect(self, u: np.ndarray, axis: int = 0) -> np.ndarray:
        """Values of ``u`` composed with the domain's mirror symmetry."""
        kind = self.domain.kind
        if kind == "disk":
            arr = u.reshape(self.shape)
            # theta -> -theta
            return np.roll(arr[:, ::-1], 1, axis=1).ravel()
        arr = u.reshape(self.shape)
        return np.flip(arr, axis=axis).ravel()

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        kind = self.domain.kind
        if kind == "interval":
            a, b = self.domain.params
            x = pts[:, 0]
            return np.minimum(x - a, b - x)
        if kind == "rectangle":
            widths = np.asarray(self.domain.params)
            return np.min(np.minimum(pts, widths - pts), axis=1)
        return self.domain.params[0] - np.linalg.norm(pts, axis=1)

    def interpolate(self, u: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Piecewise-linear interpolation of nodal values, zero outside."""
        pts = np.atleast_2d(points)
        kind = self.domain.kind
        if kind == "interval":
            a, b = self.domain.params
            xs = np.concatenate([[a], self.axes[0], [b]])
            vals = np.concatenate([[0.0], u, [0.0]])
            return np.interp(pts[:, 0], xs, vals, left=0.0, right=0.0)
        if kind == "rectangle":
            widths = self.domain.params
            xs = [np.concatenate([[0.0], ax, [L]]) for ax, L in zip(self.axes, widths)]
            vals = np.pad(u.reshape(self.shape), 1)
            f = RegularGridInterpolator(xs, vals, bounds_error=False, fill_value=0.0)
            return f(pts)
        R = self.domain.params[0]
        r_ax, t_ax = self.axes
        arr = u.reshape(self.shape)
        dth = t_ax[1] - t_ax[0]
        # periodic pad in theta, zero at r = R, even extension through the axis
        ts = np.concatenate([[t_ax[0] - dth], t_ax, [t_ax[-1] + dth]])
        vals = np.concatenate([arr[:, -1:], arr, arr[:, :1]], axis=1)
        rs = np.concatenate([[0.0], r_ax, [R]])
        axis_val = np.full((1, vals.shape[1]), arr[0].mean())
        vals = np.concatenate([axis_val, vals, np.zeros((1, vals.shape[1]))], axis=0)
        f = RegularGridInterpolator((rs, ts), vals, bounds_error=False, fill_value=0.0)
        r = np.hypot(pts[:, 0], pts[:, 1])
        th = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * np.pi)
        out = f(np.column_stack([r, th]))
        out[r >= R] = 0.0
        return out

    def field(self, values) -> "Field":
        return Field(self, np.asarray(values, dtype=float))


def _grid_interval(domain: DomainSpec, n: int) -> Grid:
    a, b = domain.params
    h = (b - a) / n
    x = a + h * np.arange(1, n)
    return Grid(domain, n, (n - 1,), x[:, None], _weights_1d(n - 1, h),
                _stiffness_1d(n - 1, h), (x,), boundary_weight=h)


def _grid_rectangle(domain: DomainSpec, n: int) -> Grid:
    widths = domain.params
    if len(widths) == 1:
        return _grid_interval(DomainSpec.interval(0.0, widths[0]), n)
    (Lx, Ly) = widths
    hx, hy = Lx / n, Ly / n
    m = n - 1
    x = hx * np.arange(1, n)
    y = hy * np.arange(1, n)
    Kx, Ky = _stiffness_1d(m, hx), _stiffness_1d(m, hy)
    I = sp.identity(m, format="csr")
    K = (sp.kron(Kx, hy * I) + sp.kron(hx * I, Ky)).tocsr()
    w = np.outer(_weights_1d(m, hx), _weights_1d(m, hy)).ravel()
    X, Y = np.meshgrid(x, y, indexing="ij")
    coords = np.column_stack([X.ravel(), Y.ravel()])
    boundary = Lx * Ly - (Lx - hx) * (Ly - hy)
    return Grid(domain, n, (m, m), coords, w, K, (x, y), boundary_weight=boundary)


def _grid_disk(domain: DomainSpec, n: int) -> Grid:
    # cell-centred in r (no node on the axis), uniform periodic theta;
    # Dirichlet at r = R through an odd ghost value
    R = domain.params[0]
    nr, nt = max(n // 2, 4), n
    dr = R / nr
    dth = 2 * np.pi / nt
    r = (np.arange(nr) + 0.5) * dr
    th = np.arange(nt) * dth
    rows, cols, vals = [], [], []

    def idx(j, k):
        return j * nt + (k % nt)

    diag = np.zeros(nr * nt)
    for j in range(nr):
        r_out = (j + 1) * dr
        c_ang = dr / (r[j] * dth)
        for k in range(nt):
            i = idx(j, k)
            if j < nr - 1:
                c = r_out * dth / dr
                diag[i] += c
                diag[idx(j + 1, k)] += c
                rows += [i, idx(j + 1, k)]
                cols += [idx(j + 1, k), i]
                vals += [-c, -c]
            else:
                diag[i] += 2.0 * R * dth / dr
            diag[i] += c_ang
            diag[idx(j, k + 1)] += c_ang
            rows += [i, idx(j, k + 1)]
            cols += [idx(j, k + 1), i]
            vals += [-c_ang, -c_ang]
    K = sp.coo_matrix((vals, (rows, cols)), shape=(nr * nt, nr * nt)).tocsr()
    K = (K + sp.diags(diag)).tocsr()
    w = np.repeat(r * dr * dth, nt)
    RR, TT = np.meshgrid(r, th, indexing="ij")
    coords = np.column_stack([(RR * np.cos(TT)).ravel(), (RR * np.sin(TT)).ravel()])
    return Grid(domain, n, (nr, nt), coords, w, K, (r, th))


def build_grid(domain: DomainSpec, n: int) -> Grid:
    """Build the structured grid of ``domain`` at resolution ``n`` (``n >= 8``)."""
    if not isinstance(domain, DomainSpec):
        raise GridError(f"expected DomainSpec, got {type(domain).__name__}")
    if int(n) != n or n < MIN_RESOLUTION:
        raise GridError(f"resolution must be an integer >= {MIN_RESOLUTION}, got {n}")
    n = int(n)
    if domain.kind == "interval":
        return _grid_interval(domain, n)
    if domain.kind == "rectangle":
        return _grid_rectangle(domain, n)
    return _grid_disk(domain, n)


@dataclass
class Field:
    """Nodal values of a function in ``H^1_0`` on a grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise GridError(f"field has shape {self.values.shape}, grid expects ({self.grid.size},)")

    def __neg__(self):
        return Field(self.grid, -self.values)

    def l2(self) -> float:
        return math.sqrt(self.grid.inner(self.values, self.values))

    def h1(self) -> float:
        u = self.values
        return math.sqrt(max(float(u @ (self.grid.K @ u)), 0.0))

    def lq(self, q: float) -> float:
        return float(np.sum(self.grid.weights * np.abs(self.values) ** q)) ** (1.0 / q)

    def normalized(self) -> "Field":
        return Field(self.grid, self.values / self.l2())

    def norms(self, q: float = 2.0):
        return norms(self, q)


def norms(u: Field, q: float = 2.0):
    """Return ``(l2, h1_seminorm, lq)`` quadrature norms of ``u``."""
    if q < 1:
        raise GridError(f"q must be >= 1, got {q}")
    return u.l2(), u.h1(), u.lq(q)
