"""Sign-changing solutions by tiling, and the planar sector ladder.

A positive solution on (0, pi) is shrunk by k and repeated with alternating
signs.  The result solves the same equation with multiplier k^2 lam and mass
k^{4/(p-1)} times larger.  For the disk the same idea with k sectors gives
lower bounds on solvable masses that grow linearly in k when p = 3.

Run:  python demos/nodal_tiling.py
"""
import math

from normsol import DomainSpec, build_grid, maximize_on_level, morse_index, tile_rectangle
from normsol import _ops
from normsol.blowup import bump_detect
from normsol.soliton import gn_constant, shoot_ground_state, thresholds
from normsol.tiling import mass_ladder


def main():
    grid = build_grid(DomainSpec.interval(0.0, math.pi), 1024)
    pt = maximize_on_level(grid, 3.0, 5.0)
    print(f"positive solution: lambda={pt.lam:.6f} mu={pt.mu:.6f}")
    for k in (2, 3, 4):
        U, lam = tile_rectangle(pt.u, pt.lam, pt.mu, 3.0, k)
        ratio = _ops.l2sq(U.grid, U.values) / _ops.l2sq(grid, pt.u.values)
        res = _ops.dual_residual(U.grid, U.values, lam, pt.mu, 3.0)
        mi = morse_index(U.grid, U.values, lam, pt.mu, 3.0)
        print(f"k={k}: mass x{ratio:.6f}, residual {res:.1e}, morse {mi}, "
              f"bumps {bump_detect(U, lam).count}")

    z = shoot_ground_state(2, 3.0)
    D = thresholds(2, 3.0, gn_constant(z), 1.0).D_Np
    lad = mass_ladder(2, 3.0, D, k_max=32)
    print(f"\nsector ladder, N=2, p=3: exponent {lad.exponent:g}, verdict {lad.verdict}")
    for row in lad.rows[::6]:
        print(f"  k={row.k:2d}: cumulative mass bound {row.cumulative_max:.3f}")


if __name__ == "__main__":
    main()
