"""A local minimizer on the mass sphere and a maximizer on a gradient level agree.

The same solution of -u'' + lam u = mu u^7 on (0, pi) is reached twice: by
descending the energy on the unit L^2 sphere below the gradient cap, and by
maximizing int u^8 on {||u|| = 1, ||u'||^2 = alpha} at the minimizer's alpha.
Pushing mu far above the admissible range makes the descent escape the cap,
which is how the energy fails to be bounded below.

Run:  python demos/two_principles.py
"""
import math

from normsol import DomainSpec, build_grid, maximize_on_level, minimize_local, mu_hat_1
from normsol.soliton import gn_constant, shoot_ground_state
from normsol.sphere import CapExceeded, blowup_witness


def main():
    grid = build_grid(DomainSpec.interval(0.0, math.pi), 2048)
    profile = shoot_ground_state(1, 7.0)
    C = gn_constant(profile)
    bound = mu_hat_1(grid.lambda1, C, math.pi, 1, 7.0)
    print(f"admissible multipliers: mu < {bound:.6f}")

    res = minimize_local(grid, 7.0, 0.5 * bound, C_Np=C)
    print(f"minimizer: mu={res.mu:.6f} energy={res.energy:.6f} "
          f"|u'|^2={res.h1sq:.6f} lambda={res.lam:.6f} morse={res.morse}")

    pt = maximize_on_level(grid, 7.0, res.h1sq)
    print(f"maximizer at the same level: mu={pt.mu:.6f} lambda={pt.lam:.6f}")

    try:
        minimize_local(grid, 7.0, 50 * bound, alpha_cap=100.0, C_Np=C, check_admissible=False)
    except CapExceeded as exc:
        print(f"mu = 50x bound: descent left the cap ({exc})")

    print("\nconcentrating cutoff solitons, mu = 1:")
    for w in blowup_witness(grid, 7.0, 3, profile=profile):
        print(f"  scale {w.scale:.4f}: |u'|^2={w.alpha:10.2f} energy={w.energy:12.4f}")


if __name__ == "__main__":
    main()
