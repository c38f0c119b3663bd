"""Energy on the unit sphere, local minimizers below the cap and blow-up witnesses."""
import math

import numpy as np
import pytest

from normsol import _ops
from normsol.grid import DomainSpec, build_grid
from normsol.sphere import (CapExceeded, MinimizerError, admissible_mu_bound, blowup_witness,
                            energy, energy_sandwich, level_upper_bound, minimize_local,
                            mu_hat_1_interval)
from normsol.twoconstraint import maximize_on_level


@pytest.fixture(scope="module")
def grid1k():
    return build_grid(DomainSpec.interval(0.0, math.pi), 1024)


@pytest.fixture(scope="module")
def p7_minimizer(grid1k, C17):
    lo, _ = mu_hat_1_interval(grid1k, 7.0, C17)
    return minimize_local(grid1k, 7.0, 0.5 * lo, C_Np=C17)


class TestEnergy:
    def test_normalized_sine(self, interval_grid):
        u = math.sqrt(2 / math.pi) * np.sin(interval_grid.coords[:, 0])
        assert energy(interval_grid, u, 1.0, 3.0) == pytest.approx(
            0.5 - 0.25 * 3 / (2 * math.pi), rel=1e-6)

    def test_sandwich_on_eigenfunctions(self, interval_grid, C17):
        from normsol.spectral import dirichlet_eigs
        for pr in dirichlet_eigs(interval_grid, 4):
            lo, hi = energy_sandwich(pr.value, 2.0, 7.0, 1, C17)
            E = energy(interval_grid, pr.vector, 2.0, 7.0)
            assert lo - 1e-12 <= E <= hi

    def test_level_upper_bound(self):
        assert level_upper_bound(1.0, 1.0, 3.0, math.pi) == pytest.approx(0.5 - 0.25 / math.pi)

    def test_admissible_bound(self):
        assert admissible_mu_bound(5.0, 1.0, 1.0, math.pi, 3.0) == pytest.approx(
            2.0 * 4.0 / (1.0 - 1 / math.pi))
        with pytest.raises(ValueError):
            admissible_mu_bound(0.5, 1.0, 1.0, math.pi, 3.0)
        with pytest.raises(ValueError):
            admissible_mu_bound(5.0, 1.0, 0.1, math.pi, 3.0)
        assert admissible_mu_bound(5.0, 1.0, 1 / math.pi, math.pi, 3.0) == math.inf


class TestMinimizeLocal:
    def test_supercritical_local_minimizer(self, grid1k, p7_minimizer):
        r = p7_minimizer
        assert r.converged and not r.hit_cap
        assert r.morse == 1
        assert r.residual <= 1e-8
        v = r.u.values
        assert np.all(v >= 0) or np.all(v <= 0)
        assert r.h1sq < r.alpha_cap
        assert r.lam > -r.alpha_cap

    def test_solves_equation(self, grid1k, p7_minimizer):
        r = p7_minimizer
        assert _ops.dual_residual(grid1k, r.u.values, r.lam, r.mu, 7.0) < 1e-8

    def test_energy_decreases_from_phi1(self, grid1k, p7_minimizer):
        from normsol.spectral import dirichlet_eigs
        phi = dirichlet_eigs(grid1k, 1)[0].vector
        assert p7_minimizer.energy <= energy(grid1k, phi, p7_minimizer.mu, 7.0)

    def test_subcritical_global(self, grid1k):
        r = minimize_local(grid1k, 3.0, 2.0)
        assert r.converged and r.morse == 1 and r.alpha_cap == math.inf

    def test_two_principles_agree(self, grid1k, p7_minimizer):
        pt = maximize_on_level(grid1k, 7.0, p7_minimizer.h1sq)
        assert pt.mu == pytest.approx(p7_minimizer.mu, rel=1e-6)

    @pytest.mark.parametrize("cap", [3.0, 10.0, 100.0, 1000.0])
    def test_cap_exceeded(self, grid1k, C17, cap):
        lo, _ = mu_hat_1_interval(grid1k, 7.0, C17)
        with pytest.raises(CapExceeded) as exc:
            minimize_local(grid1k, 7.0, 50 * lo, alpha_cap=cap, C_Np=C17,
                           check_admissible=False)
        assert exc.value.result.hit_cap
        assert exc.value.result.h1sq >= cap

    def test_cap_flag_without_raise(self, grid1k, C17):
        r = minimize_local(grid1k, 7.0, 100.0, alpha_cap=10.0, C_Np=C17,
                           check_admissible=False, raise_on_cap=False)
        assert r.hit_cap and not r.converged

    def test_admissibility_refused(self, grid1k, C17):
        with pytest.raises(MinimizerError):
            minimize_local(grid1k, 7.0, 100.0, C_Np=C17)

    def test_needs_constant(self, grid1k):
        with pytest.raises(MinimizerError):
            minimize_local(grid1k, 7.0, 1.0)

    def test_nonpositive_mu(self, grid1k):
        with pytest.raises(MinimizerError):
            minimize_local(grid1k, 3.0, 0.0)

    def test_record(self, p7_minimizer):
        rec = p7_minimizer.record()
        assert rec["morse"] == 1 and rec["hit_cap"] is False
        assert rec["rho"] == pytest.approx(p7_minimizer.mu ** (1 / 3))


class TestMuHatInterval:
    def test_bracket(self, grid1k, C17):
        from normsol.twoconstraint import continue_branch
        br = continue_branch(grid1k, 7.0, 1.2, 30.0, 6, compute_morse=False)
        lo, hi = mu_hat_1_interval(grid1k, 7.0, C17, br)
        # M <= C alpha^beta makes the lower end a lower bound of the upper end
        assert lo <= hi

    def test_without_branch(self, grid1k, C17):
        lo, hi = mu_hat_1_interval(grid1k, 7.0, C17)
        assert lo > 0 and math.isnan(hi)


class TestBlowupWitness:
    def test_energy_unbounded_below(self, interval_grid, soliton):
        pts = blowup_witness(interval_grid, 7.0, 3, profile=soliton(1, 7.0))
        assert len(pts) == 3
        E = [w.energy for w in pts]
        assert all(b < a for a, b in zip(E, E[1:]))
        assert E[-1] < 0

    def test_gn_ratio_approaches_constant(self, interval_grid, soliton, C17):
        pts = blowup_witness(interval_grid, 7.0, 3, profile=soliton(1, 7.0))
        assert pts[-1].gn_ratio == pytest.approx(C17, rel=1e-2)
        assert all(w.gn_ratio == pytest.approx(C17, rel=5e-2) for w in pts[-3:])

    def test_drops_unresolved_scales(self, grid1k, soliton):
        pts = blowup_witness(grid1k, 7.0, 10, profile=soliton(1, 7.0))
        h = grid1k.spacing
        assert len(pts) == 2
        assert all(w.scale / h >= 10 for w in pts)

    def test_square(self, soliton):
        g = build_grid(DomainSpec.square(1.0), 256)
        pts = blowup_witness(g, 4.0, 2, profile=soliton(2, 4.0), min_nodes=3)
        assert len(pts) == 2 and pts[1].energy < pts[0].energy
