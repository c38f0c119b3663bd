"""Ground-state shooting, the sharp constant and the mass thresholds."""
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from normsol.soliton import (ShootingError, admissible_expression, constants_report,
                             gn_constant, mu_from_rho, mu_hat_1, mu_hat_1_argmax, rho_from_mu,
                             shoot_ground_state, sphere_area, thresholds)


class TestShooting:
    def test_cubic_closed_form(self, soliton):
        z = soliton(1, 3)
        assert z.Z0 == pytest.approx(math.sqrt(2), abs=1e-10)
        exact = math.sqrt(2) / np.cosh(z.r)
        assert np.max(np.abs(z.z - exact)) < 1e-9
        assert z.l2sq == pytest.approx(4.0, abs=1e-9)

    def test_quintic_closed_form(self, soliton):
        z = soliton(1, 5)
        exact = 3 ** 0.25 / np.sqrt(np.cosh(2 * z.r))
        assert np.max(np.abs(z.z - exact)) < 1e-9
        assert z.l2sq == pytest.approx(math.sqrt(3) * math.pi / 2, rel=1e-12)

    @pytest.mark.parametrize("N,p", [(1, 3.0), (1, 7.0), (2, 3.0), (2, 2.0), (2, 5.0)])
    def test_positive_decreasing(self, soliton, N, p):
        z = soliton(N, p)
        assert np.all(z.z > 0)
        assert np.all(np.diff(z.z) <= 0)
        assert z.z[-1] < 1e-10 * z.Z0

    @pytest.mark.parametrize("N,p", [(1, 3.0), (1, 7.0), (2, 3.0), (2, 2.5)])
    def test_pohozaev(self, soliton, N, p):
        r1, r2 = soliton(N, p).pohozaev_residuals()
        assert r1 < 1e-8 and r2 < 1e-8

    def test_equation_residual(self, soliton):
        assert soliton(2, 3.0).equation_residual() < 1e-6

    def test_two_dimensional_against_solve_ivp(self, soliton):
        """Independent coarse shooting with an adaptive integrator."""

        def outcome(z0):
            def rhs(r, y):
                return [y[1], -y[1] / r + y[0] - y[0] ** 3]

            r0 = 1e-6
            y0 = [z0 + (z0 - z0 ** 3) * r0 ** 2 / 4, (z0 - z0 ** 3) * r0 / 2]
            cross = lambda r, y: y[0]
            cross.terminal = True
            turn = lambda r, y: y[1]
            turn.terminal = True
            turn.direction = 1
            sol = solve_ivp(rhs, (r0, 12.0), y0, events=(cross, turn), rtol=1e-10, atol=1e-12)
            return 1 if sol.t_events[0].size else -1

        lo, hi = 1.0, 4.0
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if outcome(mid) == 1:
                hi = mid
            else:
                lo = mid
        assert soliton(2, 3.0).Z0 == pytest.approx(0.5 * (lo + hi), rel=5e-3)

    def test_rejects_bad_params(self):
        with pytest.raises(Exception):
            shoot_ground_state(1, 1.0)

    def test_r_max_too_small(self):
        with pytest.raises(ShootingError):
            shoot_ground_state(1, 3.0, r_max=4.0, max_doublings=0)

    def test_evaluate(self, soliton):
        z = soliton(1, 3)
        assert z.evaluate(-1.0) == pytest.approx(math.sqrt(2) / math.cosh(1.0), rel=1e-9)
        assert z.evaluate(1e3) == 0.0


class TestConstants:
    def test_cubic_gn(self, soliton):
        assert gn_constant(soliton(1, 3)) == pytest.approx(3 ** -0.5, rel=1e-9)

    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_sphere_area(self, N):
        assert sphere_area(N) == pytest.approx({1: 2.0, 2: 2 * math.pi, 3: 4 * math.pi}[N])

    @pytest.mark.parametrize("rho,p", [(0.3, 3.0), (2.0, 7.0), (10.0, 5.0)])
    def test_mu_rho_inverse(self, rho, p):
        assert rho_from_mu(mu_from_rho(rho, p), p) == pytest.approx(rho, rel=1e-14)

    def test_mu_rho_nonpositive(self):
        with pytest.raises(ValueError):
            mu_from_rho(0.0, 3.0)

    def test_subcritical_thresholds(self, soliton):
        c = thresholds(1, 3.0, gn_constant(soliton(1, 3)), 1.0, 9.0)
        assert c.D_Np is None and c.rho_star is None
        assert c.rho1_lower == math.inf

    def test_critical_thresholds(self, soliton):
        z = soliton(2, 3.0)
        c = thresholds(2, 3.0, gn_constant(z), 1.0)
        assert c.D_Np == pytest.approx(z.l2sq, rel=1e-12)
        assert c.rho3_lower == pytest.approx(2 * c.D_Np)

    def test_supercritical_scaling(self, soliton):
        C = gn_constant(soliton(1, 7))
        a = thresholds(1, 7.0, C, 1.0, 9.0)
        b = thresholds(1, 7.0, C, 4.0, 36.0)
        # lower bounds scale like lam^{2/(p-1) - N/2}
        assert b.rho1_lower / a.rho1_lower == pytest.approx(4.0 ** (1 / 3 - 1 / 2))
        assert a.rho3_lower == pytest.approx(2 * a.D_Np * 9.0 ** (1 / 3 - 1 / 2))

    def test_mu_hat_matches_scan(self, soliton):
        C = gn_constant(soliton(1, 7))
        meas = math.pi
        best = mu_hat_1(1.0, C, meas, 1, 7.0)
        al = np.geomspace(1.0 + 1e-9, 1e4, 100000)
        scan = admissible_expression(al, 1.0, C * al ** 1.5, meas, 7.0).max()
        assert best >= scan * (1 - 1e-9)
        assert best == pytest.approx(scan, rel=1e-3)
        assert 1.0 < mu_hat_1_argmax(1.0, C, meas, 1, 7.0) < 1e4

    def test_mu_hat_regimes(self, soliton):
        assert mu_hat_1(1.0, 0.5, math.pi, 1, 3.0) == math.inf
        C = gn_constant(soliton(1, 5))
        assert mu_hat_1(1.0, C, math.pi, 1, 5.0) == pytest.approx(3.0 / C)

    def test_report(self, soliton):
        rep = constants_report(soliton(1, 7), 1.0, 9.0, math.pi)
        assert rep["N"] == 1 and rep["p"] == 7.0
        assert rep["D_Np"] > 0 and rep["mu_hat_1"] > 0
