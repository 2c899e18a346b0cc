import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracheat.grid import Grid
from fracheat.kernel import ModelParams
from fracheat.semigroup import Constant, InitialDatum, PowerLaw, Singular
from fracheat.solver import (
    TimeMesh,
    blowup_ball_profile,
    march,
    picard_certify,
    save_norm_history_csv,
    supersolution_check,
    weissler_bound,
)

P_SUB = ModelParams(1, 1.0, 1.5)
P_SUP = ModelParams(1, 1.0, 3.0)
G = Grid(1, 16.0, 512)


class TestTimeMesh:
    @pytest.mark.parametrize("kw", [dict(T=0.0, K=4), dict(T=1.0, K=0), dict(T=1.0, K=4, q=0.5)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            TimeMesh(**kw)

    @given(T=st.floats(0.1, 100.0), K=st.integers(1, 64), q=st.floats(1.0, 4.0))
    def test_graded_nodes(self, T, K, q):
        t = TimeMesh(T, K, q).times
        assert t[0] == 0.0 and t[-1] == pytest.approx(T) and np.all(np.diff(t) > 0)


class TestMarch:
    def test_zero_datum_stays_zero(self):
        out = march(InitialDatum(closed_form=PowerLaw(1.0), amplitude=0.0), P_SUB, TimeMesh(1.0, 8), G)
        assert out.status == "completed" and np.all(out.final.values == 0.0)

    @pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
    def test_constant_datum_follows_ode(self, c):
        params = ModelParams(1, 1.0, 2.0)
        out = march(InitialDatum(closed_form=Constant(c)), params, TimeMesh(2.0 / c, 512), Grid(1, 8.0, 64))
        assert out.blew_up and out.T_est == pytest.approx(1.0 / c, rel=0.01)
        lo, hi = out.bracket
        assert lo <= out.T_est <= hi

    def test_comparison_principle(self):
        mesh = TimeMesh(1.0, 64)
        snaps = tuple(mesh.times[1:])
        small = march(InitialDatum(closed_form=PowerLaw(1.0), amplitude=0.1), P_SUB, mesh, G, snapshot_times=snaps)
        big = march(InitialDatum(closed_form=PowerLaw(1.0), amplitude=0.2), P_SUB, mesh, G, snapshot_times=snaps)
        for a, b in zip(small.snapshots, big.snapshots):
            assert a.time == b.time
            assert np.all(a.values <= b.values + 1e-10 * b.values.max())

    def test_subcritical_power_law_blows_up(self):
        out = march(InitialDatum(closed_form=PowerLaw(1.0), amplitude=0.5), P_SUB, TimeMesh(8.0, 64),
                    Grid(1, 64.0, 1024))
        assert out.blew_up and 0.0 < out.T_est < 8.0 and math.isfinite(out.T_est)

    def test_box_too_small(self):
        with pytest.raises(ValueError, match="box half-width"):
            march(InitialDatum(closed_form=PowerLaw(1.0)), P_SUB, TimeMesh(10.0, 8), Grid(1, 4.0, 64))

    def test_threshold_must_exceed_first_step(self):
        with pytest.raises(ValueError, match="threshold"):
            march(InitialDatum(closed_form=Constant(1.0)), P_SUB, TimeMesh(1.0, 8), G, blowup_threshold=0.5)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            march(InitialDatum(closed_form=Constant(1.0)), ModelParams(2, 1.0, 2.0), TimeMesh(1.0, 8), G)

    @settings(max_examples=5)
    @given(lam=st.sampled_from([0.5, 2.0, 4.0]))
    def test_scaling_invariance(self, lam):
        # u_lam(x, t) = lam^{theta/(p-1)} u(lam x, lam^theta t) maps gamma |x|^{-a} to a rescaled gamma
        a, gamma = 0.5, 0.5
        base = march(InitialDatum(closed_form=Singular(a, gamma)), P_SUB, TimeMesh(8.0, 64), Grid(1, 64.0, 1024))
        g2 = gamma * lam ** (1.0 / (P_SUB.p - 1.0) - a)
        other = march(InitialDatum(closed_form=Singular(a, g2)), P_SUB, TimeMesh(8.0 / lam, 64),
                      Grid(1, 64.0 / lam, 1024))
        assert base.blew_up and other.blew_up
        assert other.T_est * lam == pytest.approx(base.T_est, rel=1e-3)

    def test_norm_history_csv(self, tmp_path):
        out = march(InitialDatum(closed_form=PowerLaw(2.0), amplitude=0.1), P_SUP, TimeMesh(1.0, 8), G)
        save_norm_history_csv(out, tmp_path / "h.csv")
        rows = np.loadtxt(tmp_path / "h.csv", delimiter=",", skiprows=1)
        np.testing.assert_array_equal(rows, out.norm_history)


class TestPicard:
    def test_needs_two_sweeps(self):
        with pytest.raises(ValueError):
            picard_certify(InitialDatum(closed_form=Constant(1.0)), P_SUB, TimeMesh(0.5, 8), Grid(1, 4.0, 16), 1)

    def test_zero_datum(self):
        rep = picard_certify(InitialDatum(closed_form=Constant(0.0)), P_SUB, TimeMesh(0.5, 8), Grid(1, 4.0, 16), 4)
        assert rep["defect"] == 0.0 and rep["scale"] == 0.0

    def test_constant_datum_near_closed_form(self):
        # u' = u^2, u(0) = 1 gives u(t) = 1 / (1 - t)
        params = ModelParams(1, 1.0, 2.0)
        rep = picard_certify(InitialDatum(closed_form=Constant(1.0)), params, TimeMesh(0.5, 64), Grid(1, 4.0, 16), 8)
        assert rep["iterate"][-1].max() == pytest.approx(2.0, rel=0.01)

    def test_iterates_increase(self):
        d = InitialDatum(closed_form=PowerLaw(2.0), amplitude=0.01)
        rep = picard_certify(d, P_SUP, TimeMesh(1.0, 32), Grid(1, 32.0, 512), 8)
        assert rep["defect"] <= 1e-8 * rep["scale"]
        assert np.all(np.diff(rep["sup_history"]) >= 0)


class TestSupersolution:
    def test_zero_datum_holds(self):
        d = InitialDatum(closed_form=PowerLaw(2.0), amplitude=0.0)
        rep = supersolution_check("scaled_semigroup", d, P_SUP, G)
        assert rep["holds"] and rep["margin"] == 0.0

    def test_psi_transform_at_critical_power(self):
        params = ModelParams(1, 1.0, 2.0)
        d = InitialDatum(closed_form=PowerLaw(2.0), amplitude=1e-3)
        rep = supersolution_check("psi_transform", d, params, Grid(1, 32.0, 512), beta=1.0)
        assert rep["construction"] == "psi_transform" and rep["L"] >= math.e
        assert math.isfinite(rep["margin"])

    def test_argument_checks(self):
        d = InitialDatum(closed_form=PowerLaw(2.0), amplitude=0.1)
        with pytest.raises(ValueError):
            supersolution_check("alpha_mean", d, P_SUP, G, alpha=4.0)
        with pytest.raises(ValueError):
            supersolution_check("psi_transform", d, P_SUP, G, beta=0.0)
        with pytest.raises(ValueError):
            supersolution_check("other", d, P_SUP, G)
        with pytest.raises(ValueError):
            supersolution_check("scaled_semigroup", d, P_SUP, G, sample_times=(1.0,))


class TestBounds:
    def test_weissler_zero(self):
        out = march(InitialDatum(closed_form=PowerLaw(1.0), amplitude=0.0), P_SUB, TimeMesh(1.0, 4), G,
                    snapshot_times=(0.5,))
        assert weissler_bound(out.snapshots, P_SUB, [0.5], [0.1, 0.2])["kappa"] == 0.0

    def test_weissler_constant(self):
        # S(t) c = c, so the bound is c t^{1/(p-1)} at the largest t
        params = ModelParams(1, 1.0, 2.0)
        out = march(InitialDatum(closed_form=Constant(0.1)), params, TimeMesh(1.0, 16), Grid(1, 4.0, 16),
                    snapshot_times=(0.0,))
        res = weissler_bound(out.snapshots, params, [0.0], [0.5, 2.0])
        assert res["kappa"] == pytest.approx(0.2, rel=1e-12)

    def test_profile_requires_blow_up(self):
        out = march(InitialDatum(closed_form=PowerLaw(1.0), amplitude=0.0), P_SUB, TimeMesh(1.0, 4), G)
        with pytest.raises(ValueError):
            blowup_ball_profile(out, P_SUB)
