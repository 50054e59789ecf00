import math

import pytest

from src.duality import (DUAL, PRIMAL, CoupledParams, annealed_duality_check, dual_beta, dual_point,
                         dual_potts_relation, es_transport_discrepancy, fk_duality_check, log_xi_truncated, p_star,
                         potts_duality_check, self_dual_beta, self_dual_p)
from src.exception import DomainError


class TestDualParameters:
    @pytest.mark.parametrize("q", [2, 3, 4.5])
    def test_dual_beta_is_involution(self, q):
        for beta in (0.05, 0.7, 3.0):
            assert dual_beta(dual_beta(beta, q), q) == pytest.approx(beta, rel=1e-10)

    def test_product_of_activities(self):
        beta, q = 0.8, 3
        assert math.expm1(beta) * math.expm1(dual_beta(beta, q)) == pytest.approx(q)

    @pytest.mark.parametrize("q", [2, 3, 4])
    def test_self_dual_points(self, q):
        assert dual_beta(self_dual_beta(q), q) == pytest.approx(self_dual_beta(q))
        assert p_star(self_dual_p(q), q) == pytest.approx(self_dual_p(q))

    def test_p_star_is_involution(self):
        for p in (0.1, 0.5, 0.93):
            assert p_star(p_star(p, 3), 3) == pytest.approx(p)

    @pytest.mark.parametrize("q", [2, 3, 4])
    def test_dual_point_round_trip_on_grid(self, q):
        for beta in (0.05, 0.3, 1.0, 2.0, 5.0):
            for mu in (-1.0, 0.0, 1.7, 4.0):
                back = dual_point(dual_point(CoupledParams(beta, mu, q, PRIMAL)))
                assert back.side == PRIMAL
                assert back.beta == pytest.approx(beta, rel=1e-12, abs=1e-12)
                assert back.mu == pytest.approx(mu, rel=1e-12, abs=1e-12)
                star = dual_point(CoupledParams(beta, mu, q, DUAL))
                assert math.expm1(beta) * math.expm1(star.beta) == pytest.approx(q, rel=1e-12)

    def test_dual_point_round_trip(self):
        start = CoupledParams(0.6, 2.2, 3, PRIMAL)
        star = dual_point(start)
        assert star.side == DUAL
        back = dual_point(star)
        assert back.side == PRIMAL
        assert back.beta == pytest.approx(start.beta)
        assert back.mu == pytest.approx(start.mu)

    def test_invalid_params(self):
        with pytest.raises(DomainError):
            CoupledParams(0.0, 1.0, 2)
        with pytest.raises(DomainError):
            CoupledParams(0.5, float("nan"), 2)
        with pytest.raises(DomainError):
            CoupledParams(0.5, 1.0, 1)
        with pytest.raises(DomainError):
            p_star(1.0, 2)

    def test_relation_is_informational(self):
        out = dual_potts_relation(1.0, 2)
        assert out["relation"] == pytest.approx(1.5 * math.log(math.e - 1) - math.log(2))
        assert "note" in out


class TestInequalities:
    def test_fk_duality_on_every_small_triangulation(self, small_triangulations):
        for t in small_triangulations:
            for q in (2, 3):
                for p in (0.2, 0.6, 0.9):
                    assert fk_duality_check(t, p, q).ok
                    assert fk_duality_check(t, p, q, swap=True).ok

    def test_fk_duality_at_self_dual_point(self, two_strip):
        q = 2
        report = fk_duality_check(two_strip, self_dual_p(q), q)
        assert report.ok
        out = report.to_dict()
        assert out["margin_log"]["lower"] >= 0 and out["margin_log"]["upper"] >= 0
        assert out["rhs"] - out["lhs"] == pytest.approx(2 * math.log(q))

    @pytest.mark.parametrize("q", [2, 3, 4])
    def test_potts_duality(self, small_triangulations, q):
        for t in small_triangulations:
            for beta in (0.3, 0.9, 2.0):
                assert potts_duality_check(t, beta, q).ok

    def test_potts_report_is_transported_fk_report(self, small_triangulations):
        # Z_P = e^{beta |E|} Z_FK at p = 1 - e^{-beta}, and p* = 1 - e^{-beta*}
        for t in small_triangulations:
            for q in (2, 3):
                for beta in (0.3, 0.9, 2.0):
                    assert es_transport_discrepancy(t, beta, q) <= 1e-9

    def test_annealed_duality(self):
        for N in (1, 2):
            for q in (2, 3):
                report = annealed_duality_check(N, 2, 0.7, 2.0, q)
                assert report.ok
                assert report.log_upper == pytest.approx(math.log(q))

    def test_dual_side_uses_dual_graphs(self):
        primal = log_xi_truncated(1, 2, 0.7, 2.0, 2, PRIMAL)
        dual = log_xi_truncated(1, 2, 0.7, 2.0, 2, DUAL)
        assert primal != pytest.approx(dual)
