import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize

from conftest import scenario
from mimo_noma.montecarlo import waterfill
from mimo_noma.rates import RateModel
from mimo_noma.regions import (RateRegion, epa_region, gsvd_region, hybrid_region, oma_tdma_region, union_region,
                               upa_region, upper_frontier)
from mimo_noma.system import epa_power_for_budget

pairs = st.lists(st.tuples(st.floats(0, 50), st.floats(0, 50)), min_size=1, max_size=25)


@given(pairs)
def test_frontier_is_sorted_concave_and_covers_points(points):
    region = RateRegion("test", points)
    hull = region.hull
    xs = [p[0] for p in hull]
    assert xs == sorted(xs)
    for a, b, c in zip(hull, hull[1:], hull[2:]):
        # no vertex above the chord of its neighbours, i.e. right turns only
        assert (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]) <= 1e-9 * (1 + max(xs)) ** 2
    tol = 1e-9 * max(1.0, region.max_r2)
    assert all(p[1] <= region.frontier(p[0]) + tol for p in region.points)
    assert any(region.on_hull())


@given(pairs)
def test_frontier_vertices_are_points_or_axis_projections(points):
    hull = upper_frontier(points)
    pts = {(float(a), float(b)) for a, b in points}
    r1max, r2max = max(p[0] for p in pts), max(p[1] for p in pts)
    for v in hull:
        assert v in pts or v in {(0.0, r2max), (r1max, 0.0)}


def test_frontier_of_a_segment():
    region = RateRegion("seg", [(0.0, 4.0), (2.0, 0.0)])
    assert region.frontier(1.0) == pytest.approx(2.0)
    assert region.frontier(3.0) == -np.inf
    assert region.contains(1.0, 1.9) and not region.contains(1.0, 2.1)


def test_hybrid_of_nested_regions_keeps_outer_hull():
    outer = RateRegion("a", [(0, 5), (3, 4), (5, 0)])
    inner = RateRegion("b", [(0, 2), (2, 0)])
    assert hybrid_region(outer, inner).hull == outer.hull


def test_hybrid_contains_connecting_chord():
    a = RateRegion("a", [(0.0, 10.0)])
    b = RateRegion("b", [(10.0, 0.0)])
    h = hybrid_region(a, b)
    assert h.frontier(5.0) == pytest.approx(5.0)
    assert h.dominates(a) and h.dominates(b)


def test_dominance_with_slack():
    a = RateRegion("a", [(0, 10), (10, 0)])
    b = RateRegion("b", [(0, 10.1), (10.1, 0)])
    assert not a.dominates(b)
    assert a.dominates(b, slack=0.02)
    assert union_region("u", a, b).dominates(b)


@pytest.fixture(scope="module")
def cfg335():
    return scenario(3, 3, 5)


def test_epa_region_user1_endpoint(cfg335):
    model = RateModel(cfg335, "adaptive")
    region = epa_region(cfg335, npoints=5, model=model)
    P = epa_power_for_budget(cfg335)
    top = max(region.points)
    assert top[1] == pytest.approx(model.private_terms(P, P)[1], rel=1e-12)
    with pytest.raises(ValueError):
        epa_region(cfg335, npoints=1)


def test_underloaded_epa_is_a_point_and_upa_is_a_curve():
    cfg = scenario(2, 2, 4)
    epa = epa_region(cfg, npoints=5)
    assert len(set(epa.points)) == 1
    upa = upa_region(cfg, eta_grid=np.linspace(0, 1, 5))
    assert len(set(np.round([p[0] for p in upa.points], 9))) == 5
    assert upa.dominates(epa, slack=0.02)


def test_upa_region_endpoints(cfg335):
    upa = upa_region(cfg335, eta_grid=[0.0, 1.0])
    r1_at_zero = min(upa.points)[0]
    assert r1_at_zero == pytest.approx(0.0, abs=1e-12)


def test_upa_region_dominates_epa_region():
    cfg = scenario(3, 3, 3)
    assert upa_region(cfg, eta_grid=np.linspace(0, 1, 11)).dominates(epa_region(cfg, 21), slack=0.02)


def test_oma_segment(cfg335):
    oma = oma_tdma_region(cfg335, trials=500, seed=2, npoints=3)
    (_, c2), mid, (c1, _) = oma.points
    assert mid == pytest.approx((c1 / 2, c2 / 2))
    assert c2 > c1


def _waterfilling_capacity(H, Pi, sigma2, budget):
    g = np.linalg.eigvalsh(H @ H.conj().T) / (Pi * sigma2)
    g = g[g > 1e-12]
    spent = lambda mu: np.sum(np.maximum(mu - 1 / g, 0)) - budget
    mu = optimize.brentq(spent, 0.0, budget + np.sum(1 / g))
    return float(np.sum(np.log2(np.maximum(mu * g, 1.0))))


def test_single_user_rate_against_independent_waterfilling():
    cfg = scenario(3, 3, 3, pmax_dbm=10.0)
    oma = oma_tdma_region(cfg, trials=10_000, seed=4, npoints=2)
    rng = np.random.default_rng(99)
    caps = []
    for _ in range(10_000):
        H = (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))) / np.sqrt(2)
        caps.append(_waterfilling_capacity(H, cfg.Pi1, cfg.sigma2, cfg.Pmax))
    assert oma.max_r1 == pytest.approx(np.mean(caps), rel=0.01)


def test_waterfilling_uses_full_budget():
    p = waterfill(np.array([4.0, 1.0, 0.01]), 1.0)
    assert p.sum() == pytest.approx(1.0) and p[2] == 0.0
    assert p[0] - p[1] == pytest.approx(1.0 - 0.25)


def test_gsvd_region_degenerate_when_antennas_match():
    assert gsvd_region(scenario(2, 2, 4), trials=10).points == ((0.0, 0.0),)


def test_gsvd_region_below_oma_for_small_overload():
    cfg = scenario(1, 4, 4)
    oma = oma_tdma_region(cfg, trials=2000, seed=1)
    gsvd = gsvd_region(cfg, npoints=21, trials=2000, seed=1)
    assert oma.dominates(gsvd)


def test_gsvd_region_close_to_epa_at_large_separation():
    cfg = scenario(3, 3, 3)
    assert cfg.Pi == 100
    epa = epa_region(cfg, 21)
    # GSVD skips the min-rate rule, so its R1 endpoint sits about 1.9% above EPA's
    gsvd = gsvd_region(cfg, 21, trials=10_000, seed=0)
    assert epa.dominates(gsvd, slack=0.02) and gsvd.dominates(epa, slack=0.02)


def test_region_rows():
    region = RateRegion("x", [(0, 1), (1, 0), (0.2, 0.2)])
    rows = region.rows()
    assert [r[0] for r in rows] == ["x"] * 3
    assert [r[3] for r in rows] == [True, False, True]
