import numpy as np
import pytest
from hypothesis import given, strategies as st

from mimo_noma.errors import DimensionError, DomainError, InfinitePower
from mimo_noma.system import (PowerAllocation, SystemConfig, budget_weights, dbm_to_watt, derive_dims,
                              epa_power_for_budget, sample_channel, trial_generator, complex_gaussian,
                              transmit_power_epa, transmit_power_gsvd, transmit_power_upa, watt_to_dbm)


@pytest.mark.parametrize("shape, expected", [
    ((3, 3, 5), (5, 2, 2, 1)),
    ((2, 2, 4), (4, 2, 2, 0)),
    ((3, 3, 3), (3, 0, 0, 3)),
    ((1, 4, 4), (4, 0, 3, 1)),
])
def test_derive_dims_examples(shape, expected):
    M1, M2, N = shape
    d = derive_dims(N, M1, M2)
    assert (d.L, d.Mbar1, d.Mbar2, d.M) == expected


def test_partition_identity_exhaustive():
    for N in range(1, 17):
        for M1 in range(1, 17):
            for M2 in range(1, 17):
                d = derive_dims(N, M1, M2)
                assert d.L == min(M1 + M2, N)
                assert d.Mbar1 + d.Mbar2 + d.M == d.L
                if M1 + M2 <= N:
                    assert d.M == 0


def test_config_validation():
    with pytest.raises(DimensionError):
        SystemConfig(N=0, M1=1, M2=1)
    with pytest.raises(DomainError):
        SystemConfig(N=2, M1=1, M2=1, Pi1=1.0, Pi2=10.0)
    with pytest.raises(DomainError):
        SystemConfig(N=2, M1=1, M2=1, sigma2=0.0)


def test_unit_conversions():
    assert dbm_to_watt(30.0) == pytest.approx(1.0)
    assert dbm_to_watt(-35.0) == pytest.approx(10 ** -6.5)
    assert watt_to_dbm(dbm_to_watt(17.3)) == pytest.approx(17.3)
    cfg = SystemConfig.from_distances(5, 3, 3)
    assert (cfg.Pi1, cfg.Pi2, cfg.Pi) == (1e4, 1e2, 1e2)


def test_sampling_is_deterministic():
    cfg = SystemConfig(N=5, M1=3, M2=3)
    a, b = sample_channel(cfg, 7, 3), sample_channel(cfg, 7, 3)
    assert np.array_equal(a.H1, b.H1) and np.array_equal(a.H2, b.H2)
    assert not np.array_equal(a.H1, sample_channel(cfg, 7, 4).H1)
    assert not np.array_equal(a.H1, sample_channel(cfg, 8, 3).H1)


def test_gaussian_moments_over_a_million_entries():
    z = complex_gaussian(trial_generator(11), (1000, 1000))
    assert abs(z.mean()) < 4 / np.sqrt(z.size)
    assert abs(np.mean(np.abs(z) ** 2) - 1.0) < 0.01
    # circular symmetry: the pseudo-variance vanishes
    assert abs(np.mean(z**2)) < 4 / np.sqrt(z.size)


def test_gsvd_power_formula():
    assert transmit_power_gsvd(1.0, SystemConfig(N=5, M1=3, M2=3)) == pytest.approx(5.0)
    assert transmit_power_gsvd(2.0, SystemConfig(N=4, M1=1, M2=4)) == pytest.approx(8.0)
    with pytest.raises(InfinitePower):
        transmit_power_gsvd(1.0, SystemConfig(N=4, M1=2, M2=2))


@pytest.mark.parametrize("N, M1, M2, factor", [(4, 2, 2, 2.0), (5, 3, 3, 3.6), (3, 3, 3, 1.0), (4, 1, 4, 1.25)])
def test_epa_power_formula(N, M1, M2, factor):
    cfg = SystemConfig(N=N, M1=M1, M2=M2)
    assert transmit_power_epa(1.5, cfg) == pytest.approx(1.5 * factor)
    assert transmit_power_epa(epa_power_for_budget(cfg), cfg) == pytest.approx(cfg.Pmax)


def test_upa_power_examples():
    cfg = SystemConfig(N=5, M1=3, M2=3)
    zero = PowerAllocation.upa(0, 0, [0.0], [0.0])
    assert transmit_power_upa(zero, cfg) == 0.0
    # (3/5)(p11 + p21) + 2 p1 + p2 evaluated in watts of unit powers
    alloc = PowerAllocation.upa(1.0, 1.0, [0.4], [0.6])
    assert transmit_power_upa(alloc, cfg) == pytest.approx(3.6)
    for N, M1, M2 in [(5, 3, 3), (3, 3, 3), (4, 1, 4), (3, 4, 2), (4, 2, 2)]:
        c = SystemConfig(N=N, M1=M1, M2=M2)
        epa = PowerAllocation.epa(0.7, 0.3)
        assert transmit_power_upa(epa, c) == pytest.approx(transmit_power_epa(0.7, c))


@given(st.lists(st.floats(0, 10), min_size=4, max_size=4), st.lists(st.floats(0, 10), min_size=4, max_size=4),
       st.floats(0, 5), st.floats(0, 5))
def test_upa_power_is_linear(x, y, a, b):
    cfg = SystemConfig(N=3, M1=4, M2=2)  # M = 2
    def alloc(v):
        return PowerAllocation.upa(v[0], v[1], v[2:3] + [v[3]], [v[3] / 2, v[2] / 3])
    combo = [a * u + b * w for u, w in zip(x, y)]
    lhs = transmit_power_upa(alloc(combo), cfg)
    rhs = a * transmit_power_upa(alloc(x), cfg) + b * transmit_power_upa(alloc(y), cfg)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_budget_weights_match_formula():
    cfg = SystemConfig(N=4, M1=1, M2=4)
    alloc = PowerAllocation.upa(0.0, 0.3, [0.2], [0.5])
    y = np.array([0.2, 0.5, 0.0, 0.3])
    assert budget_weights(cfg) @ y == pytest.approx(transmit_power_upa(alloc, cfg))


def test_allocation_validation():
    with pytest.raises(DomainError):
        PowerAllocation(mode="epa", P=1.0, P1=0.6, P2=0.6)
    with pytest.raises(DomainError):
        PowerAllocation.upa(-1.0, 0.0, [], [])
    with pytest.raises(DimensionError):
        PowerAllocation.upa(0.0, 0.0, [1.0], [])
    p1, p2 = PowerAllocation.epa(1.0, 0.25).stream_powers(derive_dims(5, 3, 3))
    assert np.allclose(p1, [0.25, 1, 1, 0, 0]) and np.allclose(p2, [0.75, 0, 0, 1, 1])
