"""Unit checks for the mixed-autonomy fundamental diagram."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from headwayctl.fundamental import (
    LATENCY_CAP_S,
    capacity,
    congestion_state,
    critical_density,
    link_latency,
    path_latency,
    sending_flow,
)

REL = 1e-9


def test_critical_density_pure_human():
    assert critical_density(2, 0.0, 2.0, 6.0) == pytest.approx(1.0 / 3.0, rel=REL)


def test_critical_density_pure_auto():
    assert critical_density(2, 1.0, 2.0, 6.0) == pytest.approx(1.0, rel=REL)


def test_critical_density_half_mix():
    # 2 / (0.5*2 + 0.5*6) = 2/4
    assert critical_density(2, 0.5, 2.0, 6.0) == pytest.approx(0.5, rel=REL)


def test_critical_density_rejects_bad_headways():
    with pytest.raises(ValueError):
        critical_density(2, 0.5, 0.0, 6.0)
    with pytest.raises(ValueError):
        critical_density(2, 0.5, 2.0, -1.0)


def test_capacity_product():
    assert capacity(30.0, 0.5) == pytest.approx(15.0, rel=REL)


def test_capacity_zero_critical_density():
    assert capacity(30.0, 0.0) == 0.0


def test_capacity_alpha_independent_when_headways_equal():
    for alpha in np.linspace(0.0, 1.0, 11):
        nc = critical_density(4, alpha, 6.0, 6.0)
        assert capacity(30.0, nc) == pytest.approx(20.0, rel=REL)


class TestSendingFlow:
    # v=30, n_c=0.5, jam=2.0, d=1000
    ARGS = dict(length_m=1000.0, free_flow_speed_mps=30.0, crit_density=0.5, jam_density=2.0)

    def test_free_branch(self):
        assert sending_flow(200.0, **self.ARGS) == pytest.approx(6.0, rel=REL)

    def test_continuity_at_critical(self):
        assert sending_flow(500.0, **self.ARGS) == pytest.approx(15.0, rel=REL)

    def test_congested_branch(self):
        # 15 * (2 - 1.25) / (2 - 0.5)
        assert sending_flow(1250.0, **self.ARGS) == pytest.approx(7.5, rel=REL)

    def test_zero_at_jam(self):
        assert sending_flow(2000.0, **self.ARGS) == pytest.approx(0.0, abs=1e-12)

    def test_two_sided_continuity(self):
        eps = 1e-12 * 0.5
        lo = sending_flow((0.5 - eps) * 1000.0, **self.ARGS)
        hi = sending_flow((0.5 + eps) * 1000.0, **self.ARGS)
        assert abs(lo - hi) <= REL * max(abs(lo), abs(hi))


def test_congestion_state_boundary_is_free():
    assert congestion_state(0.0, 0.5) == 0
    assert congestion_state(0.5, 0.5) == 0
    assert congestion_state(1.25, 0.5) == 1


class TestLinkLatency:
    ARGS = dict(length_m=1000.0, free_flow_speed_mps=30.0, crit_density=0.5, jam_density=2.0)

    def test_free_flow(self):
        assert link_latency(6.0, 0, **self.ARGS) == pytest.approx(1000.0 / 30.0, rel=REL)

    def test_congested_at_capacity_matches_free(self):
        assert link_latency(15.0, 1, **self.ARGS) == pytest.approx(1000.0 / 30.0, rel=REL)

    def test_congested_half_capacity(self):
        # 1000 * (2/7.5 - 1.5/15)
        assert link_latency(7.5, 1, **self.ARGS) == pytest.approx(500.0 / 3.0, rel=REL)

    def test_zero_flow_hits_cap(self):
        assert link_latency(0.0, 1, **self.ARGS) == LATENCY_CAP_S


def test_path_latency_sums():
    lat = np.array([8000.0, 8000.0, 0.0, 8000.0, 2000.0])
    assert path_latency((), lat) == 0.0
    assert path_latency((0, 1), lat) == pytest.approx(16000.0, rel=REL)
    assert path_latency((0, 4, 3), lat) == pytest.approx(18000.0, rel=REL)


# ----------------------------------------------------------------------
# randomized properties

def _random_diagram(rng):
    lanes = rng.integers(1, 9)
    beta_h = rng.uniform(1.0, 10.0)
    beta_a = rng.uniform(1.0, 10.0)
    alpha = rng.uniform(0.0, 1.0)
    v = rng.uniform(5.0, 40.0)
    d = rng.uniform(500.0, 300_000.0)
    n_c = critical_density(lanes, alpha, beta_a, beta_h)
    jam = lanes / 0.5
    return lanes, v, d, n_c, jam


def test_flow_continuity_randomized():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        _, v, d, n_c, jam = _random_diagram(rng)
        eps = 1e-12 * n_c
        lo = sending_flow((n_c - eps) * d, d, v, n_c, jam)
        hi = sending_flow((n_c + eps) * d, d, v, n_c, jam)
        assert abs(lo - hi) <= 1e-9 * max(abs(lo), abs(hi))


def test_latency_continuity_at_capacity_randomized():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        _, v, d, n_c, jam = _random_diagram(rng)
        at_capacity = link_latency(v * n_c, 1, d, v, n_c, jam)
        assert abs(at_capacity - d / v) <= 1e-9 * (d / v)


def test_critical_density_monotone_in_beta_a():
    rng = np.random.default_rng(9)
    for _ in range(200):
        lanes = rng.integers(1, 9)
        alpha = rng.uniform(0.01, 1.0)
        beta_h = rng.uniform(1.0, 10.0)
        betas = np.sort(rng.uniform(1.0, 10.0, size=5))
        nc = critical_density(lanes, alpha, betas, beta_h)
        assert np.all(np.diff(nc) < 0.0)


def test_congested_flow_monotone_in_density():
    rng = np.random.default_rng(10)
    for _ in range(200):
        _, v, d, n_c, jam = _random_diagram(rng)
        rhos = np.sort(rng.uniform(n_c, jam, size=6))
        flows = sending_flow(rhos * d, d, v, n_c, jam)
        assert np.all(np.diff(flows) <= 0.0)


@given(
    lanes=st.integers(1, 8),
    alpha=st.floats(0.0, 1.0),
    beta_a=st.floats(1.0, 10.0),
    beta_h=st.floats(1.0, 10.0),
)
def test_critical_density_interpolates_between_extremes(lanes, alpha, beta_a, beta_h):
    nc = critical_density(lanes, alpha, beta_a, beta_h)
    lo = lanes / max(beta_a, beta_h)
    hi = lanes / min(beta_a, beta_h)
    assert lo - 1e-12 <= nc <= hi + 1e-12


@given(
    ratio=st.floats(0.0, 1.0),
    congested=st.booleans(),
)
@settings(max_examples=200)
def test_latency_never_below_free_flow(ratio, congested):
    v, d, n_c, jam = 30.0, 240_000.0, 2.0 / 3.0, 8.0
    rho = ratio * jam
    flow = sending_flow(rho * d, d, v, n_c, jam)
    s = congestion_state(rho, n_c)
    lat = link_latency(flow, s, d, v, n_c, jam)
    assert lat >= d / v - 1e-9 * (d / v)
