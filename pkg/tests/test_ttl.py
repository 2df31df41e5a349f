import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cachelab.errors import InvalidArgument, OutOfRange
from cachelab.ttl import (IntervalStats, consistency_discount, generate_prm_trace,
                          periodic_reset_hit_ratio, simulate_ttl_occupancy, simulate_ttl_prm,
                          trace_interval_stats, trace_rates, ttl_adapt, ttl_hit,
                          ttl_hit_periodic, ttl_hit_reset_per_miss, ttl_hit_reset_per_request,
                          ttl_occupancy, ttl_trace_codes)
from cachelab.workload import Catalog, Trace, zipf_catalog
from oracles import HIT, ref_ttl_codes

DISCS = ["RESET_PER_MISS", "RESET_PER_REQUEST", "PERIODIC"]


def test_closed_forms_known_values():
    assert ttl_hit_reset_per_miss(1.0, 1.0) == pytest.approx(0.5)
    assert ttl_hit_reset_per_request(1.0, 1.0) == pytest.approx(1 - math.exp(-1))
    assert ttl_hit_periodic(1.0, 1.0) == pytest.approx(math.exp(-1))
    assert ttl_hit_periodic(2.0, 0.0) == 0.0
    assert ttl_hit_periodic(1.0, 1e-9) == pytest.approx(0.5e-9, rel=1e-6)
    for d in DISCS:
        assert ttl_hit(d, 3.0, math.inf) == 1.0
        assert ttl_hit(d, 0.0, 5.0) == 0.0


def test_closed_forms_order():
    # a request-restarted timer never expires earlier than the other two
    x = np.geomspace(1e-3, 1e3, 50)
    per_req = ttl_hit_reset_per_request(x, 1.0)
    per_miss = ttl_hit_reset_per_miss(x, 1.0)
    periodic = ttl_hit_periodic(x, 1.0)
    assert np.all(per_req >= per_miss - 1e-15)
    assert np.all(per_miss >= periodic - 1e-15)
    assert np.all(np.diff(periodic) > 0)


def test_rejects_negative_inputs():
    with pytest.raises(InvalidArgument):
        ttl_hit_reset_per_miss(-1.0, 1.0)
    with pytest.raises(InvalidArgument):
        ttl_hit("NEVER", 1.0, 1.0)


@st.composite
def timed(draw):
    n = draw(st.integers(1, 4))
    gaps = draw(st.lists(st.sampled_from([0.0, 0.25, 0.5, 1.0, 1.5]), min_size=1, max_size=40))
    objs = draw(st.lists(st.integers(0, n - 1), min_size=len(gaps), max_size=len(gaps)))
    return Trace(Catalog.from_arrays(np.ones(n)), objs, np.cumsum(gaps))


@pytest.mark.parametrize("disc", DISCS)
@given(tr=timed(), dt=st.sampled_from([0.25, 0.5, 1.0, 2.0]))
def test_trace_codes_match_oracle(disc, tr, dt):
    # timestamps on a quarter grid put requests exactly on expiry instants
    got = ttl_trace_codes(tr, disc, dt).tolist()
    ref = [c == HIT for c in ref_ttl_codes(tr.times.tolist(), tr.objects.tolist(), disc, dt)]
    assert got == ref


def test_request_at_expiry_is_a_miss():
    tr = Trace(Catalog.from_arrays([1.0]), [0, 0, 0], [0.0, 1.0, 1.5])
    assert ttl_trace_codes(tr, "RESET_PER_MISS", 1.0).tolist() == [False, False, True]
    assert ttl_trace_codes(tr, "PERIODIC", 1.0).tolist() == [False, False, True]


@pytest.mark.parametrize("disc", DISCS)
def test_simulation_matches_closed_form(disc):
    for x in (0.3, 3.0):
        est = simulate_ttl_prm(1.0, x, disc, 200_000, seed=5)
        assert abs(est.value - ttl_hit(disc, 1.0, x)) < 4 * est.stderr + 1e-4


def test_periodic_stats_reproduce_direct_count():
    cat = zipf_catalog(20, 0.8)
    tr = generate_prm_trace(cat, 50.0, 200.0, seed=3)
    dt = 0.5
    stats = trace_interval_stats(tr, dt)
    per, agg = periodic_reset_hit_ratio(stats)
    # direct count over complete windows
    end = math.floor(tr.times[-1] / dt) * dt
    inside = tr.times < end
    sub = Trace(tr.catalog, tr.objects[inside], tr.times[inside])
    h = ttl_trace_codes(sub, "PERIODIC", dt)
    assert agg == pytest.approx(h.mean(), rel=1e-12)
    # with Poisson requests the estimate approaches the closed form
    lam = 50.0 * cat.pmf[0]
    assert per[0] == pytest.approx(ttl_hit_periodic(lam, dt), abs=0.03)


def test_interval_stats_validation():
    with pytest.raises(InvalidArgument):
        IntervalStats(["a"], np.array([0.0]), np.array([0.5]), np.array([1.0]), np.array([3]))
    with pytest.raises(InvalidArgument):
        trace_interval_stats(Trace(Catalog.from_arrays([1.0]), [0]), 1.0)


@pytest.mark.parametrize("disc", DISCS)
def test_occupancy_closed_form_matches_simulation(disc):
    for lam, dt in ((0.5, 1.0), (4.0, 1.0)):
        est = simulate_ttl_occupancy(lam, dt, disc, horizon=40_000.0, seed=2)
        assert abs(est.value - ttl_occupancy([lam], disc, dt)) < 4 * est.stderr + 2e-3


@pytest.mark.parametrize("disc", DISCS)
def test_adapt_inverts_hit_and_occupancy(disc):
    lam = zipf_catalog(100, 0.8).pmf * 10
    dt = ttl_adapt(lam, 0.6, disc)
    assert np.sum(lam * ttl_hit(disc, lam, dt)) / lam.sum() == pytest.approx(0.6, rel=1e-9)
    dt = ttl_adapt(lam, 30.0, disc, kind="occupancy")
    assert ttl_occupancy(lam, disc, dt) == pytest.approx(30.0, rel=1e-9)
    per = ttl_adapt(lam, 0.5, disc, per_object=True)
    np.testing.assert_allclose(ttl_hit(disc, lam, per), 0.5, rtol=1e-9)
    with pytest.raises(OutOfRange) as e:
        ttl_adapt(lam, 1.0, disc)
    assert e.value.supremum == 1.0
    with pytest.raises(OutOfRange):
        ttl_adapt(lam, 100.0, disc, kind="occupancy")


def test_trace_rates_and_discount():
    tr = Trace(Catalog.from_arrays(np.ones(2)), [0, 0, 1, 0], [1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(trace_rates(tr), [0.75, 0.25])
    assert consistency_discount(0.8, "RESET_PER_MISS", 1.0, 1.0) == pytest.approx(0.4)
    with pytest.raises(InvalidArgument):
        consistency_discount(1.5, "PERIODIC", 1.0, 1.0)
