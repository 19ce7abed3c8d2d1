import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatialrumor import gillespie
from spatialrumor.errors import UsageError
from spatialrumor.gillespie import Absorbed, EventEngine, final_state, simulate
from spatialrumor.lattice import Boundary, Configuration, Lattice, Params, SiteState, site_rates
from spatialrumor.seeding import make_rng


def test_all_ignorant_is_absorbed():
    eng = EventEngine(Configuration.empty(Lattice(1, 5)), Params(2, 3), seed=1)
    assert eng.total_rate == 0
    assert eng.step() is Absorbed
    assert eng.t == 0.0


def test_initial_total_rate(ring5):
    eng = EventEngine(Configuration.single_spreader(ring5, 0), Params(2, 3), seed=1)
    assert eng.total_rate == 5.0


def test_engine_rates_match_rate_table():
    lat = Lattice(2, 4)
    cfg = Configuration.product(lat, 0.4, 0.2, make_rng(3))
    params = Params(1.3, 0.7)
    eng = EventEngine(cfg, params, seed=0)
    expected = [sum(site_rates(cfg, params, x).values()) for x in range(lat.n_sites)]
    np.testing.assert_allclose(eng.rates, expected, rtol=0, atol=1e-15)


def test_lambda_zero_single_spreader_dies(ring5):
    eng = EventEngine(Configuration.single_spreader(ring5, 2), Params(0, 4), seed=9)
    ev = eng.step()
    assert ev.site == 2 and ev.frm is SiteState.SPREADER and ev.to is SiteState.IGNORANT
    assert eng.cfg.is_empty()
    assert eng.step() is Absorbed


def test_run_until_zero_horizon(ring5):
    eng = EventEngine(Configuration.single_spreader(ring5), Params(2, 1), seed=1)
    traj = eng.run_until(0.0)
    assert len(traj) == 1
    assert traj.final_counts == (4, 1, 0)


def test_run_until_rejects_past_horizon(ring5):
    eng = EventEngine(Configuration.single_spreader(ring5), Params(2, 1), seed=1)
    eng.run_until(1.0)
    with pytest.raises(UsageError):
        eng.run_until(0.5)


@pytest.mark.parametrize("k", [1, 3, 7])
def test_pure_death(k):
    lat = Lattice(1, 10)
    cfg = Configuration.from_sites(lat, range(k))
    eng = EventEngine(cfg, Params(0, 0), seed=k)
    traj = eng.run_until(1e6)
    assert eng.cfg.is_empty()
    assert len(traj.events) == k
    assert (traj.events.to == SiteState.IGNORANT).all()
    assert traj.counts[:, 2].max() == 0


def test_determinism():
    lat = Lattice(1, 30)
    cfg = Configuration.single_spreader(lat)
    a, _ = simulate(cfg, Params(2.5, 0.5), 20.0, seed=42)
    b, _ = simulate(cfg, Params(2.5, 0.5), 20.0, seed=42)
    c, _ = simulate(cfg, Params(2.5, 0.5), 20.0, seed=43)
    assert a.events == b.events
    assert a.events != c.events


def test_trajectory_invariants():
    lat = Lattice(2, 8)
    traj, _ = simulate(Configuration.single_spreader(lat), Params(3, 0.5), 15.0, seed=5)
    assert (traj.counts.sum(axis=1) == lat.n_sites).all()
    assert (np.diff(traj.times) > 0).all()
    assert traj.times[-1] <= 15.0


def test_sampled_trajectory_grid():
    lat = Lattice(1, 20)
    eng = EventEngine(Configuration.single_spreader(lat), Params(2, 0), seed=3)
    traj = eng.run_until(5.0, stop_on_extinction=False, sample_dt=0.5)
    np.testing.assert_allclose(traj.times, np.arange(11) * 0.5)
    assert (traj.counts.sum(axis=1) == 20).all()


def test_incremental_rates_stay_consistent():
    lat = Lattice(2, 10)
    eng = EventEngine(Configuration.product(lat, 0.3, 0.1, make_rng(1)), Params(2.0, 1.5), seed=2)
    for _ in range(20):
        eng.sample_events(500)
        eng.check_rates()


@settings(max_examples=15, deadline=None)
@given(
    st.integers(1, 2),
    st.integers(3, 7),
    st.sampled_from(list(Boundary)),
    st.floats(0, 5),
    st.floats(0, 5),
    st.integers(0, 2**32),
)
def test_rate_consistency_property(d, side, boundary, lam, alpha, seed):
    lat = Lattice(d, side, boundary)
    eng = EventEngine(Configuration.product(lat, 0.4, 0.2, make_rng(seed)), Params(lam, alpha), seed=seed)
    eng.sample_events(300)
    eng.check_rates()


def test_forced_rebuild_matches(monkeypatch):
    lat = Lattice(1, 50)
    eng = EventEngine(Configuration.product(lat, 0.5, 0, make_rng(0)), Params(3, 0.2), seed=1)
    eng.sample_events(5000)
    before = eng.rates.copy()
    eng.rebuild()
    np.testing.assert_array_equal(before, eng.rates)
    eng.check_rates()


def test_clamped_sites_never_move():
    lat = Lattice(1, 9, "frozen")
    clamp = np.zeros(9, bool)
    clamp[[0, 8]] = True
    cfg = Configuration.from_sites(lat, [0, 8])
    eng = EventEngine(cfg, Params(3, 2), seed=4, clamped=clamp)
    traj = eng.run_until(20.0, stop_on_extinction=False)
    assert not np.isin(traj.events.site, [0, 8]).any()
    assert eng.states[0] == 1 and eng.states[8] == 1


def test_final_state_matches_engine_semantics():
    lat = Lattice(1, 12)
    cfg = Configuration.single_spreader(lat)
    states, t, status = final_state(cfg, Params(0, 0), 100.0, make_rng(1))
    assert not states.any()
    assert status == gillespie.ABSORBED


def test_trajectory_csv_header(ring5):
    traj, _ = simulate(Configuration.single_spreader(ring5), Params(1, 1), 2.0, seed=1)
    lines = traj.to_csv(["config: x"]).splitlines()
    assert lines[0] == "# config: x"
    assert lines[1] == "t,n_ignorant,n_spreader,n_stifler"
    assert traj.events.to_csv().splitlines()[0] == "t,site,from,to"
