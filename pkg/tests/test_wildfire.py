import pytest

from oracles import bfs_distances
from fuzzydevs.devs import IGNITE, CoupledModel, initialize
from fuzzydevs.fuzzy import default_rule_base, fis_evaluate
from fuzzydevs.wildfire import (CellPhase, Conventional, ForestRecorder, Fuzzy, GeneratorAM,
                                GridSpec, WeatherSchedule, build_forest, chebyshev,
                                make_cell_am, neighbors)

WALK = [CellPhase.UNBURNED, CellPhase.BURNING, CellPhase.EMBER, CellPhase.ASH]


def _cell_sim(cell, injections):
    top = CoupledModel("top", in_ports=["Ignition", "Duration"], out_ports=["y"])
    top.add(cell)
    top.connect(top, "Ignition", cell, "Ignition")
    top.connect(top, "Duration", cell, "Duration")
    top.connect(cell, "Ignite", top, "y")
    sim = initialize(top)
    phases = []
    sim.add_listener(lambda t, m, k, s: phases.append((t, s.phase)))
    for t, port, value in injections:
        sim.inject(t, port, value)
    sim.run_until()
    return sim, phases


def _burn(gs, mode, weather=None):
    sim = initialize(build_forest(gs, mode, weather), trace=False)
    rec = ForestRecorder(gs).attach(sim)
    sim.run_until()
    return sim, rec


def test_cell_walk():
    sim, phases = _cell_sim(make_cell_am((1, 1), tau=0.5), [(10.0, "Ignition", IGNITE)])
    assert [t for t, _, _ in sim.outputs] == [10.5]
    assert phases == [(10.0, CellPhase.BURNING), (10.5, CellPhase.EMBER),
                      (pytest.approx(10.6), CellPhase.ASH)]


def test_cell_ignition_is_idempotent():
    injections = [(0.0, "Ignition", IGNITE), (0.2, "Ignition", IGNITE), (3.0, "Ignition", IGNITE)]
    sim, phases = _cell_sim(make_cell_am((1, 1)), injections)
    assert len(sim.outputs) == 1
    assert [p for _, p in phases] == WALK[1:]


def test_nonflammable_cell_ignores_ignition():
    sim, phases = _cell_sim(make_cell_am((1, 1), kind="nonflammable"), [(1.0, "Ignition", IGNITE)])
    assert sim.outputs == []
    assert phases == []
    assert sim.state_of("cell(1,1)").phase == CellPhase.NONFLAMMABLE
    assert any(e.kind == "warning" for e in sim.trace)


def test_duration_update_at_ignition_instant_sets_lifetime():
    sim, _ = _cell_sim(make_cell_am((1, 1), tau=0.5),
                       [(0.0, "Ignition", IGNITE), (0.0, "Duration", 0.55)])
    assert sim.outputs[0][0] == pytest.approx(0.55)


def test_duration_update_mid_burn_keeps_remaining_time():
    sim, _ = _cell_sim(make_cell_am((1, 1), tau=0.5),
                       [(0.0, "Ignition", IGNITE), (0.2, "Duration", 0.9)])
    assert sim.outputs[0][0] == pytest.approx(0.5)


def test_cell_rejects_bad_parameters():
    with pytest.raises(ValueError):
        make_cell_am((1, 1), kind="wet")
    with pytest.raises(ValueError):
        make_cell_am((1, 1), tau=0.0)


@pytest.mark.parametrize("rc, count", [((1, 1), 3), ((5, 5), 8), ((1, 5), 5), ((90, 90), 3)])
def test_neighbor_counts(rc, count):
    nbs = neighbors(rc, (90, 90))
    assert len(nbs) == count
    assert all(chebyshev(rc, nb) == 1 for nb in nbs)


def test_generator_merges_simultaneous_events():
    gen = GeneratorAM(WeatherSchedule.constant(45, 35), 0.0)
    out = gen.output(gen.initial_state)
    assert {m.port for m in out} == {"EnvOut", "FireOut"}
    nxt = gen.delta_int(gen.initial_state)
    assert gen.time_advance(nxt) == float("inf")


def test_generator_weather_change():
    gen = GeneratorAM(WeatherSchedule(((0, 45, 35), (30, 80, 10))), 0.0)
    s = gen.delta_int(gen.initial_state)
    assert gen.time_advance(s) == 30
    assert [m.value.h for m in gen.output(s)] == [80]


def test_weather_schedule_validation():
    with pytest.raises(ValueError):
        WeatherSchedule(())
    with pytest.raises(ValueError):
        WeatherSchedule(((1, 45, 35),))
    with pytest.raises(ValueError):
        WeatherSchedule(((0, 45, 35), (0, 50, 35)))


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(0, 3)
    with pytest.raises(ValueError):
        GridSpec(3, 3, ignition=(4, 1, 0.0))
    with pytest.raises(ValueError):
        GridSpec(3, 3, nonflammable=frozenset({(1, 1)}))


def test_forest_census_and_fan_out():
    gs = GridSpec(90, 90)
    sim = initialize(build_forest(gs, Fuzzy()), trace=False)
    leaves = sim.leaves
    assert len(leaves) == 8100 + 9 + 1
    assert sum(1 for p, _ in leaves if p.startswith("forest/")) == 8100
    dests = sim.destinations("fis/defuzz", "OutNum")
    assert len(dests) == 8100 and {port for _, port in dests} == {"Duration"}
    assert len(sim.destinations("forest/cell(45,45)", "Ignite")) == 8


def test_two_by_two():
    _, rec = _burn(GridSpec(2, 2), Conventional(tau=1.0))
    assert rec.ignited[(2, 2)] == 1.0
    assert rec.ignited == {(1, 1): 0.0, (1, 2): 1.0, (2, 1): 1.0, (2, 2): 1.0}


@pytest.mark.parametrize("tau", [0.5, 2.0])
def test_single_cell_burns_out(tau):
    _, rec = _burn(GridSpec(1, 1), Conventional(tau=tau))
    assert rec.ash[(1, 1)] == pytest.approx(1.2 * tau, abs=1e-12)


def test_front_follows_chebyshev_distance():
    gs = GridSpec(10, 10, ignition=(4, 7, 0.0))
    _, rec = _burn(gs, Conventional(0.5))
    for rc in gs.cells():
        assert rec.ignited[rc] == pytest.approx(0.5 * chebyshev(rc, (4, 7)), abs=1e-9)


def test_barrier_matches_bfs_oracle():
    wall = frozenset({(r, 5) for r in range(1, 10)})
    gs = GridSpec(10, 10, nonflammable=wall, ignition=(2, 2, 1.0))
    _, rec = _burn(gs, Conventional(0.5))
    dist = bfs_distances(10, 10, (2, 2), wall)
    for rc in gs.cells():
        if rc in wall:
            assert rc not in rec.ignited
        else:
            assert rec.ignited[rc] == pytest.approx(1.0 + 0.5 * dist[rc], abs=1e-9)


def test_enclosed_region_never_burns():
    ring = frozenset(neighbors((8, 8), (10, 10)))
    gs = GridSpec(10, 10, nonflammable=ring)
    _, rec = _burn(gs, Conventional(0.5))
    assert (8, 8) not in rec.ignited
    assert len(rec.ignited) == 100 - len(ring) - 1
    assert rec.ignition_grid()[7][7] is None


def test_single_emission_and_monotone_phases():
    gs = GridSpec(12, 9, nonflammable=frozenset({(3, 3), (6, 2)}), ignition=(5, 5, 0.0))
    _, rec = _burn(gs, Conventional(0.5))
    assert set(rec.ignite_emissions.values()) == {1}
    for rc, hist in rec.phase_history.items():
        if rc in gs.nonflammable:
            assert hist == [CellPhase.NONFLAMMABLE]
        else:
            assert WALK[WALK.index(hist[0]):] == hist


def test_times_scale_linearly_with_lifetime():
    gs = GridSpec(10, 10, nonflammable=frozenset({(5, 5), (5, 6)}))
    _, a = _burn(gs, Conventional(0.5))
    _, b = _burn(gs, Conventional(1.0))
    assert a.ignited.keys() == b.ignited.keys()
    for rc, t in a.ignited.items():
        assert b.ignited[rc] == pytest.approx(2 * t, abs=1e-9)


def test_fuzzy_lifetime_reaches_every_cell():
    gs = GridSpec(6, 6)
    _, rec = _burn(gs, Fuzzy())
    assert rec.fis_outputs == [(0.0, pytest.approx(0.55, abs=1e-12))]
    for rc in gs.cells():
        assert rec.ignited[rc] == pytest.approx(0.55 * chebyshev(rc, (1, 1)), abs=1e-9)


def test_fuzzy_weather_change_mid_run():
    # Each cell keeps the lifetime in force when it ignited.
    rb = default_rule_base()
    slow = fis_evaluate(rb, [80, 10])
    weather = WeatherSchedule(((0, 45, 35), (2.0, 80, 10)))
    _, rec = _burn(GridSpec(1, 10), Fuzzy(rb), weather)
    expected, t = [], 0.0
    for _ in range(10):
        expected.append(t)
        t += 0.55 if t < 2.0 else slow
    got = [rec.ignited[(1, c)] for c in range(1, 11)]
    assert got == pytest.approx(expected, abs=1e-9)
