"""City generation, MDP dynamics, rewards and constraints."""

import math

import numpy as np
import pytest

from uavlab.cityworld import (ACTION_DELTAS, PROFILES, CityMap, MdpState,
                              MissionSpec, RewardConstants, UavEnv,
                              apply_emergency, check_constraints,
                              compute_reward, episode_outage_count,
                              generate_city, mission_spec,
                              nearest_bs_to_target)
from uavlab.radiomap import BaseStation, Building

RC = RewardConstants()


# ---------------------------------------------------------------------------
# reward
# ---------------------------------------------------------------------------

def test_reward_spot_value_arrival():
    # at the destination, connected: -0 - 0 - 1 + 2000
    assert compute_reward(0.0, False, True, RC) == 1999.0


def test_reward_spot_value_outage_far():
    # 1 km out, in outage, not arrived: -0.8 - 1 - 1
    assert compute_reward(1000.0, True, False, RC) == pytest.approx(-2.8, abs=1e-12)


def test_reward_components_additive():
    base = compute_reward(500.0, False, False, RC)
    assert compute_reward(500.0, True, False, RC) == pytest.approx(base - RC.k2)
    assert compute_reward(500.0, False, True, RC) == pytest.approx(base + RC.r_arrive)
    assert compute_reward(1500.0, False, False, RC) == pytest.approx(
        base - RC.k1 * 1.0)


# ---------------------------------------------------------------------------
# step dynamics
# ---------------------------------------------------------------------------

def test_action_deltas_cover_four_directions():
    assert set(ACTION_DELTAS) == {(0.0, 1.0), (0.0, -1.0), (-1.0, 0.0), (1.0, 0.0)}


def test_step_moves_and_counts(tiny_env):
    s0 = MdpState(x=100.0, y=100.0, sinr_db=tiny_env.rmap.sinr_at_pos(100.0, 100.0))
    out = tiny_env.step(s0, 3)  # +x
    assert (out.state.x, out.state.y) == (110.0, 100.0)
    assert out.state.steps == 1
    out2 = tiny_env.step(out.state, 1)  # -y
    assert (out2.state.x, out2.state.y) == (110.0, 90.0)
    assert out2.state.steps == 2


def test_step_is_pure(tiny_env):
    s0 = MdpState(x=100.0, y=100.0, sinr_db=tiny_env.rmap.sinr_at_pos(100.0, 100.0))
    assert tiny_env.step(s0, 0) == tiny_env.step(s0, 0)


def test_step_clips_at_boundary(tiny_env):
    s = MdpState(x=5.0, y=0.0, sinr_db=0.0)
    out = tiny_env.step(s, 1)  # -y into the wall
    assert (out.state.x, out.state.y) == (5.0, 0.0)
    out = tiny_env.step(s, 2)  # -x past the edge
    assert (out.state.x, out.state.y) == (0.0, 0.0)
    high = MdpState(x=398.0, y=395.0, sinr_db=0.0)
    out = tiny_env.step(high, 3)
    assert (out.state.x, out.state.y) == (400.0, 395.0)


def test_step_sinr_comes_from_the_map(tiny_env):
    s = MdpState(x=100.0, y=100.0, sinr_db=0.0)
    out = tiny_env.step(s, 0)
    assert out.state.sinr_db == tiny_env.rmap.sinr_at_pos(100.0, 110.0)
    assert out.in_outage == tiny_env.rmap.outage_at_pos(100.0, 110.0)


def test_arrival_is_inclusive_at_the_radius(tiny_env):
    # target (320, 320), radius 30: landing exactly 30 m away counts
    s = MdpState(x=320.0, y=280.0, sinr_db=0.0)
    out = tiny_env.step(s, 0)  # -> (320, 290), distance 30.0
    assert out.distance_m == 30.0
    assert out.terminal
    assert out.reward == pytest.approx(
        compute_reward(30.0, out.in_outage, True, RC))


def test_step_after_arrival_rejected(tiny_env):
    s = MdpState(x=320.0, y=300.0, sinr_db=0.0, arrived=True)
    with pytest.raises(ValueError):
        tiny_env.step(s, 0)


def test_invalid_action_rejected(tiny_env):
    s = MdpState(x=100.0, y=100.0, sinr_db=0.0)
    for bad in (-1, 4, 7):
        with pytest.raises(ValueError):
            tiny_env.step(s, bad)


def test_truncation_at_step_budget(tiny_env):
    # spin in a corner far from the target until the budget runs out
    state = MdpState(x=0.0, y=0.0, sinr_db=tiny_env.rmap.sinr_at_pos(0.0, 0.0))
    outcome = None
    for i in range(tiny_env.mission.max_steps):
        outcome = tiny_env.step(state, 2)  # -x, pinned at the wall
        state = outcome.state
    assert outcome.truncated
    assert not outcome.terminal
    assert outcome.done
    assert state.steps == tiny_env.mission.max_steps


def test_reset_draws_inside_start_region(tiny_env):
    rng = np.random.default_rng(5)
    for _ in range(50):
        s = tiny_env.reset(rng)
        x0, y0, x1, y1 = tiny_env.mission.start_region
        assert x0 <= s.x <= x1 and y0 <= s.y <= y1
        assert s.steps == 0 and not s.arrived
        assert s.sinr_db == tiny_env.rmap.sinr_at_pos(s.x, s.y)


def test_reset_reproducible(tiny_env):
    a = tiny_env.reset(np.random.default_rng(42))
    b = tiny_env.reset(np.random.default_rng(42))
    assert a == b


def test_episode_outage_count(tiny_env):
    rng = np.random.default_rng(0)
    state = tiny_env.reset(rng)
    outcomes = []
    for _ in range(30):
        out = tiny_env.step(state, int(rng.integers(4)))
        outcomes.append(out)
        if out.done:
            break
        state = out.state
    assert episode_outage_count(outcomes) == sum(o.in_outage for o in outcomes)
    assert episode_outage_count(outcomes) <= len(outcomes)


# ---------------------------------------------------------------------------
# observation encoding
# ---------------------------------------------------------------------------

def test_observation_shape_and_values(tiny_env):
    s = MdpState(x=100.0, y=300.0, sinr_db=0.0)
    obs = tiny_env.observation(s)
    assert obs.shape == (4,)
    assert obs[0] == pytest.approx(0.25)
    assert obs[1] == pytest.approx(0.75)
    assert obs[2] == pytest.approx(90.0 / 100.0)
    assert obs[3] == pytest.approx(0.0)  # 0 dB is the middle of [-30, 30]


def test_observation_sinr_clamps(tiny_env):
    lo = tiny_env.observation(MdpState(x=0.0, y=0.0, sinr_db=-math.inf))
    hi = tiny_env.observation(MdpState(x=0.0, y=0.0, sinr_db=80.0))
    mid = tiny_env.observation(MdpState(x=0.0, y=0.0, sinr_db=15.0))
    assert lo[3] == -1.0
    assert hi[3] == 1.0
    assert mid[3] == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# constraints
# ---------------------------------------------------------------------------

def test_check_constraints_accepts_good_env(tiny_env):
    assert check_constraints(tiny_env.city, tiny_env.mission, tiny_env.rmap) == []


def test_check_constraints_flags_problems(city2, tiny_map):
    bad_target = MissionSpec(target=(900.0, 50.0),
                             start_region=(20.0, 20.0, 100.0, 100.0))
    assert any("target" in p for p in check_constraints(city2, bad_target))
    overlapping = MissionSpec(target=(110.0, 110.0),
                              start_region=(20.0, 20.0, 100.0, 100.0),
                              arrival_radius=30.0)
    assert any("arrival disc" in p for p in check_constraints(city2, overlapping))
    low = MissionSpec(target=(320.0, 320.0),
                      start_region=(20.0, 20.0, 100.0, 100.0), uav_altitude=50.0)
    assert any("tallest building" in p for p in check_constraints(city2, low))
    wrong_alt = MissionSpec(target=(320.0, 320.0),
                            start_region=(20.0, 20.0, 100.0, 100.0),
                            uav_altitude=100.0)
    assert any("altitude" in p
               for p in check_constraints(city2, wrong_alt, tiny_map))


def test_env_constructor_rejects_bad_combo(city2, tiny_map):
    bad = MissionSpec(target=(900.0, 50.0), start_region=(20.0, 20.0, 100.0, 100.0))
    with pytest.raises(ValueError):
        UavEnv(city2, bad, tiny_map)


def test_mission_spec_validation():
    with pytest.raises(ValueError):
        MissionSpec(target=(10.0, 10.0), start_region=(50.0, 50.0, 40.0, 60.0))
    with pytest.raises(ValueError):
        MissionSpec(target=(10.0, 10.0), start_region=(0.0, 0.0, 20.0, 20.0),
                    max_steps=0)


# ---------------------------------------------------------------------------
# procedural cities
# ---------------------------------------------------------------------------

def test_generate_city_is_deterministic():
    a = generate_city("env1", "desk")
    b = generate_city("env1", "desk")
    assert a == b


def test_environments_differ():
    a = generate_city("env1", "desk")
    b = generate_city("env2", "desk")
    assert a.buildings != b.buildings
    assert tuple((bs.x, bs.y) for bs in a.base_stations) != tuple(
        (bs.x, bs.y) for bs in b.base_stations)


def test_generate_city_within_extent():
    for env_id in ("env1", "env2", "env3"):
        for profile in ("desk", "paper"):
            city = generate_city(env_id, profile)
            prof = PROFILES[profile]
            assert city.extent == (prof.extent, prof.extent)
            for b in city.buildings:
                assert 0.0 <= b.x_min < b.x_max <= prof.extent
                assert b.height < city.height_limit


def test_generate_city_rejects_unknown_ids():
    with pytest.raises(ValueError):
        generate_city("env9", "desk")
    with pytest.raises(ValueError):
        generate_city("env1", "huge")


def test_environment_height_bands_step_down():
    # dense tall core, mid-rise district, low residential sprawl
    for profile in ("desk", "paper"):
        means = {}
        for env_id in ("env1", "env2", "env3"):
            city = generate_city(env_id, profile)
            means[env_id] = np.mean([b.height for b in city.buildings])
        assert means["env1"] > means["env2"] > means["env3"]


def test_env1_towers_stay_below_flight_altitude():
    for profile in ("desk", "paper"):
        city = generate_city("env1", profile)
        mission = mission_spec("env1", profile)
        assert all(b.height < mission.uav_altitude for b in city.buildings)
        assert max(b.height for b in city.buildings) >= 40.0


def test_env3_runs_on_three_stations():
    for profile in ("desk", "paper"):
        assert len(generate_city("env3", profile).base_stations) == 3
        assert len(generate_city("env1", profile).base_stations) == 4
        assert len(generate_city("env2", profile).base_stations) == 4


def test_env2_is_sparser_than_env1():
    assert len(generate_city("env2", "desk").buildings) < len(
        generate_city("env1", "desk").buildings)


def test_city_records_identity():
    city = generate_city("env2", "desk")
    assert city.env_id == "env2"
    assert generate_city("env2", "paper").seed != city.seed


def test_mission_spec_published_targets():
    assert mission_spec("env1", "paper").target == (1000.0, 900.0)
    assert mission_spec("env2", "paper").target == (1250.0, 1300.0)
    assert mission_spec("env3", "paper").target == (1600.0, 1600.0)
    paper = mission_spec("env1", "paper")
    assert paper.max_steps == 200
    assert paper.arrival_radius == 30.0
    assert paper.step_size == 10.0
    assert paper.uav_altitude == 90.0


def test_mission_fits_city():
    for env_id in ("env1", "env2", "env3"):
        city = generate_city(env_id, "desk")
        mission = mission_spec(env_id, "desk")
        assert check_constraints(city, mission) == []


def test_desk_missions_reachable_within_budget():
    # worst-corner Manhattan distance must fit the step budget with slack
    for env_id in ("env1", "env2", "env3"):
        m = mission_spec(env_id, "desk")
        x0, y0, x1, y1 = m.start_region
        worst = max(abs(cx - m.target[0]) + abs(cy - m.target[1])
                    for cx in (x0, x1) for cy in (y0, y1))
        steps_needed = (worst - m.arrival_radius) / m.step_size
        assert steps_needed <= 0.9 * m.max_steps


def test_city_validation_rejects_out_of_bounds():
    with pytest.raises(ValueError):
        CityMap(name="bad", extent=(100.0, 100.0),
                buildings=(Building(50.0, 50.0, 150.0, 80.0, height=20.0),),
                base_stations=())
    with pytest.raises(ValueError):
        CityMap(name="bad", extent=(100.0, 100.0), buildings=(),
                base_stations=(BaseStation(x=500.0, y=50.0, height=20.0),))


# ---------------------------------------------------------------------------
# emergency
# ---------------------------------------------------------------------------

def test_apply_emergency_disables_one_station(city2):
    out = apply_emergency(city2, 1)
    assert out.base_stations[1].tx_power_w == 0.0
    assert out.base_stations[0].tx_power_w == city2.base_stations[0].tx_power_w
    # the source city is untouched
    assert city2.base_stations[1].tx_power_w > 0.0
    assert out.name.endswith("-emergency")


def test_apply_emergency_checks_index(city2):
    with pytest.raises(ValueError):
        apply_emergency(city2, 5)


def test_nearest_bs_to_target(city2):
    mission = MissionSpec(target=(360.0, 340.0),
                          start_region=(20.0, 20.0, 100.0, 100.0))
    # stations at (200,200) and (40,360): the first is closer to (360,340)
    assert nearest_bs_to_target(city2, mission) == 0
