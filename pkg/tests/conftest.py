"""Shared fixtures: small hand-built cities so unit tests stay fast."""

from __future__ import annotations

import numpy as np
import pytest

from uavlab.cityworld import CityMap, MissionSpec, UavEnv
from uavlab.radiomap import (BaseStation, Building, PropagationParams,
                             build_radio_map)


def tiny_city(n_bs: int = 2) -> CityMap:
    """400 m x 400 m city with four buildings and up to three stations."""
    buildings = (
        Building(60.0, 60.0, 140.0, 140.0, height=40.0),
        Building(260.0, 60.0, 340.0, 120.0, height=55.0),
        Building(70.0, 260.0, 150.0, 330.0, height=25.0),
        Building(250.0, 250.0, 350.0, 350.0, height=48.0),
    )
    stations = (
        BaseStation(x=200.0, y=200.0, height=20.0),
        BaseStation(x=40.0, y=360.0, height=15.0),
        BaseStation(x=360.0, y=40.0, height=22.0),
    )[:n_bs]
    return CityMap(name="tiny", extent=(400.0, 400.0), buildings=buildings,
                   base_stations=stations)


@pytest.fixture(scope="session")
def city2():
    return tiny_city(2)


@pytest.fixture(scope="session")
def city3():
    return tiny_city(3)


@pytest.fixture(scope="session")
def prop():
    return PropagationParams()


@pytest.fixture(scope="session")
def tiny_map(city2, prop):
    return build_radio_map(city2, prop, altitude=90.0, cell_size=20.0)


@pytest.fixture(scope="session")
def tiny_env(city2, tiny_map):
    mission = MissionSpec(target=(320.0, 320.0),
                          start_region=(20.0, 20.0, 100.0, 100.0),
                          arrival_radius=30.0, step_size=10.0, max_steps=80,
                          uav_altitude=90.0)
    return UavEnv(city2, mission, tiny_map)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
