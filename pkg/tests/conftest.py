import importlib.resources

import pytest

from pmucorrect import (
    build_measurement_system,
    build_projection,
    compute_zones,
    generate_synthetic_network,
    parse_network,
)

FIVEBUS_TEXT = (
    importlib.resources.files("pmucorrect") / "data" / "fivebus.json"
).read_text(encoding="utf-8")

# same 5-bus topology with non-unit line parameters, for numeric checks
FIVEBUS_LOSSY_TEXT = """
{
  "buses": [1, 2, 3, 4, 5],
  "branches": [
    {"from": 1, "to": 2, "r": 0.02, "x": 0.2, "bs": 0.04},
    {"from": 1, "to": 3, "g": 0.9, "b": -4.0, "bs": 0.02},
    {"from": 3, "to": 5, "r": 0.01, "x": 0.15, "bs": 0.06},
    {"from": 1, "to": 4, "g": 1.2, "b": -6.5, "bs": 0.0}
  ],
  "pmus": [
    {"bus": 2, "measures": [1]},
    {"bus": 4, "measures": [1]},
    {"bus": 5, "measures": [3]}
  ]
}
"""


@pytest.fixture(scope="session")
def fivebus():
    return parse_network(FIVEBUS_TEXT)


@pytest.fixture(scope="session")
def fivebus_ms(fivebus):
    return build_measurement_system(fivebus)


@pytest.fixture(scope="session")
def fivebus_zones(fivebus):
    return compute_zones(fivebus)


@pytest.fixture(scope="session")
def fivebus_lossy():
    return parse_network(FIVEBUS_LOSSY_TEXT)


@pytest.fixture(scope="session")
def twozone():
    """Two-zone network mimicking the 21-PMU reference placement (7 + 14)."""
    net = generate_synthetic_network([7, 14], rng_seed=2024)
    zp = compute_zones(net)
    assert zp.pmu_counts == (7, 14)
    return net


@pytest.fixture(scope="session")
def twozone_ms(twozone):
    return build_measurement_system(twozone)


@pytest.fixture(scope="session")
def twozone_zones(twozone):
    return compute_zones(twozone)


@pytest.fixture(scope="session")
def twozone_proj(twozone_ms, twozone_zones):
    return build_projection(twozone_ms, twozone_zones)


def random_small_network(rng):
    """Random multi-zone network small enough for the brute-force oracles."""
    n_zones = int(rng.integers(1, 4))
    sizes = [int(rng.integers(1, 5)) for _ in range(n_zones)]
    buses = [int(rng.integers(k, 2 * k + 1)) for k in sizes]
    return generate_synthetic_network(sizes, buses_per_zone=buses, rng_seed=rng)
