"""Power-network model, PMU placement, and measurement-matrix construction.

The network file format is a small JSON schema (see :func:`parse_network`).
From a validated :class:`NetworkModel` this module builds the complex
measurement matrix ``h`` (one voltage row per PMU plus one current row per
measured line) together with the two real matrices ``h_angle_v`` and
``h_delta`` that relate the transformed angle measurements linearly to the
bus voltage angles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "NetworkError",
    "Branch",
    "Pmu",
    "NetworkModel",
    "VoltageRow",
    "CurrentRow",
    "MeasurementSystem",
    "parse_network",
    "load_network",
    "network_to_json",
    "build_measurement_system",
]


class NetworkError(ValueError):
    """Raised for malformed network files or model-invariant violations."""


@dataclass(frozen=True)
class Branch:
    """An undirected branch with series admittance and shunt susceptance.

    Electrical quantities are per-unit. ``shunt_susceptance`` is the total
    line-charging susceptance b_s of the pi model; half of it is lumped at
    the sending end of a measured current.
    """

    from_bus: int
    to_bus: int
    series_admittance: complex
    shunt_susceptance: float = 0.0


@dataclass(frozen=True)
class Pmu:
    """A PMU at ``bus`` measuring the outgoing current of each listed neighbor."""

    bus: int
    measured_neighbors: tuple[int, ...] = ()


@dataclass(frozen=True)
class NetworkModel:
    """Immutable bus/branch/PMU description of the monitored network.

    Invariants (checked on construction):

    * bus ids are unique; branch endpoints and PMU buses exist;
    * at most one PMU per bus; measured neighbors are distinct and each
      corresponds to an actual branch;
    * every branch referenced by a PMU has a nonzero series admittance
      (the angle-difference transform divides by it).
    """

    buses: tuple[int, ...]
    branches: tuple[Branch, ...]
    pmus: tuple[Pmu, ...]

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "pmus", tuple(self.pmus))
        self._validate()

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_pmus(self) -> int:
        return len(self.pmus)

    @cached_property
    def bus_index(self) -> dict[int, int]:
        """Bus id -> column index, in file order."""
        return {b: i for i, b in enumerate(self.buses)}

    @cached_property
    def branch_params(self) -> dict[tuple[int, int], tuple[complex, float]]:
        """(bus, bus) -> (series admittance, shunt susceptance), both orientations."""
        table: dict[tuple[int, int], tuple[complex, float]] = {}
        for br in self.branches:
            value = (br.series_admittance, br.shunt_susceptance)
            table[(br.from_bus, br.to_bus)] = value
            table[(br.to_bus, br.from_bus)] = value
        return table

    def _validate(self) -> None:
        if not self.buses:
            raise NetworkError("network has no buses")
        if len(set(self.buses)) != len(self.buses):
            raise NetworkError("duplicate bus ids in bus list")
        bus_set = set(self.buses)

        seen_pairs = set()
        for br in self.branches:
            if br.from_bus not in bus_set or br.to_bus not in bus_set:
                raise NetworkError(
                    f"branch ({br.from_bus},{br.to_bus}) references an unknown bus"
                )
            if br.from_bus == br.to_bus:
                raise NetworkError(f"branch ({br.from_bus},{br.to_bus}) is a self-loop")
            key = frozenset((br.from_bus, br.to_bus))
            if key in seen_pairs:
                raise NetworkError(
                    f"duplicate branch between buses {br.from_bus} and {br.to_bus}"
                )
            seen_pairs.add(key)

        params = self.branch_params
        seen_pmu_buses = set()
        for pmu in self.pmus:
            if pmu.bus not in bus_set:
                raise NetworkError(f"PMU at unknown bus {pmu.bus}")
            if pmu.bus in seen_pmu_buses:
                raise NetworkError(f"duplicate PMU at bus {pmu.bus}")
            seen_pmu_buses.add(pmu.bus)
            if len(set(pmu.measured_neighbors)) != len(pmu.measured_neighbors):
                raise NetworkError(
                    f"PMU at bus {pmu.bus} lists a measured neighbor twice"
                )
            for nbr in pmu.measured_neighbors:
                if (pmu.bus, nbr) not in params:
                    raise NetworkError(
                        f"PMU at bus {pmu.bus} measures line to {nbr}, "
                        "but no such branch exists"
                    )
                y, _ = params[(pmu.bus, nbr)]
                if y == 0:
                    raise NetworkError(
                        f"line ({pmu.bus},{nbr}) is measured but has zero "
                        "series admittance"
                    )


@dataclass(frozen=True)
class VoltageRow:
    """Row tag: voltage phasor of PMU ``pmu`` at ``bus``."""

    pmu: int
    bus: int


@dataclass(frozen=True)
class CurrentRow:
    """Row tag: current phasor measured by PMU ``pmu`` on line bus_from -> bus_to."""

    pmu: int
    bus_from: int
    bus_to: int


@dataclass(frozen=True)
class MeasurementSystem:
    """Measurement matrices and row/column bookkeeping for one network.

    ``h`` is the complex m x N matrix mapping bus voltage phasors to PMU
    measurements. Rows are grouped by PMU (file order), each group starting
    with the voltage row followed by the current rows in measured-neighbor
    order. Columns follow the bus file order.

    ``h_angle_v`` (K x N) selects the voltage angle of each PMU bus and
    ``h_delta`` ((m-K) x N) holds the +1/-1 angle-difference rows, one per
    measured line, in the same order as the current rows of ``h``.
    """

    h: np.ndarray
    row_index: tuple[VoltageRow | CurrentRow, ...]
    pmu_row_ranges: tuple[tuple[int, int], ...]
    h_angle_v: np.ndarray
    h_delta: np.ndarray
    bus_index: dict[int, int]
    row_pmu: np.ndarray
    voltage_rows: tuple[int, ...]
    current_rows: tuple[int, ...]

    @property
    def m(self) -> int:
        return self.h.shape[0]

    @property
    def n_buses(self) -> int:
        return self.h.shape[1]

    @property
    def n_pmus(self) -> int:
        return len(self.pmu_row_ranges)

    def rows_of_pmu(self, k: int) -> np.ndarray:
        start, stop = self.pmu_row_ranges[k]
        return np.arange(start, stop, dtype=np.int64)


def _branch_from_obj(obj: dict, pos: int) -> Branch:
    try:
        from_bus = int(obj["from"])
        to_bus = int(obj["to"])
    except (KeyError, TypeError, ValueError) as exc:
        raise NetworkError(f"branch #{pos}: missing or invalid 'from'/'to'") from exc

    has_rx = "r" in obj or "x" in obj
    has_gb = "g" in obj or "b" in obj
    if has_rx and has_gb:
        raise NetworkError(f"branch #{pos}: give either (r, x) or (g, b), not both")
    if has_rx:
        r = float(obj.get("r", 0.0))
        x = float(obj.get("x", 0.0))
        z = complex(r, x)
        if z == 0:
            raise NetworkError(f"branch #{pos}: r and x are both zero")
        y = 1.0 / z
    elif has_gb:
        y = complex(float(obj.get("g", 0.0)), float(obj.get("b", 0.0)))
    else:
        raise NetworkError(f"branch #{pos}: needs (r, x) or (g, b)")
    bs = float(obj.get("bs", 0.0))
    return Branch(from_bus, to_bus, y, bs)


def parse_network(text: str) -> NetworkModel:
    """Parse network-file contents into a validated :class:`NetworkModel`.

    Schema (all electrical quantities per-unit)::

        {"buses": [1, 2, ...],
         "branches": [{"from": 1, "to": 2, "r": 0.0, "x": 0.1, "bs": 0.02},
                      {"from": 1, "to": 3, "g": 1.0, "b": -5.0, "bs": 0.0}],
         "pmus": [{"bus": 2, "measures": [1]}]}

    Branch parameters may be given as impedance (r, x) with y = 1/(r + jx)
    or directly as admittance (g, b); ``bs`` defaults to 0.

    Raises :class:`NetworkError` on schema violations or invariant failures.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise NetworkError("top-level value must be an object")
    for key in ("buses", "branches", "pmus"):
        if key not in doc or not isinstance(doc[key], list):
            raise NetworkError(f"missing or non-list field '{key}'")

    try:
        buses = tuple(int(b) for b in doc["buses"])
    except (TypeError, ValueError) as exc:
        raise NetworkError("bus ids must be integers") from exc

    branches = tuple(
        _branch_from_obj(obj, pos) for pos, obj in enumerate(doc["branches"])
    )

    pmus = []
    for pos, obj in enumerate(doc["pmus"]):
        if not isinstance(obj, dict) or "bus" not in obj:
            raise NetworkError(f"pmu #{pos}: missing 'bus'")
        try:
            bus = int(obj["bus"])
            measures = tuple(int(n) for n in obj.get("measures", []))
        except (TypeError, ValueError) as exc:
            raise NetworkError(f"pmu #{pos}: invalid bus id") from exc
        pmus.append(Pmu(bus, measures))

    return NetworkModel(buses, branches, tuple(pmus))


def load_network(path: str | Path) -> NetworkModel:
    """Read and parse a network file from disk."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise NetworkError(f"cannot read network file {path}: {exc}") from exc
    return parse_network(text)


def network_to_json(net: NetworkModel) -> str:
    """Serialize a model back to the network-file schema (admittance form)."""
    doc = {
        "buses": list(net.buses),
        "branches": [
            {
                "from": br.from_bus,
                "to": br.to_bus,
                "g": br.series_admittance.real,
                "b": br.series_admittance.imag,
                "bs": br.shunt_susceptance,
            }
            for br in net.branches
        ],
        "pmus": [
            {"bus": pmu.bus, "measures": list(pmu.measured_neighbors)}
            for pmu in net.pmus
        ],
    }
    return json.dumps(doc, indent=2)


def build_measurement_system(net: NetworkModel) -> MeasurementSystem:
    """Build the measurement matrices for a validated network.

    Voltage row of the PMU at bus i: ``h[row, i] = 1``. Current row for the
    measured line i -> l: ``h[row, i] = y_il + j*bs_il/2`` and
    ``h[row, l] = -y_il``. The coefficients are taken bit-exactly from the
    branch parameters.
    """
    n = net.n_buses
    k = net.n_pmus
    col = net.bus_index
    params = net.branch_params

    m = sum(1 + len(p.measured_neighbors) for p in net.pmus)
    h = np.zeros((m, n), dtype=np.complex128)
    h_angle_v = np.zeros((k, n), dtype=np.float64)
    h_delta = np.zeros((m - k, n), dtype=np.float64)

    row_index: list[VoltageRow | CurrentRow] = []
    ranges: list[tuple[int, int]] = []
    row_pmu = np.empty(m, dtype=np.int64)
    voltage_rows: list[int] = []
    current_rows: list[int] = []

    row = 0
    drow = 0
    for kk, pmu in enumerate(net.pmus):
        start = row
        i = pmu.bus
        h[row, col[i]] = 1.0
        h_angle_v[kk, col[i]] = 1.0
        row_index.append(VoltageRow(kk, i))
        voltage_rows.append(row)
        row += 1
        for l in pmu.measured_neighbors:
            y, bs = params[(i, l)]
            h[row, col[i]] = y + 0.5j * bs
            h[row, col[l]] = -y
            h_delta[drow, col[i]] = 1.0
            h_delta[drow, col[l]] = -1.0
            row_index.append(CurrentRow(kk, i, l))
            current_rows.append(row)
            row += 1
            drow += 1
        ranges.append((start, row))
        row_pmu[start:row] = kk

    for arr in (h, h_angle_v, h_delta, row_pmu):
        arr.setflags(write=False)

    return MeasurementSystem(
        h=h,
        row_index=tuple(row_index),
        pmu_row_ranges=tuple(ranges),
        h_angle_v=h_angle_v,
        h_delta=h_delta,
        bus_index=dict(col),
        row_pmu=row_pmu,
        voltage_rows=tuple(voltage_rows),
        current_rows=tuple(current_rows),
    )
