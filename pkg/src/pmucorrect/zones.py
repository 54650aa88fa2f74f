"""Zones of the measurement graph and attack-identifiability analysis.

The measurement graph is the union, over PMUs, of the measured lines plus
the PMU bus itself. Its connected components ("zones") are the units over
which PMU measurements share latent state: a whole-zone rotation of the
state is indistinguishable from a common phase bias on the zone's PMUs.
That observation yields both the all-ones null-space basis of the
angle-difference matrix and the per-zone spoofed-PMU budgets below, along
with a constructive recipe for unidentifiable attacks one past the budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .angles import wrap_angle
from .attacks import AttackVector, StateVector
from .network import MeasurementSystem, NetworkModel

__all__ = [
    "Zone",
    "ZonePartition",
    "NullBasis",
    "ZoneBudgets",
    "IdentifiabilityCheck",
    "UnidentifiableAttack",
    "compute_zones",
    "null_space_basis",
    "zone_thresholds",
    "check_identifiable",
    "construct_unidentifiable_attack",
]


class _UnionFind:
    """Union-find over a fixed element set, with path compression."""

    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while a != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


@dataclass(frozen=True)
class Zone:
    """One connected component of the measurement graph."""

    vertex_set: tuple[int, ...]
    pmu_indices: tuple[int, ...]
    bus_count: int
    pmu_count: int
    measurement_count: int


@dataclass(frozen=True)
class ZonePartition:
    """Zones of a network, ordered by their smallest contained bus id."""

    zones: tuple[Zone, ...]
    pmu_to_zone: dict[int, int]
    bus_to_zone: dict[int, int]

    @property
    def n_zones(self) -> int:
        return len(self.zones)

    @property
    def pmu_counts(self) -> tuple[int, ...]:
        return tuple(z.pmu_count for z in self.zones)

    @property
    def covered_buses(self) -> tuple[int, ...]:
        """Covered buses in zone-major order (ascending within each zone)."""
        out: list[int] = []
        for z in self.zones:
            out.extend(z.vertex_set)
        return tuple(out)


def compute_zones(net: NetworkModel) -> ZonePartition:
    """Connected components of the measurement graph, via union-find.

    A PMU that measures no lines forms a singleton zone containing only its
    own bus.
    """
    covered: list[int] = []
    seen: set[int] = set()
    for pmu in net.pmus:
        for b in (pmu.bus, *pmu.measured_neighbors):
            if b not in seen:
                seen.add(b)
                covered.append(b)
    covered.sort()
    pos = {b: i for i, b in enumerate(covered)}

    uf = _UnionFind(len(covered))
    for pmu in net.pmus:
        for nbr in pmu.measured_neighbors:
            uf.union(pos[pmu.bus], pos[nbr])

    groups: dict[int, list[int]] = {}
    for b in covered:
        groups.setdefault(uf.find(pos[b]), []).append(b)
    # deterministic order: by smallest bus id in the component
    components = sorted(groups.values(), key=lambda buses: buses[0])

    zones: list[Zone] = []
    pmu_to_zone: dict[int, int] = {}
    bus_to_zone: dict[int, int] = {}
    for gamma, buses in enumerate(components):
        bus_set = set(buses)
        pmu_idx = tuple(
            k for k, pmu in enumerate(net.pmus) if pmu.bus in bus_set
        )
        m_gamma = sum(1 + len(net.pmus[k].measured_neighbors) for k in pmu_idx)
        zones.append(
            Zone(
                vertex_set=tuple(buses),
                pmu_indices=pmu_idx,
                bus_count=len(buses),
                pmu_count=len(pmu_idx),
                measurement_count=m_gamma,
            )
        )
        for k in pmu_idx:
            pmu_to_zone[k] = gamma
        for b in buses:
            bus_to_zone[b] = gamma

    return ZonePartition(tuple(zones), pmu_to_zone, bus_to_zone)


@dataclass(frozen=True)
class NullBasis:
    """Block all-ones basis of the null space of the angle-difference matrix.

    ``b_delta`` has one column per zone; rows follow ``covered_buses``
    (zone-major order). Block gamma is a ones-vector over zone gamma's
    buses. Buses not touched by any measurement carry no columns of the
    angle-difference matrix and are excluded from this bookkeeping.
    """

    covered_buses: tuple[int, ...]
    b_delta: np.ndarray

    @property
    def n_zones(self) -> int:
        return self.b_delta.shape[1]

    def covered_columns(self, ms: MeasurementSystem) -> np.ndarray:
        """Column indices of the covered buses within the full matrices."""
        return np.array([ms.bus_index[b] for b in self.covered_buses], dtype=np.int64)


def null_space_basis(ms: MeasurementSystem, zp: ZonePartition) -> NullBasis:
    """Assemble the per-zone ones blocks and verify they annihilate h_delta."""
    covered = zp.covered_buses
    n_cov = len(covered)
    b_delta = np.zeros((n_cov, zp.n_zones))
    offset = 0
    for gamma, zone in enumerate(zp.zones):
        b_delta[offset : offset + zone.bus_count, gamma] = 1.0
        offset += zone.bus_count

    basis = NullBasis(covered_buses=covered, b_delta=b_delta)
    cols = basis.covered_columns(ms)
    product = ms.h_delta[:, cols] @ b_delta
    if product.size and np.max(np.abs(product)) != 0.0:
        raise AssertionError("null-space basis does not annihilate h_delta")
    b_delta.setflags(write=False)
    return basis


def _budget(k: int) -> int:
    # ceil(k/2 - 1) computed exactly in integers; equals (k-1)//2 for k >= 1
    return (k - 1) // 2


@dataclass(frozen=True)
class ZoneBudgets:
    """Identifiable spoofed-PMU budgets, per zone and network-wide."""

    per_zone: tuple[int, ...]
    global_budget: int
    k_min: int


def zone_thresholds(zp: ZonePartition) -> ZoneBudgets:
    """Max spoofed-PMU counts guaranteed identifiable (per zone and globally).

    A zone with K PMUs tolerates up to ceil(K/2 - 1) spoofed PMUs; the
    network-wide budget uses the smallest zone.
    """
    if zp.n_zones == 0:
        raise ValueError("no zones: the network has no PMUs")
    per_zone = tuple(_budget(z.pmu_count) for z in zp.zones)
    k_min = min(zp.pmu_counts)
    return ZoneBudgets(per_zone=per_zone, global_budget=_budget(k_min), k_min=k_min)


@dataclass(frozen=True)
class IdentifiabilityCheck:
    """Outcome of the per-zone sufficient condition for identifiability.

    ``identifiable_by_thm2`` is True when every zone's spoofed-PMU count is
    within its budget. The condition is sufficient, not necessary: a False
    here does not prove the attack unidentifiable.
    """

    identifiable_by_thm2: bool
    per_zone_counts: tuple[int, ...]
    per_zone_budgets: tuple[int, ...]


def check_identifiable(alpha: AttackVector, zp: ZonePartition) -> IdentifiabilityCheck:
    """Check each zone's spoofed count against its identifiability budget."""
    budgets = zone_thresholds(zp)
    support = alpha.support
    counts = tuple(
        sum(1 for k in zone.pmu_indices if k in support) for zone in zp.zones
    )
    ok = all(c <= b for c, b in zip(counts, budgets.per_zone))
    return IdentifiabilityCheck(
        identifiable_by_thm2=ok,
        per_zone_counts=counts,
        per_zone_budgets=budgets.per_zone,
    )


@dataclass(frozen=True)
class UnidentifiableAttack:
    """A constructed attack plus the alias (attack, state) pair that mimics it.

    Spoofing ``alpha`` on state x produces exactly the same measurements as
    spoofing ``alpha_bar`` on the state with zone ``target_zone`` rotated by
    ``shift`` radians, and ``alpha_bar`` is at least as sparse.
    """

    alpha: AttackVector
    alpha_bar: AttackVector
    target_zone: int
    shift: float
    zone_buses: tuple[int, ...]
    spoofed_pmus: tuple[int, ...]

    def transform_state(self, x: StateVector, net: NetworkModel) -> StateVector:
        """Rotate the target zone's bus phasors by the shift angle."""
        out = np.array(x.x, dtype=np.complex128)
        cols = [net.bus_index[b] for b in self.zone_buses]
        out[cols] *= np.exp(1j * self.shift)
        return StateVector(out)


def construct_unidentifiable_attack(
    zp: ZonePartition, target_zone: int, a: float
) -> UnidentifiableAttack:
    """Build the witness attack one past the target zone's budget.

    Sets ``budget + 1`` PMUs of the target zone (the lowest-indexed ones) to
    the common shift ``a``; the alias subtracts ``a`` from every PMU of the
    zone, leaving ``K - budget - 1 <= budget + 1`` nonzeros, and rotates the
    zone's state by ``a``.
    """
    if not 0 <= target_zone < zp.n_zones:
        raise ValueError(f"zone index {target_zone} out of range")
    zone = zp.zones[target_zone]
    if zone.pmu_count < 1:
        raise ValueError("target zone has no PMUs")
    a = wrap_angle(float(a))
    if a == 0.0:
        raise ValueError("shift wraps to zero: degenerate construction")

    kappa = _budget(zone.pmu_count) + 1
    n_pmus = len(zp.pmu_to_zone)
    alpha = np.zeros(n_pmus)
    alpha_bar = np.zeros(n_pmus)
    spoofed = zone.pmu_indices[:kappa]
    alpha[list(spoofed)] = a
    alpha_bar[list(zone.pmu_indices)] = wrap_angle(
        alpha[list(zone.pmu_indices)] - a
    )

    attack = AttackVector(alpha)
    alias = AttackVector(alpha_bar)
    if alias.sparsity > attack.sparsity:
        raise AssertionError("alias attack ended up denser than the original")
    return UnidentifiableAttack(
        alpha=attack,
        alpha_bar=alias,
        target_zone=target_zone,
        shift=a,
        zone_buses=zone.vertex_set,
        spoofed_pmus=spoofed,
    )
