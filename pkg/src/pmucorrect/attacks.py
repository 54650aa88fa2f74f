"""State sampling, measurement generation, and the phase-bias attack model.

A GPS-spoofed PMU reports every phasor rotated by a common angle, so the
attack acts on the measurement vector as a block-diagonal rotation: all rows
of PMU ``k`` are multiplied by ``exp(j*alpha_k)``. The transform implemented
by :func:`transform_alternative` maps (possibly spoofed) measurements to the
real vector of voltage angles and line angle differences; the angle
differences are invariant to the attack, which is what makes sparse
identification possible.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .angles import wrap_angle
from .network import MeasurementSystem, NetworkModel, VoltageRow

__all__ = [
    "StateVector",
    "AttackVector",
    "MeasurementVector",
    "AlternativeMeasurements",
    "flat_state",
    "sample_state",
    "generate_measurements",
    "apply_attack",
    "transform_alternative",
    "write_measurements_csv",
    "read_measurements_csv",
]


def _as_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class StateVector:
    """Per-bus complex voltage phasor (per-unit magnitude, radians angle)."""

    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.complex128)
        if x.ndim != 1:
            raise ValueError("state must be a 1-D complex vector")
        if np.any(np.abs(x) == 0):
            raise ValueError("state contains a zero phasor (undefined angle)")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def n_buses(self) -> int:
        return self.x.shape[0]

    @property
    def angles(self) -> np.ndarray:
        return np.angle(self.x)

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.x)


@dataclass(frozen=True)
class AttackVector:
    """Per-PMU phase-angle bias in radians, wrapped to (-pi, pi] on construction."""

    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_1d(wrap_angle(np.asarray(self.alpha, dtype=float)))
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)

    @property
    def n_pmus(self) -> int:
        return self.alpha.shape[0]

    @property
    def support(self) -> frozenset[int]:
        """Indices of spoofed PMUs (nonzero biases)."""
        return frozenset(np.flatnonzero(self.alpha).tolist())

    @property
    def sparsity(self) -> int:
        return int(np.count_nonzero(self.alpha))

    @classmethod
    def zeros(cls, n_pmus: int) -> "AttackVector":
        return cls(np.zeros(n_pmus))


@dataclass(frozen=True)
class MeasurementVector:
    """Complex PMU measurements aligned with ``MeasurementSystem.row_index``."""

    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.complex128)
        if z.ndim != 1:
            raise ValueError("measurement vector must be 1-D")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def m(self) -> int:
        return self.z.shape[0]


@dataclass(frozen=True)
class AlternativeMeasurements:
    """Real angle measurements: per-PMU voltage angles and per-line differences."""

    w_angle_v: np.ndarray
    w_delta: np.ndarray

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([self.w_angle_v, self.w_delta])


def flat_state(n_buses: int, magnitude: float = 1.0) -> StateVector:
    """All buses at ``magnitude`` per-unit, zero angle."""
    return StateVector(np.full(n_buses, magnitude, dtype=np.complex128))


def sample_state(
    base: StateVector,
    sigma_mag: float,
    sigma_ang: float,
    rng_seed=None,
    max_retries: int = 100,
) -> StateVector:
    """Perturb a base state with Gaussian magnitude and angle noise.

    Magnitudes get ``Normal(0, sigma_mag)`` added, angles ``Normal(0,
    sigma_ang)`` (radians). A bus whose sampled magnitude is non-positive is
    resampled, up to ``max_retries`` times. Deterministic for a fixed seed.
    """
    if sigma_mag < 0 or sigma_ang < 0:
        raise ValueError("standard deviations must be non-negative")
    rng = _as_rng(rng_seed)
    mags = base.magnitudes + rng.normal(0.0, sigma_mag, base.n_buses)
    angs = base.angles + rng.normal(0.0, sigma_ang, base.n_buses)
    retries = 0
    bad = mags <= 0
    while bad.any():
        if retries >= max_retries:
            raise ValueError(
                f"could not sample positive magnitudes after {max_retries} retries"
            )
        mags[bad] = base.magnitudes[bad] + rng.normal(0.0, sigma_mag, int(bad.sum()))
        bad = mags <= 0
        retries += 1
    return StateVector(mags * np.exp(1j * angs))


def generate_measurements(
    ms: MeasurementSystem,
    x: StateVector,
    sigma_noise: float = 0.0,
    rng_seed=None,
) -> MeasurementVector:
    """Intact measurements z = H x + e with circular complex Gaussian noise.

    Each noise entry has independent real and imaginary parts of variance
    ``sigma_noise**2 / 2``, so ``E|e_i|^2 = sigma_noise**2``.
    """
    if x.n_buses != ms.n_buses:
        raise ValueError("state length does not match the measurement system")
    z = ms.h @ x.x
    if sigma_noise > 0:
        rng = _as_rng(rng_seed)
        scale = sigma_noise / np.sqrt(2.0)
        z = z + rng.normal(0.0, scale, ms.m) + 1j * rng.normal(0.0, scale, ms.m)
    return MeasurementVector(z)


def apply_attack(
    z: MeasurementVector, alpha: AttackVector, ms: MeasurementSystem
) -> MeasurementVector:
    """Rotate every row of PMU k by exp(j*alpha_k); unspoofed PMUs unchanged."""
    if alpha.n_pmus != ms.n_pmus:
        raise ValueError("attack length does not match the number of PMUs")
    if z.m != ms.m:
        raise ValueError("measurement length does not match the system")
    phases = np.exp(1j * alpha.alpha)
    return MeasurementVector(phases[ms.row_pmu] * z.z)


def transform_alternative(
    z_bar: MeasurementVector, net: NetworkModel, ms: MeasurementSystem
) -> AlternativeMeasurements:
    """Map measurements to voltage angles and line angle differences.

    For the PMU at bus i the voltage-angle entry is the angle of the
    measured voltage phasor. For a measured line i -> l the angle
    difference theta_i - theta_l is recovered from the product of the
    voltage measurement and the conjugated current measurement:

        angle( ((conj(y_il) - j*bs_il/2) * |zV_i|^2 - zV_i * conj(zI_il))
               / conj(y_il) )

    The rotation applied by a spoofed PMU cancels in this product, so the
    angle-difference entries are attack-invariant. All outputs lie in
    (-pi, pi].
    """
    if z_bar.m != ms.m:
        raise ValueError("measurement length does not match the system")
    z = z_bar.z

    v_entries = z[list(ms.voltage_rows)]
    if np.any(v_entries == 0):
        raise ValueError("zero voltage measurement: angle undefined")
    w_angle_v = np.angle(v_entries)

    w_delta = np.empty(len(ms.current_rows))
    for j, row in enumerate(ms.current_rows):
        tag = ms.row_index[row]
        y, bs = net.branch_params[(tag.bus_from, tag.bus_to)]
        zv = z[ms.voltage_rows[tag.pmu]]
        zi = z[row]
        num = (np.conj(y) - 0.5j * bs) * abs(zv) ** 2 - zv * np.conj(zi)
        w_delta[j] = np.angle(num / np.conj(y))

    return AlternativeMeasurements(w_angle_v=w_angle_v, w_delta=w_delta)


_CSV_HEADER = ["row_id", "pmu", "kind", "bus_i", "bus_l", "re", "im"]


def write_measurements_csv(path, z: MeasurementVector, ms: MeasurementSystem) -> None:
    """Write measurements as CSV rows ``row_id, pmu, kind, bus_i, bus_l, re, im``."""
    if z.m != ms.m:
        raise ValueError("measurement length does not match the system")

    def _write(fh):
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for row, (tag, value) in enumerate(zip(ms.row_index, z.z)):
            re, im = repr(float(value.real)), repr(float(value.imag))
            if isinstance(tag, VoltageRow):
                writer.writerow([row, tag.pmu, "V", tag.bus, "", re, im])
            else:
                writer.writerow([row, tag.pmu, "I", tag.bus_from, tag.bus_to, re, im])

    if hasattr(path, "write"):
        _write(path)
    else:
        with open(Path(path), "w", newline="", encoding="utf-8") as fh:
            _write(fh)


def read_measurements_csv(path, ms: MeasurementSystem) -> MeasurementVector:
    """Read a measurement CSV and validate it against the measurement system."""
    if hasattr(path, "read"):
        fh = io.StringIO(path.read())
    else:
        fh = open(Path(path), newline="", encoding="utf-8")
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header!r}")
        z = np.zeros(ms.m, dtype=np.complex128)
        seen = 0
        for record in reader:
            if not record:
                continue
            row = int(record[0])
            if not 0 <= row < ms.m:
                raise ValueError(f"row_id {row} out of range for m={ms.m}")
            tag = ms.row_index[row]
            kind = record[2]
            pmu = int(record[1])
            if pmu != tag.pmu:
                raise ValueError(f"row {row}: PMU {pmu} does not match the network")
            if kind == "V":
                if not isinstance(tag, VoltageRow) or int(record[3]) != tag.bus:
                    raise ValueError(f"row {row}: voltage row mismatch")
            elif kind == "I":
                if (
                    isinstance(tag, VoltageRow)
                    or int(record[3]) != tag.bus_from
                    or int(record[4]) != tag.bus_to
                ):
                    raise ValueError(f"row {row}: current row mismatch")
            else:
                raise ValueError(f"row {row}: unknown kind {kind!r}")
            z[row] = complex(float(record[5]), float(record[6]))
            seen += 1
        if seen != ms.m:
            raise ValueError(f"CSV has {seen} rows, expected {ms.m}")
    finally:
        fh.close()
    return MeasurementVector(z)
