"""Monte Carlo experiment driver, attack generator, and network fixtures.

Mirrors the evaluation protocol: per run, perturb a base state, generate
noisy measurements, spoof a per-zone fraction of PMUs with magnitudes drawn
uniformly around the attack mean and random signs, run the greedy
correction, and record the l-infinity attack-estimation error in degrees.
Everything is a pure function of the spec and its base seed; per-run
generators are derived as hash(seed, run_index).
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .attacks import (
    AttackVector,
    apply_attack,
    flat_state,
    generate_measurements,
    sample_state,
)
from .correction import (
    CorrectionConfig,
    build_projection,
    greedy_correct,
    set_tau,
)
from .network import Branch, NetworkModel, Pmu, build_measurement_system, load_network
from .zones import ZonePartition, compute_zones

__all__ = [
    "ExperimentSpec",
    "RunRecord",
    "ExperimentSummary",
    "generate_attack",
    "run_experiment",
    "generate_synthetic_network",
    "emit_results",
]

DEG = np.pi / 180.0


@dataclass(frozen=True)
class ExperimentSpec:
    """Monte Carlo experiment parameters. Angles are radians internally."""

    network_path: str
    spoof_fraction: float = 0.1
    attack_mean: float = 20.0 * DEG
    runs: int = 100
    seed: int = 0
    sigma_mag: float = 0.01
    sigma_ang: float = 5.73 * DEG
    sigma_noise: float = 0.001
    confidence: float = 0.99
    max_support: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.spoof_fraction <= 1.0:
            raise ValueError("spoof_fraction must lie in [0, 1]")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @classmethod
    def from_json(cls, text: str, base_dir: str | Path | None = None) -> "ExperimentSpec":
        """Parse the CLI spec format (angles in degrees at the boundary)."""
        doc = json.loads(text)
        path = doc["network"]
        if base_dir is not None:
            path = str(Path(base_dir) / path)
        return cls(
            network_path=path,
            spoof_fraction=float(doc.get("spoof_fraction", 0.1)),
            attack_mean=float(doc.get("attack_mean_deg", 20.0)) * DEG,
            runs=int(doc.get("runs", 100)),
            seed=int(doc.get("seed", 0)),
            sigma_mag=float(doc.get("sigma_mag", 0.01)),
            sigma_ang=float(doc.get("sigma_ang_deg", 5.73)) * DEG,
            sigma_noise=float(doc.get("sigma_noise", 0.001)),
            confidence=float(doc.get("confidence", 0.99)),
            max_support=(
                int(doc["max_support"]) if doc.get("max_support") is not None else None
            ),
        )


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def generate_attack(zp: ZonePartition, spec: ExperimentSpec, run_seed) -> AttackVector:
    """Spoof round(fraction * K) PMUs per zone, chosen uniformly at random.

    Magnitudes are Uniform(0.8 mu, 1.2 mu) with mu = attack mean; signs are
    uniform. A zone with at least two PMUs gets at least one spoofed PMU
    whenever the fraction is positive.
    """
    rng = np.random.default_rng(run_seed)
    n_pmus = len(zp.pmu_to_zone)
    alpha = np.zeros(n_pmus)
    mu = spec.attack_mean
    for zone in zp.zones:
        count = _round_half_up(spec.spoof_fraction * zone.pmu_count)
        if spec.spoof_fraction > 0 and zone.pmu_count >= 2:
            count = max(count, 1)
        if count > zone.pmu_count:
            raise ValueError(
                f"spoof count {count} exceeds the zone's {zone.pmu_count} PMUs"
            )
        if count == 0:
            continue
        chosen = rng.choice(np.array(zone.pmu_indices), size=count, replace=False)
        magnitudes = rng.uniform(0.8 * mu, 1.2 * mu, size=count)
        signs = rng.choice(np.array([-1.0, 1.0]), size=count)
        alpha[chosen] = signs * magnitudes
    return AttackVector(alpha)


@dataclass(frozen=True)
class RunRecord:
    """Per-run outcome; attack vectors are kept for metric re-checks."""

    run: int
    linf_error_deg: float
    support_recovered: bool
    converged: bool
    iterations: int
    wall_time_s: float
    alpha_true_deg: tuple[float, ...]
    alpha_hat_deg: tuple[float, ...]


@dataclass(frozen=True)
class ExperimentSummary:
    """Aggregate statistics over the per-run l-infinity errors (degrees)."""

    records: tuple[RunRecord, ...]
    median_deg: float
    std_deg: float
    max_deg: float
    support_recovery_rate: float
    mean_wall_time_s: float

    @property
    def errors_deg(self) -> tuple[float, ...]:
        return tuple(rec.linf_error_deg for rec in self.records)

    @classmethod
    def from_records(cls, records) -> "ExperimentSummary":
        records = tuple(sorted(records, key=lambda rec: rec.run))
        if not records:
            nan = float("nan")
            return cls(records, nan, nan, nan, nan, nan)
        errors = np.array([rec.linf_error_deg for rec in records])
        return cls(
            records=records,
            median_deg=float(np.median(errors)),
            std_deg=float(np.std(errors)),
            max_deg=float(np.max(errors)),
            support_recovery_rate=float(
                np.mean([rec.support_recovered for rec in records])
            ),
            mean_wall_time_s=float(np.mean([rec.wall_time_s for rec in records])),
        )


@dataclass(frozen=True)
class _RunContext:
    spec: ExperimentSpec
    ms: object
    zp: ZonePartition
    proj: object
    tau_noise: float


def _single_run(ctx: _RunContext, run_index: int) -> RunRecord:
    spec = ctx.spec
    rng = np.random.default_rng([spec.seed, run_index])
    t0 = time.perf_counter()

    base = flat_state(ctx.ms.n_buses)
    state = sample_state(base, spec.sigma_mag, spec.sigma_ang, rng)
    z = generate_measurements(ctx.ms, state, spec.sigma_noise, rng)
    attack = generate_attack(ctx.zp, spec, rng)
    z_bar = apply_attack(z, attack, ctx.ms)

    if spec.sigma_noise > 0:
        tau = ctx.tau_noise
    else:
        # noiseless floor: roundoff-level residue still terminates the loop
        tau = (1e-10 * float(np.linalg.norm(z_bar.z))) ** 2
    cfg = CorrectionConfig(tau=tau, max_support=spec.max_support)
    result = greedy_correct(z_bar, ctx.ms, ctx.zp, ctx.proj, cfg)

    err = float(np.max(np.abs(result.alpha_hat.alpha - attack.alpha))) / DEG
    return RunRecord(
        run=run_index,
        linf_error_deg=err,
        support_recovered=result.alpha_hat.support == attack.support,
        converged=result.converged,
        iterations=len(result.support_trace),
        wall_time_s=time.perf_counter() - t0,
        alpha_true_deg=tuple(attack.alpha / DEG),
        alpha_hat_deg=tuple(result.alpha_hat.alpha / DEG),
    )


_WORKER_BLAS_LIMIT = None


def _init_worker():
    # zone blocks are tiny; BLAS thread pools only add spin-wait overhead
    global _WORKER_BLAS_LIMIT
    _WORKER_BLAS_LIMIT = threadpool_limits(limits=1)


def run_experiment(
    spec: ExperimentSpec,
    workers: int = 1,
    net: NetworkModel | None = None,
) -> ExperimentSummary:
    """Run the Monte Carlo protocol; deterministic given the spec.

    ``workers > 1`` fans runs out to a process pool; aggregation is keyed by
    run index, so the summary matches sequential execution exactly.
    """
    if net is None:
        net = load_network(spec.network_path)
    ms = build_measurement_system(net)
    zp = compute_zones(net)
    proj = build_projection(ms, zp)
    tau_noise = set_tau(proj, spec.sigma_noise, spec.confidence)
    ctx = _RunContext(spec=spec, ms=ms, zp=zp, proj=proj, tau_noise=tau_noise)

    indices = range(spec.runs)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker) as pool:
            records = list(pool.map(partial(_single_run, ctx), indices))
    else:
        with threadpool_limits(limits=1):
            records = [_single_run(ctx, i) for i in indices]
    return ExperimentSummary.from_records(records)


def generate_synthetic_network(
    zone_sizes,
    buses_per_zone=None,
    rng_seed=0,
    inter_zone_branches: bool = True,
) -> NetworkModel:
    """Random network whose measurement graph has exactly the requested zones.

    Each zone is grown as a random tree: the zone's PMU buses are linked
    first (each connector line measured by one of its PMU endpoints), then
    every remaining bus attaches to a random PMU bus via a measured line.
    Optional unmeasured branches join consecutive zones, so zones are a
    property of the measurement graph, not of the topology. Line impedances
    are drawn within a decade, keeping the zone matrices well conditioned.
    """
    zone_sizes = [int(k) for k in zone_sizes]
    if not zone_sizes or any(k < 1 for k in zone_sizes):
        raise ValueError("every zone needs at least one PMU")
    if buses_per_zone is None:
        buses = [2 * k for k in zone_sizes]
    elif np.isscalar(buses_per_zone):
        buses = [int(buses_per_zone)] * len(zone_sizes)
    else:
        buses = [int(b) for b in buses_per_zone]
    if len(buses) != len(zone_sizes):
        raise ValueError("buses_per_zone length does not match zone_sizes")
    for k, b in zip(zone_sizes, buses):
        if b < k:
            raise ValueError(f"zone with {k} PMUs cannot fit in {b} buses")

    rng = np.random.default_rng(rng_seed)
    all_buses: list[int] = []
    branches: list[Branch] = []
    measured: dict[int, list[int]] = {}
    zone_bus_ids: list[list[int]] = []

    def random_branch(a: int, b: int) -> Branch:
        x = rng.uniform(0.05, 0.3)
        r = x * rng.uniform(0.05, 0.3)
        bs = rng.uniform(0.0, 0.1)
        return Branch(a, b, 1.0 / complex(r, x), bs)

    offset = 0
    for k, b in zip(zone_sizes, buses):
        ids = list(range(offset + 1, offset + b + 1))
        offset += b
        all_buses.extend(ids)
        zone_bus_ids.append(ids)
        pmu_buses = sorted(rng.choice(ids, size=k, replace=False).tolist())
        for bus in pmu_buses:
            measured.setdefault(bus, [])
        for j in range(1, k):
            other = pmu_buses[int(rng.integers(0, j))]
            branches.append(random_branch(pmu_buses[j], other))
            observer = pmu_buses[j] if rng.integers(0, 2) else other
            target = other if observer == pmu_buses[j] else pmu_buses[j]
            measured[observer].append(target)
        for bus in ids:
            if bus in measured:
                continue
            host = pmu_buses[int(rng.integers(0, k))]
            branches.append(random_branch(host, bus))
            measured[host].append(bus)

    if inter_zone_branches and len(zone_bus_ids) > 1:
        for g in range(len(zone_bus_ids) - 1):
            a = int(rng.choice(zone_bus_ids[g]))
            b = int(rng.choice(zone_bus_ids[g + 1]))
            branches.append(random_branch(a, b))

    pmus = tuple(
        Pmu(bus, tuple(sorted(neighbors))) for bus, neighbors in sorted(measured.items())
    )
    return NetworkModel(tuple(all_buses), tuple(branches), pmus)


_CSV_COLUMNS = [
    "run",
    "linf_error_deg",
    "support_recovered",
    "converged",
    "iterations",
    "wall_time_s",
]


def emit_results(summary: ExperimentSummary, out_prefix: str | Path):
    """Write per-run rows to ``<prefix>_runs.csv`` and aggregates to JSON.

    CSV column order is fixed: run, linf_error_deg, support_recovered,
    converged, iterations, wall_time_s. Returns (csv_path, json_path).
    """
    out_prefix = Path(out_prefix)
    csv_path = out_prefix.with_name(out_prefix.name + "_runs.csv")
    json_path = out_prefix.with_name(out_prefix.name + "_summary.json")
    try:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(",".join(_CSV_COLUMNS) + "\n")
            for rec in summary.records:
                fh.write(
                    f"{rec.run},{rec.linf_error_deg!r},{int(rec.support_recovered)},"
                    f"{int(rec.converged)},{rec.iterations},{rec.wall_time_s!r}\n"
                )
        def scrub(value):
            return None if np.isnan(value) else value

        payload = {
            "runs": len(summary.records),
            "median_linf_deg": scrub(summary.median_deg),
            "std_linf_deg": scrub(summary.std_deg),
            "max_linf_deg": scrub(summary.max_deg),
            "support_recovery_rate": scrub(summary.support_recovery_rate),
            "mean_wall_time_s": scrub(summary.mean_wall_time_s),
            "errors_deg": list(summary.errors_deg),
        }
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
    except OSError as exc:
        raise OSError(f"cannot write results next to {out_prefix}: {exc}") from exc
    return csv_path, json_path
