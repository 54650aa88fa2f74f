"""Command-line interface.

Subcommands: ``analyze`` (zones and identifiability budgets), ``simulate``
(Monte Carlo experiment from a spec file), ``correct`` (estimate and remove
phase biases from a measurement CSV), ``witness`` (construct an
unidentifiable attack for a zone), and ``gen-net`` (synthetic multi-zone
network fixture). Angles cross this boundary in degrees.

Exit codes: 0 success, 2 validation error, 3 solver non-convergence in
``correct``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .attacks import read_measurements_csv, write_measurements_csv
from .correction import (
    CorrectionConfig,
    build_projection,
    greedy_correct,
    set_tau,
)
from .experiment import (
    DEG,
    ExperimentSpec,
    emit_results,
    generate_synthetic_network,
    run_experiment,
)
from .network import NetworkError, build_measurement_system, load_network, network_to_json
from .zones import compute_zones, construct_unidentifiable_attack, zone_thresholds

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NO_CONVERGENCE = 3


def _analyze_payload(net) -> dict:
    zp = compute_zones(net)
    budgets = zone_thresholds(zp)
    return {
        "n_buses": net.n_buses,
        "n_pmus": net.n_pmus,
        "n_zones": zp.n_zones,
        "k_min": budgets.k_min,
        "global_budget": budgets.global_budget,
        "zones": [
            {
                "buses": list(zone.vertex_set),
                "pmu_indices": list(zone.pmu_indices),
                "pmu_buses": [net.pmus[k].bus for k in zone.pmu_indices],
                "k": zone.pmu_count,
                "measurements": zone.measurement_count,
                "budget": budgets.per_zone[g],
            }
            for g, zone in enumerate(zp.zones)
        ],
    }


def _cmd_analyze(args) -> int:
    net = load_network(args.network)
    print(json.dumps(_analyze_payload(net), indent=2))
    return EXIT_OK


def _cmd_simulate(args) -> int:
    spec_path = Path(args.spec)
    spec = ExperimentSpec.from_json(
        spec_path.read_text(encoding="utf-8"), base_dir=spec_path.parent
    )
    summary = run_experiment(spec, workers=args.workers)
    csv_path, json_path = emit_results(summary, args.out_prefix)
    print(
        json.dumps(
            {
                "median_linf_deg": summary.median_deg,
                "std_linf_deg": summary.std_deg,
                "max_linf_deg": summary.max_deg,
                "support_recovery_rate": summary.support_recovery_rate,
                "csv": str(csv_path),
                "summary": str(json_path),
            },
            indent=2,
        )
    )
    return EXIT_OK


def _cmd_correct(args) -> int:
    net = load_network(args.network)
    ms = build_measurement_system(net)
    zp = compute_zones(net)
    proj = build_projection(ms, zp)
    z_bar = read_measurements_csv(args.measurements, ms)

    if args.tau is not None:
        tau = args.tau
    else:
        tau = set_tau(proj, args.sigma, args.confidence)
        if args.sigma == 0:
            tau = (1e-10 * float(np.linalg.norm(z_bar.z))) ** 2
    cfg = CorrectionConfig(tau=tau, max_support=args.max_support)
    result = greedy_correct(z_bar, ms, zp, proj, cfg)

    payload = {
        "alpha_hat_degrees": list(result.alpha_hat.alpha / DEG),
        "support": list(result.support),
        "residue_trace": list(result.residue_trace),
        "converged": result.converged,
    }
    out_json = Path(args.out_json) if args.out_json else Path(args.measurements).with_suffix(".result.json")
    out_csv = Path(args.out_csv) if args.out_csv else Path(args.measurements).with_suffix(".corrected.csv")
    out_json.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    write_measurements_csv(out_csv, result.z_hat, ms)
    print(json.dumps(payload, indent=2))
    if not result.converged:
        print("warning: residue threshold not met", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _cmd_witness(args) -> int:
    net = load_network(args.network)
    zp = compute_zones(net)
    witness = construct_unidentifiable_attack(zp, args.zone, args.shift * DEG)
    payload = {
        "target_zone": witness.target_zone,
        "shift_degrees": witness.shift / DEG,
        "spoofed_pmu_indices": list(witness.spoofed_pmus),
        "spoofed_pmu_buses": [net.pmus[k].bus for k in witness.spoofed_pmus],
        "zone_buses": list(witness.zone_buses),
        "alpha_degrees": list(witness.alpha.alpha / DEG),
        "alpha_bar_degrees": list(witness.alpha_bar.alpha / DEG),
    }
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def _cmd_gen_net(args) -> int:
    net = generate_synthetic_network(
        args.zone_sizes,
        buses_per_zone=args.buses_per_zone,
        rng_seed=args.seed,
    )
    text = network_to_json(net)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(json.dumps(_analyze_payload(net), indent=2))
    else:
        print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmucorrect",
        description="Simulate, analyze, and correct GPS-spoofing attacks on PMU networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="report zones and identifiability budgets")
    p.add_argument("network", help="network JSON file")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("simulate", help="run a Monte Carlo experiment from a spec file")
    p.add_argument("spec", help="experiment spec JSON file")
    p.add_argument("--out-prefix", default="experiment", help="output file prefix")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("correct", help="correct spoofed measurements from a CSV")
    p.add_argument("network", help="network JSON file")
    p.add_argument("measurements", help="measurement CSV file")
    p.add_argument("--sigma", type=float, default=0.001, help="noise level (p.u.)")
    p.add_argument("--confidence", type=float, default=0.99, help="threshold confidence")
    p.add_argument("--tau", type=float, default=None, help="explicit residue threshold")
    p.add_argument("--max-support", type=int, default=None, help="support size cap")
    p.add_argument("--out-json", default=None, help="result JSON path")
    p.add_argument("--out-csv", default=None, help="corrected measurement CSV path")
    p.set_defaults(func=_cmd_correct)

    p = sub.add_parser("witness", help="construct an unidentifiable attack for a zone")
    p.add_argument("network", help="network JSON file")
    p.add_argument("--zone", type=int, required=True, help="target zone index (0-based)")
    p.add_argument("--shift", type=float, required=True, help="common shift in degrees")
    p.set_defaults(func=_cmd_witness)

    p = sub.add_parser("gen-net", help="generate a synthetic multi-zone network")
    p.add_argument("zone_sizes", type=int, nargs="+", help="PMUs per zone")
    p.add_argument(
        "--buses-per-zone",
        type=int,
        nargs="+",
        default=None,
        help="buses per zone (default: twice the PMU count)",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default=None, help="write network JSON here")
    p.set_defaults(func=_cmd_gen_net)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (NetworkError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
