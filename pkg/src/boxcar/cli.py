"""Command line entry point: ``boxcar simulate | study | reference | sweep | dist``.

Exit status is 0 on success, 2 when a run recorded anomalies or aborted, and 1
on errors (bad arguments, unreadable files).
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .flat import flat_distance
from .measure import canonicalize, read_measure_csv, write_measure_csv
from .models import test_case

EXIT_OK, EXIT_ERROR, EXIT_ANOMALY = 0, 1, 2


def _long_run_guard(args, I):
    if I > harness.LONG_RUN_NODES and not args.long_run:
        raise ValueError(f"I={I} exceeds {harness.LONG_RUN_NODES} nodes; rerun with --long-run")


def _default_metric(args):
    if args.metric is not None:
        return args.metric
    return "none" if args.test_case == 3 and args.reference is None else "flat"


def cmd_simulate(args):
    _long_run_guard(args, max(args.initial_nodes, args.boundary_cohorts))
    config = harness.SimulationConfig(args.scheme, args.test_case, args.initial_nodes, args.boundary_cohorts,
                                      args.euler_substeps, args.t_final, _default_metric(args), args.reference)
    case = test_case(config.test_case)
    measure, report, e_x = harness.simulate(config, case, on_anomaly=args.on_anomaly)
    e_flat, e_l1, bias = harness.score(config, measure, case)
    print(f"scheme={config.scheme} test_case={config.test_case} I={config.I} K={config.K} J={config.J} "
          f"T={config.T:g} runtime_ms={1000 * report.runtime_s:.3f}")
    print(f"e_x={e_x:.6e}")
    if e_flat is not None:
        print(f"e_flat={e_flat:.6e}" + (f" bias_bound={bias:.3e}" if bias is not None else ""))
    if e_l1 is not None:
        print(f"e_l1={e_l1:.6e}")
    if report.anomalies:
        for flag, t in sorted(report.anomalies.items(), key=lambda kv: kv[1]):
            print(f"anomaly {getattr(flag, 'value', flag)} first at t={t:.6g}")
    if report.aborted:
        print(f"aborted: {report.abort_reason} at t={report.abort_time:.6g}")
    if args.out and measure is not None:
        write_measure_csv(measure, args.out, metadata={"scheme": config.scheme, "test_case": config.test_case,
                                                       "I": config.I, "K": config.K, "J": config.J,
                                                       "T": config.T})
    return EXIT_ANOMALY if (report.anomalies or report.aborted) else EXIT_OK


def cmd_study(args):
    _long_run_guard(args, args.initial_nodes << args.doublings)
    base = harness.SimulationConfig(args.scheme, args.test_case, args.initial_nodes, 1, 1, args.t_final,
                                    args.metric or ("flat" if args.test_case == 3 else "both"), args.reference)
    rows = harness.convergence_study(base, args.doublings, args.policy, n_jobs=args.jobs)
    text = harness.rows_to_csv(rows, args.out)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_ANOMALY if any(r.anomalies for r in rows) else EXIT_OK


def cmd_reference(args):
    harness.generate_reference(args.out, args.test_case, args.nodes, args.substeps, args.boundary_cohorts,
                               args.t_final, allow_long_run=args.long_run)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_sweep(args):
    reference = read_measure_csv(args.reference)
    rows = harness.stability_sweep(reference, schemes=args.schemes)
    lines = ["scheme,I,K,J,error,anomalies"]
    for r in rows:
        err = "" if r.error is None else repr(r.error)
        lines.append(f"{r.scheme},{r.I},{r.I},{r.J},{err},{';'.join(r.anomalies)}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_ANOMALY if any(r.anomalies for r in rows) else EXIT_OK


def cmd_dist(args):
    a = canonicalize(read_measure_csv(args.a))
    b = canonicalize(read_measure_csv(args.b))
    print(f"{flat_distance(a, b).distance:.12g}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="boxcar", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one scheme and score it")
    s.add_argument("--scheme", required=True, choices=harness.SCHEMES)
    s.add_argument("--test-case", type=int, required=True, choices=(1, 2, 3))
    s.add_argument("--initial-nodes", type=int, required=True)
    s.add_argument("--boundary-cohorts", type=int, required=True)
    s.add_argument("--euler-substeps", type=int, required=True)
    s.add_argument("--t-final", type=float, default=1.0)
    s.add_argument("--metric", choices=("flat", "l1", "both", "none"))
    s.add_argument("--reference", help="reference measure CSV (required to score test case 3)")
    s.add_argument("--on-anomaly", choices=("record", "abort"), default="record")
    s.add_argument("--out", help="write the final measure here")
    s.add_argument("--long-run", action="store_true", help="allow runs above 2^17 nodes")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("study", help="convergence study over doubling resolutions")
    s.add_argument("--scheme", required=True, choices=harness.SCHEMES)
    s.add_argument("--test-case", type=int, required=True, choices=(1, 2, 3))
    s.add_argument("--initial-nodes", type=int, default=16)
    s.add_argument("--doublings", type=int, required=True)
    s.add_argument("--policy", default="K=I/4,J=4")
    s.add_argument("--t-final", type=float, default=1.0)
    s.add_argument("--metric", choices=("flat", "l1", "both"))
    s.add_argument("--reference")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")
    s.add_argument("--long-run", action="store_true")
    s.set_defaults(func=cmd_study)

    s = sub.add_parser("reference", help="fine simplified-EBT reference measure")
    s.add_argument("--test-case", type=int, default=3, choices=(1, 2, 3))
    s.add_argument("--nodes", type=int, required=True)
    s.add_argument("--boundary-cohorts", type=int, help="defaults to --nodes")
    s.add_argument("--substeps", type=int, required=True)
    s.add_argument("--t-final", type=float, default=1.0)
    s.add_argument("--out", required=True)
    s.add_argument("--long-run", action="store_true")
    s.set_defaults(func=cmd_reference)

    s = sub.add_parser("sweep", help="boundary-stress sweep on test case 3")
    s.add_argument("--reference", required=True)
    s.add_argument("--schemes", nargs="+", default=list(harness.SCHEMES), choices=harness.SCHEMES)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("dist", help="flat distance between two measure files")
    s.add_argument("a")
    s.add_argument("b")
    s.set_defaults(func=cmd_dist)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, LookupError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
