"""qtopo command line.

    qtopo ham NETWORK
    qtopo ltd NETWORK NOMINAL [--tau-min T]
    qtopo si NETWORK NOMINAL [--delta D] [--channel C] [--tau-min T]
    qtopo sweep --axis {A,B} [--steps N] [--regime R ...]
    qtopo advise CHAIN [--csv PATH]
    qtopo dynamics LAYOUT REFERENCE PULSE [--truncation D] [--dt DT]

Machine-readable output goes to --output (or stdout); a one-line summary goes
to stderr. Exit codes: 0 ok, 2 invalid input, 3 numerical failure, 4 capacity.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from ._parallel import default_jobs
from .errors import CapacityError, NumericalError, QTopoError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_CAPACITY = 0, 2, 3, 4


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_ham(args) -> int:
    from .capnet import load_network
    from .hamiltonian import directed_coupling_matrix, dump_hamiltonian, hamiltonian_from_network

    h = hamiltonian_from_network(load_network(args.network))
    _emit(dump_hamiltonian(h, directed_coupling_matrix(h)) + "\n", args.output)
    _say(f"ham: {h.size} modes, frequencies {', '.join(f'{f:.4f}' for f in h.frequencies)} GHz")
    return EXIT_OK


def cmd_ltd(args) -> int:
    from .capnet import load_network
    from .hamiltonian import hamiltonian_from_network
    from .topology import analyze_topology, load_nominal

    nominal = load_nominal(args.nominal)
    report = analyze_topology(hamiltonian_from_network(load_network(args.network)), nominal, args.tau_min)
    _emit(report.to_json() + "\n", args.output)
    _say(f"ltd: {report.ltd:.4f} (weighted {report.ltd_weighted:.4f}), "
         f"+{len(report.parasitic_edges)} / -{len(report.missing_edges)} edges")
    return EXIT_OK


def cmd_si(args) -> int:
    from .capnet import load_network
    from .sensitivity import si_report
    from .topology import load_nominal

    report = si_report(load_network(args.network), load_nominal(args.nominal), args.tau_min,
                       args.delta, args.channel, jobs=args.jobs)
    _emit(report.to_json() + "\n", args.output)
    _say(f"si: total {float(sum(report.si)):.6g} over {len(report.parasitic_edges)} parasitic edges")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .dynamics import bench_pulses
    from .geomsweep import run_sweep, sweep_csv, sweep_json

    regimes = tuple(args.regime) if args.regime else None
    pulses = bench_pulses(regimes) if regimes else bench_pulses()
    records = run_sweep(args.axis, args.steps, pulses, tau_min=args.tau_min, delta=args.delta,
                        d=args.truncation, jobs=args.jobs)
    stats = sweep_json(records, regimes or ("short", "medium", "long", "overdrive")) + "\n"
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"sweep_{args.axis}.csv").write_text(sweep_csv(records))
        (out / f"sweep_{args.axis}.json").write_text(stats)
    else:
        sys.stdout.write(sweep_csv(records))
    failed = sum(r.error is not None for r in records)
    _say(f"sweep {args.axis}: {len(records)} steps, {failed} failed, "
         f"LTD range [{min(r.ltd for r in records):.3f}, {max(r.ltd for r in records):.3f}]")
    return EXIT_OK


def cmd_advise(args) -> int:
    from .advisor import DecisionRules, advise, load_chain, table_csv, table_json

    spec = load_chain(args.chain)
    rules = DecisionRules.from_dict(spec.get("rules", {}))
    table = advise(spec, rules, jobs=args.jobs, tau_min=args.tau_min, d=args.truncation)
    _emit(table_json(table, rules) + "\n", args.output)
    if args.csv:
        Path(args.csv).write_text(table_csv(table))
    for row in table:
        _say(f"{row.edge_id}: {row.decision}")
    return EXIT_OK


def cmd_dynamics(args) -> int:
    from .capnet import load_network
    from .dynamics import load_pulse, relative_infidelity
    from .hamiltonian import hamiltonian_from_network

    layout = hamiltonian_from_network(load_network(args.layout))
    reference = hamiltonian_from_network(load_network(args.reference))
    pulse = load_pulse(args.pulse)
    result = relative_infidelity(layout, reference, pulse, d=args.truncation, frame=args.frame, dt=args.dt)
    _emit(_dump(result.to_dict()), args.output)
    _say(f"dynamics {pulse.pulse_id}: 1 - F_rel = {result.relative_infidelity:.6g}, "
         f"leakage {result.leakage:.3g}")
    return EXIT_OK


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    from .dynamics import DEFAULT_TRUNCATION, REGIMES
    from .geomsweep import CALIBRATION_VERSION
    from .sensitivity import CHANNELS, DEFAULT_DELTA
    from .topology import DEFAULT_TAU_MIN

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=_positive_int, default=default_jobs(),
                        help="worker processes (default: logical cores)")
    common.add_argument("-o", "--output", help="output file (directory for sweep); default stdout")

    tau = argparse.ArgumentParser(add_help=False)
    tau.add_argument("--tau-min", type=float, default=DEFAULT_TAU_MIN)

    trunc = argparse.ArgumentParser(add_help=False)
    trunc.add_argument("--truncation", type=int, default=DEFAULT_TRUNCATION, help="Fock levels per mode")

    parser = argparse.ArgumentParser(prog="qtopo", description="Layout topology distortion toolkit.")
    parser.add_argument("--version", action="version",
                        version=f"qtopo {__version__} (calibration {CALIBRATION_VERSION})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ham", parents=[common], help="effective Hamiltonian from a capacitance network")
    p.add_argument("network")
    p.set_defaults(func=cmd_ham)

    p = sub.add_parser("ltd", parents=[common, tau], help="logical topology distortion report")
    p.add_argument("network")
    p.add_argument("nominal")
    p.set_defaults(func=cmd_ltd)

    p = sub.add_parser("si", parents=[common, tau], help="sensitivity index per node")
    p.add_argument("network")
    p.add_argument("nominal")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.add_argument("--channel", choices=CHANNELS, default=CHANNELS[0])
    p.set_defaults(func=cmd_si)

    p = sub.add_parser("sweep", parents=[common, tau, trunc], help="synthetic geometry sweep")
    p.add_argument("--axis", choices=("A", "B"), required=True)
    p.add_argument("--steps", type=int, default=9)
    p.add_argument("--regime", choices=REGIMES, action="append",
                   help="restrict bench pulses to a regime (repeatable)")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("advise", parents=[common, tau, trunc], help="per-edge assessment table")
    p.add_argument("chain")
    p.add_argument("--csv", help="also write the aligned-column table here")
    p.set_defaults(func=cmd_advise)

    p = sub.add_parser("dynamics", parents=[common, trunc], help="relative infidelity of two layouts")
    p.add_argument("layout")
    p.add_argument("reference")
    p.add_argument("pulse")
    p.add_argument("--dt", type=float, default=None, help="time step in ns (default: automatic)")
    p.add_argument("--frame", choices=("rotating", "lab"), default="rotating")
    p.set_defaults(func=cmd_dynamics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        _say(f"error: {exc}")
        return EXIT_CAPACITY
    except NumericalError as exc:
        _say(f"error: {exc}")
        return EXIT_NUMERICAL
    except (ValidationError, OSError) as exc:
        _say(f"error: {exc}")
        return EXIT_VALIDATION
    except QTopoError as exc:
        _say(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
