# main.py
"""
Command-line entry point for the metro horseshoe simulator.

Every invocation loads its state (optionally from --state), runs one
subcommand and writes a JSON report to stdout. Domain errors go to stderr as
an error document with exit code 1; usage errors exit with 2.
"""

import argparse
import logging
import os
import sys
import traceback
from datetime import datetime, timezone

import configure
from errors import NetworkError, StateError
from load_sweep import plot_blocking, run_load_sweep, sweep_records, write_sweep_csv
from nfv import build_surveillance_nsd, load_nsd
from state_store import load_state, new_state, read_json_file, save_state
from topology import load_topology, topology_summary
from utils import canonical_json
from workload import generate_scenario, run_experiment

logger = logging.getLogger("main")

LAYERS = {"optical": "OPTICAL", "l2": "L2", "l3": "L3"}


def setup_logging(debug=False):
    """File logging always; a stderr handler only with --debug."""
    level = logging.DEBUG if debug else getattr(logging, str(configure.LOG_LEVEL).upper(), logging.INFO)
    formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")

    handlers = []
    log_dir = os.path.dirname(configure.LOG_FILE)
    try:
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        handlers.append(logging.FileHandler(configure.LOG_FILE))
    except OSError:
        handlers.append(logging.NullHandler())
    if debug:
        handlers.append(logging.StreamHandler(sys.stderr))

    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()
    for handler in handlers:
        handler.setFormatter(formatter)
        root.addHandler(handler)
    root.setLevel(level)


def _demand(text):
    """Parse FORMAT=WEIGHT (FORMAT may be 'auto')."""
    name, sep, weight = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected FORMAT=WEIGHT, got {text}")
    try:
        return name, float(weight)
    except ValueError:
        raise argparse.ArgumentTypeError(f"weight must be a number in {text}")


def _loads(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"loads must be comma-separated numbers, got {text}")


def _add_global_options(parser, suppress=False):
    """--topology/--state/--config/--debug, accepted before or after the subcommand."""
    def default(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--topology", default=default(configure.DEFAULT_TOPOLOGY), help="Topology JSON document")
    parser.add_argument("--state", default=default(None), help="State file to load before and save after the command")
    parser.add_argument("--config", default=default(None),
                        help="JSON file overriding impairment, format and workload defaults")
    parser.add_argument("--debug", action="store_true", default=default(False),
                        help="Mirror detailed logging to stderr")


def build_parser():
    parser = argparse.ArgumentParser(prog="horseshoe", description="Metro horseshoe network simulator")
    _add_global_options(parser)
    common = argparse.ArgumentParser(add_help=False)
    _add_global_options(common, suppress=True)

    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="Validate a topology document")

    p = sub.add_parser("provision", parents=[common], help="Create a connectivity service between two SIPs")
    p.add_argument("--layer", required=True, choices=sorted(LAYERS))
    p.add_argument("--a", required=True, help="A-end SIP id")
    p.add_argument("--z", required=True, help="Z-end SIP id")
    p.add_argument("--bandwidth", type=float, default=0.0, help="Rider bandwidth in Gb/s (L2/L3)")
    p.add_argument("--format", help="Modulation format hint, e.g. DP-16QAM")
    p.add_argument("--power", type=float, help="Launch power in dBm")

    p = sub.add_parser("delete", parents=[common], help="Delete a connectivity service")
    p.add_argument("--service", required=True, help="Connectivity service id")

    p = sub.add_parser("slice", parents=[common], help="Manage network slices")
    p.add_argument("action", choices=["create", "delete", "show"])
    p.add_argument("--id", required=True, help="Slice id")
    p.add_argument("--nsd", help="NSD JSON file (default: surveillance service for the topology)")
    p.add_argument("--method", choices=["auto", "exact", "greedy"], default="auto")
    p.add_argument("--cameras-per-amen", type=int, default=150)

    p = sub.add_parser("scenario", parents=[common], help="Generate a camera scenario")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cameras-per-amen", type=int, default=150)
    p.add_argument("--ptz-fraction", type=float, default=0.1)
    p.add_argument("--stream-mbps", type=float)

    p = sub.add_parser("experiment", parents=[common], help="Run a dynamic provisioning experiment")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--arrival-rate", type=float, default=5.0, help="Arrivals per second")
    p.add_argument("--mean-hold", type=float, default=1.0, help="Mean holding time in seconds")
    stop = p.add_mutually_exclusive_group()
    stop.add_argument("--requests", type=int)
    stop.add_argument("--duration", type=float)
    p.add_argument("--channels", type=int, help="Override the grid channel count")
    p.add_argument("--demand", type=_demand, action="append", help="FORMAT=WEIGHT, repeatable")
    p.add_argument("--loads", type=_loads, help="Comma-separated offered loads in Erlang (sweep mode)")
    p.add_argument("--jobs", type=int, default=1, help="Parallel workers for a sweep")
    p.add_argument("--csv-out", help="Latency histogram CSV (sweep table in sweep mode)")
    p.add_argument("--plot-out", help="Blocking-vs-load PNG (sweep mode)")

    p = sub.add_parser("report", parents=[common], help="End-to-end demo report")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cameras-per-amen", type=int, default=150)
    p.add_argument("--ptz-fraction", type=float, default=0.1)
    p.add_argument("--arrival-rate", type=float, default=5.0)
    p.add_argument("--mean-hold", type=float, default=1.0)
    p.add_argument("--requests", type=int, default=2000)
    p.add_argument("--csv-out", help="Latency histogram CSV")
    return parser


def _apply_config(path):
    try:
        configure.load_overrides(path)
    except (OSError, ValueError) as e:
        raise StateError("PARSE_ERROR", f"cannot load config {path}: {e}", {"path": path})


def _output_path(path):
    """Bare file names land in the results directory; anything with a directory part is kept as given."""
    if path and not os.path.dirname(path):
        return os.path.join(configure.RESULTS_DIR, path)
    return path


def _load_topology(args):
    return load_topology(read_json_file(args.topology))


def _open_state(args):
    if args.state:
        return load_state(args.state, args.topology)
    return new_state(args.topology)


def cmd_validate(args):
    topo = _load_topology(args)
    return topology_summary(topo), list(topo.warnings)


def cmd_provision(args, state):
    request = {"operation": "create", "sip_a": args.a, "sip_z": args.z, "layer": LAYERS[args.layer],
               "bandwidth_gbps": args.bandwidth}
    if args.format:
        request["format_hint"] = args.format
    if args.power is not None:
        request["launch_power_dbm"] = args.power
    service = state.apply({"target": "service", "request": request})
    configs = state.com.render_device_configs(service["id"])
    return {"service": service, "device_configs": [c.to_dict() for c in configs]}, []


def cmd_delete(args, state):
    service = state.apply({"target": "service", "request": {"operation": "delete", "service_id": args.service}})
    return {"service": service}, []


def cmd_slice(args, state):
    if args.action == "show":
        return {"slice": state.orchestrator.get_slice(args.id).to_dict()}, []
    if args.action == "delete":
        return {"slice": state.apply({"target": "slice", "operation": "delete", "slice_id": args.id})}, []

    if args.nsd:
        nsd = load_nsd(read_json_file(args.nsd))
    else:
        nsd = build_surveillance_nsd(state.topo, cameras_per_amen=args.cameras_per_amen)
    entry = {"target": "slice", "operation": "create", "slice_id": args.id, "nsd": nsd.to_dict(),
             "method": args.method}
    return {"slice": state.apply(entry)}, []


def cmd_scenario(args):
    topo = _load_topology(args)
    scenario = generate_scenario(topo, args.cameras_per_amen, args.ptz_fraction, args.stream_mbps, args.seed)
    return scenario.to_dict(), list(scenario.warnings)


def cmd_experiment(args):
    topo = _load_topology(args)
    if args.channels is not None:
        topo = topo.with_channel_count(args.channels)
    demand = dict(args.demand) if args.demand else None

    if args.loads:
        frame = run_load_sweep(topo, args.loads, args.mean_hold, args.requests or 10000, args.seed,
                               n_jobs=args.jobs, demand_distribution=demand)
        if args.csv_out:
            write_sweep_csv(frame, _output_path(args.csv_out))
        if args.plot_out:
            plot_blocking(frame, _output_path(args.plot_out))
        return {"sweep": sweep_records(frame)}, []

    requests = args.requests if args.requests is not None or args.duration is not None else 10000
    metrics = run_experiment(topo, args.arrival_rate, args.mean_hold, requests=requests, duration_s=args.duration,
                             seed=args.seed, demand_distribution=demand)
    if args.csv_out:
        metrics.write_histogram_csv(_output_path(args.csv_out))
    return metrics.to_dict(), []


def cmd_report(args):
    """Topology, scenario, default slice, device configs and metrics in one document."""
    state = new_state(args.topology)
    topo = state.topo
    scenario = generate_scenario(topo, args.cameras_per_amen, args.ptz_fraction, seed=args.seed)
    nsd = build_surveillance_nsd(topo, scenario=scenario)
    instance = state.apply({"target": "slice", "operation": "create", "slice_id": "surveillance",
                            "nsd": nsd.to_dict(), "method": "auto"})

    device_configs = {sid: [c.to_dict() for c in state.com.render_device_configs(sid)]
                      for sid in instance["services"]}
    metrics = run_experiment(topo, args.arrival_rate, args.mean_hold, requests=args.requests, seed=args.seed)
    if args.csv_out:
        metrics.write_histogram_csv(_output_path(args.csv_out))

    cameras = {}
    for amen in topo.amens:
        kinds = {}
        for cam in scenario.cameras_at(amen.id):
            kinds[cam.kind.value] = kinds.get(cam.kind.value, 0) + 1
        cameras[amen.id] = {"count": sum(kinds.values()), "by_kind": kinds,
                            "aggregate_mbps": scenario.aggregate_mbps(amen.id)}

    result = {
        "topology": topology_summary(topo),
        "scenario": {"seed": scenario.seed, "params": scenario.params, "cameras": cameras,
                     "flows": len(scenario.flows)},
        "slice": instance,
        "device_configs": device_configs,
        "metrics": metrics.to_dict(),
    }
    return result, list(topo.warnings) + list(scenario.warnings)


STATEFUL = {"provision": cmd_provision, "delete": cmd_delete, "slice": cmd_slice}
STATELESS = {"validate": cmd_validate, "scenario": cmd_scenario, "experiment": cmd_experiment,
             "report": cmd_report}


def _emit(stream, doc):
    stream.write(canonical_json(doc) + "\n")
    stream.flush()


def run_cli(argv=None, stdout=None, stderr=None):
    """
    Parse argv, run one subcommand and stream its report.

    Returns:
        int: 0 on success, 1 on a domain error, 2 on a usage error
    """
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    setup_logging(args.debug)
    report = {
        "command": argv,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": getattr(args, "seed", None),
    }

    try:
        if args.config:
            _apply_config(args.config)
        if args.command in STATEFUL:
            state = _open_state(args)
            try:
                result, warnings = STATEFUL[args.command](args, state)
            finally:
                if args.state:
                    save_state(state, args.state)
        else:
            result, warnings = STATELESS[args.command](args)
    except NetworkError as e:
        logger.error(f"❌ {args.command} failed: {e.code} {e.message}")
        _emit(stderr, dict(report, error=e.to_dict(), code=e.code, exit_code=1))
        return 1
    except Exception as e:
        logger.error(f"❌ Unexpected error in {args.command}: {e}\n{traceback.format_exc()}")
        error = {"code": "INTERNAL_ERROR", "message": str(e), "details": {"type": type(e).__name__}}
        _emit(stderr, dict(report, error=error, code="INTERNAL_ERROR", exit_code=1))
        return 1

    _emit(stdout, dict(report, result=result, warnings=warnings, exit_code=0))
    return 0


if __name__ == "__main__":
    sys.exit(run_cli())
