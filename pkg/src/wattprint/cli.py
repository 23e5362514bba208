"""Command-line interface.

Subcommands:
    track      run a command under tracking (epochs are wall-clock
               intervals, or trace windows with --replay-window)
    report     tabulate and aggregate session logs
    estimate   back-of-envelope footprint from FLOP counts and TDP
    intensity  query the current grid carbon intensity

Exit codes: 0 success, 1 usage error, 2 runtime error; ``track`` passes
the child's exit code through.
"""

from __future__ import annotations

import argparse
import json
import logging
import subprocess
import sys
import time
from dataclasses import asdict

from .config import build_tracker_config, load_config_file
from .energy import DEFAULT_PUE, JOULES_PER_KWH
from .intensity.geo import DEFAULT_GEO_ENDPOINT, resolve_location
from .intensity.http import HttpTransport, NullTransport
from .intensity.providers import load_default_average
from .intensity.service import IntensityService
from .intensity.types import IntensitySource
from .reporting import CAR_GCO2_PER_KM, ConversionFactors, format_duration, to_km_by_car
from .session_log import aggregate, find_logs, parse_log, realized_intensity, recompute_energy_kwh
from .tracker import start_session

logger = logging.getLogger("wattprint.cli")

SECONDS_PER_DAY = 86400.0


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool reserves 2 for runtime."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_session_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, default=None, help="expected total epochs")
    parser.add_argument("--pred-after", type=int, default=None,
                        help="emit a prediction after this many epochs (default 1)")
    parser.add_argument("--monitor", type=int, default=None,
                        help="stop measuring after this many epochs and extrapolate")
    parser.add_argument("--interval", type=float, default=None,
                        help="sampling interval in seconds (default 10); also the epoch "
                             "window for track")
    parser.add_argument("--pue", type=float, default=None,
                        help=f"facility overhead multiplier (default {DEFAULT_PUE})")
    parser.add_argument("--region", default=None, help="country code override, e.g. DK")
    parser.add_argument("--log-dir", default=None, help="directory for session logs")
    parser.add_argument("--experiment", default=None, help="experiment name (log subdirectory)")
    parser.add_argument("--components", default=None,
                        help="comma-separated: gpu,cpu_package,dram")
    parser.add_argument("--trace", default=None, help="replay trace file (testing/benchmarks)")
    parser.add_argument("--replay-window", type=float, default=None,
                        help="scripted replay: seconds of trace time per epoch")
    parser.add_argument("--config", default=None, help="config file path")
    parser.add_argument("--no-net", action="store_true",
                        help="never touch the network; use defaults/fixtures")


def build_parser() -> _Parser:
    parser = _Parser(prog="wattprint", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command_name", required=True)

    track = sub.add_parser("track", help="run a command under energy/carbon tracking")
    _add_session_flags(track)
    track.add_argument("command", nargs=argparse.REMAINDER,
                       help="command to run (prefix with --)")

    report = sub.add_parser("report", help="tabulate and aggregate session logs")
    report.add_argument("--log-dir", required=True, help="directory holding session logs")
    report.add_argument("--format", choices=("text", "json"), default="text")
    report.add_argument("--car-gco2-km", type=float, default=CAR_GCO2_PER_KM,
                        help="gCO2 per km for the car equivalence")

    estimate = sub.add_parser("estimate", help="back-of-envelope footprint estimate")
    estimate.add_argument("--flops", type=float, required=True,
                          help="total floating point operations of the job")
    estimate.add_argument("--device-flops", type=float, required=True,
                          help="sustained FLOPS of one device")
    estimate.add_argument("--tdp", type=float, required=True,
                          help="device TDP in watts")
    estimate.add_argument("--device-count", type=int, default=None,
                          help="optional device count, to also print wall-clock days")
    estimate.add_argument("--pue", type=float, default=DEFAULT_PUE)
    estimate.add_argument("--intensity", type=float, default=None,
                          help="gCO2/kWh (default: the shipped region-average constant)")
    estimate.add_argument("--car-gco2-km", type=float, default=CAR_GCO2_PER_KM)
    estimate.add_argument("--format", choices=("text", "json"), default="text")

    intensity = sub.add_parser("intensity", help="query current grid carbon intensity")
    intensity.add_argument("--region", default=None, help="country code override")
    intensity.add_argument("--no-net", action="store_true")
    intensity.add_argument("--config", default=None)
    intensity.add_argument("--watch", action="store_true",
                           help="keep printing at the refresh cadence")
    intensity.add_argument("--refresh", type=float, default=900.0)
    intensity.add_argument("--watch-limit", type=int, default=None,
                           help="stop after N readings (scripting/tests)")
    intensity.add_argument("--format", choices=("text", "json"), default="text")

    return parser


def _make_transport(args, injected):
    if injected is not None:
        return injected
    if getattr(args, "no_net", False):
        return NullTransport()
    return HttpTransport()


def cmd_track(args, transport=None) -> int:
    command = list(args.command)
    if command and command[0] == "--":
        command = command[1:]
    if not command:
        print("wattprint track: error: no command given (separate it with --)",
              file=sys.stderr)
        return 1
    if args.replay_window is not None and args.trace is None:
        print("wattprint track: error: --replay-window requires --trace", file=sys.stderr)
        return 1
    if args.replay_window is not None and args.epochs is None:
        print("wattprint track: error: --replay-window requires --epochs", file=sys.stderr)
        return 1

    flags = {
        "total_epochs": args.epochs,
        "epochs_before_pred": args.pred_after,
        "monitor_epochs": args.monitor,
        "sampling_interval": args.interval,
        "pue": args.pue,
        "region": args.region,
        "log_dir": args.log_dir,
        "experiment": args.experiment,
        "components": args.components.split(",") if args.components else None,
        "replay_trace": args.trace,
        "replay_epoch_seconds": args.replay_window,
        "no_net": True if args.no_net else None,
    }
    try:
        config = build_tracker_config(flags, config_file=args.config)
    except (ValueError, FileNotFoundError) as exc:
        print(f"wattprint track: error: {exc}", file=sys.stderr)
        return 1

    try:
        child = subprocess.Popen(command)
    except OSError as exc:
        print(f"wattprint track: cannot run {command[0]!r}: {exc}", file=sys.stderr)
        return 2

    tracker = start_session(config, transport=transport)
    interval = config.sampling_interval
    try:
        if config.replay_epoch_seconds is not None:
            for _ in range(config.total_epochs):
                tracker.epoch_start()
                tracker.epoch_end()
            child.wait()
        else:
            while child.poll() is None:
                tracker.epoch_start()
                try:
                    child.wait(timeout=interval)
                except subprocess.TimeoutExpired:
                    pass
                tracker.epoch_end()
    except KeyboardInterrupt:
        child.terminate()
        child.wait()
    finally:
        tracker.stop()
    return child.returncode if child.returncode is not None else 2


def cmd_report(args) -> int:
    paths = find_logs(args.log_dir)
    sessions = []
    for path in paths:
        try:
            sessions.append(parse_log(path))
        except Exception as exc:
            print(f"wattprint report: skipping {path}: {exc}", file=sys.stderr)
    if not sessions:
        print("no sessions found")
        return 0

    factors = ConversionFactors(car_gco2_per_km=args.car_gco2_km)
    rows = []
    for session in sessions:
        if session.summary is not None:
            s = session.summary
            rows.append(
                {
                    "session_id": session.session_id,
                    "experiment": session.experiment,
                    "epochs": s.measured_epochs,
                    "duration_s": s.duration_s,
                    "energy_kwh": s.energy_kwh,
                    "emissions_g": s.emissions_g,
                    "km_by_car": s.km_by_car,
                    "early_stop": s.early_stop,
                }
            )
        elif session.epochs:
            kwh = recompute_energy_kwh(session)
            grams = kwh * realized_intensity(session)
            rows.append(
                {
                    "session_id": session.session_id,
                    "experiment": session.experiment,
                    "epochs": len(session.epochs),
                    "duration_s": sum(e.duration for e in session.epochs),
                    "energy_kwh": kwh,
                    "emissions_g": grams,
                    "km_by_car": to_km_by_car(grams, factors),
                    "early_stop": True,  # no summary means the session never stopped cleanly
                }
            )
    totals = aggregate(sessions, factors)

    if args.format == "json":
        print(json.dumps({"sessions": rows, "total": asdict(totals)}, indent=2))
        return 0

    header = (
        f"{'session':<24} {'experiment':<14} {'epochs':>6} {'time':>10} "
        f"{'energy (kWh)':>13} {'CO2eq (g)':>12} {'km by car':>10}"
    )
    print(header)
    print("-" * len(header))
    for row in rows:
        print(
            f"{row['session_id']:<24} {row['experiment']:<14} {row['epochs']:>6} "
            f"{format_duration(row['duration_s']):>10} {row['energy_kwh']:>13.6f} "
            f"{row['emissions_g']:>12.6f} {row['km_by_car']:>10.6f}"
        )
    print(
        f"Total: {totals.energy_kwh:.3f} kWh, {totals.emissions_g / 1000.0:.3f} kg CO2eq, "
        f"{totals.km_by_car:.3f} km ({totals.sessions} session(s))"
    )
    return 0


def estimate_footprint(
    flops: float,
    device_flops: float,
    tdp_watts: float,
    pue: float = DEFAULT_PUE,
    intensity_gkwh: float | None = None,
    car_gco2_per_km: float = CAR_GCO2_PER_KM,
    device_count: int | None = None,
) -> dict:
    """Back-of-envelope footprint arithmetic shared by the CLI and tests.

    Compute seconds come from total FLOPs over one device's sustained
    FLOPS; the device's TDP stands in for its average draw.
    """
    if min(flops, device_flops, tdp_watts, pue) <= 0:
        raise ValueError("flops, device_flops, tdp and pue must all be positive")
    if intensity_gkwh is None:
        intensity_gkwh, _, _ = load_default_average()
    if intensity_gkwh <= 0:
        raise ValueError("intensity must be positive")
    seconds = flops / device_flops
    device_days = seconds / SECONDS_PER_DAY
    energy_kwh = pue * ((tdp_watts * seconds) / JOULES_PER_KWH)
    emissions_g = energy_kwh * intensity_gkwh
    result = {
        "compute_seconds": seconds,
        "device_days": device_days,
        "energy_kwh": energy_kwh,
        "emissions_g": emissions_g,
        "emissions_kg": emissions_g / 1000.0,
        "km_by_car": to_km_by_car(emissions_g, ConversionFactors(car_gco2_per_km)),
        "pue": pue,
        "intensity_gkwh": intensity_gkwh,
    }
    if device_count:
        result["wall_days"] = device_days / device_count
        result["device_count"] = device_count
    return result


def cmd_estimate(args) -> int:
    try:
        result = estimate_footprint(
            flops=args.flops,
            device_flops=args.device_flops,
            tdp_watts=args.tdp,
            pue=args.pue,
            intensity_gkwh=args.intensity,
            car_gco2_per_km=args.car_gco2_km,
            device_count=args.device_count,
        )
    except ValueError as exc:
        print(f"wattprint estimate: error: {exc}", file=sys.stderr)
        return 1
    if args.format == "json":
        print(json.dumps(result, indent=2))
        return 0
    print("Estimated footprint:")
    print(f"\tCompute time: {result['compute_seconds']:.2f} s "
          f"({result['device_days']:.2f} device-days)")
    if "wall_days" in result:
        print(f"\tWall time:    {result['wall_days']:.2f} days on "
              f"{result['device_count']} device(s)")
    print(f"\tEnergy:       {result['energy_kwh']:.2f} kWh")
    print(f"\tCO2eq:        {result['emissions_kg']:.2f} kg")
    print("\tThis is equivalent to:")
    print(f"\t{result['km_by_car']:.2f} km travelled by car")
    return 0


def cmd_intensity(args, transport=None) -> int:
    transport = _make_transport(args, transport)
    try:
        endpoints = load_config_file(args.config).get("endpoints", {})
    except (ValueError, FileNotFoundError) as exc:
        print(f"wattprint intensity: error: {exc}", file=sys.stderr)
        return 1
    location = resolve_location(
        override=args.region,
        transport=transport,
        endpoint=endpoints.get("geo", DEFAULT_GEO_ENDPOINT),
    )
    service = IntensityService(location, transport=transport, endpoints=endpoints)
    count = 0
    while True:
        current = service.fetch_current()
        if args.format == "json":
            print(json.dumps({
                "value_gco2_per_kwh": current.value,
                "source": current.source.value,
                "region": current.region,
                "fetched_at": current.fetched_at.isoformat(),
            }))
        else:
            label = {
                IntensitySource.REALTIME: "realtime",
                IntensitySource.FORECAST: "forecast",
                IntensitySource.DEFAULT_AVERAGE: "default average",
            }[current.source]
            print(
                f"wattprint: Current carbon intensity is {current.value:.2f} gCO2/kWh "
                f"(source: {label}) for region {current.region}."
            )
        count += 1
        if not args.watch or (args.watch_limit is not None and count >= args.watch_limit):
            return 0
        try:
            time.sleep(args.refresh)
        except KeyboardInterrupt:
            return 0


def main(argv=None, transport=None) -> int:
    """Entry point; ``transport`` is injectable for fixture-driven tests."""
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        if args.command_name == "track":
            return cmd_track(args, transport=transport)
        if args.command_name == "report":
            return cmd_report(args)
        if args.command_name == "estimate":
            return cmd_estimate(args)
        if args.command_name == "intensity":
            return cmd_intensity(args, transport=transport)
    except Exception as exc:  # runtime failures map to exit code 2
        logger.error("%s", exc)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
