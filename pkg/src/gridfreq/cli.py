"""
Command line interface.

Exit codes: 0 on success, 2 on validation, configuration or dispatch
feasibility failure, 3 on numerical failure.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError as PydanticValidationError

from . import __version__
from .certification import (
    SupplyRateMode,
    SupplyRateSpec,
    certify_network,
    check_bus_passivity,
)
from .config import get_settings
from .exceptions import (
    ConfigurationError,
    GridFreqError,
    InfeasibleDispatchError,
    NumericalError,
    ValidationError,
)
from .network import Bus, BusKind, NetworkModel
from .oslc import solve_oslc
from .scenarios import (
    dump_scenario,
    emit_results,
    generate_synthetic_network,
    load_scenario,
    oslc_problem_from_scenario,
    preset_network,
    scenario_json_schema,
    to_jsonable,
)
from .scenarios.loader import build_bus
from .scenarios.schema import BusSpec, DevicesSpec, json_pointer
from .simulation import check_monotone, find_equilibrium, integrate, lyapunov_series

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

MODES = {"a": SupplyRateMode.ASSUMPTION_A, "b": SupplyRateMode.ASSUMPTION_B, "none": SupplyRateMode.NONE}


def _print_json(data: Any) -> None:
    print(json.dumps(to_jsonable(data), indent=2, allow_nan=False))


def _without_sweep(certificates: Dict[str, Any]) -> Dict[str, Any]:
    return {k: c.model_copy(update={"sweep": []}) for k, c in certificates.items()}


def _supply_rate(args: argparse.Namespace) -> SupplyRateSpec:
    mode = MODES.get(args.mode, SupplyRateMode.ASSUMPTION_A)
    default = SupplyRateSpec.default(mode)
    eps1 = default.eps1 if args.eps1 is None else args.eps1
    eps2 = default.eps2 if args.eps2 is None else args.eps2
    try:
        return SupplyRateSpec(eps1=eps1, eps2=eps2, mode=mode)
    except PydanticValidationError as e:
        raise ConfigurationError(f"Invalid supply rate: {e.errors()[0]['msg']}") from e


def run_scenario(path: Path, out_dir: Path, strict: bool = True) -> Dict[str, Any]:
    """
    Simulate one scenario, check its equilibrium and Lyapunov decay, certify
    its buses and write the result bundle.

    Returns:
        Summary with the headline numbers of the run
    """
    scenario = load_scenario(path, strict=strict)
    trajectory = integrate(scenario)
    snapshot, equilibrium = find_equilibrium(scenario, warm_start=trajectory.x[-1])
    series = lyapunov_series(trajectory, scenario, snapshot)
    last_event = max(scenario.event_times(), default=0.0)
    start = int(np.searchsorted(trajectory.t, last_event, side="left"))
    monotonicity = check_monotone(series, start=start)
    certificates = certify_network(
        scenario.network,
        SupplyRateSpec.default(),
        fallback=SupplyRateSpec.default(SupplyRateMode.ASSUMPTION_B),
    )

    bundle = emit_results(
        trajectory,
        {
            "equilibrium": equilibrium,
            "lyapunov": monotonicity,
            "certificates": _without_sweep(certificates),
        },
        out_dir,
        scenario=scenario,
    )
    return {
        "scenario": scenario.name,
        "out_dir": str(bundle.out_dir),
        "samples": bundle.rows,
        "final_max_abs_omega": float(np.max(np.abs(trajectory.omega[-1]), initial=0.0)),
        "equilibrium_ok": equilibrium.ok,
        "lyapunov_ok": monotonicity.ok,
        "certified": all(c.feasible for c in certificates.values()),
    }


def cmd_simulate(args: argparse.Namespace) -> int:
    _print_json(run_scenario(Path(args.scenario), Path(args.out), strict=not args.lenient))
    return EXIT_OK


def cmd_equilibrium(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario, strict=not args.lenient)
    snapshot, report = find_equilibrium(scenario)
    _print_json({
        "report": report,
        "bus_ids": scenario.network.bus_ids,
        "omega": snapshot.omega,
        "pc": snapshot.pc,
        "p_M": snapshot.p_M,
        "d_c": snapshot.d_c,
        "eta": snapshot.eta,
        "psi": snapshot.psi,
    })
    return EXIT_OK if report.ok else EXIT_NUMERICAL


def cmd_oslc(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario, strict=not args.lenient)
    problem = oslc_problem_from_scenario(scenario)
    solution = solve_oslc(problem)
    _print_json({"bus_ids": list(problem.bus_ids), "solution": solution, "total_cost": solution.total_cost(problem)})
    return EXIT_OK


def _device_bus(document: Dict[str, Any]) -> Bus:
    """A single bus from a device file: either a bus object or bare device bindings."""
    model = BusSpec if "devices" in document else DevicesSpec
    try:
        spec = model.model_validate(document)
    except PydanticValidationError as e:
        raise ValidationError(
            "Device file does not match the schema",
            [f"{json_pointer(document, tuple(err['loc']))}: {err['msg']}" for err in e.errors()],
        ) from e
    if isinstance(spec, DevicesSpec):
        spec = BusSpec(id="device", kind=BusKind.GENERATOR, inertia=1.0, devices=spec)
    return build_bus(spec)


def cmd_check(args: argparse.Namespace) -> int:
    spec = _supply_rate(args)
    fallback = SupplyRateSpec.default(SupplyRateMode.ASSUMPTION_B) if args.mode == "auto" else None
    path = Path(args.target)
    document = json.loads(path.read_text(encoding="utf-8"))
    if isinstance(document, dict) and "buses" in document:
        network = load_scenario(path, strict=not args.lenient).network
    else:
        network = NetworkModel(buses=(_device_bus(document),))
    certificates = certify_network(network, spec, fallback=fallback)
    if not args.sweep:
        certificates = _without_sweep(certificates)
    _print_json({"supply_rate": spec, "certificates": certificates})
    return EXIT_OK


def cmd_gen_network(args: argparse.Namespace) -> int:
    if args.preset:
        file = preset_network(args.preset, seed=args.seed)
    else:
        file = generate_synthetic_network(args.buses, gen_fraction=args.gen_fraction, seed=args.seed)
    text = dump_scenario(file)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_passivity(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario, strict=not args.lenient)
    bus_ids = [args.bus] if args.bus else scenario.network.bus_ids
    reports = {}
    for bus_id in bus_ids:
        try:
            scenario.network.bus(bus_id)
        except KeyError:
            raise ValidationError(f"Unknown bus '{bus_id}'") from None
        reports[bus_id] = check_bus_passivity(
            scenario.network, bus_id, horizon=args.horizon, trials=args.trials, seed=args.seed
        )
    _print_json(reports)
    return EXIT_OK if all(r.ok or r.skipped for r in reports.values()) else EXIT_NUMERICAL


def cmd_batch(args: argparse.Namespace) -> int:
    threads = get_settings().threads
    out = Path(args.out)
    paths = [Path(p) for p in args.scenarios]
    names = [p.stem for p in paths]
    if len(set(names)) != len(names):
        raise ConfigurationError("Batch scenarios must have distinct file names")

    def one(path: Path) -> Dict[str, Any]:
        try:
            return run_scenario(path, out / path.stem, strict=not args.lenient)
        except GridFreqError as e:
            logger.error("Scenario %s failed: %s", path, e)
            return {"scenario": path.stem, "error": str(e), "exit_code": exit_code_for(e)}

    logger.info("Running %d scenario(s) on %d thread(s)", len(paths), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        summaries = list(pool.map(one, paths))
    _print_json(summaries)
    codes = [s.get("exit_code", EXIT_OK) for s in summaries]
    return max(codes, default=EXIT_OK)


def cmd_schema(args: argparse.Namespace) -> int:
    print(json.dumps(scenario_json_schema(), indent=2))
    return EXIT_OK


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(error, (ValidationError, ConfigurationError, InfeasibleDispatchError)):
        return EXIT_INVALID
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridfreq", description="Distributed secondary frequency control toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Overrides GRIDFREQ_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("scenario", help="Scenario JSON file")
        p.add_argument("--lenient", action="store_true", help="Drop unknown keys with a warning")
        return p

    p = scenario_command("simulate", "Simulate a scenario and write a result bundle")
    p.add_argument("--out", required=True, help="Output directory")
    p.set_defaults(func=cmd_simulate)

    p = scenario_command("equilibrium", "Find the closed-loop equilibrium and check its optimality")
    p.set_defaults(func=cmd_equilibrium)

    p = scenario_command("oslc", "Solve the dispatch problem induced by a scenario")
    p.set_defaults(func=cmd_oslc)

    p = sub.add_parser("check", help="Certify the buses of a scenario or a single device file")
    p.add_argument("target", help="Scenario JSON or device JSON")
    p.add_argument("--eps1", type=float, default=None)
    p.add_argument("--eps2", type=float, default=None)
    p.add_argument("--mode", choices=sorted(MODES) + ["auto"], default="a",
                   help="auto tries a per bus and falls back to b")
    p.add_argument("--sweep", action="store_true", help="Include the frequency sweep samples")
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("gen-network", help="Generate a synthetic network scenario")
    p.add_argument("--buses", type=int, default=10)
    p.add_argument("--gen-fraction", type=float, default=1.0 / 3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--preset", choices=["synthetic140"], default=None)
    p.add_argument("--out", default=None, help="Output file (stdout when omitted)")
    p.set_defaults(func=cmd_gen_network)

    p = scenario_command("passivity", "Monte-Carlo passivity check of bus subsystems")
    p.add_argument("--bus", default=None, help="Bus id (all buses when omitted)")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=float, default=20.0)
    p.set_defaults(func=cmd_passivity)

    p = sub.add_parser("batch", help="Run several scenarios concurrently (GRIDFREQ_THREADS)")
    p.add_argument("scenarios", nargs="+")
    p.add_argument("--out", required=True, help="Parent output directory")
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("schema", help="Print the scenario JSON schema")
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = get_settings()
        if args.log_level:
            settings = settings.model_copy(update={"log_level": args.log_level})
        settings.configure_logging()
        return args.func(args)
    except GridFreqError as e:
        print(f"error: {e}", file=sys.stderr)
        return exit_code_for(e)
    except json.JSONDecodeError as e:
        print(f"error: invalid JSON: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
