"""Command surface: solve, optimize, sweep, simulate.

Configurations are YAML documents (JSON works too, being a YAML subset):

    gamma: 150.0
    stations:
      - {lambda: 50.0, w: 100.0, delta: 10.0, u: 0.2}
      - {lambda: 60.0, w: 80.0, delta: 6.0, u: 0.2}
    alloc: [0.4594, 0.5406]          # optional
    sim: {horizon: 1.0e4, warmup: 1.0e3, seed: 42, replications: 5}

Machine-readable JSON reports go to stdout at full precision; a short
human summary (6 significant digits) goes to stderr. Exit codes:
0 success, 2 parse/validation error, 3 infeasible or unstable network,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np
import yaml

from . import __version__
from .errors import (
    ApproximationOutOfBox,
    ConstraintRootNotBracketed,
    InfeasibleNetwork,
    InvalidSimConfig,
    NoAdmissibleRoot,
    NoInteriorRoot,
    NoStationarySolution,
    OutOfBox,
    UnstableNetwork,
)
from .model import Allocation, GeneralBatch, Geometric, NetworkConfig, StationPair
from .optimize import grid_search, optimal_allocation
from .sim import SimConfig, simulate
from .stationary import feasible_box, solve_network
from .cost import energy_loss_rate, response_time

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERIC = 4

_INFEASIBLE_ERRORS = (
    InfeasibleNetwork,
    UnstableNetwork,
    OutOfBox,
    ApproximationOutOfBox,
    NoStationarySolution,
)
_NUMERIC_ERRORS = (NoInteriorRoot, NoAdmissibleRoot, ConstraintRootNotBracketed)


class ConfigError(Exception):
    """Configuration document error with a field-path diagnostic."""


# ---------------------------------------------------------------------------
# Document parsing
# ---------------------------------------------------------------------------


def _number(doc: dict, field: str, path: str) -> float:
    if field not in doc:
        raise ConfigError(f"{path}: missing required field '{field}'")
    value = doc[field]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{field}: expected a number, got {value!r}")
    return float(value)


def _check_fields(doc: dict, allowed: set[str], path: str):
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {sorted(unknown)}")


def _parse_station(doc, index: int) -> StationPair:
    path = f"stations[{index}]"
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping")
    _check_fields(doc, {"lambda", "w", "delta", "u", "pmf"}, path)
    lam = _number(doc, "lambda", path)
    w = _number(doc, "w", path)
    delta = _number(doc, "delta", path)
    if ("u" in doc) == ("pmf" in doc):
        raise ConfigError(f"{path}: give exactly one of 'u' or 'pmf'")
    try:
        if "u" in doc:
            batch = Geometric(_number(doc, "u", path))
        else:
            pmf = doc["pmf"]
            if not isinstance(pmf, dict) or not pmf:
                raise ConfigError(f"{path}.pmf: expected a non-empty mapping size -> prob")
            batch = GeneralBatch({int(k): float(v) for k, v in pmf.items()})
        return StationPair(lam, w, delta, batch)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_document(path: str):
    """Parse and validate a configuration document.

    Returns (NetworkConfig, Allocation | None, sim block dict | None).
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ConfigError(f"{path}: invalid document{where}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    _check_fields(doc, {"gamma", "stations", "alloc", "sim"}, path)

    if "stations" not in doc or not isinstance(doc["stations"], list) or not doc["stations"]:
        raise ConfigError(f"{path}: 'stations' must be a non-empty list")
    stations = [_parse_station(s, i) for i, s in enumerate(doc["stations"])]
    try:
        network = NetworkConfig(_number(doc, "gamma", path), stations)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None

    alloc = None
    if "alloc" in doc:
        raw = doc["alloc"]
        if not isinstance(raw, list):
            raise ConfigError("alloc: expected a list of numbers")
        if len(raw) != network.n:
            raise ConfigError(
                f"alloc: {len(raw)} entries for {network.n} stations"
            )
        try:
            alloc = Allocation(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"alloc: {exc}") from None

    sim_block = None
    if "sim" in doc:
        sim_block = doc["sim"]
        if not isinstance(sim_block, dict):
            raise ConfigError("sim: expected a mapping")
        _check_fields(sim_block, {"horizon", "warmup", "seed", "replications"}, "sim")
    return network, alloc, sim_block


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------


def _station_echo(st: StationPair) -> dict:
    out = {
        "lambda": st.arrival_rate,
        "w": st.delivery_rate,
        "delta": st.leak_rate,
    }
    if isinstance(st.batch, Geometric):
        out["u"] = st.batch.u
    else:
        out["pmf"] = {str(s): p for s, p in st.batch.pmf}
    return out


def _base_report(command: str, network: NetworkConfig) -> dict:
    return {
        "tool": {"name": "epnopt", "version": __version__},
        "command": command,
        "inputs": {
            "gamma": network.harvest_rate,
            "stations": [_station_echo(st) for st in network.stations],
        },
    }


def _box_entry(network: NetworkConfig):
    if not network.is_geometric:
        return None
    try:
        box = feasible_box(network)
    except InfeasibleNetwork:
        return None
    return {"lower": list(box.lower), "upper": list(box.upper)}


def _emit(report: dict, summary: list[str]) -> int:
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")
    for line in summary:
        print(line, file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_solve(args) -> int:
    network, alloc, _ = load_document(args.config)
    if alloc is None:
        raise ConfigError("solve needs an 'alloc' entry in the config document")
    state = solve_network(network, alloc)
    w = response_time(network, state)
    e = energy_loss_rate(network, alloc, state)
    report = _base_report("solve", network)
    report["inputs"]["alloc"] = list(alloc.p)
    report.update(
        {
            "p": list(alloc.p),
            "q1": list(state.q1),
            "q2": list(state.q2),
            "W": w,
            "E": e,
            "C": w + e,
            "feasible_box": _box_entry(network),
        }
    )
    return _emit(
        report,
        [
            f"W = {w:.6g} s, E = {e:.6g} EPs/sec, C = {w + e:.6g}",
            "q1 = " + ", ".join(f"{x:.6g}" for x in state.q1),
            "q2 = " + ", ".join(f"{x:.6g}" for x in state.q2),
        ],
    )


def cmd_optimize(args) -> int:
    network, _, _ = load_document(args.config)
    result = optimal_allocation(network, method=args.method, grid_step=args.grid_step)
    state = solve_network(network, result.p_star)
    report = _base_report("optimize", network)
    report.update(
        {
            "method": result.method.value,
            "residual": result.residual,
            "p": list(result.p_star.p),
            "q1": list(result.q1_star),
            "q2": list(state.q2),
            "W": result.cost.response_time,
            "E": result.cost.energy_loss,
            "C": result.cost.total,
            "feasible_box": _box_entry(network),
        }
    )
    return _emit(
        report,
        [
            f"method = {result.method.value}, residual = {result.residual:.6g}",
            "p* = " + ", ".join(f"{x:.6g}" for x in result.p_star.p),
            f"C = {result.cost.total:.6g} "
            f"(W = {result.cost.response_time:.6g} s, "
            f"E = {result.cost.energy_loss:.6g} EPs/sec)",
        ],
    )


def _sweep_rows(network, grid, optimum):
    n = network.n
    axes = grid.axes
    header = ["p1"] + (["p2"] if n == 3 else []) + ["W", "E", "C", "optimum"]
    yield header
    it = np.ndindex(grid.total.shape)
    for idx in it:
        coords = [axes[d][idx[d]] for d in range(len(axes))]
        if grid.feasible[idx]:
            vals = [
                f"{grid.response_time[idx]:.10g}",
                f"{grid.energy_loss[idx]:.10g}",
                f"{grid.total[idx]:.10g}",
            ]
        else:
            vals = ["INFEASIBLE"] * 3
        yield [f"{c:.10g}" for c in coords] + vals + ["0"]
    if optimum is not None:
        coords = list(optimum.p_star.p[: n - 1])
        yield (
            [f"{c:.10g}" for c in coords]
            + [
                f"{optimum.cost.response_time:.10g}",
                f"{optimum.cost.energy_loss:.10g}",
                f"{optimum.cost.total:.10g}",
                "1",
            ]
        )


def cmd_sweep(args) -> int:
    if args.step <= 0:
        raise ConfigError(f"--step must be > 0, got {args.step}")
    network, _, _ = load_document(args.config)
    _, best_cost, grid = grid_search(network, args.step)
    try:
        optimum = optimal_allocation(network, method="auto")
    except _NUMERIC_ERRORS + (ValueError,):
        optimum = None
    with open(args.out, "w") as fh:
        for row in _sweep_rows(network, grid, optimum):
            fh.write(",".join(row) + "\n")
    n_feasible = int(grid.feasible.sum())
    report = _base_report("sweep", network)
    report.update(
        {
            "step": args.step,
            "out": args.out,
            "rows": int(grid.total.size),
            "feasible_rows": n_feasible,
            "grid_min_C": float(np.nanmin(grid.total)),
            "optimum": None
            if optimum is None
            else {"p": list(optimum.p_star.p), "C": optimum.cost.total},
        }
    )
    return _emit(
        report,
        [
            f"wrote {grid.total.size} grid rows ({n_feasible} feasible) to {args.out}",
            f"grid minimum C = {float(np.nanmin(grid.total)):.6g}",
        ],
    )


def _z_entry(mean, se, analytic):
    z = None
    if analytic is not None and se > 0.0:
        z = (mean - analytic) / se
    return {"mean": mean, "se": se, "analytic": analytic, "z": z}


def cmd_simulate(args) -> int:
    network, alloc, sim_block = load_document(args.config)
    if alloc is None:
        raise ConfigError("simulate needs an 'alloc' entry in the config document")
    sim_block = dict(sim_block or {})
    if args.horizon is not None:
        sim_block["horizon"] = args.horizon
    if args.warmup is not None:
        sim_block["warmup"] = args.warmup
    if args.seed is not None:
        sim_block["seed"] = args.seed
    if args.reps is not None:
        sim_block["replications"] = args.reps
    if "horizon" not in sim_block:
        raise ConfigError("simulate needs sim.horizon in the config or --horizon")
    sim = SimConfig(
        network=network,
        alloc=alloc,
        horizon=float(sim_block["horizon"]),
        warmup=float(sim_block["warmup"]) if "warmup" in sim_block else None,
        seed=int(sim_block.get("seed", 0)),
        replications=int(sim_block.get("replications", 1)),
    )
    est = simulate(sim, state_cap=-1)  # joint-state maps are a library feature

    analytic = None
    try:
        state = solve_network(network, alloc)
        analytic = {
            "q1": list(state.q1),
            "q2": list(state.q2),
            "W": response_time(network, state),
            "E": energy_loss_rate(network, alloc, state),
        }
    except UnstableNetwork:
        pass

    def vec(name, means, ses):
        ana = analytic[name] if analytic else [None] * network.n
        return [
            _z_entry(float(m), float(s), ana[i])
            for i, (m, s) in enumerate(zip(means, ses))
        ]

    report = _base_report("simulate", network)
    report["inputs"]["alloc"] = list(alloc.p)
    report.update(
        {
            "sim": {
                "horizon": sim.horizon,
                "warmup": sim.effective_warmup,
                "seed": sim.seed,
                "replications": sim.replications,
            },
            "rng": {
                "bit_generator": est.meta["bit_generator"],
                "stream": est.meta["stream"],
            },
            "estimates": {
                "q1": vec("q1", est.q1_mean, est.q1_se),
                "q2": vec("q2", est.q2_mean, est.q2_se),
                "W": _z_entry(
                    est.response_time_mean,
                    est.response_time_se,
                    analytic["W"] if analytic else None,
                ),
                "E": _z_entry(
                    est.energy_loss_mean,
                    est.energy_loss_se,
                    analytic["E"] if analytic else None,
                ),
                "leak_rate": [
                    {"mean": float(m), "se": float(s)}
                    for m, s in zip(est.leak_rate_mean, est.leak_rate_se)
                ],
                "idle_delivery_rate": [
                    {"mean": float(m), "se": float(s)}
                    for m, s in zip(est.idle_rate_mean, est.idle_rate_se)
                ],
                "job_throughput": [
                    {"mean": float(m), "se": float(s)}
                    for m, s in zip(est.job_throughput_mean, est.job_throughput_se)
                ],
                "useful_delivery_rate": [
                    {"mean": float(m), "se": float(s)}
                    for m, s in zip(est.useful_rate_mean, est.useful_rate_se)
                ],
            },
            "nonstationary": est.nonstationary,
            "analytic_available": analytic is not None,
        }
    )
    status = "non-stationary" if est.nonstationary else "stationary"
    return _emit(
        report,
        [
            f"{sim.replications} replication(s) of {sim.horizon:.6g} s ({status})",
            f"W = {est.response_time_mean:.6g} +/- {est.response_time_se:.6g} s, "
            f"E = {est.energy_loss_mean:.6g} +/- {est.energy_loss_se:.6g} EPs/sec",
        ],
    )


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epnopt",
        description="Energy packet network analysis and optimal energy distribution.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="path to a YAML/JSON config")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sub.add_parser("solve", parents=[common], help="cost at the configured allocation")

    p_opt = sub.add_parser("optimize", parents=[common], help="find the optimal allocation")
    p_opt.add_argument(
        "--method",
        default="auto",
        choices=["auto", "n2", "quartic", "large-gamma", "grid"],
    )
    p_opt.add_argument("--grid-step", type=float, default=1e-3, dest="grid_step")

    p_sweep = sub.add_parser("sweep", parents=[common], help="export the cost landscape")
    p_sweep.add_argument("--step", type=float, required=True)
    p_sweep.add_argument("--out", required=True, help="path for the delimited dataset")

    p_sim = sub.add_parser("simulate", parents=[common], help="run the event simulator")
    p_sim.add_argument("--horizon", type=float, default=None, help="simulated seconds")
    p_sim.add_argument("--warmup", type=float, default=None, help="discarded seconds")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--reps", type=int, default=None, help="replications")
    return parser


_HANDLERS = {
    "solve": cmd_solve,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.subcommand](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InvalidSimConfig as exc:
        print(f"error: invalid simulation config: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        # e.g. geometric-only operation requested on a general-batch config
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except _INFEASIBLE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except _NUMERIC_ERRORS as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
