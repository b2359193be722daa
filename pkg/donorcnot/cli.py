"""Command-line front end writing JSON and CSV artifacts.

Exit codes: 0 on success (a non-converged optimization is data, not a
failure), 2 on invalid configuration or arguments, 3 on I/O errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
from pydantic import Field, ValidationError

from donorcnot.grape import (
    GrapeConfig,
    PulseSequence,
    carriers_for,
    optimize,
    summarize,
    sweep,
    sweep_csv,
)
from donorcnot.hamiltonian import (
    DeviceParams,
    NuclearConfig,
    electron_drift,
    post_swap_nuclear_config,
)
from donorcnot.placement import (
    ExchangeModelParams,
    ExchangePair,
    default_model,
    exchange_distribution,
    exchange_grid,
    exchange_profile,
)
from donorcnot.protocol import ProtocolRunner
from donorcnot.scheduler import build_overlap_graph, estimate_parallelism, greedy_parallel_sets
from donorcnot.spectra import CSV_HEADER, allowed_frequencies, transition_table
from donorcnot.utils import JsonModel, csv_text, dumps, write_text

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

AXES = ("[100]", "[110]")
MODES = ("strained", "unstrained")


class RunConfig(JsonModel):
    """Inputs shared by all subcommands.

    `device`, `exchange_model` and `grape` may be inline objects or paths to
    JSON files, resolved relative to the configuration file.
    """

    device: DeviceParams = Field(default_factory=DeviceParams)
    exchange_model: ExchangeModelParams | None = None
    grape: GrapeConfig = Field(default_factory=GrapeConfig)
    output_dir: str = "."
    seed: int = 0

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        """Read a configuration file, inlining referenced JSON files.

        Raises
        ------
        OSError
            If a file cannot be read.
        ValueError
            If a document is not valid JSON (`json.JSONDecodeError`) or does
            not match its model.
        """
        source = Path(path)
        data = json.loads(source.read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            msg = f"{source}: configuration must be a JSON object"
            raise ValueError(msg)
        for key in ("device", "exchange_model", "grape"):
            if isinstance(data.get(key), str):
                ref = source.parent / data[key]
                data[key] = json.loads(ref.read_text(encoding="utf-8"))
        return cls.model_validate(data)


def _axis(value: str) -> str:
    axis = value if value.startswith("[") else f"[{value}]"
    if axis not in AXES:
        msg = f"axis must be one of {', '.join(AXES)}"
        raise argparse.ArgumentTypeError(msg)
    return axis


def _common_flags() -> argparse.ArgumentParser:
    # defaults are suppressed so flags may appear before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="RunConfig JSON file.")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Random seed.")
    common.add_argument(
        "--jobs", type=int, default=argparse.SUPPRESS, help="Worker processes for sweeps."
    )
    common.add_argument("--out", default=argparse.SUPPRESS, help="Output directory.")
    common.add_argument(
        "-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="Debug logging."
    )
    return common


def _exchange_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--axis", type=_axis, default=None, help="[100] or [110].")
    parser.add_argument("--mode", choices=MODES, default=None, help="Silicon strain model.")


def _grid_flags(parser: argparse.ArgumentParser) -> None:
    _exchange_flags(parser)
    parser.add_argument("--sep-tc", type=float, default=14.0, help="T-c separation, nm.")
    parser.add_argument("--sep-cc", type=float, default=18.0, help="c-C separation, nm.")
    parser.add_argument("--limit", type=int, default=None, help="Only the first N grid pairs.")


def _exchange_override_flags(parser: argparse.ArgumentParser, nuclear: bool = True) -> None:
    parser.add_argument("--j-tc", type=float, default=None, help="Target-coupler exchange, MHz.")
    parser.add_argument("--j-cc", type=float, default=None, help="Coupler-control exchange, MHz.")
    if nuclear:
        parser.add_argument(
            "--nuclear",
            default=None,
            help="Frozen nuclei (nT, nc, nC) such as 'dud'; post-swap configuration by default.",
        )


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per experiment."""
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="donorcnot",
        description="Coupler-mediated donor CNOT: exchange statistics, spectra, GRAPE, scheduling.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exchange-dist", parents=[common], help="15-class exchange distribution.")
    p.add_argument("--separation", type=float, default=14.0, help="Nominal separation, nm.")
    _exchange_flags(p)

    p = sub.add_parser("exchange-profile", parents=[common], help="J versus separation.")
    p.add_argument("--start", type=float, default=5.0)
    p.add_argument("--stop", type=float, default=30.0)
    p.add_argument("--step", type=float, default=0.5)

    p = sub.add_parser("spectrum", parents=[common], help="Transition table of one pair.")
    _exchange_override_flags(p)
    p.add_argument("--grid", action="store_true", help="All grid pairs in one long CSV.")
    _grid_flags(p)

    p = sub.add_parser("grape", parents=[common], help="Optimize one CNOT pulse.")
    _exchange_override_flags(p)

    p = sub.add_parser("sweep", parents=[common], help="Optimize every grid pair.")
    _grid_flags(p)

    p = sub.add_parser("schedule", parents=[common], help="Conflict-free rounds of triples.")
    p.add_argument("--frequencies", default=None, help="JSON list of per-triple frequency lists.")
    p.add_argument("--tolerance", type=float, default=1.0, help="Collision distance, MHz.")
    p.add_argument("--broadband-tolerance", type=float, default=None)
    p.add_argument("--strategy", choices=("min_degree", "random"), default="min_degree")
    _grid_flags(p)

    p = sub.add_parser("estimate", parents=[common], help="Random-graph parallelism estimate.")
    p.add_argument("--n", type=int, default=225, help="Number of triples.")
    p.add_argument("--p", type=float, default=0.3, help="Collision probability.")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--strategy", choices=("random", "min_degree"), default="random")

    p = sub.add_parser("protocol-verify", parents=[common], help="Truth table of the protocol.")
    p.add_argument("--pulse", default=None, help="Pulse JSON; the ideal CNOT when omitted.")
    p.add_argument("--coupler-nucleus", default="up", help="Spectator coupler nucleus.")
    p.add_argument("--micro-steps", type=int, default=20)
    _exchange_override_flags(p, nuclear=False)
    return parser


class _Context:
    """Resolved configuration for one invocation."""

    def __init__(self, args: argparse.Namespace) -> None:
        config = getattr(args, "config", None)
        self.run = RunConfig.load(config) if config else RunConfig()
        self.seed: int = getattr(args, "seed", self.run.seed)
        self.jobs: int = getattr(args, "jobs", 1)
        self.out = Path(getattr(args, "out", self.run.output_dir))
        self.args = args

    def write(self, name: str, text: str) -> Path:
        path = write_text(self.out / name, text)
        logger.info("wrote %s", path)
        sys.stdout.write(f"{path}\n")
        return path

    def model(self) -> ExchangeModelParams:
        mode, axis = self.args.mode, self.args.axis
        given = self.run.exchange_model
        if given is not None and mode in (None, given.mode) and axis in (None, given.axis):
            return given
        return default_model(mode or "strained", axis or "[100]")

    def device(self) -> DeviceParams:
        device = self.run.device
        j_tc, j_cc = self.args.j_tc, self.args.j_cc
        if j_tc is None and j_cc is None:
            return device
        return device.with_exchange(
            device.j_tc_mhz if j_tc is None else j_tc,
            device.j_cc_mhz if j_cc is None else j_cc,
        )

    def nuclear(self) -> NuclearConfig:
        text = self.args.nuclear
        return post_swap_nuclear_config() if text is None else NuclearConfig.parse(text)

    def grape(self) -> GrapeConfig:
        config = self.run.grape
        # --seed, then RunConfig.seed, then the GRAPE document's own seed
        if hasattr(self.args, "seed") or "seed" in self.run.model_fields_set:
            return config.model_copy(update={"seed": self.seed})
        return config

    def grid(self) -> list[ExchangePair]:
        model = self.model()
        dist_tc = exchange_distribution(self.args.sep_tc, model)
        dist_cc = exchange_distribution(self.args.sep_cc, model)
        grid = exchange_grid(dist_tc, dist_cc)
        limit = self.args.limit
        if limit is not None:
            if limit < 1:
                msg = "--limit must be positive"
                raise ValueError(msg)
            grid = grid[:limit]
        return grid


def cmd_exchange_dist(ctx: _Context) -> None:
    """Write the 15-class distribution CSV."""
    dist = exchange_distribution(ctx.args.separation, ctx.model())
    ctx.write("exchange_dist.csv", dist.to_csv())


def cmd_exchange_profile(ctx: _Context) -> None:
    """Write J versus separation for both strain models along both axes."""
    args = ctx.args
    if not args.step > 0 or args.stop < args.start:
        msg = "need step > 0 and stop >= start"
        raise ValueError(msg)
    separations = np.arange(args.start, args.stop + 0.5 * args.step, args.step).round(9)
    rows = []
    for mode in MODES:
        for axis in AXES:
            model = default_model(mode, axis)  # type: ignore[arg-type]
            profile = exchange_profile(separations.tolist(), model)
            rows.extend((float(sep), axis, mode, j) for sep, j in profile)
    ctx.write("exchange_profile.csv", csv_text(("separation_nm", "axis", "mode", "j_mhz"), rows))


def cmd_spectrum(ctx: _Context) -> None:
    """Write the transition table of one pair, or of every grid pair."""
    grape = ctx.run.grape
    nuclear = ctx.nuclear()
    if not ctx.args.grid:
        device = ctx.device()
        table = transition_table(
            electron_drift(device, nuclear), grape.element_threshold, device
        )
        ctx.write("spectrum.csv", table.to_csv())
        return
    base = ctx.run.device
    rows = []
    for pair in ctx.grid():
        device = base.with_exchange(pair.j_tc, pair.j_cc)
        table = transition_table(electron_drift(device, nuclear), grape.element_threshold, device)
        rows.extend((pair.index, pair.j_tc, pair.j_cc, *row) for row in table.records())
    header = ("pair_index", "j_tc_mhz", "j_cc_mhz", *CSV_HEADER)
    ctx.write("spectrum_grid.csv", csv_text(header, rows))


def cmd_grape(ctx: _Context) -> None:
    """Optimize one pulse; write it and a one-row report."""
    device = ctx.device()
    config = ctx.grape()
    drift = electron_drift(device, ctx.nuclear())
    carriers = carriers_for(drift, config.element_threshold, config.merge_tolerance)
    pulse, report = optimize(config, drift, carriers, device=device)
    ctx.write("pulse.json", pulse.to_json())
    header = ("j_tc_mhz", "j_cc_mhz", "fidelity", "iterations", "converged")
    ctx.write("grape_report.csv", csv_text(header, [report.to_row()]))


def cmd_sweep(ctx: _Context) -> None:
    """Optimize every grid pair; write the per-pair CSV and a summary."""
    grid = ctx.grid()
    reports = sweep(grid, ctx.grape(), ctx.run.device, jobs=ctx.jobs)
    summary = summarize(reports, grid)
    ctx.write("sweep.csv", sweep_csv(reports, grid))
    ctx.write(
        "sweep_summary.json",
        dumps(
            {
                "n_pairs": summary.n_pairs,
                "n_converged": summary.n_converged,
                "weighted_success": summary.weighted_success,
            }
        ),
    )


def _frequency_sets(ctx: _Context) -> list[list[float]]:
    path = ctx.args.frequencies
    if path is not None:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, list) or not all(isinstance(f, list) for f in data):
            msg = f"{path}: expected a JSON list of frequency lists"
            raise ValueError(msg)
        return [[float(x) for x in f] for f in data]
    grape = ctx.run.grape
    nuclear = post_swap_nuclear_config()
    sets = []
    for pair in ctx.grid():
        drift = electron_drift(ctx.run.device.with_exchange(pair.j_tc, pair.j_cc), nuclear)
        table = transition_table(drift, grape.element_threshold)
        sets.append(allowed_frequencies(table, grape.merge_tolerance))
    return sets


def cmd_schedule(ctx: _Context) -> None:
    """Partition triples into conflict-free rounds."""
    args = ctx.args
    graph = build_overlap_graph(_frequency_sets(ctx), args.tolerance, args.broadband_tolerance)
    plan = greedy_parallel_sets(graph, seed=ctx.seed, strategy=args.strategy)
    document = json.loads(plan.to_json())
    document.update(
        n_nodes=graph.n_nodes,
        n_edges=graph.n_edges(),
        density=graph.density(),
        n_rounds=plan.n_rounds,
        sizes=plan.sizes(),
    )
    ctx.write("schedule.json", dumps(document))


def cmd_estimate(ctx: _Context) -> None:
    """Monte-Carlo estimate of the first concurrent round."""
    args = ctx.args
    estimate = estimate_parallelism(
        args.n, args.p, args.trials, seed=ctx.seed, strategy=args.strategy
    )
    ctx.write("estimate.json", estimate.to_json())


def cmd_protocol_verify(ctx: _Context) -> None:
    """Run the truth table with the ideal gate or a pulse."""
    args = ctx.args
    pulse = None if args.pulse is None else PulseSequence.from_json(Path(args.pulse))
    runner = ProtocolRunner(
        pulse,
        device=ctx.device(),
        coupler_nucleus=args.coupler_nucleus,
        micro_steps=args.micro_steps,
    )
    ctx.write("protocol_verify.json", runner.report())


COMMANDS: dict[str, Callable[[_Context], None]] = {
    "exchange-dist": cmd_exchange_dist,
    "exchange-profile": cmd_exchange_profile,
    "spectrum": cmd_spectrum,
    "grape": cmd_grape,
    "sweep": cmd_sweep,
    "schedule": cmd_schedule,
    "estimate": cmd_estimate,
    "protocol-verify": cmd_protocol_verify,
}


def _is_decode_error(error: Exception) -> bool:
    if isinstance(error, json.JSONDecodeError):
        return True
    return isinstance(error, ValidationError) and any(
        e["type"] == "json_invalid" for e in error.errors()
    )


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        COMMANDS[args.command](_Context(args))
    except OSError as e:
        logger.error("I/O error: %s", e)
        return EXIT_IO
    except (ValueError, TypeError, RuntimeError) as e:
        if _is_decode_error(e):
            logger.error("malformed input: %s", e)
            return EXIT_IO
        logger.error("invalid configuration: %s", e)
        return EXIT_CONFIG
    return EXIT_OK
