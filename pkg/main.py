#!/usr/bin/env python3
"""
Pair Scout - Main Execution Script
CNN and accelerator co-design search at desk scale

Subcommands cover the whole pipeline:
1. Inspecting the CNN and accelerator design spaces
2. Training and inspecting CNN embeddings
3. Simulating single CNN-accelerator pairs
4. Running the active-learning co-design search
5. Extracting Pareto fronts and exporting plot-ready tables
"""

import functools
import json
import logging
import os
import sys
from datetime import datetime
from typing import Dict, Optional

import click
import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

# Add project root to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from accel_sim.simulator import AcceleratorSimulator, SimulationError, area_breakdown, load_constants
from config import (ACCEL_SPACE_CONFIG, CNN_SPACE_CONFIG, EMBEDDING_CONFIG, EVALUATOR_CONFIG, LOGGING_CONFIG,
                    OUTPUT_CONFIG, SURROGATE_CONFIG)
from design_space.accel_space import ACCEL_FIELDS, AccelSpace, AcceleratorConfig, get_preset
from design_space.cnn2vec import EmbeddingTable, train_embeddings
from design_space.cnn_space import CnnSpace, DesignSpaceError, load_graph, neighbors
from evaluators.base import EvaluatorError
from evaluators.synthetic import SyntheticEvaluator
from evaluators.tabular import TabularEvaluator, load_tabular
from output_generation.report_generator import ReportGenerator, RunManifest, config_checksum, load_trace, pareto_rows
from search.codesign_search import MODES, CodesignSearch, SearchPolicy
from search.experiments import run_ablation, run_modes
from search.gobi import ConstraintSet, GobiConfig, InfeasibleConstraintsError
from search.pareto import OBJECTIVES
from search.performance import ConfigError, PerfRecord, PerfWeights
from search.surrogate import SearchError

logger = logging.getLogger("pair_scout")

RUN_CONFIG_KEYS = ("policy", "weights", "surrogate", "gobi", "cnn_space", "accel_space", "embedding",
                   "evaluator", "budget", "seed", "mode", "constraints")
USAGE_ERRORS = (ConfigError, DesignSpaceError, SimulationError, EvaluatorError, SearchError,
                OSError, json.JSONDecodeError, ValueError)


def setup_logging(level: str = LOGGING_CONFIG["level"], log_dir: Optional[str] = LOGGING_CONFIG["log_dir"]):
    """Rich console handler on stderr plus a dated log file when a log directory is configured"""
    handlers = [RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True)]
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        file_handler = logging.FileHandler(
            os.path.join(log_dir, f'pair_scout_{datetime.now().strftime("%Y%m%d")}.log'))
        file_handler.setFormatter(logging.Formatter(LOGGING_CONFIG["format"]))
        handlers.append(file_handler)
    logging.basicConfig(level=level.upper(), format="%(message)s", handlers=handlers, force=True)


def exit_codes(func):
    """Maps domain errors to exit codes: 1 usage or configuration, 3 infeasible constraints"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            code = func(*args, **kwargs)
        except InfeasibleConstraintsError as e:
            logger.error(f"❌ Infeasible constraints: {e}")
            code = 3
        except USAGE_ERRORS as e:
            logger.error(f"❌ {type(e).__name__}: {e}")
            code = 1
        click.get_current_context().exit(code or 0)
    return wrapper


def _check_keys(section: str, values: Dict, known) -> Dict:
    unknown = set(values) - set(known)
    if unknown:
        raise ConfigError(f"Unknown keys in '{section}': {sorted(unknown)}")
    return dict(values)


def load_run_config(path: Optional[str]) -> Dict:
    if not path:
        return {}
    with open(path, "r") as f:
        config = json.load(f)
    if not isinstance(config, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    _check_keys("run config", config, RUN_CONFIG_KEYS)
    return config


def parse_accel(value: str, space: AccelSpace) -> AcceleratorConfig:
    """A preset name, or 13 comma-separated values with the memory config written as BxRxC"""
    parts = [p.strip() for p in value.split(",")]
    if len(parts) == 1:
        return get_preset(value).config
    if len(parts) != len(ACCEL_FIELDS):
        raise ConfigError(f"Accelerator vector needs {len(ACCEL_FIELDS)} values ({', '.join(ACCEL_FIELDS)})")
    numbers = [int(p) for p in parts[:11]]
    mem_config = tuple(int(v) for v in parts[12].lower().split("x"))
    config = AcceleratorConfig(*numbers, mem_type=parts[11].upper(), mem_config=mem_config)
    space.validate(config)
    return config


def _echo_json(data) -> None:
    click.echo(json.dumps(data, indent=2, sort_keys=True, default=str))


class PairScout:
    """Main orchestrator for one co-design search run"""

    def __init__(self, run_config: Dict, seed: Optional[int] = None, mode: Optional[str] = None,
                 workers: Optional[int] = None, output_dir: Optional[str] = None):
        self.run_config = run_config
        self.seed = run_config.get("seed", 0) if seed is None else seed
        self.mode = mode or run_config.get("mode", "codesign")
        self.workers = workers
        self.report_generator = ReportGenerator(output_dir)
        self.manifest = RunManifest("search run", self.seed, config_checksum(run_config))
        self.result = None

    def run(self) -> int:
        """Run the complete search and always write the manifest"""
        logger.info("🚀 Starting Pair Scout co-design search")
        try:
            search = self._build_search()
            self.manifest.lap("setup")

            self.result = search.run()
            self.manifest.lap("search")

            self._generate_reports()
            self.manifest.lap("reports")
            self._print_summary()
            self.manifest.status = self.result.status
            self.manifest.exit_code = self.result.exit_code
            return self.result.exit_code
        except InfeasibleConstraintsError as e:
            self.manifest.status, self.manifest.exit_code, self.manifest.error = "infeasible", 3, str(e)
            raise
        except Exception as e:
            self.manifest.status, self.manifest.exit_code, self.manifest.error = "failed", 1, str(e)
            raise
        finally:
            self.report_generator.write_manifest(self.manifest)

    def _build_search(self) -> CodesignSearch:
        """Phase 1: Build spaces, simulator, evaluator and policy from the run config"""
        logger.info("📊 Phase 1: Building design spaces")
        cfg = self.run_config
        if self.mode not in MODES:
            raise ConfigError(f"Unknown mode '{self.mode}', expected one of {MODES}")

        cnn_config = {**CNN_SPACE_CONFIG, **_check_keys("cnn_space", cfg.get("cnn_space", {}), CNN_SPACE_CONFIG)}
        accel_overrides = _check_keys("accel_space", cfg.get("accel_space", {}), ACCEL_SPACE_CONFIG)
        policy_values = dict(cfg.get("policy", {}))
        policy_values.setdefault("stack_schedule", cnn_config["stack_schedule"])
        if "budget" in cfg:
            policy_values["budget"] = cfg["budget"]
        if self.workers:
            policy_values["workers"] = self.workers
        policy = SearchPolicy.from_dict(policy_values)
        cnn_config["stack_schedule"] = policy.stack_schedule

        cnn_space = CnnSpace(cnn_config, seed=self.seed)
        accel_space = AccelSpace(ACCEL_SPACE_CONFIG, **accel_overrides)
        simulator = AcceleratorSimulator(load_constants(), input_shape=cnn_config["input_shape"])
        evaluator_config = _check_keys("evaluator", cfg.get("evaluator", {}), list(EVALUATOR_CONFIG) + ["path"])
        evaluator = self._build_evaluator(evaluator_config, cnn_space, accel_space, policy)
        constraints = ConstraintSet.from_dict(cfg.get("constraints"), simulator)
        gobi_values = _check_keys("gobi", cfg.get("gobi", {}), [f for f in GobiConfig.__dataclass_fields__
                                                                if f not in ("freeze_mask", "lower", "upper")])
        _check_keys("surrogate", cfg.get("surrogate", {}), SURROGATE_CONFIG)
        _check_keys("embedding", cfg.get("embedding", {}), EMBEDDING_CONFIG)

        return CodesignSearch(
            cnn_space, accel_space, simulator, evaluator, policy, PerfWeights.from_dict(cfg.get("weights")),
            mode=self.mode, seed=self.seed, surrogate_config=cfg.get("surrogate"),
            gobi_config=GobiConfig.from_dict(gobi_values), constraints=constraints,
            embedding_config=cfg.get("embedding"), evaluator_config=evaluator_config)

    def _build_evaluator(self, evaluator_config: Dict, cnn_space: CnnSpace, accel_space: AccelSpace,
                         policy: SearchPolicy):
        kind = evaluator_config.get("kind", EVALUATOR_CONFIG["kind"])
        if kind == "synthetic":
            return SyntheticEvaluator.seeded(accel_space, cnn_space.level_graphs(1), self.seed, evaluator_config,
                                             tau_wt=policy.tau_wt)
        if kind == "tabular":
            path = evaluator_config.get("path") or os.path.join(
                evaluator_config.get("benchmark_dir", EVALUATOR_CONFIG["benchmark_dir"]), "benchmark.csv")
            settings = {k: v for k, v in evaluator_config.items() if k != "path"}
            return TabularEvaluator(load_tabular(path), settings, policy.tau_wt)
        raise ConfigError(f"Unknown evaluator kind '{kind}'")

    def _generate_reports(self):
        """Phase 2: Write trace, summary and Excel workbook"""
        logger.info("📋 Phase 2: Generating reports")
        rows = [entry.to_row() for entry in self.result.trace]
        summary = {**self.result.summary(), "seed": self.seed, "mode": self.mode}
        self.report_generator.write_trace_csv(rows)
        ok_rows = [row for row in rows if row["status"] == "ok"]
        self.report_generator.write_summary(summary, ok_rows)
        self.report_generator.write_trace_xlsx(ok_rows, summary)

    def _print_summary(self):
        """Phase 3: Print run summary"""
        logger.info("🎉 Phase 3: Search complete!")
        result = self.result
        console = Console()
        table = Table(title="Pair Scout search")
        table.add_column("Metric")
        table.add_column("Value")
        table.add_row("Status", result.status)
        table.add_row("Evaluations", str(len(result.trace)))
        table.add_row("Total cost", f"{result.total_cost:.2f}")
        table.add_row("Best performance", f"{result.best_performance:.4f}")
        if result.best_graph is not None:
            table.add_row("Best CNN", result.best_graph.digest[:12])
            table.add_row("Best accelerator", ",".join(f"{k}={v}" for k, v in result.best_config.to_json().items()))
            table.add_row("Best accuracy", f"{result.best_record.accuracy:.4f}")
        console.print(table)


@click.group()
@click.option("--log-level", default=LOGGING_CONFIG["level"], show_default=True, help="Logging level")
def cli(log_level: str):
    """Pair Scout - CNN and accelerator co-design search"""
    setup_logging(log_level)


@cli.group()
def space():
    """Inspect the design spaces"""


@space.command("accel")
@click.option("--cardinality", is_flag=True, help="Print the number of accelerator configurations")
@click.option("--sample", "sample", type=int, default=None, help="Print N random configurations")
@click.option("--seed", type=int, default=0, show_default=True)
@exit_codes
def space_accel(cardinality: bool, sample: Optional[int], seed: int):
    """Accelerator design space"""
    accel_space = AccelSpace()
    if not cardinality and sample is None:
        raise ConfigError("Pass --cardinality or --sample N")
    if cardinality:
        click.echo(accel_space.cardinality())
    if sample is not None:
        for config in accel_space.sample(np.random.default_rng(seed), sample):
            click.echo(json.dumps(config.to_json(), sort_keys=True))
    return 0


@space.command("cnn")
@click.option("--enumerate", "enumerate_", is_flag=True, help="List the graphs of one level")
@click.option("--level", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@exit_codes
def space_cnn(enumerate_: bool, level: int, seed: int):
    """CNN design space levels"""
    cnn_space = CnnSpace(seed=seed)
    if not enumerate_:
        for lvl in range(1, len(cnn_space.config["stack_schedule"]) + 1):
            click.echo(f"level {lvl}: stack size {cnn_space.stack_size(lvl)}, {cnn_space.level_size(lvl)} graphs")
        return 0
    graphs = cnn_space.level_graphs(level)
    table = Table(title=f"Level {level} (stack size {cnn_space.stack_size(level)})")
    for column in ("digest", "stacks", "body modules", "head blocks"):
        table.add_column(column)
    for graph in graphs:
        table.add_row(graph.digest[:12], str(len(graph.stacks)), str(len(graph.body)), str(len(graph.head.blocks)))
    Console().print(table)
    click.echo(f"{len(graphs)} graphs (level size {cnn_space.level_size(level)})")
    return 0


@cli.group()
def embed():
    """Train and inspect CNN embeddings"""


@embed.command("train")
@click.option("--level", type=int, default=1, show_default=True)
@click.option("--dim", type=int, default=EMBEDDING_CONFIG["dimension"], show_default=True)
@click.option("--epochs", type=int, default=EMBEDDING_CONFIG["epochs"], show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@exit_codes
def embed_train(level: int, dim: int, epochs: int, seed: int, output: str):
    """Embed the graphs of one level and save the table"""
    cnn_space = CnnSpace(seed=seed)
    table, stress = train_embeddings(cnn_space.level_graphs(level), cnn_space.costs, dim, epochs, seed)
    table.save(output)
    _echo_json({"graphs": len(table), "d": table.d, "stress_per_pair": stress, "output": output})
    return 0


@embed.command("inspect")
@click.argument("table_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--digest", default=None, help="Show the nearest graphs to this digest (prefix allowed)")
@click.option("-k", "k", type=int, default=5, show_default=True)
@exit_codes
def embed_inspect(table_path: str, digest: Optional[str], k: int):
    """Summarize a saved embedding table"""
    table = EmbeddingTable.load(table_path)
    info = {"graphs": len(table), "d": table.d, "stress_per_pair": table.stress}
    if digest:
        matches = [d for d in table.digests if d.startswith(digest.lower())]
        if len(matches) != 1:
            raise ConfigError(f"Digest prefix '{digest}' matches {len(matches)} graphs")
        query = table.graphs[matches[0]]
        near = neighbors(query, [g for g in table.graphs.values() if g.digest != query.digest], table.entries, k)
        info["neighbors"] = [{"digest": n.digest, "distance": n.distance, "overlap": n.overlap}
                             for n in near.neighbors]
    _echo_json(info)
    return 0


@cli.command("sim")
@click.option("--cnn", "cnn_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--accel", required=True, help="Preset name or 13 comma-separated values")
@click.option("--accuracy", type=float, default=0.0, show_default=True, help="Accuracy attached to the record")
@exit_codes
def sim(cnn_path: str, accel: str, accuracy: float):
    """Simulate one CNN-accelerator pair"""
    graph = load_graph(cnn_path)
    config = parse_accel(accel, AccelSpace())
    simulator = AcceleratorSimulator(load_constants())
    hardware = simulator.simulate(graph, config)
    record = PerfRecord.from_hardware(hardware, accuracy)
    _echo_json({"cnn": graph.digest, "accel": config.to_json(), "record": record.to_row(),
                "area_breakdown": area_breakdown(config, simulator.constants),
                "total_cycles": hardware.total_cycles})
    return 0


@cli.group()
def search():
    """Co-design search"""


@search.command("run")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--mode", type=click.Choice(MODES), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--output-dir", default=OUTPUT_CONFIG["output_dir"], show_default=True)
@exit_codes
def search_run(config_path: Optional[str], mode: Optional[str], seed: Optional[int], workers: Optional[int],
               output_dir: str):
    """Run the active-learning search; exit 0 converged, 2 budget exhausted, 3 infeasible"""
    try:
        run_config = load_run_config(config_path)
    except USAGE_ERRORS:
        ReportGenerator(output_dir).write_manifest(RunManifest("search run", seed, status="failed", exit_code=1,
                                                               error=f"could not load {config_path}"))
        raise
    return PairScout(run_config, seed, mode, workers, output_dir).run()


@cli.command("pareto")
@click.option("--trace", "trace_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--objective", type=click.Choice(sorted(OBJECTIVES)), default="latency", show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Print rows as JSON")
@exit_codes
def pareto(trace_path: str, objective: str, as_json: bool):
    """Non-dominated pairs under maximized accuracy and one minimized objective"""
    rows = pareto_rows(load_trace(trace_path), objective)
    if as_json:
        _echo_json(rows)
        return 0
    table = Table(title=f"Pareto front ({objective})")
    for column in ("iteration", "digest", "accuracy", objective):
        table.add_column(column)
    for row in rows:
        table.add_row(str(row.get("iteration", "")), str(row.get("digest", ""))[:12],
                      f"{float(row['accuracy']):.4f}", f"{row['objective_value']:.6g}")
    Console().print(table)
    click.echo(f"{len(rows)} non-dominated record(s)")
    return 0


@cli.command("export")
@click.option("--trace", "trace_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json", "xlsx"]), default="csv", show_default=True)
@click.option("--output-dir", default=OUTPUT_CONFIG["output_dir"], show_default=True)
@exit_codes
def export(trace_path: str, fmt: str, output_dir: str):
    """Re-export a trace as plot-ready CSV, JSON or Excel"""
    path = ReportGenerator(output_dir).export(load_trace(trace_path), fmt)
    click.echo(path)
    return 0


@cli.group()
def experiment():
    """Seeded comparisons on the 1000-pair benchmark"""


def _run_experiment(name: str, runner, seeds: int, output_dir: str) -> int:
    reports = ReportGenerator(output_dir)
    manifest = RunManifest(f"experiment {name}", 0, config_checksum({"seeds": seeds}))
    try:
        summary = runner(seeds=tuple(range(seeds)))
        manifest.lap(name)
        reports.write_json(summary, f"{name}.json")
        _echo_json(summary)
        manifest.status, manifest.exit_code = "ok", 0
        return 0
    except Exception as e:
        manifest.status, manifest.exit_code, manifest.error = "failed", 1, str(e)
        raise
    finally:
        reports.write_manifest(manifest, f"{name}_manifest.json")


@experiment.command("ablation")
@click.option("--seeds", type=int, default=10, show_default=True)
@click.option("--output-dir", default=OUTPUT_CONFIG["output_dir"], show_default=True)
@exit_codes
def experiment_ablation(seeds: int, output_dir: str):
    """Full search against no-second-order, no-heteroscedastic and random variants"""
    return _run_experiment("ablation", run_ablation, seeds, output_dir)


@experiment.command("modes")
@click.option("--seeds", type=int, default=10, show_default=True)
@click.option("--output-dir", default=OUTPUT_CONFIG["output_dir"], show_default=True)
@exit_codes
def experiment_modes(seeds: int, output_dir: str):
    """Co-design against fixed-CNN and fixed-accelerator searches"""
    return _run_experiment("modes", run_modes, seeds, output_dir)


def main():
    """Main entry point; click usage errors exit 1 so that 2 stays reserved for budget exhaustion"""
    try:
        code = cli.main(standalone_mode=False)
    except click.ClickException as e:
        e.show()
        sys.exit(1)
    except (click.Abort, KeyboardInterrupt):
        logger.info("Process interrupted by user")
        sys.exit(1)
    sys.exit(code or 0)


if __name__ == "__main__":
    main()
