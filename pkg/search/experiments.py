"""
Search Experiments for Pair Scout
Seeded ablation and search-mode comparisons on a restricted 1000-pair benchmark
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from accel_sim.simulator import AcceleratorSimulator, load_constants
from config import ACCEL_SPACE_CONFIG, CNN_SPACE_CONFIG, SEARCH_POLICY
from design_space.accel_space import AccelSpace
from design_space.cnn_space import CnnSpace
from evaluators.synthetic import SyntheticEvaluator
from search.codesign_search import CodesignSearch, SearchPolicy
from search.gobi import GobiConfig
from search.performance import COST_FIELDS, PerfRecord, PerfWeights, performance

logger = logging.getLogger(__name__)

ABLATIONS = ("full", "no-second-order", "no-heteroscedastic", "random")
MODE_RUNS = ("codesign", "fix-cnn", "fix-accel")

BENCHMARK_SETTINGS = {
    "graphs": 40,
    "depth_cap": 3,
    "budget": 50,
    "initial_corpus": 10,
    "embedding_dimension": 8,
    "embedding_epochs": 500,
    "surrogate_epochs": 100,
    "gobi_steps": 50,
    "gobi_restarts": 4,
    "candidate_pool": 128,
    "tau_wt": SEARCH_POLICY["tau_wt"],
}


@dataclass
class Benchmark:
    """40 graphs by 25 accelerators: P_ix and P_iy range over five values, everything else pinned"""
    cnn_space: CnnSpace
    accel_space: AccelSpace
    simulator: AcceleratorSimulator
    evaluator: SyntheticEvaluator
    weights: PerfWeights
    optimum: float
    settings: Dict = field(default_factory=dict)

    def true_performance(self, graph, config) -> float:
        hardware = self.simulator.simulate(graph, config)
        return performance(PerfRecord.from_hardware(hardware, self.evaluator.true_accuracy(graph, config)),
                           self.weights)


def build_benchmark(seed: int = 0, settings: Optional[Dict] = None) -> Benchmark:
    cfg = {**BENCHMARK_SETTINGS, **(settings or {})}
    cnn_space = CnnSpace({**CNN_SPACE_CONFIG, "depth_cap": cfg["depth_cap"], "stack_schedule": [1],
                          "level_size_cap": cfg["graphs"]}, seed=seed)
    pinned = {key: [ACCEL_SPACE_CONFIG[key][0]] for key in ("p_ib", "p_of", "p_k", "batch", "mask_buf_mb")}
    accel_space = AccelSpace(ACCEL_SPACE_CONFIG, **pinned, p_if=[16], p_ix=[1, 2, 4, 6, 8], p_iy=[1, 2, 4, 6, 8],
                             act_buf_mb=[8], wgt_buf_mb=[8], mem_types=["RRAM"],
                             mem_configs={"RRAM": [ACCEL_SPACE_CONFIG["mem_configs"]["RRAM"][0]]})
    graphs = cnn_space.level_graphs(1)
    simulator = AcceleratorSimulator(load_constants())
    evaluator = SyntheticEvaluator.seeded(accel_space, graphs, seed=seed, samples=200, tau_wt=cfg["tau_wt"])

    configs = list(accel_space.iter_configs())
    records = [PerfRecord.from_hardware(simulator.simulate(g, c), evaluator.true_accuracy(g, c))
               for g in graphs for c in configs]
    maxima = {name: max(max(r.costs()[name] for r in records), 1e-12) for name in COST_FIELDS}
    weights = PerfWeights(maxima=maxima)
    optimum = max(performance(r, weights) for r in records)
    logger.info(f"🧪 Benchmark: {len(graphs)} graphs x {len(configs)} accelerators, optimum {optimum:.4f}")
    return Benchmark(cnn_space, accel_space, simulator, evaluator, weights, optimum, cfg)


def run_variant(bench: Benchmark, variant: str, seed: int, mode: str = "codesign") -> float:
    """Best true performance among the pairs one seeded search evaluated"""
    cfg = bench.settings
    full_policy = variant != "random"
    policy = SearchPolicy(
        alpha_p=0.1 if full_policy else 0.0, beta_p=0.1 if full_policy else 1.0,
        convergence_patience=cfg["budget"], stack_schedule=[1], workers=1,
        initial_corpus=cfg["initial_corpus"], candidate_pool=cfg["candidate_pool"], budget=cfg["budget"],
        validation_repeats=0, tau_wt=cfg["tau_wt"])
    gobi = GobiConfig(max_steps=cfg["gobi_steps"], restarts=cfg["gobi_restarts"],
                      second_order=variant != "no-second-order")
    search = CodesignSearch(
        bench.cnn_space, bench.accel_space, bench.simulator, bench.evaluator, policy,
        PerfWeights(maxima=dict(bench.weights.maxima)), mode=mode, seed=seed,
        surrogate_config={"epochs": cfg["surrogate_epochs"]}, gobi_config=gobi,
        embedding_config={"dimension": cfg["embedding_dimension"], "epochs": cfg["embedding_epochs"]},
        heteroscedastic=variant != "no-heteroscedastic", fixed_maxima=True)
    result = search.run()
    return max((bench.true_performance(e.graph, e.config) for e in result.trace if e.ok), default=0.0)


def sign_test(wins: Sequence[float], losses: Sequence[float]) -> Dict:
    """One-sided binomial sign test that the first series beats the second; ties dropped"""
    diffs = [a - b for a, b in zip(wins, losses) if a != b]
    positive = sum(1 for d in diffs if d > 0)
    p_value = binomtest(positive, len(diffs), 0.5, alternative="greater").pvalue if diffs else 1.0
    return {"wins": positive, "trials": len(diffs), "p_value": float(p_value)}


def _compare(results: Dict[str, List[float]], reference: str, optimum: float) -> Dict:
    summary = {"optimum": optimum, "variants": {}}
    for name, values in results.items():
        row = {"mean_best": float(np.mean(values)), "std_best": float(np.std(values)), "per_seed": values}
        if name != reference:
            row["vs_" + reference] = sign_test(results[reference], values)
        summary["variants"][name] = row
    return summary


def run_ablation(seeds: Sequence[int] = tuple(range(10)), variants: Sequence[str] = ABLATIONS,
                 bench: Optional[Benchmark] = None, settings: Optional[Dict] = None) -> Dict:
    bench = bench or build_benchmark(0, settings)
    results: Dict[str, List[float]] = {v: [] for v in variants}
    for variant in variants:
        for seed in seeds:
            results[variant].append(run_variant(bench, variant, seed))
            logger.info(f"🔬 {variant} seed {seed}: best {results[variant][-1]:.4f}")
    return _compare(results, variants[0], bench.optimum)


def run_modes(seeds: Sequence[int] = tuple(range(10)), modes: Sequence[str] = MODE_RUNS,
              bench: Optional[Benchmark] = None, settings: Optional[Dict] = None) -> Dict:
    bench = bench or build_benchmark(0, settings)
    results: Dict[str, List[float]] = {m: [] for m in modes}
    for mode in modes:
        for seed in seeds:
            results[mode].append(run_variant(bench, "full", seed, mode=mode))
            logger.info(f"🔬 {mode} seed {seed}: best {results[mode][-1]:.4f}")
    return _compare(results, modes[0], bench.optimum)
