"""
Co-design Search for Pair Scout
Active-learning loop over CNN-accelerator pairs with GOBI, uncertainty and diversity sampling
"""

import logging
import math
from collections import Counter, deque
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Callable, Deque, Dict, List, Optional, Set, Tuple

import numpy as np
from retrying import retry
from tqdm import tqdm

from accel_sim.simulator import AcceleratorSimulator, HardwareCost
from config import EMBEDDING_CONFIG, EVALUATOR_CONFIG, SEARCH_POLICY
from design_space.accel_space import EMBEDDING_SIZE, AccelSpace, AcceleratorConfig
from design_space.cnn2vec import EmbeddingTable, train_embeddings
from design_space.cnn_space import CnnSpace, ComputationalGraph, crossover, neighbors, restack
from evaluators.base import Evaluation, Recipe, sample_recipe
from search.gobi import (ConstraintSet, GobiConfig, InfeasibleConstraintsError, freeze_mask, optimize,
                         pair_embedding, snap)
from search.performance import ConfigError, PerfRecord, PerfWeights, PerformanceScorer
from search.surrogate import Corpus, SurrogateStack

MODES = ("codesign", "fix-cnn", "fix-accel")
BRANCHES = ("gobi", "uncertainty", "diversity")

Pair = Tuple[str, AcceleratorConfig]


@dataclass
class SearchPolicy:
    alpha_p: float = SEARCH_POLICY["alpha_p"]
    beta_p: float = SEARCH_POLICY["beta_p"]
    tau_wt: float = SEARCH_POLICY["tau_wt"]
    convergence_tol: float = SEARCH_POLICY["convergence_tol"]
    convergence_patience: int = SEARCH_POLICY["convergence_patience"]
    stack_schedule: List[int] = field(default_factory=lambda: list(SEARCH_POLICY["stack_schedule"]))
    workers: int = SEARCH_POLICY["workers"]
    initial_corpus: int = SEARCH_POLICY["initial_corpus"]
    candidate_pool: int = SEARCH_POLICY["candidate_pool"]
    budget: int = SEARCH_POLICY["budget"]
    crossover_parents: int = SEARCH_POLICY["crossover_parents"]
    crossover_children: int = SEARCH_POLICY["crossover_children"]
    validation_repeats: int = SEARCH_POLICY["validation_repeats"]

    def __post_init__(self):
        if self.alpha_p < 0 or self.beta_p < 0 or self.alpha_p + self.beta_p > 1.0 + 1e-12:
            raise ConfigError(f"Need alpha_p, beta_p >= 0 with alpha_p + beta_p <= 1, "
                              f"got {self.alpha_p} and {self.beta_p}")
        if not 0.0 <= self.tau_wt <= 1.0:
            raise ConfigError(f"tau_wt must lie in [0, 1], got {self.tau_wt}")
        if self.convergence_patience < 1 or self.convergence_tol <= 0:
            raise ConfigError("Convergence needs a positive tolerance and patience")
        if not self.stack_schedule or any(s < 1 for s in self.stack_schedule):
            raise ConfigError(f"Invalid stack schedule {self.stack_schedule}")
        if any(a % b for a, b in zip(self.stack_schedule, self.stack_schedule[1:])):
            raise ConfigError(f"Each stack size must divide the previous one: {self.stack_schedule}")
        if self.workers < 1 or self.budget < 1 or self.initial_corpus < 1:
            raise ConfigError("workers, budget and initial_corpus must be positive")

    @classmethod
    def from_dict(cls, data: Optional[Dict] = None) -> "SearchPolicy":
        data = dict(data or {})
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"Unknown policy keys: {sorted(unknown)}")
        return cls(**data)


def choose_branch(u: float, policy: SearchPolicy) -> str:
    if u < 1.0 - policy.alpha_p - policy.beta_p:
        return "gobi"
    if u < 1.0 - policy.beta_p:
        return "uncertainty"
    return "diversity"


class ConvergenceMonitor:
    """Fires once the tracked value moved less than tol for patience consecutive updates"""

    def __init__(self, tol: float = SEARCH_POLICY["convergence_tol"],
                 patience: int = SEARCH_POLICY["convergence_patience"]):
        self.tol = tol
        self.patience = patience
        self.history: List[float] = []
        self.stable = 0

    def update(self, value: float) -> bool:
        if self.history and abs(value - self.history[-1]) < self.tol:
            self.stable += 1
        else:
            self.stable = 0
        self.history.append(value)
        return self.converged

    @property
    def converged(self) -> bool:
        return self.stable >= self.patience

    def reset(self) -> None:
        self.history.clear()
        self.stable = 0


@dataclass
class TraceEntry:
    iteration: int
    level: int
    stack_size: int
    branch: str
    graph: ComputationalGraph
    config: AcceleratorConfig
    recipe_id: str
    record: Optional[PerfRecord] = None
    performance: Optional[float] = None
    cost: float = 0.0
    transfer: bool = False
    early_stopped: bool = False
    status: str = "ok"
    note: str = ""
    overlap: Optional[float] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_row(self) -> Dict:
        row = {
            "iteration": self.iteration,
            "level": self.level,
            "stack_size": self.stack_size,
            "branch": self.branch,
            "digest": self.graph.digest,
            "mem_type": self.config.mem_type,
            "accel": ",".join(str(v) for v in _config_values(self.config)),
            "recipe_id": self.recipe_id,
            "status": self.status,
            "cost": self.cost,
            "transfer": self.transfer,
            "early_stopped": self.early_stopped,
            "overlap": self.overlap,
            "performance": self.performance,
            "note": self.note,
        }
        record = self.record.to_row() if self.record else {k: None for k in
                                                            ("latency_ms", "area_mm2", "e_dyn_mJ",
                                                             "e_leak_mJ", "accuracy", "edp")}
        row.update(record)
        return row


def _config_values(config: AcceleratorConfig) -> List:
    data = config.to_json()
    banks, ranks, channels = data.pop("mem_config")
    data.pop("mem_type")
    return list(data.values()) + [banks, ranks, channels]


@dataclass
class SearchResult:
    best_graph: Optional[ComputationalGraph]
    best_config: Optional[AcceleratorConfig]
    best_record: Optional[PerfRecord]
    best_performance: float
    trace: List[TraceEntry]
    status: str  # converged | budget-exhausted | space-exhausted
    level: int
    weights: PerfWeights
    validation_mean: Optional[float] = None

    @property
    def exit_code(self) -> int:
        return 2 if self.status == "budget-exhausted" else 0

    @property
    def total_cost(self) -> float:
        return sum(entry.cost for entry in self.trace)

    def summary(self) -> Dict:
        branches = Counter(entry.branch for entry in self.trace)
        return {
            "status": self.status,
            "level": self.level,
            "evaluations": len(self.trace),
            "failed": sum(1 for entry in self.trace if not entry.ok),
            "branches": dict(sorted(branches.items())),
            "transfers": sum(1 for entry in self.trace if entry.transfer),
            "early_stopped": sum(1 for entry in self.trace if entry.early_stopped),
            "total_cost": self.total_cost,
            "best_performance": self.best_performance,
            "best_digest": self.best_graph.digest if self.best_graph else None,
            "best_accel": self.best_config.to_json() if self.best_config else None,
            "best_record": self.best_record.to_row() if self.best_record else None,
            "validation_mean_performance": self.validation_mean,
            "maxima": dict(self.weights.maxima),
        }


@dataclass
class _Job:
    iteration: int
    branch: str
    graph: ComputationalGraph
    config: AcceleratorConfig
    recipe: Recipe
    overlap: Optional[float]
    floor: Optional[float]
    note: str = ""


class CodesignSearch:
    """
    Active-learning search over (CNN, accelerator) pairs.

    Each iteration draws u ~ U(0, 1) and dispatches a GOBI query (u < 1 - alpha_p - beta_p),
    the most uncertain pool candidate (u < 1 - beta_p) or a random pair. A level ends when the
    best observed performance stops moving; the next level restacks the corpus graphs at the next
    stack size and adds crossover children of the best graphs.
    """

    def __init__(self, cnn_space: CnnSpace, accel_space: AccelSpace, simulator: AcceleratorSimulator,
                 evaluator, policy: Optional[SearchPolicy] = None, weights: Optional[PerfWeights] = None,
                 mode: str = "codesign", seed: int = 0, surrogate_config: Optional[Dict] = None,
                 gobi_config: Optional[GobiConfig] = None, constraints: Optional[ConstraintSet] = None,
                 embedding_config: Optional[Dict] = None, evaluator_config: Optional[Dict] = None,
                 heteroscedastic: bool = True, fixed_graph: Optional[ComputationalGraph] = None,
                 fixed_config: Optional[AcceleratorConfig] = None, fixed_maxima: bool = False,
                 on_evaluation: Optional[Callable[[TraceEntry], None]] = None):
        self.logger = logging.getLogger(__name__)
        if mode not in MODES:
            raise ConfigError(f"Unknown mode '{mode}', expected one of {MODES}")
        self.cnn_space = cnn_space
        self.accel_space = accel_space
        self.simulator = simulator
        self.evaluator = evaluator
        self.policy = policy or SearchPolicy()
        evaluator_tau = getattr(evaluator, "tau_wt", self.policy.tau_wt)
        if evaluator_tau != self.policy.tau_wt:
            raise ConfigError(f"Evaluator transfer threshold {evaluator_tau} differs from policy tau_wt "
                              f"{self.policy.tau_wt}")
        self.scorer = PerformanceScorer(weights or PerfWeights(), fixed_maxima)
        self.mode = mode
        self.seed = seed
        self.surrogate_config = surrogate_config or {}
        self.gobi_config = gobi_config or GobiConfig()
        constraints = constraints or ConstraintSet()
        self.constraints = ConstraintSet(list(constraints.cnn), list(constraints.accel), list(constraints.pair),
                                         list(constraints.description))
        self.embedding_config = {**EMBEDDING_CONFIG, **(embedding_config or {})}
        self.evaluator_config = {**EVALUATOR_CONFIG, **(evaluator_config or {})}
        self.heteroscedastic = heteroscedastic
        self.on_evaluation = on_evaluation
        self.rng = np.random.default_rng(seed)

        self.fixed_graph = fixed_graph
        self.fixed_config = fixed_config
        self.level = 1
        self.graphs: List[ComputationalGraph] = []
        self.table: Optional[EmbeddingTable] = None
        self.surrogate: Optional[SurrogateStack] = None
        self.trace: List[TraceEntry] = []
        self.evaluated: Set[Pair] = set()
        self.pending: Set[Pair] = set()
        self.trained: Dict[str, ComputationalGraph] = {}
        self._surrogate_stale = True
        self.monitor = ConvergenceMonitor(self.policy.convergence_tol, self.policy.convergence_patience)

    # ------------------------------------------------------------------ setup

    def _stack_schedule(self) -> List[int]:
        if self.mode == "fix-cnn":
            return [self.fixed_graph.stack_size if self.fixed_graph else self.policy.stack_schedule[0]]
        return self.policy.stack_schedule

    @property
    def stack_size(self) -> int:
        return self._stack_schedule()[self.level - 1]

    def _level_graphs(self, level: int) -> List[ComputationalGraph]:
        return self.cnn_space.level_graphs(level, stack_size=self._stack_schedule()[level - 1])

    def _prepare_modes(self) -> None:
        if self.mode == "fix-cnn" and self.fixed_graph is None:
            candidates = [g for g in self._level_graphs(1) if self.constraints.accepts_cnn(g)]
            if not candidates:
                raise InfeasibleConstraintsError("No CNN satisfies the constraints")
            self.fixed_graph = candidates[int(self.rng.integers(len(candidates)))]
        if self.mode == "fix-accel" and self.fixed_config is None:
            for config in self.accel_space.sample(self.rng, 1000):
                if self.constraints.accepts_accel(config):
                    self.fixed_config = config
                    break
            else:
                raise InfeasibleConstraintsError("No accelerator satisfies the constraints")
        if self.fixed_graph is not None:
            digest = self.fixed_graph.digest
            self.constraints.cnn.append(lambda g: g.digest == digest)
            self.constraints.description.append(f"cnn fixed to {digest[:12]}")
        if self.fixed_config is not None:
            self.accel_space.validate(self.fixed_config)
            fixed = self.fixed_config
            self.constraints.accel.append(lambda c: c == fixed)
            self.constraints.description.append("accelerator fixed")

    def _embed_level(self, graphs: List[ComputationalGraph]) -> None:
        if self.fixed_graph is not None and self.fixed_graph not in graphs:
            graphs = [self.fixed_graph] + graphs
        self.table, _ = train_embeddings(graphs, self.cnn_space.costs, self.embedding_config["dimension"],
                                         self.embedding_config["epochs"], seed=self.seed + self.level)
        self.graphs = list(self.table.graphs.values())
        self.surrogate = SurrogateStack(self.table.d, EMBEDDING_SIZE, self.surrogate_config,
                                        seed=self.seed + self.level, heteroscedastic=self.heteroscedastic)
        self._surrogate_stale = True
        self.logger.info(f"🪜 Level {self.level}: stack size {self.stack_size}, {len(self.graphs)} graphs embedded")

    def _gobi_config(self) -> GobiConfig:
        d = self.table.d
        matrix = np.stack([self.table.entries[digest] for digest in self.table.digests])
        lower = np.concatenate([matrix.min(axis=0), np.zeros(EMBEDDING_SIZE)])
        upper = np.concatenate([matrix.max(axis=0), np.ones(EMBEDDING_SIZE)])
        mask = freeze_mask(d, EMBEDDING_SIZE, self.mode == "fix-cnn", self.mode == "fix-accel")
        cfg = GobiConfig(**{f.name: getattr(self.gobi_config, f.name) for f in fields(GobiConfig)})
        cfg.freeze_mask, cfg.lower, cfg.upper = mask, lower, upper
        return cfg

    # --------------------------------------------------------------- sampling

    def _taken(self, graph: ComputationalGraph, config: AcceleratorConfig) -> bool:
        pair = (graph.digest, config)
        return pair in self.evaluated or pair in self.pending

    def _feasible(self, graph: ComputationalGraph, config: AcceleratorConfig) -> bool:
        return (self.constraints.accepts_cnn(graph) and self.constraints.accepts_accel(config)
                and self.constraints.accepts_pair(graph, config))

    def _random_pair(self, attempts: int = 2000) -> Optional[Tuple[ComputationalGraph, AcceleratorConfig]]:
        for _ in range(attempts):
            graph = self.fixed_graph or self.graphs[int(self.rng.integers(len(self.graphs)))]
            config = self.fixed_config or self.accel_space.sample(self.rng, 1)[0]
            if not self._taken(graph, config) and self._feasible(graph, config):
                return graph, config
        return None

    def _candidate_pool(self) -> List[Tuple[ComputationalGraph, AcceleratorConfig]]:
        pool: Dict[Pair, Tuple[ComputationalGraph, AcceleratorConfig]] = {}
        for _ in range(self.policy.candidate_pool):
            pair = self._random_pair(attempts=20)
            if pair:
                pool[(pair[0].digest, pair[1])] = pair
        # one-coordinate accelerator moves around the best corpus pairs
        for entry in self._ranked_entries()[:3]:
            configs = [entry.config] if self.fixed_config else self.accel_space.adjacent(entry.config)
            graphs = [entry.graph]
            if not self.fixed_graph:
                near = neighbors(entry.graph, self.graphs, self.table.entries, k=4)
                graphs += [n.graph for n in near.neighbors]
            for graph in graphs:
                for config in configs:
                    if not self._taken(graph, config) and self._feasible(graph, config):
                        pool[(graph.digest, config)] = (graph, config)
        return list(pool.values())

    def _ranked_entries(self) -> List[TraceEntry]:
        usable = [e for e in self.trace if e.ok and e.branch != "validation"]
        scored = [(self.scorer.score(e.record), e) for e in usable]
        scored.sort(key=lambda item: (-item[0], item[1].iteration))
        return [e for _, e in scored]

    def _corpus(self) -> Corpus:
        corpus = Corpus()
        for entry in self.trace:
            if entry.ok and entry.branch != "validation" and entry.graph.digest in self.table.entries:
                corpus.add(pair_embedding(entry.graph, entry.config, self.table, self.accel_space),
                           self.scorer.score(entry.record))
        return corpus

    def _fit_surrogate(self) -> None:
        if not self._surrogate_stale:
            return
        corpus = self._corpus()
        if len(corpus) == 0:
            return
        self.surrogate.fit(corpus)
        self._surrogate_stale = False

    def _gobi_query(self) -> Optional[Tuple[ComputationalGraph, AcceleratorConfig, str]]:
        self._fit_surrogate()
        cfg = self._gobi_config()
        starts = [pair_embedding(e.graph, e.config, self.table, self.accel_space)
                  for e in self._ranked_entries()[:max(1, cfg.restarts // 2)]
                  if e.graph.digest in self.table.entries]
        while len(starts) < cfg.restarts:
            pair = self._random_pair(attempts=20)
            if pair is None:
                break
            starts.append(pair_embedding(pair[0], pair[1], self.table, self.accel_space))
        seed = int(self.rng.integers(2 ** 31))
        best, _ = optimize(self.surrogate, starts, cfg, seed=seed)
        exclude = self.evaluated | self.pending
        try:
            result = snap(best.x, self.table, self.accel_space, self.constraints, exclude)
        except InfeasibleConstraintsError:
            return None
        note = f"re-snapped past {result.skipped} evaluated pair(s)" if result.skipped else ""
        if best.aborted:
            note = (note + "; " if note else "") + "all GOBI restarts aborted"
        return result.graph, result.config, note

    def _uncertainty_query(self) -> Optional[Tuple[ComputationalGraph, AcceleratorConfig, str]]:
        self._fit_surrogate()
        pool = self._candidate_pool()
        if not pool:
            return None
        xs = np.stack([pair_embedding(g, c, self.table, self.accel_space) for g, c in pool])
        scores = self.surrogate.uncertainty(xs)
        graph, config = pool[int(np.argmax(scores))]
        return graph, config, f"pool of {len(pool)}"

    def _diversity_query(self) -> Optional[Tuple[ComputationalGraph, AcceleratorConfig, str]]:
        pair = self._random_pair()
        return (pair[0], pair[1], "") if pair else None

    def _accuracy_floor(self) -> Optional[float]:
        accuracies = [e.record.accuracy for e in self.trace if e.ok and e.branch != "validation"]
        if len(accuracies) < 4:
            return None
        return float(np.quantile(accuracies, self.evaluator_config["early_stop_quantile"]))

    def _transfer_overlap(self, graph: ComputationalGraph) -> Optional[float]:
        trained = [g for g in self.trained.values() if g.digest in self.table.entries]
        if not trained or graph.digest not in self.table.entries:
            return None
        near = neighbors(graph, trained, self.table.entries, self.embedding_config["neighbors_k"],
                         for_transfer=True)
        if not near.neighbors:
            return None
        return near.neighbors[0].overlap

    def _make_job(self, iteration: int, branch: str) -> Optional[_Job]:
        query = {"gobi": self._gobi_query, "uncertainty": self._uncertainty_query,
                 "diversity": self._diversity_query, "initial": self._diversity_query}[branch]()
        if query is None and branch != "diversity":
            self.logger.debug(f"Branch {branch} found no unevaluated pair, falling back to a random pair")
            query = self._diversity_query()
            branch = "diversity"
        if query is None:
            return None
        graph, config, note = query
        overlap = self._transfer_overlap(graph)
        return _Job(iteration, branch, graph, config, sample_recipe(self.rng, self.evaluator_config),
                    overlap, self._accuracy_floor(), note)

    # ------------------------------------------------------------- evaluation

    @retry(stop_max_attempt_number=2, wait_fixed=100)
    def _evaluate_once(self, job: _Job) -> Tuple[HardwareCost, Evaluation]:
        hardware = self.simulator.simulate(job.graph, job.config)
        evaluation = self.evaluator.evaluate(job.graph, job.config, job.recipe, job.overlap, job.floor)
        return hardware, evaluation

    def _evaluate(self, job: _Job) -> Tuple[_Job, Optional[Tuple[HardwareCost, Evaluation]], str]:
        try:
            return job, self._evaluate_once(job), ""
        except Exception as e:
            return job, None, f"{type(e).__name__}: {e}"

    def _record(self, job: _Job, outcome: Optional[Tuple[HardwareCost, Evaluation]], error: str) -> TraceEntry:
        pair = (job.graph.digest, job.config)
        self.pending.discard(pair)
        self.evaluated.add(pair)
        if outcome is None:
            self.logger.warning(f"⚠️  Evaluation {job.iteration} failed twice: {error}")
            entry = TraceEntry(job.iteration, self.level, self.stack_size, job.branch, job.graph, job.config,
                               job.recipe.recipe_id, status="failed", note=error, overlap=job.overlap)
        else:
            hardware, evaluation = outcome
            record = PerfRecord.from_hardware(hardware, evaluation.accuracy)
            if job.branch != "validation":
                self.scorer.observe(record)
                self.trained[job.graph.digest] = job.graph
                self._surrogate_stale = True
            entry = TraceEntry(job.iteration, self.level, self.stack_size, job.branch, job.graph, job.config,
                               evaluation.recipe_id, record, self.scorer.score(record), evaluation.cost,
                               evaluation.transfer, evaluation.early_stopped, note=job.note, overlap=job.overlap)
        self.trace.append(entry)
        if self.on_evaluation:
            self.on_evaluation(entry)
        return entry

    # ---------------------------------------------------------------- levels

    def _advance_level(self) -> bool:
        schedule = self._stack_schedule()
        if self.level >= len(schedule):
            return False
        self.scorer.freeze()
        s_new = schedule[self.level]
        ranked = self._ranked_entries()
        next_graphs: Dict[ComputationalGraph, None] = {}
        for graph in self.trained.values():
            if graph.stack_size % s_new == 0:
                next_graphs[restack(graph, s_new)] = None
        s = self.stack_size
        parents = list(dict.fromkeys(restack(e.graph, s) for e in ranked))[:self.policy.crossover_parents]
        level_pool = [g for g in self.graphs if g.stack_size == s]
        for i, parent in enumerate(parents):
            near = neighbors(parent, [g for g in level_pool if g.digest != parent.digest], self.table.entries, k=1)
            if not near.neighbors:
                continue
            for child in crossover(parent, near.neighbors[0].graph, s_new,
                                   max_children=self.policy.crossover_children, seed=self.seed + i):
                next_graphs[child] = None
        self.level += 1
        for graph in self._level_graphs(self.level):
            next_graphs[graph] = None
        self._embed_level(list(next_graphs))
        self.monitor.reset()
        return True

    def best_entry(self) -> Optional[TraceEntry]:
        usable = [e for e in self.trace if e.ok and e.branch != "validation"]
        if not usable:
            return None
        return max(usable, key=lambda e: (self.scorer.score(e.record), -e.iteration))

    def _best_performance(self) -> float:
        best = self.best_entry()
        return self.scorer.score(best.record) if best else 0.0

    # ------------------------------------------------------------------- run

    def run(self) -> SearchResult:
        self.logger.info(f"🚀 Starting {self.mode} search: budget {self.policy.budget}, seed {self.seed}, "
                         f"{self.policy.workers} worker(s)")
        self._prepare_modes()
        self._embed_level(self._level_graphs(1))
        first = self._random_pair()
        if first is None:
            raise InfeasibleConstraintsError(
                f"No pair satisfies: {', '.join(self.constraints.description) or 'none'}")

        status = "budget-exhausted"
        dispatched = 0
        queue: Deque[Future] = deque()
        progress = tqdm(total=self.policy.budget, desc="Evaluations", disable=None)
        with ThreadPoolExecutor(max_workers=self.policy.workers) as pool:
            while True:
                while len(queue) < self.policy.workers and dispatched < self.policy.budget:
                    if dispatched < self.policy.initial_corpus:
                        branch = "initial"
                    else:
                        branch = choose_branch(float(self.rng.random()), self.policy)
                    job = self._make_job(dispatched, branch)
                    if job is None:
                        break
                    self.pending.add((job.graph.digest, job.config))
                    queue.append(pool.submit(self._evaluate, job))
                    dispatched += 1
                if not queue:
                    if dispatched < self.policy.budget:
                        status = "space-exhausted"
                        self.logger.info("🧺 Every feasible pair has been evaluated")
                    break
                entry = self._record(*queue.popleft().result())
                progress.update(1)
                if entry.iteration < self.policy.initial_corpus:
                    continue
                if self.monitor.update(self._best_performance()):
                    self.logger.info(f"✅ Level {self.level} converged at {self._best_performance():.4f} "
                                     f"after {len(self.trace)} evaluations")
                    self._drain(queue, progress)
                    if not self._advance_level():
                        status = "converged"
                        break
        progress.close()

        validation_mean = None
        if status == "converged":
            validation_mean = self._validate()
        elif status == "budget-exhausted":
            self.logger.warning(f"⏱️  Budget of {self.policy.budget} evaluations exhausted before convergence")

        best = self.best_entry()
        result = SearchResult(
            best.graph if best else None, best.config if best else None, best.record if best else None,
            self.scorer.score(best.record) if best else 0.0, self.trace, status, self.level,
            self.scorer.weights, validation_mean)
        self.logger.info(f"🎉 Search {status}: best performance {result.best_performance:.4f}, "
                         f"total cost {result.total_cost:.2f}")
        return result

    def _drain(self, queue: Deque[Future], progress) -> None:
        while queue:
            self._record(*queue.popleft().result())
            progress.update(1)

    def _validate(self) -> Optional[float]:
        best = self.best_entry()
        if best is None or self.policy.validation_repeats < 1:
            return None
        scores = []
        for i in range(self.policy.validation_repeats):
            job = _Job(len(self.trace), "validation", best.graph, best.config,
                       sample_recipe(self.rng, self.evaluator_config), None, None, f"repeat {i + 1}")
            entry = self._record(*self._evaluate(job))
            if entry.ok:
                scores.append(entry.performance)
        if not scores:
            return None
        mean = float(np.mean(scores))
        self.logger.info(f"🔁 Best pair re-evaluated {len(scores)} time(s): mean performance {mean:.4f}")
        return mean


def branch_frequencies(policy: SearchPolicy, iterations: int, seed: int = 0) -> Dict[str, float]:
    rng = np.random.default_rng(seed)
    counts = Counter(choose_branch(float(rng.random()), policy) for _ in range(iterations))
    return {branch: counts.get(branch, 0) / iterations for branch in BRANCHES}


def expected_branch_probabilities(policy: SearchPolicy) -> Dict[str, float]:
    return {"gobi": 1.0 - policy.alpha_p - policy.beta_p, "uncertainty": policy.alpha_p, "diversity": policy.beta_p}


def binomial_bound(p: float, n: int, sigmas: float = 3.0) -> float:
    return sigmas * math.sqrt(p * (1.0 - p) / n)
