"""
Input-Space Optimization for Pair Scout
Hessian-preconditioned ascent on the acquisition value and snapping to valid, feasible pairs
"""

import heapq
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
import torch

from accel_sim.simulator import AcceleratorSimulator, CostConstants, area
from config import GOBI_CONFIG
from design_space.accel_space import AccelSpace, AcceleratorConfig
from design_space.cnn2vec import EmbeddingTable
from design_space.cnn_space import ComputationalGraph
from search.surrogate import SearchError, SurrogateParameterError, SurrogateStack

logger = logging.getLogger(__name__)

Objective = Callable[[torch.Tensor], torch.Tensor]


class InfeasibleConstraintsError(SearchError):
    """No design-space candidate satisfies the constraints"""


@dataclass
class GobiConfig:
    max_steps: int = GOBI_CONFIG["max_steps"]
    step_size: float = GOBI_CONFIG["step_size"]
    hessian_samples: int = GOBI_CONFIG["hessian_samples"]
    beta1: float = GOBI_CONFIG["beta1"]
    beta2: float = GOBI_CONFIG["beta2"]
    eps: float = GOBI_CONFIG["eps"]
    tol: float = GOBI_CONFIG["tol"]
    restarts: int = GOBI_CONFIG["restarts"]
    second_order: bool = GOBI_CONFIG["second_order"]
    workers: int = GOBI_CONFIG["workers"]
    freeze_mask: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.step_size <= 0 or self.tol <= 0:
            raise SurrogateParameterError("GOBI step size and tolerance must be positive")
        if self.hessian_samples < 1 or self.max_steps < 1:
            raise SurrogateParameterError("GOBI needs at least one step and one Hessian probe")

    @classmethod
    def from_dict(cls, overrides: Optional[Dict] = None, **extra) -> "GobiConfig":
        known = {f.name for f in fields(cls)}
        values = {k: v for k, v in {**GOBI_CONFIG, **(overrides or {}), **extra}.items() if k in known}
        return cls(**values)


@dataclass
class GobiResult:
    x: np.ndarray
    ucb: float
    steps: int
    converged: bool
    aborted: bool = False
    message: str = ""


def _stack_objective(stack: SurrogateStack) -> Objective:
    return lambda x: stack.ucb_tensor(x.unsqueeze(0))[0]


def optimize_restart(objective: Objective, x0: Sequence[float], cfg: GobiConfig, seed: int = 0) -> GobiResult:
    """One ascent run with AdaHessian-style moments on the input vector"""
    generator = torch.Generator().manual_seed(seed)
    x = torch.as_tensor(np.asarray(x0, dtype=float)).clone()
    free = torch.ones_like(x, dtype=torch.bool)
    if cfg.freeze_mask is not None:
        free = ~torch.as_tensor(np.asarray(cfg.freeze_mask, dtype=bool))
    lower = torch.as_tensor(cfg.lower) if cfg.lower is not None else None
    upper = torch.as_tensor(cfg.upper) if cfg.upper is not None else None
    m = torch.zeros_like(x)
    v = torch.zeros_like(x)
    converged, steps = False, 0

    for t in range(1, cfg.max_steps + 1):
        steps = t
        point = x.detach().requires_grad_(True)
        value = objective(point)
        (grad,) = torch.autograd.grad(value, point, create_graph=cfg.second_order)
        if not torch.all(torch.isfinite(grad)):
            return GobiResult(x.numpy(), -math.inf, t, False, True, "non-finite gradient")
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad.detach()
        m_hat = m / (1.0 - cfg.beta1 ** t)
        if cfg.second_order:
            diagonal = torch.zeros_like(x)
            for _ in range(cfg.hessian_samples):
                probe = torch.randint(0, 2, x.shape, generator=generator).to(x.dtype) * 2.0 - 1.0
                (hv,) = torch.autograd.grad(grad, point, grad_outputs=probe, retain_graph=True)
                diagonal += probe * hv
            diagonal /= cfg.hessian_samples
            if not torch.all(torch.isfinite(diagonal)):
                return GobiResult(x.numpy(), -math.inf, t, False, True, "non-finite Hessian estimate")
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * diagonal.detach() ** 2
            v_hat = v / (1.0 - cfg.beta2 ** t)
            step = cfg.step_size * m_hat / (torch.sqrt(v_hat) + cfg.eps)
        else:
            step = cfg.step_size * m_hat
        proposal = x + step
        if lower is not None:
            proposal = torch.maximum(proposal, lower)
        if upper is not None:
            proposal = torch.minimum(proposal, upper)
        proposal = torch.where(free, proposal, x)
        if not torch.all(torch.isfinite(proposal)):
            return GobiResult(x.numpy(), -math.inf, t, False, True, "diverged")
        delta = torch.linalg.norm(proposal - x).item()
        x = proposal.detach()
        if delta < cfg.tol:
            converged = True
            break

    with torch.no_grad():
        final = objective(x).item()
    if not math.isfinite(final):
        return GobiResult(x.numpy(), -math.inf, steps, False, True, "non-finite objective")
    return GobiResult(x.numpy(), final, steps, converged)


def optimize(objective: Union[SurrogateStack, Objective], starts: Union[Sequence[float], Sequence[Sequence[float]]],
             cfg: Optional[GobiConfig] = None, seed: int = 0) -> Tuple[GobiResult, List[GobiResult]]:
    """Run one restart per start point and return (best, all); aborted restarts are reported, not raised"""
    cfg = cfg or GobiConfig()
    if isinstance(objective, SurrogateStack):
        objective = _stack_objective(objective)
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    jobs = [(start, seed + i) for i, start in enumerate(starts)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(lambda job: optimize_restart(objective, job[0], cfg, job[1]), jobs))
    else:
        results = [optimize_restart(objective, start, cfg, s) for start, s in jobs]
    for i, result in enumerate(results):
        if result.aborted:
            logger.warning(f"⚠️  GOBI restart {i} aborted after {result.steps} steps: {result.message}")
    finished = [r for r in results if not r.aborted]
    if not finished:
        return results[0], results
    best = max(finished, key=lambda r: r.ucb)
    return best, results


@dataclass
class ConstraintSet:
    """Predicates a snapped pair must satisfy"""
    cnn: List[Callable[[ComputationalGraph], bool]] = field(default_factory=list)
    accel: List[Callable[[AcceleratorConfig], bool]] = field(default_factory=list)
    pair: List[Callable[[ComputationalGraph, AcceleratorConfig], bool]] = field(default_factory=list)
    description: List[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.cnn or self.accel or self.pair)

    def accepts_cnn(self, graph: ComputationalGraph) -> bool:
        return all(check(graph) for check in self.cnn)

    def accepts_accel(self, config: AcceleratorConfig) -> bool:
        return all(check(config) for check in self.accel)

    def accepts_pair(self, graph: ComputationalGraph, config: AcceleratorConfig) -> bool:
        return all(check(graph, config) for check in self.pair)

    def add_area_at_most(self, bound_mm2: float, constants: CostConstants) -> "ConstraintSet":
        self.accel.append(lambda c: area(c, constants) <= bound_mm2)
        self.description.append(f"area <= {bound_mm2} mm2")
        return self

    @classmethod
    def area_at_most(cls, bound_mm2: float, constants: CostConstants) -> "ConstraintSet":
        return cls().add_area_at_most(bound_mm2, constants)

    @classmethod
    def from_dict(cls, spec: Optional[Dict], simulator: AcceleratorSimulator) -> "ConstraintSet":
        """Keys: max_area_mm2, max_latency_ms, max_body_modules, mem_types"""
        constraints = cls()
        spec = spec or {}
        unknown = set(spec) - {"max_area_mm2", "max_latency_ms", "max_body_modules", "mem_types"}
        if unknown:
            raise SurrogateParameterError(f"Unknown constraint keys: {sorted(unknown)}")
        if "max_area_mm2" in spec:
            constraints.add_area_at_most(float(spec["max_area_mm2"]), simulator.constants)
        if "mem_types" in spec:
            allowed = set(spec["mem_types"])
            constraints.accel.append(lambda c: c.mem_type in allowed)
            constraints.description.append(f"mem_type in {sorted(allowed)}")
        if "max_body_modules" in spec:
            depth = int(spec["max_body_modules"])
            constraints.cnn.append(lambda g: len(g.body) <= depth)
            constraints.description.append(f"body modules <= {depth}")
        if "max_latency_ms" in spec:
            bound = float(spec["max_latency_ms"])
            constraints.pair.append(lambda g, c: simulator.simulate(g, c).latency_ms <= bound)
            constraints.description.append(f"latency <= {bound} ms")
        return constraints


@dataclass
class SnapResult:
    graph: ComputationalGraph
    config: AcceleratorConfig
    distance: float
    skipped: int = 0  # nearer candidates passed over because they were excluded


def snap(x: Sequence[float], cnn_table: EmbeddingTable, accel_space: AccelSpace,
         constraints: Optional[ConstraintSet] = None,
         exclude: Optional[Set[Tuple[str, AcceleratorConfig]]] = None,
         max_candidates: int = 100_000) -> SnapResult:
    """Nearest feasible (graph, config) to x, searched best-first over the two ranked halves"""
    constraints = constraints or ConstraintSet()
    exclude = exclude or set()
    x = np.asarray(x, dtype=float)
    cnn_part, accel_part = x[:cnn_table.d], x[cnn_table.d:]

    cnn_ranked = [(digest, dist) for digest, dist in cnn_table.ranked(cnn_part)
                  if constraints.accepts_cnn(cnn_table.graphs[digest])]
    accel_ranked = [(config, dist) for config, dist in accel_space.nearest_configs(accel_part)
                    if constraints.accepts_accel(config)]
    if not cnn_ranked or not accel_ranked:
        raise InfeasibleConstraintsError(
            f"No {'CNN' if not cnn_ranked else 'accelerator'} candidate satisfies: {', '.join(constraints.description)}")

    def key(i: int, j: int):
        return (cnn_ranked[i][1] ** 2 + accel_ranked[j][1] ** 2, cnn_ranked[i][0], accel_ranked[j][0], i, j)

    heap = [key(0, 0)]
    seen = {(0, 0)}
    skipped = 0
    while heap and skipped < max_candidates:
        squared, digest, config, i, j = heapq.heappop(heap)
        graph = cnn_table.graphs[digest]
        if (digest, config) not in exclude and constraints.accepts_pair(graph, config):
            return SnapResult(graph, config, math.sqrt(squared), skipped)
        skipped += 1
        for ni, nj in ((i + 1, j), (i, j + 1)):
            if ni < len(cnn_ranked) and nj < len(accel_ranked) and (ni, nj) not in seen:
                seen.add((ni, nj))
                heapq.heappush(heap, key(ni, nj))
    raise InfeasibleConstraintsError(f"No unexcluded pair satisfies: {', '.join(constraints.description) or 'none'}")


def pair_embedding(graph: ComputationalGraph, config: AcceleratorConfig, cnn_table: EmbeddingTable,
                   accel_space: AccelSpace) -> np.ndarray:
    return np.concatenate([cnn_table.embed(graph), accel_space.encode(config)])


def freeze_mask(cnn_dim: int, accel_dim: int, freeze_cnn: bool = False, freeze_accel: bool = False) -> np.ndarray:
    return np.concatenate([np.full(cnn_dim, freeze_cnn), np.full(accel_dim, freeze_accel)])


def accel_bounds(cnn_dim: int, accel_dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """Unbounded CNN half, unit box on the accelerator half"""
    lower = np.concatenate([np.full(cnn_dim, -np.inf), np.zeros(accel_dim)])
    upper = np.concatenate([np.full(cnn_dim, np.inf), np.ones(accel_dim)])
    return lower, upper
