"""
Synthetic Accuracy Oracle for Pair Scout
Seeded multi-bump landscape over pair features with recipe-dependent noise
"""

import hashlib
import logging
import math
from typing import Dict, Optional, Sequence

import numpy as np

from config import EVALUATOR_CONFIG, SEARCH_POLICY
from design_space.accel_space import AccelSpace, AcceleratorConfig
from design_space.cnn_space import ComputationalGraph, graph_descriptor
from evaluators.base import EvaluatorError, Evaluation, Recipe, charge_cost


class SyntheticLandscape:
    """
    base(x) = 1 - prod_i (1 - a_i * exp(-|x - c_i|^2 / (2 w_i^2)))

    Bounded in [0, 1). Observed accuracy adds noise with standard deviation
    noise_scale * sqrt(2 u), u being the recipe's log learning-rate coordinate,
    so the spread over random recipes equals noise_scale.
    """

    def __init__(self, centers: Sequence[Sequence[float]], amplitudes: Sequence[float], widths: Sequence[float],
                 noise_scale: float = EVALUATOR_CONFIG["noise_scale"], seed: int = 0):
        self.centers = np.asarray(centers, dtype=float)
        self.amplitudes = np.asarray(amplitudes, dtype=float)
        self.widths = np.asarray(widths, dtype=float)
        if self.centers.ndim != 2 or len(self.centers) != len(self.amplitudes) or len(self.centers) != len(self.widths):
            raise EvaluatorError("Landscape needs one amplitude and width per center")
        if np.any(self.amplitudes < 0) or np.any(self.amplitudes >= 1) or np.any(self.widths <= 0):
            raise EvaluatorError("Amplitudes must lie in [0, 1) and widths must be positive")
        self.noise_scale = noise_scale
        self.seed = seed

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @classmethod
    def random(cls, seed: int, dim: int, bumps: int = EVALUATOR_CONFIG["bumps"],
               noise_scale: float = EVALUATOR_CONFIG["noise_scale"]) -> "SyntheticLandscape":
        """Separated bumps: widths scale with sqrt(dim), centers at least three widths apart"""
        if bumps < 3:
            raise EvaluatorError("A synthetic landscape needs at least 3 bumps")
        rng = np.random.default_rng(seed)
        widths = rng.uniform(0.05, 0.08, bumps) * math.sqrt(dim)
        separation = 3.0 * widths.max()
        centers = []
        for _ in range(10_000):
            candidate = rng.uniform(0.15, 0.85, dim)
            if all(np.linalg.norm(candidate - c) >= separation for c in centers):
                centers.append(candidate)
                if len(centers) == bumps:
                    break
        if len(centers) < bumps:
            raise EvaluatorError(f"Could not place {bumps} separated bumps in {dim} dimensions")
        amplitudes = np.concatenate([[0.95], rng.uniform(0.5, 0.85, bumps - 1)])
        return cls(centers, amplitudes, widths, noise_scale, seed)

    @classmethod
    def anchored(cls, points: np.ndarray, seed: int, bumps: int = EVALUATOR_CONFIG["bumps"],
                 noise_scale: float = EVALUATOR_CONFIG["noise_scale"]) -> "SyntheticLandscape":
        """Bumps centred on reachable feature points, spaced at least three widths apart"""
        points = np.unique(np.asarray(points, dtype=float), axis=0)
        if len(points) < bumps:
            raise EvaluatorError(f"Need at least {bumps} distinct feature points, got {len(points)}")
        rng = np.random.default_rng(seed)
        gaps = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
        separation = 0.5 * float(np.median(gaps[np.triu_indices(len(points), k=1)]))
        centers = []
        for i in rng.permutation(len(points)):
            if all(np.linalg.norm(points[i] - c) >= separation for c in centers):
                centers.append(points[i])
                if len(centers) == bumps:
                    break
        if len(centers) < 3:
            raise EvaluatorError("Feature points are too clustered to hold 3 separated bumps")
        widths = np.full(len(centers), separation / 3.0)
        amplitudes = np.concatenate([[0.95], rng.uniform(0.5, 0.85, len(centers) - 1)])
        return cls(centers, amplitudes, widths, noise_scale, seed)

    def base(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=float)
        squared = np.sum((self.centers - x) ** 2, axis=1)
        bumps = self.amplitudes * np.exp(-squared / (2.0 * self.widths ** 2))
        return float(1.0 - np.prod(1.0 - bumps))

    def global_center(self) -> np.ndarray:
        return self.centers[int(np.argmax(self.amplitudes))].copy()

    def noise_std(self, recipe: Recipe) -> float:
        return self.noise_scale * math.sqrt(2.0 * recipe.lr_coordinate())

    def _noise_rng(self, x: np.ndarray, recipe: Recipe) -> np.random.Generator:
        digest = hashlib.sha256(f"{self.seed}|{recipe.recipe_id}|".encode("utf-8") + np.round(x, 12).tobytes())
        return np.random.default_rng(int.from_bytes(digest.digest()[:8], "little"))

    def accuracy(self, x: Sequence[float], recipe: Recipe) -> float:
        x = np.asarray(x, dtype=float)
        noise = self.noise_std(recipe) * self._noise_rng(x, recipe).standard_normal()
        return float(min(1.0, max(0.0, self.base(x) + noise)))


class SyntheticEvaluator:
    """Accuracy oracle over [graph descriptor || accelerator embedding]"""

    def __init__(self, landscape: SyntheticLandscape, accel_space: AccelSpace, config: Optional[Dict] = None,
                 tau_wt: float = SEARCH_POLICY["tau_wt"]):
        self.logger = logging.getLogger(__name__)
        self.landscape = landscape
        self.accel_space = accel_space
        self.config = {**EVALUATOR_CONFIG, **(config or {})}
        self.tau_wt = tau_wt

    @classmethod
    def seeded(cls, accel_space: AccelSpace, graphs: Sequence[ComputationalGraph], seed: int = 0,
               config: Optional[Dict] = None, samples: int = 400,
               tau_wt: float = SEARCH_POLICY["tau_wt"]) -> "SyntheticEvaluator":
        """Landscape anchored on features of random (graph, config) pairs drawn from the spaces"""
        if not graphs:
            raise EvaluatorError("A synthetic landscape needs at least one graph to anchor on")
        cfg = {**EVALUATOR_CONFIG, **(config or {})}
        rng = np.random.default_rng(seed)
        configs = accel_space.sample(rng, samples)
        descriptors = [graph_descriptor(g) for g in graphs]
        points = np.stack([np.concatenate([descriptors[int(rng.integers(len(descriptors)))], accel_space.encode(c)])
                           for c in configs])
        landscape = SyntheticLandscape.anchored(points, seed, cfg["bumps"], cfg["noise_scale"])
        return cls(landscape, accel_space, cfg, tau_wt)

    def features(self, graph: ComputationalGraph, config: AcceleratorConfig) -> np.ndarray:
        return np.concatenate([graph_descriptor(graph), self.accel_space.encode(config)])

    def true_accuracy(self, graph: ComputationalGraph, config: AcceleratorConfig) -> float:
        return self.landscape.base(self.features(graph, config))

    def evaluate(self, graph: ComputationalGraph, config: AcceleratorConfig, recipe: Recipe,
                 transfer_overlap: Optional[float] = None, accuracy_floor: Optional[float] = None) -> Evaluation:
        accuracy = self.landscape.accuracy(self.features(graph, config), recipe)
        charged = charge_cost(accuracy, transfer_overlap, accuracy_floor, self.config, self.tau_wt)
        return Evaluation(accuracy, charged["cost"], charged["transfer"], charged["early_stopped"], recipe.recipe_id)
