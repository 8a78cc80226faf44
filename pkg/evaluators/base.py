"""
Evaluator Basics for Pair Scout
Training recipes, evaluation results and the simulated training-cost rules
"""

import hashlib
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from config import EVALUATOR_CONFIG, SEARCH_POLICY


class EvaluatorError(Exception):
    """Base error for accuracy oracles"""


class MissingEntryError(EvaluatorError, KeyError):
    """Tabular benchmark has no entry for the requested graph"""


@dataclass(frozen=True)
class Recipe:
    learning_rate: float
    beta1: float
    beta2: float
    weight_decay: float

    @property
    def recipe_id(self) -> str:
        text = f"{self.learning_rate:.6e}|{self.beta1:.6f}|{self.beta2:.6f}|{self.weight_decay:.6e}"
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]

    def lr_coordinate(self, config: Optional[Dict] = None) -> float:
        """Learning rate position in [0, 1] on the log scale of its sampling range"""
        lo, hi = (config or EVALUATOR_CONFIG)["recipe_lr_range"]
        u = (math.log10(self.learning_rate) - math.log10(lo)) / (math.log10(hi) - math.log10(lo))
        return min(1.0, max(0.0, u))

    def to_json(self) -> Dict:
        return {"learning_rate": self.learning_rate, "beta1": self.beta1, "beta2": self.beta2,
                "weight_decay": self.weight_decay, "recipe_id": self.recipe_id}


def sample_recipe(rng: np.random.Generator, config: Optional[Dict] = None) -> Recipe:
    """Log-uniform learning rate and weight decay, uniform betas"""
    cfg = config or EVALUATOR_CONFIG

    def log_uniform(bounds):
        lo, hi = bounds
        return float(10 ** rng.uniform(math.log10(lo), math.log10(hi)))

    return Recipe(
        learning_rate=log_uniform(cfg["recipe_lr_range"]),
        beta1=float(rng.uniform(*cfg["recipe_beta1_range"])),
        beta2=float(rng.uniform(*cfg["recipe_beta2_range"])),
        weight_decay=log_uniform(cfg["recipe_decay_range"]),
    )


@dataclass(frozen=True)
class Evaluation:
    accuracy: float
    cost: float
    transfer: bool
    early_stopped: bool
    recipe_id: str


def charge_cost(accuracy: float, transfer_overlap: Optional[float], accuracy_floor: Optional[float],
                config: Optional[Dict] = None, tau_wt: float = SEARCH_POLICY["tau_wt"]) -> Dict:
    """Training cost in base units: discounted by weight transfer, halved when stopped early"""
    cfg = config or EVALUATOR_CONFIG
    transfer = transfer_overlap is not None and transfer_overlap >= tau_wt
    early_stopped = accuracy_floor is not None and accuracy < accuracy_floor
    cost = cfg["base_cost"]
    if transfer:
        cost *= cfg["transfer_discount"]
    if early_stopped:
        cost *= cfg["early_stop_discount"]
    return {"cost": cost, "transfer": transfer, "early_stopped": early_stopped}
