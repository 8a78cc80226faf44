"""
Tabular Accuracy Oracle for Pair Scout
Precomputed per-recipe accuracies keyed by graph digest, loaded from CSV with a JSON sidecar
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import pandas as pd

from config import EVALUATOR_CONFIG, SEARCH_POLICY
from design_space.accel_space import AcceleratorConfig
from design_space.cnn_space import ComputationalGraph
from evaluators.base import EvaluatorError, Evaluation, MissingEntryError, Recipe, charge_cost

COLUMNS = ["digest", "recipe_id", "accuracy"]


class TabularFormatError(EvaluatorError):
    """Malformed benchmark file; line is 1-based and counts the header"""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass
class TabularBenchmark:
    entries: Dict[str, Dict[str, float]]
    metadata: Dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, digest: str) -> bool:
        return digest in self.entries

    def mean_accuracy(self, digest: str) -> float:
        samples = self._samples(digest)
        return sum(samples.values()) / len(samples)

    def recipe_ids(self, digest: str) -> List[str]:
        return sorted(self._samples(digest))

    def accuracy(self, digest: str, recipe_id: Optional[str] = None) -> float:
        samples = self._samples(digest)
        if recipe_id is None:
            return self.mean_accuracy(digest)
        if recipe_id not in samples:
            raise MissingEntryError(f"No recipe {recipe_id} for digest {digest[:12]}")
        return samples[recipe_id]

    def _samples(self, digest: str) -> Dict[str, float]:
        try:
            return self.entries[digest]
        except KeyError:
            raise MissingEntryError(f"Digest {digest[:12]} not in the benchmark") from None


def _sidecar(path: str) -> str:
    return os.path.splitext(path)[0] + ".json"


def load_tabular(path: str) -> TabularBenchmark:
    """Parse and validate a digest,recipe_id,accuracy CSV"""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise TabularFormatError(f"{path} is empty") from None
    except pd.errors.ParserError as e:
        raise TabularFormatError(f"{path}: {e}") from e
    if list(frame.columns) != COLUMNS:
        raise TabularFormatError(f"header must be {','.join(COLUMNS)}, got {','.join(frame.columns)}", 1)
    if frame.empty:
        raise TabularFormatError(f"{path} has a header but no entries")

    entries: Dict[str, Dict[str, float]] = {}
    for index, row in frame.iterrows():
        line = int(index) + 2
        digest, recipe_id = row["digest"].strip().lower(), row["recipe_id"].strip()
        if not digest or not recipe_id:
            raise TabularFormatError("empty digest or recipe_id", line)
        try:
            accuracy = float(row["accuracy"])
        except ValueError:
            raise TabularFormatError(f"accuracy '{row['accuracy']}' is not a number", line) from None
        if not 0.0 <= accuracy <= 1.0:
            raise TabularFormatError(f"accuracy {accuracy} outside [0, 1]", line)
        samples = entries.setdefault(digest, {})
        if recipe_id in samples:
            raise TabularFormatError(f"duplicate entry for digest {digest[:12]} recipe {recipe_id}", line)
        samples[recipe_id] = accuracy

    metadata = {}
    if os.path.exists(_sidecar(path)):
        with open(_sidecar(path), "r") as f:
            metadata = json.load(f)
    logging.getLogger(__name__).info(f"📚 Loaded tabular benchmark: {len(entries)} graphs from {path}")
    return TabularBenchmark(entries, metadata)


def save_tabular(benchmark: TabularBenchmark, path: str) -> None:
    rows = [{"digest": digest, "recipe_id": recipe_id, "accuracy": accuracy}
            for digest in sorted(benchmark.entries)
            for recipe_id, accuracy in sorted(benchmark.entries[digest].items())]
    pd.DataFrame(rows, columns=COLUMNS).to_csv(path, index=False, float_format="%.17g")
    with open(_sidecar(path), "w") as f:
        json.dump(benchmark.metadata, f, indent=2)


class TabularEvaluator:
    """Looks up accuracy by graph digest; the recipe selects one of the stored samples"""

    def __init__(self, benchmark: TabularBenchmark, config: Optional[Dict] = None,
                 tau_wt: float = SEARCH_POLICY["tau_wt"]):
        self.logger = logging.getLogger(__name__)
        self.benchmark = benchmark
        self.config = {**EVALUATOR_CONFIG, **(config or {})}
        self.tau_wt = tau_wt

    def evaluate(self, graph: ComputationalGraph, config: AcceleratorConfig, recipe: Recipe,
                 transfer_overlap: Optional[float] = None, accuracy_floor: Optional[float] = None) -> Evaluation:
        recipe_ids = self.benchmark.recipe_ids(graph.digest)
        chosen = recipe_ids[int(recipe.recipe_id, 16) % len(recipe_ids)]
        accuracy = self.benchmark.accuracy(graph.digest, chosen)
        charged = charge_cost(accuracy, transfer_overlap, accuracy_floor, self.config, self.tau_wt)
        return Evaluation(accuracy, charged["cost"], charged["transfer"], charged["early_stopped"], chosen)
