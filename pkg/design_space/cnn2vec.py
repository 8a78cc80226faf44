"""
CNN2vec Embeddings for Pair Scout
Dense vectors whose Euclidean distances reproduce pairwise graph edit distances
"""

import json
import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from tqdm import tqdm

from config import EMBEDDING_CONFIG
from design_space.cnn_space import (ComputationalGraph, GedCostTable, GraphValidationError, ParameterError,
                                    UnknownDigestError, ged)

logger = logging.getLogger(__name__)

NORM_GUARD = 1e-12


class EmbeddingTable:
    """Digest -> vector map for one hierarchy level; graphs are kept so lookups can return them"""

    def __init__(self, d: int, entries: Dict[str, Sequence[float]],
                 graphs: Optional[Dict[str, ComputationalGraph]] = None,
                 stress: Optional[float] = None, loss_history: Optional[List[float]] = None):
        self.d = d
        self.entries: Dict[str, np.ndarray] = {k: np.asarray(v, dtype=float) for k, v in entries.items()}
        self.graphs: Dict[str, ComputationalGraph] = dict(graphs or {})
        self.stress = stress
        self.loss_history = list(loss_history or [])
        for digest, vector in self.entries.items():
            if vector.shape != (d,) or not np.all(np.isfinite(vector)):
                raise ParameterError(f"Embedding for {digest[:12]} is not a finite {d}-vector")
        self._digests = sorted(self.entries)
        self._matrix = np.stack([self.entries[k] for k in self._digests]) if self._digests else np.zeros((0, d))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, digest: str) -> bool:
        return digest in self.entries

    @property
    def digests(self) -> List[str]:
        return list(self._digests)

    def embed(self, graph: Union[ComputationalGraph, str]) -> np.ndarray:
        digest = graph if isinstance(graph, str) else graph.digest
        try:
            return self.entries[digest].copy()
        except KeyError:
            raise UnknownDigestError(digest) from None

    def ranked(self, x: Sequence[float], k: Optional[int] = None) -> List[Tuple[str, float]]:
        """(digest, distance) pairs ordered by distance, ties by digest"""
        distances = np.linalg.norm(self._matrix - np.asarray(x, dtype=float), axis=1)
        order = sorted(range(len(self._digests)), key=lambda i: (distances[i], self._digests[i]))
        if k is not None:
            order = order[:k]
        return [(self._digests[i], float(distances[i])) for i in order]

    def nearest_digest(self, x: Sequence[float]) -> str:
        if not self._digests:
            raise UnknownDigestError("empty embedding table")
        distances = np.linalg.norm(self._matrix - np.asarray(x, dtype=float), axis=1)
        best = distances.min()
        tied = np.flatnonzero(np.isclose(distances, best, rtol=0.0, atol=NORM_GUARD * max(1.0, best)))
        return self._digests[int(tied[0])]  # digests are sorted

    def nearest_valid(self, x: Sequence[float]) -> ComputationalGraph:
        digest = self.nearest_digest(x)
        if digest not in self.graphs:
            raise UnknownDigestError(digest)
        return self.graphs[digest]

    def save(self, path: str) -> None:
        data = {
            "d": self.d,
            "entries": {k: self.entries[k].tolist() for k in self._digests},
            "graphs": {k: g.to_json() for k, g in self.graphs.items()},
            "stress": self.stress,
        }
        with open(path, "w") as f:
            json.dump(data, f)

    @classmethod
    def load(cls, path: str) -> "EmbeddingTable":
        with open(path, "r") as f:
            data = json.load(f)
        try:
            graphs = {k: ComputationalGraph.from_json(g) for k, g in data.get("graphs", {}).items()}
            return cls(int(data["d"]), data["entries"], graphs, data.get("stress"))
        except KeyError as e:
            raise GraphValidationError(f"{path}: missing field {e}") from e


def unique_graphs(graphs: Sequence[ComputationalGraph]) -> List[ComputationalGraph]:
    """First graph per digest, input order kept"""
    seen: Dict[str, ComputationalGraph] = {}
    for graph in graphs:
        seen.setdefault(graph.digest, graph)
    return list(seen.values())


def ged_matrix(graphs: Sequence[ComputationalGraph], costs: GedCostTable) -> np.ndarray:
    n = len(graphs)
    matrix = np.zeros((n, n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for i, j in tqdm(pairs, desc="GED", disable=None, leave=False):
        matrix[i, j] = matrix[j, i] = ged(graphs[i], graphs[j], costs)
    return matrix


def _pair_loss(x: torch.Tensor, rows: torch.Tensor, cols: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    diff = x[rows] - x[cols]
    dist = torch.sqrt((diff * diff).sum(dim=1) + NORM_GUARD)
    return ((dist - target) ** 2).sum()


def fit_distances(distances: np.ndarray, d: int, steps: int, seed: int,
                  learning_rate: float = EMBEDDING_CONFIG["learning_rate"],
                  momentum: float = EMBEDDING_CONFIG["momentum"],
                  init_scale: float = EMBEDDING_CONFIG["init_scale"]) -> Tuple[np.ndarray, List[float]]:
    """
    Momentum descent on the pairwise squared-error loss, scaled by 1/(N-1).

    A momentum step that would raise the loss is retried as a plain step with zero velocity;
    if that fails too the step size halves. The recorded loss therefore never increases.
    """
    n = distances.shape[0]
    generator = torch.Generator().manual_seed(seed)
    x = (torch.rand((n, d), generator=generator, dtype=torch.float64) * 2.0 - 1.0) * init_scale
    rows, cols = torch.triu_indices(n, n, offset=1)
    target = torch.as_tensor(distances, dtype=torch.float64)[rows, cols]
    scale = 1.0 / (n - 1)

    def objective(point: torch.Tensor) -> Tuple[float, torch.Tensor]:
        point = point.detach().requires_grad_(True)
        loss = _pair_loss(point, rows, cols, target) * scale
        (grad,) = torch.autograd.grad(loss, point)
        return loss.item(), grad

    loss, grad = objective(x)
    velocity = torch.zeros_like(x)
    lr = learning_rate
    history = [loss / scale]
    for _ in tqdm(range(steps), desc="CNN2vec", disable=None, leave=False):
        accepted = False
        for trial_velocity in (momentum * velocity - lr * grad, -lr * grad):
            trial = x + trial_velocity
            trial_loss, trial_grad = objective(trial)
            if trial_loss <= loss:
                x, velocity, loss, grad = trial, trial_velocity, trial_loss, trial_grad
                accepted = True
                break
        if not accepted:
            velocity = torch.zeros_like(x)
            lr *= 0.5
        history.append(loss / scale)
        if lr < 1e-12 or loss < 1e-20:
            break
    return x.detach().numpy(), history


def train_embeddings(graphs: Sequence[ComputationalGraph], costs: GedCostTable,
                     d: int = EMBEDDING_CONFIG["dimension"], steps: int = EMBEDDING_CONFIG["epochs"],
                     seed: int = 0, distances: Optional[np.ndarray] = None) -> Tuple[EmbeddingTable, float]:
    """Train one table over the non-isomorphic graphs given; returns the table and loss per pair"""
    if d < 1:
        raise ParameterError(f"Embedding dimension must be >= 1, got {d}")
    graphs = unique_graphs(graphs)
    if len(graphs) < 2:
        raise ParameterError(f"Need at least 2 distinct graphs, got {len(graphs)}")
    if distances is None:
        distances = ged_matrix(graphs, costs)
    vectors, history = fit_distances(distances, d, steps, seed)
    pairs = len(graphs) * (len(graphs) - 1) / 2
    stress = history[-1] / pairs
    logger.info(f"🧭 CNN2vec: {len(graphs)} graphs, d={d}, stress per pair {stress:.3e}")
    table = EmbeddingTable(d, {g.digest: v for g, v in zip(graphs, vectors)},
                           {g.digest: g for g in graphs}, stress, [h / pairs for h in history])
    return table, stress


def stress_curve(graphs: Sequence[ComputationalGraph], costs: GedCostTable, dims: Sequence[int],
                 steps: int = EMBEDDING_CONFIG["epochs"], seed: int = 0) -> Dict[int, float]:
    graphs = unique_graphs(graphs)
    distances = ged_matrix(graphs, costs)
    return {d: train_embeddings(graphs, costs, d, steps, seed, distances)[1] for d in dims}


def knee_dimension(curve: Dict[int, float]) -> int:
    """Dimension farthest below the chord joining the curve's end points"""
    dims = sorted(curve)
    if len(dims) < 3:
        return dims[-1]
    xs = np.asarray(dims, dtype=float)
    ys = np.asarray([curve[d] for d in dims], dtype=float)
    xs = (xs - xs[0]) / (xs[-1] - xs[0])
    span = ys.max() - ys.min()
    ys = (ys - ys.min()) / span if span > 0 else np.zeros_like(ys)
    chord = ys[0] + (ys[-1] - ys[0]) * xs
    return dims[int(np.argmax(chord - ys))]
