"""
Performance Scoring for Pair Scout
Convex combination of normalized hardware costs and accuracy, with running normalization maxima
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from accel_sim.simulator import HardwareCost
from config import PERFORMANCE_WEIGHTS
from search.surrogate import SearchError

COST_FIELDS = ("latency", "area", "dynamic_energy", "leakage_energy")


class ConfigError(SearchError):
    """Malformed run configuration, weights or policy"""


@dataclass(frozen=True)
class PerfRecord:
    latency_ms: float
    area_mm2: float
    dynamic_energy_mj: float
    leakage_energy_mj: float
    accuracy: float

    def __post_init__(self):
        values = asdict(self)
        bad = {k: v for k, v in values.items() if not math.isfinite(v) or v < 0}
        if bad:
            raise ConfigError(f"Performance fields must be finite and non-negative: {bad}")
        if self.accuracy > 1.0:
            raise ConfigError(f"Accuracy {self.accuracy} above 1")

    @classmethod
    def from_hardware(cls, hardware: HardwareCost, accuracy: float) -> "PerfRecord":
        return cls(hardware.latency_ms, hardware.area_mm2, hardware.dynamic_energy_mj,
                   hardware.leakage_energy_mj, accuracy)

    @property
    def energy_mj(self) -> float:
        return self.dynamic_energy_mj + self.leakage_energy_mj

    @property
    def edp(self) -> float:
        return self.energy_mj * self.latency_ms

    def costs(self) -> Dict[str, float]:
        return {
            "latency": self.latency_ms,
            "area": self.area_mm2,
            "dynamic_energy": self.dynamic_energy_mj,
            "leakage_energy": self.leakage_energy_mj,
        }

    def to_row(self) -> Dict:
        return {
            "latency_ms": self.latency_ms,
            "area_mm2": self.area_mm2,
            "e_dyn_mJ": self.dynamic_energy_mj,
            "e_leak_mJ": self.leakage_energy_mj,
            "accuracy": self.accuracy,
            "edp": self.edp,
        }


@dataclass
class PerfWeights:
    latency: float = PERFORMANCE_WEIGHTS["latency"]
    area: float = PERFORMANCE_WEIGHTS["area"]
    dynamic_energy: float = PERFORMANCE_WEIGHTS["dynamic_energy"]
    leakage_energy: float = PERFORMANCE_WEIGHTS["leakage_energy"]
    accuracy: float = PERFORMANCE_WEIGHTS["accuracy"]
    maxima: Dict[str, float] = field(default_factory=lambda: {name: 1.0 for name in COST_FIELDS})

    def __post_init__(self):
        weights = self.as_dict()
        if any(w < 0 for w in weights.values()):
            raise ConfigError(f"Performance weights must be non-negative: {weights}")
        if abs(sum(weights.values()) - 1.0) > 1e-9:
            raise ConfigError(f"Performance weights must sum to 1, got {sum(weights.values())}")
        missing = [name for name in COST_FIELDS if name not in self.maxima]
        if missing or any(self.maxima[name] <= 0 for name in COST_FIELDS):
            raise ConfigError(f"Normalization maxima must be positive for {list(COST_FIELDS)}: {self.maxima}")

    def as_dict(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in COST_FIELDS + ("accuracy",)}

    @classmethod
    def from_dict(cls, data: Optional[Dict] = None) -> "PerfWeights":
        data = dict(data or {})
        unknown = set(data) - set(COST_FIELDS) - {"accuracy", "maxima"}
        if unknown:
            raise ConfigError(f"Unknown weight keys: {sorted(unknown)}")
        return cls(**data)


def normalized_components(record: PerfRecord, weights: PerfWeights) -> Dict[str, float]:
    costs = record.costs()
    normalized = {name: min(1.0, max(0.0, costs[name] / weights.maxima[name])) for name in COST_FIELDS}
    normalized["accuracy"] = min(1.0, max(0.0, record.accuracy))
    return normalized


def performance(record: PerfRecord, weights: PerfWeights) -> float:
    """alpha(1-L) + beta(1-A) + gamma(1-E_dyn) + delta(1-E_leak) + epsilon*Acc"""
    return score_breakdown(record, weights)["total_score"]


def score_breakdown(record: PerfRecord, weights: PerfWeights) -> Dict[str, float]:
    """Weighted contribution of every criterion plus the total"""
    normalized = normalized_components(record, weights)
    breakdown = {name: getattr(weights, name) * (1.0 - normalized[name]) for name in COST_FIELDS}
    breakdown["accuracy"] = weights.accuracy * normalized["accuracy"]
    breakdown["total_score"] = sum(breakdown.values())
    return breakdown


class PerformanceScorer:
    """Tracks running normalization maxima over observed records until frozen"""

    def __init__(self, weights: Optional[PerfWeights] = None, fixed_maxima: bool = False):
        self.logger = logging.getLogger(__name__)
        self.weights = weights or PerfWeights()
        self.frozen = fixed_maxima
        self._seen = False

    def observe(self, record: PerfRecord) -> None:
        if self.frozen:
            return
        maxima = dict(self.weights.maxima) if self._seen else {name: 0.0 for name in COST_FIELDS}
        for name, value in record.costs().items():
            maxima[name] = max(maxima[name], value, 1e-12)
        self.weights.maxima = maxima
        self._seen = True

    def freeze(self) -> None:
        if not self.frozen:
            self.logger.info("📏 Normalization maxima frozen: " +
                             ", ".join(f"{k}={v:.4g}" for k, v in self.weights.maxima.items()))
        self.frozen = True

    def score(self, record: PerfRecord) -> float:
        return performance(record, self.weights)

    def breakdown(self, record: PerfRecord) -> Dict[str, float]:
        return score_breakdown(record, self.weights)


def performance_summary(records: Sequence[PerfRecord], scores: Sequence[float],
                        mem_types: Optional[Sequence[str]] = None) -> Dict:
    """Summary statistics over scored pairs"""
    if not records:
        return {
            'total_pairs': 0,
            'best_performance': 0,
            'average_performance': 0,
            'mean_accuracy': 0,
            'mem_type_distribution': {},
        }

    mem_type_distribution: Dict[str, int] = {}
    for mem_type in mem_types or []:
        mem_type_distribution[mem_type] = mem_type_distribution.get(mem_type, 0) + 1

    values = np.asarray(scores, dtype=float)
    return {
        'total_pairs': len(records),
        'best_performance': float(values.max()),
        'average_performance': float(values.mean()),
        'performance_std': float(values.std()),
        'mean_accuracy': float(np.mean([r.accuracy for r in records])),
        'min_latency_ms': float(min(r.latency_ms for r in records)),
        'min_area_mm2': float(min(r.area_mm2 for r in records)),
        'mem_type_distribution': mem_type_distribution,
    }
