"""
Pareto Frontiers for Pair Scout
Non-dominated pairs under maximized accuracy and one minimized hardware objective
"""

from typing import Callable, Dict, List, Sequence, TypeVar

from search.performance import ConfigError, PerfRecord

T = TypeVar("T")

OBJECTIVES: Dict[str, Callable[[PerfRecord], float]] = {
    "latency": lambda r: r.latency_ms,
    "area": lambda r: r.area_mm2,
    "energy": lambda r: r.dynamic_energy_mj,
    "leakage": lambda r: r.leakage_energy_mj,
    "edp": lambda r: r.edp,
}


def dominates(a: PerfRecord, b: PerfRecord, objective: str) -> bool:
    cost = OBJECTIVES[objective]
    return (cost(a) <= cost(b) and a.accuracy >= b.accuracy
            and (cost(a) < cost(b) or a.accuracy > b.accuracy))


def pareto_front(items: Sequence[T], objective: str,
                 record: Callable[[T], PerfRecord] = lambda item: item) -> List[T]:
    """Non-dominated items ordered by objective; identical (cost, accuracy) points are all kept"""
    if objective not in OBJECTIVES:
        raise ConfigError(f"Unknown objective '{objective}'; choose from {sorted(OBJECTIVES)}")
    if not items:
        return []
    cost = OBJECTIVES[objective]
    order = sorted(range(len(items)), key=lambda i: (cost(record(items[i])), -record(items[i]).accuracy, i))

    front: List[T] = []
    best_accuracy = float("-inf")
    start = 0
    while start < len(order):
        group_cost = cost(record(items[order[start]]))
        end = start
        while end < len(order) and cost(record(items[order[end]])) == group_cost:
            end += 1
        group_best = record(items[order[start]]).accuracy
        if group_best > best_accuracy:
            front.extend(items[i] for i in order[start:end] if record(items[i]).accuracy == group_best)
            best_accuracy = group_best
        start = end
    return front
