"""
Accelerator Design Space for Pair Scout
13-dimensional accelerator configurations, ordinal embeddings, enumeration and presets
"""

import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from config import ACCEL_SPACE_CONFIG
from design_space.cnn_space import DesignSpaceError, ParameterError

logger = logging.getLogger(__name__)

ACCEL_FIELDS = (
    "p_ib", "p_if", "p_ix", "p_iy", "p_of", "p_kx", "p_ky", "batch",
    "act_buf_mb", "wgt_buf_mb", "mask_buf_mb", "mem_type", "mem_config",
)
# Numeric coordinates and the config list each one draws from (kx and ky share one list)
NUMERIC_AXES = (
    ("p_ib", "p_ib"), ("p_if", "p_if"), ("p_ix", "p_ix"), ("p_iy", "p_iy"), ("p_of", "p_of"),
    ("p_kx", "p_k"), ("p_ky", "p_k"), ("batch", "batch"),
    ("act_buf_mb", "act_buf_mb"), ("wgt_buf_mb", "wgt_buf_mb"), ("mask_buf_mb", "mask_buf_mb"),
)
EMBEDDING_SIZE = len(ACCEL_FIELDS)


class UnknownPresetError(DesignSpaceError, KeyError):
    """Preset name not found in the presets file"""


@dataclass(frozen=True, order=True)
class AcceleratorConfig:
    p_ib: int
    p_if: int
    p_ix: int
    p_iy: int
    p_of: int
    p_kx: int
    p_ky: int
    batch: int
    act_buf_mb: int
    wgt_buf_mb: int
    mask_buf_mb: int
    mem_type: str
    mem_config: Tuple[int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "mem_config", tuple(int(v) for v in self.mem_config))

    def pe_count(self) -> int:
        return self.p_ib * self.p_ix * self.p_iy

    def mac_units_per_pe(self) -> int:
        return self.p_of * self.p_kx * self.p_ky

    def multipliers_per_mac(self) -> int:
        return self.p_if

    def total_mac_units(self) -> int:
        return self.pe_count() * self.mac_units_per_pe()

    def to_json(self) -> Dict:
        data = asdict(self)
        data["mem_config"] = list(self.mem_config)
        return data

    @classmethod
    def from_json(cls, data: Dict) -> "AcceleratorConfig":
        missing = [f for f in ACCEL_FIELDS if f not in data]
        if missing:
            raise ParameterError(f"Accelerator config missing fields: {missing}")
        return cls(**{f: data[f] for f in ACCEL_FIELDS})


@dataclass(frozen=True)
class AcceleratorPreset:
    name: str
    config: AcceleratorConfig
    technology: str
    clock_mhz: float
    reported_area_mm2: Optional[float] = None
    notes: str = ""


class AccelSpace:
    """Permissible values per hyperparameter; keyword overrides restrict individual lists"""

    def __init__(self, space_config: Optional[Dict] = None, **overrides):
        self.logger = logging.getLogger(__name__)
        cfg = dict(space_config or ACCEL_SPACE_CONFIG)
        cfg.update(overrides)
        self.config = cfg
        self.values: Dict[str, List[int]] = {}
        for _, key in NUMERIC_AXES:
            values = sorted(int(v) for v in cfg[key])
            if not values:
                raise ParameterError(f"Empty value list for {key}")
            self.values[key] = values
        self.mem_types: List[str] = list(cfg["mem_types"])
        self.mem_configs: Dict[str, List[Tuple[int, int, int]]] = {
            t: [tuple(c) for c in cfg["mem_configs"][t]] for t in self.mem_types
        }
        if not self.mem_types or any(not self.mem_configs[t] for t in self.mem_types):
            raise ParameterError("Every memory type needs at least one memory configuration")
        self.exhaustive_limit = cfg.get("exhaustive_limit", ACCEL_SPACE_CONFIG["exhaustive_limit"])
        self.snap_pool_size = cfg.get("snap_pool_size", ACCEL_SPACE_CONFIG["snap_pool_size"])
        self._encoded_cache: Optional[Tuple[List[AcceleratorConfig], np.ndarray]] = None

    def restrict(self, **overrides) -> "AccelSpace":
        cfg = dict(self.config)
        cfg.update(overrides)
        return AccelSpace(cfg)

    def cardinality(self) -> int:
        numeric = math.prod(len(self.values[key]) for key in dict.fromkeys(k for _, k in NUMERIC_AXES))
        return numeric * sum(len(self.mem_configs[t]) for t in self.mem_types)

    def is_valid(self, c: AcceleratorConfig) -> bool:
        try:
            self.validate(c)
        except ParameterError:
            return False
        return True

    def validate(self, c: AcceleratorConfig) -> None:
        for field, key in NUMERIC_AXES:
            if getattr(c, field) not in self.values[key]:
                raise ParameterError(f"{field}={getattr(c, field)} outside {self.values[key]}")
        if c.p_kx != c.p_ky:
            raise ParameterError(f"P_kx ({c.p_kx}) must equal P_ky ({c.p_ky})")
        if c.mem_type not in self.mem_types:
            raise ParameterError(f"Unknown memory type {c.mem_type}")
        if c.mem_config not in self.mem_configs[c.mem_type]:
            raise ParameterError(f"Memory config {c.mem_config} not available for {c.mem_type}")

    @staticmethod
    def _normalize(index: int, size: int) -> float:
        return index / (size - 1) if size > 1 else 0.0

    @staticmethod
    def _snap(value: float, size: int) -> int:
        return int(math.floor(value * (size - 1) + 0.5)) if size > 1 else 0

    def encode(self, c: AcceleratorConfig) -> np.ndarray:
        self.validate(c)
        x = [self._normalize(self.values[key].index(getattr(c, field)), len(self.values[key]))
             for field, key in NUMERIC_AXES]
        x.append(self._normalize(self.mem_types.index(c.mem_type), len(self.mem_types)))
        configs = self.mem_configs[c.mem_type]
        x.append(self._normalize(configs.index(c.mem_config), len(configs)))
        return np.asarray(x, dtype=float)

    def decode(self, x: Sequence[float]) -> Tuple[AcceleratorConfig, bool]:
        """Snap each coordinate to its nearest ordinal; returns (config, clamped)"""
        x = np.asarray(x, dtype=float)
        if x.shape != (EMBEDDING_SIZE,) or not np.all(np.isfinite(x)):
            raise ParameterError(f"Accelerator embedding must be {EMBEDDING_SIZE} finite reals")
        clamped = bool(np.any(x < 0.0) or np.any(x > 1.0))
        if clamped:
            self.logger.debug("Accelerator embedding clamped into [0, 1]")
        x = np.clip(x, 0.0, 1.0)
        fields = {}
        kernel = (x[5] + x[6]) / 2.0
        for i, (field, key) in enumerate(NUMERIC_AXES):
            value = kernel if field in ("p_kx", "p_ky") else x[i]
            fields[field] = self.values[key][self._snap(value, len(self.values[key]))]
        mem_type = self.mem_types[self._snap(x[11], len(self.mem_types))]
        configs = self.mem_configs[mem_type]
        fields["mem_type"] = mem_type
        fields["mem_config"] = configs[self._snap(x[12], len(configs))]
        return AcceleratorConfig(**fields), clamped

    def iter_configs(self) -> Iterator[AcceleratorConfig]:
        """Streaming enumeration in lexicographic ordinal order"""
        numeric_keys = ["p_ib", "p_if", "p_ix", "p_iy", "p_of", "p_k", "batch", "act_buf_mb", "wgt_buf_mb", "mask_buf_mb"]
        for combo in itertools.product(*(self.values[k] for k in numeric_keys)):
            ib, i_f, ix, iy, of, k, batch, act, wgt, mask = combo
            for mem_type in self.mem_types:
                for mem_config in self.mem_configs[mem_type]:
                    yield AcceleratorConfig(ib, i_f, ix, iy, of, k, k, batch, act, wgt, mask, mem_type, mem_config)

    def sample(self, rng: np.random.Generator, n: int = 1) -> List[AcceleratorConfig]:
        configs = []
        for _ in range(n):
            fields = {}
            kernel = self.values["p_k"][int(rng.integers(len(self.values["p_k"])))]
            for field, key in NUMERIC_AXES:
                fields[field] = kernel if key == "p_k" else self.values[key][int(rng.integers(len(self.values[key])))]
            mem_type = self.mem_types[int(rng.integers(len(self.mem_types)))]
            options = self.mem_configs[mem_type]
            configs.append(AcceleratorConfig(mem_type=mem_type, mem_config=options[int(rng.integers(len(options)))], **fields))
        return configs

    def _encoded_space(self) -> Tuple[List[AcceleratorConfig], np.ndarray]:
        if self._encoded_cache is None:
            configs = list(self.iter_configs())
            self._encoded_cache = (configs, np.stack([self.encode(c) for c in configs]))
        return self._encoded_cache

    def nearest_configs(self, x: Sequence[float], seed: int = 0) -> List[Tuple[AcceleratorConfig, float]]:
        """
        Candidate configs ordered by distance to x, ties by config order.

        Small spaces are scanned exhaustively. Larger ones use the snapped point, every one- and
        two-coordinate move around it and a seeded random pool.
        """
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        if self.cardinality() <= self.exhaustive_limit:
            configs, encoded = self._encoded_space()
            distances = np.linalg.norm(encoded - x, axis=1)
            order = sorted(range(len(configs)), key=lambda i: (distances[i], configs[i]))
            return [(configs[i], float(distances[i])) for i in order]

        base, _ = self.decode(x)
        candidates = {base}
        moves = self.adjacent(base)
        candidates.update(moves)
        for a, b in itertools.combinations(moves, 2):
            merged = self._merge(base, a, b)
            if merged is not None:
                candidates.add(merged)
        candidates.update(self.sample(np.random.default_rng(seed), self.snap_pool_size))
        scored = [(c, float(np.linalg.norm(self.encode(c) - x))) for c in candidates]
        scored.sort(key=lambda item: (item[1], item[0]))
        return scored

    def adjacent(self, base: AcceleratorConfig) -> List[AcceleratorConfig]:
        """Configs one ordinal step away from base along one coordinate"""
        moves = []
        for field, key in NUMERIC_AXES:
            if field == "p_ky":
                continue
            values = self.values[key]
            i = values.index(getattr(base, field))
            for j in (i - 1, i + 1):
                if 0 <= j < len(values):
                    change = {"p_kx": values[j], "p_ky": values[j]} if key == "p_k" else {field: values[j]}
                    moves.append(self._replace(base, change))
        for mem_type in self.mem_types:
            for mem_config in self.mem_configs[mem_type]:
                if (mem_type, mem_config) != (base.mem_type, base.mem_config):
                    moves.append(self._replace(base, {"mem_type": mem_type, "mem_config": mem_config}))
        return moves

    @staticmethod
    def _replace(base: AcceleratorConfig, change: Dict) -> AcceleratorConfig:
        data = {f: getattr(base, f) for f in ACCEL_FIELDS}
        data.update(change)
        return AcceleratorConfig(**data)

    def _merge(self, base: AcceleratorConfig, a: AcceleratorConfig, b: AcceleratorConfig) -> Optional[AcceleratorConfig]:
        changed_a = {f: getattr(a, f) for f in ACCEL_FIELDS if getattr(a, f) != getattr(base, f)}
        changed_b = {f: getattr(b, f) for f in ACCEL_FIELDS if getattr(b, f) != getattr(base, f)}
        if set(changed_a) & set(changed_b):
            return None
        return self._replace(base, {**changed_a, **changed_b})


def load_presets(path: str = ACCEL_SPACE_CONFIG["presets_path"]) -> Dict[str, AcceleratorPreset]:
    with open(path, "r") as f:
        rows = json.load(f)
    presets = {}
    for row in rows:
        presets[row["name"]] = AcceleratorPreset(
            name=row["name"],
            config=AcceleratorConfig.from_json(row["config"]),
            technology=row.get("technology", ""),
            clock_mhz=float(row.get("clock_mhz", 0.0)),
            reported_area_mm2=row.get("area_mm2"),
            notes=row.get("notes", ""),
        )
    return presets


def get_preset(name: str, path: str = ACCEL_SPACE_CONFIG["presets_path"]) -> AcceleratorPreset:
    presets = load_presets(path)
    lowered = {k.lower(): v for k, v in presets.items()}
    if name.lower() not in lowered:
        raise UnknownPresetError(f"Unknown preset '{name}'; available: {', '.join(presets)}")
    return lowered[name.lower()]
