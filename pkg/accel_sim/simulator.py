"""
Accelerator Simulator for Pair Scout
Analytic per-tile latency, energy and area model under an output-stationary dataflow
"""

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx

from config import CNN_SPACE_CONFIG, SIMULATOR_CONFIG
from design_space.accel_space import AcceleratorConfig
from design_space.cnn_space import ComputationalGraph, OpBlock

MB = 1 << 20
MAC_KINDS = ("conv", "dense")


class SimulationError(Exception):
    """Base error for the accelerator simulator"""


class UnmappableLayerError(SimulationError):
    """Block kind has no processing module on the accelerator"""


class CapacityError(SimulationError):
    """Smallest tile does not fit its buffer"""


class ConstantsError(SimulationError):
    """Cost constants file is missing, malformed or fails its checksum"""


@dataclass(frozen=True)
class CostConstants:
    version: str
    clock_hz: float
    word_bytes: float
    energy_pj: Dict
    memory: Dict
    leakage_mw_per_mm2: Dict
    area_mm2: Dict
    checksum: str = ""

    def memory_value(self, table: str, mem_type: str) -> float:
        try:
            return float(self.memory[table][mem_type])
        except KeyError:
            raise ConstantsError(f"No '{table}' entry for memory type {mem_type}") from None


def _check_non_negative(value, path: str) -> None:
    if isinstance(value, dict):
        for key, inner in value.items():
            _check_non_negative(inner, f"{path}.{key}")
    elif isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConstantsError(f"{path} must be numeric, got {value!r}")
    elif value < 0 or not math.isfinite(value):
        raise ConstantsError(f"{path} must be a finite non-negative number, got {value}")


def load_constants(path: str = SIMULATOR_CONFIG["constants_path"]) -> CostConstants:
    """Load the versioned constants file; a '<path>.sha256' sidecar, when present, must match"""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise ConstantsError(f"Cannot read cost constants: {e}") from e
    checksum = hashlib.sha256(raw).hexdigest()
    sidecar = path + ".sha256"
    if os.path.exists(sidecar):
        with open(sidecar, "r") as f:
            tokens = f.read().split()
        expected = tokens[0].lower() if tokens else ""
        if expected != checksum:
            raise ConstantsError(f"Checksum mismatch for {path}: expected {expected[:12]}, got {checksum[:12]}")
    try:
        data = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ConstantsError(f"{path}: {e}") from e
    return constants_from_dict(data, checksum)


def constants_from_dict(data: Dict, checksum: str = "") -> CostConstants:
    required = ("version", "clock_hz", "word_bytes", "energy_pj", "memory", "leakage_mw_per_mm2", "area_mm2")
    missing = [key for key in required if key not in data]
    if missing:
        raise ConstantsError(f"Cost constants missing keys: {missing}")
    for key in required[1:]:
        _check_non_negative(data[key], key)
    if data["clock_hz"] <= 0:
        raise ConstantsError("clock_hz must be positive")
    return CostConstants(str(data["version"]), float(data["clock_hz"]), float(data["word_bytes"]),
                         data["energy_pj"], data["memory"], data["leakage_mw_per_mm2"], data["area_mm2"], checksum)


@dataclass(frozen=True)
class LayerShape:
    """One mapped layer: batch, input channels per group, output x/y, output channels, kernel x/y"""
    kind: str
    n_ib: int
    n_if: int
    n_ix: int
    n_iy: int
    n_of: int
    n_kx: int
    n_ky: int
    stride: int = 1
    padding: int = 0
    groups: int = 1
    sparsity_act: float = 0.0
    sparsity_wgt: float = 0.0
    in_x: Optional[int] = None
    in_y: Optional[int] = None
    name: str = ""

    def __post_init__(self):
        dims = (self.n_ib, self.n_if, self.n_ix, self.n_iy, self.n_of, self.n_kx, self.n_ky, self.stride, self.groups)
        if any(d < 1 for d in dims):
            raise SimulationError(f"Layer {self.name or self.kind} has a dimension below 1: {dims}")
        if not (0.0 <= self.sparsity_act <= 1.0 and 0.0 <= self.sparsity_wgt <= 1.0):
            raise SimulationError(f"Layer {self.name or self.kind} sparsities must lie in [0, 1]")

    @property
    def input_x(self) -> int:
        return self.in_x if self.in_x is not None else self.n_ix * self.stride

    @property
    def input_y(self) -> int:
        return self.in_y if self.in_y is not None else self.n_iy * self.stride

    @property
    def macs(self) -> int:
        if self.kind not in MAC_KINDS:
            return 0
        return self.n_ib * self.n_if * self.n_ix * self.n_iy * self.n_of * self.n_kx * self.n_ky


@dataclass(frozen=True)
class LayerCost:
    name: str
    kind: str
    tile_passes: int
    mac_cycles: float
    other_cycles: float
    memory_cycles: float
    cycles: float
    macs: int
    effective_macs: float
    memory_bytes: float
    mask_bytes: float
    dynamic_energy_pj: float


@dataclass(frozen=True)
class HardwareCost:
    """Per-inference hardware metrics for one CNN on one accelerator"""
    latency_ms: float
    area_mm2: float
    dynamic_energy_mj: float
    leakage_energy_mj: float
    total_cycles: float
    layers: Tuple[LayerCost, ...] = field(default=(), repr=False)

    @property
    def edp(self) -> float:
        return (self.dynamic_energy_mj + self.leakage_energy_mj) * self.latency_ms

    def to_row(self) -> Dict:
        return {
            "latency_ms": self.latency_ms,
            "area_mm2": self.area_mm2,
            "e_dyn_mJ": self.dynamic_energy_mj,
            "e_leak_mJ": self.leakage_energy_mj,
        }


def pe_count(c: AcceleratorConfig) -> int:
    return c.pe_count()


def mac_units_per_pe(c: AcceleratorConfig) -> int:
    return c.mac_units_per_pe()


def area_breakdown(c: AcceleratorConfig, k: CostConstants) -> Dict[str, float]:
    a = k.area_mm2
    mac_area = c.mac_units_per_pe() * (a["mac_overhead"] + c.p_if * a["multiplier"])
    buffers = a["buffer_per_mb"]
    try:
        interface = a["memory_interface"][c.mem_type]
    except KeyError:
        raise ConstantsError(f"No memory interface area for {c.mem_type}") from None
    return {
        "pe_array": c.pe_count() * (a["pe_overhead"] + mac_area),
        "activation_buffer": c.act_buf_mb * buffers["activation"],
        "weight_buffer": c.wgt_buf_mb * buffers["weight"],
        "mask_buffer": c.mask_buf_mb * buffers["mask"],
        "controller": a["controller"] + interface,
    }


def area(c: AcceleratorConfig, k: CostConstants) -> float:
    return sum(area_breakdown(c, k).values())


class AcceleratorSimulator:
    """Lowers computational graphs to layers and maps each layer onto an accelerator configuration"""

    def __init__(self, constants: Optional[CostConstants] = None,
                 sparsity_act: float = SIMULATOR_CONFIG["sparsity_act"],
                 sparsity_wgt: float = SIMULATOR_CONFIG["sparsity_wgt"],
                 binary_mask: bool = SIMULATOR_CONFIG["binary_mask"],
                 input_shape: Sequence[int] = CNN_SPACE_CONFIG["input_shape"]):
        self.logger = logging.getLogger(__name__)
        self.constants = constants or load_constants()
        self.sparsity_act = sparsity_act
        self.sparsity_wgt = sparsity_wgt
        self.binary_mask = binary_mask
        self.input_shape = tuple(int(v) for v in input_shape)

    def lower(self, graph: ComputationalGraph, batch: int = 1) -> List[LayerShape]:
        """Coarse shape propagation: merges take the widest channels and the smallest spatial size"""
        dag = graph.to_networkx()
        shapes: Dict[int, Tuple[int, int, int]] = {}
        layers: List[LayerShape] = []
        for node in nx.topological_sort(dag):
            block = dag.nodes[node]["block"]
            preds = list(dag.predecessors(node))
            if preds:
                incoming = (max(shapes[p][0] for p in preds), min(shapes[p][1] for p in preds),
                            min(shapes[p][2] for p in preds))
            else:
                incoming = self.input_shape
            shapes[node], layer = self._lower_block(block, incoming, batch, f"{node}:{block.label}")
            if layer is not None:
                layers.append(layer)
        return layers

    def _lower_block(self, block: OpBlock, shape: Tuple[int, int, int], batch: int,
                     name: str) -> Tuple[Tuple[int, int, int], Optional[LayerShape]]:
        c, h, w = shape
        kind = block.kind
        kernel = block.param("kernel", 1)
        stride = block.param("stride", 1)
        sparse = dict(sparsity_act=self.sparsity_act, sparsity_wgt=self.sparsity_wgt)
        if kind in ("input", "output", "dropout"):
            return shape, None
        if kind == "flatten":
            return (c * h * w, 1, 1), None
        if kind in ("conv", "conv3d"):
            out = block.param("channels", c)
            oh, ow = math.ceil(h / stride), math.ceil(w / stride)
            depth = kernel if kind == "conv3d" else 1
            layer = LayerShape("conv", batch, c * depth, oh, ow, out, kernel, kernel, stride, kernel // 2,
                               in_x=h, in_y=w, name=name, **sparse)
            return (out, oh, ow), layer
        if kind == "transposed-conv":
            out = block.param("channels", c)
            oh, ow = h * stride, w * stride
            layer = LayerShape("conv", batch, c, oh, ow, out, kernel, kernel, 1, kernel // 2,
                               in_x=h, in_y=w, name=name, **sparse)
            return (out, oh, ow), layer
        if kind == "dwconv":
            oh, ow = math.ceil(h / stride), math.ceil(w / stride)
            layer = LayerShape("conv", batch, 1, oh, ow, c, kernel, kernel, stride, kernel // 2, groups=c,
                               in_x=h, in_y=w, name=name, **sparse)
            return (c, oh, ow), layer
        if kind in ("maxpool", "avgpool"):
            oh, ow = math.ceil(h / stride), math.ceil(w / stride)
            layer = LayerShape("pool", batch, 1, oh, ow, c, kernel, kernel, stride, groups=c, in_x=h, in_y=w, name=name)
            return (c, oh, ow), layer
        if kind == "global-avg-pool":
            layer = LayerShape("pool", batch, 1, 1, 1, c, h, w, groups=c, in_x=h, in_y=w, name=name)
            return (c, 1, 1), layer
        if kind == "upsample":
            size = block.param("size", h)
            layer = LayerShape("upsample", batch, 1, size, size, c, 1, 1, groups=c, in_x=h, in_y=w, name=name)
            return (c, size, size), layer
        if kind == "channel-shuffle":
            layer = LayerShape("shuffle", batch, 1, h, w, c, 1, 1, groups=c, in_x=h, in_y=w, name=name)
            return shape, layer
        if kind == "dense":
            units = block.param("units", 1)
            layer = LayerShape("dense", batch, c * h * w, 1, 1, units, 1, 1, in_x=1, in_y=1, name=name, **sparse)
            return (units, 1, 1), layer
        raise UnmappableLayerError(f"No processing module can map block {block.label}")

    def _bandwidth(self, c: AcceleratorConfig) -> float:
        base = self.constants.memory_value("bandwidth_bytes_per_cycle", c.mem_type)
        channels = c.mem_config[2]
        return base * (1.0 + self.constants.memory["channel_scaling"] * math.log2(channels))

    def simulate_layer(self, layer: LayerShape, c: AcceleratorConfig) -> LayerCost:
        k = self.constants
        word = k.word_bytes
        dims = (layer.n_ib, layer.n_if, layer.n_ix, layer.n_iy, layer.n_of, layer.n_kx, layer.n_ky)
        par = (c.p_ib, c.p_if, c.p_ix, c.p_iy, c.p_of, c.p_kx, c.p_ky)
        tiles = [math.ceil(n / p) for n, p in zip(dims, par)]
        t_ib, t_if, t_ix, t_iy, t_of, t_kx, t_ky = tiles
        pes = c.pe_count()

        is_mac = layer.kind in MAC_KINDS
        masked = self.binary_mask and is_mac
        s_act = layer.sparsity_act if masked else 0.0
        s_wgt = layer.sparsity_wgt if masked else 0.0

        act_elems = layer.n_ib * layer.n_if * layer.groups * layer.input_x * layer.input_y
        out_elems = layer.n_ib * layer.n_of * layer.n_ix * layer.n_iy
        wgt_elems = layer.n_of * layer.n_if * layer.n_kx * layer.n_ky if is_mac else 0
        act_bytes = act_elems * word * (1.0 - s_act)
        wgt_bytes = wgt_elems * word * (1.0 - s_wgt)
        out_bytes = out_elems * word
        mask_bytes = (act_elems + wgt_elems) / 8.0 if masked else 0.0

        act_cap, wgt_cap = c.act_buf_mb * MB, c.wgt_buf_mb * MB
        min_act_tile = c.p_ib * c.p_if * (c.p_ix * layer.stride + c.p_kx - 1) * (c.p_iy * layer.stride + c.p_ky - 1) * word
        min_wgt_tile = c.p_of * c.p_if * c.p_kx * c.p_ky * word if is_mac else 0.0
        if min_act_tile > act_cap or min_wgt_tile > wgt_cap:
            raise CapacityError(f"Layer {layer.name or layer.kind}: minimal tile ({min_act_tile:.0f} B act, "
                                f"{min_wgt_tile:.0f} B wgt) exceeds buffers ({act_cap} B, {wgt_cap} B)")

        tile_passes = math.prod(tiles)
        energy = k.energy_pj
        mac_cycles, other_cycles, effective_macs, op_energy = 0.0, 0.0, 0.0, 0.0
        if is_mac:
            # adder tree over the multipliers actually fed by this layer
            pipeline_depth = math.ceil(math.log2(min(c.p_if, layer.n_if))) + 2
            keep = (1.0 - s_act) * (1.0 - s_wgt)
            mac_cycles = tile_passes * pipeline_depth * keep
            effective_macs = layer.macs * keep
            op_energy = effective_macs * energy["multiply"]
            if layer.n_kx > 1 or layer.n_ky > 1:
                other_cycles = math.ceil(out_elems / (pes * c.p_of))  # batch normalization
                op_energy += out_elems * energy["bn_op"]
        elif layer.kind == "pool":
            other_cycles = math.ceil(out_elems / (pes * c.p_of)) * layer.n_kx * layer.n_ky
            op_energy = out_elems * layer.n_kx * layer.n_ky * energy["pool_op"]
        elif layer.kind == "upsample":
            other_cycles = math.ceil(out_elems / pes)
            op_energy = out_bytes * energy["shuffle_byte"]
        elif layer.kind == "shuffle":
            other_cycles = math.ceil(out_elems / (pes * c.p_of))
            op_energy = out_bytes * energy["shuffle_byte"]
        else:
            raise UnmappableLayerError(f"No processing module for layer kind {layer.kind}")

        act_passes = max(1, min(t_of, math.ceil((act_bytes + out_bytes) / act_cap)))
        wgt_passes = max(1, min(t_ib * t_ix * t_iy, math.ceil(wgt_bytes / wgt_cap))) if wgt_bytes else 0
        memory_bytes = act_bytes * act_passes + wgt_bytes * wgt_passes + out_bytes + mask_bytes
        transfers = act_passes + wgt_passes + 1
        banks, ranks, _ = c.mem_config
        memory_cycles = (memory_bytes / self._bandwidth(c)
                         + transfers * k.memory_value("access_latency_cycles", c.mem_type) / (banks * ranks))

        buffer_energy = energy["buffer_byte"]
        on_chip = (
            (act_bytes * t_of + out_bytes) * buffer_energy["activation"]
            + wgt_bytes * t_ib * t_ix * t_iy * buffer_energy["weight"]
            + mask_bytes * t_of * buffer_energy["mask"]
        )
        try:
            off_chip = memory_bytes * energy["memory_byte"][c.mem_type]
        except KeyError:
            raise ConstantsError(f"No memory access energy for {c.mem_type}") from None

        compute_cycles = mac_cycles + other_cycles
        return LayerCost(
            name=layer.name, kind=layer.kind, tile_passes=tile_passes, mac_cycles=mac_cycles,
            other_cycles=float(other_cycles), memory_cycles=memory_cycles,
            cycles=max(compute_cycles, memory_cycles), macs=layer.macs, effective_macs=effective_macs,
            memory_bytes=memory_bytes, mask_bytes=mask_bytes, dynamic_energy_pj=op_energy + on_chip + off_chip,
        )

    def leakage_power_mw(self, c: AcceleratorConfig) -> float:
        parts = area_breakdown(c, self.constants)
        leak = self.constants.leakage_mw_per_mm2
        buffers = parts["activation_buffer"] + parts["weight_buffer"] + parts["mask_buffer"]
        return parts["pe_array"] * leak["pe"] + buffers * leak["buffer"] + parts["controller"] * leak["controller"]

    def simulate(self, graph: ComputationalGraph, c: AcceleratorConfig) -> HardwareCost:
        layers = self.lower(graph, c.batch)
        costs = tuple(self.simulate_layer(layer, c) for layer in layers)
        total_cycles = sum(cost.cycles for cost in costs)
        latency_s = total_cycles / self.constants.clock_hz / c.batch
        dynamic_mj = sum(cost.dynamic_energy_pj for cost in costs) * 1e-9 / c.batch
        leakage_mj = self.leakage_power_mw(c) * latency_s
        self.logger.debug(f"Simulated {len(costs)} layers: {total_cycles:.0f} cycles on {c.pe_count()} PEs")
        return HardwareCost(latency_s * 1e3, area(c, self.constants), dynamic_mj, leakage_mj, total_cycles, costs)


def simulate(cnn: ComputationalGraph, c: AcceleratorConfig, k: Optional[CostConstants] = None) -> HardwareCost:
    return AcceleratorSimulator(k).simulate(cnn, c)
