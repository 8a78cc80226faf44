"""
CNN Design Space for Pair Scout
Operation blocks, modular computational graphs, isomorphism hashing, graph edit distance and crossover
"""

import hashlib
import itertools
import json
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from config import CNN_SPACE_CONFIG, GED_CONFIG

logger = logging.getLogger(__name__)

BLOCK_KINDS = (
    "input", "output", "conv", "dwconv", "conv3d", "transposed-conv", "maxpool", "avgpool",
    "channel-shuffle", "dropout", "upsample", "flatten", "global-avg-pool", "dense",
)
ACTIVATIONS = ("none", "relu", "silu")
PARAM_NAMES = ("kernel", "channels", "groups", "padding", "stride", "probability", "size", "units")

# Conv modules may not contain these
HEAD_ONLY_KINDS = ("flatten", "global-avg-pool", "dense")

REFERENCE_WIDTH = 16
REFERENCE_FEATURES = 256
DESCRIPTOR_SIZE = 6


class DesignSpaceError(Exception):
    """Base error for the design-space packages"""


class GraphValidationError(DesignSpaceError):
    """Graph or module breaks a structural invariant"""


class ParameterError(DesignSpaceError, ValueError):
    """Invalid argument to a design-space operation"""


class UnknownDigestError(DesignSpaceError, KeyError):
    """Digest not present in a lookup table"""


@dataclass(frozen=True)
class OpBlock:
    """One operation block; params is a sorted tuple of (name, value) pairs"""
    kind: str
    params: Tuple[Tuple[str, int], ...] = ()
    activation: str = "none"

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise GraphValidationError(f"Unknown block kind: {self.kind}")
        if self.activation not in ACTIVATIONS:
            raise GraphValidationError(f"Unknown activation '{self.activation}' on {self.kind}")
        params = dict(self.params)
        for name, value in params.items():
            if name not in PARAM_NAMES:
                raise GraphValidationError(f"Unknown parameter '{name}' on {self.kind}")
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 0:
                raise GraphValidationError(f"Parameter {name}={value!r} on {self.kind} must be a non-negative integer")
        object.__setattr__(self, "params", tuple(sorted((k, int(v)) for k, v in params.items())))

    @classmethod
    def make(cls, kind: str, activation: str = "none", **params) -> "OpBlock":
        return cls(kind, tuple(params.items()), activation)

    def param(self, name: str, default: Optional[int] = None) -> Optional[int]:
        return dict(self.params).get(name, default)

    @property
    def label(self) -> str:
        parts = [self.kind] + [f"{k}={v}" for k, v in self.params]
        if self.activation != "none":
            parts.append(self.activation)
        return ":".join(parts)

    def to_json(self) -> Dict:
        data = {"op": self.kind}
        data.update(dict(self.params))
        if self.activation != "none":
            data["activation"] = self.activation
        return data

    @classmethod
    def from_json(cls, data: Mapping) -> "OpBlock":
        if "op" not in data:
            raise GraphValidationError(f"Block without 'op' field: {dict(data)}")
        params = {k: v for k, v in data.items() if k not in ("op", "activation")}
        return cls(data["op"], tuple(params.items()), data.get("activation", "none"))


def block_complexity(block: OpBlock) -> float:
    """MAC-per-output-pixel proxy at a reference input width"""
    kernel = block.param("kernel", 1)
    channels = block.param("channels", REFERENCE_WIDTH)
    kind = block.kind
    if kind in ("conv", "transposed-conv"):
        return float(kernel * kernel * REFERENCE_WIDTH * channels)
    if kind == "conv3d":
        return float(kernel ** 3 * REFERENCE_WIDTH * channels)
    if kind == "dwconv":
        return float(kernel * kernel * channels)
    if kind in ("maxpool", "avgpool"):
        return float(kernel * kernel) / block.param("stride", 1)
    if kind == "dense":
        return float(REFERENCE_FEATURES * block.param("units", 1))
    if kind == "upsample":
        return 4.0
    if kind == "global-avg-pool":
        return 1.0
    if kind == "channel-shuffle":
        return 0.5
    if kind == "dropout":
        return 0.25
    if kind == "flatten":
        return 0.1
    return 0.0


class BlockLibrary:
    """Permissible blocks sorted by complexity; position in the order is the complexity index"""

    def __init__(self, blocks: Iterable[OpBlock]):
        unique = sorted(set(blocks), key=lambda b: (block_complexity(b), b.label))
        self.blocks: Tuple[OpBlock, ...] = tuple(unique)
        self._index = {block: i for i, block in enumerate(self.blocks)}

    @classmethod
    def from_config(cls, space_config: Optional[Dict] = None) -> "BlockLibrary":
        cfg = space_config or CNN_SPACE_CONFIG
        acts = cfg["activations"]
        blocks = [OpBlock("input"), OpBlock("output"), OpBlock("flatten"), OpBlock("global-avg-pool")]
        for k, c, a in itertools.product(cfg["conv_kernels"], cfg["conv_channels"], acts):
            blocks.append(OpBlock.make("conv", a, kernel=k, channels=c))
        for k, a in itertools.product(cfg["dwconv_kernels"], acts):
            blocks.append(OpBlock.make("dwconv", a, kernel=k))
        for k, c in itertools.product(cfg["conv3d_kernels"], cfg["conv_channels"]):
            blocks.append(OpBlock.make("conv3d", "relu", kernel=k, channels=c))
        for k, c in itertools.product(cfg["transposed_kernels"], cfg["conv_channels"]):
            blocks.append(OpBlock.make("transposed-conv", "relu", kernel=k, channels=c))
        for kind in ("maxpool", "avgpool"):
            for k, s in itertools.product(cfg["pool_kernels"], cfg["pool_strides"]):
                blocks.append(OpBlock.make(kind, kernel=k, stride=s))
        blocks.extend(OpBlock.make("channel-shuffle", groups=g) for g in cfg["shuffle_groups"])
        blocks.extend(OpBlock.make("dropout", probability=p) for p in cfg["dropout_percents"])
        blocks.extend(OpBlock.make("upsample", size=s) for s in cfg["upsample_sizes"])
        blocks.extend(OpBlock.make("dense", "relu", units=u) for u in cfg["dense_units"])
        blocks.append(OpBlock.make("dense", units=cfg["num_classes"]))
        return cls(blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def __contains__(self, block: OpBlock) -> bool:
        return block in self._index

    def index(self, block: OpBlock) -> int:
        try:
            return self._index[block]
        except KeyError:
            raise ParameterError(f"Block {block.label} is outside the block library") from None

    def body_blocks(self) -> List[OpBlock]:
        return [b for b in self.blocks if b.kind not in ("input", "output", "upsample") + HEAD_ONLY_KINDS]


@dataclass(frozen=True)
class GraphModule:
    blocks: Tuple[OpBlock, ...]
    edges: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "edges", tuple(sorted({(int(u), int(v)) for u, v in self.edges})))

    @property
    def input_index(self) -> int:
        return next(i for i, b in enumerate(self.blocks) if b.kind == "input")

    @property
    def output_index(self) -> int:
        return next(i for i, b in enumerate(self.blocks) if b.kind == "output")

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        for i, block in enumerate(self.blocks):
            graph.add_node(i, block=block, label=block.label)
        graph.add_edges_from(self.edges)
        return graph

    def is_sequential(self) -> bool:
        order = list(nx.topological_sort(self.to_networkx()))
        return set(self.edges) == set(zip(order, order[1:]))

    def validate(self, head: bool = False, space_config: Optional[Dict] = None) -> None:
        cfg = space_config or CNN_SPACE_CONFIG
        n = len(self.blocks)
        kinds = [b.kind for b in self.blocks]
        if kinds.count("input") != 1 or kinds.count("output") != 1:
            raise GraphValidationError("A module needs exactly one input and one output block")
        for u, v in self.edges:
            if not (0 <= u < n and 0 <= v < n) or u == v:
                raise GraphValidationError(f"Bad edge ({u}, {v}) in a module of {n} blocks")
        graph = self.to_networkx()
        if not nx.is_directed_acyclic_graph(graph):
            raise GraphValidationError("Module contains a cycle")
        src, dst = self.input_index, self.output_index
        if graph.in_degree(src) or graph.out_degree(dst):
            raise GraphValidationError("Input must have no predecessors and output no successors")
        reachable = nx.descendants(graph, src) | {src}
        coreachable = nx.ancestors(graph, dst) | {dst}
        if len(reachable & coreachable) != n:
            raise GraphValidationError("Every block must lie on a path from input to output")
        if head:
            if n > cfg["max_head_vertices"]:
                raise GraphValidationError(f"Head has {n} vertices, cap is {cfg['max_head_vertices']}")
            if not self.is_sequential():
                raise GraphValidationError("Head edges must be purely sequential")
        else:
            if n > cfg["max_module_vertices"] or len(self.edges) > cfg["max_module_edges"]:
                raise GraphValidationError(
                    f"Module has {n} vertices/{len(self.edges)} edges, caps are "
                    f"{cfg['max_module_vertices']}/{cfg['max_module_edges']}")
            misplaced = [b.label for b in self.blocks if b.kind in HEAD_ONLY_KINDS]
            if misplaced:
                raise GraphValidationError(f"Head-only blocks in a conv module: {misplaced}")

    def to_json(self) -> Dict:
        return {"blocks": [b.to_json() for b in self.blocks], "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, data: Mapping) -> "GraphModule":
        try:
            blocks = tuple(OpBlock.from_json(b) for b in data["blocks"])
            edges = tuple((int(u), int(v)) for u, v in data["edges"])
        except (KeyError, TypeError, ValueError) as e:
            raise GraphValidationError(f"Malformed module: {e}") from e
        return cls(blocks, edges)

    @classmethod
    def sequential(cls, blocks: Sequence[OpBlock]) -> "GraphModule":
        """Chain input -> blocks -> output"""
        chain = (OpBlock("input"),) + tuple(blocks) + (OpBlock("output"),)
        return cls(chain, tuple((i, i + 1) for i in range(len(chain) - 1)))


@dataclass(frozen=True)
class ComputationalGraph:
    """Serial list of modules; the body is grouped into stacks of stack_size identical modules"""
    modules: Tuple[GraphModule, ...]
    stack_size: int = 1

    def __post_init__(self):
        object.__setattr__(self, "modules", tuple(self.modules))
        self.validate()

    @property
    def body(self) -> Tuple[GraphModule, ...]:
        return self.modules[:-1]

    @property
    def head(self) -> GraphModule:
        return self.modules[-1]

    @property
    def stacks(self) -> Tuple[GraphModule, ...]:
        """One representative module per stack"""
        return self.body[::self.stack_size]

    def validate(self, space_config: Optional[Dict] = None) -> None:
        cfg = space_config or CNN_SPACE_CONFIG
        if not self.modules:
            raise GraphValidationError("A graph needs at least a head module")
        if self.stack_size < 1:
            raise GraphValidationError(f"Stack size must be positive, got {self.stack_size}")
        if len(self.body) > cfg["depth_cap"]:
            raise GraphValidationError(f"Graph has {len(self.body)} body modules, cap is {cfg['depth_cap']}")
        if len(self.body) % self.stack_size:
            raise GraphValidationError(f"{len(self.body)} body modules do not split into stacks of {self.stack_size}")
        for start in range(0, len(self.body), self.stack_size):
            chunk = self.body[start:start + self.stack_size]
            if any(m != chunk[0] for m in chunk):
                raise GraphValidationError(f"Stack starting at module {start} has non-identical modules")
        for module in self.body:
            module.validate(head=False, space_config=cfg)
        self.head.validate(head=True, space_config=cfg)

    def to_networkx(self) -> nx.DiGraph:
        """Flatten into one DAG, joining each module output to the next module input"""
        graph = nx.DiGraph()
        offset, previous_output = 0, None
        for module in self.modules:
            for i, block in enumerate(module.blocks):
                graph.add_node(offset + i, block=block, label=block.label)
            graph.add_edges_from((offset + u, offset + v) for u, v in module.edges)
            if previous_output is not None:
                graph.add_edge(previous_output, offset + module.input_index)
            previous_output = offset + module.output_index
            offset += len(module.blocks)
        return graph

    @cached_property
    def digest(self) -> str:
        return dag_hash(self.to_networkx())

    def to_json(self) -> Dict:
        return {"modules": [m.to_json() for m in self.modules], "stack_size": self.stack_size}

    @classmethod
    def from_json(cls, data: Mapping) -> "ComputationalGraph":
        if "modules" not in data:
            raise GraphValidationError("Graph JSON needs a 'modules' list")
        modules = tuple(GraphModule.from_json(m) for m in data["modules"])
        return cls(modules, int(data.get("stack_size", 1)))


def load_graph(path: str) -> ComputationalGraph:
    with open(path, "r") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise GraphValidationError(f"{path}: {e}") from e
    return ComputationalGraph.from_json(data)


def save_graph(graph: ComputationalGraph, path: str) -> None:
    with open(path, "w") as f:
        json.dump(graph.to_json(), f, indent=2)


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def dag_hash(dag: nx.DiGraph) -> str:
    """Recursive in/out-neighbourhood hashing over a labelled DAG"""
    if not nx.is_directed_acyclic_graph(dag):
        raise GraphValidationError("Cannot hash a cyclic graph")
    hashes = {n: _sha256(dag.nodes[n]["label"]) for n in dag}
    for _ in range(dag.number_of_nodes()):
        updated = {}
        for n in dag:
            ins = "".join(sorted(hashes[p] for p in dag.predecessors(n)))
            outs = "".join(sorted(hashes[s] for s in dag.successors(n)))
            updated[n] = _sha256(f"{ins}|{hashes[n]}|{outs}")
        hashes = updated
    return _sha256("".join(sorted(hashes.values())))


def graph_hash(graph: ComputationalGraph) -> str:
    """Lowercase hex SHA-256 digest, invariant under node renumbering"""
    return graph.digest


class GedCostTable:
    """Edit costs keyed on the complexity index; memoises module-pair distances"""

    def __init__(self, library: BlockLibrary, edge_cost: float = GED_CONFIG["edge_cost"],
                 exact_node_limit: int = GED_CONFIG["exact_node_limit"],
                 approx_iterations: int = GED_CONFIG["approx_iterations"]):
        self.library = library
        self.edge_cost = edge_cost
        self.exact_node_limit = exact_node_limit
        self.approx_iterations = approx_iterations
        self._module_cache: Dict[Tuple[GraphModule, GraphModule], float] = {}

    def insertion(self, block: OpBlock) -> float:
        return 1.0 + self.library.index(block) / len(self.library)

    deletion = insertion

    def substitution(self, a: OpBlock, b: OpBlock) -> float:
        return abs(self.library.index(a) - self.library.index(b)) / len(self.library)

    def module_insertion(self, module: GraphModule) -> float:
        # +1 edge for the connector joining the module into the chain
        return sum(self.insertion(b) for b in module.blocks) + self.edge_cost * (len(module.edges) + 1)

    def module_ged(self, a: GraphModule, b: GraphModule) -> float:
        if a == b:
            return 0.0
        key = (a, b)
        if key not in self._module_cache:
            value = self._compute_module_ged(a, b)
            self._module_cache[(a, b)] = value
            self._module_cache[(b, a)] = value
        return self._module_cache[key]

    def _compute_module_ged(self, a: GraphModule, b: GraphModule) -> float:
        kwargs = dict(
            node_subst_cost=lambda x, y: self.substitution(x["block"], y["block"]),
            node_del_cost=lambda x: self.deletion(x["block"]),
            node_ins_cost=lambda x: self.insertion(x["block"]),
            edge_subst_cost=lambda x, y: 0.0,
            edge_del_cost=lambda x: self.edge_cost,
            edge_ins_cost=lambda x: self.edge_cost,
        )
        ga, gb = a.to_networkx(), b.to_networkx()
        if max(len(a.blocks), len(b.blocks)) <= self.exact_node_limit:
            return float(nx.graph_edit_distance(ga, gb, **kwargs))
        best = math.inf
        for i, value in enumerate(nx.optimize_graph_edit_distance(ga, gb, **kwargs)):
            best = min(best, value)
            if i + 1 >= self.approx_iterations:
                break
        logger.debug(f"Approximate module GED {best:.4f} after {i + 1} improvements")
        return float(best)


def ged(g1: ComputationalGraph, g2: ComputationalGraph, costs: GedCostTable) -> float:
    """Depth-aligned module GEDs, head-to-head GED and insertion of unmatched tail modules"""
    body1, body2 = g1.body, g2.body
    total = sum(costs.module_ged(a, b) for a, b in zip(body1, body2))
    shorter = min(len(body1), len(body2))
    longer = body1 if len(body1) > len(body2) else body2
    total += sum(costs.module_insertion(m) for m in longer[shorter:])
    total += costs.module_ged(g1.head, g2.head)
    return total


def restack(graph: ComputationalGraph, s_new: int) -> ComputationalGraph:
    """Same module sequence viewed at a finer stack size"""
    if s_new < 1 or graph.stack_size % s_new:
        raise ParameterError(f"Stack size {s_new} does not divide {graph.stack_size}")
    return ComputationalGraph(graph.modules, s_new)


def crossover(best: ComputationalGraph, neighbor: ComputationalGraph, s_new: int,
              max_children: Optional[int] = None, seed: int = 0) -> List[ComputationalGraph]:
    """
    Children at stack size s_new drawn from per-depth unions of the parents' stacks.

    Each parent stack of size s becomes s / s_new slots that choose independently from the local
    space at that depth. Above max_children the product is sampled with a seeded generator.
    """
    s = best.stack_size
    if neighbor.stack_size != s:
        raise ParameterError(f"Parents have stack sizes {s} and {neighbor.stack_size}")
    if s_new < 1 or s % s_new:
        raise ParameterError(f"Stack size {s_new} does not divide {s}")
    repeats = s // s_new

    local_spaces: List[List[GraphModule]] = []
    for depth in range(max(len(best.stacks), len(neighbor.stacks))):
        options: List[GraphModule] = []
        for parent in (best, neighbor):
            if depth < len(parent.stacks) and parent.stacks[depth] not in options:
                options.append(parent.stacks[depth])
        local_spaces.append(options)
    heads = list(dict.fromkeys([best.head, neighbor.head]))
    slots = [opts for opts in local_spaces for _ in range(repeats)] + [heads]

    total = math.prod(len(opts) for opts in slots)
    if max_children is None or total <= max_children:
        combos: Iterable[Tuple[GraphModule, ...]] = itertools.product(*slots)
    else:
        rng = np.random.default_rng(seed)
        picked = dict.fromkeys(tuple(opts[rng.integers(len(opts))] for opts in slots) for _ in range(max_children))
        combos = picked.keys()

    children = []
    for combo in combos:
        *body_slots, head = combo
        modules = tuple(m for m in body_slots for _ in range(s_new)) + (head,)
        children.append(ComputationalGraph(modules, s_new))
    return list(dict.fromkeys(children))


def biased_overlap_fraction(q: ComputationalGraph, n: ComputationalGraph) -> float:
    """Leading modules shared with n, counted from the input until the first mismatch"""
    count = 0
    for a, b in zip(q.modules, n.modules):
        if a != b:
            break
        count += 1
    return count / len(q.modules)


class Neighbor(NamedTuple):
    graph: ComputationalGraph
    digest: str
    distance: float
    overlap: float


class NeighborList(NamedTuple):
    neighbors: List[Neighbor]
    truncated: bool  # pool held fewer than k graphs


def neighbors(q: ComputationalGraph, pool: Iterable[ComputationalGraph], embeddings: Mapping[str, Sequence[float]],
              k: int, for_transfer: bool = False) -> NeighborList:
    """k nearest pool graphs in embedding space; for_transfer re-ranks by (overlap desc, distance asc)"""
    try:
        anchor = np.asarray(embeddings[q.digest], dtype=float)
    except KeyError:
        raise UnknownDigestError(q.digest) from None
    rows = []
    for graph in pool:
        if graph.digest not in embeddings:
            raise UnknownDigestError(graph.digest)
        distance = float(np.linalg.norm(np.asarray(embeddings[graph.digest], dtype=float) - anchor))
        rows.append(Neighbor(graph, graph.digest, distance, biased_overlap_fraction(q, graph)))
    rows.sort(key=lambda r: (r.distance, r.digest))
    truncated = len(rows) < k
    nearest = rows[:k]
    if for_transfer:
        nearest = rank_for_transfer(nearest)
    return NeighborList(nearest, truncated)


def rank_for_transfer(candidates: Sequence[Neighbor]) -> List[Neighbor]:
    return sorted(candidates, key=lambda r: (-r.overlap, r.distance, r.digest))


def enumerate_graphs(modules: Sequence[GraphModule], heads: Sequence[GraphModule], stack_size: int,
                     max_stacks: int, min_stacks: int = 1) -> Iterator[ComputationalGraph]:
    for n_stacks in range(min_stacks, max_stacks + 1):
        for combo in itertools.product(modules, repeat=n_stacks):
            body = tuple(m for m in combo for _ in range(stack_size))
            for head in heads:
                yield ComputationalGraph(body + (head,), stack_size)


def random_module(rng: np.random.Generator, library: BlockLibrary,
                  space_config: Optional[Dict] = None) -> GraphModule:
    """Valid conv module: a chain through random body blocks plus random skip edges"""
    cfg = space_config or CNN_SPACE_CONFIG
    candidates = library.body_blocks()
    n_ops = int(rng.integers(1, cfg["max_module_vertices"] - 1))
    blocks = [OpBlock("input")] + [candidates[int(rng.integers(len(candidates)))] for _ in range(n_ops)] + [OpBlock("output")]
    edges = {(i, i + 1) for i in range(len(blocks) - 1)}
    skips = [(u, v) for u in range(len(blocks)) for v in range(u + 2, len(blocks))]
    for u, v in skips:
        if len(edges) >= cfg["max_module_edges"]:
            break
        if rng.random() < 0.3:
            edges.add((u, v))
    return GraphModule(tuple(blocks), tuple(edges))


def random_head(rng: np.random.Generator, space_config: Optional[Dict] = None) -> GraphModule:
    cfg = space_config or CNN_SPACE_CONFIG
    reducer = OpBlock("global-avg-pool") if rng.random() < 0.5 else OpBlock("flatten")
    hidden = OpBlock.make("dense", "relu", units=int(rng.choice(cfg["dense_units"])))
    blocks = [reducer, hidden]
    if rng.random() < 0.5:
        blocks.append(OpBlock.make("dropout", probability=int(rng.choice(cfg["dropout_percents"]))))
    blocks.append(OpBlock.make("dense", units=cfg["num_classes"]))
    return GraphModule.sequential(blocks)


def graph_descriptor(graph: ComputationalGraph, space_config: Optional[Dict] = None) -> np.ndarray:
    """Training-free summary in [0, 1]^6: depth, op cost, width, large-kernel share, skip density, head width"""
    cfg = space_config or CNN_SPACE_CONFIG
    ops = [b for m in graph.body for b in m.blocks if b.kind not in ("input", "output")]
    convs = [b for b in ops if b.kind in ("conv", "dwconv", "conv3d", "transposed-conv")]
    skips = sum(len(m.edges) - (len(m.blocks) - 1) for m in graph.body)
    dense_units = [b.param("units", 0) for b in graph.head.blocks if b.kind == "dense"]
    features = [
        len(graph.body) / cfg["depth_cap"],
        float(np.mean([math.log2(1.0 + block_complexity(b)) for b in ops])) / 20.0 if ops else 0.0,
        float(np.mean([b.param("channels", REFERENCE_WIDTH) for b in convs])) / max(cfg["conv_channels"]) if convs else 0.0,
        sum(1 for b in convs if b.param("kernel", 1) >= 3) / len(convs) if convs else 0.0,
        skips / (4.0 * len(graph.body)) if graph.body else 0.0,
        math.log2(1 + max(dense_units, default=0)) / 11.0,
    ]
    return np.clip(np.asarray(features, dtype=float), 0.0, 1.0)


class CnnSpace:
    """Vocabulary, level sets and cost table for one CNN design space"""

    def __init__(self, space_config: Optional[Dict] = None, seed: int = 0):
        self.logger = logging.getLogger(__name__)
        self.config = dict(space_config or CNN_SPACE_CONFIG)
        self.seed = seed
        self.library = BlockLibrary.from_config(self.config)
        self.costs = GedCostTable(self.library)
        rng = np.random.default_rng(seed)
        self.module_vocabulary = self._unique(lambda: random_module(rng, self.library, self.config),
                                              self.config["module_vocabulary"])
        self.head_vocabulary = self._unique(lambda: random_head(rng, self.config), self.config["head_vocabulary"])
        self.logger.info(f"🧱 CNN space: {len(self.library)} blocks, {len(self.module_vocabulary)} modules, "
                         f"{len(self.head_vocabulary)} heads")

    @staticmethod
    def _unique(draw, count: int, attempts: int = 1000) -> List[GraphModule]:
        found: List[GraphModule] = []
        for _ in range(attempts):
            if len(found) >= count:
                break
            module = draw()
            if module not in found:
                found.append(module)
        return found

    def stack_size(self, level: int) -> int:
        schedule = self.config["stack_schedule"]
        if not 1 <= level <= len(schedule):
            raise ParameterError(f"Level {level} outside schedule {schedule}")
        return schedule[level - 1]

    def level_size(self, level: int, stack_size: Optional[int] = None) -> int:
        s = stack_size or self.stack_size(level)
        m, h = len(self.module_vocabulary), len(self.head_vocabulary)
        return h * sum(m ** k for k in range(1, self.config["depth_cap"] // s + 1))

    def level_graphs(self, level: int, seed: Optional[int] = None,
                     stack_size: Optional[int] = None) -> List[ComputationalGraph]:
        """
        All graphs of a level when the count fits level_size_cap, else a seeded sample of that size.

        stack_size overrides the configured schedule without touching self.config.
        """
        s = stack_size or self.stack_size(level)
        max_stacks = self.config["depth_cap"] // s
        cap = self.config["level_size_cap"]
        if self.level_size(level, s) <= cap:
            return list(enumerate_graphs(self.module_vocabulary, self.head_vocabulary, s, max_stacks))
        rng = np.random.default_rng(self.seed if seed is None else seed)
        graphs: Dict[ComputationalGraph, None] = {}
        while len(graphs) < cap:
            graphs[self.sample_graph(rng, s)] = None
        return list(graphs)

    def sample_graph(self, rng: np.random.Generator, stack_size: int) -> ComputationalGraph:
        n_stacks = int(rng.integers(1, self.config["depth_cap"] // stack_size + 1))
        picks = [self.module_vocabulary[int(rng.integers(len(self.module_vocabulary)))] for _ in range(n_stacks)]
        head = self.head_vocabulary[int(rng.integers(len(self.head_vocabulary)))]
        return ComputationalGraph(tuple(m for m in picks for _ in range(stack_size)) + (head,), stack_size)
