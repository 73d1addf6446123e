"""Weighted task-graph core: kernel nodes, data edges, validation and generation."""
from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional, Tuple

SOURCE_KIND = "SOURCE"
ROOT_ID = 0

CPU = "CPU"
GPU = "GPU"


class GraphError(Exception):
    pass


class CycleError(GraphError):
    def __init__(self, member: int):
        super().__init__(f"graph contains a cycle through node {member}")
        self.member = member


class InfeasibleGraphError(GraphError):
    pass


@dataclass(frozen=True)
class KernelNode:
    id: int
    kind: str
    size: int
    weight_cpu: float = 0.0
    weight_gpu: float = 0.0
    # extra DOT attributes preserved verbatim on round-trip
    attrs: Tuple[Tuple[str, str], ...] = ()


@dataclass(frozen=True)
class DataEdge:
    src: int
    dst: int
    bytes: int = 0
    weight_xfer: float = 0.0
    attrs: Tuple[Tuple[str, str], ...] = ()


class TaskGraph:
    """Immutable weighted DAG of kernels. Node 0 is the zero-weight root."""

    def __init__(self, nodes: Iterable[KernelNode], edges: Iterable[DataEdge],
                 root: int = ROOT_ID, name: str = "task"):
        nodes = list(nodes)
        edges = list(edges)
        self.name = name
        self.root = root
        self.nodes: Dict[int, KernelNode] = {}
        self._duplicate_ids: List[int] = []
        for n in nodes:
            if n.id in self.nodes:
                self._duplicate_ids.append(n.id)
            self.nodes[n.id] = n
        self.edges: Dict[Tuple[int, int], DataEdge] = {}
        self._duplicate_edges: List[Tuple[int, int]] = []
        for e in edges:
            key = (e.src, e.dst)
            if key in self.edges:
                self._duplicate_edges.append(key)
            self.edges[key] = e
        self._succ: Dict[int, List[int]] = {i: [] for i in self.nodes}
        self._pred: Dict[int, List[int]] = {i: [] for i in self.nodes}
        for (u, v) in self.edges:
            if u in self._succ and v in self._pred:
                self._succ[u].append(v)
                self._pred[v].append(u)
        for adj in (self._succ, self._pred):
            for lst in adj.values():
                lst.sort()

    def successors(self, nid: int) -> List[int]:
        return self._succ.get(nid, [])

    def predecessors(self, nid: int) -> List[int]:
        return self._pred.get(nid, [])

    def in_edges(self, nid: int) -> List[DataEdge]:
        return [self.edges[(u, nid)] for u in self.predecessors(nid)]

    def kernel_ids(self) -> List[int]:
        """Non-root kernel ids, ascending."""
        return sorted(i for i in self.nodes if i != self.root)

    def n_kernels(self) -> int:
        return len(self.nodes) - (1 if self.root in self.nodes else 0)

    def inter_kernel_edges(self) -> List[DataEdge]:
        return [e for (u, v), e in sorted(self.edges.items()) if u != self.root]

    def replace_nodes(self, nodes: Iterable[KernelNode],
                      edges: Optional[Iterable[DataEdge]] = None) -> "TaskGraph":
        return TaskGraph(nodes, edges if edges is not None else self.edges.values(),
                         root=self.root, name=self.name)

    def structurally_equal(self, other: "TaskGraph") -> bool:
        return (self.root == other.root
                and self.nodes == other.nodes
                and self.edges == other.edges)


def validate(graph: TaskGraph) -> List[str]:
    """Check all graph invariants. Returns the list of violations (empty = valid)."""
    problems: List[str] = []
    for nid in graph._duplicate_ids:
        problems.append(f"duplicate node id {nid}")
    for (u, v) in graph._duplicate_edges:
        problems.append(f"duplicate edge ({u}, {v})")
    if graph.root not in graph.nodes:
        problems.append(f"root node {graph.root} missing")
    else:
        r = graph.nodes[graph.root]
        if r.kind != SOURCE_KIND:
            problems.append(f"root node {graph.root} is not kind {SOURCE_KIND}")
    for n in graph.nodes.values():
        if n.weight_cpu < 0 or n.weight_gpu < 0:
            problems.append(f"node {n.id} has negative weight")
        if n.kind == SOURCE_KIND and (n.weight_cpu != 0 or n.weight_gpu != 0):
            problems.append(f"{SOURCE_KIND} node {n.id} must have zero weights")
    for (u, v), e in sorted(graph.edges.items()):
        if u == v:
            problems.append(f"self-loop on node {u}")
        if u not in graph.nodes:
            problems.append(f"edge ({u}, {v}) references unknown node {u}")
        if v not in graph.nodes:
            problems.append(f"edge ({u}, {v}) references unknown node {v}")
        if e.weight_xfer < 0:
            problems.append(f"edge ({u}, {v}) has negative transfer weight")
        if e.bytes < 0:
            problems.append(f"edge ({u}, {v}) has negative byte count")
    try:
        topological_order(graph)
    except CycleError as exc:
        problems.append(f"cycle through node {exc.member}")
    if graph.root in graph.nodes:
        for nid in graph.nodes:
            if nid != graph.root and not graph.predecessors(nid):
                problems.append(f"initial kernel {nid} has no edge from root")
    return problems


def topological_order(graph: TaskGraph) -> List[int]:
    """Kahn's algorithm with an id min-heap, so ties break by ascending id."""
    indeg = {nid: 0 for nid in graph.nodes}
    for (u, v) in graph.edges:
        if u != v and u in indeg and v in indeg:
            indeg[v] += 1
    heap = [nid for nid, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order: List[int] = []
    while heap:
        nid = heapq.heappop(heap)
        order.append(nid)
        for w in graph.successors(nid):
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(heap, w)
    if len(order) != len(graph.nodes):
        stuck = min(nid for nid, d in indeg.items() if d > 0)
        raise CycleError(stuck)
    return order


def _layer_sizes(n: int, layers: int) -> List[int]:
    base, rem = divmod(n, layers)
    return [base + (1 if i < rem else 0) for i in range(layers)]


def generate_random_dag(n_kernels: int, n_edges: int, kind: str, size: int,
                        seed: int, layers: Optional[int] = None,
                        count_root: bool = False) -> TaskGraph:
    """Layered random DAG of two-input kernels.

    Kernels are spread over layers (default ceil(sqrt(n)) layers) and each
    kernel draws up to two inputs from strictly earlier layers. Kernels with
    no kernel predecessor receive their input from the root instead. When
    n_edges exceeds what two-input kernels can absorb, the surplus lands on
    last-layer kernels, which consume more than two inputs but stay sinks.

    By default n_kernels counts real kernels and n_edges counts inter-kernel
    dependencies; root and root edges come on top. With count_root=True both
    counts include the root and its edges.
    """
    rng = random.Random(seed)
    payload = size * size * 4  # one size x size matrix of 4-byte elements

    if count_root:
        n_real = n_kernels - 1
    else:
        n_real = n_kernels
    if n_real < 1:
        raise InfeasibleGraphError("need at least one kernel")

    n_layers = layers if layers else max(1, math.ceil(math.sqrt(n_real)))
    n_layers = min(n_layers, n_real)
    sizes = _layer_sizes(n_real, n_layers)

    layer_of: Dict[int, int] = {}
    layer_members: List[List[int]] = []
    nid = 1
    for li, sz in enumerate(sizes):
        members = list(range(nid, nid + sz))
        nid += sz
        layer_members.append(members)
        for k in members:
            layer_of[k] = li

    earlier: List[List[int]] = []
    acc: List[int] = []
    for members in layer_members:
        earlier.append(list(acc))
        acc.extend(members)

    # input slots: each kernel past layer 0 can take up to 2 distinct
    # earlier-layer predecessors
    slot_kernels: List[int] = []
    for li in range(1, n_layers):
        for k in layer_members[li]:
            slot_kernels.extend([k] * min(2, len(earlier[li])))
    base_capacity = len(slot_kernels)

    sink_pairs: List[Tuple[int, int]] = []
    for k in layer_members[-1]:
        for u in earlier[-1]:
            sink_pairs.append((u, k))

    if count_root:
        # root edges go to every layer-0 kernel plus any kernel left inputless;
        # reserve one root edge per layer-0 kernel and give every later kernel
        # at least one kernel input so the total is exact
        inter_target = n_edges - sizes[0]
        min_inter = n_real - sizes[0]
        if inter_target < min_inter:
            raise InfeasibleGraphError(
                f"{n_edges} total edges cannot cover {n_real} kernels")
    else:
        inter_target = n_edges
        min_inter = 0

    overflow_capacity = sum(max(0, len(earlier[-1]) - 2)
                            for _ in layer_members[-1]) if n_layers > 1 else 0
    if inter_target > base_capacity + overflow_capacity:
        raise InfeasibleGraphError(
            f"{n_edges} edges infeasible for {n_real} two-input kernels")

    in_from: Dict[int, List[int]] = {k: [] for k in layer_of}
    if inter_target >= base_capacity:
        chosen_counts = {k: slot_kernels.count(k) for k in layer_of}
        extra = inter_target - base_capacity
    else:
        picks = slot_kernels[:]
        if min_inter:
            # guarantee one input per non-initial kernel first
            mandatory = sorted(set(picks))
            pool = picks[:]
            for k in mandatory:
                pool.remove(k)
            picks = mandatory + rng.sample(pool, inter_target - len(mandatory))
        else:
            picks = rng.sample(picks, inter_target)
        chosen_counts = {k: 0 for k in layer_of}
        for k in picks:
            chosen_counts[k] += 1
        extra = 0

    edges: List[DataEdge] = []
    used: set = set()
    for li in range(1, n_layers):
        for k in layer_members[li]:
            c = chosen_counts.get(k, 0)
            if not c:
                continue
            preds = rng.sample(earlier[li], c)
            for u in preds:
                edges.append(DataEdge(u, k, bytes=payload))
                used.add((u, k))

    if extra:
        candidates = [p for p in sink_pairs if p not in used]
        if extra > len(candidates):
            raise InfeasibleGraphError(
                f"{n_edges} edges infeasible for {n_real} two-input kernels")
        for (u, k) in rng.sample(candidates, extra):
            edges.append(DataEdge(u, k, bytes=payload))
            used.add((u, k))

    # root feeds every kernel that ended up without a predecessor
    for k in sorted(layer_of):
        if not any(dst == k for (_, dst) in used):
            edges.append(DataEdge(ROOT_ID, k, bytes=payload))

    nodes = [KernelNode(ROOT_ID, SOURCE_KIND, 0)]
    nodes += [KernelNode(k, kind, size) for k in sorted(layer_of)]
    return TaskGraph(nodes, edges)


def attach_weights(graph: TaskGraph, model) -> TaskGraph:
    """Return a copy of the graph with node and edge weights from a cost model."""
    nodes = []
    for n in graph.nodes.values():
        if n.id == graph.root or n.kind == SOURCE_KIND:
            nodes.append(replace(n, weight_cpu=0.0, weight_gpu=0.0))
            continue
        try:
            wc = model.kernel_time(n.kind, n.size, CPU)
            wg = model.kernel_time(n.kind, n.size, GPU)
        except Exception as exc:
            raise GraphError(f"no cost entry for kernel {n.id} "
                             f"({n.kind}, {n.size}): {exc}") from exc
        nodes.append(replace(n, weight_cpu=wc, weight_gpu=wg))
    edges = [replace(e, weight_xfer=model.transfer_time(e.bytes))
             for e in graph.edges.values()]
    return graph.replace_nodes(nodes, edges)


def total_weights(graph: TaskGraph) -> Tuple[float, float, float]:
    """(sum weight_cpu, sum weight_gpu, sum weight_xfer) over the whole graph."""
    wc = math.fsum(n.weight_cpu for n in graph.nodes.values())
    wg = math.fsum(n.weight_gpu for n in graph.nodes.values())
    wx = math.fsum(e.weight_xfer for e in graph.edges.values())
    return wc, wg, wx
