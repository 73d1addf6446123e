"""Dispatch policies: eager FIFO, data-aware (dmda) and graph-partition pinning.

Each policy is a deterministic state machine driven by the simulator's event
loop through two hooks: on_ready(kernel, time, sim) when a kernel's inputs
are all produced, and next_for_worker(worker, time, sim) when a worker idles.
"""
from __future__ import annotations

from collections import deque
from typing import Dict, Optional

from .costs import PartitionTargets, workload_ratio
from .graph import CPU, GPU, TaskGraph
from .partition import Partition, PartitionConfig, partition_heuristic

POLICY_NAMES = ("eager", "dmda", "gp")


class EagerPolicy:
    """One shared FIFO; any idle worker takes the head, data location ignored."""

    name = "eager"

    def __init__(self):
        self.queue = deque()

    def on_ready(self, kid: int, t: float, sim) -> None:
        self.queue.append(kid)

    def next_for_worker(self, worker, t: float, sim) -> Optional[int]:
        if self.queue:
            return self.queue.popleft()
        return None


class DmdaPolicy:
    """Pick the worker minimizing estimated completion, transfers included.

    Completion estimate: max(worker backlog, input availability) + kernel
    time on that worker's device, where inputs resident on the other memory
    node serialize on the bus behind its current backlog. Assignment happens
    when the kernel becomes ready; each worker drains its own FIFO.
    """

    name = "dmda"

    def __init__(self):
        self.queues: Dict[int, deque] = {}
        self.est_free: Dict[int, float] = {}
        self.est_bus = 0.0   # backlog from transfers promised but not yet booked

    def _estimate(self, kid: int, worker, t: float, sim):
        node = sim.graph.nodes[kid]
        dur = node.weight_cpu if worker.device == CPU else node.weight_gpu
        xfer = 0.0
        for e in sim.graph.in_edges(kid):
            if not sim.resident(sim.item_key(e), worker.mem_node, t):
                xfer += e.weight_xfer
        avail = t if xfer == 0 else max(self.est_bus, sim.bus_free, t) + xfer
        free = max(self.est_free.get(worker.id, 0.0), worker.free_time, t)
        return max(free, avail) + dur, avail, xfer

    def on_ready(self, kid: int, t: float, sim) -> None:
        best = None
        for worker in sim.workers:
            est, avail, xfer = self._estimate(kid, worker, t, sim)
            if best is None or est < best[0]:
                best = (est, worker, avail, xfer)
        est, worker, avail, xfer = best
        self.queues.setdefault(worker.id, deque()).append(kid)
        self.est_free[worker.id] = est
        if xfer:
            self.est_bus = avail

    def next_for_worker(self, worker, t: float, sim) -> Optional[int]:
        q = self.queues.get(worker.id)
        if q:
            return q.popleft()
        return None


class GraphPartitionPolicy:
    """Offline pin map; kernels wait for a worker of their pinned group."""

    name = "gp"

    def __init__(self, pin_map: Dict[int, str], partition: Optional[Partition] = None):
        self.pin_map = pin_map
        self.partition = partition
        self.queues = {CPU: deque(), GPU: deque()}

    def on_ready(self, kid: int, t: float, sim) -> None:
        self.queues[self.pin_map[kid]].append(kid)

    def next_for_worker(self, worker, t: float, sim) -> Optional[int]:
        q = self.queues[worker.device]
        if q:
            return q.popleft()
        return None


def gp_build(graph: TaskGraph, targets: Optional[PartitionTargets] = None,
             config: Optional[PartitionConfig] = None) -> GraphPartitionPolicy:
    """The whole gp scheduling decision, made once: ratio, partition, pin map."""
    if targets is None:
        targets = workload_ratio(graph)
    partition = partition_heuristic(graph, targets, config or PartitionConfig())
    return GraphPartitionPolicy(dict(partition.assignment), partition)


def build_policy(name: str, graph: TaskGraph,
                 targets: Optional[PartitionTargets] = None,
                 config: Optional[PartitionConfig] = None):
    if name == "eager":
        return EagerPolicy()
    if name == "dmda":
        return DmdaPolicy()
    if name == "gp":
        return gp_build(graph, targets, config)
    raise ValueError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")
