"""Deterministic discrete-event simulation of a CPU+GPU machine.

Workers compute, a single shared bus moves data items between the host and
device memory nodes, and a policy decides placement. Every run is a pure
function of its inputs and yields a fully ordered Trace.
"""
from __future__ import annotations

import heapq
import io
import statistics
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .graph import CPU, GPU, TaskGraph, topological_order, validate

HOST = "host"
DEVICE = "device"

EVENT_ORDER = {"xfer_start": 0, "xfer_end": 1, "kernel_start": 2, "kernel_end": 3}


class SimulationError(Exception):
    pass


@dataclass(frozen=True)
class MachineModel:
    cpu_workers: int = 3
    gpu_workers: int = 1

    def __post_init__(self):
        if self.cpu_workers < 0 or self.gpu_workers < 0:
            raise SimulationError("worker counts must be nonnegative")
        if self.cpu_workers + self.gpu_workers == 0:
            raise SimulationError("need at least one worker")


class Worker:
    def __init__(self, wid: int, device: str, name: str):
        self.id = wid
        self.device = device
        self.mem_node = HOST if device == CPU else DEVICE
        self.name = name
        self.free_time = 0.0
        self.busy = False


@dataclass(frozen=True)
class TraceEvent:
    time: float
    kind: str       # kernel_start | kernel_end | xfer_start | xfer_end
    subject: str    # kernel id or data item key
    resource: str   # worker name or "bus"


@dataclass
class Trace:
    events: List[TraceEvent]
    makespan: float
    transfer_count: int
    transfer_bytes: int
    busy_ms: Dict[str, float]
    kernels_per_device: Dict[str, int]
    policy: str = ""


def simulate(graph: TaskGraph, policy, machine: Optional[MachineModel] = None,
             seed: int = 0) -> Trace:
    """Run the graph to completion under the policy; deterministic throughout."""
    machine = machine or MachineModel()
    problems = validate(graph)
    if problems:
        raise SimulationError(f"invalid graph: {problems[0]}")
    for nid in graph.kernel_ids():
        n = graph.nodes[nid]
        if n.weight_cpu == 0 and n.weight_gpu == 0:
            raise SimulationError(f"kernel {nid} has no weights; attach a cost model")

    workers: List[Worker] = []
    for i in range(machine.cpu_workers):
        workers.append(Worker(len(workers), CPU, f"cpu{i}"))
    for i in range(machine.gpu_workers):
        workers.append(Worker(len(workers), GPU, f"gpu{i}"))

    def item_key(edge) -> str:
        if edge.src == graph.root:
            return f"d{edge.src}.{edge.dst}"
        return f"d{edge.src}"

    # arrival time of each item per memory node; present iff a copy exists
    # or is in flight (awaiting arrival)
    arrivals: Dict[str, Dict[str, float]] = {}

    class _SimState:
        pass

    sim = _SimState()
    sim.graph = graph
    sim.workers = workers
    sim.bus_free = 0.0
    sim.item_key = item_key

    def resident(item: str, node: str, t: float) -> bool:
        # an in-flight copy counts: it is awaited, never re-sent
        return node in arrivals.get(item, ())

    sim.resident = resident

    events: List[TraceEvent] = []
    transfer_count = 0
    transfer_bytes = 0
    busy_ms = {CPU: 0.0, GPU: 0.0}
    kernels_per_device = {CPU: 0, GPU: 0}

    pending = {nid: len(graph.predecessors(nid)) for nid in graph.nodes}
    finished = set()

    heap: List[Tuple[float, int, int, int]] = []  # (time, order, kernel, worker)
    seq = 0

    def mark_done(nid: int, t: float, worker: Optional[Worker]) -> List[int]:
        finished.add(nid)
        node = HOST if worker is None else worker.mem_node
        for e in sorted(graph.edges.values(), key=lambda e: (e.src, e.dst)):
            if e.src == nid:
                arrivals.setdefault(item_key(e), {})[node] = t
        newly = []
        for s in graph.successors(nid):
            pending[s] -= 1
            if pending[s] == 0:
                newly.append(s)
        return sorted(newly)

    def start_kernel(kid: int, worker: Worker, t: float) -> None:
        nonlocal transfer_count, transfer_bytes, seq
        node = graph.nodes[kid]
        avail = t
        for e in graph.in_edges(kid):
            item = item_key(e)
            spots = arrivals.setdefault(item, {})
            if worker.mem_node in spots:
                avail = max(avail, spots[worker.mem_node])
                continue
            start = max(sim.bus_free, t)
            end = start + e.weight_xfer
            sim.bus_free = end
            spots[worker.mem_node] = end
            events.append(TraceEvent(start, "xfer_start", item, "bus"))
            events.append(TraceEvent(end, "xfer_end", item, "bus"))
            transfer_count += 1
            transfer_bytes += e.bytes
            avail = max(avail, end)
        dur = node.weight_cpu if worker.device == CPU else node.weight_gpu
        start = max(t, avail)
        end = start + dur
        events.append(TraceEvent(start, "kernel_start", str(kid), worker.name))
        events.append(TraceEvent(end, "kernel_end", str(kid), worker.name))
        busy_ms[worker.device] += dur
        kernels_per_device[worker.device] += 1
        worker.free_time = end
        worker.busy = True
        heapq.heappush(heap, (end, seq, kid, worker.id))
        seq += 1

    def dispatch(t: float) -> None:
        assigned = True
        while assigned:
            assigned = False
            for worker in workers:
                if worker.busy or worker.free_time > t:
                    continue
                kid = policy.next_for_worker(worker, t, sim)
                if kid is not None:
                    start_kernel(kid, worker, t)
                    assigned = True

    # the root is the empty kernel: done instantly at t=0, data on the host
    for kid in mark_done(graph.root, 0.0, None):
        policy.on_ready(kid, 0.0, sim)
    dispatch(0.0)

    while heap:
        t = heap[0][0]
        batch: List[Tuple[int, int]] = []
        while heap and heap[0][0] == t:
            _, _, kid, wid = heapq.heappop(heap)
            batch.append((kid, wid))
        ready: List[int] = []
        for kid, wid in sorted(batch):
            workers[wid].busy = False
            ready.extend(mark_done(kid, t, workers[wid]))
        for kid in sorted(ready):
            policy.on_ready(kid, t, sim)
        dispatch(t)

    if len(finished) != len(graph.nodes):
        raise AssertionError("simulation deadlocked on a valid DAG (bug)")

    events.sort(key=lambda e: (e.time, EVENT_ORDER[e.kind], e.subject, e.resource))
    makespan = max((e.time for e in events if e.kind == "kernel_end"), default=0.0)
    return Trace(events, makespan, transfer_count, transfer_bytes,
                 busy_ms, kernels_per_device,
                 policy=getattr(policy, "name", ""))


def metrics(trace: Trace) -> Dict[str, object]:
    """Summary recomputed from the event list (bytes come from the trace)."""
    starts: Dict[Tuple[str, str], float] = {}
    busy = {CPU: 0.0, GPU: 0.0}
    counts = {CPU: 0, GPU: 0}
    n_xfers = 0
    makespan = 0.0
    for e in trace.events:
        if e.kind == "kernel_start":
            starts[(e.subject, e.resource)] = e.time
        elif e.kind == "kernel_end":
            key = (e.subject, e.resource)
            if key not in starts:
                raise SimulationError(f"kernel_end without start for {key}")
            device = CPU if e.resource.startswith("cpu") else GPU
            busy[device] += e.time - starts.pop(key)
            counts[device] += 1
            makespan = max(makespan, e.time)
        elif e.kind == "xfer_end":
            n_xfers += 1
    if starts:
        raise SimulationError(f"kernel_start without end for {sorted(starts)}")
    return {
        "makespan": makespan,
        "transfer_count": n_xfers,
        "transfer_bytes": trace.transfer_bytes,
        "busy_ms": busy,
        "busy_fraction": {d: (busy[d] / makespan if makespan else 0.0) for d in busy},
        "kernels_per_device": counts,
    }


def critical_path_lower_bound(graph: TaskGraph) -> float:
    """Longest path using each kernel's faster device time, zero transfer cost."""
    best: Dict[int, float] = {}
    for nid in topological_order(graph):
        n = graph.nodes[nid]
        dur = min(n.weight_cpu, n.weight_gpu)
        reach = max((best[p] for p in graph.predecessors(nid)), default=0.0)
        best[nid] = reach + dur
    return max(best.values(), default=0.0)


def trace_csv(trace: Trace) -> str:
    out = io.StringIO()
    out.write("time,kind,subject,resource\n")
    for e in trace.events:
        out.write(f"{e.time!r},{e.kind},{e.subject},{e.resource}\n")
    return out.getvalue()


@dataclass
class CompareRow:
    policy: str
    mean_makespan: float
    sd_makespan: float
    mean_transfers: float
    sd_transfers: float
    mean_transfer_bytes: float
    size: Optional[int] = None


def compare(policy_names: Sequence[str],
            graph_factory: Callable[[int], TaskGraph],
            machine: Optional[MachineModel] = None,
            iterations: int = 1, seed: int = 0,
            policy_builder: Optional[Callable[[str, TaskGraph], object]] = None
            ) -> List[CompareRow]:
    """Mean/sd of makespan and transfer count per policy over iterations.

    Iteration i simulates graph_factory(seed + i); the simulation itself is
    deterministic, so variation comes only from the generated graphs.
    """
    if iterations < 1:
        raise SimulationError("iterations must be >= 1")
    if policy_builder is None:
        from .policies import build_policy
        policy_builder = lambda name, g: build_policy(name, g)
    machine = machine or MachineModel()
    rows: List[CompareRow] = []
    for name in policy_names:
        makespans: List[float] = []
        transfers: List[float] = []
        t_bytes: List[float] = []
        for i in range(iterations):
            g = graph_factory(seed + i)
            policy = policy_builder(name, g)
            trace = simulate(g, policy, machine, seed=seed + i)
            makespans.append(trace.makespan)
            transfers.append(float(trace.transfer_count))
            t_bytes.append(float(trace.transfer_bytes))
        rows.append(CompareRow(
            policy=name,
            mean_makespan=statistics.fmean(makespans),
            sd_makespan=statistics.stdev(makespans) if len(makespans) > 1 else 0.0,
            mean_transfers=statistics.fmean(transfers),
            sd_transfers=statistics.stdev(transfers) if len(transfers) > 1 else 0.0,
            mean_transfer_bytes=statistics.fmean(t_bytes),
        ))
    return rows


def compare_csv(rows: Sequence[CompareRow]) -> str:
    out = io.StringIO()
    out.write("policy,size,mean_makespan,sd_makespan,mean_transfers,sd_transfers\n")
    for r in sorted(rows, key=lambda r: (r.size if r.size is not None else -1, r.policy)):
        size = "" if r.size is None else str(r.size)
        out.write(f"{r.policy},{size},{r.mean_makespan!r},{r.sd_makespan!r},"
                  f"{r.mean_transfers!r},{r.sd_transfers!r}\n")
    return out.getvalue()


def annotated_dot(graph: TaskGraph, trace: Trace) -> str:
    """DOT with per-kernel device and start/end times from a finished trace."""
    from .graphio import emit_dot
    info: Dict[int, Dict[str, str]] = {}
    for e in trace.events:
        if e.kind in ("kernel_start", "kernel_end"):
            kid = int(e.subject)
            d = info.setdefault(kid, {})
            d["device"] = CPU if e.resource.startswith("cpu") else GPU
            d["start" if e.kind == "kernel_start" else "end"] = repr(e.time)
    node_extra = {kid: [("device", d["device"]), ("start", d["start"]), ("end", d["end"])]
                  for kid, d in info.items()}
    return emit_dot(graph, node_extra=node_extra)
