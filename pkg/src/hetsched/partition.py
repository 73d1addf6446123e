"""Balanced 2-way min-edge-cut partitioning of the weighted kernel graph.

The heuristic is randomized greedy initialization plus Fiduccia-Mattheyses
style refinement with multi-restart; a brute-force enumerator serves as the
optimality oracle for small graphs.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .costs import PartitionTargets
from .graph import CPU, GPU, TaskGraph


class PartitionError(Exception):
    pass


@dataclass
class PartitionConfig:
    node_weight_source: str = GPU   # which per-kernel time balances the sides
    imbalance_tolerance: float = 0.03
    restarts: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.node_weight_source not in (CPU, GPU):
            raise PartitionError(f"bad node weight source {self.node_weight_source!r}")
        if not (0.0 <= self.imbalance_tolerance < 1.0):
            raise PartitionError("imbalance tolerance must be in [0, 1)")
        if self.restarts < 1:
            raise PartitionError("restarts must be >= 1")


@dataclass
class Partition:
    assignment: Dict[int, str]          # kernel id -> CPU | GPU
    edge_cut: float
    balance_error: float
    targets: PartitionTargets
    node_weight_source: str = GPU
    feasible: bool = True
    side_weights: Tuple[float, float] = (0.0, 0.0)


def _node_weight(node, source: str) -> float:
    return node.weight_gpu if source == GPU else node.weight_cpu


def _cut_edges(graph: TaskGraph, assignment: Dict[int, str]):
    for (u, v), e in sorted(graph.edges.items()):
        if u == graph.root or v == graph.root:
            continue
        if assignment[u] != assignment[v]:
            yield e


def evaluate(graph: TaskGraph, partition: Partition) -> Tuple[float, float, Tuple[float, float]]:
    """Recompute edge cut, balance error and side weights from scratch."""
    ids = graph.kernel_ids()
    if set(partition.assignment) != set(ids):
        raise PartitionError("partition does not cover exactly the non-root kernels")
    cut = sum(e.weight_xfer for e in _cut_edges(graph, partition.assignment))
    source = partition.node_weight_source
    cpu_w = sum(_node_weight(graph.nodes[i], source) for i in ids
                if partition.assignment[i] == CPU)
    total = sum(_node_weight(graph.nodes[i], source) for i in ids)
    if total == 0:
        raise PartitionError("zero total node weight; attach weights first")
    err = abs(cpu_w / total - partition.targets.r_cpu)
    return cut, err, (cpu_w, total - cpu_w)


def _finish(graph: TaskGraph, assignment: Dict[int, str], targets: PartitionTargets,
            source: str, tolerance: float) -> Partition:
    p = Partition(dict(assignment), 0.0, 0.0, targets, source)
    cut, err, sides = evaluate(graph, p)
    p.edge_cut = cut
    p.balance_error = err
    p.side_weights = sides
    p.feasible = err <= tolerance
    return p


def brute_force_partition(graph: TaskGraph, targets: PartitionTargets,
                          tolerance: float,
                          node_weight_source: str = GPU) -> Partition:
    """Exhaustive oracle: minimum edge cut over all tolerance-feasible assignments.

    If nothing meets the tolerance, returns the minimum balance-error
    assignment flagged infeasible. Ties break toward the lexicographically
    smallest assignment (CPU before GPU, nodes in ascending id order).
    """
    ids = graph.kernel_ids()
    n = len(ids)
    if n == 0:
        raise PartitionError("graph has no non-root kernels")
    if n > 20:
        raise PartitionError(f"brute force refuses {n} kernels (limit 20)")
    weights = [_node_weight(graph.nodes[i], node_weight_source) for i in ids]
    total = sum(weights)
    if total == 0:
        raise PartitionError("zero total node weight; attach weights first")
    pos = {nid: k for k, nid in enumerate(ids)}
    edges = [(pos[u], pos[v], e.weight_xfer)
             for (u, v), e in sorted(graph.edges.items())
             if u != graph.root and v != graph.root]

    best_feasible: Optional[Tuple[float, int]] = None
    best_any: Optional[Tuple[float, int]] = None
    for mask in range(1 << n):
        # bit k set (reading ids[0] as the most significant bit) means GPU,
        # so ascending mask is ascending lexicographic order
        cpu_w = 0.0
        for k in range(n):
            if not mask & (1 << (n - 1 - k)):
                cpu_w += weights[k]
        err = abs(cpu_w / total - targets.r_cpu)
        if best_any is None or err < best_any[0]:
            best_any = (err, mask)
        if err <= tolerance:
            cut = 0.0
            for (a, b, w) in edges:
                if (mask >> (n - 1 - a)) & 1 != (mask >> (n - 1 - b)) & 1:
                    cut += w
            if best_feasible is None or cut < best_feasible[0]:
                best_feasible = (cut, mask)

    mask = best_feasible[1] if best_feasible else best_any[1]
    assignment = {ids[k]: GPU if mask & (1 << (n - 1 - k)) else CPU
                  for k in range(n)}
    return _finish(graph, assignment, targets, node_weight_source, tolerance)


def fm_refine(graph: TaskGraph, partition: Partition, targets: PartitionTargets,
              config: PartitionConfig) -> Partition:
    """FM-style single-node move passes with a balance guard.

    Each pass tentatively moves every node once (best gain first, ties by id),
    keeps the best prefix seen, and repeats while the cut improves. The cut
    never increases and a within-tolerance start never leaves tolerance.
    """
    source = config.node_weight_source
    tol = config.imbalance_tolerance
    ids = graph.kernel_ids()
    weights = {i: _node_weight(graph.nodes[i], source) for i in ids}
    total = sum(weights.values())
    if total == 0:
        raise PartitionError("zero total node weight; attach weights first")

    adj: Dict[int, List[Tuple[int, float]]] = {i: [] for i in ids}
    for (u, v), e in sorted(graph.edges.items()):
        if u == graph.root or v == graph.root:
            continue
        adj[u].append((v, e.weight_xfer))
        adj[v].append((u, e.weight_xfer))

    assignment = dict(partition.assignment)

    def cut_of(a: Dict[int, str]) -> float:
        return sum(e.weight_xfer for e in _cut_edges(graph, a))

    def err_of(a: Dict[int, str]) -> float:
        cpu_w = sum(weights[i] for i in ids if a[i] == CPU)
        return abs(cpu_w / total - targets.r_cpu)

    def key(cut: float, err: float):
        return (err > tol, cut)

    best_cut, best_err = cut_of(assignment), err_of(assignment)
    improved = True
    while improved:
        improved = False
        work = dict(assignment)
        cur_cut, cur_err = best_cut, err_of(work)
        cpu_w = sum(weights[i] for i in ids if work[i] == CPU)
        locked = set()
        trail: List[int] = []
        best_prefix = 0
        prefix_key = key(cur_cut, cur_err)
        while len(locked) < len(ids):
            best_move = None
            for i in ids:
                if i in locked:
                    continue
                gain = 0.0
                for (j, w) in adj[i]:
                    gain += w if work[j] != work[i] else -w
                new_cpu = cpu_w + (weights[i] if work[i] == GPU else -weights[i])
                new_err = abs(new_cpu / total - targets.r_cpu)
                # a move may not push a feasible state out of tolerance,
                # but may always improve an infeasible one
                if new_err > tol and new_err >= cur_err:
                    continue
                if best_move is None or gain > best_move[0]:
                    best_move = (gain, i, new_cpu, new_err)
            if best_move is None:
                break
            _, i, cpu_w, cur_err = best_move
            work[i] = CPU if work[i] == GPU else GPU
            cur_cut -= best_move[0]
            locked.add(i)
            trail.append(i)
            k = key(cur_cut, cur_err)
            if k < prefix_key:
                prefix_key = k
                best_prefix = len(trail)
        if best_prefix > 0:
            for i in trail[:best_prefix]:
                assignment[i] = CPU if assignment[i] == GPU else GPU
            new_cut, new_err = cut_of(assignment), err_of(assignment)
            if key(new_cut, new_err) < key(best_cut, best_err):
                best_cut, best_err = new_cut, new_err
                improved = True
            else:
                for i in trail[:best_prefix]:
                    assignment[i] = CPU if assignment[i] == GPU else GPU
    return _finish(graph, assignment, targets, source, tol)


def _greedy_init(graph: TaskGraph, ids: List[int], weights: Dict[int, float],
                 targets: PartitionTargets, order: List[int]) -> Dict[int, str]:
    total = sum(weights.values())
    assignment = {}
    cpu_w = 0.0
    for i in order:
        with_i = abs((cpu_w + weights[i]) / total - targets.r_cpu)
        without = abs(cpu_w / total - targets.r_cpu)
        if with_i < without:
            assignment[i] = CPU
            cpu_w += weights[i]
        else:
            assignment[i] = GPU
    return assignment


def _repair_balance(ids, weights, assignment, targets, tolerance):
    """Greedy single-node moves that strictly shrink the balance error."""
    total = sum(weights.values())
    cpu_w = sum(weights[i] for i in ids if assignment[i] == CPU)
    err = abs(cpu_w / total - targets.r_cpu)
    while err > tolerance:
        best = None
        for i in ids:
            new_cpu = cpu_w + (weights[i] if assignment[i] == GPU else -weights[i])
            new_err = abs(new_cpu / total - targets.r_cpu)
            if new_err < err and (best is None or new_err < best[0]):
                best = (new_err, i, new_cpu)
        if best is None:
            break
        err, i, cpu_w = best
        assignment[i] = CPU if assignment[i] == GPU else GPU
    return assignment


def partition_heuristic(graph: TaskGraph, targets: PartitionTargets,
                        config: Optional[PartitionConfig] = None) -> Partition:
    """Multi-restart randomized-greedy + FM refinement; deterministic per seed."""
    config = config or PartitionConfig()
    ids = graph.kernel_ids()
    if not ids:
        raise PartitionError("graph has no non-root kernels")
    source = config.node_weight_source
    tol = config.imbalance_tolerance
    weights = {i: _node_weight(graph.nodes[i], source) for i in ids}
    if sum(weights.values()) == 0:
        raise PartitionError("zero total node weight; attach weights first")

    if targets.r_cpu == 0.0:
        return _finish(graph, {i: GPU for i in ids}, targets, source, tol)
    if targets.r_cpu == 1.0:
        return _finish(graph, {i: CPU for i in ids}, targets, source, tol)

    def lex(p: Partition) -> Tuple[int, ...]:
        return tuple(0 if p.assignment[i] == CPU else 1 for i in ids)

    best: Optional[Partition] = None
    orders = [sorted(ids, key=lambda i: -weights[i])]  # descending weight first-fit
    for r in range(config.restarts):
        rng = random.Random(config.seed * 1_000_003 + r)
        order = list(ids)
        rng.shuffle(order)
        orders.append(order)
    for order in orders:
        init = _greedy_init(graph, ids, weights, targets, order)
        init = _repair_balance(ids, weights, init, targets, tol)
        start = _finish(graph, init, targets, source, tol)
        cand = fm_refine(graph, start, targets, config)
        ck = (not cand.feasible, cand.edge_cut, cand.balance_error, lex(cand))
        if best is None or ck < (not best.feasible, best.edge_cut,
                                 best.balance_error, lex(best)):
            best = cand
    return best
