import itertools

import pytest

from hetsched.costs import PartitionTargets
from hetsched.graph import CPU, GPU
from hetsched.partition import (Partition, PartitionConfig, PartitionError,
                                brute_force_partition, evaluate, fm_refine,
                                partition_heuristic)
from tests.conftest import make_graph, random_weighted_graph


def enumerate_best(graph, targets, tolerance, source=GPU):
    """Second, independent oracle built on itertools.product."""
    ids = graph.kernel_ids()
    total = sum((graph.nodes[i].weight_gpu if source == GPU
                 else graph.nodes[i].weight_cpu) for i in ids)
    inter = [((u, v), e.weight_xfer) for (u, v), e in graph.edges.items()
             if u != graph.root and v != graph.root]
    best = None
    for combo in itertools.product((CPU, GPU), repeat=len(ids)):
        a = dict(zip(ids, combo))
        cpu_w = sum((graph.nodes[i].weight_gpu if source == GPU
                     else graph.nodes[i].weight_cpu)
                    for i in ids if a[i] == CPU)
        err = abs(cpu_w / total - targets.r_cpu)
        if err > tolerance:
            continue
        cut = sum(w for ((u, v), w) in inter if a[u] != a[v])
        if best is None or cut < best[0]:
            best = (cut, err, a)
    return best


class TestBruteForce:
    def test_hand_derived_chain(self):
        # three unit kernels in a chain, heavy first edge, one-third CPU target
        g = make_graph({1: (1.0, 1.0), 2: (1.0, 1.0), 3: (1.0, 1.0)},
                       [(1, 2, 5.0), (2, 3, 1.0)])
        t = PartitionTargets(1.0 / 3.0, 2.0 / 3.0)
        p = brute_force_partition(g, t, tolerance=0.05)
        assert p.assignment == {1: GPU, 2: GPU, 3: CPU}
        assert p.edge_cut == 1.0
        assert p.feasible

    def test_matches_independent_enumerator(self):
        for seed in range(25):
            g = random_weighted_graph(seed, max_kernels=9)
            t = PartitionTargets(0.5, 0.5)
            p = brute_force_partition(g, t, tolerance=0.25)
            ref = enumerate_best(g, t, 0.25)
            if ref is None:
                assert not p.feasible
            else:
                assert p.feasible
                assert p.edge_cut == pytest.approx(ref[0], abs=1e-12)

    def test_infeasible_flagged_with_min_error(self):
        # weights 1 and 100: no assignment is near a 50/50 split
        g = make_graph({1: (1.0, 1.0), 2: (100.0, 100.0)}, [])
        p = brute_force_partition(g, PartitionTargets(0.5, 0.5), tolerance=0.01)
        assert not p.feasible
        # closest achievable error is |1/101 - 0.5|
        assert p.balance_error == pytest.approx(abs(1 / 101 - 0.5))

    def test_size_limit(self):
        g = random_weighted_graph(0, max_kernels=15)
        big = make_graph({i: (1.0, 1.0) for i in range(1, 22)}, [])
        with pytest.raises(PartitionError, match="limit 20"):
            brute_force_partition(big, PartitionTargets(0.5, 0.5), 0.1)

    def test_deterministic_tie_break(self):
        # symmetric square: several optima; lexicographic winner is stable
        g = make_graph({1: (1.0, 1.0), 2: (1.0, 1.0), 3: (1.0, 1.0), 4: (1.0, 1.0)},
                       [(1, 2, 1.0), (1, 3, 1.0), (2, 4, 1.0), (3, 4, 1.0)])
        t = PartitionTargets(0.5, 0.5)
        a = brute_force_partition(g, t, tolerance=0.01)
        b = brute_force_partition(g, t, tolerance=0.01)
        assert a.assignment == b.assignment


class TestEvaluate:
    def test_recompute_matches_stored(self):
        g = random_weighted_graph(7)
        p = partition_heuristic(g, PartitionTargets(0.5, 0.5))
        cut, err, sides = evaluate(g, p)
        assert cut == p.edge_cut
        assert err == p.balance_error
        assert sides == p.side_weights

    def test_coverage_enforced(self):
        g = make_graph({1: (1.0, 1.0), 2: (1.0, 1.0)}, [])
        p = Partition({1: CPU}, 0.0, 0.0, PartitionTargets(0.5, 0.5))
        with pytest.raises(PartitionError):
            evaluate(g, p)

    def test_zero_weight_rejected(self):
        g = make_graph({1: (0.0, 0.0)}, [])
        p = Partition({1: CPU}, 0.0, 0.0, PartitionTargets(0.5, 0.5))
        with pytest.raises(PartitionError):
            evaluate(g, p)


class TestFmRefine:
    def _as_partition(self, g, assignment, targets, tol=0.25):
        p = Partition(dict(assignment), 0.0, 0.0, targets)
        cut, err, sides = evaluate(g, p)
        p.edge_cut, p.balance_error, p.side_weights = cut, err, sides
        p.feasible = err <= tol
        return p

    def test_never_increases_cut(self):
        cfg = PartitionConfig(imbalance_tolerance=0.25)
        t = PartitionTargets(0.5, 0.5)
        for seed in range(20):
            g = random_weighted_graph(seed, max_kernels=12)
            ids = g.kernel_ids()
            start = self._as_partition(
                g, {i: (CPU if k % 2 else GPU) for k, i in enumerate(ids)}, t)
            out = fm_refine(g, start, t, cfg)
            assert out.edge_cut <= start.edge_cut + 1e-12

    def test_keeps_feasibility(self):
        cfg = PartitionConfig(imbalance_tolerance=0.25)
        t = PartitionTargets(0.5, 0.5)
        for seed in range(20):
            g = random_weighted_graph(seed, max_kernels=12)
            ids = g.kernel_ids()
            start = self._as_partition(
                g, {i: (CPU if k % 2 else GPU) for k, i in enumerate(ids)}, t)
            out = fm_refine(g, start, t, cfg)
            if start.balance_error <= cfg.imbalance_tolerance:
                assert out.balance_error <= cfg.imbalance_tolerance

    def test_idempotent(self):
        cfg = PartitionConfig(imbalance_tolerance=0.25)
        t = PartitionTargets(0.5, 0.5)
        g = random_weighted_graph(5, max_kernels=12)
        ids = g.kernel_ids()
        start = self._as_partition(
            g, {i: (CPU if k % 2 else GPU) for k, i in enumerate(ids)}, t)
        once = fm_refine(g, start, t, cfg)
        twice = fm_refine(g, once, t, cfg)
        assert twice.assignment == once.assignment

    def test_improves_obvious_split(self):
        # two 2-cliques joined by one light edge; from a slightly unbalanced
        # start FM can walk to the natural split
        g = make_graph({1: (1.0, 1.0), 2: (1.0, 1.0), 3: (1.0, 1.0), 4: (1.0, 1.0)},
                       [(1, 2, 5.0), (3, 4, 5.0), (2, 3, 0.1)])
        t = PartitionTargets(0.5, 0.5)
        cfg = PartitionConfig(imbalance_tolerance=0.3)
        start = self._as_partition(g, {1: CPU, 2: GPU, 3: CPU, 4: GPU}, t, tol=0.3)
        out = fm_refine(g, start, t, cfg)
        assert out.edge_cut == pytest.approx(0.1)

    def test_heuristic_finds_obvious_split_despite_tight_tolerance(self):
        g = make_graph({1: (1.0, 1.0), 2: (1.0, 1.0), 3: (1.0, 1.0), 4: (1.0, 1.0)},
                       [(1, 2, 5.0), (3, 4, 5.0), (2, 3, 0.1)])
        p = partition_heuristic(g, PartitionTargets(0.5, 0.5),
                                PartitionConfig(imbalance_tolerance=0.05))
        assert p.edge_cut == pytest.approx(0.1)
        assert p.feasible


class TestHeuristic:
    def test_within_factor_of_oracle(self):
        t = PartitionTargets(0.5, 0.5)
        cfg = PartitionConfig(imbalance_tolerance=0.25)
        for seed in range(30):
            g = random_weighted_graph(seed, max_kernels=10)
            heur = partition_heuristic(g, t, cfg)
            oracle = brute_force_partition(g, t, cfg.imbalance_tolerance)
            if oracle.feasible:
                assert heur.feasible
                assert heur.edge_cut <= 1.5 * oracle.edge_cut + 1e-9

    def test_deterministic(self):
        g = random_weighted_graph(3)
        t = PartitionTargets(0.4, 0.6)
        a = partition_heuristic(g, t, PartitionConfig(seed=1))
        b = partition_heuristic(g, t, PartitionConfig(seed=1))
        assert a.assignment == b.assignment

    def test_degenerate_targets(self):
        g = random_weighted_graph(2)
        all_gpu = partition_heuristic(g, PartitionTargets(0.0, 1.0))
        assert set(all_gpu.assignment.values()) == {GPU}
        assert all_gpu.edge_cut == 0.0
        all_cpu = partition_heuristic(g, PartitionTargets(1.0, 0.0))
        assert set(all_cpu.assignment.values()) == {CPU}

    def test_empty_graph_rejected(self):
        from hetsched.graph import ROOT_ID, SOURCE_KIND, KernelNode, TaskGraph
        g = TaskGraph([KernelNode(ROOT_ID, SOURCE_KIND, 0)], [])
        with pytest.raises(PartitionError):
            partition_heuristic(g, PartitionTargets(0.5, 0.5))

    def test_node_weight_source_changes_balance(self):
        # CPU weights are balanced, GPU weights are skewed: which side weight
        # is balanced depends on the configured source
        g = make_graph({1: (2.0, 10.0), 2: (2.0, 1.0)}, [])
        t = PartitionTargets(0.5, 0.5)
        by_cpu = partition_heuristic(g, t, PartitionConfig(
            node_weight_source=CPU, imbalance_tolerance=0.05))
        assert by_cpu.feasible
        by_gpu = partition_heuristic(g, t, PartitionConfig(
            node_weight_source=GPU, imbalance_tolerance=0.05))
        assert not by_gpu.feasible

    def test_config_validation(self):
        with pytest.raises(PartitionError):
            PartitionConfig(node_weight_source="TPU")
        with pytest.raises(PartitionError):
            PartitionConfig(imbalance_tolerance=1.0)
        with pytest.raises(PartitionError):
            PartitionConfig(restarts=0)
