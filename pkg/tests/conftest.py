import random

import pytest

from hetsched.costs import SyntheticCostModel
from hetsched.graph import (ROOT_ID, SOURCE_KIND, DataEdge,
                            InfeasibleGraphError, KernelNode, TaskGraph,
                            attach_weights, generate_random_dag)


@pytest.fixture
def model():
    return SyntheticCostModel()


def make_graph(node_weights, edges, root_targets=None):
    """Small hand-built graph: node_weights is {id: (w_cpu, w_gpu)},
    edges is [(u, v, w_xfer)]. Root edges to every in-degree-0 kernel."""
    nodes = [KernelNode(ROOT_ID, SOURCE_KIND, 0)]
    for nid, (wc, wg) in node_weights.items():
        nodes.append(KernelNode(nid, "K", 64, weight_cpu=wc, weight_gpu=wg))
    es = [DataEdge(u, v, bytes=0, weight_xfer=w) for (u, v, w) in edges]
    have_pred = {v for (_, v, _) in edges}
    for nid in node_weights:
        if nid not in have_pred:
            es.append(DataEdge(ROOT_ID, nid))
    return TaskGraph(nodes, es)


def random_weighted_graph(seed, max_kernels=15, kind="MA", size=256):
    rng = random.Random(seed)
    n = rng.randint(2, max_kernels)
    m = rng.randint(0, 2 * (n - 1))
    while True:
        try:
            g = generate_random_dag(n, m, kind, size, seed=seed)
            break
        except InfeasibleGraphError:
            m -= 1
    return attach_weights(g, SyntheticCostModel())
