"""Heterogeneous CPU+GPU task-graph scheduling toolkit."""

from .graph import (CPU, GPU, ROOT_ID, SOURCE_KIND, DataEdge, KernelNode,
                    TaskGraph, attach_weights, generate_random_dag,
                    topological_order, total_weights, validate)
from .costs import (PartitionTargets, SyntheticCostModel, TableCostModel,
                    TransferModel, load_calibration, dump_calibration,
                    speedup_ratio, compute_transfer_ratio, workload_ratio)
from .partition import (Partition, PartitionConfig, brute_force_partition,
                        evaluate, fm_refine, partition_heuristic)
from .policies import build_policy, gp_build
from .sim import MachineModel, Trace, compare, metrics, simulate

__version__ = "0.1.0"
