"""Pydantic request/response models for the scheduling service API."""
from __future__ import annotations

from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator


class GeneratorParams(BaseModel):
    kernels: int = 38
    edges: int = 75
    kind: str = "MM"
    size: int = 1024
    seed: int = 0
    layers: Optional[int] = None
    count_root: bool = False


class GraphSource(BaseModel):
    """Exactly one of: inline DOT text, or generator parameters."""
    dot: Optional[str] = None
    generator: Optional[GeneratorParams] = None

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.dot is None) == (self.generator is None):
            raise ValueError("provide exactly one of 'dot' or 'generator'")
        return self


class ModelParams(BaseModel):
    mode: str = "synthetic"                  # "synthetic" or "calibration"
    calibration_csv: Optional[str] = None
    interpolate: bool = False

    @model_validator(mode="after")
    def _check(self):
        if self.mode not in ("synthetic", "calibration"):
            raise ValueError("model mode must be 'synthetic' or 'calibration'")
        if self.mode == "calibration" and not self.calibration_csv:
            raise ValueError("calibration mode needs calibration_csv")
        return self


class MachineParams(BaseModel):
    cpu_workers: int = 3
    gpu_workers: int = 1


class PartitionParams(BaseModel):
    node_weight_source: str = "GPU"
    tolerance: float = Field(0.03, ge=0.0, lt=1.0)
    restarts: int = Field(8, ge=1)
    seed: int = 0
    r_cpu: Optional[float] = None            # override the computed workload ratio


class GenerateResponse(BaseModel):
    dot: str
    kernels: int
    edges: int


class PartitionRequest(BaseModel):
    graph: GraphSource
    model: ModelParams = ModelParams()
    partition: PartitionParams = PartitionParams()


class PartitionResponse(BaseModel):
    r_cpu: float
    r_gpu: float
    edge_cut: float
    balance_error: float
    feasible: bool
    assignment: Dict[int, str]
    partition_file: str
    dot: str                                  # colored, partitioned DOT
    metis: str


class SimulateRequest(BaseModel):
    graph: GraphSource
    policy: str = "gp"
    model: ModelParams = ModelParams()
    machine: MachineParams = MachineParams()
    partition: PartitionParams = PartitionParams()
    seed: int = 0


class SimulateResponse(BaseModel):
    policy: str
    makespan: float
    transfer_count: int
    transfer_bytes: int
    busy_ms: Dict[str, float]
    busy_fraction: Dict[str, float]
    kernels_per_device: Dict[str, int]
    trace_csv: str
    dot_annotated: str


class CompareRequest(BaseModel):
    graph: GraphSource
    policies: List[str] = ["eager", "dmda", "gp"]
    sizes: Optional[List[int]] = None         # sweep; each size regenerates graphs
    iterations: int = Field(1, ge=1)
    seed: int = 0
    model: ModelParams = ModelParams()
    machine: MachineParams = MachineParams()
    partition: PartitionParams = PartitionParams()


class CompareRowModel(BaseModel):
    policy: str
    size: Optional[int] = None
    mean_makespan: float
    sd_makespan: float
    mean_transfers: float
    sd_transfers: float
    mean_transfer_bytes: float


class CompareResponse(BaseModel):
    rows: List[CompareRowModel]
    csv: str


class DumpModelRequest(BaseModel):
    model: ModelParams = ModelParams()
    sizes: Optional[List[int]] = None
    kinds: Optional[List[str]] = None


class DumpModelResponse(BaseModel):
    csv: str


class VisualizeRequest(BaseModel):
    dot: str
    partition_file: Optional[str] = None
    model: ModelParams = ModelParams()
    partition: PartitionParams = PartitionParams()


class VisualizeResponse(BaseModel):
    dot: str
