"""Kernel execution and bus transfer cost models, plus the workload-ratio split.

Two model flavors: a parametric synthetic model for the MA / MM test kernels
and a table model loaded from a calibration CSV. Both answer kernel_time()
and transfer_time() queries in milliseconds.
"""
from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .graph import CPU, GPU, SOURCE_KIND, TaskGraph

log = logging.getLogger(__name__)

MM = "MM"
MA = "MA"

# synthetic constants, tuned so that MM's CPU/GPU ratio climbs steeply
# (about 40x at size 1024) while MA stays in a narrow band below 4x and
# remains transfer-dominated (GPU time below the 3-matrix transfer time)
MM_CPU_COEFF = 2.0e-7   # ms per size^3
MM_GPU_COEFF = 5.0e-9   # ms per size^3
MA_CPU_COEFF = 3.12e-6  # ms per size^2
MA_GPU_COEFF = 8.0e-7   # ms per size^2
GPU_LAUNCH_MS = 0.002

DEFAULT_LATENCY_MS = 0.02
DEFAULT_BANDWIDTH = 6.2e6  # bytes per ms (~6 GB/s effective PCI-e)


class CostModelError(Exception):
    pass


class UnknownKernelError(CostModelError):
    pass


@dataclass(frozen=True)
class TransferModel:
    latency_ms: float = DEFAULT_LATENCY_MS
    bandwidth_bytes_per_ms: float = DEFAULT_BANDWIDTH

    def __post_init__(self):
        if self.latency_ms < 0 or self.bandwidth_bytes_per_ms <= 0:
            raise CostModelError("latency must be >= 0 and bandwidth > 0")

    def transfer_time(self, nbytes: float) -> float:
        if nbytes < 0:
            raise CostModelError("negative byte count")
        return self.latency_ms + nbytes / self.bandwidth_bytes_per_ms


@dataclass
class KernelProfile:
    kind: str
    entries: Dict[int, Tuple[float, float]] = field(default_factory=dict)  # size -> (cpu, gpu)


@dataclass(frozen=True)
class PartitionTargets:
    """Target node-weight fractions per processor group; always sums to 1."""
    r_cpu: float
    r_gpu: float

    def __post_init__(self):
        if not (0.0 <= self.r_cpu <= 1.0):
            raise CostModelError(f"r_cpu {self.r_cpu} outside [0, 1]")
        if self.r_cpu + self.r_gpu != 1.0:
            raise CostModelError("r_cpu + r_gpu must equal 1 exactly")

    @classmethod
    def from_cpu_fraction(cls, r_cpu: float) -> "PartitionTargets":
        return cls(r_cpu, 1.0 - r_cpu)


class SyntheticCostModel:
    """Closed-form MA / MM timing: cubic vs quadratic compute, fixed GPU launch cost."""

    def __init__(self, transfer: Optional[TransferModel] = None):
        self.transfer = transfer or TransferModel()

    def kernel_time(self, kind: str, size: int, device: str) -> float:
        if kind == SOURCE_KIND:
            return 0.0
        if kind == MM:
            work = float(size) ** 3
            if device == CPU:
                return MM_CPU_COEFF * work
            return MM_GPU_COEFF * work + GPU_LAUNCH_MS
        if kind == MA:
            work = float(size) ** 2
            if device == CPU:
                return MA_CPU_COEFF * work
            return MA_GPU_COEFF * work + GPU_LAUNCH_MS
        raise UnknownKernelError(f"synthetic model knows MA/MM/{SOURCE_KIND}, not {kind!r}")

    def transfer_time(self, nbytes: float) -> float:
        return self.transfer.transfer_time(nbytes)

    def known_kinds(self) -> List[str]:
        return [MA, MM]


class TableCostModel:
    """Timing from measured calibration entries; exact lookup by default."""

    def __init__(self, profiles: Dict[str, KernelProfile],
                 transfer: TransferModel, interpolate: bool = False):
        self.profiles = profiles
        self.transfer = transfer
        self.interpolate = interpolate

    def kernel_time(self, kind: str, size: int, device: str) -> float:
        if kind == SOURCE_KIND:
            return 0.0
        prof = self.profiles.get(kind)
        if prof is None:
            raise UnknownKernelError(f"no calibration entries for kind {kind!r}")
        idx = 0 if device == CPU else 1
        if size in prof.entries:
            return prof.entries[size][idx]
        if not self.interpolate:
            raise UnknownKernelError(
                f"no calibration entry for ({kind}, {size}); "
                "enable interpolation to estimate between measured sizes")
        sizes = sorted(prof.entries)
        if size < sizes[0] or size > sizes[-1]:
            raise UnknownKernelError(
                f"size {size} outside calibrated range [{sizes[0]}, {sizes[-1]}] for {kind}")
        hi = next(s for s in sizes if s > size)
        lo = max(s for s in sizes if s < size)
        frac = (size - lo) / (hi - lo)
        a, b = prof.entries[lo][idx], prof.entries[hi][idx]
        return a + frac * (b - a)

    def transfer_time(self, nbytes: float) -> float:
        return self.transfer.transfer_time(nbytes)

    def known_kinds(self) -> List[str]:
        return sorted(self.profiles)


TRANSFER_SECTION = "[transfer]"


def load_calibration(text: str, interpolate: bool = False) -> TableCostModel:
    """Parse a calibration CSV into a table model.

    Layout: a `kind,size,time_cpu_ms,time_gpu_ms` header with one row per
    measurement, then a `[transfer]` section holding a
    `latency_ms,bandwidth_bytes_per_ms` header and one value row.
    """
    profiles: Dict[str, KernelProfile] = {}
    transfer: Optional[TransferModel] = None
    section = "kernels"
    saw_kernel_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == TRANSFER_SECTION:
            section = "transfer"
            continue
        cells = [c.strip() for c in line.split(",")]
        if section == "kernels":
            if cells[0] == "kind":
                saw_kernel_header = True
                continue
            if len(cells) != 4:
                raise CostModelError(f"row {lineno}: expected 4 columns, got {len(cells)}")
            kind = cells[0]
            try:
                size = int(cells[1])
                t_cpu = float(cells[2])
                t_gpu = float(cells[3])
            except ValueError as exc:
                raise CostModelError(f"row {lineno}: {exc}") from exc
            if t_cpu <= 0 or t_gpu <= 0:
                raise CostModelError(f"row {lineno}: non-positive time")
            prof = profiles.setdefault(kind, KernelProfile(kind))
            if size in prof.entries:
                log.warning("duplicate calibration row for (%s, %d); keeping the later one",
                            kind, size)
            prof.entries[size] = (t_cpu, t_gpu)
        else:
            if cells[0] == "latency_ms":
                continue
            if len(cells) != 2:
                raise CostModelError(f"row {lineno}: transfer section needs 2 columns")
            try:
                transfer = TransferModel(float(cells[0]), float(cells[1]))
            except ValueError as exc:
                raise CostModelError(f"row {lineno}: {exc}") from exc
    if not saw_kernel_header or not profiles:
        raise CostModelError("calibration file contains no kernel rows")
    if transfer is None:
        raise CostModelError("calibration file is missing the [transfer] section")
    return TableCostModel(profiles, transfer, interpolate=interpolate)


DEFAULT_SIZE_GRID = [64, 128, 256, 384, 512, 768, 1024, 1536, 2048, 3072, 4096]


def dump_calibration(model, sizes: Optional[List[int]] = None,
                     kinds: Optional[List[str]] = None) -> str:
    """Emit the model's timings as a calibration CSV (loadable by load_calibration)."""
    sizes = sizes or DEFAULT_SIZE_GRID
    kinds = kinds or model.known_kinds()
    out = io.StringIO()
    out.write("kind,size,time_cpu_ms,time_gpu_ms\n")
    for kind in kinds:
        for size in sizes:
            t_cpu = model.kernel_time(kind, size, CPU)
            t_gpu = model.kernel_time(kind, size, GPU)
            out.write(f"{kind},{size},{t_cpu!r},{t_gpu!r}\n")
    out.write(TRANSFER_SECTION + "\n")
    out.write("latency_ms,bandwidth_bytes_per_ms\n")
    t = model.transfer if isinstance(model.transfer, TransferModel) else model.transfer
    out.write(f"{t.latency_ms!r},{t.bandwidth_bytes_per_ms!r}\n")
    return out.getvalue()


def speedup_ratio(model, kind: str, size: int) -> float:
    """CPU time over GPU time for one kernel; >1 means the GPU wins."""
    return model.kernel_time(kind, size, CPU) / model.kernel_time(kind, size, GPU)


def compute_transfer_ratio(model, kind: str, size: int) -> float:
    """GPU time over the 3-matrix (two inputs, one output) transfer time."""
    nbytes = 3 * size * size * 4
    return model.kernel_time(kind, size, GPU) / model.transfer_time(nbytes)


def workload_ratio(graph: TaskGraph) -> PartitionTargets:
    """Target CPU/GPU workload split from the graph's aggregate node weights.

    The CPU's share is the GPU total over the combined total, so a fast GPU
    (small GPU total) pulls the CPU share toward zero.
    """
    kernels = [graph.nodes[i] for i in graph.kernel_ids()]
    if not kernels:
        raise CostModelError("graph has no non-root kernels")
    t_cpu = math.fsum(n.weight_cpu for n in kernels)
    t_gpu = math.fsum(n.weight_gpu for n in kernels)
    if t_cpu + t_gpu == 0:
        raise CostModelError("graph has zero total kernel time; attach weights first")
    r_cpu = t_gpu / (t_gpu + t_cpu)
    return PartitionTargets.from_cpu_fraction(r_cpu)


def make_model(spec: str = "synthetic", interpolate: bool = False):
    """Build a cost model from a CLI-style spec: 'synthetic' or calibration CSV text."""
    if spec == "synthetic":
        return SyntheticCostModel()
    return load_calibration(spec, interpolate=interpolate)
