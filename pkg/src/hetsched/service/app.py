"""FastAPI service exposing the scheduling pipeline as request/response calls."""
from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import costs, graphio, sim
from ..graph import (GraphError, TaskGraph, attach_weights, generate_random_dag,
                     validate)
from ..partition import PartitionConfig, PartitionError, partition_heuristic
from ..policies import POLICY_NAMES, GraphPartitionPolicy, build_policy, gp_build
from .schemas import (CompareRequest, CompareResponse, CompareRowModel,
                      DumpModelRequest, DumpModelResponse, GenerateResponse,
                      GeneratorParams, GraphSource, MachineParams, ModelParams,
                      PartitionParams, PartitionRequest, PartitionResponse,
                      SimulateRequest, SimulateResponse, VisualizeRequest,
                      VisualizeResponse)

app = FastAPI(title="hetsched", version="0.1.0",
              description="Task-graph partitioning and scheduling simulation")

_TOOLKIT_ERRORS = (GraphError, PartitionError, costs.CostModelError,
                   graphio.DotParseError, sim.SimulationError, ValueError)


def _fail(exc: Exception) -> HTTPException:
    return HTTPException(status_code=422, detail=str(exc))


def _model(params: ModelParams):
    if params.mode == "synthetic":
        return costs.SyntheticCostModel()
    return costs.load_calibration(params.calibration_csv, interpolate=params.interpolate)


def _machine(params: MachineParams) -> sim.MachineModel:
    return sim.MachineModel(params.cpu_workers, params.gpu_workers)


def _pconfig(params: PartitionParams) -> PartitionConfig:
    return PartitionConfig(node_weight_source=params.node_weight_source,
                           imbalance_tolerance=params.tolerance,
                           restarts=params.restarts, seed=params.seed)


def _load_graph(source: GraphSource, model=None) -> TaskGraph:
    if source.dot is not None:
        g = graphio.parse_dot(source.dot)
    else:
        p = source.generator
        g = generate_random_dag(p.kernels, p.edges, p.kind, p.size, p.seed,
                                layers=p.layers, count_root=p.count_root)
    unweighted = any(g.nodes[i].weight_cpu == 0 and g.nodes[i].weight_gpu == 0
                     for i in g.kernel_ids())
    if model is not None and unweighted:
        g = attach_weights(g, model)
    problems = validate(g)
    if problems:
        raise GraphError("; ".join(problems))
    return g


def _targets(graph: TaskGraph, params: PartitionParams):
    if params.r_cpu is not None:
        return costs.PartitionTargets.from_cpu_fraction(params.r_cpu)
    return costs.workload_ratio(graph)


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/generate", response_model=GenerateResponse)
def generate(params: GeneratorParams):
    try:
        g = _load_graph(GraphSource(generator=params))
    except _TOOLKIT_ERRORS as exc:
        raise _fail(exc)
    return GenerateResponse(dot=graphio.emit_dot(g), kernels=g.n_kernels(),
                            edges=len(g.inter_kernel_edges()))


@app.post("/partition", response_model=PartitionResponse)
def partition(req: PartitionRequest):
    try:
        model = _model(req.model)
        g = _load_graph(req.graph, model)
        targets = _targets(g, req.partition)
        config = _pconfig(req.partition)
        part = partition_heuristic(g, targets, config)
        metis = graphio.emit_metis(g, node_weight_source=config.node_weight_source)
    except _TOOLKIT_ERRORS as exc:
        raise _fail(exc)
    return PartitionResponse(
        r_cpu=targets.r_cpu, r_gpu=targets.r_gpu,
        edge_cut=part.edge_cut, balance_error=part.balance_error,
        feasible=part.feasible, assignment=part.assignment,
        partition_file=graphio.emit_partition_file(part, g),
        dot=graphio.emit_partitioned_dot(g, part), metis=metis)


@app.post("/simulate", response_model=SimulateResponse)
def simulate_endpoint(req: SimulateRequest):
    try:
        model = _model(req.model)
        g = _load_graph(req.graph, model)
        if req.policy not in POLICY_NAMES:
            raise ValueError(f"unknown policy {req.policy!r}")
        policy = build_policy(req.policy, g,
                              targets=_targets(g, req.partition) if req.policy == "gp" else None,
                              config=_pconfig(req.partition) if req.policy == "gp" else None)
        trace = sim.simulate(g, policy, _machine(req.machine), seed=req.seed)
        summary = sim.metrics(trace)
    except _TOOLKIT_ERRORS as exc:
        raise _fail(exc)
    return SimulateResponse(
        policy=req.policy, makespan=trace.makespan,
        transfer_count=trace.transfer_count, transfer_bytes=trace.transfer_bytes,
        busy_ms=trace.busy_ms, busy_fraction=summary["busy_fraction"],
        kernels_per_device=trace.kernels_per_device,
        trace_csv=sim.trace_csv(trace), dot_annotated=sim.annotated_dot(g, trace))


@app.post("/compare", response_model=CompareResponse)
def compare_endpoint(req: CompareRequest):
    try:
        model = _model(req.model)
        for p in req.policies:
            if p not in POLICY_NAMES:
                raise ValueError(f"unknown policy {p!r}")
        machine = _machine(req.machine)
        pconfig = _pconfig(req.partition)

        def builder(name: str, g: TaskGraph):
            return build_policy(name, g, config=pconfig if name == "gp" else None)

        rows = []
        if req.sizes:
            if req.graph.generator is None:
                raise ValueError("a size sweep needs generator parameters")
            for size in req.sizes:
                gen = req.graph.generator.model_copy(update={"size": size})

                def factory(s: int, gen=gen):
                    return _load_graph(GraphSource(generator=gen.model_copy(
                        update={"seed": s})), model)

                for r in sim.compare(req.policies, factory, machine,
                                     req.iterations, req.seed, builder):
                    r.size = size
                    rows.append(r)
        else:
            def factory(s: int):
                if req.graph.dot is not None:
                    return _load_graph(req.graph, model)
                gen = req.graph.generator.model_copy(update={"seed": s})
                return _load_graph(GraphSource(generator=gen), model)

            rows = sim.compare(req.policies, factory, machine,
                               req.iterations, req.seed, builder)
    except _TOOLKIT_ERRORS as exc:
        raise _fail(exc)
    return CompareResponse(
        rows=[CompareRowModel(policy=r.policy, size=r.size,
                              mean_makespan=r.mean_makespan, sd_makespan=r.sd_makespan,
                              mean_transfers=r.mean_transfers, sd_transfers=r.sd_transfers,
                              mean_transfer_bytes=r.mean_transfer_bytes)
              for r in rows],
        csv=sim.compare_csv(rows))


@app.post("/model/dump", response_model=DumpModelResponse)
def dump_model(req: DumpModelRequest):
    try:
        model = _model(req.model)
        csv = costs.dump_calibration(model, sizes=req.sizes, kinds=req.kinds)
    except _TOOLKIT_ERRORS as exc:
        raise _fail(exc)
    return DumpModelResponse(csv=csv)


@app.post("/visualize", response_model=VisualizeResponse)
def visualize(req: VisualizeRequest):
    try:
        g = graphio.parse_dot(req.dot)
        if req.partition_file is not None:
            model = _model(req.model)
            g = attach_weights(g, model)
            part = graphio.parse_partition_file(
                req.partition_file, g,
                node_weight_source=req.partition.node_weight_source,
                tolerance=req.partition.tolerance)
            out = graphio.emit_partitioned_dot(g, part)
        else:
            out = graphio.emit_dot(g)
    except _TOOLKIT_ERRORS as exc:
        raise _fail(exc)
    return VisualizeResponse(dot=out)
