"""Command-line surface: a thin client talking to the service API.

By default requests run against the FastAPI app in-process (no socket); pass
--server to target a running instance instead. `hetsched serve` starts one.
"""
from __future__ import annotations

import sys
from pathlib import Path
from typing import Dict, Optional

import click
import httpx


def _client(server: Optional[str]) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient
    from .service.app import app
    return TestClient(app)


def _post(server: Optional[str], path: str, payload: dict) -> dict:
    with _client(server) as client:
        resp = client.post(path, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except Exception:
            detail = resp.text
        click.echo(f"error: {detail}", err=True)
        sys.exit(1)
    return resp.json()


def _read_config(path: Optional[str]) -> Dict[str, str]:
    """Flat key=value config file; '#' starts a comment."""
    if not path:
        return {}
    cfg: Dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#")[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.ClickException(f"bad config line: {raw!r}")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def _pick(flag, cfg: Dict[str, str], key: str, default, cast=str):
    if flag is not None:
        return flag
    if key in cfg:
        return cast(cfg[key])
    return default


def _graph_source(graph, kernels, edges, kind, size, seed, layers, count_root) -> dict:
    if graph is not None and kernels is not None:
        raise click.ClickException("give either --graph or generator flags, not both")
    if graph is not None:
        return {"dot": Path(graph).read_text()}
    if kernels is None:
        raise click.ClickException("need --graph PATH or --kernels/--edges generator flags")
    gen = {"kernels": kernels, "edges": edges if edges is not None else 0,
           "kind": kind, "size": size, "seed": seed, "count_root": count_root}
    if layers:
        gen["layers"] = layers
    return {"generator": gen}


def _model_params(model: str, interpolate: bool) -> dict:
    if model == "synthetic":
        return {"mode": "synthetic"}
    return {"mode": "calibration", "calibration_csv": Path(model).read_text(),
            "interpolate": interpolate}


def _write(out_dir: Optional[str], name: str, content: str) -> None:
    if out_dir:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / name).write_text(content)


def common_options(f):
    f = click.option("--server", default=None, help="remote service URL (default: in-process)")(f)
    f = click.option("--config", "config_path", default=None, type=click.Path(exists=True),
                     help="flat key=value config file; flags override it")(f)
    return f


graph_options_defs = [
    click.option("--graph", default=None, type=click.Path(exists=True),
                 help="DOT file to read instead of generating"),
    click.option("--kernels", type=int, default=None),
    click.option("--edges", type=int, default=None),
    click.option("--kind", default="MM", show_default=True),
    click.option("--size", type=int, default=1024, show_default=True),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--layers", type=int, default=None),
    click.option("--count-root", is_flag=True, default=False,
                 help="kernel/edge counts include the root and its edges"),
]


def graph_options(f):
    for opt in reversed(graph_options_defs):
        f = opt(f)
    return f


def model_options(f):
    f = click.option("--model", default="synthetic", show_default=True,
                     help="'synthetic' or path to a calibration CSV")(f)
    f = click.option("--interpolate", is_flag=True, default=False,
                     help="interpolate between calibrated sizes")(f)
    return f


def partition_options(f):
    f = click.option("--node-weight-source", type=click.Choice(["gpu", "cpu"]),
                     default="gpu", show_default=True)(f)
    f = click.option("--tolerance", type=float, default=0.03, show_default=True)(f)
    f = click.option("--restarts", type=int, default=8, show_default=True)(f)
    f = click.option("--targets", default=None,
                     help="override workload ratio, e.g. '0.5,0.5'")(f)
    return f


def machine_options(f):
    f = click.option("--cpu-workers", type=int, default=3, show_default=True)(f)
    f = click.option("--gpu-workers", type=int, default=1, show_default=True)(f)
    return f


def _partition_params(node_weight_source, tolerance, restarts, targets, seed) -> dict:
    params = {"node_weight_source": node_weight_source.upper(),
              "tolerance": tolerance, "restarts": restarts, "seed": seed}
    if targets:
        try:
            r_cpu, r_gpu = (float(x) for x in targets.split(","))
        except ValueError:
            raise click.ClickException("--targets expects 'r_cpu,r_gpu'")
        if abs(r_cpu + r_gpu - 1.0) > 1e-9:
            raise click.ClickException("--targets fractions must sum to 1")
        params["r_cpu"] = r_cpu
    return params


@click.group()
def main():
    """Heterogeneous task-graph scheduling toolkit."""


@main.command()
@graph_options
@common_options
@click.option("--out", "out_dir", default=None, type=click.Path())
def generate(graph, kernels, edges, kind, size, seed, layers, count_root,
             server, config_path, out_dir):
    """Generate a random task graph and print its DOT text."""
    cfg = _read_config(config_path)
    kernels = _pick(kernels, cfg, "kernels", 38, int)
    edges = _pick(edges, cfg, "edges", 75, int)
    if graph:
        raise click.ClickException("generate does not read --graph")
    source = _graph_source(None, kernels, edges, kind, size, seed, layers, count_root)
    data = _post(server, "/generate", source["generator"])
    _write(out_dir, "graph.dot", data["dot"])
    click.echo(data["dot"], nl=False)
    click.echo(f"kernels={data['kernels']} edges={data['edges']}", err=True)


@main.command()
@graph_options
@model_options
@partition_options
@common_options
@click.option("--out", "out_dir", default=None, type=click.Path())
def partition(graph, kernels, edges, kind, size, seed, layers, count_root,
              model, interpolate, node_weight_source, tolerance, restarts,
              targets, server, config_path, out_dir):
    """Compute the workload ratio and a balanced min-cut partition."""
    cfg = _read_config(config_path)
    payload = {
        "graph": _graph_source(graph, kernels, edges, kind, size, seed, layers, count_root),
        "model": _model_params(_pick(None, cfg, "model", model), interpolate),
        "partition": _partition_params(node_weight_source, tolerance, restarts,
                                       targets, seed),
    }
    data = _post(server, "/partition", payload)
    _write(out_dir, "partition.txt", data["partition_file"])
    _write(out_dir, "partitioned.dot", data["dot"])
    _write(out_dir, "graph.metis", data["metis"])
    click.echo(f"r_cpu={data['r_cpu']!r} r_gpu={data['r_gpu']!r} "
               f"edge_cut={data['edge_cut']!r} balance_error={data['balance_error']!r} "
               f"feasible={data['feasible']}")


@main.command()
@graph_options
@model_options
@partition_options
@machine_options
@common_options
@click.option("--policy", type=click.Choice(["eager", "dmda", "gp"]), default="gp",
              show_default=True)
@click.option("--out", "out_dir", default=None, type=click.Path())
def simulate(graph, kernels, edges, kind, size, seed, layers, count_root,
             model, interpolate, node_weight_source, tolerance, restarts, targets,
             cpu_workers, gpu_workers, policy, server, config_path, out_dir):
    """Run one simulation and report makespan and transfer metrics."""
    cfg = _read_config(config_path)
    payload = {
        "graph": _graph_source(graph, kernels, edges, kind, size, seed, layers, count_root),
        "policy": _pick(None, cfg, "policy", policy),
        "model": _model_params(_pick(None, cfg, "model", model), interpolate),
        "machine": {"cpu_workers": cpu_workers, "gpu_workers": gpu_workers},
        "partition": _partition_params(node_weight_source, tolerance, restarts,
                                       targets, seed),
        "seed": seed,
    }
    data = _post(server, "/simulate", payload)
    _write(out_dir, "trace.csv", data["trace_csv"])
    _write(out_dir, "annotated.dot", data["dot_annotated"])
    kpd = data["kernels_per_device"]
    click.echo(f"policy={data['policy']} makespan={data['makespan']!r} "
               f"transfer_count={data['transfer_count']} "
               f"transfer_bytes={data['transfer_bytes']} "
               f"cpu_kernels={kpd['CPU']} gpu_kernels={kpd['GPU']}")


@main.command()
@graph_options
@model_options
@partition_options
@machine_options
@common_options
@click.option("--policies", default="eager,dmda,gp", show_default=True)
@click.option("--sizes", default=None,
              help="comma list or 'lo..hi' sweep, e.g. 256..2048")
@click.option("--iterations", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", default=None, type=click.Path())
def compare(graph, kernels, edges, kind, size, seed, layers, count_root,
            model, interpolate, node_weight_source, tolerance, restarts, targets,
            cpu_workers, gpu_workers, policies, sizes, iterations,
            server, config_path, out_dir):
    """Compare policies over iterations (and an optional size sweep); emits CSV."""
    cfg = _read_config(config_path)
    iterations = _pick(None, cfg, "iterations", iterations, int)
    payload = {
        "graph": _graph_source(graph, kernels if kernels is not None else 38,
                               edges if edges is not None else 75,
                               kind, size, seed, layers, count_root)
        if graph is None else {"dot": Path(graph).read_text()},
        "policies": [p.strip() for p in policies.split(",") if p.strip()],
        "iterations": iterations,
        "seed": seed,
        "model": _model_params(_pick(None, cfg, "model", model), interpolate),
        "machine": {"cpu_workers": cpu_workers, "gpu_workers": gpu_workers},
        "partition": _partition_params(node_weight_source, tolerance, restarts,
                                       targets, seed),
    }
    if sizes:
        payload["sizes"] = _parse_sizes(sizes)
    data = _post(server, "/compare", payload)
    _write(out_dir, "compare.csv", data["csv"])
    click.echo(data["csv"], nl=False)


SWEEP_GRID = [256, 384, 512, 768, 1024, 1536, 2048]


def _parse_sizes(spec: str):
    if ".." in spec:
        lo, hi = (int(x) for x in spec.split("..", 1))
        return [s for s in SWEEP_GRID if lo <= s <= hi] or [lo, hi]
    return [int(x) for x in spec.split(",")]


@main.command("dump-model")
@model_options
@common_options
@click.option("--sizes", default=None, help="comma-separated size list")
@click.option("--kinds", default=None, help="comma-separated kind list")
@click.option("--out", "out_dir", default=None, type=click.Path())
def dump_model(model, interpolate, server, config_path, sizes, kinds, out_dir):
    """Dump the active cost model as a calibration CSV."""
    payload = {"model": _model_params(model, interpolate)}
    if sizes:
        payload["sizes"] = [int(x) for x in sizes.split(",")]
    if kinds:
        payload["kinds"] = [k.strip() for k in kinds.split(",")]
    data = _post(server, "/model/dump", payload)
    _write(out_dir, "model.csv", data["csv"])
    click.echo(data["csv"], nl=False)


@main.command()
@common_options
@model_options
@click.argument("dot_path", type=click.Path(exists=True))
@click.option("--partition-file", default=None, type=click.Path(exists=True))
@click.option("--out", "out_dir", default=None, type=click.Path())
def visualize(server, config_path, model, interpolate, dot_path, partition_file, out_dir):
    """Re-emit a DOT file canonically, optionally colored by a partition file."""
    payload = {"dot": Path(dot_path).read_text(),
               "model": _model_params(model, interpolate)}
    if partition_file:
        payload["partition_file"] = Path(partition_file).read_text()
    data = _post(server, "/visualize", payload)
    _write(out_dir, "visualized.dot", data["dot"])
    click.echo(data["dot"], nl=False)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the scheduling service under uvicorn."""
    import uvicorn
    uvicorn.run("hetsched.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
