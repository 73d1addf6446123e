"""DOT and METIS text formats: parsing, canonical emission and translation."""
from __future__ import annotations

import re
from typing import Dict, List, Optional, Tuple

from .costs import PartitionTargets
from .graph import (CPU, GPU, ROOT_ID, SOURCE_KIND, DataEdge, KernelNode,
                    TaskGraph)
from .partition import Partition, PartitionError, _finish

KNOWN_NODE_ATTRS = ("kind", "size", "weight_cpu", "weight_gpu")
KNOWN_EDGE_ATTRS = ("bytes", "weight_xfer")
STYLE_ATTRS = ("part", "color", "style", "fillcolor", "device", "start", "end")

CPU_COLOR = "lightblue"
GPU_COLOR = "palegreen"


class DotParseError(Exception):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


_ID_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_NUM_RE = re.compile(r"-?(\.\d+|\d+(\.\d*)?)$")
_NAME_NUM_RE = re.compile(r"n?(\d+)$")


def _quote(value: str) -> str:
    if _ID_RE.match(value) or _NUM_RE.match(value):
        return value
    return '"' + value.replace('"', '\\"') + '"'


def _fmt_attrs(pairs: List[Tuple[str, str]]) -> str:
    return "[" + ", ".join(f"{k}={_quote(v)}" for k, v in pairs) + "]"


def _num(x: float) -> str:
    return repr(x)


_ATTR_RE = re.compile(r'\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*("(?:[^"\\]|\\.)*"|[^,\]\s]+)\s*(?:,|$)')


def _parse_attrs(text: str, lineno: int) -> List[Tuple[str, str]]:
    pairs: List[Tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        m = _ATTR_RE.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise DotParseError(f"bad attribute syntax near {text[pos:pos+20]!r}",
                                    lineno, pos + 1)
            break
        value = m.group(2)
        if value.startswith('"'):
            value = value[1:-1].replace('\\"', '"')
        pairs.append((m.group(1), value))
        pos = m.end()
    return pairs


_NODE_STMT = re.compile(r'\s*("(?:[^"\\]|\\.)*"|[A-Za-z0-9_.]+)\s*(?:\[(.*)\])?\s*;?\s*$')
_EDGE_STMT = re.compile(
    r'\s*("(?:[^"\\]|\\.)*"|[A-Za-z0-9_.]+)\s*->\s*("(?:[^"\\]|\\.)*"|[A-Za-z0-9_.]+)'
    r'\s*(?:\[(.*)\])?\s*;?\s*$')


def _unquote_name(tok: str) -> str:
    if tok.startswith('"'):
        return tok[1:-1].replace('\\"', '"')
    return tok


def parse_dot(text: str) -> TaskGraph:
    """Parse the supported DOT subset into a TaskGraph.

    Node names of the form `n<int>` (or bare integers) keep that id; other
    names get sequential ids in order of appearance. A zero-weight root is
    synthesized and wired to all in-degree-0 kernels if no SOURCE node is
    declared.
    """
    name = "task"
    node_decl: Dict[str, List[Tuple[str, str]]] = {}
    appearance: List[str] = []
    edge_decl: List[Tuple[str, str, List[Tuple[str, str]]]] = []
    in_body = False
    closed = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//")[0].strip()
        if line.startswith("#"):
            continue
        if not line:
            continue
        if not in_body:
            m = re.match(r"(strict\s+)?(di)?graph\s*([A-Za-z0-9_\"]*)\s*(\{)?\s*", line)
            if not m or (not m.group(4) and m.end() != len(line)):
                raise DotParseError(f"expected a digraph header, got {line!r}", lineno)
            if m.group(2) != "di":
                raise DotParseError("undirected graphs are not supported", lineno)
            if m.group(3):
                name = _unquote_name(m.group(3))
            in_body = True
            line = line[m.end():].strip()
            if not line:
                continue
        if line == "}":
            closed = True
            break
        if line.endswith("}") and not line.endswith('"}'):
            line = line[:-1].strip()
            closed = True
        for stmt in filter(None, (s.strip() for s in _split_statements(line))):
            em = _EDGE_STMT.match(stmt)
            if em and "->" in stmt:
                src = _unquote_name(em.group(1))
                dst = _unquote_name(em.group(2))
                attrs = _parse_attrs(em.group(3) or "", lineno)
                for nm in (src, dst):
                    if nm not in node_decl:
                        node_decl[nm] = []
                        appearance.append(nm)
                edge_decl.append((src, dst, attrs))
                continue
            nm = _NODE_STMT.match(stmt)
            if nm:
                node = _unquote_name(nm.group(1))
                if node in ("node", "edge", "graph"):
                    continue  # default-attribute statements carry no structure
                attrs = _parse_attrs(nm.group(2) or "", lineno)
                if node not in node_decl:
                    node_decl[node] = []
                    appearance.append(node)
                node_decl[node].extend(attrs)
                continue
            raise DotParseError(f"cannot parse statement {stmt!r}", lineno)
        if closed:
            break
    if not in_body:
        raise DotParseError("no digraph found", max(1, text.count("\n") + 1))
    if not closed:
        raise DotParseError("missing closing brace", text.count("\n") + 1)

    # map names to integer ids
    ids: Dict[str, int] = {}
    taken = set()
    for nm in appearance:
        m = _NAME_NUM_RE.match(nm)
        if m and int(m.group(1)) not in taken:
            ids[nm] = int(m.group(1))
            taken.add(ids[nm])
    next_id = max(taken, default=0) + 1
    for nm in appearance:
        if nm not in ids:
            while next_id in taken:
                next_id += 1
            ids[nm] = next_id
            taken.add(next_id)

    nodes: List[KernelNode] = []
    root_id: Optional[int] = None
    for nm in appearance:
        amap = dict(node_decl[nm])
        extra = tuple((k, v) for k, v in node_decl[nm]
                      if k not in KNOWN_NODE_ATTRS and k not in STYLE_ATTRS)
        kind = amap.get("kind", "K")
        node = KernelNode(
            id=ids[nm], kind=kind,
            size=int(float(amap.get("size", "0"))),
            weight_cpu=float(amap.get("weight_cpu", "0")),
            weight_gpu=float(amap.get("weight_gpu", "0")),
            attrs=extra)
        nodes.append(node)
        if kind == SOURCE_KIND and root_id is None:
            root_id = node.id

    edges: List[DataEdge] = []
    for (src, dst, attrs) in edge_decl:
        amap = dict(attrs)
        extra = tuple((k, v) for k, v in attrs
                      if k not in KNOWN_EDGE_ATTRS and k not in STYLE_ATTRS)
        edges.append(DataEdge(
            src=ids[src], dst=ids[dst],
            bytes=int(float(amap.get("bytes", "0"))),
            weight_xfer=float(amap.get("weight_xfer", "0")),
            attrs=extra))

    if root_id is None:
        root_id = 0 if 0 not in taken else max(taken) + 1
        has_pred = {e.dst for e in edges}
        nodes.insert(0, KernelNode(root_id, SOURCE_KIND, 0))
        for n in sorted((n for n in nodes if n.id != root_id), key=lambda n: n.id):
            if n.id not in has_pred:
                edges.append(DataEdge(root_id, n.id))
    return TaskGraph(nodes, edges, root=root_id, name=name)


def _split_statements(line: str) -> List[str]:
    """Split on semicolons outside quotes and brackets."""
    out, buf, depth, quoted = [], [], 0, False
    for ch in line:
        if ch == '"' :
            quoted = not quoted
        elif not quoted and ch == "[":
            depth += 1
        elif not quoted and ch == "]":
            depth -= 1
        if ch == ";" and depth == 0 and not quoted:
            out.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    out.append("".join(buf))
    return out


def _node_attr_pairs(n: KernelNode) -> List[Tuple[str, str]]:
    pairs = [("kind", n.kind), ("size", str(n.size)),
             ("weight_cpu", _num(n.weight_cpu)), ("weight_gpu", _num(n.weight_gpu))]
    pairs.extend(n.attrs)
    return pairs


def _edge_attr_pairs(e: DataEdge) -> List[Tuple[str, str]]:
    pairs = [("bytes", str(e.bytes)), ("weight_xfer", _num(e.weight_xfer))]
    pairs.extend(e.attrs)
    return pairs


def emit_dot(graph: TaskGraph,
             node_extra: Optional[Dict[int, List[Tuple[str, str]]]] = None,
             edge_extra: Optional[Dict[Tuple[int, int], List[Tuple[str, str]]]] = None) -> str:
    """Canonical DOT: nodes ascending by id, then edges by (src, dst); byte-stable."""
    node_extra = node_extra or {}
    edge_extra = edge_extra or {}
    lines = [f"digraph {graph.name} {{"]
    for nid in sorted(graph.nodes):
        n = graph.nodes[nid]
        pairs = _node_attr_pairs(n) + node_extra.get(nid, [])
        lines.append(f"  n{nid} {_fmt_attrs(pairs)};")
    for (u, v) in sorted(graph.edges):
        e = graph.edges[(u, v)]
        pairs = _edge_attr_pairs(e) + edge_extra.get((u, v), [])
        lines.append(f"  n{u} -> n{v} {_fmt_attrs(pairs)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def emit_partitioned_dot(graph: TaskGraph, partition: Partition) -> str:
    """emit_dot plus part/fill-color per group and dashed red styling on cut edges."""
    for nid in graph.kernel_ids():
        if nid not in partition.assignment:
            raise PartitionError(f"partition is missing kernel {nid}")
    node_extra: Dict[int, List[Tuple[str, str]]] = {}
    for nid, group in partition.assignment.items():
        color = CPU_COLOR if group == CPU else GPU_COLOR
        node_extra[nid] = [("part", group), ("style", "filled"), ("fillcolor", color)]
    node_extra[graph.root] = [("part", CPU), ("style", "filled"), ("fillcolor", CPU_COLOR)]
    edge_extra: Dict[Tuple[int, int], List[Tuple[str, str]]] = {}
    for (u, v) in sorted(graph.edges):
        if u == graph.root or v == graph.root:
            continue
        if partition.assignment[u] != partition.assignment[v]:
            edge_extra[(u, v)] = [("style", "dashed"), ("color", "red")]
    return emit_dot(graph, node_extra, edge_extra)


def _scaled(w: float, scale: int) -> int:
    from math import floor
    return max(1, floor(w * scale + 0.5))  # round half-up, clamp to 1


def emit_metis(graph: TaskGraph, node_weight_source: str = GPU,
               scale: int = 100) -> str:
    """Flatten the DAG (root excluded) to the undirected METIS graph format.

    Header is `n m 011`: one integer weight per vertex, weighted edges.
    Vertices are the non-root kernels in ascending id order, 1-based.
    Milliseconds become integers via `scale`, rounded half-up, minimum 1.
    """
    ids = graph.kernel_ids()
    index = {nid: k + 1 for k, nid in enumerate(ids)}
    node_w = {nid: (graph.nodes[nid].weight_gpu if node_weight_source == GPU
                    else graph.nodes[nid].weight_cpu) for nid in ids}
    inter = [e for (u, v), e in sorted(graph.edges.items())
             if u != graph.root and v != graph.root]
    if all(w == 0 for w in node_w.values()) and all(e.weight_xfer == 0 for e in inter):
        raise PartitionError("all weights are zero; cannot integerize for export")
    adj: Dict[int, List[Tuple[int, int]]] = {nid: [] for nid in ids}
    for e in inter:
        w = _scaled(e.weight_xfer, scale)
        adj[e.src].append((index[e.dst], w))
        adj[e.dst].append((index[e.src], w))
    lines = [f"{len(ids)} {len(inter)} 011"]
    for nid in ids:
        parts = [str(_scaled(node_w[nid], scale))]
        for (nbr, w) in sorted(adj[nid]):
            parts.append(f"{nbr} {w}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def parse_partition_file(text: str, graph: TaskGraph,
                         targets: Optional[PartitionTargets] = None,
                         node_weight_source: str = GPU,
                         tolerance: float = 0.03) -> Partition:
    """Read a METIS partition file (one 0/1 line per exported vertex)."""
    ids = graph.kernel_ids()
    values: List[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            v = int(line)
        except ValueError as exc:
            raise PartitionError(f"line {lineno}: not an integer: {line!r}") from exc
        if v not in (0, 1):
            raise PartitionError(f"line {lineno}: group must be 0 or 1, got {v}")
        values.append(v)
    if len(values) != len(ids):
        raise PartitionError(
            f"partition file has {len(values)} lines for {len(ids)} kernels")
    assignment = {nid: (CPU if v == 0 else GPU) for nid, v in zip(ids, values)}
    if targets is None:
        from .costs import workload_ratio
        targets = workload_ratio(graph)
    return _finish(graph, assignment, targets, node_weight_source, tolerance)


def emit_partition_file(partition: Partition, graph: TaskGraph) -> str:
    """Inverse of parse_partition_file (group 0 = CPU, 1 = GPU)."""
    lines = ["0" if partition.assignment[nid] == CPU else "1"
             for nid in graph.kernel_ids()]
    return "\n".join(lines) + "\n"
