"""Dependency graphs: construction, cycle condensation, topological order.

Edge direction follows the dependency reading: an edge u -> v means u
depends on v. Topological order therefore emits v before u, so every
node is processed after all of its dependencies.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .errors import ReqtraceError
from .model import RepositorySnapshot


@dataclass(frozen=True)
class DepGraph:
    level: str  # "component" | "file"
    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    edge_weight: dict[tuple[str, str], int] = field(default_factory=dict, compare=False)

    def successors(self, node: str) -> list[str]:
        return sorted(dst for src, dst in self.edges if src == node)

    def adjacency(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for src, dst in sorted(self.edges):
            adj[src].append(dst)
        return adj

    def reverse_adjacency(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for src, dst in sorted(self.edges):
            adj[dst].append(src)
        return adj


@dataclass(frozen=True)
class Condensation:
    dag: DepGraph
    removed_edges: tuple[tuple[str, str], ...]
    scc_members: dict[str, tuple[str, ...]] = field(default_factory=dict, compare=False)


def make_graph(level: str, nodes, edges, weights=None) -> DepGraph:
    """Normalize a graph: sorted nodes, deduplicated edges, no self-loops."""
    node_tuple = tuple(sorted(set(nodes)))
    node_set = set(node_tuple)
    clean = frozenset(
        (src, dst) for src, dst in edges if src != dst and src in node_set and dst in node_set
    )
    weight = {e: (weights or {}).get(e, 1) for e in clean}
    return DepGraph(level=level, nodes=node_tuple, edges=clean, edge_weight=weight)


def build_cdg(snapshot: RepositorySnapshot) -> DepGraph:
    """Component dependency graph straight from depends_on edges."""
    edges = []
    for comp in snapshot.components:
        for dep in comp.depends_on:
            edges.append((comp.id, dep))
    return make_graph("component", (c.id for c in snapshot.components), edges)


def build_fdg(snapshot: RepositorySnapshot, cdg: DepGraph) -> DepGraph:
    """File dependency graph; weight counts component edges crossing a file pair."""
    file_of = {c.id: c.file_path for c in snapshot.components}
    weights: dict[tuple[str, str], int] = {}
    for src, dst in cdg.edges:
        f1, f2 = file_of[src], file_of[dst]
        if f1 != f2:
            weights[(f1, f2)] = weights.get((f1, f2), 0) + 1
    return make_graph("file", (f.path for f in snapshot.files), weights.keys(), weights)


def strongly_connected_components(graph: DepGraph) -> list[tuple[str, ...]]:
    """Tarjan's algorithm, iterative, deterministic node and neighbor order."""
    adj = graph.adjacency()
    index: dict[str, int] = {}
    lowlink: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = 0
    sccs: list[tuple[str, ...]] = []

    for root in graph.nodes:
        if root in index:
            continue
        work = [(root, iter(adj[root]))]
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = lowlink[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(adj[nxt])))
                    advanced = True
                    break
                if nxt in on_stack:
                    lowlink[node] = min(lowlink[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
            if lowlink[node] == index[node]:
                members = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    members.append(w)
                    if w == node:
                        break
                sccs.append(tuple(sorted(members)))
    return sccs


def condense_to_dag(graph: DepGraph) -> Condensation:
    """Break cycles by removing every back edge of a deterministic DFS.

    Roots are visited in lexicographic order, as are neighbors, so the
    removed-edge list is reproducible for a given graph.
    """
    adj = graph.adjacency()
    color: dict[str, int] = {n: 0 for n in graph.nodes}  # 0 white, 1 gray, 2 black
    removed: list[tuple[str, str]] = []

    for root in graph.nodes:
        if color[root] != 0:
            continue
        color[root] = 1
        work: list[tuple[str, iter]] = [(root, iter(adj[root]))]
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if color[nxt] == 1:
                    removed.append((node, nxt))
                elif color[nxt] == 0:
                    color[nxt] = 1
                    work.append((nxt, iter(adj[nxt])))
                    advanced = True
                    break
            if not advanced:
                color[node] = 2
                work.pop()

    removed_set = set(removed)
    dag = make_graph(
        graph.level,
        graph.nodes,
        (e for e in graph.edges if e not in removed_set),
        {e: w for e, w in graph.edge_weight.items() if e not in removed_set},
    )
    scc_members = {
        members[0]: members for members in strongly_connected_components(graph) if len(members) > 1
    }
    return Condensation(dag=dag, removed_edges=tuple(removed), scc_members=scc_members)


def topological_order(dag: DepGraph) -> list[str]:
    """Dependencies-first order: for every edge u -> v, v precedes u.

    Kahn's algorithm over a min-heap of node ids, so ties always break
    lexicographically.
    """
    pending = {node: len(deps) for node, deps in dag.adjacency().items()}
    dependents = dag.reverse_adjacency()
    ready = [node for node, count in pending.items() if count == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        node = heapq.heappop(ready)
        order.append(node)
        for dep in dependents[node]:
            pending[dep] -= 1
            if pending[dep] == 0:
                heapq.heappush(ready, dep)
    if len(order) != len(dag.nodes):
        cycle = _find_cycle(dag, {n for n, c in pending.items() if c > 0})
        raise ReqtraceError(f"graph contains a cycle: {' -> '.join(cycle)}")
    return order


def _find_cycle(graph: DepGraph, candidates: set[str]) -> list[str]:
    adj = graph.adjacency()
    start = min(candidates)
    seen: list[str] = []
    node = start
    while node not in seen:
        seen.append(node)
        node = next(n for n in adj[node] if n in candidates)
    loop = seen[seen.index(node):] + [node]
    return loop


def to_dot(graphs: dict[str, DepGraph]) -> str:
    """Graphviz export of one or more graphs as labeled subgraphs."""
    lines = ["digraph reqtrace {"]
    for gi, (label, graph) in enumerate(sorted(graphs.items())):
        lines.append(f'  subgraph cluster_{gi} {{ label="{label}";')
        for node in graph.nodes:
            lines.append(f'    "{label}/{node}";')
        for src, dst in sorted(graph.edges):
            weight = graph.edge_weight.get((src, dst), 1)
            attr = f' [label="{weight}"]' if weight != 1 else ""
            lines.append(f'    "{label}/{src}" -> "{label}/{dst}"{attr};')
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_dict(graph: DepGraph) -> dict:
    return {
        "level": graph.level,
        "nodes": list(graph.nodes),
        "edges": [
            {"from": src, "to": dst, "weight": graph.edge_weight.get((src, dst), 1)}
            for src, dst in sorted(graph.edges)
        ],
    }


def graph_from_dict(doc: dict) -> DepGraph:
    weights = {(e["from"], e["to"]): e.get("weight", 1) for e in doc["edges"]}
    return make_graph(doc["level"], doc["nodes"], weights.keys(), weights)
