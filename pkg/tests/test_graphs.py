import random

import pytest

from conftest import random_snapshot
from reqtrace.errors import ReqtraceError
from reqtrace.graphs import (
    build_cdg,
    build_fdg,
    condense_to_dag,
    make_graph,
    strongly_connected_components,
    to_dot,
    topological_order,
)


def random_digraph(seed, max_nodes=200):
    rng = random.Random(seed)
    n = rng.randrange(1, max_nodes + 1)
    nodes = [f"n{i:03d}" for i in range(n)]
    edges = set()
    for _ in range(rng.randrange(0, 3 * n)):
        u, v = rng.choice(nodes), rng.choice(nodes)
        edges.add((u, v))
    return make_graph("component", nodes, edges)


def test_empty_snapshot_builds_empty_graph():
    snapshot = random_snapshot(0, n_components=0, n_files=0)
    cdg = build_cdg(snapshot)
    assert cdg.nodes == () and cdg.edges == frozenset()


def test_cdg_contains_fixture_call_edge(auth_snapshot):
    cdg = build_cdg(auth_snapshot)
    assert (
        "UserLogin.java::UserLogin.login",
        "UserRegistration.java::UserRegistration.checkPassword",
    ) in cdg.edges


@pytest.mark.parametrize("seed", [3, 11, 99])
def test_cdg_edge_count_matches_pair_enumeration_oracle(seed):
    snapshot = random_snapshot(seed)
    cdg = build_cdg(snapshot)
    oracle = {
        (c.id, dep)
        for c in snapshot.components
        for dep in c.depends_on
        if c.id != dep
    }
    assert cdg.edges == frozenset(oracle)


def test_fdg_single_file_has_no_edges():
    snapshot = random_snapshot(5, n_components=10, n_files=1)
    cdg = build_cdg(snapshot)
    fdg = build_fdg(snapshot, cdg)
    assert len(fdg.nodes) == 1 and fdg.edges == frozenset()


def test_fdg_fixture_edge_and_weight(auth_snapshot):
    cdg = build_cdg(auth_snapshot)
    fdg = build_fdg(auth_snapshot, cdg)
    edge = ("UserLogin.java", "UserRegistration.java")
    assert edge in fdg.edges
    assert fdg.edge_weight[edge] >= 1


@pytest.mark.parametrize("seed", [2, 21, 77])
def test_fdg_weights_match_brute_force_crossing_count(seed):
    snapshot = random_snapshot(seed)
    cdg = build_cdg(snapshot)
    fdg = build_fdg(snapshot, cdg)
    file_of = {c.id: c.file_path for c in snapshot.components}
    oracle = {}
    for src, dst in cdg.edges:
        f1, f2 = file_of[src], file_of[dst]
        if f1 != f2:
            oracle[(f1, f2)] = oracle.get((f1, f2), 0) + 1
    assert fdg.edge_weight == oracle


def test_fdg_cdg_consistency(auth_snapshot):
    cdg = build_cdg(auth_snapshot)
    fdg = build_fdg(auth_snapshot, cdg)
    file_of = {c.id: c.file_path for c in auth_snapshot.components}
    collapsed = {
        (file_of[u], file_of[v]) for u, v in cdg.edges if file_of[u] != file_of[v]
    }
    assert collapsed == set(fdg.edges)


# ---------------------------------------------------------------------------
# condensation


def test_acyclic_graph_condenses_to_itself():
    graph = make_graph("component", "abc", {("a", "b"), ("b", "c")})
    result = condense_to_dag(graph)
    assert result.removed_edges == ()
    assert result.dag.edges == graph.edges


def test_three_cycle_removes_exactly_the_back_edge():
    graph = make_graph("component", "abc", {("a", "b"), ("b", "c"), ("c", "a")})
    result = condense_to_dag(graph)
    assert result.removed_edges == (("c", "a"),)
    assert topological_order(result.dag) == ["c", "b", "a"]


def test_two_disjoint_two_cycles_remove_one_edge_each():
    graph = make_graph("component", "abcd", {("a", "b"), ("b", "a"), ("c", "d"), ("d", "c")})
    result = condense_to_dag(graph)
    assert len(result.removed_edges) == 2
    topological_order(result.dag)  # must not raise
    removed_sources = {edge[0] for edge in result.removed_edges}
    assert removed_sources == {"b", "d"}


def test_scc_members_recorded():
    graph = make_graph("component", "abcd", {("a", "b"), ("b", "a"), ("c", "d")})
    result = condense_to_dag(graph)
    assert result.scc_members == {"a": ("a", "b")}
    sccs = strongly_connected_components(graph)
    assert ("a", "b") in sccs


def test_removed_plus_dag_reconstructs_original():
    graph = make_graph("component", "abcde", {("a", "b"), ("b", "c"), ("c", "a"), ("d", "e"), ("e", "d")})
    result = condense_to_dag(graph)
    rebuilt = set(result.dag.edges) | set(result.removed_edges)
    assert rebuilt == set(graph.edges)
    assert not set(result.dag.edges) & set(result.removed_edges)


# ---------------------------------------------------------------------------
# topological order


def test_topological_order_empty():
    assert topological_order(make_graph("component", [], [])) == []


def test_dependencies_come_first():
    graph = make_graph("component", "ab", {("a", "b")})  # a depends on b
    assert topological_order(graph) == ["b", "a"]


def test_ties_break_lexicographically():
    graph = make_graph("component", ["c", "a", "b"], set())
    assert topological_order(graph) == ["a", "b", "c"]


def test_random_dag_order_satisfies_every_edge():
    rng = random.Random(17)
    nodes = [f"n{i:02d}" for i in range(50)]
    edges = set()
    for _ in range(120):
        i, j = sorted(rng.sample(range(50), 2))
        edges.add((nodes[j], nodes[i]))  # later nodes depend on earlier ones
    graph = make_graph("component", nodes, edges)
    order = topological_order(graph)
    position = {n: i for i, n in enumerate(order)}
    for u, v in graph.edges:
        assert position[v] < position[u]


def test_cycle_raises_with_cycle_named():
    graph = make_graph("component", "ab", {("a", "b"), ("b", "a")})
    with pytest.raises(ReqtraceError, match="cycle"):
        topological_order(graph)


def test_condensation_always_admits_topological_order_100_graphs():
    for seed in range(100):
        graph = random_digraph(seed, max_nodes=60)
        result = condense_to_dag(graph)
        order = topological_order(result.dag)
        position = {n: i for i, n in enumerate(order)}
        for u, v in result.dag.edges:
            assert position[v] < position[u]


def test_dot_export_mentions_nodes_and_edges(auth_snapshot):
    cdg = build_cdg(auth_snapshot)
    dot = to_dot({"cdg": cdg})
    assert "digraph" in dot
    assert "UserLogin.java::UserLogin.login" in dot
