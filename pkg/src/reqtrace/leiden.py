"""Leiden community detection over the undirected weighted file graph.

Implements the published three-step cycle (fast local moving, partition
refinement, aggregation on the refined partition) against the weighted
modularity objective with a resolution parameter. Node visitation is
driven by a seeded RNG and all tie-breaks are deterministic, so a fixed
(graph, resolution, seed) triple always yields the same partition. The
refinement step uses the zero-temperature limit of the published
randomized merge: a singleton merges into the best-improving
well-connected subcommunity.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass

from .graphs import DepGraph

_EPS = 1e-12


@dataclass(frozen=True)
class Partition:
    community_of: dict[str, int]
    resolution: float
    seed: int

    def communities(self) -> dict[int, tuple[str, ...]]:
        groups: dict[int, list[str]] = {}
        for node, cid in self.community_of.items():
            groups.setdefault(cid, []).append(node)
        return {cid: tuple(sorted(members)) for cid, members in groups.items()}


def undirected_weights(graph: DepGraph) -> dict[tuple[str, str], float]:
    """Collapse a directed graph: weight{u,v} sums both directed weights."""
    weights: dict[tuple[str, str], float] = {}
    for (src, dst), w in graph.edge_weight.items():
        key = (src, dst) if src <= dst else (dst, src)
        weights[key] = weights.get(key, 0.0) + float(w)
    return weights


def modularity(
    nodes: tuple[str, ...] | list[str],
    weights: dict[tuple[str, str], float],
    community_of: dict[str, int],
    resolution: float = 1.0,
) -> float:
    """Weighted modularity of a partition of an undirected graph."""
    m = sum(weights.values())
    if m <= 0:
        return 0.0
    deg = {n: 0.0 for n in nodes}
    internal: dict[int, float] = {}
    tot: dict[int, float] = {}
    for (u, v), w in weights.items():
        if u == v:
            deg[u] += 2.0 * w
        else:
            deg[u] += w
            deg[v] += w
        if community_of[u] == community_of[v]:
            internal[community_of[u]] = internal.get(community_of[u], 0.0) + 2.0 * w
    for n in nodes:
        tot[community_of[n]] = tot.get(community_of[n], 0.0) + deg[n]
    two_m = 2.0 * m
    return sum(
        internal.get(c, 0.0) / two_m - resolution * (tot[c] / two_m) ** 2 for c in tot
    )


class _Level:
    """Integer-indexed undirected weighted graph used inside the algorithm."""

    def __init__(self, n: int):
        self.n = n
        self.adj: list[dict[int, float]] = [dict() for _ in range(n)]
        self.self_w = [0.0] * n
        self.deg = [0.0] * n

    def add(self, u: int, v: int, w: float) -> None:
        if u == v:
            self.self_w[u] += w
            self.deg[u] += 2.0 * w
        else:
            self.adj[u][v] = self.adj[u].get(v, 0.0) + w
            self.adj[v][u] = self.adj[v].get(u, 0.0) + w
            self.deg[u] += w
            self.deg[v] += w

    @property
    def total_weight(self) -> float:
        return sum(self.deg) / 2.0


def _delta_q(level: _Level, k_v, e_old, e_new, tot_old, tot_new, resolution, m) -> float:
    """Modularity change when a node of degree k_v moves between communities.

    tot_old includes the node's own degree; tot_new does not.
    """
    return (e_new - e_old) / m - resolution * k_v * (tot_new - tot_old + k_v) / (2.0 * m * m)


def _local_move(level: _Level, membership: list[int], resolution: float, rng: random.Random) -> bool:
    m = level.total_weight
    tot: dict[int, float] = {}
    for v in range(level.n):
        tot[membership[v]] = tot.get(membership[v], 0.0) + level.deg[v]
    order = list(range(level.n))
    rng.shuffle(order)
    queue = deque(order)
    queued = [True] * level.n
    moved_any = False

    while queue:
        v = queue.popleft()
        queued[v] = False
        cur = membership[v]
        links: dict[int, float] = {}
        for nbr, w in level.adj[v].items():
            links[membership[nbr]] = links.get(membership[nbr], 0.0) + w
        e_old = links.get(cur, 0.0)
        best, best_gain = cur, 0.0
        empty_label = None
        candidates = sorted(links)
        if len(links) == 0 or tot.get(cur, 0.0) > level.deg[v]:
            # an empty community is a legal target when v is not alone
            empty_label = max(tot, default=-1) + 1
            candidates.append(empty_label)
        for cand in candidates:
            if cand == cur:
                continue
            gain = _delta_q(
                level,
                level.deg[v],
                e_old,
                links.get(cand, 0.0),
                tot.get(cur, 0.0),
                tot.get(cand, 0.0),
                resolution,
                m,
            )
            if gain > best_gain + _EPS:
                best, best_gain = cand, gain
        if best != cur:
            membership[v] = best
            tot[cur] = tot.get(cur, 0.0) - level.deg[v]
            tot[best] = tot.get(best, 0.0) + level.deg[v]
            moved_any = True
            for nbr in sorted(level.adj[v]):
                if membership[nbr] != best and not queued[nbr]:
                    queue.append(nbr)
                    queued[nbr] = True
    return moved_any


def _refine(level: _Level, membership: list[int], resolution: float, rng: random.Random) -> list[int]:
    """Split each community into well-connected merged subcommunities."""
    m = level.total_weight
    refined = list(range(level.n))
    ref_tot = list(level.deg)
    ref_size = [1] * level.n

    comm_tot: dict[int, float] = {}
    for v in range(level.n):
        comm_tot[membership[v]] = comm_tot.get(membership[v], 0.0) + level.deg[v]

    # connectivity of each node to the rest of its community
    ext: list[float] = [0.0] * level.n
    for v in range(level.n):
        ext[v] = sum(w for nbr, w in level.adj[v].items() if membership[nbr] == membership[v])

    order = list(range(level.n))
    rng.shuffle(order)
    for v in order:
        if ref_size[refined[v]] > 1:
            continue  # only nodes still alone in their subcommunity may merge
        c = membership[v]
        k_v = level.deg[v]
        if ext[v] + _EPS < resolution * k_v * (comm_tot[c] - k_v) / (2.0 * m):
            continue  # v is not well connected within its community

        links: dict[int, float] = {}
        for nbr, w in level.adj[v].items():
            if membership[nbr] == c:
                links[refined[nbr]] = links.get(refined[nbr], 0.0) + w
        links.pop(refined[v], None)
        best, best_gain = None, 0.0
        for sub in sorted(links):
            sub_tot = ref_tot[sub]
            # subcommunity must itself be well connected within the community
            sub_ext = _subcommunity_ext(level, membership, refined, sub, c)
            if sub_ext + _EPS < resolution * sub_tot * (comm_tot[c] - sub_tot) / (2.0 * m):
                continue
            gain = _delta_q(level, k_v, 0.0, links[sub], ref_tot[refined[v]], sub_tot, resolution, m)
            if gain > best_gain + _EPS:
                best, best_gain = sub, gain
        if best is not None:
            old = refined[v]
            refined[v] = best
            ref_tot[best] += k_v
            ref_tot[old] -= k_v
            ref_size[best] += ref_size[old]
            ref_size[old] = 0
    return refined


def _subcommunity_ext(level, membership, refined, sub, comm) -> float:
    total = 0.0
    for v in range(level.n):
        if refined[v] != sub:
            continue
        for nbr, w in level.adj[v].items():
            if membership[nbr] == comm and refined[nbr] != sub:
                total += w
    return total


def _aggregate(level: _Level, refined: list[int]) -> tuple[_Level, list[int]]:
    labels: dict[int, int] = {}
    node_map = [0] * level.n
    for v in range(level.n):
        if refined[v] not in labels:
            labels[refined[v]] = len(labels)
        node_map[v] = labels[refined[v]]
    agg = _Level(len(labels))
    for v in range(level.n):
        if level.self_w[v]:
            agg.add(node_map[v], node_map[v], level.self_w[v])
        for nbr, w in level.adj[v].items():
            if v < nbr:
                agg.add(node_map[v], node_map[nbr], w)
    return agg, node_map


def _split_disconnected(names, weights, community_of) -> dict[str, int]:
    """Split any disconnected community into its connected components.

    Splitting a disconnected community never lowers modularity, and the
    connected-communities guarantee must hold unconditionally.
    """
    adj: dict[str, set[str]] = {n: set() for n in names}
    for (u, v), w in weights.items():
        if u != v and w > 0:
            adj[u].add(v)
            adj[v].add(u)
    groups: dict[int, list[str]] = {}
    for n in names:
        groups.setdefault(community_of[n], []).append(n)
    result: dict[str, int] = {}
    next_id = 0
    for cid in sorted(groups):
        members = set(groups[cid])
        unseen = set(members)
        while unseen:
            start = min(unseen)
            stack, comp = [start], {start}
            unseen.discard(start)
            while stack:
                node = stack.pop()
                for nbr in adj[node]:
                    if nbr in unseen:
                        unseen.discard(nbr)
                        comp.add(nbr)
                        stack.append(nbr)
            for node in comp:
                result[node] = next_id
            next_id += 1
    return result


def _relabel(names: list[str], community_of: dict[str, int]) -> dict[str, int]:
    """Contiguous ids from 0, ordered by each community's smallest member."""
    first_member: dict[int, str] = {}
    for n in sorted(names):
        cid = community_of[n]
        if cid not in first_member:
            first_member[cid] = n
    ordering = sorted(first_member, key=lambda cid: first_member[cid])
    remap = {old: new for new, old in enumerate(ordering)}
    return {n: remap[community_of[n]] for n in names}


def leiden_partition(fdg: DepGraph, resolution: float = 1.0, seed: int = 0) -> Partition:
    """Partition an (interpreted as undirected) dependency graph.

    Guarantees: deterministic for fixed inputs, every community internally
    connected, and modularity at least that of the singleton partition.
    """
    names = sorted(fdg.nodes)
    weights = undirected_weights(fdg)
    if not names:
        return Partition(community_of={}, resolution=resolution, seed=seed)

    index = {n: i for i, n in enumerate(names)}
    level = _Level(len(names))
    for (u, v), w in sorted(weights.items()):
        level.add(index[u], index[v], w)

    rng = random.Random(seed)
    carrier = list(range(len(names)))  # original node -> current level node
    membership = list(range(level.n))

    if level.total_weight > 0:
        for _ in range(20):
            _local_move(level, membership, resolution, rng)
            n_comms = len(set(membership))
            if n_comms == level.n:
                break
            refined = _refine(level, membership, resolution, rng)
            if len(set(refined)) == level.n:
                break  # nothing merged; aggregation would not shrink the graph
            agg, node_map = _aggregate(level, refined)
            new_membership = [0] * agg.n
            for v in range(level.n):
                new_membership[node_map[v]] = membership[v]
            carrier = [node_map[carrier[i]] for i in range(len(names))]
            level = agg
            # compact the carried-over community labels
            seen: dict[int, int] = {}
            membership = []
            for label in new_membership:
                if label not in seen:
                    seen[label] = len(seen)
                membership.append(seen[label])

    community_of = {names[i]: membership[carrier[i]] for i in range(len(names))}
    community_of = _split_disconnected(names, weights, community_of)
    community_of = _relabel(names, community_of)
    return Partition(community_of=community_of, resolution=resolution, seed=seed)


def capped_partition(
    fdg: DepGraph, resolution: float, seed: int, max_files: int, _depth: int = 0
) -> Partition:
    """Leiden partition with oversized communities re-split recursively.

    A community larger than max_files is re-clustered on its induced
    subgraph at twice the resolution, up to a fixed recursion depth.
    """
    partition = leiden_partition(fdg, resolution, seed)
    if max_files <= 0 or _depth >= 8:
        return partition
    result = dict(partition.community_of)
    next_id = max(result.values(), default=-1) + 1
    for cid, members in sorted(partition.communities().items()):
        if len(members) <= max_files:
            continue
        member_set = set(members)
        sub_weights = {
            (u, v): w for (u, v), w in fdg.edge_weight.items() if u in member_set and v in member_set
        }
        subgraph = DepGraph(
            level=fdg.level,
            nodes=tuple(sorted(member_set)),
            edges=frozenset(sub_weights),
            edge_weight=sub_weights,
        )
        sub = capped_partition(subgraph, resolution * 2.0, seed, max_files, _depth + 1)
        sub_ids = sorted(set(sub.community_of.values()))
        if len(sub_ids) <= 1:
            continue  # could not be split further; accept oversized
        for node in members:
            result[node] = next_id + sub.community_of[node]
        next_id += len(sub_ids)
    return Partition(
        community_of=_relabel(sorted(fdg.nodes), result), resolution=resolution, seed=seed
    )
