"""Enclosing-subgraph extraction, double-radius labeling and node features."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from tact.errors import ContractViolation
from tact.kg import KnowledgeGraph


@dataclass(frozen=True)
class EnclosingSubgraph:
    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int, int], ...]  # (local head, relation, local tail)
    target_u: int
    target_v: int
    labels: tuple[tuple[int, int], ...]

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)


def _bfs(adjacency, seed: int, k: int | None, excluded: frozenset[int], allowed=None) -> dict[int, int]:
    """Undirected hop distances from ``seed`` up to ``k`` (None = unbounded)."""
    dist = {seed: 0}
    queue = deque([seed])
    while queue:
        x = queue.popleft()
        dx = dist[x]
        if k is not None and dx >= k:
            continue
        for y, eid in adjacency[x]:
            if y in dist or eid in excluded:
                continue
            if allowed is not None and y not in allowed:
                continue
            dist[y] = dx + 1
            queue.append(y)
    return dist


def k_hop_neighbors(kg: KnowledgeGraph, node: int, k: int, exclude: Iterable[int] = ()) -> set[int]:
    """Nodes within ``k`` undirected hops of ``node``, seed included."""
    if k < 1:
        raise ContractViolation(f"k must be >= 1, got {k}")
    if not 0 <= node < kg.num_entities:
        raise IndexError(f"node {node} out of range for {kg.num_entities} entities")
    return set(_bfs(kg.undirected_adjacency, node, k, frozenset(exclude)))


def _local_adjacency(n: int, edges) -> list[list[tuple[int, int]]]:
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for i, (h, _, t) in enumerate(edges):
        adj[h].append((t, i))
        if h != t:
            adj[t].append((h, i))
    return adj


def _induced(kg: KnowledgeGraph, nodes: list[int], excluded: frozenset[int]):
    index = {x: i for i, x in enumerate(nodes)}
    edges = []
    for x in nodes:
        for eid in kg.by_head[x]:
            if eid in excluded:
                continue
            t = kg.triples[eid]
            j = index.get(t.tail)
            if j is not None:
                edges.append((eid, index[x], t.rel, j))
    edges.sort()
    return [(h, r, t) for _, h, r, t in edges]


def extract_enclosing_subgraph(
    kg: KnowledgeGraph,
    u: int,
    v: int,
    k: int = 2,
    exclude_edge: Iterable[int] | int | None = None,
    cap: int | None = None,
) -> EnclosingSubgraph:
    """Pruned intersection of the ``k``-hop neighbourhoods of ``u`` and ``v``.

    ``exclude_edge`` (an edge id or a collection of them) is removed from the
    graph for the whole extraction, neighbourhood search included. ``u`` is
    local node 0 and ``v`` local node 1; the rest follow in entity-id order.
    Labels come from ``label_nodes(sub, cap)``; pass ``d - 1`` as ``cap`` to
    fit ``d``-wide one-hot features.
    """
    if u == v:
        raise ContractViolation(f"enclosing subgraph needs distinct targets, got u == v == {u}")
    for node in (u, v):
        if not 0 <= node < kg.num_entities:
            raise IndexError(f"node {node} out of range for {kg.num_entities} entities")
    if exclude_edge is None:
        excluded = frozenset()
    elif isinstance(exclude_edge, (int, np.integer)):
        excluded = frozenset([int(exclude_edge)])
    else:
        excluded = frozenset(int(e) for e in exclude_edge)

    adj = kg.undirected_adjacency
    nu = _bfs(adj, u, k, excluded)
    nv = _bfs(adj, v, k, excluded)
    common = (set(nu) & set(nv)) - {u, v}
    nodes = [u, v] + sorted(common)
    edges = _induced(kg, nodes, excluded)

    # single pruning pass on distances inside the induced subgraph
    local = _local_adjacency(len(nodes), edges)
    du = _bfs(local, 0, None, frozenset())
    dv = _bfs(local, 1, None, frozenset())
    keep = [0, 1] + [
        i for i in range(2, len(nodes)) if du.get(i, k + 1) <= k and dv.get(i, k + 1) <= k
    ]
    if len(keep) != len(nodes):
        nodes = [nodes[i] for i in keep]
        edges = _induced(kg, nodes, excluded)

    sub = EnclosingSubgraph(tuple(nodes), tuple(edges), 0, 1, ())
    labels = label_nodes(sub, cap=cap)
    return EnclosingSubgraph(sub.nodes, sub.edges, 0, 1, tuple(labels))


def label_nodes(sub: EnclosingSubgraph, cap: int | None = None) -> list[tuple[int, int]]:
    """Double-radius labels ``(d(i,u), d(i,v))``.

    ``d(i,u)`` is measured with ``v`` deleted and vice versa. Targets are fixed
    to (0,1) and (1,0). Unreachable nodes and distances above ``cap`` are
    clamped to ``cap``; with ``cap=None`` unreachable nodes get ``len(nodes)``.
    """
    n = sub.num_nodes
    adj = _local_adjacency(n, sub.edges)
    u, v = sub.target_u, sub.target_v
    far = n if cap is None else cap
    du = _bfs(adj, u, None, frozenset(), allowed=set(range(n)) - {v})
    dv = _bfs(adj, v, None, frozenset(), allowed=set(range(n)) - {u})
    labels = []
    for i in range(n):
        if i == u:
            labels.append((0, 1))
        elif i == v:
            labels.append((1, 0))
        else:
            a, b = du.get(i, far), dv.get(i, far)
            labels.append((min(a, far), min(b, far)))
    return labels


def init_node_features(labels, d: int) -> np.ndarray:
    """Rows ``one-hot(d_u) ++ one-hot(d_v)``, each block ``d`` wide."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1, 2)
    if labels.size and (labels.min() < 0 or labels.max() >= d):
        raise ContractViolation(f"label component outside [0, {d}) in node labels")
    out = np.zeros((labels.shape[0], 2 * d))
    rows = np.arange(labels.shape[0])
    out[rows, labels[:, 0]] = 1.0
    out[rows, d + labels[:, 1]] = 1.0
    return out


def dump_subgraph(sub: EnclosingSubgraph, path: str | Path, kg: KnowledgeGraph | None = None) -> None:
    """Debug TSV: ``edge`` rows then ``node`` rows with their labels."""
    ent = (lambda x: str(x)) if kg is None else kg.entity_vocab.item
    rel = (lambda r: str(r)) if kg is None else kg.relation_vocab.item
    with Path(path).open("w", encoding="utf-8") as fh:
        for h, r, t in sub.edges:
            fh.write(f"edge\t{h}\t{rel(r)}\t{t}\n")
        for i, (node, (a, b)) in enumerate(zip(sub.nodes, sub.labels)):
            fh.write(f"node\t{i}\t{ent(node)}\t{a}\t{b}\n")
