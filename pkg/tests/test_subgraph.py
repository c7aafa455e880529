import numpy as np
import pytest
from conftest import graphs, random_graph
from hypothesis import assume, given
from hypothesis import strategies as st
from oracles import all_pairs_distances, dense_adjacency, khop_oracle

from tact.errors import ContractViolation
from tact.kg import build_graph, from_ids
from tact.subgraph import (
    dump_subgraph,
    extract_enclosing_subgraph,
    init_node_features,
    k_hop_neighbors,
    label_nodes,
)


def ids(kg, *names):
    return [kg.entity_vocab.id(n) for n in names]


def test_khop_path():
    kg = build_graph([("a", "r", "b"), ("b", "r", "c")])
    a, b, c = ids(kg, "a", "b", "c")
    assert k_hop_neighbors(kg, a, 1) == {a, b}
    assert k_hop_neighbors(kg, a, 2) == {a, b, c}


def test_khop_ignores_direction():
    kg = build_graph([("b", "r", "a"), ("c", "r", "b")])
    a, b, c = ids(kg, "a", "b", "c")
    assert k_hop_neighbors(kg, a, 2) == {a, b, c}


def test_khop_out_of_range():
    kg = build_graph([("a", "r", "b")])
    with pytest.raises(IndexError):
        k_hop_neighbors(kg, 5, 1)


@given(graphs(max_entities=15, max_edges=30, reflexive=True), st.integers(1, 4), st.data())
def test_khop_matches_matrix_powers(kg, k, data):
    node = data.draw(st.integers(0, kg.num_entities - 1))
    adj = dense_adjacency(kg.num_entities, [t.as_tuple() for t in kg.triples])
    assert k_hop_neighbors(kg, node, k) == khop_oracle(adj, node, k)


def test_triangle_target_edge_removed():
    kg = build_graph([("u", "r", "x"), ("x", "r", "v"), ("u", "s", "v")])
    u, v, x = ids(kg, "u", "v", "x")
    sub = extract_enclosing_subgraph(kg, u, v, 2, exclude_edge=kg.edges_of(u, 1, v))
    assert set(sub.nodes) == {u, v, x}
    assert all(r != 1 for _, r, _ in sub.edges)
    assert len(sub.edges) == 2


def test_no_common_neighbour():
    kg = build_graph([("u", "r", "a"), ("v", "r", "b")])
    u, v = ids(kg, "u", "v")
    sub = extract_enclosing_subgraph(kg, u, v, 2)
    assert sub.nodes == (u, v) and sub.edges == ()


def test_chain_keeps_inner_nodes():
    kg = build_graph([("u", "r", "a"), ("a", "r", "b"), ("b", "r", "v")])
    u, v, a, b = ids(kg, "u", "v", "a", "b")
    sub = extract_enclosing_subgraph(kg, u, v, 2)
    assert set(sub.nodes) == {u, v, a, b}
    assert sub.nodes[:2] == (u, v)


def test_same_endpoints_rejected():
    kg = build_graph([("u", "r", "a")])
    with pytest.raises(ContractViolation):
        extract_enclosing_subgraph(kg, 0, 0, 2)


def test_labels_examples():
    kg = build_graph([("u", "r", "x"), ("x", "r", "v")])
    u, v, x = ids(kg, "u", "v", "x")
    sub = extract_enclosing_subgraph(kg, u, v, 2)
    labels = dict(zip(sub.nodes, sub.labels))
    assert labels[u] == (0, 1) and labels[v] == (1, 0) and labels[x] == (1, 1)


def test_label_clamped_when_only_reachable_through_target():
    # u - x - v - y with k=3: y is within 3 hops of u, but only through v
    kg = build_graph([("u", "r", "x"), ("x", "r", "v"), ("v", "r", "y")])
    u, v, y = ids(kg, "u", "v", "y")
    sub = extract_enclosing_subgraph(kg, u, v, 3, cap=7)
    labels = dict(zip(sub.nodes, sub.labels))
    assert labels[y] == (7, 1)
    assert label_nodes(sub, cap=2)[sub.nodes.index(y)] == (2, 1)


def test_features_examples():
    assert init_node_features([(0, 1)], 4).tolist() == [[1, 0, 0, 0, 0, 1, 0, 0]]
    assert init_node_features([(2, 2)], 4).tolist() == [[0, 0, 1, 0, 0, 0, 1, 0]]
    with pytest.raises(ContractViolation):
        init_node_features([(4, 0)], 4)


def _random_case(data, kg):
    assume(kg.num_entities >= 2)
    u = data.draw(st.integers(0, kg.num_entities - 1))
    v = data.draw(st.integers(0, kg.num_entities - 1).filter(lambda x: x != u))
    return u, v


@given(graphs(max_entities=12, max_edges=30), st.integers(1, 3), st.data())
def test_extraction_matches_oracle(kg, k, data):
    u, v = _random_case(data, kg)
    edges = [t.as_tuple() for t in kg.triples]
    skip = set(data.draw(st.sets(st.integers(0, max(len(edges) - 1, 0)), max_size=2))) if edges else set()
    adj = dense_adjacency(kg.num_entities, edges, skip)
    common = (khop_oracle(adj, u, k) & khop_oracle(adj, v, k)) | {u, v}
    # induce, then drop nodes farther than k from either target inside the induced graph
    node_list = sorted(common)
    induced = np.zeros_like(adj)
    induced[np.ix_(node_list, node_list)] = adj[np.ix_(node_list, node_list)]
    dist = all_pairs_distances(induced, removed=set(range(kg.num_entities)) - common)
    kept = {i for i in common if i in (u, v) or (dist[i, u] <= k and dist[i, v] <= k)}

    sub = extract_enclosing_subgraph(kg, u, v, k, exclude_edge=skip, cap=31)
    assert sub.nodes[:2] == (u, v)
    assert set(sub.nodes) == kept
    got_edges = sorted((sub.nodes[h], r, sub.nodes[t]) for h, r, t in sub.edges)
    want = sorted(e for i, e in enumerate(edges) if i not in skip and e[0] in kept and e[2] in kept)
    assert got_edges == want

    # labels: distances with the other target deleted, clamped at the cap
    local = dense_adjacency(sub.num_nodes, sub.edges)
    du = all_pairs_distances(local, removed={1})[0]
    dv = all_pairs_distances(local, removed={0})[1]
    for i, lab in enumerate(sub.labels):
        if i == 0:
            assert lab == (0, 1)
        elif i == 1:
            assert lab == (1, 0)
        else:
            assert lab == (int(min(du[i], 31)), int(min(dv[i], 31)))


@given(graphs(max_entities=12, max_edges=30), st.data())
def test_target_triple_never_in_subgraph(kg, data):
    assume(len(kg) > 0)
    eid = data.draw(st.integers(0, len(kg) - 1))
    t = kg.triples[eid]
    excl = kg.edges_of(t.head, t.rel, t.tail)
    sub = extract_enclosing_subgraph(kg, t.head, t.tail, 2, exclude_edge=excl)
    assert (0, t.rel, 1) not in sub.edges


@given(graphs(max_entities=12, max_edges=30), st.integers(1, 3), st.data())
def test_swap_symmetry(kg, k, data):
    u, v = _random_case(data, kg)
    a = extract_enclosing_subgraph(kg, u, v, k)
    b = extract_enclosing_subgraph(kg, v, u, k)
    assert set(a.nodes) == set(b.nodes)
    la = dict(zip(a.nodes, a.labels))
    lb = dict(zip(b.nodes, b.labels))
    for n in a.nodes:
        assert la[n] == lb[n][::-1]
    ea = sorted((a.nodes[h], r, a.nodes[t]) for h, r, t in a.edges)
    eb = sorted((b.nodes[h], r, b.nodes[t]) for h, r, t in b.edges)
    assert ea == eb


@given(graphs(max_entities=12, max_edges=30), st.integers(1, 3), st.integers(2, 8), st.data())
def test_feature_rows_sum_to_two(kg, k, d, data):
    u, v = _random_case(data, kg)
    sub = extract_enclosing_subgraph(kg, u, v, k, cap=d - 1)
    x = init_node_features(sub.labels, d)
    assert x.shape == (sub.num_nodes, 2 * d)
    assert (x.sum(axis=1) == 2).all()


def test_dump(tmp_path):
    kg = build_graph([("u", "r", "x"), ("x", "r", "v")])
    sub = extract_enclosing_subgraph(kg, 0, 2, 2)
    dump_subgraph(sub, tmp_path / "s.tsv", kg)
    lines = (tmp_path / "s.tsv").read_text().splitlines()
    assert sum(line.startswith("edge") for line in lines) == 2
    assert "node\t0\tu\t0\t1" in lines


def test_pruned_distances_within_k(rng):
    """After the single pruning pass every node stays within k of both targets."""
    violations = 0
    for _ in range(300):
        kg = random_graph(rng, num_entities=14, num_relations=2, num_edges=int(rng.integers(5, 35)))
        u, v = (int(x) for x in rng.choice(14, size=2, replace=False))
        sub = extract_enclosing_subgraph(kg, u, v, 2)
        dist = all_pairs_distances(dense_adjacency(sub.num_nodes, sub.edges))
        for i in range(2, sub.num_nodes):
            if dist[i, 0] > 2 or dist[i, 1] > 2:
                violations += 1
    assert violations == 0


def test_from_ids_graph_extraction_is_deterministic(rng):
    kg = random_graph(rng, num_entities=20, num_relations=3, num_edges=50)
    a = extract_enclosing_subgraph(kg, 0, 1, 2, cap=15)
    b = extract_enclosing_subgraph(from_ids([t.as_tuple() for t in kg.triples], 20, 3), 0, 1, 2, cap=15)
    assert a == b
