import numpy as np
import pytest
from conftest import graphs
from hypothesis import assume, given
from hypothesis import strategies as st
from oracles import central_differences, max_rel_error, rgcn_dense

from tact import autodiff as ad
from tact.autodiff import Tape, Tensor, backward
from tact.errors import ShapeError
from tact.gsn import (
    GsnLayer,
    GsnParams,
    batch_subgraphs,
    encode_batch,
    encode_subgraph,
    rgcn_layer,
    structure_embedding,
)
from tact.subgraph import EnclosingSubgraph, extract_enclosing_subgraph, init_node_features


def sub_of(n, edges, labels=None):
    labels = labels or [(0, 1), (1, 0)] + [(1, 1)] * (n - 2)
    return EnclosingSubgraph(tuple(range(n)), tuple(edges), 0, 1, tuple(labels))


def test_self_loop_only():
    rng = np.random.default_rng(0)
    p = GsnParams.init(2, 3, 1, rng)
    sub = sub_of(2, [])
    batch = batch_subgraphs([sub], 3, 2)
    x = Tensor(batch.features)
    out = rgcn_layer(batch, x, p.layers[0])
    assert np.allclose(out.data, np.maximum(batch.features @ p.layers[0].self_loop.data, 0))


def test_two_nodes_identity_weights():
    d = 2
    eye = Tensor(np.eye(2 * d, d) + np.eye(2 * d, d, -d))
    zero = Tensor(np.zeros((2 * d, d)))
    layer = GsnLayer([eye, zero], zero)  # one relation, inverse messages zeroed
    batch = batch_subgraphs([sub_of(2, [(0, 0, 1)])], d, 1)
    x = Tensor(np.array([[1.0, -2.0, 3.0, 0.5], [0.0, 0.0, 0.0, 0.0]]))
    out = rgcn_layer(batch, x, layer)
    assert out.data[1].tolist() == np.maximum(x.data[0] @ eye.data, 0).tolist()
    assert out.data[0].tolist() == [0.0, 0.0]


@given(graphs(max_entities=12, max_relations=3, max_edges=30), st.integers(1, 3), st.integers(0, 50), st.data())
def test_layer_matches_dense_oracle(kg, k, seed, data):
    assume(kg.num_entities >= 2)
    u = data.draw(st.integers(0, kg.num_entities - 1))
    v = data.draw(st.integers(0, kg.num_entities - 1).filter(lambda x: x != u))
    d = 4
    sub = extract_enclosing_subgraph(kg, u, v, k, cap=d - 1)
    rng = np.random.default_rng(seed)
    p = GsnParams.init(kg.num_relations, d, 2, rng)
    batch = batch_subgraphs([sub], d, kg.num_relations)
    x = init_node_features(sub.labels, d)
    layer0 = p.layers[0]
    got = rgcn_layer(batch, Tensor(x), layer0).data
    want = rgcn_dense(x, sub.edges, kg.num_relations, [w.data for w in layer0.rel], layer0.self_loop.data)
    assert np.allclose(got, want, atol=1e-12, rtol=0)
    # second layer on top
    layer1 = p.layers[1]
    got2 = rgcn_layer(batch, Tensor(got), layer1).data
    want2 = rgcn_dense(want, sub.edges, kg.num_relations, [w.data for w in layer1.rel], layer1.self_loop.data)
    assert np.allclose(got2, want2, atol=1e-12, rtol=0)


def test_two_node_graph_mean():
    p = GsnParams.init(1, 3, 2, np.random.default_rng(1))
    e_g, e_u, e_v = encode_subgraph(sub_of(2, []), p)
    assert np.allclose(e_g.data, (e_u.data + e_v.data) / 2, atol=1e-15)


def test_identical_nodes_give_identical_embeddings():
    d = 3
    w = Tensor(np.random.default_rng(2).uniform(-1, 1, (2 * d, d)))
    layer = GsnLayer([w, w], w)
    p = GsnParams([layer])
    sub = sub_of(2, [(0, 0, 1), (1, 0, 0)], labels=[(1, 1), (1, 1)])
    e_g, e_u, e_v = encode_subgraph(sub, p)
    assert np.allclose(e_g.data, e_u.data) and np.allclose(e_u.data, e_v.data)


def test_manual_single_layer_trace():
    # u -r0-> x, x -r0-> v ; d = 2, L = 1
    d = 2
    sub = EnclosingSubgraph((0, 1, 2), ((0, 0, 2), (2, 0, 1)), 0, 1, ((0, 1), (1, 0), (1, 1)))
    rng = np.random.default_rng(4)
    p = GsnParams.init(1, d, 1, rng)
    W, Winv, W0 = (p.layers[0].rel[0].data, p.layers[0].rel[1].data, p.layers[0].self_loop.data)
    x = init_node_features(sub.labels, d)
    relu = lambda z: np.maximum(z, 0)  # noqa: E731
    h_u = relu(x[0] @ W0 + x[2] @ Winv)  # u receives x via the inverse of u->x
    h_v = relu(x[1] @ W0 + x[2] @ W)  # v receives x via x->v
    h_x = relu(x[2] @ W0 + x[0] @ W + x[1] @ Winv)
    e_g, e_u, e_v = encode_subgraph(sub, p)
    assert np.allclose(e_u.data[0], h_u) and np.allclose(e_v.data[0], h_v)
    assert np.allclose(e_g.data[0], (h_u + h_v + h_x) / 3)


@given(graphs(max_entities=10, max_relations=3, max_edges=25), st.data())
def test_permutation_equivariance(kg, data):
    assume(kg.num_entities >= 2)
    u = data.draw(st.integers(0, kg.num_entities - 1))
    v = data.draw(st.integers(0, kg.num_entities - 1).filter(lambda x: x != u))
    d = 4
    sub = extract_enclosing_subgraph(kg, u, v, 2, cap=d - 1)
    n = sub.num_nodes
    perm = data.draw(st.permutations(range(n)))
    inv = {old: new for new, old in enumerate(perm)}
    shuffled = EnclosingSubgraph(
        tuple(sub.nodes[i] for i in perm),
        tuple((inv[h], r, inv[t]) for h, r, t in sub.edges),
        inv[0],
        inv[1],
        tuple(sub.labels[i] for i in perm),
    )
    p = GsnParams.init(kg.num_relations, d, 2, np.random.default_rng(0))
    a = encode_subgraph(sub, p)
    b = encode_subgraph(shuffled, p)
    for x, y in zip(a, b):
        assert np.allclose(x.data, y.data, atol=1e-12, rtol=0)


def test_batching_equals_separate_runs():
    rng = np.random.default_rng(5)
    p = GsnParams.init(2, 3, 2, rng)
    s1 = sub_of(3, [(0, 0, 2), (2, 1, 1)])
    s2 = sub_of(2, [(1, 1, 0)])
    together = encode_batch(batch_subgraphs([s1, s2], 3, 2), p)
    for i, s in enumerate([s1, s2]):
        alone = encode_subgraph(s, p)
        for x, y in zip(together, alone):
            assert np.allclose(x.data[i], y.data[0], atol=1e-14)


def test_gradients_two_layers():
    rng = np.random.default_rng(6)
    p = GsnParams.init(2, 3, 2, rng)
    subs = [sub_of(4, [(0, 0, 2), (2, 1, 1), (3, 0, 1), (2, 0, 3)], [(0, 1), (1, 0), (1, 1), (2, 1)]), sub_of(2, [])]
    batch = batch_subgraphs(subs, 3, 2)
    probe = Tensor(rng.normal(size=(3, 1)))
    tensors = list(p.tensors().values())

    def f():
        e_g, e_u, e_v = encode_batch(batch, p)
        return ad.sum_all(ad.matmul(ad.add(e_g, ad.scale(e_u, 2.0), e_v), probe))

    with Tape() as tape:
        loss = f()
    analytic = backward(tape, loss, tensors)
    numeric = central_differences(lambda: f().item(), [t.data for t in tensors])
    assert max_rel_error([analytic[t] for t in tensors], numeric) <= 1e-4


def test_structure_embedding():
    z = Tensor(np.zeros((1, 2)))
    assert structure_embedding(z, z, z).data.tolist() == [[0.0] * 6]
    a, b, c = Tensor([[1.0, 2.0]]), Tensor([[3.0, 4.0]]), Tensor([[5.0, 6.0]])
    out = structure_embedding(a, b, c).data[0]
    assert out.tolist() == [1, 2, 3, 4, 5, 6]
    with pytest.raises(ShapeError):
        structure_embedding(a, Tensor([[1.0]]), c)


def test_shape_checks():
    p = GsnParams.init(1, 3, 1, np.random.default_rng(0))
    batch = batch_subgraphs([sub_of(2, [])], 3, 1)
    with pytest.raises(ShapeError):
        rgcn_layer(batch, Tensor(np.zeros((3, 6))), p.layers[0])
    with pytest.raises(ShapeError):
        GsnParams.init(1, 3, 0, np.random.default_rng(0))


def test_parameter_names_and_shapes():
    p = GsnParams.init(3, 4, 2, np.random.default_rng(0))
    t = p.tensors()
    assert t["gsn.l0.rel5"].shape == (8, 4) and t["gsn.l1.rel0"].shape == (4, 4)
    assert t["gsn.l0.self"].shape == (8, 4) and t["gsn.l1.self"].shape == (4, 4)
    assert len(t) == 2 * (6 + 1)
