"""R-GCN encoder over enclosing subgraphs.

Subgraphs are batched as one disjoint union. Each original relation ``r``
carries messages head -> tail under type ``r`` and tail -> head under type
``r + |R|``; messages into node ``i`` of type ``r`` are averaged over
``c_{i,r}`` (the number of such messages).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from tact import autodiff as ad
from tact.autodiff import Tensor
from tact.errors import ShapeError
from tact.subgraph import EnclosingSubgraph, init_node_features


@dataclass
class GsnLayer:
    rel: list[Tensor]  # 2|R| matrices, d_in x d
    self_loop: Tensor  # d_in x d


@dataclass
class GsnParams:
    layers: list[GsnLayer]

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def tensors(self) -> dict[str, Tensor]:
        out = {}
        for k, layer in enumerate(self.layers):
            for r, w in enumerate(layer.rel):
                out[f"gsn.l{k}.rel{r}"] = w
            out[f"gsn.l{k}.self"] = layer.self_loop
        return out

    @classmethod
    def init(cls, num_relations: int, d: int, num_layers: int, rng: np.random.Generator) -> "GsnParams":
        if num_layers < 1:
            raise ShapeError(f"need at least one R-GCN layer, got {num_layers}")
        bound = 1.0 / np.sqrt(d)
        layers = []
        for k in range(num_layers):
            d_in = 2 * d if k == 0 else d
            rel = [
                Tensor(rng.uniform(-bound, bound, (d_in, d)), requires_grad=True, name=f"gsn.l{k}.rel{r}")
                for r in range(2 * num_relations)
            ]
            self_loop = Tensor(rng.uniform(-bound, bound, (d_in, d)), requires_grad=True, name=f"gsn.l{k}.self")
            layers.append(GsnLayer(rel, self_loop))
        return cls(layers)


@dataclass
class GraphBatch:
    """Disjoint union of labelled subgraphs, ready for message passing."""

    features: np.ndarray  # N x 2d
    src: np.ndarray
    dst: np.ndarray
    etype: np.ndarray
    norm: np.ndarray  # 1 / c_{dst, etype} per message
    graph_of: np.ndarray  # node -> subgraph index
    sizes: np.ndarray
    u_index: np.ndarray
    v_index: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def num_graphs(self) -> int:
        return self.sizes.shape[0]


def batch_subgraphs(subs: Sequence[EnclosingSubgraph], d: int, num_relations: int) -> GraphBatch:
    feats, src, dst, etype, graph_of = [], [], [], [], []
    u_idx, v_idx, sizes = [], [], []
    offset = 0
    for g, sub in enumerate(subs):
        feats.append(init_node_features(sub.labels, d))
        for h, r, t in sub.edges:
            src += [offset + h, offset + t]
            dst += [offset + t, offset + h]
            etype += [r, r + num_relations]
        graph_of += [g] * sub.num_nodes
        u_idx.append(offset + sub.target_u)
        v_idx.append(offset + sub.target_v)
        sizes.append(sub.num_nodes)
        offset += sub.num_nodes
    src_a = np.array(src, dtype=np.int64)
    dst_a = np.array(dst, dtype=np.int64)
    et_a = np.array(etype, dtype=np.int64)
    if src_a.size:
        key = dst_a * (2 * num_relations) + et_a
        _, inverse, counts = np.unique(key, return_inverse=True, return_counts=True)
        norm = 1.0 / counts[inverse]
    else:
        norm = np.zeros(0)
    return GraphBatch(
        features=np.concatenate(feats, axis=0) if feats else np.zeros((0, 2 * d)),
        src=src_a,
        dst=dst_a,
        etype=et_a,
        norm=norm,
        graph_of=np.array(graph_of, dtype=np.int64),
        sizes=np.array(sizes, dtype=np.int64),
        u_index=np.array(u_idx, dtype=np.int64),
        v_index=np.array(v_idx, dtype=np.int64),
    )


def rgcn_layer(batch: GraphBatch, x: Tensor, layer: GsnLayer) -> Tensor:
    """One R-GCN layer: relu(sum_r sum_j e_j W_r / c_{i,r} + e_i W_0)."""
    if x.shape[0] != batch.num_nodes:
        raise ShapeError(f"features have {x.shape[0]} rows for {batch.num_nodes} nodes")
    if x.shape[1] != layer.self_loop.shape[0]:
        raise ShapeError(f"feature width {x.shape[1]} does not match layer input {layer.self_loop.shape[0]}")
    terms = [ad.matmul(x, layer.self_loop)]
    for r in np.unique(batch.etype):
        sel = np.flatnonzero(batch.etype == r)
        msg = ad.matmul(ad.gather_rows(x, batch.src[sel]), layer.rel[int(r)])
        terms.append(ad.scatter_rows(msg, batch.dst[sel], batch.num_nodes, batch.norm[sel]))
    return ad.relu(ad.add(*terms))


def encode_batch(batch: GraphBatch, params: GsnParams) -> tuple[Tensor, Tensor, Tensor]:
    """(e_G, e_u, e_v), each (num_graphs x d), after all layers."""
    h = ad.const(batch.features)
    for layer in params.layers:
        h = rgcn_layer(batch, h, layer)
    e_g = ad.scatter_rows(h, batch.graph_of, batch.num_graphs, 1.0 / batch.sizes[batch.graph_of])
    return e_g, ad.gather_rows(h, batch.u_index), ad.gather_rows(h, batch.v_index)


def encode_subgraph(sub: EnclosingSubgraph, params: GsnParams):
    first = params.layers[0]
    d = first.self_loop.shape[1]
    return encode_batch(batch_subgraphs([sub], d, len(first.rel) // 2), params)


def structure_embedding(e_g: Tensor, e_u: Tensor, e_v: Tensor) -> Tensor:
    if not (e_g.shape == e_u.shape == e_v.shape):
        raise ShapeError(f"structure parts disagree: {e_g.shape}, {e_u.shape}, {e_v.shape}")
    return ad.concat_cols(e_g, e_u, e_v)
