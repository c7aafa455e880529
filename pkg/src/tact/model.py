"""The full scorer: relation embeddings from correlated relations plus an
R-GCN summary of the enclosing subgraph, combined by a linear layer."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from tact import autodiff as ad
from tact.autodiff import Tensor
from tact.errors import ConfigError
from tact.gsn import GsnParams, batch_subgraphs, encode_batch
from tact.kg import KnowledgeGraph, Triple
from tact.rcg import RelationalCorrelationGraph, build_rcg, local_indicators
from tact.rcn import RcnParams, batch_relation_embedding, normalize_variant
from tact.scoring import ScoreParts, score
from tact.subgraph import EnclosingSubgraph, extract_enclosing_subgraph

SCOPES = ("local", "global")


@dataclass
class GraphContext:
    """Per-graph caches used while scoring triples against a fact graph."""

    kg: KnowledgeGraph
    hops: int
    cap: int
    rcg: RelationalCorrelationGraph | None = None
    _subgraphs: dict = field(default_factory=dict, repr=False)
    _global_masks: np.ndarray | None = field(default=None, repr=False)
    memo_limit: int = 200_000

    def subgraph(self, u: int, v: int, exclude: tuple[int, ...]) -> EnclosingSubgraph:
        key = (u, v, exclude)
        sub = self._subgraphs.get(key)
        if sub is None:
            sub = extract_enclosing_subgraph(self.kg, u, v, self.hops, exclude, cap=self.cap)
            if len(self._subgraphs) < self.memo_limit:
                self._subgraphs[key] = sub
        return sub

    def global_masks(self) -> np.ndarray:
        """(|R|, 6, |R|) indicator masks of the whole-graph correlation graph."""
        if self._global_masks is None:
            if self.rcg is None:
                self.rcg = build_rcg(self.kg)
            self._global_masks = self.rcg.masks().transpose(1, 0, 2).copy()
        return self._global_masks


def exclusion(kg: KnowledgeGraph, t: Triple, source: Triple | None = None) -> tuple[int, ...]:
    """Edge ids hidden while scoring ``t``: its own edges, plus those of the
    positive ``source`` it was corrupted from."""
    own = kg.edges_of(t.head, t.rel, t.tail)
    if source is None or source == t:
        return own
    return tuple(sorted(set(own) | set(kg.edges_of(source.head, source.rel, source.tail))))


class TactModel:
    def __init__(
        self,
        num_relations: int,
        dim: int = 32,
        layers: int = 2,
        hops: int = 2,
        parts: ScoreParts | str = "ngr",
        variant: str = "full",
        scope: str = "local",
        seed: int = 0,
    ):
        self.num_relations = num_relations
        self.dim = dim
        self.layers = layers
        self.hops = hops
        self.parts = ScoreParts.parse(parts) if isinstance(parts, str) else parts
        self.variant = normalize_variant(variant)
        if scope not in SCOPES:
            raise ConfigError(f"unknown correlation scope {scope!r}; expected one of {SCOPES}")
        self.scope = scope
        rng = np.random.default_rng(seed)
        self.rcn = RcnParams.init(num_relations, dim, rng)
        self.gsn = GsnParams.init(num_relations, dim, layers, rng) if self.parts.needs_structure else None
        bound = 1.0 / np.sqrt(dim)
        self.w_s = Tensor(rng.uniform(-bound, bound, (self.parts.width(dim), 1)), requires_grad=True, name="W_S")

    # ------------------------------------------------------------ parameters

    def parameters(self) -> dict[str, Tensor]:
        out = dict(self.rcn.tensors())
        if self.gsn is not None:
            out.update(self.gsn.tensors())
        out["W_S"] = self.w_s
        return out

    def context(self, kg: KnowledgeGraph, rcg: RelationalCorrelationGraph | None = None) -> GraphContext:
        if kg.num_relations != self.num_relations:
            raise ConfigError(f"graph has {kg.num_relations} relations, model has {self.num_relations}")
        return GraphContext(kg, self.hops, self.dim - 1, rcg)

    # ------------------------------------------------------------ forward

    def masks_for(self, ctx: GraphContext, triples: Sequence[Triple], excludes) -> np.ndarray:
        if self.scope == "global":
            return ctx.global_masks()[np.array([t.rel for t in triples], dtype=np.int64)]
        return np.stack(
            [local_indicators(ctx.kg, t.head, t.tail, ex) for t, ex in zip(triples, excludes)]
        ) if triples else np.zeros((0, 6, self.num_relations), dtype=bool)

    def structure(self, ctx: GraphContext, triples: Sequence[Triple], excludes):
        subs = [ctx.subgraph(t.head, t.tail, ex) for t, ex in zip(triples, excludes)]
        return encode_batch(batch_subgraphs(subs, self.dim, self.num_relations), self.gsn)

    def forward(self, ctx: GraphContext, triples: Sequence[Triple], excludes=None) -> Tensor:
        """Scores (B x 1) of ``triples`` against the fact graph of ``ctx``.

        ``excludes[i]`` lists the edge ids hidden while scoring triple ``i``;
        by default each triple hides its own edges.
        """
        if excludes is None:
            excludes = [exclusion(ctx.kg, t) for t in triples]
        rels = np.array([t.rel for t in triples], dtype=np.int64)
        r_f = batch_relation_embedding(self.rcn, rels, self.masks_for(ctx, triples, excludes), self.variant)
        e_g = e_u = e_v = None
        if self.parts.needs_structure:
            e_g, e_u, e_v = self.structure(ctx, triples, excludes)
        return score(self.parts, r_f, e_g, e_u, e_v, self.w_s)

    def score_triples(
        self, ctx: GraphContext, triples: Sequence[Triple], batch_size: int = 256, excludes=None
    ) -> np.ndarray:
        if excludes is None:
            excludes = [exclusion(ctx.kg, t) for t in triples]
        out = []
        for i in range(0, len(triples), batch_size):
            out.append(self.forward(ctx, triples[i : i + batch_size], excludes[i : i + batch_size]).data[:, 0])
        return np.concatenate(out) if out else np.zeros(0)

    def score_all_relations(self, ctx: GraphContext, queries: Sequence[Triple]) -> np.ndarray:
        """Scores (B x |R|) of every candidate relation for each query pair.

        The query's own triple is excluded from the fact graph for all
        candidates, so every candidate sees the same subgraph and
        correlation neighbourhood.
        """
        n_rel = self.num_relations
        b = len(queries)
        if b == 0:
            return np.zeros((0, n_rel))
        excludes = [exclusion(ctx.kg, t) for t in queries]
        rows = np.repeat(np.arange(b), n_rel)
        rels = np.tile(np.arange(n_rel), b)
        if self.scope == "global":
            masks = ctx.global_masks()[rels]
        else:
            masks = self.masks_for(ctx, queries, excludes)[rows]
        r_f = batch_relation_embedding(self.rcn, rels, masks, self.variant)
        e_g = e_u = e_v = None
        if self.parts.needs_structure:
            e_g, e_u, e_v = (ad.gather_rows(x, rows) for x in self.structure(ctx, queries, excludes))
        return score(self.parts, r_f, e_g, e_u, e_v, self.w_s).data.reshape(b, n_rel)
