"""AUC-PR, filtered relation ranking, and the relation-frequency baseline."""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from tact.errors import ContractViolation
from tact.kg import KnowledgeGraph, Triple
from tact.model import exclusion
from tact.scoring import sample_negatives_batch


def auc_pr(pos_scores: Sequence[float], neg_scores: Sequence[float]) -> float:
    """Average precision, sum over thresholds of (recall step) x precision.

    Thresholds are the distinct scores, highest first; everything scoring at
    or above a threshold is predicted positive, so a negative tied with a
    positive always counts against it (pessimistic ties). The sum is kept as
    an exact fraction and rounded once.
    """
    pos = np.asarray(pos_scores, dtype=np.float64).reshape(-1)
    neg = np.asarray(neg_scores, dtype=np.float64).reshape(-1)
    if pos.size == 0 or neg.size == 0:
        raise ContractViolation("auc_pr needs at least one positive and one negative score")
    if not (np.isfinite(pos).all() and np.isfinite(neg).all()):
        raise ContractViolation("auc_pr needs finite scores")
    levels = np.unique(np.concatenate([pos, neg]))[::-1]
    pos_at = np.searchsorted(np.sort(-pos), -levels, side="right")  # positives >= level
    neg_at = np.searchsorted(np.sort(-neg), -levels, side="right")
    total = Fraction(0)
    prev_tp = 0
    for tp, fp in zip(pos_at.tolist(), neg_at.tolist()):
        if tp > prev_tp:
            total += Fraction((tp - prev_tp) * tp, tp + fp)
            prev_tp = tp
    return float(total / pos.size)


def relation_rank(scores: np.ndarray, gt: int, filtered: Iterable[int] = ()) -> float:
    """Tie-averaged rank of ``gt`` among candidates, ``filtered`` ones removed."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    keep = np.ones(scores.size, dtype=bool)
    for r in filtered:
        if r != gt:
            keep[r] = False
    keep[gt] = False
    others = scores[keep]
    target = scores[gt]
    higher = int((others > target).sum())
    ties = int((others == target).sum())
    return 1.0 + higher + ties / 2.0


def mrr_hits(ranks: Sequence[float], ns: Sequence[int] = (1, 5, 10)) -> dict:
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        raise ContractViolation("mrr_hits needs at least one rank")
    if (ranks < 1).any():
        raise ContractViolation("ranks must be >= 1")
    return {
        "mrr": float(np.mean(1.0 / ranks)),
        "hits": {int(n): float(np.mean(ranks <= n)) for n in ns},
    }


def filter_index(triples: Iterable[Triple]) -> dict[tuple[int, int], set[int]]:
    out: dict[tuple[int, int], set[int]] = {}
    for t in triples:
        out.setdefault((t.head, t.tail), set()).add(t.rel)
    return out


def frequency_scores(kg: KnowledgeGraph) -> np.ndarray:
    return kg.relation_counts().astype(np.float64)


def frequency_baseline(
    fact_graph: KnowledgeGraph, queries: Sequence[Triple], filter_triples: Iterable[Triple]
) -> dict:
    """Rank relations by triple count in ``fact_graph``; same list for every query."""
    freq = frequency_scores(fact_graph)
    known = filter_index(filter_triples)
    ranks = [relation_rank(freq, q.rel, known.get((q.head, q.tail), ())) for q in queries]
    out = mrr_hits(ranks)
    out["n_queries"] = len(ranks)
    return out


# ---------------------------------------------------------------- model runs


def classification_eval(model, ctx, triples: Sequence[Triple], seed=0, batch_size: int = 256) -> dict:
    """AUC-PR of ``triples`` against one seeded corruption each."""
    rng = np.random.default_rng(seed)
    negatives = sample_negatives_batch(ctx.kg, triples, 1, rng)
    pos = model.score_triples(ctx, list(triples), batch_size)
    excludes = [exclusion(ctx.kg, n, t) for n, t in zip(negatives, triples)]
    neg = model.score_triples(ctx, negatives, batch_size, excludes)
    return {"auc_pr": auc_pr(pos, neg), "n_pos": len(pos), "n_neg": len(neg)}


def ranking_eval(model, ctx, queries: Sequence[Triple], filter_triples: Iterable[Triple], batch_size: int = 64) -> dict:
    known = filter_index(filter_triples)
    ranks = []
    for i in range(0, len(queries), batch_size):
        chunk = queries[i : i + batch_size]
        scores = model.score_all_relations(ctx, chunk)
        for q, row in zip(chunk, scores):
            ranks.append(relation_rank(row, q.rel, known.get((q.head, q.tail), ())))
    out = mrr_hits(ranks)
    out["n_queries"] = len(ranks)
    out["ranks"] = ranks
    return out


@dataclass
class MetricsReport:
    auc_pr: float | None
    mrr: float | None
    hits: dict | None
    n_queries: int
    seed: int | list

    def to_json(self) -> dict:
        return {
            "auc_pr": self.auc_pr,
            "mrr": self.mrr,
            "hits": None if self.hits is None else {str(k): v for k, v in self.hits.items()},
            "n_queries": self.n_queries,
            "seed": self.seed,
        }

    def write(self, out_dir: str | Path, stem: str = "metrics") -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        js = out_dir / f"{stem}.json"
        tsv = out_dir / f"{stem}.tsv"
        doc = self.to_json()
        js.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        lines = ["metric\tvalue"]
        if self.auc_pr is not None:
            lines.append(f"auc_pr\t{self.auc_pr!r}")
        if self.mrr is not None:
            lines.append(f"mrr\t{self.mrr!r}")
            for k, v in (self.hits or {}).items():
                lines.append(f"hits@{k}\t{v!r}")
        lines.append(f"n_queries\t{self.n_queries}")
        tsv.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return js, tsv
