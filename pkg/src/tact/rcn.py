"""Relational correlation network: pattern-wise attention over correlated
relations and fusion into the final relation embedding."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tact import autodiff as ad
from tact.autodiff import Tensor
from tact.errors import ConfigError
from tact.rcg import CONNECTED, SLOT, Pattern, RelationalCorrelationGraph

VARIANTS = ("full", "no-ra", "no-rc")


def normalize_variant(variant: str) -> str:
    v = variant.strip().lower().replace("_", "-")
    if v not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return v


@dataclass
class RcnParams:
    R: Tensor  # |R| x d
    W: list[Tensor]  # six d x d
    a: list[Tensor]  # six d x 1
    H: Tensor  # 2d x d

    @property
    def dim(self) -> int:
        return self.R.shape[1]

    @property
    def num_relations(self) -> int:
        return self.R.shape[0]

    def tensors(self) -> dict[str, Tensor]:
        out = {"R": self.R}
        out.update({f"W_p{i}": w for i, w in enumerate(self.W)})
        out.update({f"a_p{i}": a for i, a in enumerate(self.a)})
        out["H"] = self.H
        return out

    @classmethod
    def init(cls, num_relations: int, d: int, rng: np.random.Generator) -> "RcnParams":
        bound = 1.0 / np.sqrt(d)

        def u(*shape, name):
            return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)

        R = u(num_relations, d, name="R")
        W = [u(d, d, name=f"W_p{i}") for i in range(len(CONNECTED))]
        a = [u(d, 1, name=f"a_p{i}") for i in range(len(CONNECTED))]
        H = u(2 * d, d, name="H")
        return cls(R, W, a, H)


def _pattern_scores(params: RcnParams, slot: int) -> tuple[Tensor, Tensor]:
    """(R W^p, attention logits as a 1 x |R| row)."""
    rw = ad.matmul(params.R, params.W[slot])
    return rw, ad.transpose(ad.matmul(rw, params.a[slot]))


def _mask_row(rcg: RelationalCorrelationGraph, t: int, p: Pattern) -> np.ndarray:
    row = np.zeros((1, rcg.relation_count), dtype=bool)
    nbrs = rcg.neighbors(t, p)
    if nbrs:
        row[0, sorted(nbrs)] = True
    return row


def attention_coeffs(params: RcnParams, rcg: RelationalCorrelationGraph, t: int, p: Pattern) -> Tensor:
    """Correlation coefficients of target ``t`` under pattern ``p`` (1 x |R|)."""
    if p is Pattern.NC:
        raise ConfigError("NC has no correlation coefficients")
    _, scores = _pattern_scores(params, SLOT[p])
    return ad.masked_softmax(scores, _mask_row(rcg, t, p))


def neighborhood_embedding(params: RcnParams, rcg: RelationalCorrelationGraph, t: int) -> Tensor:
    masks = rcg.masks()[:, t : t + 1, :].transpose(1, 0, 2)
    return batch_neighborhood(params, masks)


def final_relation_embedding(
    params: RcnParams, rcg: RelationalCorrelationGraph, t: int, variant: str = "full"
) -> Tensor:
    masks = rcg.masks()[:, t : t + 1, :].transpose(1, 0, 2)
    return batch_relation_embedding(params, np.array([t]), masks, variant)


# ---------------------------------------------------------------- batched forms


def batch_attention(params: RcnParams, masks: np.ndarray) -> list[tuple[Tensor, Tensor]]:
    """Per pattern slot: (coefficients B x |R|, R W^p). ``masks`` is (B, 6, |R|)."""
    b = masks.shape[0]
    out = []
    for slot in range(len(CONNECTED)):
        rw, scores = _pattern_scores(params, slot)
        tiled = ad.gather_rows(scores, np.zeros(b, dtype=np.int64))
        out.append((ad.masked_softmax(tiled, masks[:, slot, :]), rw))
    return out


def batch_neighborhood(params: RcnParams, masks: np.ndarray) -> Tensor:
    """Neighbourhood embeddings (B x d) for rows of indicator masks (B, 6, |R|).

    Each pattern contributes ``(N o Lambda) R W^p``; the six contributions are
    averaged with a constant 1/6, empty patterns contributing zero.
    """
    terms = []
    for slot, (coef, rw) in enumerate(batch_attention(params, masks)):
        indicator = ad.const(masks[:, slot, :].astype(np.float64))
        terms.append(ad.matmul(ad.hadamard(indicator, coef), rw))
    return ad.scale(ad.sum_unordered(*terms), 1.0 / len(CONNECTED))


def batch_mean_neighborhood(params: RcnParams, masks: np.ndarray) -> Tensor:
    """Unweighted mean of neighbour embeddings over the union of all patterns."""
    union = masks.any(axis=1).astype(np.float64)
    counts = union.sum(axis=1, keepdims=True)
    weights = np.divide(union, counts, out=np.zeros_like(union), where=counts > 0)
    return ad.matmul(ad.const(weights), params.R)


def batch_relation_embedding(
    params: RcnParams, rels: np.ndarray, masks: np.ndarray, variant: str = "full"
) -> Tensor:
    """Final relation embeddings (B x d) of relations ``rels`` given their masks."""
    variant = normalize_variant(variant)
    r_t = ad.gather_rows(params.R, rels)
    if variant == "no-ra":
        return r_t
    if variant == "no-rc":
        r_n = batch_mean_neighborhood(params, masks)
    else:
        r_n = batch_neighborhood(params, masks)
    return ad.relu(ad.matmul(ad.concat_cols(r_t, r_n), params.H))


def coefficient_table(params: RcnParams, rcg: RelationalCorrelationGraph) -> list[tuple[int, Pattern, int, float]]:
    """(target, pattern, neighbour, coefficient) for every stored correlation."""
    n = rcg.relation_count
    masks = rcg.masks().transpose(1, 0, 2)
    rows = []
    for slot, (coef, _) in enumerate(batch_attention(params, masks)):
        p = CONNECTED[slot]
        for t in range(n):
            for i in sorted(rcg.indicators[t][slot]):
                rows.append((t, p, i, float(coef.data[t, i])))
    rows.sort(key=lambda r: (r[0], SLOT[r[1]], -r[3], r[2]))
    return rows


def export_coefficients(params: RcnParams, rcg: RelationalCorrelationGraph, path, relation_names=None) -> int:
    name = (lambda i: str(i)) if relation_names is None else (lambda i: relation_names[i])
    rows = coefficient_table(params, rcg)
    with Path(path).open("w", encoding="utf-8") as fh:
        for t, p, i, c in rows:
            fh.write(f"{name(t)}\t{p.value}\t{name(i)}\t{c!r}\n")
    return len(rows)
