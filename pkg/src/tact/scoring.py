"""Triple scoring network, margin loss and negative sampling."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from tact import autodiff as ad
from tact.autodiff import Tensor
from tact.errors import ConfigError, ContractViolation, ShapeError
from tact.kg import KnowledgeGraph, Triple


@dataclass(frozen=True)
class ScoreParts:
    """Which embeddings feed the scoring layer, concatenated in r, g, n order."""

    use_r: bool = True
    use_g: bool = True
    use_n: bool = True

    def __post_init__(self):
        if not (self.use_r or self.use_g or self.use_n):
            raise ConfigError("at least one score part must be enabled")

    @classmethod
    def parse(cls, text: str) -> "ScoreParts":
        letters = set(text.strip().lower())
        if not letters or not letters <= set("ngr"):
            raise ConfigError(f"parts must be a non-empty string over 'n', 'g', 'r'; got {text!r}")
        return cls(use_r="r" in letters, use_g="g" in letters, use_n="n" in letters)

    def __str__(self) -> str:
        return "".join(c for c, on in (("n", self.use_n), ("g", self.use_g), ("r", self.use_r)) if on)

    @property
    def needs_structure(self) -> bool:
        return self.use_g or self.use_n

    def width(self, d: int) -> int:
        return d * self.use_r + d * self.use_g + 2 * d * self.use_n


def score(parts: ScoreParts, r_f, e_g, e_u, e_v, w_s: Tensor) -> Tensor:
    """Rows of ``[r_F ++ e_G ++ e_u ++ e_v] W_S`` restricted to the active parts."""
    pieces = []
    if parts.use_r:
        pieces.append(r_f)
    if parts.use_g:
        pieces.append(e_g)
    if parts.use_n:
        pieces += [e_u, e_v]
    x = pieces[0] if len(pieces) == 1 else ad.concat_cols(*pieces)
    if x.shape[1] != w_s.shape[0]:
        raise ShapeError(f"score input width {x.shape[1]} does not match W_S rows {w_s.shape[0]}")
    return ad.matmul(x, w_s)


def hinge_loss(pos, neg, margin: float):
    """Sum over (positive, negative) pairs of ``max(0, neg - pos + margin)``.

    ``neg`` holds ``n`` negatives per positive, grouped: rows ``i*n .. i*n+n-1``
    belong to positive ``i``. Tensors in, 1x1 tensor out; plain sequences in,
    float out.
    """
    as_float = not isinstance(pos, Tensor)
    pos_t = ad.const(np.asarray(pos, dtype=np.float64).reshape(-1, 1)) if as_float else pos
    neg_t = ad.const(np.asarray(neg, dtype=np.float64).reshape(-1, 1)) if not isinstance(neg, Tensor) else neg
    n_pos, n_neg = pos_t.shape[0], neg_t.shape[0]
    if n_pos == 0 or n_neg % n_pos:
        raise ContractViolation(f"{n_neg} negatives cannot be grouped over {n_pos} positives")
    per = n_neg // n_pos
    paired = ad.gather_rows(pos_t, np.repeat(np.arange(n_pos), per))
    loss = ad.sum_all(ad.relu(ad.add_scalar(ad.add(neg_t, ad.scale(paired, -1.0)), margin)))
    return loss.item() if as_float else loss


def sample_negatives(
    kg: KnowledgeGraph, triple: Triple, n: int, rng: np.random.Generator, rel_prob: float = 0.0
) -> list[Triple]:
    """Corrupt head or tail (fair coin) with a uniformly drawn different entity.

    The replacement also avoids the other endpoint so negatives stay
    irreflexive, except on a two-entity graph where the swap is forced. With
    ``rel_prob > 0`` each negative instead swaps the relation for a uniformly
    drawn different one with that probability (needs two or more relations).
    """
    num = kg.num_entities
    if num < 2:
        raise ContractViolation("negative sampling needs at least two entities")
    out = []
    for _ in range(n):
        if rel_prob > 0 and kg.num_relations > 1 and rng.random() < rel_prob:
            r = int(rng.integers(kg.num_relations - 1))
            out.append(Triple(triple.head, r + (r >= triple.rel), triple.tail))
            continue
        corrupt_head = bool(rng.integers(2))
        old, other = (triple.head, triple.tail) if corrupt_head else (triple.tail, triple.head)
        banned = sorted({old, other}) if num > 2 or old == other else [old]
        x = int(rng.integers(num - len(banned)))
        for b in banned:
            if x >= b:
                x += 1
        out.append(Triple(x, triple.rel, triple.tail) if corrupt_head else Triple(triple.head, triple.rel, x))
    return out


def sample_negatives_batch(
    kg: KnowledgeGraph, triples: Sequence[Triple], n: int, rng, rel_prob: float = 0.0
) -> list[Triple]:
    out = []
    for t in triples:
        out += sample_negatives(kg, t, n, rng, rel_prob)
    return out
