"""Triple ingestion, vocabulary interning and indexed graph access."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from tact.errors import ParseError, VocabularyError

RawTriple = tuple[str, str, str]


class Vocab:
    """Bidirectional string <-> dense id map, ids assigned in first-seen order."""

    def __init__(self, items: Iterable[str] = (), frozen: bool = False):
        self._ids: dict[str, int] = {}
        self._items: list[str] = []
        self.frozen = False
        for item in items:
            self.add(item)
        self.frozen = frozen

    def add(self, item: str) -> int:
        idx = self._ids.get(item)
        if idx is None:
            if self.frozen:
                raise VocabularyError(f"unknown symbol {item!r} in frozen vocabulary")
            idx = len(self._items)
            self._ids[item] = idx
            self._items.append(item)
        return idx

    def id(self, item: str) -> int:
        try:
            return self._ids[item]
        except KeyError:
            raise VocabularyError(f"unknown symbol {item!r}") from None

    def item(self, idx: int) -> str:
        return self._items[idx]

    def __contains__(self, item: str) -> bool:
        return item in self._ids

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self._items == other._items

    def items(self) -> list[str]:
        return list(self._items)

    def copy(self, frozen: bool | None = None) -> "Vocab":
        out = Vocab(self._items)
        out.frozen = self.frozen if frozen is None else frozen
        return out


@dataclass(frozen=True)
class Triple:
    head: int
    rel: int
    tail: int

    @property
    def reflexive(self) -> bool:
        return self.head == self.tail

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.head, self.rel, self.tail)


@dataclass(frozen=True, eq=False)
class KnowledgeGraph:
    """Immutable edge list with head/tail/relation incidence indices.

    Edge ids are positions in ``triples``. Duplicate triples are kept as
    separate edges.
    """

    triples: tuple[Triple, ...]
    entity_vocab: Vocab
    relation_vocab: Vocab
    by_head: tuple[tuple[int, ...], ...] = field(repr=False)
    by_tail: tuple[tuple[int, ...], ...] = field(repr=False)
    by_rel: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def num_entities(self) -> int:
        return len(self.entity_vocab)

    @property
    def num_relations(self) -> int:
        return len(self.relation_vocab)

    def __len__(self) -> int:
        return len(self.triples)

    @cached_property
    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(heads, rels, tails) as int64 arrays indexed by edge id."""
        if not self.triples:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy(), empty.copy()
        arr = np.array([t.as_tuple() for t in self.triples], dtype=np.int64)
        return arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy()

    @cached_property
    def undirected_adjacency(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per node: (neighbour, edge id) pairs over incident edges, both directions."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.num_entities)]
        for eid, t in enumerate(self.triples):
            adj[t.head].append((t.tail, eid))
            if t.tail != t.head:
                adj[t.tail].append((t.head, eid))
        return tuple(tuple(a) for a in adj)

    @cached_property
    def edge_lookup(self) -> dict[tuple[int, int, int], tuple[int, ...]]:
        """(head, rel, tail) -> edge ids carrying that triple."""
        out: dict[tuple[int, int, int], list[int]] = {}
        for eid, t in enumerate(self.triples):
            out.setdefault(t.as_tuple(), []).append(eid)
        return {k: tuple(v) for k, v in out.items()}

    def edges_of(self, head: int, rel: int, tail: int) -> tuple[int, ...]:
        return self.edge_lookup.get((head, rel, tail), ())

    def relation_counts(self) -> np.ndarray:
        return np.array([len(b) for b in self.by_rel], dtype=np.int64)

    def dump(self) -> list[RawTriple]:
        ent, rel = self.entity_vocab, self.relation_vocab
        return [(ent.item(t.head), rel.item(t.rel), ent.item(t.tail)) for t in self.triples]


def load_triples(path: str | Path) -> list[RawTriple]:
    """Read a ``head<TAB>relation<TAB>tail`` file in file order.

    Blank lines and lines starting with ``#`` are skipped.
    """
    path = Path(path)
    out: list[RawTriple] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}"
                )
            h, r, t = (f.strip() for f in fields)
            out.append((h, r, t))
    return out


def build_graph(
    raw: Sequence[RawTriple],
    vocab: Vocab | None = None,
    entity_vocab: Vocab | None = None,
) -> KnowledgeGraph:
    """Intern ``raw`` and index it.

    ``vocab`` is a relation vocabulary; when supplied it is treated as frozen
    (inductive setting) and unknown relations raise ``VocabularyError``.
    ``entity_vocab`` may be passed to share entity ids between the fact graph
    and a set of query triples; it is extended in place.
    """
    rel_vocab = vocab.copy(frozen=True) if vocab is not None else Vocab()
    ent_vocab = entity_vocab if entity_vocab is not None else Vocab()
    triples = []
    for h, r, t in raw:
        rid = rel_vocab.add(r)
        triples.append(Triple(ent_vocab.add(h), rid, ent_vocab.add(t)))
    return _index(tuple(triples), ent_vocab, rel_vocab)


def from_ids(
    triples: Iterable[tuple[int, int, int]], num_entities: int, num_relations: int
) -> KnowledgeGraph:
    """Build a graph directly from integer triples (names are the decimal ids)."""
    ts = tuple(Triple(int(h), int(r), int(t)) for h, r, t in triples)
    for t in ts:
        if not (0 <= t.head < num_entities and 0 <= t.tail < num_entities):
            raise IndexError(f"entity id out of range in {t}")
        if not 0 <= t.rel < num_relations:
            raise IndexError(f"relation id out of range in {t}")
    ents = Vocab(str(i) for i in range(num_entities))
    rels = Vocab(str(i) for i in range(num_relations))
    return _index(ts, ents, rels)


def _index(triples: tuple[Triple, ...], ents: Vocab, rels: Vocab) -> KnowledgeGraph:
    by_head: list[list[int]] = [[] for _ in range(len(ents))]
    by_tail: list[list[int]] = [[] for _ in range(len(ents))]
    by_rel: list[list[int]] = [[] for _ in range(len(rels))]
    for eid, t in enumerate(triples):
        by_head[t.head].append(eid)
        by_tail[t.tail].append(eid)
        by_rel[t.rel].append(eid)
    return KnowledgeGraph(
        triples=triples,
        entity_vocab=ents,
        relation_vocab=rels,
        by_head=tuple(map(tuple, by_head)),
        by_tail=tuple(map(tuple, by_tail)),
        by_rel=tuple(map(tuple, by_rel)),
    )


def incident_edges(kg: KnowledgeGraph, node: int) -> list[int]:
    if not 0 <= node < kg.num_entities:
        raise IndexError(f"node {node} out of range for {kg.num_entities} entities")
    return sorted(set(kg.by_head[node]) | set(kg.by_tail[node]))


@dataclass
class Dataset:
    """A transductive training split plus an optional inductive test split."""

    train: KnowledgeGraph
    valid: list[Triple]
    test_graph: KnowledgeGraph | None = None
    test: list[Triple] = field(default_factory=list)
    name: str = ""


def load_split_graph(
    fact_path: Path, query_paths: Sequence[Path], relation_vocab: Vocab | None
) -> tuple[KnowledgeGraph, list[list[Triple]]]:
    """Build a fact graph whose entity vocabulary also covers the query files.

    Entities that only appear in queries are interned after all fact-graph
    entities and are isolated nodes of the graph.
    """
    facts = load_triples(fact_path)
    queries = [load_triples(p) if p.exists() else [] for p in query_paths]
    ents = Vocab()
    for h, _, t in facts:
        ents.add(h)
        ents.add(t)
    for q in queries:
        for h, _, t in q:
            ents.add(h)
            ents.add(t)
    kg = build_graph(facts, vocab=relation_vocab, entity_vocab=ents)
    rels = kg.relation_vocab
    out = []
    for q in queries:
        try:
            out.append([Triple(ents.id(h), rels.id(r), ents.id(t)) for h, r, t in q])
        except VocabularyError as exc:
            raise VocabularyError(f"query relation not in training vocabulary: {exc}") from None
    return kg, out


def load_dataset(data_dir: str | Path, test_dir: str | Path | None = None) -> Dataset:
    """Load ``train.txt``/``valid.txt`` and, if given, an inductive test split.

    The inductive directory holds its own fact graph (``train.txt``) and
    target triples (``test.txt``); its relations must be a subset of the
    training relations.
    """
    data_dir = Path(data_dir)
    train_path = data_dir / "train.txt"
    if not train_path.exists():
        raise FileNotFoundError(f"missing {train_path}")
    train, (valid,) = load_split_graph(train_path, [data_dir / "valid.txt"], None)
    ds = Dataset(train=train, valid=valid, name=data_dir.name)
    if test_dir is not None:
        test_dir = Path(test_dir)
        fact_path = test_dir / "train.txt"
        if not fact_path.exists():
            raise FileNotFoundError(f"missing {fact_path}")
        ds.test_graph, (ds.test,) = load_split_graph(
            fact_path, [test_dir / "test.txt"], train.relation_vocab
        )
    return ds
