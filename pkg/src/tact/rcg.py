"""Topological relation-pair patterns and the relational correlation graph."""
from __future__ import annotations

import enum
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from tact.errors import ContractViolation, ParseError
from tact.kg import KnowledgeGraph

log = logging.getLogger(__name__)


class Pattern(enum.Enum):
    H_T = "H-T"
    T_T = "T-T"
    H_H = "H-H"
    T_H = "T-H"
    PARA = "PARA"
    LOOP = "LOOP"
    NC = "NC"

    def __str__(self) -> str:
        return self.value


# The six connected patterns, in parameter-slot order (W_p0..W_p5).
CONNECTED = (Pattern.H_T, Pattern.T_T, Pattern.H_H, Pattern.T_H, Pattern.PARA, Pattern.LOOP)
SLOT = {p: i for i, p in enumerate(CONNECTED)}


def classify_pattern(neighbor_edge: tuple[int, int], target_edge: tuple[int, int]) -> Pattern:
    """Pattern of ``neighbor_edge`` relative to ``target_edge``.

    Both are ``(head, tail)`` pairs of irreflexive, distinct edge instances.
    """
    hn, tn = neighbor_edge
    ht, tt = target_edge
    if hn == tn or ht == tt:
        raise ContractViolation(f"reflexive edge in pair {neighbor_edge}, {target_edge}")
    if hn == ht and tn == tt:
        return Pattern.PARA
    if hn == tt and tn == ht:
        return Pattern.LOOP
    if hn == ht:
        return Pattern.H_H
    if hn == tt:
        return Pattern.H_T
    if tn == ht:
        return Pattern.T_H
    if tn == tt:
        return Pattern.T_T
    return Pattern.NC


@dataclass(frozen=True)
class RelationalCorrelationGraph:
    """``indicators[t][slot]`` is the set of relations correlated with ``t``
    under ``CONNECTED[slot]``. NC is implicit."""

    indicators: tuple[tuple[frozenset[int], ...], ...]
    relation_count: int
    skipped_reflexive: int = 0

    def neighbors(self, t: int, p: Pattern) -> frozenset[int]:
        return self.indicators[t][SLOT[p]]

    def union_neighbors(self, t: int) -> frozenset[int]:
        return frozenset().union(*self.indicators[t])

    def masks(self) -> np.ndarray:
        """Dense indicator tensor of shape (6, |R|, |R|): ``[p, t, i]``."""
        n = self.relation_count
        out = np.zeros((len(CONNECTED), n, n), dtype=bool)
        for t in range(n):
            for s, nbrs in enumerate(self.indicators[t]):
                if nbrs:
                    out[s, t, sorted(nbrs)] = True
        return out

    def histogram(self) -> dict[Pattern, int]:
        return {p: sum(len(self.indicators[t][SLOT[p]]) for t in range(self.relation_count)) for p in CONNECTED}

    def rows(self) -> list[tuple[int, Pattern, int]]:
        """``(target, pattern, neighbor)`` ordered by target, slot, neighbor."""
        return [
            (t, p, i)
            for t in range(self.relation_count)
            for p in CONNECTED
            for i in sorted(self.indicators[t][SLOT[p]])
        ]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RelationalCorrelationGraph)
            and self.relation_count == other.relation_count
            and self.indicators == other.indicators
        )


def _freeze(sets: list[list[set[int]]], n: int, skipped: int = 0) -> RelationalCorrelationGraph:
    return RelationalCorrelationGraph(
        indicators=tuple(tuple(frozenset(s) for s in row) for row in sets),
        relation_count=n,
        skipped_reflexive=skipped,
    )


def build_rcg(kg: KnowledgeGraph) -> RelationalCorrelationGraph:
    """Correlation graph of ``kg`` via a join over shared entities.

    For every entity, incident edges are collapsed to distinct
    ``(relation, role, other endpoint)`` keys with multiplicities; pairs of keys
    (or a key with itself when it is carried by two edge instances) are then
    classified. Pairs sharing two endpoints are visited from both entities and
    merged by set union.
    """
    n = kg.num_relations
    sets: list[list[set[int]]] = [[set() for _ in CONNECTED] for _ in range(n)]
    skipped = sum(1 for t in kg.triples if t.reflexive)
    if skipped:
        log.warning("build_rcg: skipped %d reflexive edges", skipped)

    for x in range(kg.num_entities):
        keys: Counter = Counter()
        for eid in kg.by_head[x]:
            t = kg.triples[eid]
            if not t.reflexive:
                keys[(t.rel, x, t.tail)] += 1
        for eid in kg.by_tail[x]:
            t = kg.triples[eid]
            if not t.reflexive:
                keys[(t.rel, t.head, x)] += 1
        if len(keys) == 0:
            continue
        items = list(keys.items())
        for a, (ka, ca) in enumerate(items):
            ra, ea = ka[0], (ka[1], ka[2])
            for kb, cb in items[a:]:
                rb, eb = kb[0], (kb[1], kb[2])
                if ka == kb:
                    if ca < 2:
                        continue
                    # two instances of the same triple are parallel
                    sets[ra][SLOT[Pattern.PARA]].add(ra)
                    continue
                p = classify_pattern(ea, eb)
                sets[rb][SLOT[p]].add(ra)
                q = classify_pattern(eb, ea)
                sets[ra][SLOT[q]].add(rb)
    return _freeze(sets, n, skipped)


def build_rcg_bruteforce(kg: KnowledgeGraph) -> RelationalCorrelationGraph:
    """All ordered pairs of distinct irreflexive edges. Quadratic; a test oracle."""
    n = kg.num_relations
    sets: list[list[set[int]]] = [[set() for _ in CONNECTED] for _ in range(n)]
    edges = [(eid, t) for eid, t in enumerate(kg.triples) if not t.reflexive]
    for e1, a in edges:
        for e2, b in edges:
            if e1 == e2:
                continue
            p = classify_pattern((a.head, a.tail), (b.head, b.tail))
            if p is not Pattern.NC:
                sets[b.rel][SLOT[p]].add(a.rel)
    return _freeze(sets, n)


def local_indicators(
    kg: KnowledgeGraph, head: int, tail: int, exclude: Iterable[int] = ()
) -> np.ndarray:
    """Correlation masks of a single target edge ``(head, tail)``.

    Every irreflexive graph edge sharing an endpoint with the target, apart
    from ``exclude``, contributes its relation under its pattern. Returns a
    boolean array of shape (6, |R|).
    """
    out = np.zeros((len(CONNECTED), kg.num_relations), dtype=bool)
    if head == tail:
        return out
    excluded = set(exclude)
    seen = set()
    for node in (head, tail):
        if node >= kg.num_entities:
            continue
        for eid in kg.by_head[node] + kg.by_tail[node]:
            if eid in excluded or eid in seen:
                continue
            seen.add(eid)
            t = kg.triples[eid]
            if t.reflexive:
                continue
            p = classify_pattern((t.head, t.tail), (head, tail))
            out[SLOT[p], t.rel] = True
    return out


def export_rcg(rcg: RelationalCorrelationGraph, path: str | Path, relation_names=None) -> int:
    """Write ``target<TAB>pattern<TAB>neighbor`` rows, sorted. Returns the row count."""
    name = (lambda i: str(i)) if relation_names is None else (lambda i: relation_names[i])
    rows = rcg.rows()
    with Path(path).open("w", encoding="utf-8") as fh:
        for t, p, i in rows:
            fh.write(f"{name(t)}\t{p.value}\t{name(i)}\n")
    return len(rows)


def read_rcg(path: str | Path, relation_count: int, relation_names=None) -> RelationalCorrelationGraph:
    lookup = None if relation_names is None else {r: i for i, r in enumerate(relation_names)}
    sets: list[list[set[int]]] = [[set() for _ in CONNECTED] for _ in range(relation_count)]
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 fields")
            t, p, i = fields
            try:
                pat = Pattern(p)
                ti = int(t) if lookup is None else lookup[t]
                ii = int(i) if lookup is None else lookup[i]
            except (ValueError, KeyError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if pat is Pattern.NC:
                raise ParseError(f"{path}:{lineno}: NC is never stored")
            sets[ti][SLOT[pat]].add(ii)
    return _freeze(sets, relation_count)


def export_histogram(rcg: RelationalCorrelationGraph, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for p, count in rcg.histogram().items():
            fh.write(f"{p.value}\t{count}\n")
