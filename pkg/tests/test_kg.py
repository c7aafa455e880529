import numpy as np
import pytest
from conftest import graphs, random_graph
from hypothesis import given
from hypothesis import strategies as st

from tact.errors import ParseError, VocabularyError
from tact.kg import Vocab, build_graph, incident_edges, load_dataset, load_triples


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_single_line(tmp_path):
    assert load_triples(write(tmp_path / "a.txt", "a\tr1\tb\n")) == [("a", "r1", "b")]


def test_load_empty_file(tmp_path):
    assert load_triples(write(tmp_path / "e.txt", "")) == []


def test_load_keeps_order_and_duplicates(tmp_path):
    text = "x\tr\ty\n# comment\n\nx\tr\ty\ny\ts\tz\n"
    assert load_triples(write(tmp_path / "d.txt", text)) == [("x", "r", "y"), ("x", "r", "y"), ("y", "s", "z")]


def test_malformed_line_names_line_number(tmp_path):
    path = write(tmp_path / "bad.txt", "a\tr\tb\na\tr\n")
    with pytest.raises(ParseError, match=":2:"):
        load_triples(path)


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(OSError):
        load_triples(tmp_path / "nope.txt")


def test_build_single_edge():
    kg = build_graph([("a", "r", "b")])
    assert (kg.num_entities, kg.num_relations, len(kg)) == (2, 1, 1)


def test_index_symmetry():
    kg = build_graph([("a", "r", "b"), ("b", "r", "a")])
    b = kg.entity_vocab.id("b")
    assert len(kg.by_head[b]) == 1 and len(kg.by_tail[b]) == 1


def test_first_seen_interning_and_duplicates_kept():
    kg = build_graph([("c", "s", "a"), ("a", "r", "c"), ("c", "s", "a")])
    assert kg.entity_vocab.items() == ["c", "a"]
    assert kg.relation_vocab.items() == ["s", "r"]
    assert len(kg) == 3
    assert kg.edges_of(0, 0, 1) == (0, 2)


def test_frozen_vocab_rejects_unknown_relation():
    rels = Vocab(["r"], frozen=True)
    with pytest.raises(VocabularyError):
        build_graph([("a", "q", "b")], vocab=rels)


def test_frozen_vocab_interns_fresh_entities():
    train = build_graph([("a", "r", "b")])
    test = build_graph([("x", "r", "y")], vocab=train.relation_vocab)
    assert test.entity_vocab.items() == ["x", "y"]
    assert test.relation_vocab == train.relation_vocab


def test_reflexive_flag():
    kg = build_graph([("a", "r", "a"), ("a", "r", "b")])
    assert [t.reflexive for t in kg.triples] == [True, False]


def test_incident_edges_examples():
    kg = build_graph([("a", "r", "b"), ("b", "s", "c"), ("d", "r", "e")])
    assert incident_edges(kg, kg.entity_vocab.id("b")) == [0, 1]
    iso = build_graph([("a", "r", "b")], entity_vocab=Vocab(["z"]))
    assert incident_edges(iso, 0) == []
    with pytest.raises(IndexError):
        incident_edges(kg, 99)


def test_incident_edges_match_linear_scan(rng):
    kg = random_graph(rng, num_entities=50, num_relations=4, num_edges=120, reflexive=True)
    for node in range(50):
        scan = [e for e, t in enumerate(kg.triples) if node in (t.head, t.tail)]
        assert incident_edges(kg, node) == scan


@given(graphs(max_entities=100, max_edges=60, reflexive=True))
def test_index_invariants(kg):
    assert sum(len(b) for b in kg.by_rel) == len(kg)
    heads = sorted(e for b in kg.by_head for e in b)
    tails = sorted(e for b in kg.by_tail for e in b)
    assert heads == tails == list(range(len(kg)))
    for node in range(kg.num_entities):
        scan = [e for e, t in enumerate(kg.triples) if node in (t.head, t.tail)]
        assert incident_edges(kg, node) == scan


@given(st.lists(st.tuples(st.sampled_from("abcdef"), st.sampled_from("rst"), st.sampled_from("abcdef")), max_size=30))
def test_dump_round_trip(raw):
    kg = build_graph(raw)
    again = build_graph(kg.dump())
    assert again.triples == kg.triples
    assert (again.by_head, again.by_tail, again.by_rel) == (kg.by_head, kg.by_tail, kg.by_rel)
    assert again.entity_vocab == kg.entity_vocab and again.relation_vocab == kg.relation_vocab


def test_graph_is_immutable():
    kg = build_graph([("a", "r", "b")])
    with pytest.raises(Exception):
        kg.triples = ()


def test_load_dataset_layout(tmp_path):
    train_dir = tmp_path / "toy"
    ind_dir = tmp_path / "toy_ind"
    train_dir.mkdir()
    ind_dir.mkdir()
    write(train_dir / "train.txt", "a\tr\tb\nb\ts\tc\n")
    write(train_dir / "valid.txt", "a\ts\tc\n")
    write(ind_dir / "train.txt", "x\ts\ty\n")
    write(ind_dir / "test.txt", "y\tr\tw\n")
    ds = load_dataset(train_dir, ind_dir)
    assert ds.name == "toy"
    assert len(ds.train) == 2 and len(ds.valid) == 1
    assert ds.test_graph.relation_vocab == ds.train.relation_vocab
    # query-only entities are interned after the fact graph's own
    assert ds.test_graph.entity_vocab.items() == ["x", "y", "w"]
    q = ds.test[0]
    assert (q.head, q.rel, q.tail) == (1, 0, 2)


def test_load_dataset_unknown_test_relation(tmp_path):
    (tmp_path / "t").mkdir()
    (tmp_path / "i").mkdir()
    write(tmp_path / "t" / "train.txt", "a\tr\tb\n")
    write(tmp_path / "i" / "train.txt", "x\tq\ty\n")
    write(tmp_path / "i" / "test.txt", "")
    with pytest.raises(VocabularyError):
        load_dataset(tmp_path / "t", tmp_path / "i")


def test_relation_counts(rng):
    kg = random_graph(rng, num_relations=5, num_edges=40)
    expected = np.bincount([t.rel for t in kg.triples], minlength=5)
    assert kg.relation_counts().tolist() == expected.tolist()
